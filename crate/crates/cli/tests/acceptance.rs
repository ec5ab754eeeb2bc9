//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`. Every check runs even if an
//! earlier one fails; the process exits non-zero if any failed.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sentibucket_core::bots::BotEnsemble;
use sentibucket_core::bucket::{gate_and_select, render_final, GatingConfig, Target, TurnContext};
use sentibucket_core::classifiers::{
    afinn_score, load_model_file, save_model, train_model, ModelKind, Prediction, TrainOptions,
    TrainedModel,
};
use sentibucket_core::corpus::agreement::{cohen_kappa, AnnotationOverlap, KappaMode};
use sentibucket_core::corpus::lexicon::{build_lexicon_samples, discretize_vader, load_lexicon, LexiconKind};
use sentibucket_core::corpus::synth::{signal_corpus, SignalCorpusSpec};
use sentibucket_core::corpus::{load_corpus, CorpusFormat, Source};
use sentibucket_core::eval::{
    ab_summary, classification_report, f_score, format_percent, parse_survey_results, render_matrix_jsonl,
    render_matrix_table, run_experiment_matrix, split, Arm, MatrixConfig, MatrixData, SplitSpec,
};
use sentibucket_core::features::{tokenize, VocabConfig};
use sentibucket_core::label::AnnotationLabel;
use sentibucket_core::service::{ChatService, LOG_FILE};
use sentibucket_core::{SentimentClassifier, SentimentLabel};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sentibucket")
}

fn main() {
    let checks: Vec<Criterion> = vec![
        ("metrics arithmetic", Duration::from_secs(1), metrics_arithmetic),
        ("a/b arithmetic", Duration::from_secs(1), ab_arithmetic),
        ("kappa oracle", Duration::from_secs(5), kappa_oracle),
        ("vader discretization", Duration::from_secs(5), discretization),
        ("forest sanity", Duration::from_secs(30), forest_sanity),
        ("combined training direction", Duration::from_secs(60), combined_training),
        ("afinn rule oracle", Duration::from_secs(5), afinn_oracle),
        ("orchestrator invariants", Duration::from_secs(30), orchestrator_invariants),
        ("service persistence and isolation", Duration::from_secs(30), service_persistence),
        ("experiment matrix", Duration::from_secs(600), experiment_matrix),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let took = start.elapsed();
        let result = result.and_then(|detail| {
            if took > budget {
                Err(format!("took {:.1}s, budget {}s ({detail})", took.as_secs_f64(), budget.as_secs()))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!("PASS  {name} [{:.2}s] {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{:.2}s] {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn pct(x: f64) -> String {
    format_percent(x, 0)
}

/// A reference 5-class report, reconstructed as a confusion matrix
/// (rows gold, columns predicted, most negative first).
const REFERENCE_CONFUSION: [[usize; 5]; 5] = [
    [4, 3, 3, 0, 0],
    [4, 5, 9, 4, 0],
    [2, 2, 139, 20, 6],
    [0, 0, 21, 90, 11],
    [0, 0, 0, 16, 11],
];

/// Its per-class precision, recall, F and support, in whole percent.
const REFERENCE_ROWS: [(u32, u32, u32, usize); 5] =
    [(40, 40, 40, 10), (50, 23, 31, 22), (81, 82, 82, 169), (69, 74, 71, 122), (39, 41, 40, 27)];

fn metrics_arithmetic() -> Check {
    let mut pairs = Vec::new();
    for (g, row) in REFERENCE_CONFUSION.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            let gold = SentimentLabel::from_index(g).unwrap();
            let pred = SentimentLabel::from_index(p).unwrap();
            pairs.extend(std::iter::repeat_n((gold, pred), n));
        }
    }
    let report = classification_report(&pairs);
    for (c, &(p, r, f, support)) in report.classes.iter().zip(&REFERENCE_ROWS) {
        let got = (pct(c.precision), pct(c.recall), pct(c.f1), c.support);
        let want = (format!("{p}%"), format!("{r}%"), format!("{f}%"), support);
        ensure!(got == want, "{}: got {got:?}, want {want:?}", c.label.display_name());
    }
    let neg = &report.classes[1];
    ensure!(neg.precision == 0.5 && (neg.recall - 5.0 / 22.0).abs() < 1e-15, "negative row is not 5/10, 5/22");
    ensure!(pct(neg.f1) == "31%", "(0.50, 5/22) gave {}", pct(neg.f1));
    let vn = &report.classes[0];
    ensure!(vn.precision == 0.4 && vn.recall == 0.4 && pct(vn.f1) == "40%", "(0.40, 0.40) gave {}", pct(vn.f1));
    ensure!(pct(f_score(0.4, 0.4)) == "40%", "f_score(0.4, 0.4)");
    let w = &report.weighted;
    Ok(format!(
        "Negative (0.50, 5/22) -> {}, Very negative (0.40, 0.40) -> {}; totals P {} R {} F {} over {}",
        pct(neg.f1),
        pct(vn.f1),
        format_percent(w.precision, 1),
        format_percent(w.recall, 1),
        format_percent(w.f1, 1),
        w.support
    ))
}

fn ab_arithmetic() -> Check {
    let content = std::fs::read_to_string(fixture("surveys.jsonl")).map_err(|e| e.to_string())?;
    let results = parse_survey_results(&content).map_err(|e| e.to_string())?;
    let s = ab_summary(&results).map_err(|e| e.to_string())?;
    ensure!((s.susan.mean_rating - 2.34).abs() < 1e-12, "Susan mean {}", s.susan.mean_rating);
    ensure!((s.rob.mean_rating - 2.84).abs() < 1e-12, "Rob mean {}", s.rob.mean_rating);
    let imp = s.relative_rating_improvement.ok_or("improvement undefined")? * 100.0;
    ensure!((imp - 21.37).abs() <= 0.01, "relative improvement {imp:.4}%");
    Ok(format!("means {:.2} / {:.2}, improvement {imp:.2}%", s.susan.mean_rating, s.rob.mean_rating))
}

/// Kappa from a 6x6 contingency table, `Skip` as the last category. `None`
/// when undefined: nothing left after filtering, or p_e = 1 with p_o < 1.
fn kappa_brute(pairs: &[(AnnotationLabel, AnnotationLabel)], mode: KappaMode) -> Option<f64> {
    let idx = |l: AnnotationLabel| match l {
        AnnotationLabel::Label(s) => s.index(),
        AnnotationLabel::Skip => 5,
    };
    let mut table = [[0f64; 6]; 6];
    for &(a, b) in pairs {
        if mode == KappaMode::IgnoreSkips && (a == AnnotationLabel::Skip || b == AnnotationLabel::Skip) {
            continue;
        }
        table[idx(a)][idx(b)] += 1.0;
    }
    let n: f64 = table.iter().flatten().sum();
    if n == 0.0 {
        return None;
    }
    let po = (0..6).map(|k| table[k][k]).sum::<f64>() / n;
    let pe = (0..6)
        .map(|k| {
            let row: f64 = table[k].iter().sum();
            let col: f64 = (0..6).map(|r| table[r][k]).sum();
            row / n * col / n
        })
        .sum::<f64>();
    // one shared category: chance agreement is total
    if (pe - 1.0).abs() < 1e-12 {
        return (po == 1.0).then_some(1.0);
    }
    Some((po - pe) / (1.0 - pe))
}

fn kappa_oracle() -> Check {
    use AnnotationLabel::{Label, Skip};
    use SentimentLabel::*;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let all: Vec<AnnotationLabel> = SentimentLabel::ALL.iter().map(|&l| Label(l)).chain([Skip]).collect();
    let mut compared = 0;
    let mut undefined = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(1..=6);
        let agree = rng.random_range(0.0..1.0);
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let a = all[rng.random_range(0..k)];
                let b = if rng.random_bool(agree) { a } else { all[rng.random_range(0..k)] };
                (a, b)
            })
            .collect();
        let overlap = AnnotationOverlap::from_labels(pairs.clone());
        for mode in [KappaMode::IgnoreSkips, KappaMode::StrictSkips] {
            match (cohen_kappa(&overlap, mode), kappa_brute(&pairs, mode)) {
                (Ok(got), Some(want)) => {
                    ensure!((got - want).abs() <= 1e-9, "{mode:?}: {got} vs oracle {want} on {pairs:?}");
                    compared += 1;
                }
                (Err(_), None) => undefined += 1,
                (got, want) => return Err(format!("{mode:?}: {got:?} vs oracle {want:?} on {pairs:?}")),
            }
        }
    }
    let perfect = AnnotationOverlap::from_labels([
        (Label(Positive), Label(Positive)),
        (Label(Negative), Label(Negative)),
        (Label(Neutral), Label(Neutral)),
    ]);
    let chance = AnnotationOverlap::from_labels([
        (Label(Positive), Label(Positive)),
        (Label(Positive), Label(Negative)),
        (Label(Negative), Label(Positive)),
        (Label(Negative), Label(Negative)),
    ]);
    let skipped = AnnotationOverlap::from_labels([(Skip, Label(Positive)), (Label(Negative), Skip)]);
    ensure!(cohen_kappa(&skipped, KappaMode::IgnoreSkips).is_err(), "all-skipped overlap gave a kappa");
    ensure!(kappa_brute(&skipped.pairs.iter().map(|p| (p.a, p.b)).collect::<Vec<_>>(), KappaMode::IgnoreSkips).is_none(), "oracle");
    for mode in [KappaMode::IgnoreSkips, KappaMode::StrictSkips] {
        ensure!(cohen_kappa(&perfect, mode) == Ok(1.0), "perfect agreement gave {:?}", cohen_kappa(&perfect, mode));
        ensure!(cohen_kappa(&chance, mode) == Ok(0.0), "chance agreement gave {:?}", cohen_kappa(&chance, mode));
    }
    Ok(format!("{compared} defined and {undefined} undefined cases agree with the oracle; 1.0 and 0.0 exact"))
}

fn discretization() -> Check {
    use SentimentLabel::*;
    let vader = load_lexicon(&fixture("vader.tsv"), LexiconKind::Vader).map_err(|e| e.to_string())?;
    let samples = build_lexicon_samples(vader.entries()).map_err(|e| e.to_string())?;
    let strong = vader.entries().iter().filter(|e| e.valence.abs() >= 2.5).count();
    ensure!(samples.len() == strong, "{} samples for {strong} entries with |v| >= 2.5", samples.len());
    for s in &samples {
        let v = vader.valence(&s.text).ok_or(format!("sample '{}' not in lexicon", s.text))?;
        ensure!(v.abs() >= 2.5, "'{}' kept with valence {v}", s.text);
        ensure!(s.source == Source::LexiconWord, "'{}' has source {:?}", s.text, s.source);
    }
    let cases = [
        (2.5, Some(Positive)),
        (3.0, Some(Positive)),
        (3.01, Some(VeryPositive)),
        (-2.5, Some(Negative)),
        (-3.0, Some(Negative)),
        (-3.01, Some(VeryNegative)),
        (2.49, None),
        (0.0, None),
        (4.0, Some(VeryPositive)),
    ];
    for (v, want) in cases {
        let got = discretize_vader(v).map_err(|e| e.to_string())?;
        ensure!(got == want, "{v} -> {got:?}, want {want:?}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let v: f64 = rng.random_range(-4.0..=4.0);
        let pos = discretize_vader(v).map_err(|e| e.to_string())?;
        let neg = discretize_vader(-v).map_err(|e| e.to_string())?;
        ensure!(neg == pos.map(SentimentLabel::mirror), "odd symmetry fails at {v}: {pos:?} vs {neg:?}");
    }
    Ok(format!("{} of {} entries kept; boundaries and 1000 symmetric draws hold", samples.len(), vader.len()))
}

fn forest_sanity() -> Check {
    let spec = SignalCorpusSpec::default();
    ensure!(spec.n_records == 1500 && spec.signal_tokens_per_class * 5 == 25, "unexpected corpus spec {spec:?}");
    let corpus = signal_corpus(&spec, 42);
    let (train, test) = split(&corpus, &SplitSpec::seeded(42)).map_err(|e| e.to_string())?;
    let opts = TrainOptions { seed: 42, trees: 25, ..TrainOptions::default() };
    let model = train_model(ModelKind::Forest, &train, &opts).map_err(|e| e.to_string())?;
    let correct = test.iter().filter(|u| model.classify(&u.text) == u.label).count();
    let acc = correct as f64 / test.len() as f64;
    ensure!(acc >= 0.90, "held-out accuracy {acc:.4}");
    let again = train_model(ModelKind::Forest, &train, &opts).map_err(|e| e.to_string())?;
    ensure!(save_model(&model) == save_model(&again), "same seed produced different models");
    Ok(format!("accuracy {:.1}% on {} held-out records; retrain is byte-identical", acc * 100.0, test.len()))
}

fn combined_training() -> Check {
    let human = load_corpus(&fixture("demo.tsv"), CorpusFormat::Tsv).map_err(|e| e.to_string())?;
    let probe = load_corpus(&fixture("lexicon_probe.tsv"), CorpusFormat::Tsv).map_err(|e| e.to_string())?;
    let vader = load_lexicon(&fixture("vader.tsv"), LexiconKind::Vader).map_err(|e| e.to_string())?;
    let samples = build_lexicon_samples(vader.entries()).map_err(|e| e.to_string())?;

    // the probe sentences hinge on lexicon words the human corpus never uses
    let human_vocab: HashSet<String> = human.iter().flat_map(|u| tokenize(&u.text)).collect();
    let probe_words: HashSet<String> = probe
        .iter()
        .flat_map(|u| tokenize(&u.text))
        .filter(|t| samples.iter().any(|s| &s.text == t))
        .collect();
    ensure!(!probe_words.is_empty(), "probe set uses no lexicon words");
    ensure!(
        probe_words.iter().all(|w| !human_vocab.contains(w)),
        "probe lexicon words already in the human corpus"
    );
    ensure!(probe.iter().all(|u| u.label != SentimentLabel::Neutral), "probe set must be non-neutral");

    let opts = TrainOptions { seed: 7, ..TrainOptions::default() };
    let mut combined = human.clone();
    combined.extend(samples);
    let recall = |m: &TrainedModel| probe.iter().filter(|u| m.classify(&u.text) == u.label).count() as f64 / probe.len() as f64;
    let mut lines = Vec::new();
    for seed in [7u64, 8, 9] {
        let opts = TrainOptions { seed, ..opts.clone() };
        let base = recall(&train_model(ModelKind::Forest, &human, &opts).map_err(|e| e.to_string())?);
        let with = recall(&train_model(ModelKind::Forest, &combined, &opts).map_err(|e| e.to_string())?);
        ensure!(with > base, "seed {seed}: non-neutral recall {base:.3} -> {with:.3} did not increase");
        lines.push(format!("seed {seed}: {:.1}% -> {:.1}%", base * 100.0, with * 100.0));
    }
    Ok(format!("non-neutral recall on {} probe sentences, {}", probe.len(), lines.join(", ")))
}

fn afinn_oracle() -> Check {
    let path = fixture("afinn.tsv");
    let lexicon = load_lexicon(&path, LexiconKind::Afinn).map_err(|e| e.to_string())?;
    // independent reading of the word list
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let table: HashMap<String, f64> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (w, v) = l.split_once('\t').expect("word<TAB>valence");
            (w.to_string(), v.trim().parse::<f64>().expect("numeric valence"))
        })
        .collect();
    let words: Vec<&String> = table.keys().filter(|w| w.chars().all(|c| c.is_ascii_lowercase())).collect();
    let filler = ["the", "a", "movie", "today", "was", "and", "with", "friends", "weather", "house"];
    ensure!(filler.iter().all(|f| !table.contains_key(*f)), "filler word in the lexicon");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(1..15);
        let tokens: Vec<String> = (0..n)
            .map(|_| {
                if rng.random_bool(0.4) {
                    (*words.choose(&mut rng).unwrap()).clone()
                } else {
                    filler.choose(&mut rng).unwrap().to_string()
                }
            })
            .collect();
        let sentence = tokens.join(" ");
        let want = tokens.iter().map(|t| table.get(t).copied().unwrap_or(0.0)).sum::<f64>() / tokens.len() as f64;
        let got = afinn_score(&sentence, &lexicon);
        ensure!((got - want).abs() <= 1e-12, "'{sentence}': {got} vs {want}");
    }
    Ok(format!("1000 sentences over {} lexicon words", words.len()))
}

/// Records every text it is asked to classify.
struct Spy<'a> {
    inner: &'a TrainedModel,
    seen: Mutex<Vec<String>>,
}

impl SentimentClassifier for Spy<'_> {
    fn predict(&self, text: &str) -> Prediction {
        self.seen.lock().unwrap().push(text.to_string());
        self.inner.predict(text)
    }
}

fn fixture_model() -> Result<TrainedModel, String> {
    let mut corpus = load_corpus(&fixture("demo.tsv"), CorpusFormat::Tsv).map_err(|e| e.to_string())?;
    let vader = load_lexicon(&fixture("vader.tsv"), LexiconKind::Vader).map_err(|e| e.to_string())?;
    corpus.extend(build_lexicon_samples(vader.entries()).map_err(|e| e.to_string())?);
    let opts = TrainOptions { seed: 7, ..TrainOptions::default() };
    train_model(ModelKind::Forest, &corpus, &opts).map_err(|e| e.to_string())
}

const FRAGMENTS: &[&str] = &[
    "i am so sad today", "my dog died", "i love you alana", "you are terrible", "i am not happy",
    "i never liked it", "tell me a joke", "what is the weather like", "news about death note",
    "tell me about paris", "that is wonderful", "i feel great", "this is awful", "he is miserable",
    "she won the lottery", "okay", "hmm", "i hate mondays", "no", "dogs", "rain again",
    "my friends are amazing", "what do you think", "nobody cares", "it is fine", "headlines please",
    "the movie was boring", "you are so clever", "my cat is sick", "i passed my exam",
];

fn orchestrator_invariants() -> Check {
    let model = fixture_model()?;
    let spy = Spy { inner: &model, seen: Mutex::new(Vec::new()) };
    let bots = BotEnsemble::shipped();
    let base = GatingConfig::default();
    let phrases: Vec<&String> = base.all_prefixes().map(|(_, p)| p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut prefixed = 0;
    let mut fallbacks = 0;
    for turn in 0..10_000u64 {
        let n = rng.random_range(1..=3);
        let user = (0..n).map(|_| *FRAGMENTS.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let history: Vec<String> = (0..rng.random_range(0..4)).map(|_| FRAGMENTS.choose(&mut rng).unwrap().to_string()).collect();
        let enabled = rng.random_bool(0.5);
        let cfg = base.with_sentiment(enabled);
        let candidates = bots.candidates(&user, &history);
        spy.seen.lock().unwrap().clear();
        let ctx = TurnContext::new(format!("s{}", turn % 97), turn, 0);
        let d = gate_and_select(&user, &candidates, &spy, &cfg, &ctx).map_err(|e| e.to_string())?;
        let out = render_final(&d);
        let ctx_msg = || format!("turn {turn} '{user}' (sentiment {enabled}): {d:?}");

        ensure!(d.kicked.iter().all(|k| k.bot_name != d.selected.bot_name), "kicked bot selected: {}", ctx_msg());
        if d.fallback.is_some() {
            fallbacks += 1;
        }
        match &d.prefix {
            Some(p) => {
                prefixed += 1;
                ensure!(enabled, "prefix with sentiment disabled: {}", ctx_msg());
                let u = d.user_label.ok_or_else(|| format!("prefix without user label: {}", ctx_msg()))?;
                ensure!(p.label == u && u.polarity_sign() != 0, "prefix label {:?} vs user {u:?}: {}", p.label, ctx_msg());
                let table = if p.self_directed { &base.self_prefixes } else { &base.prefixes };
                ensure!(table.phrases(u).contains(&p.text), "prefix '{}' not in the {u:?} table", p.text);
                ensure!(!p.self_directed || d.target == Target::System, "self-directed prefix without system target");
                ensure!(!base.is_gating_disabled(&d.selected.bot_name), "prefix on disabled bot: {}", ctx_msg());
                ensure!(out == format!("{} {}", p.text, d.selected.text), "rendered '{out}'");
            }
            None => ensure!(out == d.selected.text, "unprefixed output '{out}' differs from selection"),
        }
        if d.user_label == Some(SentimentLabel::Neutral) {
            ensure!(d.prefix.is_none(), "neutral user got a prefix: {}", ctx_msg());
        }
        if let (Some(raw), Some(flipped)) = (d.user_label_raw, d.user_label) {
            let negated = tokenize(&user).iter().any(|t| base.negation_tokens.contains(t));
            let want = if negated { raw.mirror() } else { raw };
            ensure!(flipped == want, "flip {raw:?} -> {flipped:?} (negated {negated}): {}", ctx_msg());
        }
        let seen = spy.seen.lock().unwrap().clone();
        for c in &d.candidates {
            if base.is_gating_disabled(&c.bot_name) {
                ensure!(c.label.is_none() && !c.gated, "disabled bot {} classified", c.bot_name);
                let other_use = c.text == user || d.candidates.iter().any(|o| o.gated && o.text == c.text);
                ensure!(other_use || !seen.contains(&c.text), "disabled bot text '{}' sent to the model", c.text);
            }
        }
        if !enabled {
            ensure!(seen.is_empty(), "sentiment disabled but {} texts classified", seen.len());
            ensure!(phrases.iter().all(|p| !out.contains(p.as_str())), "Susan output '{out}' contains a prefix phrase");
        }
    }
    ensure!(prefixed > 500, "only {prefixed} prefixed turns; the suite is not exercising prefixes");

    let rob = base.with_sentiment(true);
    let ctx = TurnContext::new("fixed", 0, 0);
    let not_happy = "i am not happy";
    let d = gate_and_select(not_happy, &bots.candidates(not_happy, &[]), &model, &rob, &ctx).map_err(|e| e.to_string())?;
    ensure!(
        d.user_label_raw.map(SentimentLabel::polarity_sign) == Some(1) && d.user_label.map(SentimentLabel::polarity_sign) == Some(-1),
        "'{not_happy}' raw {:?} flipped {:?}",
        d.user_label_raw,
        d.user_label
    );
    let death = "news about death note";
    let d = gate_and_select(death, &bots.candidates(death, &[]), &model, &rob, &ctx).map_err(|e| e.to_string())?;
    ensure!(
        d.prefix.as_ref().is_none_or(|p| p.label.polarity_sign() >= 0),
        "'{death}' got prefix {:?}",
        d.prefix
    );
    Ok(format!("10000 turns, {prefixed} prefixed, {fallbacks} fallbacks; negation and news fixtures hold"))
}

struct Server {
    child: Child,
    port: u16,
}

impl Server {
    fn start(model: &Path, data: &Path) -> Result<Self, String> {
        let port = TcpListener::bind("127.0.0.1:0").and_then(|l| l.local_addr()).map_err(|e| e.to_string())?.port();
        let child = Command::new(bin())
            .args(["serve", "--port", &port.to_string(), "--host", "127.0.0.1"])
            .arg("--model")
            .arg(model)
            .arg("--data-dir")
            .arg(data)
            .env_remove("SENTIBUCKET_PORT")
            .env_remove("SENTIBUCKET_DATA_DIR")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut server = Server { child, port };
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Ok((200, _)) = http(port, "GET", "/health", None) {
                return Ok(server);
            }
            if let Ok(Some(status)) = server.child.try_wait() {
                return Err(format!("server exited early: {status}"));
            }
            if Instant::now() > deadline {
                server.kill();
                return Err("server did not come up".into());
            }
            std::thread::sleep(Duration::from_millis(50));
        }
    }

    /// SIGKILL, no shutdown path.
    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn call(&self, method: &str, path: &str, body: Option<Value>) -> Result<(u16, Value), String> {
        let (status, text) = http(self.port, method, path, body.map(|b| b.to_string()).as_deref())?;
        Ok((status, serde_json::from_str(&text).unwrap_or(Value::String(text))))
    }

    fn export(&self) -> Result<String, String> {
        let (status, text) = http(self.port, "GET", "/export", None)?;
        ensure!(status == 200, "export returned {status}");
        Ok(text)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Minimal HTTP/1.1 client: one request per connection.
fn http(port: u16, method: &str, path: &str, body: Option<&str>) -> Result<(u16, String), String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).map_err(|e| e.to_string())?;
    s.set_read_timeout(Some(Duration::from_secs(10))).map_err(|e| e.to_string())?;
    let body = body.unwrap_or("");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .map_err(|e| e.to_string())?;
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).map_err(|e| e.to_string())?;
    let raw = String::from_utf8(raw).map_err(|e| e.to_string())?;
    let (head, payload) = raw.split_once("\r\n\r\n").ok_or("truncated response")?;
    let status: u16 = head
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .ok_or("bad status line")?;
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    Ok((status, if chunked { dechunk(payload)? } else { payload.to_string() }))
}

fn dechunk(mut rest: &str) -> Result<String, String> {
    let mut out = String::new();
    loop {
        let (size, tail) = rest.split_once("\r\n").ok_or("bad chunk header")?;
        let size = usize::from_str_radix(size.trim(), 16).map_err(|e| e.to_string())?;
        if size == 0 {
            return Ok(out);
        }
        out.push_str(tail.get(..size).ok_or("short chunk")?);
        rest = &tail[size + 2..];
    }
}

const SCRIPT: &[&str] = &["hello there", "i am so sad today", "my dog died", "tell me a joke", "i love you alana"];

fn service_persistence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("model.bin");
    let data = dir.path().join("data");
    let status = Command::new(bin())
        .args(["train", "--trees", "25", "--seed", "7"])
        .arg("--corpus")
        .arg(fixture("demo.tsv"))
        .arg("--lexicon")
        .arg(fixture("vader.tsv"))
        .arg("--out")
        .arg(&model)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "train exited with {status}");

    // quiescent kill: everything acknowledged must come back bit-exactly
    let mut server = Server::start(&model, &data)?;
    let mut ids = Vec::new();
    for i in 0..8 {
        let (st, s) = server.call("POST", "/session", None)?;
        ensure!(st == 201, "create returned {st}: {s}");
        let id = s["session_id"].as_str().ok_or("no session id")?.to_string();
        for text in SCRIPT {
            let (st, r) = server.call("POST", &format!("/session/{id}/message"), Some(json!({ "text": text })))?;
            ensure!(st == 200, "message returned {st}: {r}");
        }
        if i < 6 {
            let survey = json!({ "session_id": id, "understood": i % 2 == 1, "rating": i % 6 });
            ensure!(server.call("POST", "/survey", Some(survey))?.0 == 200, "survey rejected");
        }
        ids.push(id);
    }
    let resubmit = json!({ "session_id": ids[0], "understood": true, "rating": 5, "free_text": "changed my mind" });
    ensure!(server.call("POST", "/survey", Some(resubmit))?.0 == 200, "resubmission rejected");
    let export1 = server.export()?;
    let summary1 = server.call("GET", "/summary", None)?.1;
    server.kill();

    let mut server = Server::start(&model, &data)?;
    ensure!(server.export()? == export1, "export changed across kill/restart");
    ensure!(server.call("GET", "/summary", None)?.1 == summary1, "summary changed across kill/restart");
    ensure!(export1.lines().count() == 8, "expected 8 exported sessions");

    // kill while a client is mid-conversation
    let (_, s) = server.call("POST", "/session", Some(json!({ "arm": "rob" })))?;
    let busy = s["session_id"].as_str().ok_or("no session id")?.to_string();
    let acked = Arc::new(Mutex::new(Vec::<String>::new()));
    let writer = {
        let (acked, busy, port) = (Arc::clone(&acked), busy.clone(), server.port);
        std::thread::spawn(move || {
            for k in 0.. {
                let text = format!("{} {k}", SCRIPT[k % SCRIPT.len()]);
                let body = json!({ "text": text }).to_string();
                match http(port, "POST", &format!("/session/{busy}/message"), Some(&body)) {
                    Ok((200, _)) => acked.lock().unwrap().push(text),
                    _ => break,
                }
            }
        })
    };
    while acked.lock().unwrap().len() < 25 {
        std::thread::sleep(Duration::from_millis(5));
    }
    server.kill();
    writer.join().map_err(|_| "writer thread panicked")?;
    let acked = acked.lock().unwrap().clone();

    // a torn final record, as left by a crash inside a write
    let log = data.join(LOG_FILE);
    std::fs::OpenOptions::new()
        .append(true)
        .open(&log)
        .and_then(|mut f| f.write_all(br#"{"type":"turn","session_id":"#))
        .map_err(|e| e.to_string())?;

    let mut server = Server::start(&model, &data)?;
    let export2 = server.export()?;
    ensure!(export2.starts_with(&export1), "earlier sessions changed after mid-run kill");
    let busy_record: Value = export2
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|v| v["session_id"] == busy.as_str())
        .ok_or("busy session lost")?;
    let turns = busy_record["turns"].as_array().ok_or("no turns")?;
    ensure!(turns.len() >= acked.len(), "{} turns stored, {} acknowledged", turns.len(), acked.len());
    for (i, (t, text)) in turns.iter().zip(&acked).enumerate() {
        ensure!(t["turn"] == i && t["user_text"] == text.as_str(), "turn {i} is {t}");
    }
    server.kill();

    // replay every Rob session through the Susan pipeline
    let trained = load_model_file(&model).map_err(|e| e.to_string())?;
    let svc = ChatService::open(&data, Arc::new(trained), BotEnsemble::shipped(), GatingConfig::default(), 0)
        .map_err(|e| e.to_string())?;
    let gating = GatingConfig::default();
    let mut rob_prefixed = 0;
    let mut replayed = 0;
    for s in svc.export(Default::default()).into_iter().filter(|s| s.arm == Arm::Rob) {
        rob_prefixed += s.turns.iter().filter(|t| t.decision.prefix.is_some()).count();
        let same = svc.replay(&s.session_id, Arm::Rob).map_err(|e| e.to_string())?;
        let stored: Vec<&String> = s.turns.iter().map(|t| &t.final_text).collect();
        ensure!(same.iter().collect::<Vec<_>>() == stored, "Rob replay of {} is not deterministic", s.session_id);
        for out in svc.replay(&s.session_id, Arm::Susan).map_err(|e| e.to_string())? {
            ensure!(gating.all_prefixes().all(|(_, p)| !out.contains(p.as_str())), "Susan replay produced '{out}'");
            replayed += 1;
        }
    }
    ensure!(rob_prefixed > 0, "no Rob turn carried a prefix; isolation check would be vacuous");
    Ok(format!(
        "8 sessions export bit-exactly after SIGKILL; {} acked mid-run turns kept; {replayed} Rob turns ({rob_prefixed} prefixed) replay prefix-free on Susan",
        acked.len()
    ))
}

fn experiment_matrix() -> Check {
    let corpus = load_corpus(&fixture("demo.jsonl"), CorpusFormat::Jsonl).map_err(|e| e.to_string())?;
    let vader = load_lexicon(&fixture("vader.tsv"), LexiconKind::Vader).map_err(|e| e.to_string())?;
    let data = MatrixData {
        corpus,
        lexicon_samples: build_lexicon_samples(vader.entries()).map_err(|e| e.to_string())?,
        afinn: Some(load_lexicon(&fixture("afinn.tsv"), LexiconKind::Afinn).map_err(|e| e.to_string())?),
        vader: Some(vader),
        cross_corpus: Some(load_corpus(&fixture("tweets.tsv"), CorpusFormat::Tsv).map_err(|e| e.to_string())?),
        vocab: VocabConfig::default(),
    };
    let config = MatrixConfig::from_toml(&std::fs::read_to_string(fixture("matrix.toml")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rows = run_experiment_matrix(&config, &data).map_err(|e| e.to_string())?;
    ensure!(rows.len() == config.experiments.len(), "{} rows for {} experiments", rows.len(), config.experiments.len());
    for classes in [3u8, 5] {
        let trees: Vec<usize> = rows
            .iter()
            .filter(|r| r.model == ModelKind::Forest && r.classes == classes && r.note.ends_with("30%"))
            .filter_map(|r| r.trees)
            .collect();
        ensure!(trees == [25, 50, 100, 1000, 2000], "{classes}-class sweep is {trees:?}");
    }
    ensure!(rows.iter().any(|r| r.note.contains("lexicon")), "no lexicon-augmented row");
    for r in &rows {
        let w = &r.report.weighted;
        ensure!(
            [w.precision, w.recall, w.f1, r.report.accuracy].iter().all(|x| (0.0..=1.0).contains(x)),
            "row {} metrics out of range",
            r.index
        );
    }
    let table = render_matrix_table(&rows);
    let jsonl = render_matrix_jsonl(&rows);
    ensure!(table.lines().count() == rows.len() + 1, "table has {} lines", table.lines().count());
    for line in jsonl.lines() {
        serde_json::from_str::<Value>(line).map_err(|e| format!("bad JSON row: {e}"))?;
    }
    ensure!(jsonl.lines().count() == rows.len(), "jsonl has {} lines", jsonl.lines().count());
    let best = |classes: u8| {
        rows.iter()
            .filter(|r| r.classes == classes && r.model == ModelKind::Forest)
            .map(|r| r.report.accuracy)
            .fold(0.0, f64::max)
    };
    Ok(format!(
        "{} rows in both formats; best forest accuracy {:.1}% (3-class), {:.1}% (5-class)",
        rows.len(),
        best(3) * 100.0,
        best(5) * 100.0
    ))
}
