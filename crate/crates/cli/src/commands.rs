use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use anyhow::{bail, Context};

use sentibucket_core::classifiers::{
    load_model_file, save_model_file, train_model, LexiconScorerConfig, ModelKind, Thresholds,
    TrainOptions, TrainedModel,
};
use sentibucket_core::corpus::agreement::{cohen_kappa, kappa_pairwise_mean, kappa_pooled, load_overlaps, KappaMode};
use sentibucket_core::corpus::lexicon::{build_lexicon_samples, load_lexicon, Lexicon, LexiconKind};
use sentibucket_core::corpus::sampling::sample_candidate_utterances;
use sentibucket_core::corpus::{
    corpus_from_annotations, load_corpus, parse_annotations, render_corpus, AnnotatedCorpus, CorpusFormat,
};
use sentibucket_core::eval::{
    ab_summary, classification_report_for, parse_survey_results, render_accuracy_table, render_matrix_jsonl,
    render_matrix_table, run_experiment_matrix, MatrixConfig, MatrixData, THREE_CLASSES,
};
use sentibucket_core::features::VocabConfig;
use sentibucket_core::{SentimentClassifier, SentimentLabel};
use sentibucket_server::ServerConfig;

use crate::*;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn corpus(path: &Path) -> anyhow::Result<AnnotatedCorpus> {
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

fn lexicon(path: &Path, kind: LexiconKind) -> anyhow::Result<Lexicon> {
    Ok(load_lexicon(path, kind)?)
}

pub fn prepare(a: &PrepareArgs) -> anyhow::Result<()> {
    if let Some(pool) = &a.pool {
        let pool: Vec<String> = read(pool)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let words_path = a.opinion_words.as_deref().context("--pool needs --opinion-words")?;
        let words: HashSet<String> = read(words_path)?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with(';'))
            .collect();
        let picked = sample_candidate_utterances(&pool, &words, a.lexical, a.random, a.seed)?;
        let mut out = picked.join("\n");
        out.push('\n');
        return emit(a.out.as_deref(), &out);
    }

    let input = a.input.as_deref().context("--input is required")?;
    let format = a.input_format.unwrap_or(match CorpusFormat::from_path(input) {
        CorpusFormat::Jsonl => InputFormat::Jsonl,
        CorpusFormat::Tsv => InputFormat::Tsv,
    });
    let mut c = match format {
        InputFormat::Tsv => load_corpus(input, CorpusFormat::Tsv)?,
        InputFormat::Jsonl => load_corpus(input, CorpusFormat::Jsonl)?,
        InputFormat::Annotations => corpus_from_annotations(&parse_annotations(&read(input)?)?),
    };
    if a.exclude_ambiguous {
        c = c.filter(|u| u.ambiguous != Some(true));
    }
    if let Some(p) = &a.lexicon {
        c.extend(build_lexicon_samples(lexicon(p, LexiconKind::Vader)?.entries())?);
    }
    if a.collapse {
        c = c.map_labels(SentimentLabel::collapse);
    }
    let out_format = match (a.out_format, &a.out) {
        (Some(OutputFormat::Jsonl), _) => CorpusFormat::Jsonl,
        (Some(OutputFormat::Tsv), _) => CorpusFormat::Tsv,
        (None, Some(p)) => CorpusFormat::from_path(p),
        (None, None) => CorpusFormat::Tsv,
    };
    emit(a.out.as_deref(), &render_corpus(&c, out_format)?)?;
    if a.out.is_some() {
        let counts = c.label_counts();
        let summary: Vec<String> = SentimentLabel::ALL
            .iter()
            .map(|l| format!("{}={}", l.long_name(), counts[l.index()]))
            .collect();
        println!("{} records ({})", c.len(), summary.join(" "));
    }
    Ok(())
}

pub fn kappa(a: &KappaArgs) -> anyhow::Result<()> {
    let mode = match a.mode {
        KappaModeArg::IgnoreSkips => KappaMode::IgnoreSkips,
        KappaModeArg::StrictSkips => KappaMode::StrictSkips,
    };
    let overlaps = load_overlaps(&a.overlap)?;
    if overlaps.is_empty() {
        bail!("{} has no overlap rows", a.overlap.display());
    }
    let mut out = String::new();
    if overlaps.len() > 1 {
        for (i, o) in overlaps.iter().enumerate() {
            let k = match cohen_kappa(o, mode) {
                Ok(k) => format!("{k:.4}"),
                Err(e) => format!("undefined ({e})"),
            };
            writeln!(out, "overlap {} ({} items): {k}", i + 1, o.len())?;
        }
        writeln!(out, "pairwise mean: {:.4}", kappa_pairwise_mean(&overlaps, mode)?)?;
        writeln!(out, "pooled: {:.4}", kappa_pooled(&overlaps, mode)?)?;
    } else {
        writeln!(out, "kappa: {:.4}", cohen_kappa(&overlaps[0], mode)?)?;
    }
    emit(None, &out)
}

fn thresholds(a: &TrainArgs, default: Thresholds) -> anyhow::Result<Thresholds> {
    match &a.thresholds {
        Some(t) => match t[..] {
            [a, b, c, d] => Ok(Thresholds::new([a, b, c, d])?),
            _ => bail!("--thresholds takes exactly four comma-separated values, got {}", t.len()),
        },
        None => Ok(default),
    }
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let model = match a.model {
        ModelArg::Afinn | ModelArg::Vader => {
            if a.corpus.is_some() {
                bail!("lexicon scorers are not trained on a corpus; pass --lexicon only");
            }
            let path = a.lexicon.as_deref().context("lexicon scorers need --lexicon")?;
            if a.model == ModelArg::Afinn {
                let mut cfg = LexiconScorerConfig::afinn(lexicon(path, LexiconKind::Afinn)?);
                cfg.thresholds = thresholds(a, cfg.thresholds)?;
                TrainedModel::Afinn(cfg)
            } else {
                let mut cfg = LexiconScorerConfig::vader(lexicon(path, LexiconKind::Vader)?);
                cfg.thresholds = thresholds(a, cfg.thresholds)?;
                TrainedModel::Vader(cfg)
            }
        }
        ModelArg::Forest | ModelArg::NaiveBayes => {
            if a.thresholds.is_some() {
                bail!("--thresholds only applies to lexicon scorers");
            }
            let path = a.corpus.as_deref().context("--corpus is required")?;
            let mut c = corpus(path)?;
            if let Some(p) = &a.lexicon {
                c.extend(build_lexicon_samples(lexicon(p, LexiconKind::Vader)?.entries())?);
            }
            let mut vocab = VocabConfig {
                remove_stop_words: a.stop_words,
                ..VocabConfig::default()
            };
            if let Some(m) = a.max_vocab {
                vocab.max_size = m;
            }
            let opts = TrainOptions {
                trees: a.trees,
                seed: a.seed,
                alpha: a.alpha,
                vocab,
                ..TrainOptions::default()
            };
            let kind = if a.model == ModelArg::Forest {
                ModelKind::Forest
            } else {
                ModelKind::NaiveBayes
            };
            train_model(kind, &c, &opts).with_context(|| format!("training on {} records", c.len()))?
        }
    };
    save_model_file(&model, &a.out)?;
    println!("wrote {} model to {}", model.kind(), a.out.display());
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let model = load_model_file(&a.model)?;
    let c = corpus(&a.corpus)?;
    if c.is_empty() {
        bail!("{} has no records", a.corpus.display());
    }
    let pairs: Vec<(SentimentLabel, SentimentLabel)> = c
        .iter()
        .map(|u| {
            let p = model.classify(&u.text);
            if a.collapse {
                (u.label.collapse(), p.collapse())
            } else {
                (u.label, p)
            }
        })
        .collect();
    let labels: &[SentimentLabel] = if a.collapse { &THREE_CLASSES } else { &SentimentLabel::ALL };
    let report = classification_report_for(&pairs, labels);
    let text = match a.format {
        ReportFormat::Table => report.render_table(a.decimals),
        ReportFormat::Jsonl => report.render_jsonl(),
    };
    emit(a.out.as_deref(), &text)
}

pub fn matrix(a: &MatrixArgs) -> anyhow::Result<()> {
    let mut config = match &a.config {
        Some(p) => MatrixConfig::from_toml(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => MatrixConfig::standard(a.seed.unwrap_or(0), a.cross_corpus.is_some()),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
        config.split.seed = seed;
    }
    if a.print_config {
        return emit(a.out.as_deref(), &config.to_toml());
    }
    let vader = a.vader.as_deref().map(|p| lexicon(p, LexiconKind::Vader)).transpose()?;
    let data = MatrixData {
        corpus: corpus(&a.corpus)?,
        lexicon_samples: match &vader {
            Some(v) => build_lexicon_samples(v.entries())?,
            None => Vec::new(),
        },
        afinn: a.afinn.as_deref().map(|p| lexicon(p, LexiconKind::Afinn)).transpose()?,
        vader,
        cross_corpus: a.cross_corpus.as_deref().map(corpus).transpose()?,
        vocab: VocabConfig::default(),
    };
    let rows = run_experiment_matrix(&config, &data)?;
    let text = match a.format {
        MatrixFormat::Table => render_matrix_table(&rows),
        MatrixFormat::Accuracy => render_accuracy_table(&rows),
        MatrixFormat::Jsonl => render_matrix_jsonl(&rows),
    };
    emit(a.out.as_deref(), &text)
}

pub fn predict(a: &PredictArgs) -> anyhow::Result<()> {
    let model = load_model_file(&a.model)?;
    let texts: Vec<String> = if a.text.is_empty() {
        std::io::stdin()
            .lock()
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .context("reading stdin")?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect()
    } else {
        a.text.clone()
    };
    let mut out = String::new();
    for t in &texts {
        let p = model.predict(t);
        if a.json {
            let dist: serde_json::Map<String, serde_json::Value> = SentimentLabel::ALL
                .iter()
                .map(|l| (l.long_name().to_string(), p.distribution[l.index()].into()))
                .collect();
            let line = serde_json::json!({ "text": t, "label": p.label.long_name(), "distribution": dist });
            writeln!(out, "{line}")?;
        } else {
            let dist: Vec<String> = SentimentLabel::ALL
                .iter()
                .map(|l| format!("{}={:.4}", l.long_name(), p.distribution[l.index()]))
                .collect();
            writeln!(out, "{}\t{}\t{t}", p.label.long_name(), dist.join(" "))?;
        }
    }
    emit(None, &out)
}

/// Config file, then environment, then flags.
pub fn server_config(a: &ServeArgs) -> anyhow::Result<ServerConfig> {
    let mut cfg = match &a.config {
        Some(p) => ServerConfig::load(p)?,
        None => ServerConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(m) = &a.model {
        cfg.model = Some(m.clone());
    }
    if let Some(h) = &a.host {
        cfg.host = h.clone();
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(d) = &a.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(b) = &a.bots_dir {
        cfg.bots_dir = Some(b.clone());
    }
    if let Some(g) = &a.gating {
        cfg.gating = Some(g.clone());
    }
    if let Some(s) = &a.static_dir {
        cfg.static_dir = Some(s.clone());
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let cfg = server_config(a)?;
    tokio::runtime::Runtime::new()
        .context("starting async runtime")?
        .block_on(sentibucket_server::serve(cfg))
}

pub fn ab_report(a: &AbReportArgs) -> anyhow::Result<()> {
    let results = parse_survey_results(&read(&a.surveys)?)?;
    let summary = ab_summary(&results)?;
    let text = if a.json {
        serde_json::to_string_pretty(&summary)? + "\n"
    } else {
        summary.render_table()
    };
    emit(None, &text)
}
