//! Chat sessions for the two A/B arms, backed by an append-only record log.
//!
//! Every state change is one JSON line in `records.jsonl`; the in-memory
//! index is rebuilt from it on open. A trailing partial line (a write cut off
//! by a crash) is truncated away. Survey writes are fsynced.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{SecondsFormat, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bots::BotEnsemble;
use crate::bucket::{gate_and_select, render_final, BucketDecision, BucketError, GatingConfig, TurnContext};
use crate::classifiers::SentimentClassifier;
use crate::eval::{ab_summary, AbSummary, Arm, SurveyResult, MAX_RATING};

pub const LOG_FILE: &str = "records.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session '{0}'")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
    #[error("record log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Bucket(#[from] BucketError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn: u64,
    pub user_text: String,
    pub final_text: String,
    pub timestamp: String,
    pub decision: BucketDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survey {
    pub understood: bool,
    pub rating: u8,
    pub free_text: Option<String>,
    pub submitted_at: String,
    /// 1 for the first submission, bumped on every overwrite.
    pub revision: u32,
}

/// A survey as submitted by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyInput {
    pub session_id: String,
    pub understood: bool,
    pub rating: i64,
    #[serde(default)]
    pub free_text: Option<String>,
}

/// One session with its turns and latest survey, as exported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub arm: Arm,
    pub display_name: String,
    pub created_at: String,
    pub turns: Vec<Turn>,
    pub survey: Option<Survey>,
}

/// What a user gets back for a message. The arm's internals stay out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageReply {
    pub session_id: String,
    pub turn_index: u64,
    pub final_text: String,
    pub decision_summary: DecisionSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub bot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub display_name: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceSummary {
    pub sessions: BTreeMap<Arm, usize>,
    pub turns: usize,
    pub surveys: usize,
    /// `None` until both arms have at least one survey.
    pub ab: Option<AbSummary>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub arm: Option<Arm>,
    pub surveyed_only: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LogRecord {
    Session {
        session_id: String,
        arm: Arm,
        created_at: String,
    },
    Turn {
        session_id: String,
        #[serde(flatten)]
        turn: Turn,
    },
    Survey {
        session_id: String,
        #[serde(flatten)]
        survey: Survey,
    },
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// 128 random bits as hex.
pub fn new_session_id() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

/// Run one user turn through bots and bucket for `arm`.
pub fn run_turn(
    user_text: &str,
    history: &[String],
    arm: Arm,
    model: &dyn SentimentClassifier,
    bots: &BotEnsemble,
    gating: &GatingConfig,
    ctx: &TurnContext,
) -> Result<(BucketDecision, String), BucketError> {
    let cfg = gating.with_sentiment(arm.sentiment_enabled());
    let candidates = bots.candidates(user_text, history);
    let decision = gate_and_select(user_text, &candidates, model, &cfg, ctx)?;
    let text = render_final(&decision);
    Ok((decision, text))
}

struct Log {
    path: PathBuf,
    file: File,
}

impl Log {
    fn append(&mut self, record: &LogRecord, sync: bool) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(record).expect("log records serialize");
        line.push(b'\n');
        let io = |error| ServiceError::Io {
            path: self.path.display().to_string(),
            error,
        };
        self.file.write_all(&line).map_err(io)?;
        if sync {
            self.file.sync_data().map_err(io)?;
        }
        Ok(())
    }
}

pub struct ChatService {
    model: Arc<dyn SentimentClassifier>,
    bots: BotEnsemble,
    gating: GatingConfig,
    seed: u64,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
    /// Session ids in creation order.
    order: RwLock<Vec<String>>,
    log: Mutex<Log>,
}

impl ChatService {
    /// Open (or create) the record log in `data_dir` and rebuild the index.
    pub fn open(
        data_dir: &Path,
        model: Arc<dyn SentimentClassifier>,
        bots: BotEnsemble,
        gating: GatingConfig,
        seed: u64,
    ) -> Result<Self, ServiceError> {
        let io = |p: &Path| {
            let p = p.display().to_string();
            move |error| ServiceError::Io { path: p, error }
        };
        fs::create_dir_all(data_dir).map_err(io(data_dir))?;
        let path = data_dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&path)
            .map_err(io(&path))?;
        let mut content = Vec::new();
        file.read_to_end(&mut content).map_err(io(&path))?;
        let complete = content.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < content.len() {
            tracing::warn!(
                bytes = content.len() - complete,
                "truncating partial record at end of log"
            );
            file.set_len(complete as u64).map_err(io(&path))?;
        }
        file.seek(SeekFrom::Start(complete as u64)).map_err(io(&path))?;

        let service = Self {
            model,
            bots,
            gating,
            seed,
            sessions: RwLock::new(HashMap::new()),
            order: RwLock::new(Vec::new()),
            log: Mutex::new(Log { path, file }),
        };
        let text = std::str::from_utf8(&content[..complete]).map_err(|e| ServiceError::Corrupt {
            line: 0,
            reason: e.to_string(),
        })?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| ServiceError::Corrupt { line: i + 1, reason };
            let record: LogRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            service.apply(record).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(service)
    }

    fn apply(&self, record: LogRecord) -> Result<(), ServiceError> {
        match record {
            LogRecord::Session {
                session_id,
                arm,
                created_at,
            } => {
                let mut sessions = self.sessions.write().unwrap();
                if sessions.contains_key(&session_id) {
                    return Err(ServiceError::Validation(format!("duplicate session '{session_id}'")));
                }
                self.order.write().unwrap().push(session_id.clone());
                sessions.insert(
                    session_id.clone(),
                    Arc::new(Mutex::new(SessionRecord {
                        session_id,
                        arm,
                        display_name: arm.display_name().into(),
                        created_at,
                        turns: Vec::new(),
                        survey: None,
                    })),
                );
            }
            LogRecord::Turn { session_id, turn } => {
                let s = self.session(&session_id)?;
                let mut s = s.lock().unwrap();
                if turn.turn != s.turns.len() as u64 {
                    return Err(ServiceError::Validation(format!(
                        "turn {} out of order for session '{session_id}'",
                        turn.turn
                    )));
                }
                s.turns.push(turn);
            }
            LogRecord::Survey { session_id, survey } => {
                self.session(&session_id)?.lock().unwrap().survey = Some(survey);
            }
        }
        Ok(())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn arm_counts(&self) -> BTreeMap<Arm, usize> {
        let mut counts: BTreeMap<Arm, usize> = Arm::ALL.iter().map(|&a| (a, 0)).collect();
        for s in self.sessions.read().unwrap().values() {
            *counts.entry(s.lock().unwrap().arm).or_default() += 1;
        }
        counts
    }

    /// Create a session on `requested` or, if none, on the arm with fewer
    /// sessions (Susan on a tie).
    pub fn create_session(&self, requested: Option<Arm>) -> Result<SessionInfo, ServiceError> {
        // the log lock also serializes arm balancing
        let mut log = self.log.lock().unwrap();
        let arm = requested.unwrap_or_else(|| {
            let counts = self.arm_counts();
            if counts[&Arm::Rob] < counts[&Arm::Susan] {
                Arm::Rob
            } else {
                Arm::Susan
            }
        });
        let session_id = new_session_id();
        let record = LogRecord::Session {
            session_id: session_id.clone(),
            arm,
            created_at: now(),
        };
        log.append(&record, false)?;
        self.apply(record)?;
        let s = self.session(&session_id)?;
        let s = s.lock().unwrap();
        Ok(SessionInfo {
            session_id,
            display_name: s.display_name.clone(),
            created_at: s.created_at.clone(),
        })
    }

    pub fn post_message(&self, session_id: &str, user_text: &str) -> Result<MessageReply, ServiceError> {
        let text = user_text.trim();
        if text.is_empty() {
            return Err(ServiceError::Validation("message text must not be empty".into()));
        }
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap();
        let history: Vec<String> = s.turns.iter().map(|t| t.user_text.clone()).collect();
        let index = s.turns.len() as u64;
        let ctx = TurnContext::new(session_id, index, self.seed);
        let (decision, final_text) =
            run_turn(text, &history, s.arm, self.model.as_ref(), &self.bots, &self.gating, &ctx)?;
        let turn = Turn {
            turn: index,
            user_text: text.to_string(),
            final_text: final_text.clone(),
            timestamp: now(),
            decision,
        };
        let bot = turn.decision.selected.bot_name.clone();
        self.log.lock().unwrap().append(
            &LogRecord::Turn {
                session_id: session_id.to_string(),
                turn: turn.clone(),
            },
            false,
        )?;
        s.turns.push(turn);
        Ok(MessageReply {
            session_id: session_id.to_string(),
            turn_index: index,
            final_text,
            decision_summary: DecisionSummary { bot },
        })
    }

    /// Store a survey, replacing any earlier one for the session.
    pub fn submit_survey(&self, input: &SurveyInput) -> Result<Survey, ServiceError> {
        if !(0..=MAX_RATING as i64).contains(&input.rating) {
            return Err(ServiceError::Validation(format!(
                "rating must be between 0 and {MAX_RATING}, got {}",
                input.rating
            )));
        }
        let session = self.session(&input.session_id)?;
        let mut s = session.lock().unwrap();
        let survey = Survey {
            understood: input.understood,
            rating: input.rating as u8,
            free_text: input.free_text.clone().filter(|t| !t.trim().is_empty()),
            submitted_at: now(),
            revision: s.survey.as_ref().map_or(1, |p| p.revision + 1),
        };
        self.log.lock().unwrap().append(
            &LogRecord::Survey {
                session_id: input.session_id.clone(),
                survey: survey.clone(),
            },
            true,
        )?;
        s.survey = Some(survey.clone());
        Ok(survey)
    }

    pub fn get_session(&self, session_id: &str) -> Result<SessionRecord, ServiceError> {
        Ok(self.session(session_id)?.lock().unwrap().clone())
    }

    /// Sessions in creation order.
    pub fn export(&self, filter: ExportFilter) -> Vec<SessionRecord> {
        let order = self.order.read().unwrap().clone();
        order
            .iter()
            .filter_map(|id| self.session(id).ok())
            .map(|s| s.lock().unwrap().clone())
            .filter(|s| filter.arm.is_none_or(|a| a == s.arm))
            .filter(|s| !filter.surveyed_only || s.survey.is_some())
            .collect()
    }

    pub fn survey_results(&self) -> Vec<SurveyResult> {
        self.export(ExportFilter::default())
            .into_iter()
            .filter_map(|s| {
                let v = s.survey?;
                Some(SurveyResult {
                    session_id: Some(s.session_id),
                    arm: s.arm,
                    understood: v.understood,
                    rating: v.rating,
                })
            })
            .collect()
    }

    pub fn summary(&self) -> ServiceSummary {
        let all = self.export(ExportFilter::default());
        let results = self.survey_results();
        ServiceSummary {
            sessions: self.arm_counts(),
            turns: all.iter().map(|s| s.turns.len()).sum(),
            surveys: results.len(),
            ab: ab_summary(&results).ok(),
        }
    }

    /// Re-run a stored session's user turns on `arm` without persisting.
    pub fn replay(&self, session_id: &str, arm: Arm) -> Result<Vec<String>, ServiceError> {
        let s = self.get_session(session_id)?;
        let mut history = Vec::new();
        let mut out = Vec::new();
        for t in &s.turns {
            let ctx = TurnContext::new(session_id, t.turn, self.seed);
            let (_, text) =
                run_turn(&t.user_text, &history, arm, self.model.as_ref(), &self.bots, &self.gating, &ctx)?;
            out.push(text);
            history.push(t.user_text.clone());
        }
        Ok(out)
    }

    pub fn gating(&self) -> &GatingConfig {
        &self.gating
    }
}

/// Export lines: one JSON object per session.
pub fn render_export(records: &[SessionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("session records serialize"));
        out.push('\n');
    }
    out
}
