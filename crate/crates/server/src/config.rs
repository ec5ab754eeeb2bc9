use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const ENV_PORT: &str = "SENTIBUCKET_PORT";
pub const ENV_DATA_DIR: &str = "SENTIBUCKET_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Trained model artifact. Required.
    pub model: Option<PathBuf>,
    /// Directory of bot rule files; the shipped bots when unset.
    pub bots_dir: Option<PathBuf>,
    /// Gating TOML; the shipped config when unset.
    pub gating: Option<PathBuf>,
    /// Seed for prefix phrase choice.
    pub seed: u64,
    /// Directory served at `/` (the browser client).
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            model: None,
            bots_dir: None,
            gating: None,
            seed: 0,
            static_dir: None,
        }
    }
}

impl ServerConfig {
    pub fn from_toml(src: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(src)?)
    }

    /// Read a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&src).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [&mut self.model, &mut self.bots_dir, &mut self.gating, &mut self.static_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Apply `SENTIBUCKET_PORT` and `SENTIBUCKET_DATA_DIR`.
    pub fn apply_env(&mut self) -> anyhow::Result<()> {
        self.apply_overrides(
            std::env::var(ENV_PORT).ok().as_deref(),
            std::env::var(ENV_DATA_DIR).ok().as_deref(),
        )
    }

    pub fn apply_overrides(&mut self, port: Option<&str>, data_dir: Option<&str>) -> anyhow::Result<()> {
        if let Some(p) = port {
            self.port = p
                .trim()
                .parse()
                .with_context(|| format!("{ENV_PORT}={p:?} is not a port number"))?;
        }
        if let Some(d) = data_dir {
            if d.is_empty() {
                bail!("{ENV_DATA_DIR} is empty");
            }
            self.data_dir = PathBuf::from(d);
        }
        Ok(())
    }
}
