//! Engine and service configuration, read from TOML.
//!
//! ```toml
//! port = 8088
//! log_path = "dcm-events.jsonl"
//! context_k = 5
//! seed = 7
//!
//! [params]
//! alpha = 0.3
//! idle_half_life_days = 3.0
//!
//! [embedder]
//! seed = 0
//! dimension = 256
//!
//! [dialogue]
//! kind = "http"
//! url = "http://127.0.0.1:9000/v1/chat"
//! timeout_ms = 10000
//! ```
//!
//! `DCM_CONFIG` names the config file when no path is given explicitly.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::avatar::AvatarParams;
use crate::dialogue::{DialogueClient, HttpDialogueClient, StubClient};
use crate::embed::HashEmbedder;
use crate::error::{DcmError, Result};
use crate::fusion::{FusionSettings, Gazetteer};
use crate::memory::WeightParams;
use crate::tension::Lexicon;

pub const CONFIG_ENV: &str = "DCM_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub seed: u64,
    pub dimension: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dimension: HashEmbedder::DEFAULT_DIMENSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DialogueConfig {
    Stub,
    Http {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for DialogueConfig {
    fn default() -> Self {
        DialogueConfig::Stub
    }
}

impl DialogueConfig {
    pub fn build(&self) -> Result<Arc<dyn DialogueClient>> {
        Ok(match self {
            DialogueConfig::Stub => Arc::new(StubClient),
            DialogueConfig::Http { url, timeout_ms } => Arc::new(
                HttpDialogueClient::new(url.clone(), Duration::from_millis(*timeout_ms))
                    .map_err(|e| DcmError::Config(e.0))?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub port: u16,
    pub log_path: Option<PathBuf>,
    pub gazetteer_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub context_k: usize,
    /// Seed forwarded to the dialogue client.
    pub seed: u64,
    pub params: WeightParams,
    pub embedder: EmbedderConfig,
    pub dialogue: DialogueConfig,
    pub avatar: AvatarParams,
    pub fusion: FusionSettings,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            port: 8088,
            log_path: None,
            gazetteer_path: None,
            lexicon_path: None,
            context_k: 5,
            seed: 0,
            params: WeightParams::default(),
            embedder: EmbedderConfig::default(),
            dialogue: DialogueConfig::default(),
            avatar: AvatarParams::default(),
            fusion: FusionSettings::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(source).map_err(|e| DcmError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Explicit path, else `$DCM_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(Path::new(&p)),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.context_k == 0 {
            return Err(DcmError::Config("context_k must be >= 1".into()));
        }
        if self.embedder.dimension == 0 {
            return Err(DcmError::Config("embedder dimension must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fusion.relevance_floor_ratio) {
            return Err(DcmError::Config("relevance_floor_ratio must lie in [0, 1]".into()));
        }
        if !(self.avatar.w_ref > 0.0 && self.avatar.c_ref > 0.0) {
            return Err(DcmError::Config("avatar references must be positive".into()));
        }
        Ok(())
    }

    pub fn gazetteer(&self) -> Result<Gazetteer> {
        self.gazetteer_path
            .as_deref()
            .map_or_else(|| Ok(Gazetteer::sample()), Gazetteer::load)
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        self.lexicon_path
            .as_deref()
            .map_or_else(|| Ok(Lexicon::default()), Lexicon::load)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c = EngineConfig::from_toml(
            "port = 9000\n[params]\nalpha = 0.4\n[dialogue]\nkind = \"http\"\nurl = \"http://x\"\n",
        )
        .unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.params.alpha, 0.4);
        assert_eq!(c.params.beta, 0.5);
        assert_eq!(
            c.dialogue,
            DialogueConfig::Http {
                url: "http://x".into(),
                timeout_ms: 10_000
            }
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(EngineConfig::from_toml("[params]\nw_forget = 0.9\n").is_err());
        assert!(EngineConfig::from_toml("context_k = 0\n").is_err());
    }
}
