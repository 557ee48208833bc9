//! Run configuration file (TOML). Every key is optional; relative paths
//! resolve against the file's directory.
//!
//! ```toml
//! corpus = "corpus.jsonl"
//! roster = "roster.csv"
//! follows = "follows.csv"          # enables the following practice
//! epoch = "2013-07-20T00:00:00Z"
//! weeks = 13
//! width_seconds = 604800
//! practices = ["tagging", "retweeting", "mentioning"]
//! rbo_p = 0.9
//! inst_variant = "literal"         # or "normalized"
//! degree_scope = "all_arcs"        # or "within_group"
//! exec = "parallel"                # or "sequential"
//! restrict_to_roster = true
//! count_retweet_hashtags = true
//! out = "out"
//!
//! [[events]]
//! window = 7
//! label = "TV debate"
//!
//! [synth]                          # used by the synth subcommand
//! seed = 42
//! hom = 0.8
//! ```

use std::path::{Path, PathBuf};

use culturestream::exec::ExecMode;
use culturestream::network::DegreeScope;
use culturestream::synth::SynthConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub follows: Option<PathBuf>,
    pub epoch: Option<String>,
    pub weeks: Option<usize>,
    pub width_seconds: Option<i64>,
    pub practices: Option<Vec<String>>,
    pub rbo_p: Option<f64>,
    pub inst_variant: Option<String>,
    pub degree_scope: Option<DegreeScope>,
    pub exec: Option<ExecMode>,
    pub restrict_to_roster: Option<bool>,
    pub count_retweet_hashtags: Option<bool>,
    pub out: Option<PathBuf>,
    pub events: Vec<EventEntry>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub window: usize,
    pub label: String,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus,
            &mut cfg.roster,
            &mut cfg.follows,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
