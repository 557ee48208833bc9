//! End-to-end run: ingest → bin → practice measures → fact scores →
//! networks, written as CSV artifacts plus a JSON manifest.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.json
//! ingest_report.csv          reason,count
//! ingest_errors.csv          line,message
//! <practice>/culture_vectors.csv
//! <practice>/{focus,similarity,reproduction,frequency}.csv
//! <practice>/facts.csv
//! <practice>/network_stats.csv   (retweeting, mentioning, following)
//! <practice>/edges.csv           (retweeting, mentioning, following)
//! ```
//!
//! Every input is read and validated before anything is written. Each
//! practice directory is staged and renamed into place, so a failure in one
//! practice leaves the others intact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    load_corpus, load_follow_edges, ExtractOptions, IngestOptions, IngestReport, Practice, Roster,
    Transaction, UserHandle,
};
use crate::exec::ExecMode;
use crate::facts::{score_facts, write_facts_csv, InstitutionVariant};
use crate::measures::{
    practice_series, write_series_csv, Measure, MeasureSeries, RboParams, SeriesGroup,
};
use crate::network::{
    build_follow_graph, build_graph, network_stats, DegreeScope, GroupNetworkStats,
};
use crate::stream::{bin, CultureSet, WindowSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    /// 1 for usage/config problems, 2 for data and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data(_) | PipelineError::Io { .. } => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventMarker {
    pub window: usize,
    pub label: String,
}

/// Which artifact groups a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stages {
    pub measures: bool,
    pub facts: bool,
    pub network: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        measures: true,
        facts: true,
        network: true,
    };
    pub const NONE: Stages = Stages {
        measures: false,
        facts: false,
        network: false,
    };
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub roster: PathBuf,
    pub follows: Option<PathBuf>,
    pub window: WindowSpec,
    pub practices: Vec<Practice>,
    pub rbo: RboParams,
    pub inst_variant: InstitutionVariant,
    pub degree_scope: DegreeScope,
    pub events: Vec<EventMarker>,
    pub out_dir: PathBuf,
    pub extract: ExtractOptions,
    pub exec: ExecMode,
    pub stages: Stages,
    /// Also write the normalized stream as `transactions.jsonl`.
    pub write_transactions: bool,
}

impl RunConfig {
    pub fn new(
        corpus: impl Into<PathBuf>,
        roster: impl Into<PathBuf>,
        window: WindowSpec,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            corpus: corpus.into(),
            roster: roster.into(),
            follows: None,
            window,
            practices: vec![
                Practice::Tagging,
                Practice::Retweeting,
                Practice::Mentioning,
            ],
            rbo: RboParams::default(),
            inst_variant: InstitutionVariant::default(),
            degree_scope: DegreeScope::default(),
            events: Vec::new(),
            out_dir: out_dir.into(),
            extract: ExtractOptions::default(),
            exec: ExecMode::default(),
            stages: Stages::ALL,
            write_transactions: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let missing = |what: &str, p: &Path| {
            PipelineError::Config(format!("{what} {} does not exist", p.display()))
        };
        if !self.corpus.is_file() {
            return Err(missing("corpus", &self.corpus));
        }
        if !self.roster.is_file() {
            return Err(missing("roster", &self.roster));
        }
        if let Some(f) = &self.follows {
            if !f.is_file() {
                return Err(missing("follow edge list", f));
            }
        }
        if self.window.count < 2 && self.stages.measures {
            return Err(PipelineError::Config(
                "reproduction series need at least 2 windows".into(),
            ));
        }
        if self.practices.is_empty() {
            return Err(PipelineError::Config("no practice enabled".into()));
        }
        for e in &self.events {
            if e.window == 0 || e.window > self.window.count {
                return Err(PipelineError::Config(format!(
                    "event {:?} at window {} outside 1..={}",
                    e.label, e.window, self.window.count
                )));
            }
        }
        if self.out_dir.is_file() {
            return Err(PipelineError::Config(format!(
                "output path {} is a file",
                self.out_dir.display()
            )));
        }
        Ok(())
    }

    fn record(&self) -> ConfigRecord {
        let mut practices = self.practices.clone();
        practices.sort();
        practices.dedup();
        ConfigRecord {
            corpus: file_name(&self.corpus),
            roster: file_name(&self.roster),
            follows: self.follows.as_deref().map(file_name),
            window: self.window,
            practices: practices.iter().map(|p| p.as_str()).collect(),
            rbo_p: self.rbo.p(),
            inst_variant: self.inst_variant.as_str(),
            degree_scope: self.degree_scope,
            restrict_to_roster: self.extract.restrict_to_roster,
            count_retweet_hashtags: self.extract.count_retweet_hashtags,
            stages: self.stages,
            events: self.events.clone(),
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

/// Hashed part of the configuration. Inputs appear by file name only, so
/// relocating a run does not change its manifest; their content is covered
/// by the input checksums.
#[derive(Debug, Clone, Serialize)]
struct ConfigRecord {
    corpus: String,
    roster: String,
    follows: Option<String>,
    window: WindowSpec,
    practices: Vec<&'static str>,
    rbo_p: f64,
    inst_variant: &'static str,
    degree_scope: DegreeScope,
    restrict_to_roster: bool,
    count_retweet_hashtags: bool,
    stages: Stages,
    events: Vec<EventMarker>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub records_read: usize,
    pub accepted: usize,
    pub skipped: BTreeMap<&'static str, usize>,
    pub transactions: usize,
    pub references: u64,
    pub dropped_by_binning: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    config: ConfigRecord,
    /// Input name → sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub ingest: IngestSummary,
    /// Relative artifact path → row count and checksum.
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    pub warnings: Vec<String>,
    /// Practice → error message, for practices whose outputs failed.
    pub failures: BTreeMap<String, String>,
}

/// What a run produced, for summaries.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub averages: Vec<MeasureSeries>,
    pub network: Vec<(Practice, Vec<GroupNetworkStats>)>,
}

pub struct Inputs {
    pub roster: Roster,
    pub transactions: Vec<Transaction>,
    pub report: IngestReport,
    pub follows: Vec<(UserHandle, UserHandle)>,
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(io_err(path))
}

/// Reads and validates every input. Nothing is written.
pub fn load_inputs(config: &RunConfig) -> Result<Inputs, PipelineError> {
    config.validate()?;
    let mut checksums = BTreeMap::new();
    let roster_bytes = read(&config.roster)?;
    checksums.insert("roster".to_string(), sha256_hex(&roster_bytes));
    let roster = Roster::from_csv(roster_bytes.as_slice())
        .map_err(|e| PipelineError::Data(format!("roster: {e}")))?;
    let follows = match &config.follows {
        Some(path) => {
            let bytes = read(path)?;
            checksums.insert("follows".to_string(), sha256_hex(&bytes));
            load_follow_edges(bytes.as_slice())
                .map_err(|e| PipelineError::Data(format!("follow edges: {e}")))?
        }
        None => Vec::new(),
    };
    let corpus_bytes = read(&config.corpus)?;
    checksums.insert("corpus".to_string(), sha256_hex(&corpus_bytes));
    let opts = IngestOptions {
        extract: config.extract,
    };
    let ingested = load_corpus(
        BufReader::new(corpus_bytes.as_slice()),
        &roster,
        &config.window.span(),
        &opts,
    )
    .map_err(|e| PipelineError::Data(format!("corpus: {e}")))?;
    let span = config.window.span();
    for t in &ingested.transactions {
        t.validate(&roster, &span)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
    }
    Ok(Inputs {
        roster,
        transactions: ingested.transactions,
        report: ingested.report,
        follows,
        checksums,
    })
}

/// Artifact file names a practice produces under the given stages.
pub fn artifact_names(practice: Practice, stages: Stages) -> Vec<&'static str> {
    let mut names = Vec::new();
    if stages.measures {
        names.extend([
            "culture_vectors.csv",
            "focus.csv",
            "similarity.csv",
            "reproduction.csv",
            "frequency.csv",
        ]);
    }
    if stages.facts {
        names.push("facts.csv");
    }
    if stages.network && practice.is_interpersonal() {
        names.extend(["network_stats.csv", "edges.csv"]);
    }
    names
}

type Files = Vec<(&'static str, Vec<u8>)>;

struct PracticeResult {
    files: Files,
    averages: Vec<MeasureSeries>,
    network: Option<Vec<GroupNetworkStats>>,
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>, String>
where
    F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn practice_outputs(
    practice: Practice,
    config: &RunConfig,
    set: &CultureSet,
    inputs: &Inputs,
) -> Result<PracticeResult, String> {
    let mut result = PracticeResult {
        files: Vec::new(),
        averages: Vec::new(),
        network: None,
    };
    if config.stages.measures {
        result.files.push((
            "culture_vectors.csv",
            csv_bytes(|b| set.write_csv(Some(practice), b))?,
        ));
        let series = practice_series(set, practice, config.rbo, config.exec);
        for (measure, name) in [
            (Measure::Focus, "focus.csv"),
            (Measure::Similarity, "similarity.csv"),
            (Measure::Reproduction, "reproduction.csv"),
            (Measure::Frequency, "frequency.csv"),
        ] {
            let list = series.get(measure);
            result
                .files
                .push((name, csv_bytes(|b| write_series_csv(list, b))?));
            result.averages.extend(
                list.iter()
                    .filter(|s| s.group == SeriesGroup::Average)
                    .cloned(),
            );
        }
    }
    if config.stages.facts {
        let scores = score_facts(set, practice, config.inst_variant, config.exec);
        result
            .files
            .push(("facts.csv", csv_bytes(|b| write_facts_csv(&scores, b))?));
    }
    if config.stages.network && practice.is_interpersonal() {
        let graph = if practice == Practice::Following {
            build_follow_graph(&inputs.follows, &inputs.transactions, &inputs.roster)
        } else {
            build_graph(&inputs.transactions, practice, &inputs.roster)
        };
        let stats = network_stats(&graph, config.degree_scope);
        result.files.push((
            "network_stats.csv",
            csv_bytes(|b| crate::network::write_stats_csv(&stats, b))?,
        ));
        result
            .files
            .push(("edges.csv", csv_bytes(|b| graph.write_edges_csv(b))?));
        result.network = Some(stats);
    }
    Ok(result)
}

fn rows(bytes: &[u8]) -> usize {
    // header excluded; csv output always ends rows with '\n'
    bytes
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        .saturating_sub(1)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_practice_dir(out: &Path, practice: Practice, files: &Files) -> io::Result<()> {
    let staging = out.join(format!(".{}.staging", practice.as_str()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    let target = out.join(practice.as_str());
    let result = (|| {
        fs::create_dir_all(&staging)?;
        for (name, bytes) in files {
            fs::write(staging.join(name), bytes)?;
        }
        if target.is_dir() {
            fs::remove_dir_all(&target)?;
        } else if target.exists() {
            fs::remove_file(&target)?;
        }
        fs::rename(&staging, &target)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

/// Runs every enabled stage and writes artifacts plus `manifest.json`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutput, PipelineError> {
    let inputs = load_inputs(config)?;
    let set = bin(&inputs.transactions, config.window);
    let mut warnings = Vec::new();
    if inputs.transactions.is_empty() {
        warnings.push("corpus produced no transactions".to_string());
    }
    if inputs.report.malformed > 0 {
        warnings.push(format!(
            "{} malformed record(s) skipped",
            inputs.report.malformed
        ));
    }

    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut artifacts = BTreeMap::new();
    let mut top: Files = Vec::new();
    top.push(("ingest_report.csv", {
        let mut b = Vec::new();
        inputs
            .report
            .write_csv(&mut b)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        b
    }));
    top.push(("ingest_errors.csv", {
        let mut b = Vec::new();
        inputs
            .report
            .write_errors_csv(&mut b)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        b
    }));
    if config.write_transactions {
        let mut b = Vec::new();
        crate::corpus::write_transactions(&inputs.transactions, &mut b)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        top.push(("transactions.jsonl", b));
    }
    for (name, bytes) in &top {
        write_atomic(&out.join(name), bytes)?;
        let rows = if name.ends_with(".jsonl") {
            bytes.iter().filter(|&&b| b == b'\n').count()
        } else {
            rows(bytes)
        };
        artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                rows,
                sha256: sha256_hex(bytes),
            },
        );
    }

    let mut practices = config.practices.clone();
    practices.sort();
    practices.dedup();
    let mut failures = BTreeMap::new();
    let mut averages = Vec::new();
    let mut network = Vec::new();
    for practice in practices {
        let produced = practice_outputs(practice, config, &set, &inputs).and_then(|r| {
            write_practice_dir(out, practice, &r.files)
                .map(|_| r)
                .map_err(|e| e.to_string())
        });
        match produced {
            Ok(r) => {
                for (name, bytes) in &r.files {
                    artifacts.insert(
                        format!("{}/{}", practice.as_str(), name),
                        ArtifactRecord {
                            rows: rows(bytes),
                            sha256: sha256_hex(bytes),
                        },
                    );
                }
                averages.extend(r.averages);
                if let Some(stats) = r.network {
                    network.push((practice, stats));
                }
            }
            Err(e) => {
                failures.insert(practice.as_str().to_string(), e);
            }
        }
    }

    let record = config.record();
    let config_hash = sha256_hex(&serde_json::to_vec(&record).expect("config record serializes"));
    let report = &inputs.report;
    let manifest = Manifest {
        config_hash,
        config: record,
        inputs: inputs.checksums,
        ingest: IngestSummary {
            records_read: report.records_read,
            accepted: report.accepted,
            skipped: crate::corpus::SkipReason::ALL
                .iter()
                .map(|&r| (r.as_str(), report.count(r)))
                .collect(),
            transactions: inputs.transactions.len(),
            references: set.reference_total(),
            dropped_by_binning: set.dropped,
        },
        artifacts,
        warnings,
        failures,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write_atomic(&out.join("manifest.json"), &json)?;
    Ok(RunOutput {
        manifest,
        averages,
        network,
    })
}
