//! `culturestream` command-line front end.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use culturestream::corpus::{parse_timestamp, write_transactions, Practice};
use culturestream::facts::InstitutionVariant;
use culturestream::measures::RboParams;
use culturestream::pipeline::{
    run_pipeline, EventMarker, PipelineError, RunConfig, RunOutput, Stages,
};
use culturestream::selftest::selftest;
use culturestream::stream::{WindowSpec, WEEK};
use culturestream::synth::{generate, SynthConfig};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "culturestream",
    version,
    about = "Socio-cultural measures over group-attributed message streams"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Start of window 1 (ISO 8601 date or datetime, or Unix seconds).
    #[arg(long, global = true, value_name = "ISO8601")]
    epoch: Option<String>,
    /// Number of weekly windows.
    #[arg(long, global = true, value_name = "N")]
    weeks: Option<usize>,
    /// RBO persistence p in [0, 1) [default: 0.9].
    #[arg(long = "rbo-p", global = true, value_name = "FLOAT")]
    rbo_p: Option<f64>,
    /// literal | normalized [default: literal].
    #[arg(long = "inst-variant", global = true, value_name = "VARIANT")]
    inst_variant: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for the synth subcommand.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Corpus file (JSON lines).
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Roster CSV (user,group).
    #[arg(long, global = true, value_name = "PATH")]
    roster: Option<PathBuf>,
    /// Follow edge list CSV (source,target); enables the following practice.
    #[arg(long, global = true, value_name = "PATH")]
    follows: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize the corpus; writes the ingest report and transactions.jsonl.
    Ingest,
    /// Culture vectors and focus, similarity, reproduction and frequency series.
    Measure,
    /// Institutionness and burst episodes per fact.
    Facts,
    /// Practice network statistics and edge lists.
    Network,
    /// Generate a synthetic corpus and roster.
    Synth,
    /// Run every stage and print a summary.
    Report,
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Pipeline(PipelineError),
    Data(String),
    Selftest,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Pipeline(e) => e.exit_code() as u8,
            Failure::Data(_) => 2,
            Failure::Selftest => 3,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Data(m) => eprintln!("error: {m}"),
                Failure::Pipeline(e) => eprintln!("error: {e}"),
                Failure::Selftest => eprintln!("selftest failed"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let rbo_p = cli.rbo_p.or(file.rbo_p).unwrap_or(RboParams::DEFAULT_P);
    let rbo = RboParams::new(rbo_p).map_err(|e| Failure::Usage(e.to_string()))?;
    match cli.command {
        Command::Selftest => return run_selftest(rbo),
        Command::Synth => return run_synth(&cli, &file),
        _ => {}
    }
    let stages = match cli.command {
        Command::Ingest => Stages::NONE,
        Command::Measure => Stages {
            measures: true,
            ..Stages::NONE
        },
        Command::Facts => Stages {
            facts: true,
            ..Stages::NONE
        },
        Command::Network => Stages {
            network: true,
            ..Stages::NONE
        },
        _ => Stages::ALL,
    };
    let mut config = run_config(&cli, &file, rbo)?;
    config.stages = stages;
    config.write_transactions = matches!(cli.command, Command::Ingest);
    let output = run_pipeline(&config)?;
    for w in &output.manifest.warnings {
        eprintln!("warning: {w}");
    }
    for (p, e) in &output.manifest.failures {
        eprintln!("error: practice {p}: {e}");
    }
    if matches!(cli.command, Command::Report) {
        let text = render_report(&config, &output).expect("formatting into a String");
        // a closed pipe (e.g. `| head`) is not an error
        let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
    } else {
        println!(
            "{} artifacts written to {}",
            output.manifest.artifacts.len() + 1,
            config.out_dir.display()
        );
    }
    if output.manifest.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!(
            "{} practice(s) failed",
            output.manifest.failures.len()
        )))
    }
}

fn parse_epoch(raw: &str) -> Result<i64, Failure> {
    parse_timestamp(raw).ok_or_else(|| Failure::Usage(format!("cannot parse epoch {raw:?}")))
}

fn run_config(cli: &Cli, file: &FileConfig, rbo: RboParams) -> Result<RunConfig, Failure> {
    let need = |flag: Option<&PathBuf>, cfg: &Option<PathBuf>, what: &str| {
        flag.or(cfg.as_ref()).cloned().ok_or_else(|| {
            Failure::Usage(format!("no {what} given (use --{what} or the config file)"))
        })
    };
    let corpus = need(cli.corpus.as_ref(), &file.corpus, "corpus")?;
    let roster = need(cli.roster.as_ref(), &file.roster, "roster")?;
    let out = need(cli.out.as_ref(), &file.out, "out")?;
    let epoch = match cli.epoch.as_ref().or(file.epoch.as_ref()) {
        Some(raw) => parse_epoch(raw)?,
        None => {
            return Err(Failure::Usage(
                "no epoch given (use --epoch or the config file)".into(),
            ))
        }
    };
    let weeks = cli.weeks.or(file.weeks).unwrap_or(13);
    let width = file.width_seconds.unwrap_or(WEEK);
    let window = WindowSpec::new(epoch, width, weeks).map_err(|e| Failure::Usage(e.to_string()))?;

    let mut config = RunConfig::new(corpus, roster, window, out);
    config.follows = cli.follows.clone().or_else(|| file.follows.clone());
    config.rbo = rbo;
    if let Some(names) = &file.practices {
        config.practices = names
            .iter()
            .map(|n| {
                n.parse::<Practice>()
                    .map_err(|e| Failure::Usage(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
    }
    if config.follows.is_some() && !config.practices.contains(&Practice::Following) {
        config.practices.push(Practice::Following);
    }
    if let Some(v) = cli.inst_variant.as_ref().or(file.inst_variant.as_ref()) {
        config.inst_variant = v.parse::<InstitutionVariant>().map_err(Failure::Usage)?;
    }
    if let Some(s) = file.degree_scope {
        config.degree_scope = s;
    }
    if let Some(e) = file.exec {
        config.exec = e;
    }
    if cli.sequential {
        config.exec = culturestream::ExecMode::Sequential;
    }
    if let Some(b) = file.restrict_to_roster {
        config.extract.restrict_to_roster = b;
    }
    if let Some(b) = file.count_retweet_hashtags {
        config.extract.count_retweet_hashtags = b;
    }
    config.events = file
        .events
        .iter()
        .map(|e| EventMarker {
            window: e.window,
            label: e.label.clone(),
        })
        .collect();
    Ok(config)
}

fn run_selftest(rbo: RboParams) -> Result<(), Failure> {
    let report = selftest(rbo);
    for c in &report.checks {
        println!(
            "{} {:<32} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = report.failures().count();
    println!("{} checks, {} failed", report.checks.len(), failed);
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Selftest)
    }
}

fn run_synth(cli: &Cli, file: &FileConfig) -> Result<(), Failure> {
    let mut cfg = file.synth.clone().unwrap_or_default();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.weeks.or(file.weeks) {
        cfg.windows = w;
    }
    if let Some(raw) = cli.epoch.as_ref().or(file.epoch.as_ref()) {
        cfg.epoch = parse_epoch(raw)?;
    }
    if let Some(w) = file.width_seconds {
        cfg.width = w;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .ok_or_else(|| Failure::Usage("no output directory given (use --out)".into()))?;
    let synth = generate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_synth(&out, &cfg, &synth)
        .map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    println!(
        "{} transactions for {} users written to {}",
        synth.transactions.len(),
        synth.roster.len(),
        out.display()
    );
    Ok(())
}

fn write_synth(
    out: &std::path::Path,
    cfg: &SynthConfig,
    synth: &culturestream::synth::Synthesized,
) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let mut corpus = Vec::new();
    write_transactions(&synth.transactions, &mut corpus).map_err(|e| e.to_string())?;
    fs::write(out.join("corpus.jsonl"), corpus).map_err(|e| e.to_string())?;
    let mut roster = Vec::new();
    synth
        .roster
        .write_csv(&mut roster)
        .map_err(|e| e.to_string())?;
    fs::write(out.join("roster.csv"), roster).map_err(|e| e.to_string())?;
    let run = format!(
        "corpus = \"corpus.jsonl\"\nroster = \"roster.csv\"\nepoch = \"{}\"\nweeks = {}\nwidth_seconds = {}\nout = \"out\"\n",
        cfg.epoch, cfg.windows, cfg.width
    );
    fs::write(out.join("run.toml"), run).map_err(|e| e.to_string())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn render_report(config: &RunConfig, output: &RunOutput) -> Result<String, std::fmt::Error> {
    use std::fmt::Write as _;
    let mut text = String::new();
    let m = &output.manifest;
    writeln!(text, "config {}", m.config_hash)?;
    writeln!(
        text,
        "records {}  accepted {}  transactions {}  references {}",
        m.ingest.records_read, m.ingest.accepted, m.ingest.transactions, m.ingest.references
    )?;
    let marks: Vec<String> = config
        .events
        .iter()
        .map(|e| format!("w{}={}", e.window, e.label))
        .collect();
    if !marks.is_empty() {
        writeln!(text, "events {}", marks.join(", "))?;
    }
    for s in &output.averages {
        let values: Vec<String> = s
            .points
            .iter()
            .map(|(w, v)| {
                let mark = if config.events.iter().any(|e| e.window == *w) {
                    "*"
                } else {
                    ""
                };
                format!("{}{}", fmt(*v), mark)
            })
            .collect();
        writeln!(
            text,
            "{:<10} {:<12} {}",
            s.practice.as_str(),
            s.measure.as_str(),
            values.join(" ")
        )?;
    }
    for (practice, stats) in &output.network {
        writeln!(text, "network {}", practice.as_str())?;
        writeln!(
            text,
            "  {:<10} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "group", "nodes", "D", "k_out", "k_in", "w_out", "w_in", "H"
        )?;
        for s in stats {
            let d = s.degrees;
            writeln!(
                text,
                "  {:<10} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
                s.scope,
                s.nodes,
                fmt(s.density),
                fmt(d.map(|d| d.k_out)),
                fmt(d.map(|d| d.k_in)),
                fmt(d.map(|d| d.w_out)),
                fmt(d.map(|d| d.w_in)),
                fmt(s.homophily)
            )?;
        }
    }
    Ok(text)
}
