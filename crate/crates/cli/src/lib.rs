//! Command runner behind the `rcv` binary. Every run writes its artifacts
//! and a manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rcv_core::bootstrap::{bootstrap_csv, bootstrap_selected, select_samples};
use rcv_core::exhaustion_models::models_csv;
use rcv_core::ingest::{normalize_ballots, parse_cvr, read_canonical, roster_for, NormalizationPolicy, SourceFormat};
use rcv_core::pipeline::{
    analyze, render_markdown, resolve_allowance, AllowanceSetting, AnalysisConfig, AnalysisReport,
};
use rcv_core::reduction::remove_irrelevant;
use rcv_core::tabulation::rounds_csv;
use rcv_core::{tabulate, ElectionInstance, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Tabulate,
    Reduce,
    Analyze,
    Exhaustion,
    Bootstrap,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Canonical,
    Source(SourceFormat),
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "canonical" {
            Ok(InputFormat::Canonical)
        } else {
            s.parse().map(InputFormat::Source)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub format: InputFormat,
    pub seats: usize,
    pub allowance: AllowanceSetting,
    pub max_rank: Option<usize>,
    pub tie_order: Option<Vec<String>>,
    pub policy: NormalizationPolicy,
    pub iterations: u64,
    pub seed: u64,
    pub samples: usize,
    /// Resamples drawn before selecting `samples` of them for analysis.
    pub pool: Option<usize>,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input: input.into(),
            format: InputFormat::Canonical,
            seats: 1,
            allowance: AllowanceSetting::Percent { percent: 10.0 },
            max_rank: None,
            tie_order: None,
            policy: NormalizationPolicy::default(),
            iterations: rcv_core::exhaustion_models::DEFAULT_ITERATIONS,
            seed: 0,
            samples: 100,
            pool: None,
            out: out.into(),
            workers: None,
        }
    }

    fn analysis_config(&self, models: bool) -> AnalysisConfig {
        AnalysisConfig {
            allowance: self.allowance.clone(),
            max_rank: self.max_rank,
            iterations: self.iterations,
            seed: self.seed,
            models,
            ..AnalysisConfig::with_percent(0.0)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub input_sha256: String,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> Self {
        ErrorReport { error: e.kind().to_string(), message: e.to_string() }
    }
}

/// Reads and normalizes the input into an instance.
pub fn load_instance(config: &RunConfig) -> Result<(ElectionInstance, Option<rcv_core::ingest::NormalizationReport>)> {
    let bytes = fs::read(&config.input)?;
    let tie = config.tie_order.as_deref();
    match config.format {
        InputFormat::Canonical => Ok((read_canonical(bytes.as_slice(), tie, config.seats)?, None)),
        InputFormat::Source(format) => {
            let raw = parse_cvr(bytes.as_slice(), format)?;
            let mut policy = config.policy.clone();
            if policy.max_rank.is_none() {
                policy.max_rank = config.max_rank;
            }
            let roster = roster_for(&raw, &policy, tie)?;
            let normalized = normalize_ballots(&raw, &policy, &roster, config.seats)?;
            Ok((normalized.instance, Some(normalized.report)))
        }
    }
}

fn write(out: &Path, name: &str, contents: &str, artifacts: &mut Vec<String>) -> Result<()> {
    fs::write(out.join(name), contents)?;
    artifacts.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs one command and returns the text summary for stdout.
pub fn run(config: &RunConfig) -> Result<String> {
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Domain(format!("worker pool: {e}")))?;
            pool.install(|| run_inner(config))
        }
        None => run_inner(config),
    }
}

fn run_inner(config: &RunConfig) -> Result<String> {
    fs::create_dir_all(&config.out)?;
    let out = config.out.as_path();
    let mut artifacts = Vec::new();
    let stdout = match config.command {
        Command::Report => {
            let text = fs::read_to_string(&config.input)?;
            let report: AnalysisReport = serde_json::from_str(&text)?;
            let md = render_markdown(&report);
            write(out, "report.md", &md, &mut artifacts)?;
            md
        }
        Command::Tabulate => {
            let (instance, _) = load_instance(config)?;
            let result = tabulate(&instance)?;
            write(out, "rounds.json", &to_json(&result)?, &mut artifacts)?;
            let table = rounds_csv(&instance, &result);
            write(out, "rounds.csv", &table, &mut artifacts)?;
            format!("{}\n{}", result.structure.render(instance.candidates()), table)
        }
        Command::Reduce => {
            let (instance, _) = load_instance(config)?;
            let (allowance, threshold) = resolve_allowance(&instance, &config.allowance)?;
            let reduction = remove_irrelevant(&instance, allowance.ballots);
            let doc = serde_json::json!({
                "allowance": allowance,
                "threshold": threshold,
                "relevant": reduction.relevant.iter().map(|&c| instance.name(c)).collect::<Vec<_>>(),
                "removed": reduction.removed.iter().map(|&c| instance.name(c)).collect::<Vec<_>>(),
                "certificate": reduction.certificate,
            });
            write(out, "reduction.json", &to_json(&doc)?, &mut artifacts)?;
            format!(
                "allowance {:.2}% ({} ballots): {} relevant, {} removed\n",
                allowance.percent,
                allowance.ballots,
                reduction.relevant.len(),
                reduction.removed.len()
            )
        }
        Command::Analyze | Command::Exhaustion => {
            let (instance, normalization) = load_instance(config)?;
            let analysis = analyze(&instance, &config.analysis_config(true))?;
            let models = models_csv(&analysis.report.models)?;
            write(out, "models.csv", &models, &mut artifacts)?;
            if config.command == Command::Exhaustion {
                models
            } else {
                write(out, "analysis.json", &to_json(&analysis.report)?, &mut artifacts)?;
                write(out, "rounds.json", &to_json(&analysis.tabulation)?, &mut artifacts)?;
                if let Some(n) = normalization {
                    write(out, "normalization.json", &to_json(&n)?, &mut artifacts)?;
                }
                let md = render_markdown(&analysis.report);
                write(out, "report.md", &md, &mut artifacts)?;
                md
            }
        }
        Command::Bootstrap => {
            let (instance, _) = load_instance(config)?;
            let samples_dir = out.join("samples");
            let indices = match config.pool {
                Some(pool) => select_samples(pool, config.samples, config.seed)?,
                None => (0..config.samples).collect(),
            };
            let report = bootstrap_selected(
                &instance,
                &indices,
                &config.analysis_config(false),
                config.seed,
                Some(&samples_dir),
            )?;
            let table = bootstrap_csv(&report.summary)?;
            write(out, "bootstrap.csv", &table, &mut artifacts)?;
            write(out, "bootstrap.json", &to_json(&report.summary)?, &mut artifacts)?;
            format!("{} samples, {} unsolved\n{}", report.summary.samples, report.summary.unsolved, table)
        }
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        input_sha256: digest(&config.input)?,
        artifacts,
    };
    fs::write(out.join("manifest.json"), to_json(&manifest)?)?;
    Ok(stdout)
}

/// Writes the error report next to the artifacts when the output directory
/// is usable, and returns it as JSON.
pub fn report_error(config: Option<&RunConfig>, e: &Error) -> String {
    let json = serde_json::to_string(&ErrorReport::from_error(e)).unwrap_or_default();
    if let Some(c) = config {
        if fs::create_dir_all(&c.out).is_ok() {
            let _ = fs::write(c.out.join("error.json"), format!("{json}\n"));
        }
    }
    json
}
