//! Resampling elections with replacement and aggregating analyses across
//! samples.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Ballot, ElectionInstance};
use crate::metrics::StrategyClass;
use crate::pipeline::{analyze, AnalysisConfig};

/// Draws `|B|` ballots with replacement. The multinomial is sampled as a
/// chain of conditional binomials over the distinct rankings.
pub fn resample_election(instance: &ElectionInstance, seed: u64) -> Result<ElectionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining_draws = instance.total_ballots();
    let mut remaining_mass = instance.total_ballots();
    let mut ballots = Vec::with_capacity(instance.ballots().len());
    for b in instance.ballots() {
        if remaining_draws == 0 {
            break;
        }
        let drawn = if b.count >= remaining_mass {
            remaining_draws
        } else {
            let p = b.count as f64 / remaining_mass as f64;
            Binomial::new(remaining_draws, p).map_err(|e| Error::Domain(format!("resampling: {e}")))?.sample(&mut rng)
        };
        remaining_draws -= drawn;
        remaining_mass -= b.count;
        if drawn > 0 {
            ballots.push(Ballot::new(b.ranking.clone(), drawn));
        }
    }
    ElectionInstance::new(instance.candidates().to_vec(), ballots, instance.seats())
}

/// What one bootstrap sample contributed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    pub seed: u64,
    pub solved: bool,
    pub error: Option<String>,
    pub winners: Vec<String>,
    /// Winning sets (one candidate for a single seat) reachable within the
    /// allowance, with their gap and strategy class.
    pub outcomes: Vec<SampleOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub members: Vec<String>,
    pub gap_percent: f64,
    pub class: Option<StrategyClass>,
}

fn analyze_sample(instance: &ElectionInstance, config: &AnalysisConfig, index: usize, seed: u64) -> SampleResult {
    let failed = |error: String| SampleResult {
        index,
        seed,
        solved: false,
        error: Some(error),
        winners: Vec::new(),
        outcomes: Vec::new(),
    };
    let sample = match resample_election(instance, seed) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let analysis = match analyze(&sample, config) {
        Ok(a) => a,
        Err(e) => return failed(e.to_string()),
    };
    let report = analysis.report;
    let outcomes = if instance.seats() == 1 {
        report
            .rows
            .iter()
            .filter_map(|r| {
                r.gap_percent.map(|g| SampleOutcome { members: vec![r.name.clone()], gap_percent: g, class: r.class })
            })
            .collect()
    } else {
        report
            .coalitions
            .iter()
            .map(|c| {
                let mut members = c.members.clone();
                members.sort();
                SampleOutcome { members, gap_percent: c.percent, class: None }
            })
            .collect()
    };
    SampleResult { index, seed, solved: true, error: None, winners: report.winners, outcomes }
}

fn sample_path(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join(format!("sample_{index:05}.json"))
}

/// Analyzes `n_samples` resampled elections with seeds `seed + index`. With
/// a results directory, each sample persists as JSON and existing files
/// with a matching seed are reused.
pub fn bootstrap_analysis(
    instance: &ElectionInstance,
    n_samples: usize,
    config: &AnalysisConfig,
    seed: u64,
    results_dir: Option<&Path>,
) -> Result<BootstrapReport> {
    let indices: Vec<usize> = (0..n_samples).collect();
    bootstrap_selected(instance, &indices, config, seed, results_dir)
}

/// Picks `n_selected` distinct sample indices out of a pool of `pool`
/// draws, sorted ascending.
pub fn select_samples(pool: usize, n_selected: usize, seed: u64) -> Result<Vec<usize>> {
    if n_selected > pool {
        return Err(Error::Domain(format!("cannot select {n_selected} samples from a pool of {pool}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pool, n_selected).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Analyzes the resampled elections at the given indices, each with seed
/// `seed + index`.
pub fn bootstrap_selected(
    instance: &ElectionInstance,
    indices: &[usize],
    config: &AnalysisConfig,
    seed: u64,
    results_dir: Option<&Path>,
) -> Result<BootstrapReport> {
    if indices.is_empty() {
        return Err(Error::Domain("bootstrap needs at least one sample".into()));
    }
    if instance.total_ballots() == 0 {
        return Err(Error::EmptyElection);
    }
    if let Some(dir) = results_dir {
        fs::create_dir_all(dir)?;
    }
    let samples: Vec<SampleResult> = indices
        .par_iter()
        .map(|&index| -> Result<SampleResult> {
            let sample_seed = seed.wrapping_add(index as u64);
            if let Some(dir) = results_dir {
                let path = sample_path(dir, index);
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(saved) = serde_json::from_str::<SampleResult>(&text) {
                        if saved.seed == sample_seed && saved.index == index {
                            return Ok(saved);
                        }
                    }
                }
                let result = analyze_sample(instance, config, index, sample_seed);
                fs::write(&path, serde_json::to_string_pretty(&result)?)?;
                Ok(result)
            } else {
                Ok(analyze_sample(instance, config, index, sample_seed))
            }
        })
        .collect::<Result<_>>()?;
    let summary = summarize(&samples);
    Ok(BootstrapReport { samples, summary })
}

/// Reloads persisted sample results in index order.
pub fn load_samples(dir: &Path) -> Result<Vec<SampleResult>> {
    let mut samples = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("sample_") && name.ends_with(".json") {
            samples.push(serde_json::from_str(&fs::read_to_string(entry.path())?)?);
        }
    }
    samples.sort_by_key(|s: &SampleResult| s.index);
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub samples: Vec<SampleResult>,
    pub summary: BootstrapSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub members: Vec<String>,
    /// Percent of solved samples in which the set could win.
    pub frequency: f64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub selfish: usize,
    pub non_selfish: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub samples: usize,
    pub solved: usize,
    pub unsolved: usize,
    pub rows: Vec<SummaryRow>,
}

/// Aggregates sample results. Statistics cover only the samples in which a
/// set was reachable; the standard deviation is the sample deviation.
pub fn summarize(samples: &[SampleResult]) -> BootstrapSummary {
    let solved = samples.iter().filter(|s| s.solved).count();
    let mut groups: BTreeMap<Vec<String>, Vec<&SampleOutcome>> = BTreeMap::new();
    let mut ordered: Vec<&SampleResult> = samples.iter().collect();
    ordered.sort_by_key(|s| s.index);
    for s in ordered.iter().filter(|s| s.solved) {
        for o in &s.outcomes {
            groups.entry(o.members.clone()).or_default().push(o);
        }
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(members, outcomes)| {
            let n = outcomes.len() as f64;
            let gaps: Vec<f64> = outcomes.iter().map(|o| o.gap_percent).collect();
            let mean = gaps.iter().sum::<f64>() / n;
            let var =
                if gaps.len() > 1 { gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            SummaryRow {
                members,
                frequency: 100.0 * n / solved.max(1) as f64,
                mean,
                std: var.sqrt(),
                min: gaps.iter().copied().fold(f64::INFINITY, f64::min),
                max: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                selfish: outcomes.iter().filter(|o| o.class == Some(StrategyClass::Selfish)).count(),
                non_selfish: outcomes.iter().filter(|o| o.class == Some(StrategyClass::NonSelfish)).count(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.mean.total_cmp(&b.mean).then_with(|| a.members.cmp(&b.members)));
    BootstrapSummary { samples: samples.len(), solved, unsolved: samples.len() - solved, rows }
}

/// Summary table: coalition, frequency, mean, std, min, max, class mix.
pub fn bootstrap_csv(summary: &BootstrapSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["coalition", "freq", "mean", "std", "min", "max", "selfish", "non_selfish"])?;
    for r in &summary.rows {
        w.write_record([
            r.members.join(" "),
            format!("{:.1}", r.frequency),
            format!("{:.2}", r.mean),
            format!("{:.2}", r.std),
            format!("{:.2}", r.min),
            format!("{:.2}", r.max),
            r.selfish.to_string(),
            r.non_selfish.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}
