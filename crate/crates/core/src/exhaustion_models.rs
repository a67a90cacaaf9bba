//! Probability that completing exhausted ballots lets a trailing candidate
//! overturn the result.
//!
//! Three closed-form models put a beta distribution on the share of
//! completions favoring the trailing candidate and read off the tail above
//! the required share. Three bootstraps draw completions per category of
//! exhausted ballots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::ElectionInstance;
use crate::metrics::required_preference;

pub const DEFAULT_ITERATIONS: u64 = 10_000;
const CHUNK: u64 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(BetaParams { a, b })
    }

    /// Prior centred by the gap: `a = max(50 - g/2, 10)`, `b = max(50 + g/2, 10)`.
    pub fn from_gap(gap_percent: f64) -> Self {
        BetaParams { a: (50.0 - gap_percent * 0.5).max(10.0), b: (50.0 + gap_percent * 0.5).max(10.0) }
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_cdf(x: f64, params: BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta cdf argument {x} outside [0, 1]")));
    }
    let BetaParams { a, b } = BetaParams::new(params.a, params.b)?;
    if a == b && x == 0.5 {
        return Ok(0.5);
    }
    statrs::function::beta::checked_beta_reg(a, b, x).map_err(|e| Error::Domain(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFlag {
    /// No exhausted ballots to complete.
    NoPool,
    /// No complete ballots to learn preferences from.
    Unavailable,
    /// Every exhausted ballot already uses all allowed ranks.
    NoCompletable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub probability: f64,
    /// Monte-Carlo standard error, for bootstraps.
    pub std_error: Option<f64>,
    pub flag: Option<ModelFlag>,
}

impl Estimate {
    fn exact(probability: f64) -> Self {
        Estimate { probability: probability.clamp(0.0, 1.0), std_error: None, flag: None }
    }

    fn flagged(flag: ModelFlag) -> Self {
        Estimate { probability: 0.0, std_error: None, flag: Some(flag) }
    }

    fn sampled(wins: u64, iterations: u64) -> Self {
        let p = wins as f64 / iterations as f64;
        Estimate { probability: p, std_error: Some((p * (1.0 - p) / iterations as f64).sqrt()), flag: None }
    }
}

/// Tail probability above the required share `r` (percent).
fn tail(required: f64, params: BetaParams) -> Result<f64> {
    if required >= 100.0 {
        return Ok(0.0);
    }
    if required <= 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - beta_cdf(required / 100.0, params)?)
}

/// Tail above `r` for a beta with the given percentage parameters, treating
/// a zero parameter as a point mass at the opposite end.
fn percent_tail(required: f64, alpha: f64, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Ok(if required < 100.0 { 1.0 } else { 0.0 });
    }
    if alpha <= 0.0 {
        return Ok(if required < 0.0 { 1.0 } else { 0.0 });
    }
    tail(required, BetaParams::new(alpha, beta)?)
}

/// Gap-calibrated beta model.
pub fn gap_beta_probability(gap_percent: f64, exhaust_percent: f64) -> Result<Estimate> {
    let Some(required) = required_preference(gap_percent, exhaust_percent) else {
        return Ok(Estimate::flagged(ModelFlag::NoPool));
    };
    Ok(Estimate::exact(tail(required, BetaParams::from_gap(gap_percent))?))
}

/// Exhausted ballots sharing a first preference, and the complete ballots
/// with that first preference that order the trailing candidate against
/// the opponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    /// First preference; `None` for ballots that rank nobody.
    pub first: Option<usize>,
    pub exhausted: u64,
    /// Exhausted ballots with room for another ranking.
    pub completable: u64,
    pub favor_trailing: u64,
    pub favor_opponents: u64,
}

impl Category {
    fn share(&self) -> Option<f64> {
        let n = self.favor_trailing + self.favor_opponents;
        (n > 0).then(|| self.favor_trailing as f64 / n as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionEvidence {
    pub trailing: usize,
    pub opponents: Vec<usize>,
    pub categories: Vec<Category>,
    pub favor_trailing: u64,
    pub favor_opponents: u64,
}

impl CompletionEvidence {
    /// Sorts ballots against the candidates still `active` when the trailing
    /// candidate falls. A ballot ranking none of them is exhausted; one that
    /// ranks the trailing candidate or an opponent is evidence, counted for
    /// whichever of them it ranks first.
    pub fn collect(
        instance: &ElectionInstance,
        trailing: usize,
        opponents: &[usize],
        active: &[usize],
        max_rank: Option<usize>,
    ) -> Self {
        let m = instance.candidate_count();
        let mut cats: Vec<Category> = (0..=m)
            .map(|c| Category {
                first: (c < m).then_some(c),
                exhausted: 0,
                completable: 0,
                favor_trailing: 0,
                favor_opponents: 0,
            })
            .collect();
        let slot = |first: Option<&usize>| first.copied().unwrap_or(m);
        let (mut yes, mut no) = (0, 0);
        for b in instance.ballots() {
            let cat = &mut cats[slot(b.ranking.first())];
            if !b.ranking.iter().any(|c| active.contains(c)) {
                cat.exhausted += b.count;
                if max_rank.is_none_or(|r| b.ranking.len() < r) {
                    cat.completable += b.count;
                }
                continue;
            }
            let decider = b.ranking.iter().find(|&&c| c == trailing || opponents.contains(&c));
            match decider {
                Some(&c) if c == trailing => {
                    cat.favor_trailing += b.count;
                    yes += b.count;
                }
                Some(_) => {
                    cat.favor_opponents += b.count;
                    no += b.count;
                }
                None => {}
            }
        }
        cats.retain(|c| c.exhausted > 0 || c.favor_trailing + c.favor_opponents > 0);
        CompletionEvidence {
            trailing,
            opponents: opponents.to_vec(),
            categories: cats,
            favor_trailing: yes,
            favor_opponents: no,
        }
    }

    /// Share of all evidence ballots favoring the trailing candidate.
    pub fn overall_share(&self) -> Option<f64> {
        let n = self.favor_trailing + self.favor_opponents;
        (n > 0).then(|| self.favor_trailing as f64 / n as f64)
    }

    /// Per-category share, falling back to the overall share where the
    /// category has no evidence.
    fn category_share(&self, cat: &Category) -> Option<f64> {
        cat.share().or_else(|| self.overall_share())
    }

    pub fn exhausted(&self) -> u64 {
        self.categories.iter().map(|c| c.exhausted).sum()
    }

    /// Exhaustion-weighted percentage of completions favoring the trailing
    /// candidate.
    pub fn weighted_trailing_percent(&self) -> Option<f64> {
        let overall = self.overall_share()?;
        let total = self.exhausted();
        if total == 0 {
            return Some(100.0 * overall);
        }
        let sum: f64 =
            self.categories.iter().map(|c| c.exhausted as f64 * self.category_share(c).unwrap_or(overall)).sum();
        Some(100.0 * sum / total as f64)
    }
}

/// Beta with the evidence's weighted preference percentages as parameters.
pub fn similarity_beta_probability(
    evidence: &CompletionEvidence,
    gap_percent: f64,
    exhaust_percent: f64,
) -> Result<Estimate> {
    let Some(alpha) = evidence.weighted_trailing_percent() else {
        return Ok(Estimate::flagged(ModelFlag::Unavailable));
    };
    let Some(required) = required_preference(gap_percent, exhaust_percent) else {
        return Ok(Estimate::flagged(ModelFlag::NoPool));
    };
    Ok(Estimate::exact(percent_tail(required, alpha, 100.0 - alpha)?))
}

/// Weighted blend of the gap prior and the similarity parameters.
pub fn prior_posterior_probability(
    evidence: &CompletionEvidence,
    gap_percent: f64,
    exhaust_percent: f64,
    prior_weight: f64,
    evidence_weight: f64,
) -> Result<Estimate> {
    let Some(alpha) = evidence.weighted_trailing_percent() else {
        return Ok(Estimate::flagged(ModelFlag::Unavailable));
    };
    let Some(required) = required_preference(gap_percent, exhaust_percent) else {
        return Ok(Estimate::flagged(ModelFlag::NoPool));
    };
    let total = prior_weight + evidence_weight;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Domain("model weights must have a positive sum".into()));
    }
    let prior = BetaParams::from_gap(gap_percent);
    let a = (prior_weight * prior.a + evidence_weight * alpha) / total;
    let b = (prior_weight * prior.b + evidence_weight * (100.0 - alpha)) / total;
    Ok(Estimate::exact(percent_tail(required, a, b)?))
}

/// Counts iterations in which `draw` reaches `gap_votes`. Iterations are
/// split into fixed chunks, each with its own stream of the seeded
/// generator, so the result does not depend on the worker count.
fn run_iterations<F>(iterations: u64, seed: u64, draw: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = iterations.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let n = CHUNK.min(iterations - chunk * CHUNK);
            (0..n).filter(|_| draw(&mut rng)).count() as u64
        })
        .sum()
}

fn binomial(n: u64, p: f64) -> Binomial {
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("probability clamped to [0, 1]")
}

/// Net votes from completing `n` ballots with `k` favoring the trailing
/// candidate.
fn net(n: u64, k: u64) -> i64 {
    2 * k as i64 - n as i64
}

fn category_bootstrap(
    evidence: &CompletionEvidence,
    gap_votes: u64,
    iterations: u64,
    seed: u64,
    completable_only: bool,
) -> Result<Estimate> {
    if iterations == 0 {
        return Err(Error::Domain("bootstrap needs at least one iteration".into()));
    }
    if evidence.overall_share().is_none() {
        return Ok(Estimate::flagged(ModelFlag::Unavailable));
    }
    let pool: Vec<(u64, f64)> = evidence
        .categories
        .iter()
        .map(|c| {
            let n = if completable_only { c.completable } else { c.exhausted };
            (n, evidence.category_share(c).unwrap_or(0.0))
        })
        .filter(|(n, _)| *n > 0)
        .collect();
    let size: u64 = pool.iter().map(|(n, _)| n).sum();
    if size == 0 {
        let flag =
            if completable_only && evidence.exhausted() > 0 { ModelFlag::NoCompletable } else { ModelFlag::NoPool };
        return Ok(Estimate::flagged(flag));
    }
    let dists: Vec<(u64, Binomial)> = pool.iter().map(|&(n, p)| (n, binomial(n, p))).collect();
    let wins = run_iterations(iterations, seed, |rng| {
        let gain: i64 = dists.iter().map(|(n, d)| net(*n, d.sample(rng))).sum();
        gain >= gap_votes as i64
    });
    Ok(Estimate::sampled(wins, iterations))
}

/// Completes every exhausted ballot from its category's observed shares.
pub fn similarity_bootstrap(
    evidence: &CompletionEvidence,
    gap_votes: u64,
    iterations: u64,
    seed: u64,
) -> Result<Estimate> {
    category_bootstrap(evidence, gap_votes, iterations, seed, false)
}

/// As [`similarity_bootstrap`], completing only ballots with spare ranks.
pub fn rank_restricted_bootstrap(
    evidence: &CompletionEvidence,
    gap_votes: u64,
    iterations: u64,
    seed: u64,
) -> Result<Estimate> {
    category_bootstrap(evidence, gap_votes, iterations, seed, true)
}

/// Completes `pool` ballots from one overall share `p`.
pub fn unconditional_bootstrap(p: f64, pool: u64, gap_votes: u64, iterations: u64, seed: u64) -> Result<Estimate> {
    if iterations == 0 {
        return Err(Error::Domain("bootstrap needs at least one iteration".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("share {p} outside [0, 1]")));
    }
    if pool == 0 {
        return Ok(Estimate::flagged(ModelFlag::NoPool));
    }
    let dist = binomial(pool, p);
    let wins = run_iterations(iterations, seed, |rng| net(pool, dist.sample(rng)) >= gap_votes as i64);
    Ok(Estimate::sampled(wins, iterations))
}

/// One row of the model comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub candidate: usize,
    pub name: String,
    pub exhaust_percent: f64,
    pub gap_percent: f64,
    pub gap_votes: u64,
    pub gap_beta: Estimate,
    pub category_bootstrap: Estimate,
    pub rank_restricted_bootstrap: Estimate,
    pub unconditional_bootstrap: Estimate,
    pub similarity: Estimate,
    pub prior_posterior: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub candidate: usize,
    pub name: String,
    pub exhaust_percent: f64,
    pub gap_percent: f64,
    pub gap_votes: u64,
    pub evidence: CompletionEvidence,
}

/// Runs every model for one trailing candidate.
pub fn compare_models(inputs: &ModelInputs, iterations: u64, seed: u64) -> Result<ModelRow> {
    let ev = &inputs.evidence;
    let (g, e) = (inputs.gap_percent, inputs.exhaust_percent);
    let overall = ev.overall_share();
    let unconditional = match overall {
        Some(p) => unconditional_bootstrap(p, ev.exhausted(), inputs.gap_votes, iterations, seed)?,
        None => Estimate::flagged(ModelFlag::Unavailable),
    };
    Ok(ModelRow {
        candidate: inputs.candidate,
        name: inputs.name.clone(),
        exhaust_percent: e,
        gap_percent: g,
        gap_votes: inputs.gap_votes,
        gap_beta: gap_beta_probability(g, e)?,
        category_bootstrap: similarity_bootstrap(ev, inputs.gap_votes, iterations, seed)?,
        rank_restricted_bootstrap: rank_restricted_bootstrap(ev, inputs.gap_votes, iterations, seed)?,
        unconditional_bootstrap: unconditional,
        similarity: similarity_beta_probability(ev, g, e)?,
        prior_posterior: prior_posterior_probability(ev, g, e, 1.0, 1.0)?,
    })
}

fn pct(e: &Estimate) -> String {
    match e.flag {
        Some(flag) => serde_json::to_value(flag).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        None => format!("{:.4}", 100.0 * e.probability),
    }
}

fn se(e: &Estimate) -> String {
    e.std_error.map(|s| format!("{:.4}", 100.0 * s)).unwrap_or_default()
}

/// Model comparison table, probabilities in percent.
pub fn models_csv(rows: &[ModelRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "candidate",
        "exhaust",
        "gap",
        "gap_beta",
        "c_bootstrap",
        "c_bootstrap_se",
        "rank_restricted",
        "rank_restricted_se",
        "u_bootstrap",
        "u_bootstrap_se",
        "similarity",
        "prior_post",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            format!("{:.2}", r.exhaust_percent),
            format!("{:.2}", r.gap_percent),
            pct(&r.gap_beta),
            pct(&r.category_bootstrap),
            se(&r.category_bootstrap),
            pct(&r.rank_restricted_bootstrap),
            se(&r.rank_restricted_bootstrap),
            pct(&r.unconditional_bootstrap),
            se(&r.unconditional_bootstrap),
            pct(&r.similarity),
            pct(&r.prior_posterior),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evidence(cats: &[(u64, u64, u64)]) -> CompletionEvidence {
        let categories: Vec<Category> = cats
            .iter()
            .enumerate()
            .map(|(i, &(ex, y, n))| Category {
                first: Some(i),
                exhausted: ex,
                completable: ex,
                favor_trailing: y,
                favor_opponents: n,
            })
            .collect();
        CompletionEvidence {
            trailing: 0,
            opponents: vec![1],
            favor_trailing: cats.iter().map(|c| c.1).sum(),
            favor_opponents: cats.iter().map(|c| c.2).sum(),
            categories,
        }
    }

    #[test]
    fn beta_cdf_basics() {
        let p = BetaParams::new(3.0, 3.0).unwrap();
        assert!((beta_cdf(0.5, p).unwrap() - 0.5).abs() < 1e-12);
        let u = BetaParams::new(1.0, 1.0).unwrap();
        assert!((beta_cdf(0.3, u).unwrap() - 0.3).abs() < 1e-12);
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(beta_cdf(1.5, u).is_err());
    }

    #[test]
    fn gap_beta_symmetry_and_pool() {
        assert_eq!(gap_beta_probability(0.0, 10.0).unwrap().probability, 0.5);
        let none = gap_beta_probability(1.0, 0.0).unwrap();
        assert_eq!(none.flag, Some(ModelFlag::NoPool));
        assert_eq!(none.probability, 0.0);
    }

    #[test]
    fn similarity_limits() {
        let unanimous = evidence(&[(10, 50, 0)]);
        assert_eq!(similarity_beta_probability(&unanimous, 1.0, 10.0).unwrap().probability, 1.0);
        let even = evidence(&[(10, 25, 25)]);
        let s = similarity_beta_probability(&even, 2.0, 10.0).unwrap().probability;
        let direct = 1.0 - beta_cdf(0.6, BetaParams::new(50.0, 50.0).unwrap()).unwrap();
        assert!((s - direct).abs() < 1e-12);
        let empty = evidence(&[(10, 0, 0)]);
        assert_eq!(similarity_beta_probability(&empty, 1.0, 10.0).unwrap().flag, Some(ModelFlag::Unavailable));
    }

    #[test]
    fn posterior_fixed_point() {
        // Evidence matching the prior's percentages leaves it unchanged.
        let ev = evidence(&[(100, 49, 51)]);
        let post = prior_posterior_probability(&ev, 2.0, 10.0, 1.0, 1.0).unwrap().probability;
        let prior = gap_beta_probability(2.0, 10.0).unwrap().probability;
        assert!((post - prior).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_edges() {
        let unanimous = evidence(&[(10, 5, 0)]);
        assert_eq!(similarity_bootstrap(&unanimous, 4, 200, 7).unwrap().probability, 1.0);
        assert_eq!(similarity_bootstrap(&unanimous, 11, 200, 7).unwrap().probability, 0.0);
        assert_eq!(unconditional_bootstrap(1.0, 10, 3, 100, 1).unwrap().probability, 1.0);
        let a = unconditional_bootstrap(0.55, 1000, 20, 3000, 42).unwrap();
        let b = unconditional_bootstrap(0.55, 1000, 20, 3000, 42).unwrap();
        assert_eq!(a, b);
        assert!(unconditional_bootstrap(0.5, 10, 1, 0, 1).is_err());
    }

    #[test]
    fn rank_restriction() {
        let mut ev = evidence(&[(10, 5, 5)]);
        ev.categories[0].completable = 0;
        assert_eq!(rank_restricted_bootstrap(&ev, 1, 100, 3).unwrap().flag, Some(ModelFlag::NoCompletable));
        ev.categories[0].completable = 10;
        assert_eq!(rank_restricted_bootstrap(&ev, 1, 500, 3).unwrap(), similarity_bootstrap(&ev, 1, 500, 3).unwrap());
    }
}
