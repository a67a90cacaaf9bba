//! Removal of candidates who cannot influence the outcome under a
//! ballot-addition allowance, and the search for the largest allowance at
//! which removal still shrinks an election to a target size.

use serde::{Deserialize, Serialize};

use crate::instance::ElectionInstance;
use crate::rational::{self, Rational};
use crate::strict_support::{strict_support_without, SupportCache, SupportTables};

/// Ballot-addition budget. Percentages convert with
/// `floor(percent * ballots / 100)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allowance {
    pub ballots: u64,
    pub percent: f64,
}

impl Allowance {
    pub fn from_ballots(ballots: u64, total: u64) -> Self {
        let percent = if total == 0 { 0.0 } else { 100.0 * ballots as f64 / total as f64 };
        Allowance { ballots, percent }
    }

    /// `hundredths` is the percentage times 100 (e.g. 470 for 4.70%).
    pub fn from_hundredths(hundredths: u64, total: u64) -> Self {
        let ballots = (hundredths as u128 * total as u128 / 10_000) as u64;
        Allowance::from_ballots(ballots, total)
    }

    pub fn from_percent(percent: f64, total: u64) -> Self {
        Allowance::from_hundredths(percent_to_hundredths(percent), total)
    }
}

pub fn percent_to_hundredths(percent: f64) -> u64 {
    (percent.max(0.0) * 100.0).round() as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMargin {
    pub removed: usize,
    pub upper: usize,
    /// `S_j^i - (B + S[i])`; positive means the removed candidate stays below.
    pub margin: i64,
    /// Quota bound minus `S_j^i`.
    pub quota_slack: i64,
}

/// One accepted block removal, in original roster indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalStep {
    pub removed: Vec<usize>,
    pub upper: Vec<usize>,
    pub margins: Vec<PairMargin>,
    /// True when only the extended condition admitted the block.
    pub extended: bool,
    pub early_winners: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub allowance_ballots: u64,
    /// Surviving candidates, original indices in roster order.
    pub relevant: Vec<usize>,
    /// Removed candidates, original indices in removal order.
    pub removed: Vec<usize>,
    /// Instance over `relevant` with the removed candidates' votes moved on.
    pub reduced: ElectionInstance,
    pub early_winners: Vec<usize>,
    pub certificate: Vec<RemovalStep>,
}

impl ReductionResult {
    /// Original index of a reduced-instance candidate.
    pub fn original(&self, reduced_index: usize) -> usize {
        self.relevant[reduced_index]
    }
}

/// Candidates ordered by ascending first-choice votes; ties put the
/// candidate later in the roster first, matching elimination tie-breaks.
fn ascending_first_choice(instance: &ElectionInstance) -> Vec<usize> {
    let first = instance.first_choices();
    let mut order: Vec<usize> = (0..instance.candidate_count()).collect();
    order.sort_by(|&a, &b| first[a].cmp(&first[b]).then(b.cmp(&a)));
    order
}

/// Quota bound used by the removal conditions: the Droop quota for one
/// seat, `(k + 1) Q` for several so that no early win is presumed.
pub fn condition_quota(instance: &ElectionInstance) -> u64 {
    let q = instance.quota();
    if instance.seats() > 1 {
        (instance.seats() as u64 + 1) * q
    } else {
        q
    }
}

/// Strict-support removal with the extended condition and multi-winner
/// verification. Fails soft: when nothing can be removed the full roster is
/// returned as relevant.
pub fn remove_irrelevant(instance: &ElectionInstance, allowance: u64) -> ReductionResult {
    let budget = allowance;
    let quota = instance.quota();
    let bound = condition_quota(instance);
    let seats = instance.seats();
    let mut current = instance.clone();
    let mut index: Vec<usize> = (0..instance.candidate_count()).collect();
    let mut removed_all = Vec::new();
    let mut early_all = Vec::new();
    let mut certificate = Vec::new();

    'outer: loop {
        let order = ascending_first_choice(&current);
        let cache = SupportCache::new(&current);
        let mut taken = 0usize;
        let mut single: Option<Vec<u64>> = None;
        loop {
            if let Some(s) = &single {
                if order[..taken].iter().any(|&c| budget + s[c] >= bound) {
                    break 'outer;
                }
            }
            if order.len() - (taken + 1) < seats.max(1) {
                break 'outer;
            }
            taken += 1;
            let lower = &order[..taken];
            let upper = &order[taken..];
            let tables = cache.matrix(lower, upper);
            let (plain, extended_ok) = {
                let plain = original_condition(&tables, budget, bound);
                let ok = plain || extended_removal_condition(&current, lower, upper, budget, &tables, bound);
                (plain, ok)
            };
            single = Some(tables.single.clone());
            if !extended_ok {
                continue;
            }
            let (reduced, keep) = current.reduce(lower).expect("reduction keeps a valid roster");
            let mut early = Vec::new();
            if seats > 1 {
                let after = reduced.first_choices();
                for (new, &old) in keep.iter().enumerate() {
                    if after[new] >= quota {
                        if !multi_winner_verification(&current, old, lower, budget) {
                            break 'outer;
                        }
                        early.push(index[old]);
                    }
                }
            }
            let to_orig = |set: &[usize]| set.iter().map(|&c| index[c]).collect::<Vec<_>>();
            certificate.push(RemovalStep {
                removed: to_orig(lower),
                upper: to_orig(upper),
                margins: margins(&tables, budget, bound, &index),
                extended: !plain,
                early_winners: early.clone(),
            });
            removed_all.extend(to_orig(lower));
            early_all.extend(early);
            index = keep.iter().map(|&c| index[c]).collect();
            current = reduced;
            continue 'outer;
        }
    }

    ReductionResult {
        allowance_ballots: budget,
        relevant: index,
        removed: removed_all,
        reduced: current,
        early_winners: early_all,
        certificate,
    }
}

fn original_condition(tables: &SupportTables, budget: u64, bound: u64) -> bool {
    tables
        .removed
        .iter()
        .enumerate()
        .all(|(a, &i)| tables.pairwise[a].iter().all(|&sji| budget + tables.single[i] < sji && sji < bound))
}

fn margins(tables: &SupportTables, budget: u64, bound: u64, index: &[usize]) -> Vec<PairMargin> {
    let mut out = Vec::new();
    for (a, &i) in tables.removed.iter().enumerate() {
        for (b, &j) in tables.upper.iter().enumerate() {
            let sji = tables.pairwise[a][b] as i64;
            out.push(PairMargin {
                removed: index[i],
                upper: index[j],
                margin: sji - (budget + tables.single[i]) as i64,
                quota_slack: bound as i64 - sji,
            });
        }
    }
    out
}

/// The plain pairwise condition, or, for every removed candidate that fails
/// it, proof that the budget cannot rescue both it and the weakest upper
/// candidate and that it still falls once the weakest is gone.
pub fn extended_removal_condition(
    instance: &ElectionInstance,
    lower: &[usize],
    upper: &[usize],
    budget: u64,
    tables: &SupportTables,
    bound: u64,
) -> bool {
    if original_condition(tables, budget, bound) {
        return true;
    }
    if upper.len() < 2 {
        return false;
    }
    for &i in lower {
        let row = tables.row(i).expect("row for removed candidate");
        if row.iter().all(|&sji| budget + tables.single[i] < sji && sji < bound) {
            continue;
        }
        let worst_pos = (0..row.len()).min_by_key(|&b| row[b]).expect("upper set nonempty");
        let worst = upper[worst_pos];
        let rest: Vec<usize> = (0..row.len()).filter(|&b| b != worst_pos).collect();
        if rest.len() < 2 {
            return false;
        }
        let mut sorted = rest.clone();
        sorted.sort_by_key(|&b| row[b]);
        let (second, third) = (row[sorted[0]] as i64, row[sorted[1]] as i64);
        if 2 * third - second - row[worst_pos] as i64 <= budget as i64 {
            return false;
        }
        let upper_rest: Vec<usize> = rest.iter().map(|&b| upper[b]).collect();
        let temp = strict_support_without(instance, &[i], &upper_rest, &[worst])[i];
        let new_min = rest.iter().map(|&b| row[b]).min().expect("two remain");
        if temp + budget >= new_min {
            return false;
        }
    }
    true
}

/// Bounds the influence of `winner`, who reaches the quota once `lower`'s
/// votes move on, and checks every removed candidate stays below every
/// upper candidate.
pub fn multi_winner_verification(instance: &ElectionInstance, winner: usize, lower: &[usize], budget: u64) -> bool {
    let bounds = surplus_bounds(instance, winner, lower);
    let quota = instance.quota();
    let m = instance.candidate_count();
    let upper: Vec<usize> = (0..m).filter(|c| !lower.contains(c)).collect();
    let mut with_winner = lower.to_vec();
    with_winner.push(winner);
    let reach_all = strict_support_without(instance, &with_winner, &[], &[]);
    let first = instance.first_choices();
    let budget_r = rational::from_u64(budget);
    for &i in lower {
        let others: Vec<usize> = lower.iter().copied().filter(|&c| c != i).collect();
        let x = next_choice_count(instance, winner, i, &others);
        let sv1 = reach_all[i].saturating_sub(first[i]);
        let denom = bounds.sv0 + bounds.winner_first;
        let weighted = if denom == 0 { rational::zero() } else { Rational::new((bounds.sv0 * x).into(), denom.into()) };
        let max_votes = weighted + rational::from_u64(sv1);
        let after_win = strict_support_without(instance, &others, &[winner], &[]);
        let absorbed = quota.saturating_sub(bounds.winner_first);
        for &j in &upper {
            let mut direct_set = others.clone();
            direct_set.push(j);
            let direct = strict_support_without(instance, &direct_set, &[], &[])[j];
            let min_votes = direct + after_win[j].saturating_sub(absorbed);
            if &budget_r + &max_votes >= rational::from_u64(min_votes) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurplusBounds {
    pub sv0: u64,
    pub winner_first: u64,
    pub expanded_quota: u64,
}

pub fn surplus_bounds(instance: &ElectionInstance, winner: usize, lower: &[usize]) -> SurplusBounds {
    let quota = instance.quota();
    let mut set = lower.to_vec();
    set.push(winner);
    let reach = strict_support_without(instance, &set, &[], &[])[winner];
    SurplusBounds {
        sv0: reach.saturating_sub(quota),
        winner_first: instance.first_choices()[winner],
        expanded_quota: (instance.seats() as u64 + 1) * quota,
    }
}

/// Ballots that, once `excluded` are struck, start with `winner` and
/// continue with `next`.
fn next_choice_count(instance: &ElectionInstance, winner: usize, next: usize, excluded: &[usize]) -> u64 {
    instance
        .ballots()
        .iter()
        .filter(|b| {
            let mut it = b.ranking.iter().filter(|c| !excluded.contains(c));
            it.next() == Some(&winner) && it.next() == Some(&next)
        })
        .map(|b| b.count)
        .sum()
}

/// Default search cap in hundredths of a percent: 40% for one seat,
/// 25% per seat (at most 100%) otherwise.
pub fn default_cap_hundredths(seats: usize) -> u64 {
    if seats <= 1 {
        4_000
    } else {
        (2_500 * seats as u64).min(10_000)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Largest qualifying allowance in hundredths of a percent.
    pub hundredths: u64,
    pub percent: f64,
    pub ballots: u64,
    /// True when the instance was already small enough and the cap was
    /// returned without searching.
    pub capped: bool,
    pub relevant: usize,
}

/// Largest allowance, to 0.01 percentage points, at which removal leaves at
/// most `target` candidates. `None` when even a zero allowance fails.
pub fn traceability_threshold(instance: &ElectionInstance, target: usize, cap_hundredths: u64) -> Option<Threshold> {
    let total = instance.total_ballots();
    let make = |h: u64, capped: bool, relevant: usize| Threshold {
        hundredths: h,
        percent: h as f64 / 100.0,
        ballots: Allowance::from_hundredths(h, total).ballots,
        capped,
        relevant,
    };
    if instance.candidate_count() <= target {
        return Some(make(cap_hundredths, true, instance.candidate_count()));
    }
    let size = |h: u64| remove_irrelevant(instance, Allowance::from_hundredths(h, total).ballots).relevant.len();
    let at_zero = size(0);
    if at_zero > target {
        return None;
    }
    let at_cap = size(cap_hundredths);
    if at_cap <= target {
        return Some(make(cap_hundredths, false, at_cap));
    }
    let (mut lo, mut hi) = (0u64, cap_hundredths);
    let mut best = at_zero;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let s = size(mid);
        if s <= target {
            lo = mid;
            best = s;
        } else {
            hi = mid;
        }
    }
    Some(make(lo, false, best))
}
