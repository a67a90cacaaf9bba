//! Minimal ballot additions realizing a target round sequence.
//!
//! Rounds are processed in order against the live count of the original
//! ballots plus the additions made so far. Each round's shortfall is met
//! first by extending added ballots whose listed candidates are already out
//! (their votes are free to move on), then by new ballots. The count is
//! replayed after every change, so later additions that move the quota or
//! earlier tallies are always re-checked. Every margin is strict by one
//! vote, so no emitted strategy relies on tie-breaking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::instance::{Ballot, ElectionInstance};
use crate::rational::{self, Rational};
use crate::structure::{Event, Outcome, Structure};
use crate::tabulation::{tabulate_ballots, Count};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuotaPolicy {
    /// Keep the quota of the unmodified election.
    Hold,
    /// Recompute the quota from the ballot count including additions.
    Recompute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    /// Longest ranking an added ballot may carry.
    pub max_len: Option<usize>,
    pub quota_policy: QuotaPolicy,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints { max_len: None, quota_policy: QuotaPolicy::Recompute }
    }
}

impl Constraints {
    pub fn with_max_len(max_len: usize) -> Self {
        Constraints { max_len: Some(max_len), ..Constraints::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Addition {
    pub ranking: Vec<usize>,
    pub count: u64,
}

/// Cumulative additions required by the end of a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub round: usize,
    pub cumulative: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub additions: Vec<Addition>,
    pub total: u64,
    /// Percentage of the instance's ballot count.
    pub total_percent: f64,
    /// The constrained round events.
    pub target: Vec<Event>,
    /// Structure produced by tabulating the election with the additions.
    pub realized: Structure,
    pub winners: Vec<usize>,
    pub activation: Vec<Activation>,
    pub max_len: Option<usize>,
    /// Added ballots that can still exhaust before the contest ends and so
    /// could carry arbitrary later preferences.
    pub open_ballots: u64,
}

impl Strategy {
    pub fn empty(instance: &ElectionInstance, target: Vec<Event>) -> crate::Result<Self> {
        let result = tabulate_ballots(instance, &[])?;
        Ok(Strategy {
            additions: Vec::new(),
            total: 0,
            total_percent: 0.0,
            target,
            realized: result.structure,
            winners: result.winners,
            activation: Vec::new(),
            max_len: None,
            open_ballots: 0,
        })
    }

    pub fn ballots(&self) -> Vec<Ballot> {
        self.additions.iter().map(|a| Ballot::new(a.ranking.clone(), a.count)).collect()
    }

    /// True when every added ballot is a bullet vote for `target`.
    pub fn is_bullet_for(&self, target: usize) -> bool {
        self.additions.iter().all(|a| a.ranking == [target])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infeasible {
    /// Additions needed by `round` exceed the budget.
    Budget { round: usize, needed: u64 },
    /// A candidate holds a quota in a round that must eliminate someone else.
    QuotaBreach { round: usize, candidate: usize },
    /// The length limit rules out the ballots the round needs.
    Length { round: usize },
    /// The requested events are not a reachable round sequence.
    Malformed { round: usize },
    /// The final count did not reproduce the requested winners decisively.
    Unrealized,
}

impl Infeasible {
    /// Prefix length that is infeasible for every continuation, if any.
    pub fn infeasible_prefix(&self) -> Option<usize> {
        match self {
            Infeasible::Budget { round, .. } => Some(*round),
            Infeasible::Malformed { round } | Infeasible::Length { round } => Some(*round),
            _ => None,
        }
    }
}

/// Upper bound on what free ballots can add to each active candidate: all
/// of the free mass could land on any one of them.
pub fn worst_case_transfers(free: &[Rational], actives: &[usize]) -> Vec<(usize, Rational)> {
    let mass = free.iter().fold(rational::zero(), |acc, w| acc + w);
    actives.iter().map(|&c| (c, mass.clone())).collect()
}

#[derive(Clone, Debug)]
struct Group {
    ranking: Vec<usize>,
    count: u64,
}

enum Pass {
    Done { winners: Vec<usize>, breach: Option<(usize, usize)> },
    Short(Shortfall),
    Malformed(usize),
}

struct Shortfall {
    round: usize,
    event: Event,
    needs: Vec<(usize, u64)>,
    /// Added groups exhausted at the start of the round.
    free: Vec<usize>,
    /// Start-of-round tallies of the needing candidate in earlier rounds,
    /// paired with the event of that round.
    earlier: Vec<(Rational, Event)>,
    previous: Option<Event>,
}

struct Allocator<'a> {
    instance: &'a ElectionInstance,
    events: &'a [Event],
    constraints: Constraints,
    m: usize,
}

impl<'a> Allocator<'a> {
    fn quota(&self, added: u64) -> Rational {
        let n = match self.constraints.quota_policy {
            QuotaPolicy::Hold => self.instance.total_ballots(),
            QuotaPolicy::Recompute => self.instance.total_ballots() + added,
        };
        rational::from_u64(n / (self.instance.seats() as u64 + 1) + 1)
    }

    fn max_len(&self) -> usize {
        self.constraints.max_len.unwrap_or(self.m).min(self.m)
    }

    fn pass(&self, groups: &[Group]) -> Pass {
        let total: u64 = groups.iter().map(|g| g.count).sum();
        let quota = self.quota(total);
        let seats = self.instance.seats();
        let added: Vec<Ballot> = groups.iter().map(|g| Ballot::new(g.ranking.clone(), g.count)).collect();
        let base = self.instance.ballots().iter().map(|b| (b, usize::MAX));
        let mut count = Count::new(self.m, base.chain(added.iter().enumerate().map(|(i, b)| (b, i))));
        let mut history: Vec<(Vec<Rational>, Event)> = Vec::new();
        let mut winners = Vec::new();
        let mut breach = None;

        for (r, &event) in self.events.iter().enumerate() {
            let round = r + 1;
            let active = count.active();
            let remaining = seats - count.elected_count();
            if remaining == 0 {
                return Pass::Done { winners, breach };
            }
            if !count.is_active(event.candidate) {
                return Pass::Malformed(round);
            }
            if active.len() <= remaining {
                // Everyone left is seated without a quota.
                if self.events[r..].iter().any(|e| e.outcome == Outcome::Loss) {
                    return Pass::Malformed(round);
                }
                winners.extend(active);
                return Pass::Done { winners, breach };
            }
            let tallies = &count.tallies;
            let mut needs = Vec::new();
            match event.outcome {
                Outcome::Loss => {
                    let e = event.candidate;
                    if breach.is_none() {
                        if let Some(&x) = active.iter().find(|&&x| tallies[x] >= quota) {
                            breach = Some((round, x));
                        }
                    }
                    let floor = &tallies[e] + rational::one();
                    for &x in &active {
                        if x != e {
                            let n = rational::ceil_nonneg(&(&floor - &tallies[x]));
                            if n > 0 {
                                needs.push((x, n));
                            }
                        }
                    }
                }
                Outcome::Win => {
                    let w = event.candidate;
                    let mut floor = quota.clone();
                    for &x in &active {
                        if x != w && tallies[x] >= quota {
                            let beat = &tallies[x] + rational::one();
                            if beat > floor {
                                floor = beat;
                            }
                        }
                    }
                    let n = rational::ceil_nonneg(&(&floor - &tallies[w]));
                    if n > 0 {
                        needs.push((w, n));
                    }
                }
            }
            if !needs.is_empty() {
                let free = (0..count.groups.len())
                    .filter(|&i| {
                        let g = &count.groups[i];
                        g.tag != usize::MAX && g.holder().is_none() && g.weight == rational::one()
                    })
                    .map(|i| count.groups[i].tag)
                    .collect();
                let who = needs[0].0;
                let earlier = history.iter().map(|(t, e)| (t[who].clone(), *e)).collect();
                let previous = history.last().map(|(_, e)| *e);
                return Pass::Short(Shortfall { round, event, needs, free, earlier, previous });
            }
            history.push((count.tallies.clone(), event));
            match event.outcome {
                Outcome::Loss => {
                    count.eliminate(event.candidate);
                }
                Outcome::Win => {
                    let more = count.elected_count() + 1 < seats;
                    count.elect(event.candidate, &quota, more);
                    winners.push(event.candidate);
                }
            }
        }
        // Events ran out; survivors fill the open seats if they match them.
        let active = count.active();
        let remaining = seats - count.elected_count();
        if remaining > 0 && active.len() <= remaining {
            winners.extend(active);
        }
        Pass::Done { winners, breach }
    }
}

/// Additions made while processing a round prefix. Allocation is
/// deterministic, so the state reached for a prefix is the starting point
/// for every extension of that prefix.
#[derive(Clone, Debug, Default)]
pub struct AllocationState {
    groups: Vec<Group>,
    records: Vec<(usize, u64)>,
    /// Elimination round in which some candidate held a quota. More
    /// additions raise the quota, so extensions may still clear it.
    breach: Option<(usize, usize)>,
    /// Latest round that has needed additions.
    frontier: usize,
}

impl AllocationState {
    pub fn total(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn breach(&self) -> Option<(usize, usize)> {
        self.breach
    }
}

/// Continues allocation for `events` from `state`, which must have been
/// produced for a prefix of `events`. Returns the new state and the seats
/// the events decide.
pub fn advance(
    instance: &ElectionInstance,
    events: &[Event],
    budget: u64,
    constraints: &Constraints,
    state: AllocationState,
) -> Result<(AllocationState, Vec<usize>), Infeasible> {
    let m = instance.candidate_count();
    let alloc = Allocator { instance, events, constraints: *constraints, m };
    let max_len = alloc.max_len();
    let reuse = max_len > 1;
    let AllocationState { mut groups, mut records, mut frontier, .. } = state;
    let pass_cap = (budget as usize + 2) * (m + 2) + 16;

    for _ in 0..pass_cap {
        match alloc.pass(&groups) {
            Pass::Malformed(round) => return Err(Infeasible::Malformed { round }),
            Pass::Done { winners, breach } => {
                return Ok((AllocationState { groups, records, breach, frontier }, winners));
            }
            Pass::Short(short) => {
                frontier = frontier.max(short.round);
                let mut free = short.free.clone();
                for &(x, need) in &short.needs {
                    let mut need = need;
                    if reuse {
                        while need > 0 {
                            let Some(&g) = free.first() else { break };
                            if groups[g].ranking.len() >= max_len || groups[g].ranking.contains(&x) {
                                free.remove(0);
                                continue;
                            }
                            let take = need.min(groups[g].count);
                            let mut ranking = groups[g].ranking.clone();
                            ranking.push(x);
                            groups[g].count -= take;
                            if groups[g].count == 0 {
                                free.remove(0);
                            }
                            groups.push(Group { ranking, count: take });
                            need -= take;
                        }
                    }
                    if need == 0 {
                        continue;
                    }
                    let ranking = fresh_ranking(&alloc, &short, &groups, x, need, max_len)?;
                    groups.push(Group { ranking, count: need });
                }
                groups.retain(|g| g.count > 0);
                let total: u64 = groups.iter().map(|g| g.count).sum();
                records.push((short.round, total));
                if total > budget {
                    // Earlier rounds can need more because of a later
                    // round's ballots, so the failing prefix ends at the
                    // latest round reached.
                    return Err(Infeasible::Budget { round: frontier, needed: total });
                }
            }
        }
    }
    Err(Infeasible::Unrealized)
}

/// Allocates additions realizing `events` (a structure's round events, or
/// the prefix up to the round that fills the last seat). Added ballots are
/// finally extended with the resulting winners so that nothing a voter
/// appends can change the result.
pub fn robust_allocation(
    instance: &ElectionInstance,
    events: &[Event],
    budget: u64,
    constraints: &Constraints,
) -> Result<Strategy, Infeasible> {
    let (state, winners) = advance(instance, events, budget, constraints, AllocationState::default())?;
    complete(instance, events, constraints, state, winners)
}

/// Closes and verifies the additions held by `state`.
pub fn complete(
    instance: &ElectionInstance,
    events: &[Event],
    constraints: &Constraints,
    state: AllocationState,
    winners: Vec<usize>,
) -> Result<Strategy, Infeasible> {
    if let Some((round, candidate)) = state.breach {
        return Err(Infeasible::QuotaBreach { round, candidate });
    }
    let m = instance.candidate_count();
    let max_len = constraints.max_len.unwrap_or(m).min(m);
    finish(instance, events, state.groups, winners, state.records, max_len)
}

/// Ranking for `need` new ballots towards `x`. A win that bullet votes
/// would bring forward is timed with ballots that first sit with the
/// previous round's eliminated candidate.
fn fresh_ranking(
    alloc: &Allocator<'_>,
    short: &Shortfall,
    groups: &[Group],
    x: usize,
    need: u64,
    max_len: usize,
) -> Result<Vec<usize>, Infeasible> {
    if short.event.outcome != Outcome::Win {
        return Ok(vec![x]);
    }
    let total: u64 = groups.iter().map(|g| g.count).sum::<u64>() + need;
    let quota = alloc.quota(total);
    let extra = rational::from_u64(need);
    let premature = short.earlier.iter().any(|(tally, e)| *e != Event::win(x) && tally + &extra >= quota);
    if !premature {
        return Ok(vec![x]);
    }
    match short.previous {
        Some(prev) if prev.outcome == Outcome::Loss && max_len >= 2 => Ok(vec![prev.candidate, x]),
        Some(prev) if prev.outcome == Outcome::Loss => Err(Infeasible::Length { round: short.round }),
        _ => Ok(vec![x]),
    }
}

fn merge(groups: &[Group]) -> Vec<Addition> {
    let mut merged: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for g in groups {
        if g.count > 0 {
            *merged.entry(g.ranking.clone()).or_insert(0) += g.count;
        }
    }
    merged.into_iter().map(|(ranking, count)| Addition { ranking, count }).collect()
}

fn finish(
    instance: &ElectionInstance,
    events: &[Event],
    groups: Vec<Group>,
    winners: Vec<usize>,
    records: Vec<(usize, u64)>,
    max_len: usize,
) -> Result<Strategy, Infeasible> {
    let mut want = winners.clone();
    want.sort_unstable();

    let closed: Vec<Group> = groups
        .iter()
        .map(|g| {
            let mut ranking = g.ranking.clone();
            for &w in &winners {
                if ranking.len() < max_len && !ranking.contains(&w) {
                    ranking.push(w);
                }
            }
            Group { ranking, count: g.count }
        })
        .collect();

    for candidate in [closed, groups] {
        let additions = merge(&candidate);
        let ballots: Vec<Ballot> = additions.iter().map(|a| Ballot::new(a.ranking.clone(), a.count)).collect();
        let Ok(result) = tabulate_ballots(instance, &ballots) else { continue };
        let mut got = result.winners.clone();
        got.sort_unstable();
        if got != want || !result.decisive {
            continue;
        }
        let total: u64 = additions.iter().map(|a| a.count).sum();
        let open_ballots = open_count(&result, &additions, max_len);
        return Ok(Strategy {
            total,
            total_percent: 100.0 * total as f64 / instance.total_ballots().max(1) as f64,
            additions,
            target: events.to_vec(),
            realized: result.structure,
            winners: result.winners,
            activation: activations(&records),
            max_len: Some(max_len),
            open_ballots,
        });
    }
    Err(Infeasible::Unrealized)
}

/// Added ballots that exhaust before the last decided round while still
/// having room for more preferences.
fn open_count(result: &crate::tabulation::TabulationResult, additions: &[Addition], max_len: usize) -> u64 {
    let decided: Vec<usize> = result.rounds.iter().map(|r| r.event.candidate).collect();
    let last_round = result.rounds.len();
    additions
        .iter()
        .filter(|a| a.ranking.len() < max_len)
        .filter(|a| {
            // Exhausts early if every listed candidate is decided before the
            // final round.
            a.ranking.iter().all(|c| match decided.iter().position(|d| d == c) {
                Some(p) => p + 1 < last_round,
                None => false,
            })
        })
        .map(|a| a.count)
        .sum()
}

fn activations(records: &[(usize, u64)]) -> Vec<Activation> {
    let mut by_round: BTreeMap<usize, u64> = BTreeMap::new();
    for &(round, total) in records {
        let e = by_round.entry(round).or_insert(0);
        *e = (*e).max(total);
    }
    let mut out: Vec<Activation> = Vec::new();
    let mut running = 0;
    for (round, total) in by_round {
        if total > running {
            running = total;
            out.push(Activation { round, cumulative: running });
        }
    }
    out
}

/// Allocation with every added ballot limited to `max_len` rankings.
pub fn length_restricted_allocation(
    instance: &ElectionInstance,
    events: &[Event],
    budget: u64,
    max_len: usize,
) -> Result<Strategy, Infeasible> {
    robust_allocation(instance, events, budget, &Constraints::with_max_len(max_len.max(1)))
}

/// Allocation for a full structure.
pub fn allocate_structure(
    instance: &ElectionInstance,
    structure: &Structure,
    budget: u64,
    constraints: &Constraints,
) -> Result<Strategy, Infeasible> {
    robust_allocation(instance, &structure.events(), budget, constraints)
}
