//! Depth-first search over round-event prefixes.
//!
//! A node is a prefix of round events; its allocation state is the seed for
//! every child, so each prefix is allocated once. A prefix whose additions
//! already exceed the budget (or the best total found for the target) cuts
//! its whole subtree, and budget failures are remembered in a shared
//! [`PruneCache`] keyed by the prefix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{advance, complete, robust_allocation, AllocationState, Constraints, Infeasible, Strategy};
use crate::error::{Error, Result};
use crate::instance::ElectionInstance;
use crate::structure::{Event, Outcome, Structure};
use crate::tabulation::tabulate;

/// Largest relevant candidate count the exact search accepts.
pub const RELEVANT_CAP: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    Candidate(usize),
    /// A winning set, sorted.
    Coalition(Vec<usize>),
}

impl Target {
    pub fn coalition(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Target::Coalition(members)
    }

    fn admits(&self, event: Event, seats: usize) -> bool {
        match self {
            Target::Candidate(t) => match event.outcome {
                Outcome::Loss => event.candidate != *t,
                Outcome::Win => seats > 1 || event.candidate == *t,
            },
            Target::Coalition(set) => match event.outcome {
                Outcome::Loss => !set.contains(&event.candidate),
                Outcome::Win => set.contains(&event.candidate),
            },
        }
    }

    fn satisfied_by(&self, winners: &[usize]) -> bool {
        match self {
            Target::Candidate(t) => winners.contains(t),
            Target::Coalition(set) => {
                let mut w = winners.to_vec();
                w.sort_unstable();
                w == *set
            }
        }
    }
}

/// Round prefixes known to need more than some number of additions.
#[derive(Debug, Default)]
pub struct PruneCache {
    needed: Mutex<HashMap<Vec<Event>, u64>>,
}

impl PruneCache {
    pub fn new() -> Self {
        PruneCache::default()
    }

    /// True iff some recorded prefix of `prefix` needs more than `budget`.
    pub fn check(&self, prefix: &[Event], budget: u64) -> bool {
        let map = self.needed.lock().expect("prune cache poisoned");
        (1..=prefix.len()).any(|n| map.get(&prefix[..n]).is_some_and(|&need| need > budget))
    }

    /// Records that `prefix` needs at least `needed` additions.
    pub fn record(&self, prefix: &[Event], needed: u64) {
        let mut map = self.needed.lock().expect("prune cache poisoned");
        let e = map.entry(prefix.to_vec()).or_insert(needed);
        *e = (*e).max(needed);
    }

    pub fn len(&self) -> usize {
        self.needed.lock().expect("prune cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub budget: u64,
    pub constraints: Constraints,
    /// Allocate prefixes and cut subtrees. Without it every structure is
    /// allocated from scratch.
    pub prune: bool,
    pub relevant_cap: usize,
}

impl SearchOptions {
    pub fn new(budget: u64) -> Self {
        SearchOptions { budget, constraints: Constraints::default(), prune: true, relevant_cap: RELEVANT_CAP }
    }

    pub fn with_constraints(mut self, constraints: Constraints) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn unpruned(mut self) -> Self {
        self.prune = false;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Prefixes allocated.
    pub nodes: usize,
    /// Complete event lists allocated.
    pub leaves: usize,
    /// Subtrees cut.
    pub pruned: usize,
}

#[derive(Default)]
struct Counters {
    nodes: AtomicUsize,
    leaves: AtomicUsize,
    pruned: AtomicUsize,
}

impl Counters {
    fn snapshot(&self) -> SearchStats {
        SearchStats {
            nodes: self.nodes.load(Ordering::Relaxed),
            leaves: self.leaves.load(Ordering::Relaxed),
            pruned: self.pruned.load(Ordering::Relaxed),
        }
    }
}

/// A complete event list and its strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub events: Vec<Event>,
    pub strategy: Strategy,
}

fn leaf_key(leaf: &Leaf) -> (u64, &[Event]) {
    (leaf.strategy.total, &leaf.events)
}

struct Ctx<'a> {
    instance: &'a ElectionInstance,
    options: SearchOptions,
    target: Option<&'a Target>,
    cache: &'a PruneCache,
    best: AtomicU64,
    counters: Counters,
}

impl Ctx<'_> {
    fn bound(&self) -> u64 {
        self.options.budget.min(self.best.load(Ordering::Relaxed))
    }

    fn children(&self, active: &[bool], wins: usize) -> Vec<Event> {
        let seats = self.instance.seats();
        let mut out = Vec::new();
        for c in (0..active.len()).filter(|&c| active[c]) {
            let mut options = vec![Event::loss(c)];
            if wins < seats {
                options.push(Event::win(c));
            }
            for e in options {
                if self.target.is_none_or(|t| t.admits(e, seats)) {
                    out.push(e);
                }
            }
        }
        out
    }

    fn explore(&self, prefix: &mut Vec<Event>, state: AllocationState, winners: Vec<usize>, out: &mut Vec<Leaf>) {
        let seats = self.instance.seats();
        let mut active = vec![true; self.instance.candidate_count()];
        let mut wins = 0;
        for e in prefix.iter() {
            active[e.candidate] = false;
            wins += (e.outcome == Outcome::Win) as usize;
        }
        let left = active.iter().filter(|a| **a).count();
        if wins == seats || left <= seats - wins {
            self.counters.leaves.fetch_add(1, Ordering::Relaxed);
            if self.target.is_some_and(|t| !t.satisfied_by(&winners)) {
                return;
            }
            if let Ok(s) = complete(self.instance, prefix, &self.options.constraints, state, winners) {
                if s.total <= self.bound() {
                    if self.target.is_some() {
                        self.best.fetch_min(s.total, Ordering::Relaxed);
                    }
                    out.push(Leaf { events: prefix.clone(), strategy: s });
                }
            }
            return;
        }
        for event in self.children(&active, wins) {
            prefix.push(event);
            if self.cache.check(prefix, self.options.budget) {
                self.counters.pruned.fetch_add(1, Ordering::Relaxed);
                prefix.pop();
                continue;
            }
            self.counters.nodes.fetch_add(1, Ordering::Relaxed);
            let bound = self.bound();
            match advance(self.instance, prefix, bound, &self.options.constraints, state.clone()) {
                Ok((next, w)) => self.explore(prefix, next, w, out),
                Err(err) => {
                    self.counters.pruned.fetch_add(1, Ordering::Relaxed);
                    if let (Some(len), Infeasible::Budget { needed, .. }) = (err.infeasible_prefix(), &err) {
                        if bound == self.options.budget {
                            self.cache.record(&prefix[..len], *needed);
                        }
                    }
                }
            }
            prefix.pop();
        }
    }
}

fn check_size(instance: &ElectionInstance, options: &SearchOptions) -> Result<()> {
    let m = instance.candidate_count();
    if m > options.relevant_cap {
        return Err(Error::SearchTooLarge { relevant: m, cap: options.relevant_cap, threshold: None });
    }
    Ok(())
}

/// Every reachable complete event list allocatable within the budget,
/// optionally restricted to those that can seat `target`.
pub fn search_leaves(
    instance: &ElectionInstance,
    target: Option<&Target>,
    options: &SearchOptions,
    cache: &PruneCache,
) -> Result<(Vec<Leaf>, SearchStats)> {
    check_size(instance, options)?;
    if !options.prune {
        return unpruned_leaves(instance, target, options);
    }
    let ctx = Ctx {
        instance,
        options: *options,
        target,
        cache,
        best: AtomicU64::new(u64::MAX),
        counters: Counters::default(),
    };
    let active = vec![true; instance.candidate_count()];
    let roots = ctx.children(&active, 0);
    let mut leaves: Vec<Leaf> = roots
        .par_iter()
        .flat_map_iter(|&event| {
            let mut out = Vec::new();
            let mut prefix = vec![event];
            if ctx.cache.check(&prefix, options.budget) {
                ctx.counters.pruned.fetch_add(1, Ordering::Relaxed);
                return out;
            }
            ctx.counters.nodes.fetch_add(1, Ordering::Relaxed);
            let bound = ctx.bound();
            match advance(instance, &prefix, bound, &options.constraints, AllocationState::default()) {
                Ok((state, w)) => ctx.explore(&mut prefix, state, w, &mut out),
                Err(err) => {
                    ctx.counters.pruned.fetch_add(1, Ordering::Relaxed);
                    if let Infeasible::Budget { needed, .. } = err {
                        if bound == options.budget {
                            ctx.cache.record(&prefix, needed);
                        }
                    }
                }
            }
            out
        })
        .collect();
    let bound = ctx.bound();
    leaves.retain(|l| l.strategy.total <= bound);
    leaves.sort_by(|a, b| leaf_key(a).cmp(&leaf_key(b)));
    Ok((leaves, ctx.counters.snapshot()))
}

/// Truncates a full structure's events where the count stops logging
/// rounds: once all seats are filled, or once the candidates left equal
/// the seats left.
pub fn truncate_events(events: &[Event], m: usize, seats: usize) -> Vec<Event> {
    let mut out = Vec::new();
    let mut wins = 0;
    for &e in events {
        let left = m - out.len();
        if wins == seats || left <= seats - wins {
            break;
        }
        wins += (e.outcome == Outcome::Win) as usize;
        out.push(e);
    }
    out
}

fn unpruned_leaves(
    instance: &ElectionInstance,
    target: Option<&Target>,
    options: &SearchOptions,
) -> Result<(Vec<Leaf>, SearchStats)> {
    let m = instance.candidate_count();
    let seats = instance.seats();
    let mut seen: HashSet<Vec<Event>> = HashSet::new();
    let mut lists = Vec::new();
    for s in enumerate_structures(m, seats) {
        let events = truncate_events(&s.events(), m, seats);
        if seen.insert(events.clone()) {
            lists.push(events);
        }
    }
    let leaves_seen = lists.len();
    let mut leaves: Vec<Leaf> = lists
        .into_par_iter()
        .filter_map(|events| {
            let s = robust_allocation(instance, &events, options.budget, &options.constraints).ok()?;
            if target.is_some_and(|t| !t.satisfied_by(&s.winners)) {
                return None;
            }
            Some(Leaf { events, strategy: s })
        })
        .collect();
    leaves.sort_by(|a, b| leaf_key(a).cmp(&leaf_key(b)));
    let stats = SearchStats { nodes: leaves_seen, leaves: leaves_seen, pruned: 0 };
    Ok((leaves, stats))
}

/// Minimum-total strategy seating `target`, or `None` when nothing within
/// the budget does. Ties resolve to the lexicographically first events.
pub fn optimal_strategy(
    instance: &ElectionInstance,
    target: &Target,
    options: &SearchOptions,
    cache: &PruneCache,
) -> Result<Option<Strategy>> {
    let (leaves, _) = search_leaves(instance, Some(target), options, cache)?;
    Ok(leaves.into_iter().next().map(|l| l.strategy))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub candidate: usize,
    /// Ballots needed, when feasible within the budget.
    pub ballots: Option<u64>,
    pub percent: Option<f64>,
    pub strategy: Option<Strategy>,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRow {
    pub members: Vec<usize>,
    pub ballots: u64,
    pub percent: f64,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VictoryGapTable {
    pub rows: Vec<GapRow>,
    /// Winning sets reachable within the budget, cheapest first (k > 1).
    pub coalitions: Vec<CoalitionRow>,
    pub winners: Vec<usize>,
    pub budget: u64,
    pub total_ballots: u64,
    pub stats: SearchStats,
}

impl VictoryGapTable {
    pub fn row(&self, candidate: usize) -> Option<&GapRow> {
        self.rows.iter().find(|r| r.candidate == candidate)
    }
}

fn percent(ballots: u64, total: u64) -> f64 {
    100.0 * ballots as f64 / total.max(1) as f64
}

/// Victory gap of every candidate. Actual winners have gap zero; each other
/// candidate's gap is its cheapest strategy within the budget.
pub fn victory_gaps(instance: &ElectionInstance, options: &SearchOptions) -> Result<VictoryGapTable> {
    check_size(instance, options)?;
    let actual = tabulate(instance)?;
    let total = instance.total_ballots();
    let cache = PruneCache::new();
    let m = instance.candidate_count();
    let seats = instance.seats();

    let mut stats = SearchStats::default();
    let mut rows = Vec::with_capacity(m);
    for c in 0..m {
        if actual.winners.contains(&c) {
            let strategy = Strategy::empty(instance, actual.structure.events())?;
            rows.push(GapRow {
                candidate: c,
                ballots: Some(0),
                percent: Some(0.0),
                strategy: Some(strategy),
                feasible: true,
            });
            continue;
        }
        let (leaves, s) = search_leaves(instance, Some(&Target::Candidate(c)), options, &cache)?;
        stats.nodes += s.nodes;
        stats.leaves += s.leaves;
        stats.pruned += s.pruned;
        let best = leaves.into_iter().next().map(|l| l.strategy);
        rows.push(GapRow {
            candidate: c,
            ballots: best.as_ref().map(|s| s.total),
            percent: best.as_ref().map(|s| percent(s.total, total)),
            feasible: best.is_some(),
            strategy: best,
        });
    }

    let mut coalitions = Vec::new();
    if seats > 1 {
        let (leaves, s) = search_leaves(instance, None, options, &cache)?;
        stats.nodes += s.nodes;
        stats.leaves += s.leaves;
        stats.pruned += s.pruned;
        let mut best: BTreeMap<Vec<usize>, Leaf> = BTreeMap::new();
        for leaf in leaves {
            let mut members = leaf.strategy.winners.clone();
            members.sort_unstable();
            best.entry(members).or_insert(leaf);
        }
        let mut actual_set = actual.winners.clone();
        actual_set.sort_unstable();
        coalitions = best
            .into_iter()
            .map(|(members, leaf)| {
                let ballots = if members == actual_set { 0 } else { leaf.strategy.total };
                CoalitionRow { percent: percent(ballots, total), ballots, members, strategy: leaf.strategy }
            })
            .collect();
        coalitions.sort_by(|a, b| a.ballots.cmp(&b.ballots).then_with(|| a.members.cmp(&b.members)));
    }

    Ok(VictoryGapTable {
        rows,
        coalitions,
        winners: actual.winners,
        budget: options.budget,
        total_ballots: total,
        stats,
    })
}

/// Every structure over `m` candidates with at most `max_wins` wins, in
/// prefix-grouped order.
pub fn enumerate_structures(m: usize, max_wins: usize) -> impl Iterator<Item = Structure> {
    StructureIter::new(m, max_wins)
}

struct StructureIter {
    m: usize,
    max_wins: usize,
    /// Stack of (events so far, next choice index).
    stack: Vec<(Vec<Event>, usize)>,
}

impl StructureIter {
    fn new(m: usize, max_wins: usize) -> Self {
        let stack = if m == 0 { Vec::new() } else { vec![(Vec::new(), 0)] };
        StructureIter { m, max_wins, stack }
    }

    fn choices(&self, events: &[Event]) -> Vec<Event> {
        let wins = events.iter().filter(|e| e.outcome == Outcome::Win).count();
        let mut out = Vec::new();
        for c in 0..self.m {
            if events.iter().any(|e| e.candidate == c) {
                continue;
            }
            out.push(Event::loss(c));
            if wins < self.max_wins {
                out.push(Event::win(c));
            }
        }
        out
    }
}

impl Iterator for StructureIter {
    type Item = Structure;

    fn next(&mut self) -> Option<Structure> {
        while let Some((events, next)) = self.stack.pop() {
            if events.len() + 1 == self.m {
                return Some(Structure::from_events(self.m, &events).expect("valid events"));
            }
            let choices = self.choices(&events);
            if next < choices.len() {
                let mut child = events.clone();
                child.push(choices[next]);
                self.stack.push((events, next + 1));
                self.stack.push((child, 0));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> ElectionInstance {
        ElectionInstance::from_named(&["A", "B", "C"], &[(&["A"], 4), (&["B"], 3), (&["C", "B"], 2)], 1).unwrap()
    }

    #[test]
    fn structure_counts() {
        assert_eq!(enumerate_structures(3, 2).count(), 24);
        assert_eq!(enumerate_structures(3, 1).count(), 18);
        assert_eq!(enumerate_structures(5, 4).count() as u128, crate::structure_space_size(5));
        let all: HashSet<Structure> = enumerate_structures(4, 3).collect();
        assert_eq!(all.len() as u128, crate::structure_space_size(4));
    }

    #[test]
    fn e1_optimal_for_a() {
        let cache = PruneCache::new();
        let s = optimal_strategy(&e1(), &Target::Candidate(0), &SearchOptions::new(3), &cache).unwrap().unwrap();
        assert_eq!(s.total, 2);
        assert!(s.is_bullet_for(0));
        assert!(optimal_strategy(&e1(), &Target::Candidate(0), &SearchOptions::new(1), &cache).unwrap().is_none());
    }

    #[test]
    fn winner_costs_nothing() {
        let cache = PruneCache::new();
        let s = optimal_strategy(&e1(), &Target::Candidate(1), &SearchOptions::new(0), &cache).unwrap().unwrap();
        assert_eq!(s.total, 0);
        let t = victory_gaps(&e1(), &SearchOptions::new(4)).unwrap();
        assert_eq!(t.row(1).unwrap().ballots, Some(0));
        assert_eq!(t.row(0).unwrap().ballots, Some(2));
    }

    #[test]
    fn prune_cache_contract() {
        let cache = PruneCache::new();
        assert!(!cache.check(&[Event::loss(2)], 3));
        cache.record(&[Event::loss(2), Event::loss(1)], 5);
        cache.record(&[Event::loss(2), Event::loss(1)], 5);
        assert_eq!(cache.len(), 1);
        assert!(cache.check(&[Event::loss(2), Event::loss(1), Event::win(0)], 3));
        assert!(!cache.check(&[Event::loss(2)], 3));
        assert!(!cache.check(&[Event::loss(2), Event::loss(1)], 5));
    }

    #[test]
    fn refuses_large_instances() {
        let names: Vec<String> = (0..11).map(|i| format!("C{i}")).collect();
        let inst = ElectionInstance::new(names, vec![crate::Ballot::new(vec![0], 1)], 1).unwrap();
        assert!(matches!(
            victory_gaps(&inst, &SearchOptions::new(1)),
            Err(Error::SearchTooLarge { relevant: 11, cap: 10, .. })
        ));
    }
}
