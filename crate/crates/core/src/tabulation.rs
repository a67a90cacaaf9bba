//! Weighted-inclusive Gregory STV with exact rational tallies.
//!
//! Ties are broken by roster order: an elimination tie removes the candidate
//! latest in the roster, a quota tie elects the earliest. When several
//! candidates reach the quota in one round they are elected one per round,
//! highest tally first.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Ballot, ElectionInstance};
use crate::rational::{self, Rational};
use crate::structure::{Event, Outcome, Structure};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: usize,
    /// `None` when the ballots exhaust.
    pub to: Option<usize>,
    #[serde(with = "rational::serde_str")]
    pub amount: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub active: Vec<usize>,
    /// Start-of-round tallies of active and already elected candidates.
    #[serde(with = "rational::serde_pairs")]
    pub tallies: Vec<(usize, Rational)>,
    pub event: Event,
    pub transfers: Vec<Transfer>,
    #[serde(with = "rational::serde_str")]
    pub exhausted_this_round: Rational,
    /// Exhausted mass after this round's transfers.
    #[serde(with = "rational::serde_str")]
    pub cumulative_exhausted: Rational,
}

impl RoundLog {
    pub fn tally(&self, candidate: usize) -> Option<&Rational> {
        self.tallies.iter().find(|(c, _)| *c == candidate).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabulationResult {
    pub structure: Structure,
    pub rounds: Vec<RoundLog>,
    pub winners: Vec<usize>,
    pub quota: u64,
    /// Exhausted before the first round.
    #[serde(with = "rational::serde_str")]
    pub initial_exhausted: Rational,
    /// False when any decision needed the tie-break hierarchy.
    pub decisive: bool,
}

impl TabulationResult {
    /// Cumulative exhausted mass at the start of `round` (1-based).
    pub fn exhausted_before(&self, round: usize) -> Rational {
        if round <= 1 {
            self.initial_exhausted.clone()
        } else {
            match self.rounds.get(round - 2) {
                Some(r) => r.cumulative_exhausted.clone(),
                None => self
                    .rounds
                    .last()
                    .map(|r| r.cumulative_exhausted.clone())
                    .unwrap_or_else(|| self.initial_exhausted.clone()),
            }
        }
    }

    /// Round in which `candidate` was eliminated or elected, if any.
    pub fn decision_round(&self, candidate: usize) -> Option<usize> {
        self.rounds.iter().find(|r| r.event.candidate == candidate).map(|r| r.round)
    }

    /// Exhaustion series `E_0, E_1, ...`.
    pub fn exhaustion_series(&self) -> Vec<Rational> {
        let mut out = vec![self.initial_exhausted.clone()];
        out.extend(self.rounds.iter().map(|r| r.cumulative_exhausted.clone()));
        out
    }

    /// Whether any elected candidate's surplus was redistributed.
    pub fn surplus_transferred(&self) -> bool {
        self.rounds.iter().any(|r| r.event.outcome == Outcome::Win && !r.transfers.is_empty())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Status {
    Active,
    Elected,
    Eliminated,
}

#[derive(Clone, Debug)]
pub(crate) struct Group {
    pub ranking: Vec<usize>,
    pub count: u64,
    pub pos: usize,
    pub weight: Rational,
    /// Caller-defined label, carried through transfers.
    pub tag: usize,
}

impl Group {
    pub fn holder(&self) -> Option<usize> {
        self.ranking.get(self.pos).copied()
    }

    pub fn mass(&self) -> Rational {
        &self.weight * rational::from_u64(self.count)
    }
}

/// Mutable counting state shared by the tabulator and the allocator.
#[derive(Clone, Debug)]
pub(crate) struct Count {
    pub status: Vec<Status>,
    pub tallies: Vec<Rational>,
    pub groups: Vec<Group>,
    piles: Vec<Vec<usize>>,
    pub exhausted: Rational,
}

impl Count {
    pub fn new<'a>(m: usize, ballots: impl IntoIterator<Item = (&'a Ballot, usize)>) -> Self {
        let mut count = Count {
            status: vec![Status::Active; m],
            tallies: vec![rational::zero(); m],
            groups: Vec::new(),
            piles: vec![Vec::new(); m],
            exhausted: rational::zero(),
        };
        for (ballot, tag) in ballots {
            let group =
                Group { ranking: ballot.ranking.clone(), count: ballot.count, pos: 0, weight: rational::one(), tag };
            let idx = count.groups.len();
            match group.holder() {
                Some(c) => {
                    count.tallies[c] += rational::from_u64(group.count);
                    count.piles[c].push(idx);
                }
                None => count.exhausted += rational::from_u64(group.count),
            }
            count.groups.push(group);
        }
        count
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.status.len()).filter(|&c| self.status[c] == Status::Active).collect()
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.status[c] == Status::Active
    }

    pub fn elected_count(&self) -> usize {
        self.status.iter().filter(|s| **s == Status::Elected).count()
    }

    /// Moves every group held by `c` onward, scaling weights by `factor`.
    fn release(&mut self, c: usize, factor: Option<&Rational>) -> (Vec<Transfer>, Rational) {
        let pile = std::mem::take(&mut self.piles[c]);
        let mut moved: BTreeMap<Option<usize>, Rational> = BTreeMap::new();
        for idx in pile {
            let group = &mut self.groups[idx];
            if let Some(f) = factor {
                group.weight = &group.weight * f;
            }
            let mut pos = group.pos + 1;
            while pos < group.ranking.len() && self.status[group.ranking[pos]] != Status::Active {
                pos += 1;
            }
            group.pos = pos;
            let mass = group.mass();
            if mass.is_zero() {
                continue;
            }
            let to = group.ranking.get(pos).copied();
            match to {
                Some(d) => {
                    self.tallies[d] += &mass;
                    self.piles[d].push(idx);
                }
                None => self.exhausted += &mass,
            }
            *moved.entry(to).or_insert_with(rational::zero) += mass;
        }
        let exhausted = moved.get(&None).cloned().unwrap_or_else(rational::zero);
        let transfers = moved.into_iter().map(|(to, amount)| Transfer { from: c, to, amount }).collect();
        (transfers, exhausted)
    }

    pub fn eliminate(&mut self, c: usize) -> (Vec<Transfer>, Rational) {
        self.status[c] = Status::Eliminated;
        let out = self.release(c, None);
        self.tallies[c] = rational::zero();
        out
    }

    /// Elects `c`; with `transfer_surplus` the excess over `quota` moves on at
    /// weight `surplus / tally`.
    pub fn elect(&mut self, c: usize, quota: &Rational, transfer_surplus: bool) -> (Vec<Transfer>, Rational) {
        self.status[c] = Status::Elected;
        let tally = self.tallies[c].clone();
        if transfer_surplus && &tally > quota {
            let factor = (&tally - quota) / &tally;
            let out = self.release(c, Some(&factor));
            self.tallies[c] = quota.clone();
            out
        } else {
            (Vec::new(), rational::zero())
        }
    }

    pub fn tally_snapshot(&self) -> Vec<(usize, Rational)> {
        (0..self.status.len())
            .filter(|&c| self.status[c] != Status::Eliminated)
            .map(|c| (c, self.tallies[c].clone()))
            .collect()
    }
}

/// Picks the lowest tally; ties go to the candidate latest in the roster.
pub(crate) fn lowest(active: &[usize], tallies: &[Rational]) -> (usize, bool) {
    let mut best = active[0];
    let mut tied = false;
    for &c in &active[1..] {
        if tallies[c] < tallies[best] {
            best = c;
            tied = false;
        } else if tallies[c] == tallies[best] {
            best = c;
            tied = true;
        }
    }
    (best, tied)
}

/// Picks the highest tally; ties go to the candidate earliest in the roster.
pub(crate) fn highest(candidates: &[usize], tallies: &[Rational]) -> (usize, bool) {
    let mut best = candidates[0];
    let mut tied = false;
    for &c in &candidates[1..] {
        if tallies[c] > tallies[best] {
            best = c;
            tied = false;
        } else if tallies[c] == tallies[best] {
            tied = true;
        }
    }
    (best, tied)
}

/// Orders candidates by descending tally, earliest roster first on ties.
pub(crate) fn descending(mut candidates: Vec<usize>, tallies: &[Rational]) -> Vec<usize> {
    candidates.sort_by(|&a, &b| tallies[b].cmp(&tallies[a]).then(a.cmp(&b)));
    candidates
}

/// Tabulates the instance.
pub fn tabulate(instance: &ElectionInstance) -> Result<TabulationResult> {
    tabulate_ballots(instance, &[])
}

/// Tabulates the instance together with `added` ballots; the quota is
/// computed from the combined ballot count.
pub fn tabulate_ballots(instance: &ElectionInstance, added: &[Ballot]) -> Result<TabulationResult> {
    let total = instance.total_ballots() + added.iter().map(|b| b.count).sum::<u64>();
    if total == 0 {
        return Err(Error::EmptyElection);
    }
    let m = instance.candidate_count();
    let seats = instance.seats();
    let quota_n = total / (seats as u64 + 1) + 1;
    let quota = rational::from_u64(quota_n);
    let mut count = Count::new(m, instance.ballots().iter().chain(added.iter()).map(|b| (b, 0)));
    let initial_exhausted = count.exhausted.clone();
    let mut events: Vec<Event> = Vec::with_capacity(m.saturating_sub(1));
    let mut rounds = Vec::new();
    let mut decisive = true;

    loop {
        let active = count.active();
        let remaining = seats - count.elected_count();
        if remaining == 0 {
            // Seats are filled; the rest are ranked below the winners.
            let mut rest = descending(active, &count.tallies);
            rest.reverse();
            for &c in rest.iter().take(rest.len().saturating_sub(1)) {
                events.push(Event::loss(c));
            }
            break;
        }
        if active.len() <= remaining {
            let fill = descending(active, &count.tallies);
            for &c in fill.iter().take(fill.len().saturating_sub(1)) {
                events.push(Event::win(c));
            }
            break;
        }
        let round = rounds.len() + 1;
        let tallies = count.tally_snapshot();
        let before = count.exhausted.clone();
        let reached: Vec<usize> = active.iter().copied().filter(|&c| count.tallies[c] >= quota).collect();
        let (event, transfers) = if !reached.is_empty() {
            let (c, tied) = highest(&reached, &count.tallies);
            decisive &= !tied;
            let more_seats = count.elected_count() + 1 < seats;
            let (t, _) = count.elect(c, &quota, more_seats);
            (Event::win(c), t)
        } else {
            let (c, tied) = lowest(&active, &count.tallies);
            decisive &= !tied;
            let (t, _) = count.eliminate(c);
            (Event::loss(c), t)
        };
        events.push(event);
        rounds.push(RoundLog {
            round,
            active,
            tallies,
            event,
            transfers,
            exhausted_this_round: &count.exhausted - &before,
            cumulative_exhausted: count.exhausted.clone(),
        });
    }

    let structure = Structure::from_events(m, &events)?;
    let winners = structure.winners(seats);
    Ok(TabulationResult { structure, rounds, winners, quota: quota_n, initial_exhausted, decisive })
}

/// Round table as CSV: one row per round, one column per candidate, plus
/// the exhausted total and the round's event.
pub fn rounds_csv(instance: &ElectionInstance, result: &TabulationResult) -> String {
    let mut out = String::from("round");
    for name in instance.candidates() {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push_str(",exhausted,event\n");
    for r in &result.rounds {
        out.push_str(&r.round.to_string());
        for c in 0..instance.candidate_count() {
            out.push(',');
            if let Some(v) = r.tally(c) {
                out.push_str(&format!("{:.4}", rational::to_f64(v)));
            }
        }
        let start_exhausted = &r.cumulative_exhausted - &r.exhausted_this_round;
        out.push_str(&format!(
            ",{:.4},{}:{}\n",
            rational::to_f64(&start_exhausted),
            r.event.outcome,
            csv_field(instance.name(r.event.candidate))
        ));
    }
    out
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}
