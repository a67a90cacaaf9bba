//! Canonical election instances: a candidate roster, a merged ballot
//! multiset and a seat count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ranking of roster indices with its multiplicity. An empty ranking is a
/// ballot that is already exhausted (left behind when candidates are
/// removed from an instance).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ballot {
    pub ranking: Vec<usize>,
    pub count: u64,
}

impl Ballot {
    pub fn new(ranking: Vec<usize>, count: u64) -> Self {
        Ballot { ranking, count }
    }
}

/// Droop quota `floor(ballots / (seats + 1)) + 1`.
pub fn droop_quota(ballot_count: u64, seats: usize) -> Result<u64> {
    if seats == 0 {
        return Err(Error::Domain("seat count must be at least 1".into()));
    }
    Ok(ballot_count / (seats as u64 + 1) + 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionInstance {
    candidates: Vec<String>,
    ballots: Vec<Ballot>,
    seats: usize,
    total_ballots: u64,
}

impl ElectionInstance {
    /// Builds an instance, merging identical rankings. The roster order is
    /// the tie-break hierarchy.
    pub fn new(candidates: Vec<String>, ballots: Vec<Ballot>, seats: usize) -> Result<Self> {
        if seats == 0 {
            return Err(Error::InvalidInstance("seat count must be at least 1".into()));
        }
        if seats > candidates.len() {
            return Err(Error::InvalidInstance(format!("{seats} seats but only {} candidates", candidates.len())));
        }
        let mut names = candidates.clone();
        names.sort();
        names.dedup();
        if names.len() != candidates.len() {
            return Err(Error::InvalidInstance("duplicate candidate name in roster".into()));
        }
        let m = candidates.len();
        let mut merged: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for ballot in ballots {
            let mut seen = vec![false; m];
            for &c in &ballot.ranking {
                if c >= m {
                    return Err(Error::InvalidInstance(format!("ranking references unknown candidate {c}")));
                }
                if seen[c] {
                    return Err(Error::InvalidInstance(format!("ranking lists {} twice", candidates[c])));
                }
                seen[c] = true;
            }
            if ballot.count > 0 {
                *merged.entry(ballot.ranking).or_insert(0) += ballot.count;
            }
        }
        let ballots: Vec<Ballot> = merged.into_iter().map(|(r, n)| Ballot::new(r, n)).collect();
        let total_ballots = ballots.iter().map(|b| b.count).sum();
        Ok(ElectionInstance { candidates, ballots, seats, total_ballots })
    }

    /// Convenience constructor from named rankings.
    pub fn from_named(candidates: &[&str], ballots: &[(&[&str], u64)], seats: usize) -> Result<Self> {
        let roster: Vec<String> = candidates.iter().map(|s| s.to_string()).collect();
        let mut out = Vec::with_capacity(ballots.len());
        for (ranking, count) in ballots {
            let mut idx = Vec::with_capacity(ranking.len());
            for name in ranking.iter() {
                let i = roster
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::InvalidInstance(format!("unknown candidate {name}")))?;
                idx.push(i);
            }
            out.push(Ballot::new(idx, *count));
        }
        ElectionInstance::new(roster, out, seats)
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn name(&self, candidate: usize) -> &str {
        &self.candidates[candidate]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == name)
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn seats(&self) -> usize {
        self.seats
    }

    pub fn total_ballots(&self) -> u64 {
        self.total_ballots
    }

    pub fn quota(&self) -> u64 {
        self.total_ballots / (self.seats as u64 + 1) + 1
    }

    /// First-choice votes per roster index.
    pub fn first_choices(&self) -> Vec<u64> {
        let mut tally = vec![0; self.candidates.len()];
        for b in &self.ballots {
            if let Some(&c) = b.ranking.first() {
                tally[c] += b.count;
            }
        }
        tally
    }

    /// Ballots exhausted before any counting (empty rankings).
    pub fn pre_exhausted(&self) -> u64 {
        self.ballots.iter().filter(|b| b.ranking.is_empty()).map(|b| b.count).sum()
    }

    /// Returns a copy with extra ballots appended (merged).
    pub fn with_added(&self, extra: &[Ballot]) -> Result<Self> {
        let mut ballots = self.ballots.clone();
        ballots.extend(extra.iter().cloned());
        ElectionInstance::new(self.candidates.clone(), ballots, self.seats)
    }

    /// Returns a copy with a different seat count.
    pub fn with_seats(&self, seats: usize) -> Result<Self> {
        ElectionInstance::new(self.candidates.clone(), self.ballots.clone(), seats)
    }

    /// Eliminates `removed` from the instance: their marks are deleted from
    /// every ranking, ballots left empty stay as exhausted ballots, and the
    /// roster shrinks to the survivors in their original hierarchy order.
    /// The second value maps new roster indices to old ones.
    pub fn reduce(&self, removed: &[usize]) -> Result<(ElectionInstance, Vec<usize>)> {
        let m = self.candidates.len();
        let mut gone = vec![false; m];
        for &c in removed {
            gone[c] = true;
        }
        let keep: Vec<usize> = (0..m).filter(|&c| !gone[c]).collect();
        let mut remap = vec![usize::MAX; m];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let candidates = keep.iter().map(|&c| self.candidates[c].clone()).collect();
        let ballots = self
            .ballots
            .iter()
            .map(|b| {
                let ranking = b.ranking.iter().filter(|&&c| !gone[c]).map(|&c| remap[c]).collect();
                Ballot::new(ranking, b.count)
            })
            .collect();
        let seats = self.seats.min(keep.len()).max(1);
        let reduced = ElectionInstance::new(candidates, ballots, seats)?;
        Ok((reduced, keep))
    }

    pub fn summary(&self) -> ElectionSummary {
        let first = self.first_choices();
        ElectionSummary {
            total_ballots: self.total_ballots,
            candidates: self.candidates.len(),
            seats: self.seats,
            quota: self.quota(),
            first_choices: self.candidates.iter().cloned().zip(first).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionSummary {
    pub total_ballots: u64,
    pub candidates: usize,
    pub seats: usize,
    pub quota: u64,
    pub first_choices: Vec<(String, u64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn e1() -> ElectionInstance {
        ElectionInstance::from_named(&["A", "B", "C"], &[(&["A"], 4), (&["B"], 3), (&["C", "B"], 2)], 1).unwrap()
    }

    #[test]
    fn droop_examples() {
        assert_eq!(droop_quota(9, 1).unwrap(), 5);
        assert_eq!(droop_quota(100, 1).unwrap(), 51);
        assert_eq!(droop_quota(42_686, 3).unwrap(), 10_672);
        assert_eq!(droop_quota(0, 1).unwrap(), 1);
        assert!(droop_quota(10, 0).is_err());
    }

    #[test]
    fn e1_summary() {
        let s = e1().summary();
        assert_eq!(s.total_ballots, 9);
        assert_eq!(s.quota, 5);
        let firsts: Vec<u64> = s.first_choices.iter().map(|(_, n)| *n).collect();
        assert_eq!(firsts, vec![4, 3, 2]);
    }

    #[test]
    fn identical_rankings_merge() {
        let inst = ElectionInstance::new(
            vec!["A".into(), "B".into()],
            vec![Ballot::new(vec![0, 1], 2), Ballot::new(vec![1], 1), Ballot::new(vec![0, 1], 3)],
            1,
        )
        .unwrap();
        assert_eq!(inst.ballots().len(), 2);
        assert_eq!(inst.total_ballots(), 6);
    }

    #[test]
    fn rejects_bad_rankings() {
        let roster = vec!["A".to_string(), "B".to_string()];
        assert!(ElectionInstance::new(roster.clone(), vec![Ballot::new(vec![0, 0], 1)], 1).is_err());
        assert!(ElectionInstance::new(roster.clone(), vec![Ballot::new(vec![2], 1)], 1).is_err());
        assert!(ElectionInstance::new(roster, vec![], 3).is_err());
    }

    #[test]
    fn reduce_keeps_exhausted_ballots() {
        let (reduced, keep) = e1().reduce(&[2]).unwrap();
        assert_eq!(keep, vec![0, 1]);
        assert_eq!(reduced.total_ballots(), 9);
        assert_eq!(reduced.first_choices(), vec![4, 5]);
        let (only_a, _) = e1().reduce(&[1, 2]).unwrap();
        assert_eq!(only_a.pre_exhausted(), 5);
        assert_eq!(only_a.quota(), 5);
    }
}
