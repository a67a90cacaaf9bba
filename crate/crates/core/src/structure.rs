//! Election structures: a social-choice order paired with the per-round
//! win/loss sequence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "W")]
    Win,
    #[serde(rename = "L")]
    Loss,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Win => "W",
            Outcome::Loss => "L",
        })
    }
}

/// One round's decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub outcome: Outcome,
    pub candidate: usize,
}

impl Event {
    pub fn win(candidate: usize) -> Self {
        Event { outcome: Outcome::Win, candidate }
    }

    pub fn loss(candidate: usize) -> Self {
        Event { outcome: Outcome::Loss, candidate }
    }
}

/// Winners fill the order from the top, losers from the bottom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Structure {
    pub order: Vec<usize>,
    pub sequence: Vec<Outcome>,
}

impl Structure {
    pub fn new(order: Vec<usize>, sequence: Vec<Outcome>) -> Result<Self> {
        let m = order.len();
        if m == 0 || sequence.len() != m - 1 {
            return Err(Error::Domain(format!(
                "structure over {m} candidates needs {} results, got {}",
                m.saturating_sub(1),
                sequence.len()
            )));
        }
        let mut seen = vec![false; m];
        for &c in &order {
            if c >= m || seen[c] {
                return Err(Error::Domain("structure order is not a permutation".into()));
            }
            seen[c] = true;
        }
        Ok(Structure { order, sequence })
    }

    /// Builds the structure from `m - 1` round events.
    pub fn from_events(m: usize, events: &[Event]) -> Result<Self> {
        if m == 0 || events.len() != m - 1 {
            return Err(Error::Domain("event list must cover m - 1 rounds".into()));
        }
        let mut order = vec![usize::MAX; m];
        let mut placed = vec![false; m];
        let (mut top, mut bottom) = (0usize, m - 1);
        for e in events {
            if e.candidate >= m || placed[e.candidate] {
                return Err(Error::Domain("event list repeats a candidate".into()));
            }
            placed[e.candidate] = true;
            match e.outcome {
                Outcome::Win => {
                    order[top] = e.candidate;
                    top += 1;
                }
                Outcome::Loss => {
                    order[bottom] = e.candidate;
                    bottom = bottom.wrapping_sub(1);
                }
            }
        }
        let last = (0..m).find(|&c| !placed[c]).expect("one candidate remains");
        order[top] = last;
        Ok(Structure { order, sequence: events.iter().map(|e| e.outcome).collect() })
    }

    /// The round events encoded by the structure, in round order.
    pub fn events(&self) -> Vec<Event> {
        let m = self.order.len();
        let (mut top, mut bottom) = (0usize, m.saturating_sub(1));
        let mut out = Vec::with_capacity(self.sequence.len());
        for &s in &self.sequence {
            match s {
                Outcome::Win => {
                    out.push(Event::win(self.order[top]));
                    top += 1;
                }
                Outcome::Loss => {
                    out.push(Event::loss(self.order[bottom]));
                    bottom = bottom.wrapping_sub(1);
                }
            }
        }
        out
    }

    pub fn win_count(&self) -> usize {
        self.sequence.iter().filter(|s| **s == Outcome::Win).count()
    }

    pub fn winners(&self, seats: usize) -> Vec<usize> {
        self.order.iter().take(seats).copied().collect()
    }

    pub fn render(&self, names: &[String]) -> String {
        let f: Vec<&str> = self.order.iter().map(|&c| names[c].as_str()).collect();
        let s: Vec<String> = self.sequence.iter().map(|o| o.to_string()).collect();
        format!("({}; {})", f.join(","), s.join(""))
    }
}

/// Size of the full structure space, `m! * 2^(m-1)`.
pub fn structure_space_size(relevant_count: usize) -> u128 {
    if relevant_count == 0 {
        return 0;
    }
    let factorial: u128 = (1..=relevant_count as u128).product();
    factorial << (relevant_count - 1)
}

/// Number of win-placement sequences over `slots` positions with between one
/// and `max_wins` wins.
pub fn win_placement_count(slots: usize, max_wins: usize) -> u128 {
    (1..=max_wins.min(slots)).map(|j| binomial(slots as u128, j as u128)).sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}
