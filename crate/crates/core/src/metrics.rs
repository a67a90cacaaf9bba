//! Election attributes derived from a tabulation and a victory-gap table:
//! margin of victory, competitiveness bands, strategy classes, preference
//! alignment and exhaustion viability.

use serde::{Deserialize, Serialize};

use crate::allocation::{Activation, Strategy};
use crate::instance::{Ballot, ElectionInstance};
use crate::rational;
use crate::tabulation::{tabulate_ballots, TabulationResult};

/// Share of exhausted ballots that must favor the trailing candidate,
/// `50 + g / (2e) * 100`. `None` without an exhausted pool.
pub fn required_preference(gap_percent: f64, exhaust_percent: f64) -> Option<f64> {
    (exhaust_percent > 0.0).then(|| 50.0 + gap_percent / (2.0 * exhaust_percent) * 100.0)
}

/// Net advantage the completions must deliver, `g / e * 100`; equal to
/// `2 (r - 50)`.
pub fn required_net_advantage(gap_percent: f64, exhaust_percent: f64) -> Option<f64> {
    (exhaust_percent > 0.0).then(|| gap_percent / exhaust_percent * 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Winner,
    NearWinner,
    Contender,
    Competitive,
    Distant,
    FarBehind,
    /// Gap above the allowance, so only bounded below.
    Unknown,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Winner => "Winner",
            Band::NearWinner => "Near Winner",
            Band::Contender => "Contender",
            Band::Competitive => "Competitive",
            Band::Distant => "Distant",
            Band::FarBehind => "Far Behind",
            Band::Unknown => "Beyond Allowance",
        }
    }
}

/// Band edges in percent. Single-winner edges are 0/5/20/30/45; with
/// several seats they shrink with the quota (25% for three seats against
/// 50% for one).
pub fn band_edges(seats: usize) -> [f64; 4] {
    let single = [5.0, 20.0, 30.0, 45.0];
    if seats <= 1 {
        return single;
    }
    let scale = (100.0 / (seats as f64 + 1.0)) / 50.0;
    single.map(|e| e * scale)
}

/// Half-open band for a gap.
pub fn band(gap_percent: Option<f64>, seats: usize) -> Band {
    let Some(g) = gap_percent else { return Band::Unknown };
    if g <= 0.0 {
        return Band::Winner;
    }
    let e = band_edges(seats);
    if g < e[0] {
        Band::NearWinner
    } else if g < e[1] {
        Band::Contender
    } else if g < e[2] {
        Band::Competitive
    } else if g < e[3] {
        Band::Distant
    } else {
        Band::FarBehind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Margin {
    Exact {
        percent: f64,
        candidate: usize,
    },
    /// No non-winner is reachable within the allowance.
    UpperBound {
        percent: f64,
    },
    /// Fewer candidates than seats plus one.
    Undefined,
}

impl Margin {
    pub fn percent(&self) -> Option<f64> {
        match self {
            Margin::Exact { percent, .. } | Margin::UpperBound { percent } => Some(*percent),
            Margin::Undefined => None,
        }
    }
}

/// Smallest gap among non-winners. `gaps` pairs candidates with their gap
/// in percent (`None` beyond the allowance).
pub fn margin_of_victory(gaps: &[(usize, Option<f64>)], winners: &[usize], allowance_percent: f64) -> Margin {
    let losers: Vec<&(usize, Option<f64>)> = gaps.iter().filter(|(c, _)| !winners.contains(c)).collect();
    if losers.is_empty() {
        return Margin::Undefined;
    }
    losers
        .iter()
        .filter_map(|(c, g)| g.map(|g| (g, *c)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(percent, candidate)| Margin::Exact { percent, candidate })
        .unwrap_or(Margin::UpperBound { percent: allowance_percent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyClass {
    Selfish,
    NonSelfish,
}

pub fn classify_strategy(strategy: &Strategy, target: usize) -> StrategyClass {
    if strategy.is_bullet_for(target) {
        StrategyClass::Selfish
    } else {
        StrategyClass::NonSelfish
    }
}

/// Fewest bullet ballots for `target`, between `from` and `budget`, that
/// seat it decisively.
pub fn best_bullet_cost(instance: &ElectionInstance, target: usize, from: u64, budget: u64) -> Option<u64> {
    (from..=budget).find(|&n| {
        let added = if n == 0 { vec![] } else { vec![Ballot::new(vec![target], n)] };
        tabulate_ballots(instance, &added).is_ok_and(|r| r.decisive && r.winners.contains(&target))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Match,
    PartialMatch,
    NoMatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub verdict: Verdict,
    pub allowance_percent: f64,
    /// Social-choice order restricted to candidates within the allowance.
    pub social_order: Vec<usize>,
    /// The same candidates by ascending gap.
    pub gap_order: Vec<usize>,
    pub common_prefix: usize,
}

/// Compares the social-choice order with ascending-gap order over the
/// candidates whose gap is within the allowance. With several seats the
/// orders are a partial match when they agree on the winners and at least
/// the next candidate.
pub fn preference_alignment(
    order: &[usize],
    gaps: &[(usize, Option<f64>)],
    allowance_percent: f64,
    seats: usize,
) -> Alignment {
    let gap_of = |c: usize| gaps.iter().find(|(x, _)| *x == c).and_then(|(_, g)| *g);
    let social: Vec<usize> =
        order.iter().copied().filter(|&c| gap_of(c).is_some_and(|g| g <= allowance_percent)).collect();
    let mut by_gap = social.clone();
    let pos = |c: usize| social.iter().position(|&x| x == c).unwrap_or(usize::MAX);
    by_gap.sort_by(|&a, &b| {
        gap_of(a).unwrap_or(f64::INFINITY).total_cmp(&gap_of(b).unwrap_or(f64::INFINITY)).then(pos(a).cmp(&pos(b)))
    });
    let common = social.iter().zip(&by_gap).take_while(|(a, b)| a == b).count();
    let verdict = if common == social.len() {
        Verdict::Match
    } else if seats > 1 && common > seats {
        Verdict::PartialMatch
    } else {
        Verdict::NoMatch
    };
    Alignment { verdict, allowance_percent, social_order: social, gap_order: by_gap, common_prefix: common }
}

/// Exhausted ballots (as a percent of all ballots) before `candidate`'s
/// decision round in the actual count.
pub fn exhaustion_at_elimination(result: &TabulationResult, candidate: usize, total: u64) -> Option<f64> {
    let round = result.decision_round(candidate).or_else(|| {
        // Decided after the last logged round.
        (!result.winners.contains(&candidate)).then_some(result.rounds.len() + 1)
    })?;
    Some(rational::percent_2dp(&result.exhausted_before(round), total))
}

/// True when each activation's cumulative need fits the exhausted pool at
/// the start of its round. `offset` shifts reduced-instance rounds to the
/// actual count (one round per removed candidate).
pub fn activation_viable(activation: &[Activation], actual: &TabulationResult, offset: usize) -> bool {
    activation.iter().all(|a| {
        let pool = actual.exhausted_before(a.round + offset);
        rational::from_u64(a.cumulative) <= pool
    })
}
