//! Exhaustive reference for single-winner ballot additions.
//!
//! Counts with plain integers, independent of the library engine: a
//! candidate holding a majority of all ballots cast wins, otherwise the
//! unique lowest candidate is eliminated. Any tie makes the count
//! indecisive.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rcv_core::{Ballot, ElectionInstance};

pub type Profile = Vec<(Vec<usize>, u64)>;

/// Winner of a tie-free count, or `None` if any decision was tied.
pub fn strict_winner(m: usize, ballots: &[(Vec<usize>, u64)]) -> Option<usize> {
    let total: u64 = ballots.iter().map(|b| b.1).sum();
    if total == 0 {
        return None;
    }
    let threshold = total / 2 + 1;
    let mut alive = vec![true; m];
    let mut left = m;
    loop {
        if left == 1 {
            return alive.iter().position(|a| *a);
        }
        let mut tally = vec![0u64; m];
        for (ranking, count) in ballots {
            if let Some(&c) = ranking.iter().find(|&&c| alive[c]) {
                tally[c] += count;
            }
        }
        if let Some(c) = (0..m).find(|&c| alive[c] && tally[c] >= threshold) {
            return Some(c);
        }
        let low = (0..m).filter(|&c| alive[c]).map(|c| tally[c]).min().unwrap();
        let lows: Vec<usize> = (0..m).filter(|&c| alive[c] && tally[c] == low).collect();
        if lows.len() > 1 {
            return None;
        }
        alive[lows[0]] = false;
        left -= 1;
    }
}

/// Every ranking of length 1..=m without repeats.
pub fn all_rankings(m: usize) -> Vec<Vec<usize>> {
    fn extend(m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for c in 0..m {
            if !cur.contains(&c) {
                cur.push(c);
                out.push(cur.clone());
                extend(m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(m, &mut Vec::new(), &mut out);
    out
}

/// For each candidate, the fewest added ballots (up to `budget`) that make
/// it the tie-free winner.
pub fn min_additions(m: usize, base: &[(Vec<usize>, u64)], budget: u64) -> Vec<Option<u64>> {
    let rankings = all_rankings(m);
    let mut best: Vec<Option<u64>> = vec![None; m];
    for n in 0..=budget {
        if best.iter().all(|b| b.is_some()) {
            break;
        }
        let found = winners_with(m, base, &rankings, n as usize);
        for c in 0..m {
            if best[c].is_none() && found[c] {
                best[c] = Some(n);
            }
        }
    }
    best
}

/// Candidates that some multiset of exactly `n` added rankings makes win.
fn winners_with(m: usize, base: &[(Vec<usize>, u64)], rankings: &[Vec<usize>], n: usize) -> Vec<bool> {
    let mut found = vec![false; m];
    let mut picks = vec![0usize; n];
    loop {
        let mut profile: Profile = base.to_vec();
        for &p in &picks {
            profile.push((rankings[p].clone(), 1));
        }
        if let Some(w) = strict_winner(m, &profile) {
            found[w] = true;
        }
        // Next nondecreasing index tuple.
        let mut i = n;
        loop {
            if i == 0 {
                return found;
            }
            i -= 1;
            if picks[i] + 1 < rankings.len() {
                picks[i] += 1;
                for j in i + 1..n {
                    picks[j] = picks[i];
                }
                break;
            }
        }
    }
}

pub struct Case {
    pub seed: u64,
    pub instance: ElectionInstance,
    pub profile: Profile,
    pub budget: u64,
}

/// Random single-winner election: `cands` candidates, `ballots` ballots of
/// random length, and a budget of 0 to 4.
pub fn random_case(
    seed: u64,
    cands: std::ops::RangeInclusive<usize>,
    ballots: std::ops::RangeInclusive<usize>,
) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(cands);
    let n = rng.random_range(ballots);
    let mut profile: Profile = Vec::new();
    for _ in 0..n {
        let mut pool: Vec<usize> = (0..m).collect();
        let len = rng.random_range(1..=m);
        let mut ranking = Vec::with_capacity(len);
        for _ in 0..len {
            let i = rng.random_range(0..pool.len());
            ranking.push(pool.swap_remove(i));
        }
        profile.push((ranking, 1));
    }
    let budget = rng.random_range(0..=4);
    let names = (0..m).map(|c| ((b'A' + c as u8) as char).to_string()).collect();
    let list = profile.iter().map(|(r, c)| Ballot::new(r.clone(), *c)).collect();
    let instance = ElectionInstance::new(names, list, 1).unwrap();
    Case { seed, instance, profile, budget }
}

/// The generated oracle corpus.
pub fn corpus(size: u64) -> Vec<Case> {
    (0..size).map(|s| random_case(1000 + s, 3..=4, 8..=12)).collect()
}

/// Oracle answers for the corpus, computed in parallel.
pub fn oracle_answers(cases: &[Case]) -> Vec<Vec<Option<u64>>> {
    cases.par_iter().map(|c| min_additions(c.instance.candidate_count(), &c.profile, c.budget)).collect()
}

/// Random election with `seats` seats and merged ballot counts.
pub fn random_instance(
    seed: u64,
    cands: std::ops::RangeInclusive<usize>,
    ballots: std::ops::RangeInclusive<usize>,
    seats: usize,
) -> ElectionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(cands);
    let n = rng.random_range(ballots);
    let mut list = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pool: Vec<usize> = (0..m).collect();
        let len = rng.random_range(1..=m);
        let mut ranking = Vec::with_capacity(len);
        for _ in 0..len {
            let i = rng.random_range(0..pool.len());
            ranking.push(pool.swap_remove(i));
        }
        list.push(Ballot::new(ranking, rng.random_range(1..=3)));
    }
    let names = (0..m).map(|c| ((b'A' + c as u8) as char).to_string()).collect();
    ElectionInstance::new(names, list, seats.min(m)).unwrap()
}
