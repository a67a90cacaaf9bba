//! Strict-support counts: how many ballots starting in a set `L` can reach
//! a candidate, optionally excluding ballots that rank the candidate below
//! some member of a guard set `G`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::instance::ElectionInstance;

/// Counts, for every candidate at once, the ballots whose first choice is
/// in `lower` and that rank the candidate before any member of `guard`.
/// Candidates absent from a ballot receive nothing from it.
pub fn strict_support_all(instance: &ElectionInstance, lower: &[usize], guard: &[usize]) -> Vec<u64> {
    strict_support_without(instance, lower, guard, &[])
}

/// [`strict_support_all`] on the instance with `excluded` candidates struck
/// from every ranking.
pub fn strict_support_without(
    instance: &ElectionInstance,
    lower: &[usize],
    guard: &[usize],
    excluded: &[usize],
) -> Vec<u64> {
    let m = instance.candidate_count();
    let flags = |set: &[usize]| {
        let mut f = vec![false; m];
        for &c in set {
            f[c] = true;
        }
        f
    };
    let (in_lower, in_guard, gone) = (flags(lower), flags(guard), flags(excluded));
    let mut out = vec![0u64; m];
    for ballot in instance.ballots() {
        let mut marks = ballot.ranking.iter().copied().filter(|&c| !gone[c]).peekable();
        match marks.peek() {
            Some(&first) if in_lower[first] => {}
            _ => continue,
        }
        for c in marks {
            out[c] += ballot.count;
            if in_guard[c] {
                break;
            }
        }
    }
    out
}

/// Single-target form of [`strict_support_all`].
pub fn strict_support(instance: &ElectionInstance, lower: &[usize], guard: &[usize], target: usize) -> u64 {
    strict_support_all(instance, lower, guard)[target]
}

/// The two tables consulted by the removal conditions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportTables {
    pub removed: Vec<usize>,
    pub upper: Vec<usize>,
    /// Support from `removed`, guarded by `upper`, per candidate.
    pub single: Vec<u64>,
    /// `pairwise[a][b]`: support of `upper[b]` from ballots starting with
    /// `upper[b]` or with a removed candidate other than `removed[a]`.
    pub pairwise: Vec<Vec<u64>>,
}

impl SupportTables {
    pub fn pair(&self, i: usize, j: usize) -> Option<u64> {
        let a = self.removed.iter().position(|&c| c == i)?;
        let b = self.upper.iter().position(|&c| c == j)?;
        Some(self.pairwise[a][b])
    }

    /// Row of pairwise values for removed candidate `i`, aligned with `upper`.
    pub fn row(&self, i: usize) -> Option<&[u64]> {
        let a = self.removed.iter().position(|&c| c == i)?;
        Some(&self.pairwise[a])
    }
}

pub fn support_matrix(instance: &ElectionInstance, removed: &[usize], upper: &[usize]) -> SupportTables {
    SupportCache::new(instance).matrix(removed, upper)
}

/// Memoizes [`strict_support_all`] by `(lower, guard)` for one instance.
type SupportKey = (Vec<usize>, Vec<usize>);

#[derive(Debug)]
pub struct SupportCache<'a> {
    instance: &'a ElectionInstance,
    memo: Mutex<HashMap<SupportKey, Vec<u64>>>,
}

impl<'a> SupportCache<'a> {
    pub fn new(instance: &'a ElectionInstance) -> Self {
        SupportCache { instance, memo: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, lower: &[usize], guard: &[usize]) -> Vec<u64> {
        let mut l = lower.to_vec();
        l.sort_unstable();
        let mut g = guard.to_vec();
        g.sort_unstable();
        let key = (l, g);
        if let Some(hit) = self.memo.lock().expect("support cache poisoned").get(&key) {
            return hit.clone();
        }
        let value = strict_support_all(self.instance, lower, guard);
        self.memo.lock().expect("support cache poisoned").entry(key).or_insert(value).clone()
    }

    pub fn matrix(&self, removed: &[usize], upper: &[usize]) -> SupportTables {
        let single = self.get(removed, upper);
        let first = self.instance.first_choices();
        let pairwise = removed
            .iter()
            .map(|&i| {
                let others: Vec<usize> = removed.iter().copied().filter(|&c| c != i).collect();
                let reach = self.get(&others, &[]);
                upper.iter().map(|&j| reach[j] + first[j]).collect()
            })
            .collect();
        SupportTables { removed: removed.to_vec(), upper: upper.to_vec(), single, pairwise }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> ElectionInstance {
        ElectionInstance::from_named(&["A", "B", "C"], &[(&["A"], 4), (&["B"], 3), (&["C", "B"], 2)], 1).unwrap()
    }

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    #[test]
    fn hand_counts() {
        let e = e1();
        assert_eq!(strict_support(&e, &[C], &[], B), 2);
        assert_eq!(strict_support(&e, &[C, B], &[], B), 5);
        assert_eq!(strict_support(&e, &[C], &[A], B), 2);
        assert_eq!(strict_support(&e, &[C], &[B], B), 2);
        assert_eq!(strict_support(&e, &[A], &[], B), 0);
    }

    #[test]
    fn guard_excludes_later_ranks() {
        let e = ElectionInstance::from_named(&["A", "B", "C"], &[(&["C", "A", "B"], 3), (&["C", "B"], 1)], 1).unwrap();
        assert_eq!(strict_support(&e, &[C], &[A], B), 1);
        assert_eq!(strict_support(&e, &[C], &[], B), 4);
    }

    #[test]
    fn e1_matrix() {
        let t = support_matrix(&e1(), &[C], &[A, B]);
        assert_eq!(t.single[C], 2);
        assert_eq!(t.pair(C, B), Some(3));
        assert_eq!(t.pair(C, A), Some(4));
        let all = support_matrix(&e1(), &[A, B, C], &[]);
        assert!(all.pairwise.iter().all(|row| row.is_empty()));
    }

    #[test]
    fn cache_matches_direct() {
        let e = e1();
        let cache = SupportCache::new(&e);
        assert_eq!(cache.get(&[C, B], &[]), strict_support_all(&e, &[B, C], &[]));
        assert_eq!(cache.get(&[B, C], &[]), strict_support_all(&e, &[C, B], &[]));
    }
}
