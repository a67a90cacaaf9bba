mod support;

use rcv_core::reduction::remove_irrelevant;
use rcv_core::search::{optimal_strategy, PruneCache, SearchOptions, Target};
use support::oracle;

#[test]
fn oracle_counts_e1() {
    let e1 = vec![(vec![0], 4), (vec![1], 3), (vec![2, 1], 2)];
    assert_eq!(oracle::strict_winner(3, &e1), Some(1));
    assert_eq!(oracle::min_additions(3, &e1, 3), vec![Some(2), Some(0), Some(3)]);
}

#[test]
fn search_matches_oracle() {
    let cases = oracle::corpus(200);
    let answers = oracle::oracle_answers(&cases);
    let mut mismatches = Vec::new();
    for (case, want) in cases.iter().zip(&answers) {
        let cache = PruneCache::new();
        let options = SearchOptions::new(case.budget);
        for (c, &expected) in want.iter().enumerate() {
            let got =
                optimal_strategy(&case.instance, &Target::Candidate(c), &options, &cache).unwrap().map(|s| s.total);
            if got != expected {
                mismatches.push(format!(
                    "seed {} cand {} budget {}: got {:?} want {:?} {:?}",
                    case.seed, c, case.budget, got, expected, case.profile
                ));
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

#[test]
fn removed_candidates_are_unwinnable() {
    let cases = oracle::corpus(200);
    let answers = oracle::oracle_answers(&cases);
    let mut violations = Vec::new();
    for (case, want) in cases.iter().zip(&answers) {
        let r = remove_irrelevant(&case.instance, case.budget);
        for &c in &r.removed {
            if want[c].is_some() {
                violations.push(format!("seed {} removed {} but oracle wins with {:?}", case.seed, c, want[c]));
            }
        }
    }
    assert!(violations.is_empty(), "{}", violations.join("\n"));
}
