//! Acceptance criteria, one line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rcv_cli::{run, Command, InputFormat, RunConfig};
use rcv_core::exhaustion_models::{beta_cdf, gap_beta_probability, BetaParams};
use rcv_core::ingest::{write_canonical, SourceFormat};
use rcv_core::metrics::{required_preference, StrategyClass, Verdict};
use rcv_core::pipeline::{analyze, AllowanceSetting, AnalysisConfig, AnalysisReport};
use rcv_core::reduction::remove_irrelevant;
use rcv_core::search::{enumerate_structures, optimal_strategy, victory_gaps, PruneCache, SearchOptions, Target};
use rcv_core::{rational, structure_space_size, tabulate, win_placement_count, ElectionInstance};
use support::oracle::{self, random_instance};
use support::quadrature::beta_cdf_quadrature;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Criterion = (&'static str, fn() -> Status);

fn check(ok: bool, detail: String) -> Status {
    if ok {
        Status::Pass(detail)
    } else {
        Status::Fail(detail)
    }
}

fn oracle_equivalence() -> Status {
    let start = Instant::now();
    let cases = oracle::corpus(200);
    let answers = oracle::oracle_answers(&cases);
    let mismatches: usize = cases
        .par_iter()
        .zip(&answers)
        .map(|(case, want)| {
            let cache = PruneCache::new();
            let options = SearchOptions::new(case.budget);
            (0..case.instance.candidate_count())
                .filter(|&c| {
                    let got = optimal_strategy(&case.instance, &Target::Candidate(c), &options, &cache)
                        .ok()
                        .flatten()
                        .map(|s| s.total);
                    got != want[c]
                })
                .count()
        })
        .sum();
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(600),
        format!("{} elections, {mismatches} mismatches, {:.1}s", cases.len(), elapsed.as_secs_f64()),
    )
}

fn removal_soundness() -> Status {
    let cases = oracle::corpus(200);
    let answers = oracle::oracle_answers(&cases);
    let mut removed = 0;
    let mut violations = 0;
    for (case, want) in cases.iter().zip(&answers) {
        let r = remove_irrelevant(&case.instance, case.budget);
        removed += r.removed.len();
        violations += r.removed.iter().filter(|&&c| want[c].is_some()).count();
    }
    check(violations == 0, format!("{removed} removals, {violations} violations"))
}

fn gap_beta_table() -> Status {
    let rows = [
        (1.60, 14.59, 10.42),
        (2.81, 8.41, 0.01),
        (1.93, 6.56, 0.07),
        (4.21, 5.14, 0.0),
        (5.69, 9.75, 0.0),
        (1.12, 14.08, 18.21),
    ];
    let mut worst: f64 = 0.0;
    for (g, e, want) in rows {
        let got = 100.0 * gap_beta_probability(g, e).map(|x| x.probability).unwrap_or(f64::NAN);
        worst = worst.max((got - want).abs());
    }
    check(worst <= 0.25, format!("max deviation {worst:.4} pp over {} rows", rows.len()))
}

fn required_preference_formula() -> Status {
    let r = required_preference(1.12, 14.08).unwrap_or(f64::NAN);
    let exact = format!("{r:.2}") == "53.98";
    let grid: Vec<f64> = (0..10).map(|i| 0.5 + 4.0 * i as f64).collect();
    let mut monotone = true;
    for &g in &grid {
        for &e in &grid {
            let here = required_preference(g, e).unwrap();
            monotone &= required_preference(g + 0.1, e).unwrap() > here;
            monotone &= required_preference(g, e + 0.1).unwrap() < here;
        }
    }
    check(exact && monotone, format!("r(1.12, 14.08) = {r:.2}, monotone over 100 points: {monotone}"))
}

fn structure_counts() -> Status {
    let three = structure_space_size(3);
    let enumerated = enumerate_structures(3, 2).count();
    let eight = structure_space_size(8);
    let portland = win_placement_count(16, 3);
    check(
        three == 24 && enumerated == 24 && eight == 5_160_960 && portland == 696,
        format!("m=3: {three} ({enumerated} enumerated), m=8: {eight}, n=16 k<=3: {portland}"),
    )
}

fn prune_equivalence() -> Status {
    let instances: Vec<(u64, usize)> = (0..40).map(|s| (7000 + s, 1)).chain((0..30).map(|s| (8000 + s, 2))).collect();
    let failures: Vec<u64> = instances
        .par_iter()
        .filter_map(|&(seed, seats)| {
            let inst = random_instance(seed, 3..=6, 10..=24, seats);
            let budget = inst.total_ballots() / 4;
            let a = victory_gaps(&inst, &SearchOptions::new(budget)).ok()?;
            let b = victory_gaps(&inst, &SearchOptions::new(budget).unpruned()).ok()?;
            let key = |t: &rcv_core::search::VictoryGapTable| {
                (
                    t.rows.iter().map(|r| r.ballots).collect::<Vec<_>>(),
                    t.coalitions.iter().map(|c| (c.members.clone(), c.ballots)).collect::<Vec<_>>(),
                )
            };
            (key(&a) != key(&b)).then_some(seed)
        })
        .collect();
    check(failures.is_empty(), format!("{} instances (k=1 and k=2), differing seeds {failures:?}", instances.len()))
}

fn tabulation_invariants() -> Status {
    let mut instances: Vec<ElectionInstance> = oracle::corpus(200).into_iter().map(|c| c.instance).collect();
    instances.extend((0..300).map(|s| random_instance(9000 + s, 2..=8, 1..=40, 1 + s as usize % 3)));
    let mut bad = 0;
    for inst in &instances {
        let Ok(result) = tabulate(inst) else {
            bad += 1;
            continue;
        };
        let total = rational::from_u64(inst.total_ballots());
        let conserved = result.rounds.iter().all(|r| {
            let held = r.tallies.iter().fold(rational::zero(), |acc, (_, v)| acc + v);
            held + result.exhausted_before(r.round) == total
        });
        let series = result.exhaustion_series();
        let monotone = series.windows(2).all(|w| w[0] <= w[1]);
        let no_surplus = inst.seats() > 1 || !result.surplus_transferred();
        if !(conserved && monotone && no_surplus) {
            bad += 1;
        }
    }
    check(bad == 0, format!("{} tabulations, {bad} violations", instances.len()))
}

fn data_dir() -> PathBuf {
    std::env::var_os("RCV_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn load(file: &str, format: SourceFormat, seats: usize) -> Option<ElectionInstance> {
    let path = data_dir().join(file);
    if !path.exists() {
        return None;
    }
    let mut config = RunConfig::new(Command::Analyze, path, std::env::temp_dir());
    config.format = InputFormat::Source(format);
    config.seats = seats;
    rcv_cli::load_instance(&config).ok().map(|(i, _)| i)
}

fn sorted_gaps(report: &AnalysisReport) -> Vec<f64> {
    let mut gaps: Vec<f64> = report.rows.iter().filter(|r| !r.winner).filter_map(|r| r.gap_percent).collect();
    gaps.sort_by(f64::total_cmp);
    gaps
}

fn close(got: &[f64], want: &[f64]) -> bool {
    got.len() >= want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.05)
}

fn data_reproduction() -> Status {
    let nyc_d1 = load("nyc_2021_council_d1.csv", SourceFormat::NycExport, 1);
    let portland_d1 = load("portland_2024_council_d1.csv", SourceFormat::MultnomahCvr, 3);
    let nyc_d23 = load("nyc_2021_council_d23.csv", SourceFormat::NycExport, 1);
    if nyc_d1.is_none() && portland_d1.is_none() && nyc_d23.is_none() {
        return Status::Skip(format!("no cast vote records under {}", data_dir().display()));
    }
    let mut notes = Vec::new();
    let mut ok = true;
    let run = |inst: &ElectionInstance, percent: f64| {
        let mut config = AnalysisConfig::with_percent(percent);
        config.models = false;
        analyze(inst, &config).map(|a| a.report)
    };
    if let Some(inst) = nyc_d1 {
        match run(&inst, 60.0) {
            Ok(r) => {
                let want = [17.07, 20.13, 28.95, 37.49, 47.37, 47.45, 50.15, 53.47];
                let gaps = sorted_gaps(&r);
                let pass = close(&gaps, &want)
                    && r.margin.percent().is_some_and(|m| (m - 17.07).abs() <= 0.05)
                    && r.alignment.verdict == Verdict::NoMatch;
                ok &= pass;
                notes.push(format!("NYC D1 gaps {gaps:.2?} alignment {:?}", r.alignment.verdict));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("NYC D1 error {e}"));
            }
        }
    }
    if let Some(inst) = portland_d1 {
        match run(&inst, 4.7) {
            Ok(r) => {
                let gaps = sorted_gaps(&r);
                let possible = r.rows.iter().filter(|row| row.gap_percent.is_some()).count();
                let pass = close(&gaps, &[1.60, 1.93, 2.81, 4.21]) && possible == 7;
                ok &= pass;
                notes.push(format!("Portland D1 gaps {gaps:.2?}, {possible} possible winners"));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("Portland D1 error {e}"));
            }
        }
    }
    for (file, percent, want) in [
        ("portland_2024_council_d2.csv", 6.5, 4),
        ("portland_2024_council_d3.csv", 12.36, 3),
        ("portland_2024_council_d4.csv", 9.6, 4),
    ] {
        if let Some(inst) = load(file, SourceFormat::MultnomahCvr, 3) {
            let possible = run(&inst, percent).map(|r| r.rows.iter().filter(|row| row.gap_percent.is_some()).count());
            ok &= possible.as_ref().is_ok_and(|&n| n == want);
            notes.push(format!("{file}: {possible:?} possible winners"));
        }
    }
    if let Some(inst) = nyc_d23 {
        match run(&inst, 40.0) {
            Ok(r) => {
                let d = &r.social_order[3];
                let row = r.row(d);
                let pct = row.and_then(|x| x.gap_percent);
                let class = row.and_then(|x| x.class);
                let mix: Vec<(String, f64)> = row
                    .and_then(|x| x.strategy.as_ref())
                    .map(|s| s.ballots.iter().map(|b| (b.ranking.join(">"), b.percent)).collect())
                    .unwrap_or_default();
                let pass = pct.is_some_and(|p| (p - 20.3).abs() <= 0.05) && class == Some(StrategyClass::NonSelfish);
                ok &= pass;
                notes.push(format!("NYC D23 {d}: {pct:?} {class:?} {mix:?}"));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("NYC D23 error {e}"));
            }
        }
    }
    check(ok, notes.join("; "))
}

fn determinism() -> Status {
    let inst = random_instance(4242, 5..=5, 30..=30, 1);
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Status::Fail(e.to_string()),
    };
    let input = dir.path().join("ballots.csv");
    if std::fs::write(&input, write_canonical(&inst).unwrap_or_default()).is_err() {
        return Status::Fail("cannot write input".into());
    }
    let runs: Vec<Vec<Vec<u8>>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let mut config = RunConfig::new(Command::Analyze, &input, &out);
            config.allowance = AllowanceSetting::Percent { percent: 40.0 };
            config.iterations = 2000;
            config.seed = 99;
            config.samples = 6;
            config.workers = Some(if *name == "a" { 1 } else { 4 });
            let analyzed = run(&config);
            config.command = Command::Bootstrap;
            let booted = run(&config);
            if analyzed.is_err() || booted.is_err() {
                return Vec::new();
            }
            ["analysis.json", "models.csv", "bootstrap.csv"]
                .iter()
                .map(|f| std::fs::read(out.join(f)).unwrap_or_default())
                .collect()
        })
        .collect();
    let same = !runs[0].is_empty() && runs[0] == runs[1] && runs[0].iter().all(|b| !b.is_empty());
    check(same, "analysis.json, models.csv and bootstrap.csv identical across runs with 1 and 4 workers".into())
}

fn beta_accuracy() -> Status {
    let params = [0.5, 1.0, 10.0, 50.0, 100.0];
    let mut worst: f64 = 0.0;
    for &a in &params {
        for &b in &params {
            for i in 1..=9 {
                let x = i as f64 / 10.0;
                let got = BetaParams::new(a, b).and_then(|p| beta_cdf(x, p)).unwrap_or(f64::NAN);
                let err = (got - beta_cdf_quadrature(x, a, b)).abs();
                worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
            }
        }
    }
    check(worst <= 1e-8, format!("max abs error {worst:.2e} over 225 points"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("removal soundness", removal_soundness),
        ("gap-beta reproduction", gap_beta_table),
        ("required-preference formula", required_preference_formula),
        ("structure-space counts", structure_counts),
        ("prune equivalence", prune_equivalence),
        ("tabulation invariants", tabulation_invariants),
        ("data-dependent reproduction", data_reproduction),
        ("determinism", determinism),
        ("beta_cdf accuracy", beta_accuracy),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Status::Fail("panicked".into()));
        let (tag, detail) = match outcome {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Status::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {} {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
