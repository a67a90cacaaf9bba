//! Full analysis of one election: tabulation, reduction, victory gaps and
//! every derived attribute.

use serde::{Deserialize, Serialize};

use crate::allocation::{Activation, Constraints, Strategy};
use crate::error::{Error, Result};
use crate::exhaustion_models::{compare_models, CompletionEvidence, ModelInputs, ModelRow, DEFAULT_ITERATIONS};
use crate::instance::{ElectionInstance, ElectionSummary};
use crate::metrics::{
    activation_viable, band, best_bullet_cost, exhaustion_at_elimination, margin_of_victory, preference_alignment,
    required_preference, Alignment, Band, Margin, StrategyClass,
};
use crate::reduction::{
    default_cap_hundredths, remove_irrelevant, traceability_threshold, Allowance, RemovalStep, Threshold,
};
use crate::search::{victory_gaps, SearchOptions, SearchStats, RELEVANT_CAP};
use crate::tabulation::{tabulate, TabulationResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AllowanceSetting {
    Percent {
        percent: f64,
    },
    /// Largest allowance that reduces the election to `target_relevant`
    /// candidates, searched up to `cap_percent`.
    Auto {
        target_relevant: usize,
        cap_percent: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub allowance: AllowanceSetting,
    pub constraints: Constraints,
    /// Ballot length limit of the jurisdiction, used by the exhaustion models.
    pub max_rank: Option<usize>,
    pub iterations: u64,
    pub seed: u64,
    pub models: bool,
    pub relevant_cap: usize,
}

impl AnalysisConfig {
    pub fn with_percent(percent: f64) -> Self {
        AnalysisConfig {
            allowance: AllowanceSetting::Percent { percent },
            constraints: Constraints::default(),
            max_rank: None,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            models: true,
            relevant_cap: RELEVANT_CAP,
        }
    }

    pub fn auto(target_relevant: usize) -> Self {
        AnalysisConfig {
            allowance: AllowanceSetting::Auto { target_relevant, cap_percent: None },
            ..AnalysisConfig::with_percent(0.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedBallot {
    pub ranking: Vec<String>,
    pub count: u64,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub ballots: Vec<NamedBallot>,
    pub total: u64,
    pub percent: f64,
    pub winners: Vec<String>,
    pub realized_order: Vec<String>,
    pub activation: Vec<Activation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub candidate: usize,
    pub name: String,
    pub winner: bool,
    /// Survived reduction and was searched.
    pub relevant: bool,
    pub gap_ballots: Option<u64>,
    pub gap_percent: Option<f64>,
    pub band: Band,
    pub class: Option<StrategyClass>,
    /// Cheapest decisive bullet-only strategy within the allowance.
    pub bullet_ballots: Option<u64>,
    pub strategy: Option<StrategySummary>,
    pub exhaust_percent: Option<f64>,
    pub required_preference: Option<f64>,
    pub viable: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionSummary {
    pub members: Vec<String>,
    pub ballots: u64,
    pub percent: f64,
    pub strategy: StrategySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub relevant: Vec<String>,
    pub removed: Vec<String>,
    pub early_winners: Vec<String>,
    pub certificate: Vec<RemovalStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub summary: ElectionSummary,
    pub candidates: Vec<String>,
    pub allowance: Allowance,
    pub threshold: Option<Threshold>,
    pub winners: Vec<String>,
    pub social_order: Vec<String>,
    pub sequence: String,
    pub reduction: ReductionSummary,
    pub rows: Vec<CandidateRow>,
    pub coalitions: Vec<CoalitionSummary>,
    pub margin: Margin,
    pub alignment: Alignment,
    pub models: Vec<ModelRow>,
    /// Node counts depend on thread timing, so they stay out of the JSON.
    #[serde(skip)]
    pub stats: SearchStats,
}

impl AnalysisReport {
    pub fn row(&self, name: &str) -> Option<&CandidateRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Everything `analyze` computes, including the actual tabulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub tabulation: TabulationResult,
}

fn names(instance: &ElectionInstance, ids: &[usize]) -> Vec<String> {
    ids.iter().map(|&c| instance.name(c).to_string()).collect()
}

fn summarize_strategy(instance: &ElectionInstance, relevant: &[usize], strategy: &Strategy) -> StrategySummary {
    let total = instance.total_ballots().max(1) as f64;
    let to_original = |ids: &[usize]| -> Vec<usize> { ids.iter().map(|&c| relevant[c]).collect() };
    StrategySummary {
        ballots: strategy
            .additions
            .iter()
            .map(|a| NamedBallot {
                ranking: names(instance, &to_original(&a.ranking)),
                count: a.count,
                percent: 100.0 * a.count as f64 / total,
            })
            .collect(),
        total: strategy.total,
        percent: strategy.total_percent,
        winners: names(instance, &to_original(&strategy.winners)),
        realized_order: names(instance, &to_original(&strategy.realized.order)),
        activation: strategy.activation.clone(),
    }
}

/// Resolves the allowance, returning the threshold when searched.
pub fn resolve_allowance(
    instance: &ElectionInstance,
    setting: &AllowanceSetting,
) -> Result<(Allowance, Option<Threshold>)> {
    let total = instance.total_ballots();
    match setting {
        AllowanceSetting::Percent { percent } => {
            if !(0.0..=100.0).contains(percent) {
                return Err(Error::Domain(format!("allowance {percent}% outside 0..100")));
            }
            Ok((Allowance::from_percent(*percent, total), None))
        }
        AllowanceSetting::Auto { target_relevant, cap_percent } => {
            let cap = cap_percent
                .map(crate::reduction::percent_to_hundredths)
                .unwrap_or_else(|| default_cap_hundredths(instance.seats()));
            let threshold = traceability_threshold(instance, *target_relevant, cap).ok_or_else(|| {
                Error::SearchTooLarge { relevant: instance.candidate_count(), cap: *target_relevant, threshold: None }
            })?;
            Ok((Allowance::from_hundredths(threshold.hundredths, total), Some(threshold)))
        }
    }
}

/// Runs the complete analysis.
pub fn analyze(instance: &ElectionInstance, config: &AnalysisConfig) -> Result<Analysis> {
    if instance.total_ballots() == 0 {
        return Err(Error::EmptyElection);
    }
    let actual = tabulate(instance)?;
    let (allowance, threshold) = resolve_allowance(instance, &config.allowance)?;
    let reduction = remove_irrelevant(instance, allowance.ballots);
    let relevant = reduction.relevant.clone();
    if relevant.len() > config.relevant_cap {
        let cap = default_cap_hundredths(instance.seats());
        let limit = traceability_threshold(instance, config.relevant_cap, cap).map(|t| t.percent);
        return Err(Error::SearchTooLarge { relevant: relevant.len(), cap: config.relevant_cap, threshold: limit });
    }

    let options = SearchOptions {
        budget: allowance.ballots,
        constraints: config.constraints,
        prune: true,
        relevant_cap: config.relevant_cap,
    };
    let reduced = &reduction.reduced;
    let table = victory_gaps(reduced, &options)?;
    let total = instance.total_ballots();
    let m = instance.candidate_count();
    let offset = reduction.removed.len();
    let seats = instance.seats();

    let mut rows = Vec::with_capacity(m);
    for c in 0..m {
        let winner = actual.winners.contains(&c);
        let local = relevant.iter().position(|&r| r == c);
        let gap_row = local.and_then(|l| table.row(l));
        let strategy = gap_row.and_then(|r| r.strategy.as_ref());
        let gap_ballots = if winner { Some(0) } else { gap_row.and_then(|r| r.ballots) };
        let gap_percent = if winner { Some(0.0) } else { gap_row.and_then(|r| r.percent) };
        let (class, bullet_ballots) = match (winner, local, strategy) {
            (false, Some(l), Some(s)) => {
                let bullet = best_bullet_cost(reduced, l, s.total, allowance.ballots);
                let class = if bullet == Some(s.total) { StrategyClass::Selfish } else { StrategyClass::NonSelfish };
                (Some(class), bullet)
            }
            _ => (None, None),
        };
        let exhaust_percent = (!winner).then(|| exhaustion_at_elimination(&actual, c, total)).flatten();
        let viable = match (winner, strategy) {
            (false, Some(s)) => Some(activation_viable(&s.activation, &actual, offset)),
            _ => None,
        };
        let required = match (gap_percent, exhaust_percent) {
            (Some(g), Some(e)) if !winner => required_preference(g, e),
            _ => None,
        };
        rows.push(CandidateRow {
            candidate: c,
            name: instance.name(c).to_string(),
            winner,
            relevant: local.is_some(),
            gap_ballots,
            gap_percent,
            band: band(gap_percent, seats),
            class,
            bullet_ballots,
            strategy: strategy.filter(|_| !winner).map(|s| summarize_strategy(instance, &relevant, s)),
            exhaust_percent,
            required_preference: required,
            viable,
        });
    }

    let coalitions = table
        .coalitions
        .iter()
        .map(|row| {
            let members: Vec<usize> = row.members.iter().map(|&c| relevant[c]).collect();
            CoalitionSummary {
                members: names(instance, &members),
                ballots: row.ballots,
                percent: row.percent,
                strategy: summarize_strategy(instance, &relevant, &row.strategy),
            }
        })
        .collect();

    let gaps: Vec<(usize, Option<f64>)> = rows.iter().map(|r| (r.candidate, r.gap_percent)).collect();
    let margin = margin_of_victory(&gaps, &actual.winners, allowance.percent);
    let alignment = preference_alignment(&actual.structure.order, &gaps, allowance.percent, seats);

    let models = if config.models { model_rows(instance, &actual, &rows, config)? } else { Vec::new() };

    let report = AnalysisReport {
        summary: instance.summary(),
        candidates: instance.candidates().to_vec(),
        allowance,
        threshold,
        winners: names(instance, &actual.winners),
        social_order: names(instance, &actual.structure.order),
        sequence: actual.structure.sequence.iter().map(|o| o.to_string()).collect(),
        reduction: ReductionSummary {
            relevant: names(instance, &reduction.relevant),
            removed: names(instance, &reduction.removed),
            early_winners: names(instance, &reduction.early_winners),
            certificate: reduction.certificate.clone(),
        },
        rows,
        coalitions,
        margin,
        alignment,
        models,
        stats: table.stats,
    };
    Ok(Analysis { report, tabulation: actual })
}

/// Model comparison for every trailing candidate whose exhausted pool
/// exceeds its gap.
fn model_rows(
    instance: &ElectionInstance,
    actual: &TabulationResult,
    rows: &[CandidateRow],
    config: &AnalysisConfig,
) -> Result<Vec<ModelRow>> {
    let mut out = Vec::new();
    for row in rows {
        let (Some(g), Some(e), Some(strategy)) = (row.gap_percent, row.exhaust_percent, row.strategy.as_ref()) else {
            continue;
        };
        if row.winner || e <= g {
            continue;
        }
        let c = row.candidate;
        let Some(round) = actual.decision_round(c) else { continue };
        let active = actual.rounds[round - 1].active.clone();
        let opponents: Vec<usize> = if instance.seats() == 1 {
            actual.winners.clone()
        } else {
            active.iter().copied().filter(|&x| x != c).collect()
        };
        let evidence = CompletionEvidence::collect(instance, c, &opponents, &active, config.max_rank);
        let inputs = ModelInputs {
            candidate: c,
            name: row.name.clone(),
            exhaust_percent: e,
            gap_percent: g,
            gap_votes: strategy.total,
            evidence,
        };
        out.push(compare_models(&inputs, config.iterations, config.seed.wrapping_add(c as u64))?);
    }
    Ok(out)
}

fn fmt_percent(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "-".into())
}

/// Markdown table of the report: candidate, ID, victory gap, band, required
/// strategy and exhaustion.
pub fn render_markdown(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Ballots: {}  Seats: {}  Quota: {}  Allowance: {:.2}% ({} ballots)\n\n",
        report.summary.total_ballots,
        report.summary.seats,
        report.summary.quota,
        report.allowance.percent,
        report.allowance.ballots
    ));
    out.push_str("| Candidate | ID | Victory Gap | Band | Required Strategy | Exhaustion |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    let mut order: Vec<&CandidateRow> = report.rows.iter().collect();
    order.sort_by(|a, b| {
        let key = |r: &CandidateRow| r.gap_percent.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(a.candidate.cmp(&b.candidate))
    });
    let ids = ids_for(report.rows.len());
    for row in order {
        let gap = match row.gap_percent {
            Some(g) => format!("{g:.2}%"),
            None => format!("> {:.2}%", report.allowance.percent),
        };
        let strategy = match (&row.strategy, row.winner) {
            (_, true) => "-".to_string(),
            (Some(s), false) => s
                .ballots
                .iter()
                .map(|b| format!("{} {:.2}%", b.ranking.join(">"), b.percent))
                .collect::<Vec<_>>()
                .join(", "),
            (None, false) => "-".to_string(),
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row.name,
            ids[row.candidate],
            gap,
            row.band.label(),
            strategy,
            fmt_percent(row.exhaust_percent)
        ));
    }
    out.push('\n');
    match &report.margin {
        Margin::Exact { percent, candidate } => {
            out.push_str(&format!("Margin of victory: {percent:.2}% ({})\n", report.rows[*candidate].name))
        }
        Margin::UpperBound { percent } => out.push_str(&format!("Margin of victory: > {percent:.2}%\n")),
        Margin::Undefined => out.push_str("Margin of victory: undefined\n"),
    }
    out.push_str(&format!("Preference order alignment: {:?}\n", report.alignment.verdict));
    if !report.coalitions.is_empty() {
        out.push_str("\n| Coalition | Victory Gap |\n|---|---|\n");
        for c in &report.coalitions {
            out.push_str(&format!("| {} | {:.2}% |\n", c.members.join(", "), c.percent));
        }
    }
    out
}

/// Letter identifiers in roster order: A..Z, then AA, AB, ...
fn ids_for(n: usize) -> Vec<String> {
    (0..n)
        .map(|mut i| {
            let mut s = Vec::new();
            loop {
                s.push(b'A' + (i % 26) as u8);
                if i < 26 {
                    break;
                }
                i = i / 26 - 1;
            }
            s.reverse();
            String::from_utf8(s).unwrap_or_default()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Verdict;

    fn e1() -> ElectionInstance {
        ElectionInstance::from_named(&["A", "B", "C"], &[(&["A"], 4), (&["B"], 3), (&["C", "B"], 2)], 1).unwrap()
    }

    #[test]
    fn e1_full_analysis() {
        let mut config = AnalysisConfig::with_percent(40.0);
        config.iterations = 200;
        let a = analyze(&e1(), &config).unwrap();
        let r = &a.report;
        assert_eq!(r.winners, vec!["B"]);
        assert_eq!(r.row("B").unwrap().gap_ballots, Some(0));
        assert_eq!(r.row("A").unwrap().gap_ballots, Some(2));
        assert_eq!(r.row("A").unwrap().class, Some(StrategyClass::Selfish));
        assert!(matches!(r.margin, Margin::Exact { candidate: 0, .. }));
        assert_eq!(r.alignment.verdict, Verdict::Match);
        assert!(render_markdown(r).contains("| A | A | 22.22% |"));
    }

    #[test]
    fn ids_wrap() {
        let ids = ids_for(28);
        assert_eq!(ids[25], "Z");
        assert_eq!(ids[26], "AA");
        assert_eq!(ids[27], "AB");
    }

    #[test]
    fn rejects_bad_allowance() {
        assert!(analyze(&e1(), &AnalysisConfig::with_percent(150.0)).is_err());
    }
}
