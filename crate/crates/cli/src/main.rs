use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rcv_cli::{report_error, run, Command, InputFormat, RunConfig};
use rcv_core::ingest::{NormalizationPolicy, OvervoteRule, SkippedRankRule, WriteInRule};
use rcv_core::pipeline::AllowanceSetting;
use rcv_core::Error;

#[derive(Parser)]
#[command(name = "rcv", version, about = "Strategic analysis of ranked choice elections")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Round-by-round count.
    Tabulate(Common),
    /// Irrelevant-candidate removal and its certificate.
    Reduce(Common),
    /// Victory gaps, margin, bands, strategy classes, alignment and exhaustion.
    Analyze(Common),
    /// Exhaustion model comparison.
    Exhaustion(Common),
    /// Resampled-election robustness summary.
    Bootstrap(Common),
    /// Markdown table from an analysis.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Overvote {
    Truncate,
    Skip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Skips {
    Compress,
    TruncateAfterTwo,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    /// canonical, simple-csv, nyc-export, dominion-json or multnomah-cvr.
    #[arg(long, default_value = "canonical")]
    format: String,
    #[arg(long, default_value_t = 1)]
    seats: usize,
    /// Allowance in percent of ballots cast.
    #[arg(long, conflicts_with = "auto_allowance")]
    allowance: Option<f64>,
    /// Use the largest allowance that reduces the election to --target-relevant candidates.
    #[arg(long, requires = "target_relevant")]
    auto_allowance: bool,
    #[arg(long)]
    target_relevant: Option<usize>,
    #[arg(long)]
    max_rank: Option<usize>,
    /// Comma-separated roster order used to break ties (earliest first).
    #[arg(long, value_delimiter = ',')]
    tie_order: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "truncate")]
    overvote: Overvote,
    #[arg(long, value_enum, default_value = "compress")]
    skipped: Skips,
    /// Count write-ins for this pseudo-candidate instead of dropping them.
    #[arg(long)]
    write_in_as: Option<String>,
    #[arg(long, default_value_t = rcv_core::exhaustion_models::DEFAULT_ITERATIONS)]
    iterations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap sample count.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Draw this many resamples and analyze a seeded random subset of --samples of them.
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn build(command: Command, c: Common) -> Result<RunConfig, Error> {
    let allowance = match (c.auto_allowance, c.allowance) {
        (true, _) => AllowanceSetting::Auto {
            target_relevant: c.target_relevant.unwrap_or(rcv_core::search::RELEVANT_CAP),
            cap_percent: None,
        },
        (false, Some(percent)) => AllowanceSetting::Percent { percent },
        (false, None) => AllowanceSetting::Percent { percent: 10.0 },
    };
    let policy = NormalizationPolicy {
        overvote_rule: match c.overvote {
            Overvote::Truncate => OvervoteRule::TruncateAtOvervote,
            Overvote::Skip => OvervoteRule::SkipPosition,
        },
        skipped_rank_rule: match c.skipped {
            Skips::Compress => SkippedRankRule::Compress,
            Skips::TruncateAfterTwo => SkippedRankRule::TruncateAfterTwoSkips,
        },
        write_in: c.write_in_as.map(WriteInRule::Candidate).unwrap_or_default(),
        ..NormalizationPolicy::default()
    };
    Ok(RunConfig {
        format: c.format.parse::<InputFormat>()?,
        seats: c.seats,
        allowance,
        max_rank: c.max_rank,
        tie_order: c.tie_order,
        policy,
        iterations: c.iterations,
        seed: c.seed,
        samples: c.samples,
        pool: c.pool,
        workers: c.workers,
        ..RunConfig::new(command, c.input, c.out)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        Sub::Tabulate(c) => build(Command::Tabulate, c),
        Sub::Reduce(c) => build(Command::Reduce, c),
        Sub::Analyze(c) => build(Command::Analyze, c),
        Sub::Exhaustion(c) => build(Command::Exhaustion, c),
        Sub::Bootstrap(c) => build(Command::Bootstrap, c),
        Sub::Report { input, out } => Ok(RunConfig::new(Command::Report, input, out)),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", report_error(None, &e));
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", report_error(Some(&config), &e));
            ExitCode::FAILURE
        }
    }
}
