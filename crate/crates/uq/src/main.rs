use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uq::cache::CacheMode;
use uq::harness::{
    emit_report, load_dataset, load_results, run, save_summary, Overrides, ReportFormat, RunConfig, RunOutput,
};
use uq::pipeline::Mode;

/// Confidence scoring for LLM responses.
///
/// Exit status: 0 on success, 1 on a fatal configuration or capability
/// error, 2 when the run completed but some items failed.
#[derive(Parser)]
#[command(name = "uq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a dataset in blackbox, whitebox, panel or ensemble mode.
    Score(ScoreArgs),
    /// Fit ensemble weights against the ideal responses of a dataset.
    Tune(TuneArgs),
    /// Convert a JSONL result file to another format.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_cache_mode)]
    cache_mode: Option<CacheMode>,
    #[arg(long)]
    num_responses: Option<u32>,
    #[arg(long)]
    use_best: Option<bool>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Write the run summary as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Weights file for ensemble mode.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Also write the per-prompt results under the tuned weights.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: uq::Error| e.to_string())
}

fn parse_cache_mode(s: &str) -> Result<CacheMode, String> {
    s.parse().map_err(|e: uq::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: uq::Error| e.to_string())
}

fn load_config(args: &RunArgs, mode: Option<Mode>, weights: Option<PathBuf>) -> uq::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply(&Overrides {
        mode,
        seed: args.seed,
        cache_mode: args.cache_mode,
        num_responses: args.num_responses,
        use_best: args.use_best,
        max_in_flight: args.max_in_flight,
        weights,
    });
    Ok(config)
}

fn required<'a>(flag: Option<&'a Path>, configured: Option<&'a Path>, what: &str) -> uq::Result<&'a Path> {
    flag.or(configured)
        .ok_or_else(|| uq::Error::config(format!("no {what} path given on the command line or in the config")))
}

fn finish(output: &RunOutput, summary: Option<&Path>) -> uq::Result<ExitCode> {
    if let Some(path) = summary {
        save_summary(&output.summary, path)?;
    }
    let s = &output.summary;
    log::info!(
        "{} records, {} errors, {} provider calls",
        s.records,
        s.error_count,
        s.provider_calls.total()
    );
    Ok(if s.error_count > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn score(args: ScoreArgs) -> uq::Result<ExitCode> {
    let config = load_config(&args.run, args.mode, args.weights)?;
    if config.mode == Mode::Tune {
        return Err(uq::Error::config("tune mode runs through `uq tune`"));
    }
    let out = required(args.out.as_deref(), config.output.results.as_deref(), "output")?.to_path_buf();
    let dataset = load_dataset(&args.run.dataset)?;
    let output = run(&config, &dataset)?;
    emit_report(&output.results, ReportFormat::Jsonl, &out)?;
    let summary = args.run.summary.as_deref().or(config.output.summary.as_deref());
    finish(&output, summary)
}

fn tune(args: TuneArgs) -> uq::Result<ExitCode> {
    let config = load_config(&args.run, Some(Mode::Tune), None)?;
    let weights_out = required(args.weights_out.as_deref(), config.output.weights.as_deref(), "weights")?;
    let dataset = load_dataset(&args.run.dataset)?;
    let output = run(&config, &dataset)?;
    output
        .weights
        .as_ref()
        .expect("tune mode produces weights")
        .save(weights_out)?;
    if let Some(out) = args.out.as_deref().or(config.output.results.as_deref()) {
        emit_report(&output.results, ReportFormat::Jsonl, out)?;
    }
    let summary = args.run.summary.as_deref().or(config.output.summary.as_deref());
    finish(&output, summary)
}

fn report(args: ReportArgs) -> uq::Result<ExitCode> {
    let results = load_results(&args.input)?;
    emit_report(&results, args.format, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors exit with 1, since 2 means item failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Score(a) => score(a),
        Command::Tune(a) => tune(a),
        Command::Report(a) => report(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("uq: {e}");
        ExitCode::from(1)
    })
}
