//! `divswap` command-line tool.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use divswap::{OverlapMode, Preset, SigmaDistribution};

#[derive(Debug, Parser)]
#[command(name = "divswap", version, about = "Diversified patch-based style swapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Swap content patches for style patches and write N diverse outputs.
    Run(RunArgs),
    /// Mean pairwise feature distance over a grid of sigma ranges (CSV).
    Sweep(SweepArgs),
    /// Pairwise diversity statistics over a set of PNGs or feature maps.
    Metrics(MetricsArgs),
    /// Render the per-location activation magnitude of a map as a PNG.
    Heatmap(HeatmapArgs),
    /// Dump the per-patch assignments of a single swap as CSV.
    MatchTable(MatchTableArgs),
}

#[derive(Debug, Args)]
struct PatchArgs {
    #[arg(long, default_value_t = 3)]
    patch_size: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Defaults to $DIVSWAP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = OverlapArg::Average)]
    overlap: OverlapArg,
}

#[derive(Debug, Args)]
struct SigmaArgs {
    /// Upper end of the deviation range (0, sigma_max].
    #[arg(long, conflicts_with = "preset")]
    sigma_max: Option<f64>,
    /// Defaults to uniform when a range is given, none otherwise.
    #[arg(long, value_enum)]
    dist: Option<DistArg>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
}

#[derive(Debug, Args)]
struct RunArgs {
    content: PathBuf,
    style: PathBuf,
    #[command(flatten)]
    patch: PatchArgs,
    #[command(flatten)]
    sigma: SigmaArgs,
    #[arg(long, default_value_t = 1)]
    num: usize,
    /// A directory, or a `.dsfm` path whose stem prefixes the numbered outputs.
    #[arg(long)]
    out: PathBuf,
    /// Also write a flip-audit JSON next to each output.
    #[arg(long)]
    audit: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    content: PathBuf,
    style: PathBuf,
    #[command(flatten)]
    patch: PatchArgs,
    /// Strictly increasing positive sigma_max values.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = DistArg::Uniform)]
    dist: DistArg,
    #[arg(long, default_value_t = 20)]
    num: usize,
    /// CSV file, or a directory to hold `sweep.csv`. Stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Files, or a single directory to scan.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Inferred from the file extensions when omitted.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Print a single-line JSON object instead of the text table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    input: PathBuf,
    /// Output size as WxH; defaults to the map's spatial size.
    #[arg(long)]
    size: Option<String>,
    output: PathBuf,
}

#[derive(Debug, Args)]
struct MatchTableArgs {
    content: PathBuf,
    style: PathBuf,
    #[command(flatten)]
    patch: PatchArgs,
    #[command(flatten)]
    sigma: SigmaArgs,
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Normal,
    None,
}

impl From<DistArg> for SigmaDistribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Uniform => SigmaDistribution::Uniform,
            DistArg::Normal => SigmaDistribution::Normal,
            DistArg::None => SigmaDistribution::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Cnnmrf,
    StyleSwap,
    AvatarNet,
    Wct,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Cnnmrf => Preset::Cnnmrf,
            PresetArg::StyleSwap => Preset::StyleSwap,
            PresetArg::AvatarNet => Preset::AvatarNet,
            PresetArg::Wct => Preset::Wct,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OverlapArg {
    Average,
    Sum,
}

impl From<OverlapArg> for OverlapMode {
    fn from(o: OverlapArg) -> Self {
        match o {
            OverlapArg::Average => OverlapMode::Average,
            OverlapArg::Sum => OverlapMode::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Pixel,
    Feature,
}

fn main() -> ExitCode {
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
        Command::Run(args) => commands::run(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::Heatmap(args) => commands::heatmap(args),
        Command::MatchTable(args) => commands::match_table(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("divswap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
