//! `lungrad` command-line pipeline.
//!
//! Every stage reads a cohort manifest and writes deterministic outputs
//! (sorted by case id, no timestamps or absolute paths) into `--out`.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lungrad_core::config::{load_config, RunConfig};
use lungrad_core::learn::TTestMode;
use lungrad_core::synth::TextureMode;

#[derive(Debug, Parser)]
#[command(name = "lungrad", version, about = "Lung lesion segmentation post-processing, radiomics and survival modelling")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the config file).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom cohort.
    Phantom(PhantomArgs),
    /// Average model probability maps per case.
    Ensemble(EnsembleArgs),
    /// Binarize, label connected components and write ranked candidates.
    Postprocess(ManifestArgs),
    /// Score the largest predicted component against the reference.
    Evaluate(EvaluateArgs),
    /// Simulate reviewer selection over ranked components.
    Review(ManifestArgs),
    /// Extract the radiomic feature table.
    Features(FeaturesArgs),
    /// Survival classification: cross-validation, search or comparison.
    Survive(SurviveArgs),
    /// Merge JSON reports into one document.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Number of cases.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    /// TOML file with phantom settings.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub volume_min: Option<f64>,
    #[arg(long)]
    pub volume_max: Option<f64>,
    /// Fraction of cases built with DICE below the review threshold.
    #[arg(long)]
    pub fraction_below: Option<f64>,
    #[arg(long, value_enum)]
    pub texture: Option<TextureArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TextureArg {
    Uniform,
    Noisy,
    Shelled,
}

impl From<TextureArg> for TextureMode {
    fn from(t: TextureArg) -> Self {
        match t {
            TextureArg::Uniform => TextureMode::Uniform,
            TextureArg::Noisy => TextureMode::Noisy,
            TextureArg::Shelled => TextureMode::Shelled,
        }
    }
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Cohort manifest; writes one averaged map per case.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub manifest: Option<PathBuf>,
    /// Probability maps to average (single-case mode).
    #[arg(long, num_args = 1.., requires = "output")]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report path (default `<out>/evaluation.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum MaskSource {
    /// Reference contours.
    #[default]
    Ref,
    /// Largest component of the binarized ensemble.
    Auto,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = MaskSource::Ref)]
    pub mask: MaskSource,
    /// Output CSV (default `<out>/features.csv`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum SurviveMode {
    #[default]
    Cv,
    Search,
    Compare,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TTestArg {
    Welch,
    Paired,
}

impl From<TTestArg> for TTestMode {
    fn from(t: TTestArg) -> Self {
        match t {
            TTestArg::Welch => TTestMode::Welch,
            TTestArg::Paired => TTestMode::Paired,
        }
    }
}

#[derive(Debug, Args)]
pub struct SurviveArgs {
    /// Manifest providing survival months per case.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature CSVs. Joined column-wise for `cv` and `search`; one group each
    /// for `compare`.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Group names for `compare` (default: file stems).
    #[arg(long, num_args = 1..)]
    pub names: Vec<String>,
    #[arg(long, value_enum, default_value_t = SurviveMode::Cv)]
    pub mode: SurviveMode,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub ttest: Option<TTestArg>,
    /// Override the number of trees.
    #[arg(long)]
    pub n_trees: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Merged report (default `<out>/report.json`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Settings shared by all subcommands after merging flags over the config.
pub struct Context {
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub out: PathBuf,
}

/// Parse `argv` (including the program name), run, and return the exit code:
/// 0 on success, 1 on runtime or data errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> lungrad_core::Result<()> {
    let mut config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        config.out = Some(o.clone());
    }
    config.validate()?;
    // The hash covers settings that shape results, not where they are written
    // or how many threads computed them.
    let mut hashed = config.clone();
    hashed.out = None;
    hashed.threads = None;
    let ctx = Context {
        config_hash: hashed.hash(),
        seed: config.seed,
        out: config.out.clone().unwrap_or_else(|| PathBuf::from("lungrad_out")),
        config,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = ctx.config.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| lungrad_core::Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, &ctx))
}
