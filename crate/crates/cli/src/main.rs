//! `personasim` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ProviderKind;
use personasim::analytics::{ClusterSpace, CvBasis};

/// Persona simulation and Big Five evaluation pipeline.
///
/// Exit codes: 0 success, 2 usage, 3 config, 4 data, 5 provider,
/// 6 validation, 130 interrupted.
#[derive(Debug, Parser)]
#[command(name = "personasim", version)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store file, overrides `paths.store`.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw persona skeletons from census microdata.
    Sample(SampleArgs),
    /// Turn skeletons into persona profiles, or derive poor-detail variants.
    Forge(ForgeArgs),
    /// Load externally authored personas.
    IngestLiterary(IngestArgs),
    /// Administer the questionnaire to personas.
    Assess(AssessArgs),
    /// Administer the questionnaire with no persona.
    BaselineLlm(BaselineArgs),
    /// Stability and convergence per persona.
    EvalStability(EvalStabilityArgs),
    /// Pairwise ring and grouped identifiability.
    EvalIdentify(EvalIdentifyArgs),
    /// Age curves against the human baseline.
    EvalPopulation(EvalPopulationArgs),
    /// Dump store tables.
    Export(ExportArgs),
    /// List runs in the store.
    Runs,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Provider, overrides the config file.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Number of skeletons.
    #[arg(long)]
    pub n: usize,
    /// Filter such as `gender=Female,age=20..40`.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Census file, overrides `paths.census`.
    #[arg(long)]
    pub census: Option<PathBuf>,
    /// Maximum age perturbation in years.
    #[arg(long, default_value_t = 2)]
    pub age_jitter: u32,
    /// Run id [default: sample-<seed>-<n>].
    #[arg(long)]
    pub run: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ForgeStrategy {
    Standard,
    Narrative,
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    /// Skeleton run to enrich.
    #[arg(long, required_unless_present = "poor_from", conflicts_with = "poor_from")]
    pub from: Option<String>,
    #[arg(long, value_enum, default_value_t = ForgeStrategy::Standard)]
    pub strategy: ForgeStrategy,
    /// Persona run to simplify into poor-detail variants.
    #[arg(long)]
    pub poor_from: Option<String>,
    /// Fields kept by poor variants.
    #[arg(long, default_value = "age,gender,race,country,occupation")]
    pub poor_fields: String,
    /// Minimum narrative length in words.
    #[arg(long, default_value_t = personasim::domain::NARRATIVE_MIN_WORDS)]
    pub min_words: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run id [default: forge-<strategy>-<from> or poor-<from>].
    #[arg(long)]
    pub run: Option<String>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON, JSON-lines or CSV file.
    #[arg(long)]
    pub file: PathBuf,
    /// Run id [default: literary].
    #[arg(long)]
    pub run: Option<String>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Persona run to assess.
    #[arg(long)]
    pub personas: String,
    /// Restrict to these persona ids.
    #[arg(long = "persona")]
    pub persona_ids: Vec<String>,
    /// Assessments per persona.
    #[arg(long, default_value_t = 1)]
    pub repeat: u32,
    /// Append the anti-alignment instruction.
    #[arg(long)]
    pub antialign: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run id [default: assess-<personas>-r<repeat>-s<seed>].
    #[arg(long)]
    pub run: Option<String>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, default_value_t = 300)]
    pub repeat: u32,
    #[arg(long)]
    pub antialign: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run id [default: baseline-r<repeat>-s<seed>].
    #[arg(long)]
    pub run: Option<String>,
    /// Report directory [default: <paths.out>/<run>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Report directory [default: <paths.out>/<run>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CvBasisArg {
    Distances,
    TraitScores,
}

impl From<CvBasisArg> for CvBasis {
    fn from(v: CvBasisArg) -> CvBasis {
        match v {
            CvBasisArg::Distances => CvBasis::Distances,
            CvBasisArg::TraitScores => CvBasis::TraitScores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SpaceArg {
    Standardized,
    Raw,
}

impl From<SpaceArg> for ClusterSpace {
    fn from(v: SpaceArg) -> ClusterSpace {
        match v {
            SpaceArg::Standardized => ClusterSpace::Standardized,
            SpaceArg::Raw => ClusterSpace::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalStabilityArgs {
    #[arg(long)]
    pub run: String,
    #[arg(long, value_enum, default_value_t = CvBasisArg::Distances)]
    pub cv_basis: CvBasisArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalIdentifyArgs {
    #[arg(long)]
    pub run: String,
    /// Persona ids in ring order [default: all, by id].
    #[arg(long, value_delimiter = ',')]
    pub personas: Vec<String>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Standardized)]
    pub space: SpaceArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalPopulationArgs {
    /// Assessment run to compare.
    #[arg(long, required_unless_present = "compare")]
    pub run: Option<String>,
    /// Label for `--run` [default: the run id].
    #[arg(long)]
    pub label: Option<String>,
    /// Several runs as `label=run`, compared in the order given.
    #[arg(long, value_delimiter = ',', conflicts_with = "run")]
    pub compare: Vec<String>,
    /// Baseline CSV, overrides `paths.baseline`.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Tables to export [default: all].
    #[arg(long, value_delimiter = ',')]
    pub tables: Vec<String>,
    #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
    pub format: ExportFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
