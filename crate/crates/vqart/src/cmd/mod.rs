//! The `vqart` command line.

mod experiment;
mod invert;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vqart_core::abx::PairBalance;
use vqart_core::features::Modality;
use vqart_core::inversion::{DiscrepancyLoss, RegressionConfig};
use vqart_core::neural::AdamConfig;
use vqart_core::vqvae::TrainConfig;
use vqart_core::RngSeed;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vqart", version, about = "VQ-VAE units from articulatory and acoustic streams, scored with ABX")]
pub struct Cli {
    /// Output root.
    #[arg(long, global = true, env = "VQART_OUT", default_value = "out")]
    pub out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Feature extraction.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// VQ-VAE training.
    #[command(subcommand)]
    Vqvae(VqvaeCmd),
    /// ABX evaluation of trained models.
    #[command(subcommand)]
    Abx(AbxCmd),
    /// Late fusion of articulatory and acoustic ABX distances.
    #[command(subcommand)]
    Fusion(FusionCmd),
    /// Acoustic-to-articulatory inversion through a frozen synthesizer.
    #[command(subcommand)]
    Invert(InvertCmd),
    /// Full repeated-split experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Summary tables from finished experiments.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCmd {
    /// Write mel and guided-PCA feature files for every utterance.
    Extract {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "features")]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum VqvaeCmd {
    /// Train one model on the training split of one repetition.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_parser = parse_modality)]
        modality: Modality,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "vqvae")]
        name: String,
        /// Inversion system manifest, needed for `articulatory-inferred`.
        #[arg(long)]
        inversion_system: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AbxCmd {
    /// Score one or more checkpoints on the same test-split triplets.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// VQ-VAE checkpoint; repeat to score several models on one design.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[command(flatten)]
        abx: AbxArgs,
        #[command(flatten)]
        split: EvalSplitArgs,
        #[arg(long, default_value = "abx")]
        name: String,
        #[arg(long)]
        inversion_system: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FusionCmd {
    /// Sweep ω in `ω·d_acoustic + d_articulatory` over a log grid.
    Sweep {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        articulatory: PathBuf,
        #[arg(long)]
        acoustic: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        omega_min: f64,
        #[arg(long, default_value_t = 10.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[command(flatten)]
        abx: AbxArgs,
        #[command(flatten)]
        split: EvalSplitArgs,
        #[arg(long, default_value = "fusion")]
        name: String,
        #[arg(long)]
        inversion_system: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum InvertCmd {
    /// Train the articulatory-to-mel synthesizer on a reference speaker and freeze it.
    Pretrain {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        regression: RegressionArgs,
        #[arg(long, default_value = "inversion")]
        name: String,
    },
    /// Train an inversion network on a new speaker's audio through a frozen synthesizer.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        synthesizer: PathBuf,
        #[command(flatten)]
        regression: RegressionArgs,
        #[arg(long, default_value = "inversion")]
        name: String,
    },
    /// Write inferred articulatory trajectories for every utterance of a speaker.
    Apply {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// System manifest written by `invert train`.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value = "inversion")]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Repeated splits, one model per modality, shared ABX design, late fusion.
    Run(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Print the summary of a finished experiment.
    Render {
        /// Experiment directory; defaults to `<out>/<name>`.
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long, default_value = "experiment")]
        name: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Speaker to use; may be left out when the manifest has one speaker.
    #[arg(long)]
    pub speaker: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Master seed; split and model seeds derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub repetition: usize,
}

#[derive(Debug, Args)]
pub struct EvalSplitArgs {
    /// Master seed the models were trained with; selects the test split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub repetition: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Balance {
    Ordered,
    Unordered,
}

impl From<Balance> for PairBalance {
    fn from(b: Balance) -> Self {
        match b {
            Balance::Ordered => PairBalance::Ordered,
            Balance::Unordered => PairBalance::Unordered,
        }
    }
}

#[derive(Debug, Args)]
pub struct AbxArgs {
    #[arg(long, default_value_t = 5000)]
    pub triplets: usize,
    /// Triplet sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Balance::Ordered)]
    pub balance: Balance,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// K
    #[arg(long, default_value_t = 64)]
    pub codebook_size: usize,
    /// D
    #[arg(long, default_value_t = 32)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub hidden_blocks: usize,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_sequences: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
}

impl ModelArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            codebook_size: self.codebook_size,
            embedding_dim: self.embedding_dim,
            hidden: self.hidden,
            hidden_blocks: self.hidden_blocks,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_sequences: self.batch_sequences,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Mse,
    SpectralConvergence,
}

#[derive(Debug, Args)]
pub struct RegressionArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub hidden_blocks: usize,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_sequences: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, value_enum, default_value_t = Loss::Mse)]
    pub loss: Loss,
}

impl RegressionArgs {
    pub fn config(&self) -> RegressionConfig {
        RegressionConfig {
            hidden: self.hidden,
            hidden_blocks: self.hidden_blocks,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_sequences: self.batch_sequences,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            loss: match self.loss {
                Loss::Mse => DiscrepancyLoss::Mse,
                Loss::SpectralConvergence => DiscrepancyLoss::SpectralConvergence,
            },
            seed: RngSeed(self.seed),
            ..RegressionConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "experiment")]
    pub name: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_modality, default_value = "articulatory,acoustic,fused")]
    pub modalities: Vec<Modality>,
    #[arg(long, default_value_t = 5000)]
    pub triplets: usize,
    #[arg(long, value_enum, default_value_t = Balance::Ordered)]
    pub balance: Balance,
    #[arg(long, default_value_t = 0.1)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Skip the late-fusion sweep.
    #[arg(long)]
    pub no_fusion: bool,
    /// Articulatory side of the late fusion.
    #[arg(long, value_parser = parse_modality, default_value = "articulatory")]
    pub fusion_articulatory: Modality,
    /// Adds the `articulatory-inferred` stream.
    #[arg(long)]
    pub inversion_system: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    s.parse().map_err(|e: vqart_core::Error| e.to_string())
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    match cli.command {
        Command::Features(FeaturesCmd::Extract { corpus, name }) => model::features_extract(&cli.out, &corpus, &name, &argv),
        Command::Vqvae(VqvaeCmd::Train {
            corpus,
            modality,
            split,
            model,
            name,
            inversion_system,
        }) => model::vqvae_train(&cli.out, &corpus, modality, &split, &model, &name, inversion_system.as_deref(), &argv),
        Command::Abx(AbxCmd::Eval {
            corpus,
            checkpoint,
            abx,
            split,
            name,
            inversion_system,
        }) => model::abx_eval(&cli.out, &corpus, &checkpoint, &abx, &split, &name, inversion_system.as_deref(), &argv),
        Command::Fusion(FusionCmd::Sweep {
            corpus,
            articulatory,
            acoustic,
            omega_min,
            omega_max,
            points,
            abx,
            split,
            name,
            inversion_system,
        }) => model::fusion_sweep_cmd(
            &cli.out,
            &corpus,
            [&articulatory, &acoustic],
            (omega_min, omega_max, points),
            &abx,
            &split,
            &name,
            inversion_system.as_deref(),
            &argv,
        ),
        Command::Invert(InvertCmd::Pretrain { corpus, regression, name }) => {
            invert::pretrain(&cli.out, &corpus, &regression, &name, &argv)
        }
        Command::Invert(InvertCmd::Train {
            corpus,
            synthesizer,
            regression,
            name,
        }) => invert::train(&cli.out, &corpus, &synthesizer, &regression, &name, &argv),
        Command::Invert(InvertCmd::Apply { corpus, system, name }) => invert::apply(&cli.out, &corpus, &system, &name, &argv),
        Command::Experiment(ExperimentCmd::Run(args)) => experiment::run(&cli.out, &args, &argv),
        Command::Report(ReportCmd::Render { experiment, name, format }) => {
            experiment::render(&experiment.unwrap_or_else(|| cli.out.join(&name)), format)
        }
    }
}

/// Parses the process arguments, runs the command and maps errors to exit
/// codes: 2 for usage problems, 1 for everything else.
pub fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
