use std::path::Path;

use vqart_core::experiment::{ExperimentConfig, FusionConfig};
use vqart_core::features::MelConfig;
use vqart_core::RngSeed;

use super::model::fmt_opt;
use super::{ExperimentArgs, ReportFormat};
use crate::error::{Error, Result};
use crate::io::manifest::LoadedManifest;
use crate::io::report::render_markdown;
use crate::pipeline::{read_experiment, run_experiment_to_disk, RunOptions};

pub(super) fn config(args: &ExperimentArgs) -> ExperimentConfig {
    ExperimentConfig {
        name: args.name.clone(),
        seed: RngSeed(args.seed),
        repetitions: args.repetitions,
        modalities: args.modalities.clone(),
        vqvae: args.model.train_config(),
        triplets: args.triplets,
        balance: args.balance.into(),
        fusion: (!args.no_fusion).then(|| FusionConfig {
            articulatory: args.fusion_articulatory,
            omega_min: args.omega_min,
            omega_max: args.omega_max,
            points: args.points,
            ..FusionConfig::default()
        }),
        ..ExperimentConfig::default()
    }
}

pub(super) fn run(out: &Path, args: &ExperimentArgs, argv: &[String]) -> Result<()> {
    let manifest = LoadedManifest::load(&args.manifest)?;
    let cfg = config(args);
    cfg.validate()?;
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let results = run_experiment_to_disk(
        &manifest,
        &cfg,
        &RunOptions {
            out_root: out.to_path_buf(),
            mel: MelConfig::default(),
            inversion: args.inversion_system.clone(),
            command: argv.to_vec(),
        },
    )?;
    for r in &results {
        for row in &r.summary.rows {
            println!(
                "{} {}: overall {:.4} manner {} place {} over {} repetition(s)",
                r.speaker,
                row.modality,
                row.overall,
                fmt_opt(row.manner),
                fmt_opt(row.place),
                row.repetitions
            );
        }
        for rep in &r.repetitions {
            if let Some(e) = &rep.error {
                eprintln!("{} repetition {} failed: {e}", r.speaker, rep.repetition);
            }
        }
    }
    if results.iter().all(|r| r.summary.rows.is_empty()) {
        return Err(Error::Usage("every repetition failed".into()));
    }
    Ok(())
}

pub(super) fn render(dir: &Path, format: ReportFormat) -> Result<()> {
    let results = read_experiment(dir)?;
    match format {
        ReportFormat::Markdown => print!("{}", render_markdown(&results)),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["speaker", "modality", "repetitions", "overall", "manner_score", "place_score"])
                .map_err(|e| Error::format(dir, e.to_string()))?;
            for r in &results {
                for row in &r.summary.rows {
                    w.write_record([
                        r.speaker.clone(),
                        row.modality.to_string(),
                        row.repetitions.to_string(),
                        row.overall.to_string(),
                        row.manner.map(|v| v.to_string()).unwrap_or_default(),
                        row.place.map(|v| v.to_string()).unwrap_or_default(),
                    ])
                    .map_err(|e| Error::format(dir, e.to_string()))?;
                }
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}
