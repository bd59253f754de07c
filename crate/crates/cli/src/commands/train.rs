//! `train`: fit a model on a manifest's train split and write a checkpoint
//! plus the loss curve CSV.

use crate::config::Config;
use recon_core::datagen::{load_scene, read_manifest, to_train_scene};
use recon_core::metrics::{variant_readings, Variant};
use recon_core::neural::{load_checkpoint, save_checkpoint, train, ReconModel, TrainScene};
use recon_core::{Error, Result};
use std::io::Write;
use std::path::Path;

#[allow(clippy::too_many_arguments)]
pub fn run(
    cfg: &Config,
    manifest: &Path,
    out: &Path,
    variant: &str,
    steps_override: Option<usize>,
    resume: Option<&Path>,
    loss_csv: Option<&Path>,
) -> Result<()> {
    let variant = Variant::parse(variant)?;
    let rows = read_manifest(manifest)?;
    let train_rows: Vec<_> = rows.iter().filter(|r| r.split == "train").collect();
    if train_rows.is_empty() {
        return Err(Error::InvalidArgument("manifest has no train scenes".into()));
    }
    let root = manifest.parent().unwrap_or_else(|| Path::new("."));
    let model_cfg = cfg.model_config();

    log::info!("preparing {} scenes ({})", train_rows.len(), variant.label());
    let mut scenes: Vec<TrainScene> = Vec::with_capacity(train_rows.len());
    for row in &train_rows {
        let mut loaded = load_scene(&root.join(&row.path))?;
        // Variant semantics при training: vision-only drops every reading
        // (all tactile slots zeroed); vtacoh re-poses them from hand FK.
        let readings = variant_readings(&loaded, variant, None)?;
        loaded.readings = match variant {
            Variant::VisionOnly => Vec::new(),
            _ => loaded
                .readings
                .iter()
                .zip(readings)
                .map(|((g, f, _), r)| (*g, *f, r))
                .collect(),
        };
        scenes.push(to_train_scene(&loaded, &model_cfg, &cfg.sampling)?);
    }

    let mut model = match resume {
        Some(path) => {
            let m = load_checkpoint(path)?;
            if m.cfg != model_cfg {
                return Err(Error::Model(
                    "resume checkpoint architecture differs from the configured model".into(),
                ));
            }
            m
        }
        None => ReconModel::init(model_cfg, cfg.seed)?,
    };

    let mut tcfg = cfg.train_config();
    if let Some(steps) = steps_override {
        tcfg.steps = steps;
    }
    log::info!(
        "training: {} steps, batch {}, lr {}, seed {}",
        tcfg.steps,
        tcfg.batch_size,
        tcfg.lr,
        tcfg.seed
    );
    let curve = if tcfg.steps == 0 {
        Vec::new()
    } else {
        train(&mut model, &scenes, &tcfg)?
    };
    if let Some((step, loss)) = curve.last() {
        log::info!("finished at step {step} with loss {loss:.5}");
    }

    save_checkpoint(out, &model)?;
    if let Some(csv) = loss_csv {
        write_loss_csv(csv, &curve, resume.is_some())?;
    }
    println!("{}", out.display());
    Ok(())
}

/// Appends to an existing curve when resuming so step indices stay
/// monotone across runs.
fn write_loss_csv(path: &Path, curve: &[(usize, f64)], resuming: bool) -> Result<()> {
    let mut offset = 0usize;
    let mut existing = String::new();
    if resuming && path.exists() {
        existing = std::fs::read_to_string(path)?;
        offset = existing
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').next())
            .filter_map(|s| s.parse::<usize>().ok())
            .max()
            .map(|s| s + 1)
            .unwrap_or(0);
    }
    let mut f = std::fs::File::create(path)?;
    if offset > 0 {
        f.write_all(existing.as_bytes())?;
    } else {
        writeln!(f, "step,loss")?;
    }
    for (step, loss) in curve {
        writeln!(f, "{},{}", step + offset, loss)?;
    }
    Ok(())
}
