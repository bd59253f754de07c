//! `eval`: score checkpoints over a manifest's test split and write
//! `report.json` + `report.csv`.

use crate::config::Config;
use recon_core::metrics::{evaluate_variants, EvalConfig, Variant, VariantCheckpoints};
use recon_core::{Error, Result};
use std::path::{Path, PathBuf};

pub fn run(cfg: &Config, manifest: &Path, checkpoints: &[String], out_dir: &Path) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one --checkpoint variant=path is required".into(),
        ));
    }
    let mut entries = Vec::new();
    for spec in checkpoints {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("bad --checkpoint {spec}; expected variant=path"))
        })?;
        let variant = Variant::parse(name)?;
        let path = PathBuf::from(path);
        if !path.exists() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint for variant {} not found at {}",
                variant.label(),
                path.display()
            )));
        }
        entries.push((variant, path));
    }

    let eval_cfg = EvalConfig {
        half_extent: cfg.datagen.half_extent,
        ..cfg.eval.clone()
    };
    let report = evaluate_variants(manifest, &VariantCheckpoints { entries }, &eval_cfg)?;
    for warning in &report.warnings {
        log::warn!("{warning}");
    }
    for agg in &report.overall {
        log::info!(
            "{}: {} scenes, IoU {:.3}, CD(x100) {:.3}, EMD {:.4}",
            agg.variant,
            agg.scenes,
            agg.iou,
            agg.cd_x100,
            agg.emd
        );
    }
    std::fs::create_dir_all(out_dir)?;
    let json = out_dir.join("report.json");
    let csv = out_dir.join("report.csv");
    report.write_json(&json)?;
    report.write_csv(&csv)?;
    println!("{}", json.display());
    println!("{}", csv.display());
    Ok(())
}
