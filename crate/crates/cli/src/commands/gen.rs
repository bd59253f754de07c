//! `gen`: synthesize the dataset and print a manifest summary.

use crate::config::Config;
use recon_core::datagen::{generate_dataset, read_manifest};
use recon_core::Result;
use std::path::Path;

pub fn run(cfg: &Config, out: &Path) -> Result<()> {
    let specs = cfg.dataset.scene_specs()?;
    let counts = (cfg.dataset.train, cfg.dataset.test, cfg.dataset.val);
    log::info!(
        "generating {} scenes ({} train / {} test / {} val) under {}",
        counts.0 + counts.1 + counts.2,
        counts.0,
        counts.1,
        counts.2,
        out.display()
    );
    let manifest = generate_dataset(&specs, counts, out, cfg.seed, &cfg.datagen)?;
    let rows = read_manifest(&manifest)?;
    let mut by_category: std::collections::BTreeMap<&str, usize> = Default::default();
    for row in &rows {
        *by_category.entry(row.category.as_str()).or_insert(0) += 1;
    }
    log::info!("manifest: {} scenes {:?}", rows.len(), by_category);
    println!("{}", manifest.display());
    Ok(())
}
