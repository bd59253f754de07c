//! `recon`: reconstruct one scene from a checkpoint, optionally limiting the
//! grasp count and sourcing sensor poses from hand kinematics.

use crate::config::Config;
use recon_core::datagen::load_scene;
use recon_core::geom::io::{write_obj, write_wng};
use recon_core::metrics::{scene_reconstruction, EvalConfig, Variant};
use recon_core::neural::load_checkpoint;
use recon_core::{Error, Result};
use std::path::Path;

#[allow(clippy::too_many_arguments)]
pub fn run(
    cfg: &Config,
    checkpoint: &Path,
    scene_dir: &Path,
    out: &Path,
    grasps: Option<usize>,
    pose_mode: &str,
    wnf_out: Option<&Path>,
) -> Result<()> {
    let variant = match pose_mode {
        "direct" => Variant::Vtaco,
        "hand" => Variant::Vtacoh,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown pose mode {other}; expected direct | hand"
            )))
        }
    };
    let model = load_checkpoint(checkpoint)?;
    let scene = load_scene(scene_dir)?;
    let eval_cfg = EvalConfig {
        half_extent: cfg.datagen.half_extent,
        ..cfg.eval.clone()
    };
    // --grasps 0 means vision-only reconstruction.
    let recon = if grasps == Some(0) {
        scene_reconstruction(&model, &scene, Variant::VisionOnly, None, &eval_cfg)?
    } else {
        scene_reconstruction(&model, &scene, variant, grasps, &eval_cfg)?
    };
    log::info!(
        "decoded {}^3 field, extracted {} vertices / {} faces",
        eval_cfg.recon_res,
        recon.mesh.vertex_count(),
        recon.mesh.face_count()
    );
    write_obj(out, &recon.mesh)?;
    if let Some(wpath) = wnf_out {
        write_wng(wpath, &recon.wnf)?;
    }
    println!("{}", out.display());
    Ok(())
}
