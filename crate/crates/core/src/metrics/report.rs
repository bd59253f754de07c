//! Experiment harness: reconstruct test scenes per variant, compute IoU /
//! Chamfer / EMD against the ground truth, and aggregate per category.

use super::{chamfer, common_grid, emd, iou_volume};
use crate::datagen::{load_scene, read_manifest, LoadedScene, ManifestRow};
use crate::geom::{sample_surface, GridSpec, Point3};
use crate::hand::{sensor_poses, HandModel};
use crate::neural::{load_checkpoint, reconstruct, ReconModel, Reconstruction};
use crate::tactile::TactileReading;
use crate::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Reconstruction variants compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    VisionOnly,
    Vtaco,
    Vtacoh,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::VisionOnly => "vision-only",
            Variant::Vtaco => "vtaco",
            Variant::Vtacoh => "vtacoh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vision-only" => Ok(Variant::VisionOnly),
            "vtaco" => Ok(Variant::Vtaco),
            "vtacoh" => Ok(Variant::Vtacoh),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other}; expected vision-only | vtaco | vtacoh"
            ))),
        }
    }
}

/// Checkpoint per variant, in evaluation order.
#[derive(Debug, Clone)]
pub struct VariantCheckpoints {
    pub entries: Vec<(Variant, PathBuf)>,
}

/// Evaluation constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    /// Decoder grid resolution for reconstruction.
    pub recon_res: usize,
    /// Occupancy grid resolution for IoU.
    pub iou_res: usize,
    /// Surface samples per mesh for CD and EMD.
    pub metric_points: usize,
    /// Tactile feature radius around contact points.
    pub contact_radius: f64,
    pub half_extent: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            recon_res: 32,
            iou_res: 64,
            metric_points: 2048,
            contact_radius: 0.1,
            half_extent: 0.75,
        }
    }
}

/// Per-scene metric row.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SceneMetrics {
    pub scene: String,
    pub category: String,
    pub variant: String,
    pub iou: f64,
    pub cd_x100: f64,
    pub emd: f64,
}

/// Aggregate row: arithmetic means over the contributing scenes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AggregateMetrics {
    pub category: String,
    pub variant: String,
    pub scenes: usize,
    pub iou: f64,
    pub cd_x100: f64,
    pub emd: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub scenes: Vec<SceneMetrics>,
    pub per_category: Vec<AggregateMetrics>,
    pub overall: Vec<AggregateMetrics>,
    pub warnings: Vec<String>,
}

/// Selects the readings a variant consumes and their poses. VTacOH ignores
/// the stored sensor poses and recomputes them from hand kinematics (tip
/// frame composed with the fixed sensor offset).
pub fn variant_readings(
    scene: &LoadedScene,
    variant: Variant,
    grasp_limit: Option<usize>,
) -> Result<Vec<TactileReading>> {
    if variant == Variant::VisionOnly {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (grasp, finger, reading) in &scene.readings {
        if let Some(limit) = grasp_limit {
            if *grasp >= limit {
                continue;
            }
        }
        match variant {
            Variant::Vtaco | Variant::VisionOnly => out.push(reading.clone()),
            Variant::Vtacoh => {
                let spec = &reading.spec;
                let hand = HandModel::desk_default(spec.gel_rest_depth, spec.max_indentation);
                let pose = scene
                    .hand_poses
                    .get(*grasp)
                    .ok_or_else(|| Error::Eval(format!("scene missing hand pose {grasp}")))?;
                let poses = sensor_poses(&hand, pose)?;
                out.push(TactileReading::new(
                    reading.image.clone(),
                    poses[*finger],
                    spec.clone(),
                )?);
            }
        }
    }
    Ok(out)
}

/// Reconstructs one scene under a variant, optionally limited to the first
/// `grasp_limit` grasps (no retraining involved).
pub fn scene_reconstruction(
    model: &ReconModel,
    scene: &LoadedScene,
    variant: Variant,
    grasp_limit: Option<usize>,
    cfg: &EvalConfig,
) -> Result<Reconstruction> {
    let readings = variant_readings(scene, variant, grasp_limit)?;
    let grid = GridSpec::cube(Point3::origin(), cfg.half_extent, cfg.recon_res)?;
    reconstruct(model, &scene.cloud, &readings, &grid, cfg.contact_radius)
}

/// CD / EMD / IoU of a reconstruction against the scene's ground truth.
/// An empty reconstruction takes IoU 0 and a worst-case distance penalty
/// (the world-cube diagonal) so aggregates stay comparable.
pub fn score_reconstruction(
    recon: &Reconstruction,
    scene: &LoadedScene,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if recon.mesh.is_empty() {
        let diag = 2.0 * cfg.half_extent * 3.0f64.sqrt();
        return Ok((0.0, diag * 100.0, diag));
    }
    let gt_points = sample_surface(&scene.mesh, cfg.metric_points, seed ^ 0xe7a0)?;
    let pred_points = sample_surface(&recon.mesh, cfg.metric_points, seed ^ 0xe7a1)?;
    let cd = chamfer(&pred_points, &gt_points)?;
    let ed = emd(&pred_points, &gt_points)?;
    let grid = common_grid(&recon.mesh, &scene.mesh, cfg.iou_res)?;
    let iou = iou_volume(&recon.mesh, &scene.mesh, &grid);
    Ok((iou, cd, ed))
}

/// Evaluates every checkpoint variant over the manifest's test split and
/// aggregates per category and overall. Missing scene directories are
/// skipped with a warning; an empty test split is an error.
pub fn evaluate_variants(
    manifest_path: &Path,
    checkpoints: &VariantCheckpoints,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let rows: Vec<ManifestRow> = read_manifest(manifest_path)?
        .into_iter()
        .filter(|r| r.split == "test")
        .collect();
    if rows.is_empty() {
        return Err(Error::Eval("manifest has no test scenes".into()));
    }
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut warnings = Vec::new();
    let mut scenes = Vec::new();
    for (variant, ckpt_path) in &checkpoints.entries {
        let model = load_checkpoint(ckpt_path)?;
        for row in &rows {
            let dir = root.join(&row.path);
            let loaded = match load_scene(&dir) {
                Ok(s) => s,
                Err(e) => {
                    warnings.push(format!("skipping {}: {e}", row.scene));
                    continue;
                }
            };
            let recon = scene_reconstruction(&model, &loaded, *variant, None, cfg)?;
            let (iou, cd, ed) = score_reconstruction(&recon, &loaded, cfg, row.seed)?;
            scenes.push(SceneMetrics {
                scene: row.scene.clone(),
                category: row.category.clone(),
                variant: variant.label().into(),
                iou,
                cd_x100: cd,
                emd: ed,
            });
        }
    }

    let per_category = aggregate(&scenes, true);
    let overall = aggregate(&scenes, false);
    Ok(EvalReport {
        scenes,
        per_category,
        overall,
        warnings,
    })
}

fn aggregate(scenes: &[SceneMetrics], by_category: bool) -> Vec<AggregateMetrics> {
    let mut keys: Vec<(String, String)> = scenes
        .iter()
        .map(|s| {
            (
                if by_category {
                    s.category.clone()
                } else {
                    "all".to_string()
                },
                s.variant.clone(),
            )
        })
        .collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|(cat, var)| {
            let rows: Vec<&SceneMetrics> = scenes
                .iter()
                .filter(|s| {
                    (!by_category || &s.category == cat) && &s.variant == var
                })
                .collect();
            let n = rows.len() as f64;
            AggregateMetrics {
                category: cat.clone(),
                variant: var.clone(),
                scenes: rows.len(),
                iou: rows.iter().map(|r| r.iou).sum::<f64>() / n,
                cd_x100: rows.iter().map(|r| r.cd_x100).sum::<f64>() / n,
                emd: rows.iter().map(|r| r.emd).sum::<f64>() / n,
            }
        })
        .collect()
}

impl EvalReport {
    pub fn mean_of(&self, variant: Variant) -> Option<&AggregateMetrics> {
        self.overall.iter().find(|a| a.variant == variant.label())
    }

    /// `report.csv`: one row per scene, columns
    /// `scene,category,variant,iou,cd_x100,emd`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "scene,category,variant,iou,cd_x100,emd")?;
        for s in &self.scenes {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                s.scene, s.category, s.variant, s.iou, s.cd_x100, s.emd
            )?;
        }
        Ok(())
    }

    /// `report.json`: the full report, including aggregates and warnings.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(
            serde_json::to_string_pretty(self)
                .map_err(|e| Error::Eval(e.to_string()))?
                .as_bytes(),
        )?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
