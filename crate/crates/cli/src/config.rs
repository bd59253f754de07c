//! TOML configuration: scene recipes, sensor and hand constants, model and
//! training hyperparameters, grid resolutions, and evaluation settings.
//!
//! Every field has a default; a missing file means "all defaults". The path
//! comes from `--config`, else the `WNF_RECON_CONFIG` environment variable.

use recon_core::datagen::{AnalyticShape, DatagenConfig, ObjectSource, SceneSpec};
use recon_core::metrics::EvalConfig;
use recon_core::neural::{ModelConfig, SamplingConfig, TrainConfig};
use recon_core::{Error, Result};
use std::path::{Path, PathBuf};

pub const CONFIG_ENV: &str = "WNF_RECON_CONFIG";

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub train: usize,
    pub test: usize,
    pub val: usize,
    /// Grasp events per scene (deformables are clamped to one).
    pub grasps_per_scene: usize,
    pub categories: Vec<String>,
    pub box_stiffness: f64,
    pub bottle_stiffness: f64,
    pub randomize_rotation: bool,
    pub sphere_radius: f64,
    pub box_extents: [f64; 3],
    pub tube_radius: f64,
    pub tube_height: f64,
    pub plate_size: [f64; 2],
    pub slot_size: [f64; 2],
    pub shape_resolution: usize,
    /// Extra OBJ meshes appended to the category cycle.
    pub obj_paths: Vec<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            train: 60,
            test: 12,
            val: 8,
            grasps_per_scene: 1,
            categories: vec![
                "sphere".into(),
                "box".into(),
                "bottle".into(),
                "foldingrack".into(),
            ],
            box_stiffness: 0.3,
            bottle_stiffness: 0.2,
            randomize_rotation: true,
            sphere_radius: 0.5,
            box_extents: [0.5, 0.38, 0.26],
            tube_radius: 0.3,
            tube_height: 0.9,
            plate_size: [0.9, 0.7],
            slot_size: [0.45, 0.2],
            shape_resolution: 0, // 0 = per-shape default
            obj_paths: Vec::new(),
        }
    }
}

impl DatasetSection {
    pub fn scene_specs(&self) -> Result<Vec<SceneSpec>> {
        let mut specs = Vec::new();
        for cat in &self.categories {
            let (shape, stiffness, resolution) = match cat.as_str() {
                "sphere" => (
                    AnalyticShape::Sphere {
                        radius: self.sphere_radius,
                    },
                    1.0,
                    if self.shape_resolution == 0 { 3 } else { self.shape_resolution },
                ),
                "box" => (
                    AnalyticShape::Box {
                        extents: self.box_extents,
                    },
                    self.box_stiffness,
                    0,
                ),
                "bottle" => (
                    AnalyticShape::Tube {
                        radius: self.tube_radius,
                        height: self.tube_height,
                    },
                    self.bottle_stiffness,
                    if self.shape_resolution == 0 { 32 } else { self.shape_resolution },
                ),
                "foldingrack" => (
                    AnalyticShape::SlottedPlate {
                        width: self.plate_size[0],
                        height: self.plate_size[1],
                        slot_width: self.slot_size[0],
                        slot_height: self.slot_size[1],
                    },
                    1.0,
                    if self.shape_resolution == 0 { 12 } else { self.shape_resolution },
                ),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown category {other}; expected sphere | box | bottle | foldingrack"
                    )))
                }
            };
            specs.push(SceneSpec {
                object: ObjectSource::Analytic { shape, resolution },
                stiffness,
                grasps: self.grasps_per_scene,
                randomize_rotation: self.randomize_rotation && cat != "sphere",
            });
        }
        for path in &self.obj_paths {
            specs.push(SceneSpec {
                object: ObjectSource::ObjFile { path: path.clone() },
                stiffness: 1.0,
                grasps: self.grasps_per_scene,
                randomize_rotation: self.randomize_rotation,
            });
        }
        if specs.is_empty() {
            return Err(Error::InvalidArgument("dataset has no categories".into()));
        }
        Ok(specs)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub lr: f64,
    pub lr_final_frac: f64,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub target_loss: Option<f64>,
    pub patience: usize,
    pub grasp_dropout: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            lr_final_frac: 1.0,
            grad_clip: 0.0,
            batch_size: 6,
            steps: 2000,
            target_loss: None,
            patience: 25,
            grasp_dropout: true,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    /// 0 means all available cores.
    pub threads: usize,
    pub dataset: DatasetSection,
    pub datagen: DatagenConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub sampling: SamplingConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            dataset: DatasetSection::default(),
            datagen: DatagenConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            sampling: SamplingConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Config {
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
        };
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(&p)?;
                let cfg: Config = toml::from_str(&text).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    msg: e.to_string(),
                })?;
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for spec in self.dataset.scene_specs()? {
            spec.validate()?;
        }
        if self.sampling.m == 0 {
            return Err(Error::InvalidArgument("sampling.m must be positive".into()));
        }
        Ok(())
    }

    /// Model architecture consistent with the datagen sensor: tactile input
    /// dimensions and the world cube always follow the datagen section.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            tactile_width: self.datagen.sensor_width,
            tactile_height: self.datagen.sensor_height,
            world_half_extent: self.datagen.half_extent,
            ..self.model.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            lr_final_frac: self.train.lr_final_frac,
            grad_clip: self.train.grad_clip,
            batch_size: self.train.batch_size,
            steps: self.train.steps,
            seed: self.seed,
            target_loss: self.train.target_loss,
            patience: self.train.patience,
            grasp_dropout: self.train.grasp_dropout,
            sampling: self.sampling.clone(),
        }
    }
}
