//! Training: forward/backward over query batches, the Adam loop, and the
//! finite-difference gradient checker.
//!
//! Training is single-threaded and deterministic per seed by contract; the
//! loss is the masked mean absolute error between predicted and ground-truth
//! winding numbers, with the |.| subgradient at 0 taken as 0.

use super::batch::{subsample_batch, QueryBatch, SamplingConfig, ScenePool};
use super::encoder::{
    encode_scene, query_feature, EncodedScene, EncoderGrad, PreparedCloud, QuerySupport,
};
use super::model::{FusionMode, ModelGrads, ReconModel};
use super::nn::{Adam, MlpTrace};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One prepared training scene: preprocessed cloud, query pool, and the
/// flattened tactile images grouped by grasp.
#[derive(Debug, Clone)]
pub struct TrainScene {
    pub prep: PreparedCloud,
    pub pool: ScenePool,
    /// Flattened tactile images, one per reading (aligned with the pool's
    /// per-reading candidates).
    pub tactile_images: Vec<Vec<f64>>,
    /// Grasp index of each reading, for grasp-count dropout.
    pub reading_grasp: Vec<usize>,
    pub grasp_count: usize,
}

/// Mean |w - w*| over unmasked entries; masked-out entries contribute
/// nothing. Empty effective batches give 0.
pub fn wnf_loss(pred: &[f64], target: &[f64], mask: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if mask[i] {
            sum += (pred[i] - target[i]).abs();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Forward pass over one scene's batch; returns per-query predictions plus
/// the caches needed for backward.
struct SceneForward {
    enc: EncodedScene,
    tactile_traces: Vec<Option<MlpTrace>>,
    decoder_traces: Vec<MlpTrace>,
    supports: Vec<QuerySupport>,
    pred: Vec<f64>,
}

fn forward(model: &ReconModel, scene: &TrainScene, batch: &QueryBatch) -> SceneForward {
    let cfg = &model.cfg;
    let grid = cfg.feature_grid();
    // Voxels whose final-layer features the batch can touch.
    let mut corners: Vec<usize> = Vec::with_capacity(batch.len() * 8);
    for p in &batch.positions {
        let mut g = [0.0f64; 3];
        for k in 0..3 {
            g[k] = (p[k] - grid.origin[k]) / grid.spacing - 0.5;
        }
        let base = g.map(|v| v.floor() as isize);
        for corner in 0..8usize {
            let idx = [
                base[0] + (corner & 1) as isize,
                base[1] + ((corner >> 1) & 1) as isize,
                base[2] + ((corner >> 2) & 1) as isize,
            ];
            if idx.iter().all(|&i| i >= 0)
                && idx[0] < grid.dims[0] as isize
                && idx[1] < grid.dims[1] as isize
                && idx[2] < grid.dims[2] as isize
            {
                corners.push(grid.linear_index([idx[0] as usize, idx[1] as usize, idx[2] as usize]));
            }
        }
    }
    corners.sort_unstable();
    corners.dedup();

    let enc = encode_scene(model, &scene.prep, Some(&corners));

    // Tactile features for readings referenced by the batch.
    let mut used = vec![false; scene.tactile_images.len()];
    for slot in batch.tactile_slot.iter().flatten() {
        used[*slot as usize] = true;
    }
    let tactile_traces: Vec<Option<MlpTrace>> = scene
        .tactile_images
        .iter()
        .enumerate()
        .map(|(i, img)| used[i].then(|| model.tactile_mlp.forward(img)))
        .collect();

    let zeros_t = vec![0.0; cfg.d_t];
    let mut decoder_traces = Vec::with_capacity(batch.len());
    let mut supports = Vec::with_capacity(batch.len());
    let mut pred = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let pos = batch.positions[i];
        let (f_p, support) = query_feature(cfg, &enc.acts, &pos);
        let f_t = match batch.tactile_slot[i] {
            Some(s) => tactile_traces[s as usize]
                .as_ref()
                .expect("used reading encoded")
                .output(),
            None => &zeros_t[..],
        };
        let x_norm = cfg.normalize(&pos);
        let fused = super::encoder::fuse(cfg.fusion, &x_norm, &f_p, f_t)
            .expect("model dims validated at build");
        let trace = model.decoder.forward(&fused);
        pred.push(trace.output()[0]);
        decoder_traces.push(trace);
        supports.push(support);
    }
    SceneForward {
        enc,
        tactile_traces,
        decoder_traces,
        supports,
        pred,
    }
}

/// Loss of one scene/batch without gradient bookkeeping.
pub fn forward_loss(model: &ReconModel, scene: &TrainScene, batch: &QueryBatch) -> f64 {
    let fwd = forward(model, scene, batch);
    wnf_loss(&fwd.pred, &batch.w_star, &batch.mask)
}

/// Full forward + reverse pass; accumulates parameter gradients of the
/// scene's mean loss into `grads` and returns the loss.
pub fn forward_backward(
    model: &ReconModel,
    scene: &TrainScene,
    batch: &QueryBatch,
    grads: &mut ModelGrads,
) -> f64 {
    let cfg = &model.cfg;
    let fwd = forward(model, scene, batch);
    let loss = wnf_loss(&fwd.pred, &batch.w_star, &batch.mask);

    let n_active = batch.mask.iter().filter(|&&m| m).count();
    if n_active == 0 {
        return loss;
    }
    let inv = 1.0 / n_active as f64;

    let mut enc_grad = EncoderGrad::zeros(&fwd.enc.acts);
    let mut d_tactile: Vec<Vec<f64>> = scene
        .tactile_images
        .iter()
        .map(|_| vec![0.0; cfg.d_t])
        .collect();

    for i in 0..batch.len() {
        if !batch.mask[i] {
            continue;
        }
        let r = fwd.pred[i] - batch.w_star[i];
        // Subgradient of |.| at 0 is 0.
        let dw = if r > 0.0 {
            inv
        } else if r < 0.0 {
            -inv
        } else {
            0.0
        };
        if dw == 0.0 {
            continue;
        }
        let d_fused = model
            .decoder
            .backward(&fwd.decoder_traces[i], &[dw], &mut grads.decoder);
        // Split the fused gradient (positions are not learned).
        let d_p = cfg.d_p;
        match cfg.fusion {
            FusionMode::Addition => {
                let dv = &d_fused[3..3 + d_p];
                enc_grad.scatter(&fwd.supports[i], dv);
                if let Some(s) = batch.tactile_slot[i] {
                    for (slot, &g) in d_tactile[s as usize].iter_mut().zip(dv) {
                        *slot += g;
                    }
                }
            }
            FusionMode::Concat => {
                enc_grad.scatter(&fwd.supports[i], &d_fused[3..3 + d_p]);
                if let Some(s) = batch.tactile_slot[i] {
                    let dv = &d_fused[3 + d_p..3 + d_p + cfg.d_t];
                    for (slot, &g) in d_tactile[s as usize].iter_mut().zip(dv) {
                        *slot += g;
                    }
                }
            }
        }
    }

    super::encoder::encoder_backward(model, &scene.prep, &fwd.enc, enc_grad, grads);
    for (ti, trace) in fwd.tactile_traces.iter().enumerate() {
        if let Some(trace) = trace {
            if d_tactile[ti].iter().any(|&g| g != 0.0) {
                model
                    .tactile_mlp
                    .backward(trace, &d_tactile[ti], &mut grads.tactile);
            }
        }
    }
    loss
}

/// Training hyperparameters. Paper-scale defaults are lr = 2e-4 and batch
/// size 6; desk runs override through the config file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Cosine-decay floor as a fraction of `lr` (1.0 = constant rate). The
    /// L1 objective has constant-magnitude subgradients, so Adam needs a
    /// decaying rate to settle.
    pub lr_final_frac: f64,
    /// Global-norm gradient clip; 0 disables.
    pub grad_clip: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Stop once the running mean loss (over `patience` steps) drops below
    /// this, when set.
    pub target_loss: Option<f64>,
    pub patience: usize,
    /// Randomly drop trailing grasps per scene per step so that inference
    /// with fewer readings stays in-distribution.
    pub grasp_dropout: bool,
    pub sampling: SamplingConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            lr_final_frac: 1.0,
            grad_clip: 0.0,
            batch_size: 6,
            steps: 2000,
            seed: 0,
            target_loss: None,
            patience: 25,
            grasp_dropout: true,
            sampling: SamplingConfig::default(),
        }
    }
}

/// Runs Adam over shuffled scene minibatches. Returns the per-step loss
/// curve `(step, loss)`; aborts with a diagnostic when the loss goes
/// non-finite.
pub fn train(
    model: &mut ReconModel,
    scenes: &[TrainScene],
    cfg: &TrainConfig,
) -> Result<Vec<(usize, f64)>> {
    if scenes.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one scene".into()));
    }
    let block_sizes: Vec<usize> = model.blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(cfg.lr, &block_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut cursor = order.len(); // trigger an initial shuffle
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut recent: std::collections::VecDeque<f64> = std::collections::VecDeque::new();

    for step in 0..cfg.steps {
        let mut grads = ModelGrads::zeros(model);
        let mut loss_sum = 0.0;
        let picks = cfg.batch_size.min(scenes.len());
        for _ in 0..picks {
            if cursor >= order.len() {
                // New epoch: reshuffle.
                for k in 0..order.len() {
                    let j = rng.random_range(k..order.len());
                    order.swap(k, j);
                }
                cursor = 0;
            }
            let scene = &scenes[order[cursor]];
            cursor += 1;

            let active = active_readings(scene, cfg.grasp_dropout, &mut rng);
            let batch = subsample_batch(&scene.pool, &active, &cfg.sampling, &mut rng);
            loss_sum += forward_backward(model, scene, &batch, &mut grads);
        }
        let loss = loss_sum / picks as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        grads.scale(1.0 / picks as f64);
        if cfg.grad_clip > 0.0 {
            let norm: f64 = grads
                .blocks()
                .iter()
                .flat_map(|b| b.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if norm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / norm);
            }
        }
        {
            let t = step as f64 / cfg.steps.max(1) as f64;
            let floor = cfg.lr * cfg.lr_final_frac;
            adam.lr = floor
                + 0.5 * (cfg.lr - floor) * (1.0 + (std::f64::consts::PI * t).cos());
            let mut params = model.blocks_mut();
            let gblocks = grads.blocks();
            adam.update(&mut params, &gblocks);
        }
        curve.push((step, loss));

        if let Some(target) = cfg.target_loss {
            recent.push_back(loss);
            if recent.len() > cfg.patience {
                recent.pop_front();
            }
            if recent.len() == cfg.patience {
                let mean: f64 = recent.iter().sum::<f64>() / recent.len() as f64;
                if mean < target {
                    break;
                }
            }
        }
    }
    Ok(curve)
}

fn active_readings(scene: &TrainScene, dropout: bool, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let keep_grasps = if dropout && scene.grasp_count > 0 {
        rng.random_range(0..=scene.grasp_count)
    } else {
        scene.grasp_count
    };
    scene
        .reading_grasp
        .iter()
        .map(|&g| g < keep_grasps)
        .collect()
}

/// Result of the finite-difference gradient check: worst relative error per
/// parameter block.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

/// Central finite differences (h = 1e-5) against the analytic gradients on
/// one sampled batch, probing `samples_per_block` random components of every
/// parameter block.
pub fn gradient_check(
    model: &mut ReconModel,
    scene: &TrainScene,
    seed: u64,
    samples_per_block: usize,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampling = SamplingConfig {
        m: 16,
        ..SamplingConfig::default()
    };
    let active = vec![true; scene.tactile_images.len()];
    let batch = subsample_batch(&scene.pool, &active, &sampling, &mut rng);

    let mut grads = ModelGrads::zeros(model);
    forward_backward(model, scene, &batch, &mut grads);
    let analytic: Vec<Vec<f64>> = grads.blocks().iter().map(|b| b.to_vec()).collect();
    let names = model.block_names();

    let h = 1e-5;
    let mut report = Vec::new();
    for bi in 0..names.len() {
        let block_len = analytic[bi].len();
        let mut worst = 0.0f64;
        for _ in 0..samples_per_block.min(block_len) {
            let idx = rng.random_range(0..block_len);
            let orig = model.blocks()[bi][idx];
            model.blocks_mut()[bi][idx] = orig + h;
            let fp = forward_loss(model, scene, &batch);
            model.blocks_mut()[bi][idx] = orig - h;
            let fm = forward_loss(model, scene, &batch);
            model.blocks_mut()[bi][idx] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let an = analytic[bi][idx];
            let denom = fd.abs().max(an.abs());
            let err = if denom < 1e-7 {
                // Both effectively zero at FD resolution.
                if (fd - an).abs() < 1e-9 {
                    0.0
                } else {
                    (fd - an).abs()
                }
            } else {
                (fd - an).abs() / denom
            };
            worst = worst.max(err);
        }
        report.push((names[bi].clone(), worst));
    }
    GradCheckReport { blocks: report }
}
