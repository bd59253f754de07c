//! The learnable reconstruction model: visual feature encoder (volume or
//! multi-plane), tactile patch encoder, and the WNF decoder, plus parameter
//! block bookkeeping and the `VTC1` checkpoint format.

use super::conv::{Conv2, Conv3};
use super::nn::{LinearGrad, Mlp};
use crate::geom::{GridSpec, Point3};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VTC1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Init gain on the decoder's coordinate input columns.
const COORD_GAIN: f64 = 8.0;

/// How per-position visual and tactile features combine with coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// `[x | F_p + F_t]`, dimension 3 + d_p (requires d_p == d_t).
    Addition,
    /// `[x | F_p | F_t]`, dimension 3 + d_p + d_t.
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Point MLP, voxel mean-pool, two 3x3x3 convolutions.
    Volume,
    /// Point MLP, three orthogonal plane mean-pools, two 3x3 convolutions
    /// per plane, features summed at query time.
    MultiPlane,
}

/// Architecture hyperparameters. Defaults: d_p = d_t = 32, feature grid
/// D = 64 (desk-scale 32 allowed), 5-layer decoder of width 128.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub d_p: usize,
    pub d_t: usize,
    /// Feature-volume resolution per axis.
    pub feat_res: usize,
    pub tactile_width: usize,
    pub tactile_height: usize,
    pub point_hidden: usize,
    pub tactile_hidden: usize,
    pub decoder_hidden: usize,
    pub fusion: FusionMode,
    pub encoder: EncoderKind,
    /// Half extent of the world cube the feature grid covers, centered at
    /// the origin (scenes are normalized into this cube).
    pub world_half_extent: f64,
}

impl Default for ModelConfig {
    /// Full-scale defaults: d_p = d_t = 32, feature grid D = 64, 300x200
    /// tactile input, addition fusion, volume encoder.
    fn default() -> Self {
        Self {
            d_p: 32,
            d_t: 32,
            feat_res: 64,
            tactile_width: 300,
            tactile_height: 200,
            point_hidden: 32,
            tactile_hidden: 64,
            decoder_hidden: 128,
            fusion: FusionMode::Addition,
            encoder: EncoderKind::Volume,
            world_half_extent: 0.75,
        }
    }
}

impl ModelConfig {
    pub fn desk(feat_res: usize, tactile_width: usize, tactile_height: usize) -> Self {
        Self {
            d_p: 32,
            d_t: 32,
            feat_res,
            tactile_width,
            tactile_height,
            point_hidden: 32,
            tactile_hidden: 64,
            decoder_hidden: 128,
            fusion: FusionMode::Addition,
            encoder: EncoderKind::Volume,
            world_half_extent: 0.75,
        }
    }

    /// Fused feature dimension: 3 + d_p (addition) or 3 + d_p + d_t (concat).
    pub fn fused_dim(&self) -> usize {
        match self.fusion {
            FusionMode::Addition => 3 + self.d_p,
            FusionMode::Concat => 3 + self.d_p + self.d_t,
        }
    }

    pub fn tactile_pixels(&self) -> usize {
        self.tactile_width * self.tactile_height
    }

    /// World placement of the feature lattice.
    pub fn feature_grid(&self) -> GridSpec {
        GridSpec::cube(Point3::origin(), self.world_half_extent, self.feat_res)
            .expect("positive extent and resolution")
    }

    /// Normalizes a world position into the grid's unit cube, centered at
    /// zero: coordinates land in [-0.5, 0.5].
    pub fn normalize(&self, p: &Point3) -> [f64; 3] {
        let h = self.world_half_extent;
        [p.x / (2.0 * h), p.y / (2.0 * h), p.z / (2.0 * h)]
    }

    fn validate(&self) -> Result<()> {
        if self.fusion == FusionMode::Addition && self.d_p != self.d_t {
            return Err(Error::Model(format!(
                "addition fusion needs d_p == d_t, got {} vs {}",
                self.d_p, self.d_t
            )));
        }
        if self.feat_res < 2 {
            return Err(Error::Model("feature grid needs at least 2 voxels per axis".into()));
        }
        if !(self.world_half_extent > 0.0) {
            return Err(Error::Model("world half extent must be positive".into()));
        }
        Ok(())
    }
}

/// Visual encoder parameters for the active variant.
#[derive(Debug, Clone, PartialEq)]
pub enum VisualEncoder {
    Volume { conv1: Conv3, conv2: Conv3 },
    MultiPlane { convs: Vec<(Conv2, Conv2)> },
}

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconModel {
    pub cfg: ModelConfig,
    pub point_mlp: Mlp,
    pub visual: VisualEncoder,
    pub tactile_mlp: Mlp,
    pub decoder: Mlp,
}

impl ReconModel {
    /// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point_mlp = Mlp::init(&[3, cfg.point_hidden, cfg.d_p], false, &mut rng);
        let visual = match cfg.encoder {
            EncoderKind::Volume => VisualEncoder::Volume {
                conv1: Conv3::init(cfg.d_p, cfg.d_p, &mut rng),
                conv2: Conv3::init(cfg.d_p, cfg.d_p, &mut rng),
            },
            EncoderKind::MultiPlane => VisualEncoder::MultiPlane {
                convs: (0..3)
                    .map(|_| {
                        (
                            Conv2::init(cfg.d_p, cfg.d_p, &mut rng),
                            Conv2::init(cfg.d_p, cfg.d_p, &mut rng),
                        )
                    })
                    .collect(),
            },
        };
        let tactile_mlp = Mlp::init(
            &[cfg.tactile_pixels(), cfg.tactile_hidden, cfg.d_t],
            false,
            &mut rng,
        );
        let d = cfg.fused_dim();
        let h = cfg.decoder_hidden;
        let mut decoder = Mlp::init(&[d, h, h, h, h, 1], true, &mut rng);
        // The three coordinate columns start at a higher scale so the field
        // can express sharp spatial transitions within a small step budget
        // (coordinate-network frequency scaling, without changing the input
        // dimension).
        {
            let l0 = &mut decoder.layers[0];
            for o in 0..l0.out_dim {
                for i in 0..3 {
                    l0.w[o * l0.in_dim + i] *= COORD_GAIN;
                }
            }
        }
        Ok(Self {
            cfg,
            point_mlp,
            visual,
            tactile_mlp,
            decoder,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Stable ordering of named parameter blocks.
    pub fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.point_mlp.layers.len() {
            names.push(format!("point.w{i}"));
            names.push(format!("point.b{i}"));
        }
        match &self.visual {
            VisualEncoder::Volume { .. } => {
                names.push("visual.conv1.w".into());
                names.push("visual.conv2.w".into());
            }
            VisualEncoder::MultiPlane { convs } => {
                for p in 0..convs.len() {
                    names.push(format!("visual.plane{p}.conv1.w"));
                    names.push(format!("visual.plane{p}.conv2.w"));
                }
            }
        }
        for i in 0..self.tactile_mlp.layers.len() {
            names.push(format!("tactile.w{i}"));
            names.push(format!("tactile.b{i}"));
        }
        for i in 0..self.decoder.layers.len() {
            names.push(format!("decoder.w{i}"));
            names.push(format!("decoder.b{i}"));
        }
        names
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.point_mlp.layers {
            out.push(&l.w);
            out.push(&l.b);
        }
        match &self.visual {
            VisualEncoder::Volume { conv1, conv2 } => {
                out.push(&conv1.w);
                out.push(&conv2.w);
            }
            VisualEncoder::MultiPlane { convs } => {
                for (c1, c2) in convs {
                    out.push(&c1.w);
                    out.push(&c2.w);
                }
            }
        }
        for l in &self.tactile_mlp.layers {
            out.push(&l.w);
            out.push(&l.b);
        }
        for l in &self.decoder.layers {
            out.push(&l.w);
            out.push(&l.b);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.point_mlp.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        match &mut self.visual {
            VisualEncoder::Volume { conv1, conv2 } => {
                out.push(&mut conv1.w);
                out.push(&mut conv2.w);
            }
            VisualEncoder::MultiPlane { convs } => {
                for (c1, c2) in convs {
                    out.push(&mut c1.w);
                    out.push(&mut c2.w);
                }
            }
        }
        for l in &mut self.tactile_mlp.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        for l in &mut self.decoder.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

/// Gradient buffers aligned with [`ReconModel::blocks`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub point: Vec<LinearGrad>,
    pub visual: Vec<Vec<f64>>,
    pub tactile: Vec<LinearGrad>,
    pub decoder: Vec<LinearGrad>,
}

impl ModelGrads {
    pub fn zeros(model: &ReconModel) -> Self {
        let visual = match &model.visual {
            VisualEncoder::Volume { conv1, conv2 } => {
                vec![vec![0.0; conv1.w.len()], vec![0.0; conv2.w.len()]]
            }
            VisualEncoder::MultiPlane { convs } => convs
                .iter()
                .flat_map(|(c1, c2)| [vec![0.0; c1.w.len()], vec![0.0; c2.w.len()]])
                .collect(),
        };
        Self {
            point: model.point_mlp.zero_grads(),
            visual,
            tactile: model.tactile_mlp.zero_grads(),
            decoder: model.decoder.zero_grads(),
        }
    }

    /// Flat view aligned with `ReconModel::blocks()`.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in &self.point {
            out.push(&g.w);
            out.push(&g.b);
        }
        for g in &self.visual {
            out.push(g);
        }
        for g in &self.tactile {
            out.push(&g.w);
            out.push(&g.b);
        }
        for g in &self.decoder {
            out.push(&g.w);
            out.push(&g.b);
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.point.iter_mut().chain(self.tactile.iter_mut()).chain(self.decoder.iter_mut())
        {
            g.w.iter_mut().for_each(|v| *v *= s);
            g.b.iter_mut().for_each(|v| *v *= s);
        }
        for g in &mut self.visual {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn accumulate(&mut self, other: &ModelGrads) {
        for (a, b) in self.point.iter_mut().zip(&other.point) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.visual.iter_mut().zip(&other.visual) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.tactile.iter_mut().zip(&other.tactile) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.decoder.iter_mut().zip(&other.decoder) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: magic + version + JSON architecture descriptor + named f32
// little-endian parameter blocks.
// ---------------------------------------------------------------------------

pub fn save_checkpoint(path: &Path, model: &ReconModel) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let desc = serde_json::to_vec(&model.cfg).map_err(|e| Error::Model(e.to_string()))?;
    w.write_all(&(desc.len() as u32).to_le_bytes())?;
    w.write_all(&desc)?;
    let names = model.block_names();
    let blocks = model.blocks();
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (name, block) in names.iter().zip(blocks) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(block.len() as u32).to_le_bytes())?;
        for &v in block {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ReconModel> {
    let pathstr = path.display().to_string();
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::parse(&pathstr, "bad checkpoint magic"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(&pathstr, format!("unsupported checkpoint version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let desc_len = u32::from_le_bytes(u32buf) as usize;
    let mut desc = vec![0u8; desc_len];
    r.read_exact(&mut desc)?;
    let cfg: ModelConfig = serde_json::from_slice(&desc)
        .map_err(|e| Error::parse(&pathstr, format!("bad architecture descriptor: {e}")))?;
    let mut model = ReconModel::init(cfg, 0)?;

    r.read_exact(&mut u32buf)?;
    let n_blocks = u32::from_le_bytes(u32buf) as usize;
    let names = model.block_names();
    let mut blocks = model.blocks_mut();
    if n_blocks != blocks.len() {
        return Err(Error::parse(
            &pathstr,
            format!("checkpoint has {n_blocks} blocks, architecture expects {}", blocks.len()),
        ));
    }
    for k in 0..n_blocks {
        r.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8_lossy(&name).to_string();
        if name != names[k] {
            return Err(Error::parse(
                &pathstr,
                format!("block {k} named {name}, expected {}", names[k]),
            ));
        }
        r.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        if len != blocks[k].len() {
            return Err(Error::parse(
                &pathstr,
                format!("block {name} has {len} values, expected {}", blocks[k].len()),
            ));
        }
        for slot in blocks[k].iter_mut() {
            let mut vb = [0u8; 4];
            r.read_exact(&mut vb)?;
            *slot = f32::from_le_bytes(vb) as f64;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn fused_dims_match_fusion_modes() {
        let mut cfg = ModelConfig::desk(16, 12, 8);
        cfg.fusion = FusionMode::Addition;
        assert_eq!(cfg.fused_dim(), 35);
        cfg.fusion = FusionMode::Concat;
        assert_eq!(cfg.fused_dim(), 67);
    }

    #[test]
    fn addition_requires_matching_dims() {
        let mut cfg = ModelConfig::desk(16, 12, 8);
        cfg.d_t = 16;
        cfg.fusion = FusionMode::Addition;
        assert!(ReconModel::init(cfg.clone(), 1).is_err());
        cfg.fusion = FusionMode::Concat;
        assert!(ReconModel::init(cfg, 1).is_ok());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = ModelConfig::desk(8, 12, 8);
        let a = ReconModel::init(cfg.clone(), 7).unwrap();
        let b = ReconModel::init(cfg.clone(), 7).unwrap();
        assert_eq!(a, b);
        let c = ReconModel::init(cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn checkpoint_round_trip_preserves_f32_params() {
        let cfg = ModelConfig::desk(8, 12, 8);
        let model = ReconModel::init(cfg, 3).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.vtc");
        save_checkpoint(&path, &model).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.cfg, model.cfg);
        for (a, b) in model.blocks().iter().zip(back.blocks()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        // Saving the reloaded model is byte-identical.
        let path2 = dir.path().join("m2.vtc");
        save_checkpoint(&path2, &back).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();
        let bytes2 = std::fs::read(&path2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn block_names_align_with_blocks() {
        let cfg = ModelConfig::desk(8, 12, 8);
        let model = ReconModel::init(cfg, 1).unwrap();
        assert_eq!(model.block_names().len(), model.blocks().len());
        let grads = ModelGrads::zeros(&model);
        let gb = grads.blocks();
        let mb = model.blocks();
        assert_eq!(gb.len(), mb.len());
        for (g, m) in gb.iter().zip(mb) {
            assert_eq!(g.len(), m.len());
        }
    }
}
