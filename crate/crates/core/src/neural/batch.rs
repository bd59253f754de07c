//! Query-position sampling: a per-scene pool of uniform, surface-jittered
//! and contact-derived candidates with exact winding-number targets, and the
//! per-step subsample that forms a training batch.

use crate::geom::{sample_surface, Point3, TriangleMesh, Vector3};
use crate::tactile::ContactPatch;
use crate::wnf::{winding_number_batch, Bvh, WindingMode};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pool sizes and subsampling constants. Full-scale defaults follow the
/// training setup (80k uniform + 20k surface, M = 2048); desk runs shrink
/// them through the config file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingConfig {
    pub uniform: usize,
    pub surface: usize,
    /// Contact-derived candidates per tactile reading.
    pub per_reading: usize,
    /// Batch size M after subsampling.
    pub m: usize,
    /// Contact-derived positions are capped at this fraction of M.
    pub m1_cap_frac: f64,
    /// Gaussian sigma for surface-jittered samples.
    pub surface_jitter: f64,
    /// Query-ball radius around contact points.
    pub contact_radius: f64,
    /// Half extent of the sampling cube (matches the feature grid).
    pub half_extent: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            uniform: 80_000,
            surface: 20_000,
            per_reading: 2_000,
            m: 2_048,
            m1_cap_frac: 0.5,
            surface_jitter: 0.02,
            contact_radius: 0.1,
            half_extent: 0.75,
        }
    }
}

/// One candidate query position with its ground-truth winding number.
#[derive(Debug, Clone, Copy)]
pub struct PoolEntry {
    pub pos: Point3,
    pub w_star: f64,
    /// False when the position sits within 1e-6 of the surface (excluded
    /// from the loss).
    pub usable: bool,
}

/// All candidates for one scene, grouped by origin.
#[derive(Debug, Clone)]
pub struct ScenePool {
    pub uniform: Vec<PoolEntry>,
    pub per_reading: Vec<Vec<PoolEntry>>,
}

/// A subsampled batch: `m1` contact-derived positions carrying a tactile
/// slot, then uniform positions with zeroed tactile features.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    pub positions: Vec<Point3>,
    pub tactile_slot: Vec<Option<u16>>,
    pub w_star: Vec<f64>,
    pub mask: Vec<bool>,
    pub m1: usize,
}

impl QueryBatch {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1].
    let u1: f64 = 1.0 - rng.random_range(0.0..1.0f64);
    let u2: f64 = rng.random_range(0.0..1.0f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

/// Builds the candidate pool: uniform cube samples, surface-jittered
/// samples, and per-reading contact-ball samples, all with exact winding
/// numbers and near-surface masking.
pub fn build_scene_pool(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    patches: &[ContactPatch],
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<ScenePool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = cfg.half_extent;
    let mut positions: Vec<Point3> = Vec::new();

    for _ in 0..cfg.uniform {
        positions.push(Point3::new(
            rng.random_range(-h..h),
            rng.random_range(-h..h),
            rng.random_range(-h..h),
        ));
    }
    if cfg.surface > 0 && !mesh.is_empty() {
        let surf = sample_surface(mesh, cfg.surface, rng.random())?;
        for p in surf.points() {
            positions.push(Point3::new(
                p.x + cfg.surface_jitter * gaussian(&mut rng),
                p.y + cfg.surface_jitter * gaussian(&mut rng),
                p.z + cfg.surface_jitter * gaussian(&mut rng),
            ));
        }
    }
    let mut reading_ranges = Vec::new();
    for patch in patches {
        let start = positions.len();
        let pts = patch.points.points();
        if !pts.is_empty() {
            // Query the full radius-r ball around contact points, the same
            // sphere-sampling rule the hand-kinematics path uses.
            for _ in 0..cfg.per_reading {
                let c = pts[rng.random_range(0..pts.len())];
                positions.push(c + uniform_in_ball(&mut rng, cfg.contact_radius));
            }
        }
        reading_ranges.push(start..positions.len());
    }

    let w = winding_number_batch(mesh, bvh, &positions, WindingMode::Exact);
    let usable: Vec<bool> = crate::parallel::map_indexed(positions.len(), |i| {
        bvh.distance(mesh, &positions[i]) > 1e-6
    });
    let entry = |i: usize| PoolEntry {
        pos: positions[i],
        w_star: w[i],
        usable: usable[i],
    };

    let n_base = cfg.uniform + if mesh.is_empty() { 0 } else { cfg.surface };
    let uniform: Vec<PoolEntry> = (0..n_base).map(entry).collect();
    let per_reading: Vec<Vec<PoolEntry>> = reading_ranges
        .into_iter()
        .map(|r| r.map(entry).collect())
        .collect();
    Ok(ScenePool {
        uniform,
        per_reading,
    })
}

/// Draws a batch of `cfg.m` positions: contact-derived candidates from the
/// active readings (capped at `m1_cap_frac * m`), the remainder uniform.
pub fn subsample_batch(
    pool: &ScenePool,
    active_readings: &[bool],
    cfg: &SamplingConfig,
    rng: &mut ChaCha8Rng,
) -> QueryBatch {
    let mut m1_candidates: Vec<(u16, usize)> = Vec::new();
    for (ri, entries) in pool.per_reading.iter().enumerate() {
        if *active_readings.get(ri).unwrap_or(&false) {
            for ei in 0..entries.len() {
                m1_candidates.push((ri as u16, ei));
            }
        }
    }
    let m1_cap = ((cfg.m as f64) * cfg.m1_cap_frac).floor() as usize;
    let m1 = m1_candidates.len().min(m1_cap);
    // Partial Fisher-Yates for a without-replacement draw.
    for k in 0..m1 {
        let j = rng.random_range(k..m1_candidates.len());
        m1_candidates.swap(k, j);
    }

    let m2 = cfg.m.saturating_sub(m1).min(pool.uniform.len());
    let mut uniform_idx: Vec<usize> = (0..pool.uniform.len()).collect();
    for k in 0..m2 {
        let j = rng.random_range(k..uniform_idx.len());
        uniform_idx.swap(k, j);
    }

    let mut positions = Vec::with_capacity(m1 + m2);
    let mut tactile_slot = Vec::with_capacity(m1 + m2);
    let mut w_star = Vec::with_capacity(m1 + m2);
    let mut mask = Vec::with_capacity(m1 + m2);
    for &(ri, ei) in &m1_candidates[..m1] {
        let e = pool.per_reading[ri as usize][ei];
        positions.push(e.pos);
        tactile_slot.push(Some(ri));
        w_star.push(e.w_star);
        mask.push(e.usable);
    }
    for &i in &uniform_idx[..m2] {
        let e = pool.uniform[i];
        positions.push(e.pos);
        tactile_slot.push(None);
        w_star.push(e.w_star);
        mask.push(e.usable);
    }
    QueryBatch {
        positions,
        tactile_slot,
        w_star,
        mask,
        m1,
    }
}

/// One-shot batch sampling against a mesh: builds the pool and subsamples
/// once with every reading active. Deterministic per seed.
pub fn sample_query_batch(
    mesh: &TriangleMesh,
    patches: &[ContactPatch],
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<QueryBatch> {
    if mesh.is_empty() {
        return Err(Error::InvalidMesh("query sampling needs a mesh".into()));
    }
    let bvh = Bvh::build(mesh);
    let pool = build_scene_pool(mesh, &bvh, patches, cfg, seed)?;
    let active = vec![true; patches.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba7c);
    Ok(subsample_batch(&pool, &active, cfg, &mut rng))
}
