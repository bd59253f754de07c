//! Visual feature encoders and the per-query feature path.
//!
//! Volume variant: per-point MLP, mean-pool into feature-grid voxels, two
//! bias-free 3x3x3 convolutions with tanh. Because zero stays zero, only
//! voxels reachable from observed points can be nonzero, and training
//! evaluates just the voxels its queries touch (bit-identical to the dense
//! evaluation).
//!
//! Multi-plane variant: the same point features mean-pooled onto the xy, xz
//! and yz planes, two dense 3x3 convolutions per plane, query features are
//! the sum of three bilinear lookups.
//!
//! Pooling iterates points in a canonical coordinate order, so encoders are
//! exactly permutation-invariant in the input cloud.

use super::conv::{
    conv2_backward, conv2_forward, conv3_backward, conv3_forward, dilate, intersect_sorted,
    SparseFeatures,
};
use super::model::{EncoderKind, ModelConfig, ModelGrads, ReconModel, VisualEncoder};
use super::nn::MlpTrace;
use crate::geom::{GridSpec, Point3, PointCloud};
use crate::{Error, Result};

/// A cloud preprocessed against a model's feature grid: normalized point
/// coordinates, voxel/pixel bins in canonical order, and dilated active sets.
#[derive(Debug, Clone)]
pub struct PreparedCloud {
    pub points_norm: Vec<[f64; 3]>,
    /// Sorted occupied voxel indices.
    pub occupied: Vec<usize>,
    /// CSR over `occupied`: per-voxel point ids in canonical order.
    pub csr_offsets: Vec<u32>,
    pub csr_points: Vec<u32>,
    pub active1: Vec<usize>,
    pub active2: Vec<usize>,
    /// Per plane: per-point pixel id, plus dense per-pixel point counts.
    pub plane_pixel: [Vec<u32>; 3],
    pub plane_counts: [Vec<u32>; 3],
    /// Point ids sorted by coordinates (canonical accumulation order).
    pub canonical: Vec<u32>,
}

impl PreparedCloud {
    pub fn new(cfg: &ModelConfig, cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty cloud".into()));
        }
        let grid = cfg.feature_grid();
        let d = cfg.feat_res;
        let points_norm: Vec<[f64; 3]> = cloud.points().iter().map(|p| cfg.normalize(p)).collect();

        let mut canonical: Vec<u32> = (0..cloud.len() as u32).collect();
        canonical.sort_unstable_by(|&a, &b| {
            let pa = &points_norm[a as usize];
            let pb = &points_norm[b as usize];
            pa[0].total_cmp(&pb[0])
                .then(pa[1].total_cmp(&pb[1]))
                .then(pa[2].total_cmp(&pb[2]))
        });

        // Voxel of each point, clamped into the grid.
        let voxel_of = |p: &Point3| -> usize {
            let mut idx = [0usize; 3];
            for k in 0..3 {
                let f = ((p[k] - grid.origin[k]) / grid.spacing).floor();
                idx[k] = (f.max(0.0) as usize).min(grid.dims[k] - 1);
            }
            grid.linear_index(idx)
        };
        let mut bins: std::collections::BTreeMap<usize, Vec<u32>> = std::collections::BTreeMap::new();
        for &pid in &canonical {
            let v = voxel_of(&cloud.points()[pid as usize]);
            bins.entry(v).or_default().push(pid);
        }
        let occupied: Vec<usize> = bins.keys().copied().collect();
        let mut csr_offsets = Vec::with_capacity(occupied.len() + 1);
        let mut csr_points = Vec::with_capacity(cloud.len());
        csr_offsets.push(0u32);
        for ids in bins.values() {
            csr_points.extend_from_slice(ids);
            csr_offsets.push(csr_points.len() as u32);
        }

        let active1 = dilate(&grid, &occupied);
        let active2 = dilate(&grid, &active1);

        // Planes: 0 = xy, 1 = xz, 2 = yz.
        let axes: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
        let mut plane_pixel: [Vec<u32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut plane_counts: [Vec<u32>; 3] = [vec![0; d * d], vec![0; d * d], vec![0; d * d]];
        for (pl, &(a0, a1)) in axes.iter().enumerate() {
            plane_pixel[pl] = cloud
                .points()
                .iter()
                .map(|p| {
                    let mut ij = [0usize; 2];
                    for (slot, &ax) in ij.iter_mut().zip([a0, a1].iter()) {
                        let f = ((p[ax] - grid.origin[ax]) / grid.spacing).floor();
                        *slot = (f.max(0.0) as usize).min(d - 1);
                    }
                    (ij[1] * d + ij[0]) as u32
                })
                .collect();
            for &px in &plane_pixel[pl] {
                plane_counts[pl][px as usize] += 1;
            }
        }

        Ok(Self {
            points_norm,
            occupied,
            csr_offsets,
            csr_points,
            active1,
            active2,
            plane_pixel,
            plane_counts,
            canonical,
        })
    }

    pub fn point_count(&self) -> usize {
        self.points_norm.len()
    }
}

/// Post-activation feature maps of one encoder forward pass.
#[derive(Debug, Clone)]
pub enum EncoderActivations {
    Volume {
        pooled: SparseFeatures,
        layer1: SparseFeatures,
        layer2: SparseFeatures,
    },
    MultiPlane {
        pooled: [Vec<f64>; 3],
        layer1: [Vec<f64>; 3],
        layer2: [Vec<f64>; 3],
    },
}

/// Forward caches for one scene (point traces + encoder activations).
#[derive(Debug, Clone)]
pub struct EncodedScene {
    pub traces: Vec<MlpTrace>,
    pub acts: EncoderActivations,
}

/// Runs the encoder. `needed2` restricts which final-layer voxels are
/// evaluated (training); `None` evaluates the full nonzero support.
pub fn encode_scene(
    model: &ReconModel,
    prep: &PreparedCloud,
    needed2: Option<&[usize]>,
) -> EncodedScene {
    let cfg = &model.cfg;
    let grid = cfg.feature_grid();
    let traces: Vec<MlpTrace> = prep
        .points_norm
        .iter()
        .map(|p| model.point_mlp.forward(p))
        .collect();

    let acts = match &model.visual {
        VisualEncoder::Volume { conv1, conv2 } => {
            let mut pooled = SparseFeatures::new(prep.occupied.clone(), cfg.d_p);
            pool_voxels(prep, &traces, &mut pooled);
            let needed2_set = match needed2 {
                Some(req) => intersect_sorted(req, &prep.active2),
                None => prep.active2.clone(),
            };
            let needed1 = intersect_sorted(&dilate(&grid, &needed2_set), &prep.active1);
            let mut layer1 = SparseFeatures::new(needed1, cfg.d_p);
            conv3_forward(conv1, &grid, &pooled, &mut layer1);
            layer1.feats.iter_mut().for_each(|v| *v = v.tanh());
            let mut layer2 = SparseFeatures::new(needed2_set, cfg.d_p);
            conv3_forward(conv2, &grid, &layer1, &mut layer2);
            layer2.feats.iter_mut().for_each(|v| *v = v.tanh());
            EncoderActivations::Volume {
                pooled,
                layer1,
                layer2,
            }
        }
        VisualEncoder::MultiPlane { convs } => {
            let d = cfg.feat_res;
            let ch = cfg.d_p;
            let mut pooled: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; d * d * ch]);
            for pl in 0..3 {
                for &pid in &prep.canonical {
                    let px = prep.plane_pixel[pl][pid as usize] as usize;
                    let feat = traces[pid as usize].output();
                    let row = &mut pooled[pl][px * ch..(px + 1) * ch];
                    for (slot, &f) in row.iter_mut().zip(feat) {
                        *slot += f;
                    }
                }
                for px in 0..d * d {
                    let n = prep.plane_counts[pl][px];
                    if n > 1 {
                        let row = &mut pooled[pl][px * ch..(px + 1) * ch];
                        row.iter_mut().for_each(|v| *v /= n as f64);
                    }
                }
            }
            let mut layer1: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; d * d * ch]);
            let mut layer2: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; d * d * ch]);
            for pl in 0..3 {
                conv2_forward(&convs[pl].0, d, &pooled[pl], &mut layer1[pl]);
                layer1[pl].iter_mut().for_each(|v| *v = v.tanh());
                conv2_forward(&convs[pl].1, d, &layer1[pl], &mut layer2[pl]);
                layer2[pl].iter_mut().for_each(|v| *v = v.tanh());
            }
            EncoderActivations::MultiPlane {
                pooled,
                layer1,
                layer2,
            }
        }
    };
    EncodedScene { traces, acts }
}

fn pool_voxels(prep: &PreparedCloud, traces: &[MlpTrace], pooled: &mut SparseFeatures) {
    let ch = pooled.channels;
    for r in 0..prep.occupied.len() {
        let lo = prep.csr_offsets[r] as usize;
        let hi = prep.csr_offsets[r + 1] as usize;
        let mut acc = vec![0.0; ch];
        for &pid in &prep.csr_points[lo..hi] {
            for (slot, &f) in acc.iter_mut().zip(traces[pid as usize].output()) {
                *slot += f;
            }
        }
        let n = (hi - lo) as f64;
        acc.iter_mut().for_each(|v| *v /= n);
        pooled.row_mut(r).copy_from_slice(&acc);
    }
}

/// Where a query's visual feature came from, for gradient scatter.
#[derive(Debug, Clone)]
pub enum QuerySupport {
    /// (row in layer2, trilinear weight), present corners only.
    Volume(Vec<(u32, f64)>),
    /// Per plane: (pixel, bilinear weight).
    MultiPlane([Vec<(u32, f64)>; 3]),
}

/// Interpolated visual feature at a world position.
pub fn query_feature(
    cfg: &ModelConfig,
    acts: &EncoderActivations,
    pos: &Point3,
) -> (Vec<f64>, QuerySupport) {
    let grid = cfg.feature_grid();
    match acts {
        EncoderActivations::Volume { layer2, .. } => {
            let mut feat = vec![0.0; cfg.d_p];
            let mut support = Vec::with_capacity(8);
            let mut g = [0.0f64; 3];
            for k in 0..3 {
                g[k] = (pos[k] - grid.origin[k]) / grid.spacing - 0.5;
            }
            let base = g.map(|v| v.floor());
            let frac = [g[0] - base[0], g[1] - base[1], g[2] - base[2]];
            for corner in 0..8usize {
                let mut idx = [0isize; 3];
                let mut weight = 1.0;
                for k in 0..3 {
                    let bit = (corner >> k) & 1;
                    idx[k] = base[k] as isize + bit as isize;
                    weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                }
                if weight == 0.0 {
                    continue;
                }
                if idx.iter().any(|&i| i < 0)
                    || idx[0] >= grid.dims[0] as isize
                    || idx[1] >= grid.dims[1] as isize
                    || idx[2] >= grid.dims[2] as isize
                {
                    continue;
                }
                let lin = grid.linear_index([idx[0] as usize, idx[1] as usize, idx[2] as usize]);
                if let Some(row) = layer2.row_of(lin) {
                    let f = layer2.row(row);
                    for (slot, &v) in feat.iter_mut().zip(f) {
                        *slot += weight * v;
                    }
                    support.push((row as u32, weight));
                }
            }
            (feat, QuerySupport::Volume(support))
        }
        EncoderActivations::MultiPlane { layer2, .. } => {
            let d = cfg.feat_res;
            let ch = cfg.d_p;
            let axes: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
            let mut feat = vec![0.0; ch];
            let mut support: [Vec<(u32, f64)>; 3] = std::array::from_fn(|_| Vec::with_capacity(4));
            for (pl, &(a0, a1)) in axes.iter().enumerate() {
                let gx = (pos[a0] - grid.origin[a0]) / grid.spacing - 0.5;
                let gy = (pos[a1] - grid.origin[a1]) / grid.spacing - 0.5;
                let bx = gx.floor();
                let by = gy.floor();
                let fx = gx - bx;
                let fy = gy - by;
                for corner in 0..4usize {
                    let cx = bx as isize + (corner & 1) as isize;
                    let cy = by as isize + ((corner >> 1) & 1) as isize;
                    let w = (if corner & 1 == 1 { fx } else { 1.0 - fx })
                        * (if corner >> 1 == 1 { fy } else { 1.0 - fy });
                    if w == 0.0 || cx < 0 || cy < 0 || cx >= d as isize || cy >= d as isize {
                        continue;
                    }
                    let px = cy as usize * d + cx as usize;
                    let row = &layer2[pl][px * ch..(px + 1) * ch];
                    for (slot, &v) in feat.iter_mut().zip(row) {
                        *slot += w * v;
                    }
                    support[pl].push((px as u32, w));
                }
            }
            (feat, QuerySupport::MultiPlane(support))
        }
    }
}

/// Gradient buffers for the encoder's final layer, matching the activations.
#[derive(Debug, Clone)]
pub enum EncoderGrad {
    Volume(Vec<f64>),
    MultiPlane([Vec<f64>; 3]),
}

impl EncoderGrad {
    pub fn zeros(acts: &EncoderActivations) -> Self {
        match acts {
            EncoderActivations::Volume { layer2, .. } => EncoderGrad::Volume(layer2.zeros_like()),
            EncoderActivations::MultiPlane { layer2, .. } => {
                EncoderGrad::MultiPlane(std::array::from_fn(|pl| vec![0.0; layer2[pl].len()]))
            }
        }
    }

    /// Scatters a query's visual-feature gradient through its support.
    pub fn scatter(&mut self, support: &QuerySupport, d_feat: &[f64]) {
        match (self, support) {
            (EncoderGrad::Volume(buf), QuerySupport::Volume(entries)) => {
                let ch = d_feat.len();
                for &(row, w) in entries {
                    let r = row as usize;
                    for (slot, &g) in buf[r * ch..(r + 1) * ch].iter_mut().zip(d_feat) {
                        *slot += w * g;
                    }
                }
            }
            (EncoderGrad::MultiPlane(bufs), QuerySupport::MultiPlane(planes)) => {
                let ch = d_feat.len();
                for (buf, entries) in bufs.iter_mut().zip(planes) {
                    for &(px, w) in entries {
                        let p = px as usize;
                        for (slot, &g) in buf[p * ch..(p + 1) * ch].iter_mut().zip(d_feat) {
                            *slot += w * g;
                        }
                    }
                }
            }
            _ => unreachable!("support kind matches encoder kind"),
        }
    }
}

/// Backward through the encoder: final-layer gradients -> convolutions ->
/// mean-pool -> point MLP, accumulating into `grads`.
pub fn encoder_backward(
    model: &ReconModel,
    prep: &PreparedCloud,
    enc: &EncodedScene,
    d_final: EncoderGrad,
    grads: &mut ModelGrads,
) {
    let cfg = &model.cfg;
    let grid = cfg.feature_grid();
    match (&model.visual, &enc.acts, d_final) {
        (
            VisualEncoder::Volume { conv1, conv2 },
            EncoderActivations::Volume {
                pooled,
                layer1,
                layer2,
            },
            EncoderGrad::Volume(mut d_l2),
        ) => {
            // tanh' on layer 2.
            for (d, &y) in d_l2.iter_mut().zip(&layer2.feats) {
                *d *= 1.0 - y * y;
            }
            let mut d_l1 = layer1.zeros_like();
            conv3_backward(conv2, &grid, layer1, layer2, &d_l2, &mut d_l1, &mut grads.visual[1]);
            for (d, &y) in d_l1.iter_mut().zip(&layer1.feats) {
                *d *= 1.0 - y * y;
            }
            let mut d_pooled = pooled.zeros_like();
            conv3_backward(conv1, &grid, pooled, layer1, &d_l1, &mut d_pooled, &mut grads.visual[0]);
            // Mean-pool backward into the point MLP.
            let ch = cfg.d_p;
            for r in 0..prep.occupied.len() {
                let lo = prep.csr_offsets[r] as usize;
                let hi = prep.csr_offsets[r + 1] as usize;
                let row = &d_pooled[r * ch..(r + 1) * ch];
                if row.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let n = (hi - lo) as f64;
                let d_point: Vec<f64> = row.iter().map(|&v| v / n).collect();
                for &pid in &prep.csr_points[lo..hi] {
                    model
                        .point_mlp
                        .backward(&enc.traces[pid as usize], &d_point, &mut grads.point);
                }
            }
        }
        (
            VisualEncoder::MultiPlane { convs },
            EncoderActivations::MultiPlane {
                pooled,
                layer1,
                layer2,
            },
            EncoderGrad::MultiPlane(d_l2),
        ) => {
            let d = cfg.feat_res;
            let ch = cfg.d_p;
            let mut d_pooled: [Vec<f64>; 3] = std::array::from_fn(|pl| vec![0.0; pooled[pl].len()]);
            for pl in 0..3 {
                let mut d2 = d_l2[pl].clone();
                for (g, &y) in d2.iter_mut().zip(&layer2[pl]) {
                    *g *= 1.0 - y * y;
                }
                let mut d1 = vec![0.0; layer1[pl].len()];
                conv2_backward(
                    &convs[pl].1,
                    d,
                    &layer1[pl],
                    &d2,
                    &mut d1,
                    &mut grads.visual[pl * 2 + 1],
                );
                for (g, &y) in d1.iter_mut().zip(&layer1[pl]) {
                    *g *= 1.0 - y * y;
                }
                conv2_backward(
                    &convs[pl].0,
                    d,
                    &pooled[pl],
                    &d1,
                    &mut d_pooled[pl],
                    &mut grads.visual[pl * 2],
                );
            }
            // Each point feeds one pixel per plane; combine before the MLP.
            for pid in 0..prep.point_count() {
                let mut d_point = vec![0.0; ch];
                let mut any = false;
                for pl in 0..3 {
                    let px = prep.plane_pixel[pl][pid] as usize;
                    let n = prep.plane_counts[pl][px] as f64;
                    let row = &d_pooled[pl][px * ch..(px + 1) * ch];
                    for (slot, &v) in d_point.iter_mut().zip(row) {
                        if v != 0.0 {
                            any = true;
                        }
                        *slot += v / n;
                    }
                }
                if any {
                    model
                        .point_mlp
                        .backward(&enc.traces[pid], &d_point, &mut grads.point);
                }
            }
        }
        _ => unreachable!("activation kind matches encoder kind"),
    }
}

// ---------------------------------------------------------------------------
// Public dense products
// ---------------------------------------------------------------------------

/// A dense per-voxel feature field (zeros outside the observed support).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub grid: GridSpec,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureVolume {
    /// Trilinear feature lookup at a world position.
    pub fn sample(&self, pos: &Point3) -> Vec<f64> {
        let grid = &self.grid;
        let ch = self.channels;
        let mut feat = vec![0.0; ch];
        let mut g = [0.0f64; 3];
        for k in 0..3 {
            g[k] = (pos[k] - grid.origin[k]) / grid.spacing - 0.5;
        }
        let base = g.map(|v| v.floor());
        let frac = [g[0] - base[0], g[1] - base[1], g[2] - base[2]];
        for corner in 0..8usize {
            let mut idx = [0isize; 3];
            let mut weight = 1.0;
            for k in 0..3 {
                let bit = (corner >> k) & 1;
                idx[k] = base[k] as isize + bit as isize;
                weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if weight == 0.0
                || idx.iter().any(|&i| i < 0)
                || idx[0] >= grid.dims[0] as isize
                || idx[1] >= grid.dims[1] as isize
                || idx[2] >= grid.dims[2] as isize
            {
                continue;
            }
            let lin = grid.linear_index([idx[0] as usize, idx[1] as usize, idx[2] as usize]);
            for (slot, &v) in feat.iter_mut().zip(&self.data[lin * ch..(lin + 1) * ch]) {
                *slot += weight * v;
            }
        }
        feat
    }
}

/// Dense volume encoding of a cloud (volume-variant models).
pub fn encode_visual(model: &ReconModel, cloud: &PointCloud) -> Result<FeatureVolume> {
    if model.cfg.encoder != EncoderKind::Volume {
        return Err(Error::Model("encode_visual needs a volume-encoder model".into()));
    }
    let prep = PreparedCloud::new(&model.cfg, cloud)?;
    let enc = encode_scene(model, &prep, None);
    let grid = model.cfg.feature_grid();
    let ch = model.cfg.d_p;
    let mut data = vec![0.0; grid.voxel_count() * ch];
    if let EncoderActivations::Volume { layer2, .. } = &enc.acts {
        for (r, &v) in layer2.voxels.iter().enumerate() {
            data[v * ch..(v + 1) * ch].copy_from_slice(layer2.row(r));
        }
    }
    Ok(FeatureVolume {
        grid,
        channels: ch,
        data,
    })
}

/// Three dense plane feature maps (multi-plane models).
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFeatureMaps {
    pub d: usize,
    pub channels: usize,
    pub planes: [Vec<f64>; 3],
}

pub fn encode_visual_multiplane(model: &ReconModel, cloud: &PointCloud) -> Result<PlaneFeatureMaps> {
    if model.cfg.encoder != EncoderKind::MultiPlane {
        return Err(Error::Model(
            "encode_visual_multiplane needs a multi-plane model".into(),
        ));
    }
    let prep = PreparedCloud::new(&model.cfg, cloud)?;
    let enc = encode_scene(model, &prep, None);
    match enc.acts {
        EncoderActivations::MultiPlane { layer2, .. } => Ok(PlaneFeatureMaps {
            d: model.cfg.feat_res,
            channels: model.cfg.d_p,
            planes: layer2,
        }),
        _ => unreachable!(),
    }
}

/// Combines a normalized position with visual and tactile features:
/// addition gives `[x | F_p + F_t]`, concat gives `[x | F_p | F_t]`.
pub fn fuse(
    mode: super::model::FusionMode,
    x_norm: &[f64; 3],
    f_p: &[f64],
    f_t: &[f64],
) -> Result<Vec<f64>> {
    match mode {
        super::model::FusionMode::Addition => {
            if f_p.len() != f_t.len() {
                return Err(Error::Model(format!(
                    "addition fusion needs matching dims, got {} vs {}",
                    f_p.len(),
                    f_t.len()
                )));
            }
            let mut out = Vec::with_capacity(3 + f_p.len());
            out.extend_from_slice(x_norm);
            out.extend(f_p.iter().zip(f_t).map(|(a, b)| a + b));
            Ok(out)
        }
        super::model::FusionMode::Concat => {
            let mut out = Vec::with_capacity(3 + f_p.len() + f_t.len());
            out.extend_from_slice(x_norm);
            out.extend_from_slice(f_p);
            out.extend_from_slice(f_t);
            Ok(out)
        }
    }
}

/// Decoder forward with a dimension check: one winding-number prediction.
pub fn decode_wnf(model: &ReconModel, fused: &[f64]) -> Result<f64> {
    if fused.len() != model.decoder.in_dim() {
        return Err(Error::Model(format!(
            "fused feature dim {} does not match decoder input {}",
            fused.len(),
            model.decoder.in_dim()
        )));
    }
    Ok(model.decoder.forward(fused).output()[0])
}
