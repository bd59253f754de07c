//! Bias-free convolutions over sparse voxel sets (3D, 3x3x3) and dense plane
//! grids (2D, 3x3). Zero support stays zero, which keeps visual features
//! local to observed geometry and lets training evaluate only needed voxels.

use crate::geom::GridSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// 3x3x3 convolution; weights `w[(k * out + o) * in + i]` with the tap index
/// `k` enumerating offsets `(dx, dy, dz)` in x-fastest order from (-1,-1,-1).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3 {
    pub in_ch: usize,
    pub out_ch: usize,
    pub w: Vec<f64>,
}

pub const TAPS3: usize = 27;

impl Conv3 {
    /// Xavier-uniform with tanh gain over the tap-expanded fans.
    pub fn init(in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let fans = (TAPS3 * (in_ch + out_ch)) as f64;
        let bound = (5.0 / 3.0) * (6.0 / fans).sqrt();
        let w = (0..TAPS3 * in_ch * out_ch)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self { in_ch, out_ch, w }
    }

    pub fn param_count(&self) -> usize {
        self.w.len()
    }
}

/// A sparse set of voxels with per-voxel feature rows.
#[derive(Debug, Clone)]
pub struct SparseFeatures {
    /// Sorted linear voxel indices.
    pub voxels: Vec<usize>,
    /// Row-major features, `voxels.len() x channels`.
    pub feats: Vec<f64>,
    pub channels: usize,
    /// Reverse lookup voxel -> row.
    index: HashMap<usize, u32>,
}

impl SparseFeatures {
    pub fn new(voxels: Vec<usize>, channels: usize) -> Self {
        debug_assert!(voxels.windows(2).all(|w| w[0] < w[1]), "voxels must be sorted unique");
        let feats = vec![0.0; voxels.len() * channels];
        let index = voxels
            .iter()
            .enumerate()
            .map(|(row, &v)| (v, row as u32))
            .collect();
        Self {
            voxels,
            feats,
            channels,
            index,
        }
    }

    pub fn row_of(&self, voxel: usize) -> Option<usize> {
        self.index.get(&voxel).map(|&r| r as usize)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.feats[r * self.channels..(r + 1) * self.channels]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.feats[r * self.channels..(r + 1) * self.channels]
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.feats.len()]
    }
}

/// Offset of tap `k` applied to voxel `v` inside `spec`, if in bounds.
fn tap_neighbor(spec: &GridSpec, v: usize, k: usize) -> Option<usize> {
    let [x, y, z] = spec.voxel_index(v);
    let dx = (k % 3) as isize - 1;
    let dy = ((k / 3) % 3) as isize - 1;
    let dz = (k / 9) as isize - 1;
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    let nz = z as isize + dz;
    if nx < 0
        || ny < 0
        || nz < 0
        || nx >= spec.dims[0] as isize
        || ny >= spec.dims[1] as isize
        || nz >= spec.dims[2] as isize
    {
        return None;
    }
    Some(spec.linear_index([nx as usize, ny as usize, nz as usize]))
}

/// Sorted, deduplicated 1-neighborhood dilation of a sorted voxel set.
pub fn dilate(spec: &GridSpec, voxels: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(voxels.len() * TAPS3);
    for &v in voxels {
        for k in 0..TAPS3 {
            if let Some(n) = tap_neighbor(spec, v, k) {
                out.push(n);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Sorted intersection of two sorted sets.
pub fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Forward sparse conv: `out(v) = sum_k W_k * in(v + off_k)` over present
/// inputs, evaluated at `outputs.voxels`.
pub fn conv3_forward(
    conv: &Conv3,
    spec: &GridSpec,
    inputs: &SparseFeatures,
    outputs: &mut SparseFeatures,
) {
    debug_assert_eq!(inputs.channels, conv.in_ch);
    debug_assert_eq!(outputs.channels, conv.out_ch);
    for vi in 0..outputs.len() {
        let v = outputs.voxels[vi];
        // Split-borrow: output row written after gathering.
        let mut acc = vec![0.0; conv.out_ch];
        for k in 0..TAPS3 {
            let Some(n) = tap_neighbor(spec, v, k) else {
                continue;
            };
            let Some(ur) = inputs.row_of(n) else { continue };
            let x = inputs.row(ur);
            let wk = &conv.w[k * conv.out_ch * conv.in_ch..(k + 1) * conv.out_ch * conv.in_ch];
            for o in 0..conv.out_ch {
                let row = &wk[o * conv.in_ch..(o + 1) * conv.in_ch];
                let mut s = 0.0;
                for (wi, xi) in row.iter().zip(x) {
                    s += wi * xi;
                }
                acc[o] += s;
            }
        }
        outputs.row_mut(vi).copy_from_slice(&acc);
    }
}

/// Backward sparse conv: scatters gradients to the input rows and
/// accumulates weight gradients.
pub fn conv3_backward(
    conv: &Conv3,
    spec: &GridSpec,
    inputs: &SparseFeatures,
    outputs: &SparseFeatures,
    d_out: &[f64],
    d_in: &mut [f64],
    gw: &mut [f64],
) {
    debug_assert_eq!(d_out.len(), outputs.feats.len());
    debug_assert_eq!(d_in.len(), inputs.feats.len());
    debug_assert_eq!(gw.len(), conv.w.len());
    for vi in 0..outputs.len() {
        let v = outputs.voxels[vi];
        let dy = &d_out[vi * conv.out_ch..(vi + 1) * conv.out_ch];
        for k in 0..TAPS3 {
            let Some(n) = tap_neighbor(spec, v, k) else {
                continue;
            };
            let Some(ur) = inputs.row_of(n) else { continue };
            let x = inputs.row(ur);
            let dx = &mut d_in[ur * conv.in_ch..(ur + 1) * conv.in_ch];
            let base = k * conv.out_ch * conv.in_ch;
            for o in 0..conv.out_ch {
                let g = dy[o];
                if g == 0.0 {
                    continue;
                }
                let row = &conv.w[base + o * conv.in_ch..base + (o + 1) * conv.in_ch];
                let grow = &mut gw[base + o * conv.in_ch..base + (o + 1) * conv.in_ch];
                for i in 0..conv.in_ch {
                    dx[i] += g * row[i];
                    grow[i] += g * x[i];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dense 2D plane convolution (multi-plane encoder variant)
// ---------------------------------------------------------------------------

/// 3x3 convolution on a dense d x d plane; weights
/// `w[(k * out + o) * in + i]`, taps x-fastest from (-1,-1).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2 {
    pub in_ch: usize,
    pub out_ch: usize,
    pub w: Vec<f64>,
}

pub const TAPS2: usize = 9;

impl Conv2 {
    pub fn init(in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let fans = (TAPS2 * (in_ch + out_ch)) as f64;
        let bound = (5.0 / 3.0) * (6.0 / fans).sqrt();
        let w = (0..TAPS2 * in_ch * out_ch)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self { in_ch, out_ch, w }
    }
}

/// `input` and `output` are `d*d x ch` row-major (pixel-major).
pub fn conv2_forward(conv: &Conv2, d: usize, input: &[f64], output: &mut [f64]) {
    debug_assert_eq!(input.len(), d * d * conv.in_ch);
    debug_assert_eq!(output.len(), d * d * conv.out_ch);
    output.fill(0.0);
    for py in 0..d {
        for px in 0..d {
            let pi = py * d + px;
            let out_row = pi * conv.out_ch;
            for k in 0..TAPS2 {
                let dx = (k % 3) as isize - 1;
                let dy = (k / 3) as isize - 1;
                let nx = px as isize + dx;
                let ny = py as isize + dy;
                if nx < 0 || ny < 0 || nx >= d as isize || ny >= d as isize {
                    continue;
                }
                let ni = (ny as usize * d + nx as usize) * conv.in_ch;
                let x = &input[ni..ni + conv.in_ch];
                let wk = &conv.w[k * conv.out_ch * conv.in_ch..(k + 1) * conv.out_ch * conv.in_ch];
                for o in 0..conv.out_ch {
                    let row = &wk[o * conv.in_ch..(o + 1) * conv.in_ch];
                    let mut s = 0.0;
                    for (wi, xi) in row.iter().zip(x) {
                        s += wi * xi;
                    }
                    output[out_row + o] += s;
                }
            }
        }
    }
}

pub fn conv2_backward(
    conv: &Conv2,
    d: usize,
    input: &[f64],
    d_out: &[f64],
    d_in: &mut [f64],
    gw: &mut [f64],
) {
    for py in 0..d {
        for px in 0..d {
            let pi = py * d + px;
            let dy_row = &d_out[pi * conv.out_ch..(pi + 1) * conv.out_ch];
            for k in 0..TAPS2 {
                let dx = (k % 3) as isize - 1;
                let dyo = (k / 3) as isize - 1;
                let nx = px as isize + dx;
                let ny = py as isize + dyo;
                if nx < 0 || ny < 0 || nx >= d as isize || ny >= d as isize {
                    continue;
                }
                let ni = (ny as usize * d + nx as usize) * conv.in_ch;
                let x = &input[ni..ni + conv.in_ch];
                let base = k * conv.out_ch * conv.in_ch;
                for o in 0..conv.out_ch {
                    let g = dy_row[o];
                    if g == 0.0 {
                        continue;
                    }
                    let row = &conv.w[base + o * conv.in_ch..base + (o + 1) * conv.in_ch];
                    for i in 0..conv.in_ch {
                        d_in[ni + i] += g * row[i];
                        gw[base + o * conv.in_ch + i] += g * x[i];
                    }
                }
            }
        }
    }
}
