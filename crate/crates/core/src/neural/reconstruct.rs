//! Inference: decode the winding-number field on a voxel grid (visual
//! features everywhere, tactile features near contact patches) and extract
//! the surface at iso 0.5.

use super::encoder::{encode_scene, fuse, query_feature, PreparedCloud};
use super::model::ReconModel;
use crate::geom::{GridSpec, PointCloud, TriangleMesh, VoxelGrid};
use crate::metrics::KdTree;
use crate::tactile::{contact_patch, TactileReading};
use crate::wnf::{marching_cubes, WnfGrid};
use crate::{Error, Result};

/// A reconstruction: the decoded field plus its extracted surface.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub wnf: WnfGrid,
    pub mesh: TriangleMesh,
}

/// Per-voxel tactile reading assignment: voxel centers within `radius` of
/// any contact patch point take the nearest patch's feature; ties break by
/// sensor index.
pub fn assign_tactile_to_voxels(
    patches: &[(usize, PointCloud)],
    grid: &GridSpec,
    radius: f64,
) -> Vec<Option<u16>> {
    let trees: Vec<(usize, KdTree)> = patches
        .iter()
        .filter(|(_, pts)| !pts.is_empty())
        .map(|(idx, pts)| (*idx, KdTree::build(pts.points())))
        .collect();
    crate::parallel::map_indexed(grid.voxel_count(), |i| {
        let center = grid.center(grid.voxel_index(i));
        let mut best: Option<(f64, usize)> = None;
        for (ri, tree) in &trees {
            let d = tree.nearest_distance(&center);
            if d <= radius {
                let better = match best {
                    None => true,
                    Some((bd, bi)) => d < bd || (d == bd && *ri < bi),
                };
                if better {
                    best = Some((d, *ri));
                }
            }
        }
        best.map(|(_, ri)| ri as u16)
    })
}

/// Decodes the WNF over `recon_grid` and extracts the mesh at iso 0.5.
///
/// Zero readings give the vision-only reconstruction. Readings without any
/// contact pixel contribute nothing. Adding a duplicate reading cannot
/// change the output (nearest-patch assignment is idempotent over identical
/// patches, ties resolve to the first).
pub fn reconstruct(
    model: &ReconModel,
    cloud: &PointCloud,
    readings: &[TactileReading],
    recon_grid: &GridSpec,
    radius: f64,
) -> Result<Reconstruction> {
    if !model.all_finite() {
        return Err(Error::Model(
            "model parameters are not finite; train or load a checkpoint first".into(),
        ));
    }
    let cfg = &model.cfg;
    let prep = PreparedCloud::new(cfg, cloud)?;
    let enc = encode_scene(model, &prep, None);

    let mut patches: Vec<(usize, PointCloud)> = Vec::new();
    let mut features: Vec<Vec<f64>> = Vec::new();
    for (ri, reading) in readings.iter().enumerate() {
        if reading.image.len() != cfg.tactile_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "reading {ri} has {} pixels, model expects {}",
                reading.image.len(),
                cfg.tactile_pixels()
            )));
        }
        let patch = contact_patch(reading, ri);
        if patch.points.is_empty() {
            continue;
        }
        patches.push((features.len(), patch.points));
        features.push(model.tactile_mlp.forward(&reading.image).output().to_vec());
    }
    let assignment = assign_tactile_to_voxels(&patches, recon_grid, radius);

    let zeros_t = vec![0.0; cfg.d_t];
    let values: Vec<f64> = crate::parallel::map_indexed(recon_grid.voxel_count(), |i| {
        let pos = recon_grid.center(recon_grid.voxel_index(i));
        let (f_p, _) = query_feature(cfg, &enc.acts, &pos);
        let f_t = match assignment[i] {
            Some(s) => &features[s as usize][..],
            None => &zeros_t[..],
        };
        let x_norm = cfg.normalize(&pos);
        let fused = fuse(cfg.fusion, &x_norm, &f_p, f_t).expect("dims validated");
        model.decoder.forward(&fused).output()[0]
    });

    let wnf = VoxelGrid::new(*recon_grid, values)?;
    let mesh = marching_cubes(&wnf, 0.5);
    Ok(Reconstruction { wnf, mesh })
}
