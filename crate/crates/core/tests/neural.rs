//! Oracle suite for the learnable core: finite-difference gradient checks on
//! every parameter block, encoder receptive-field traces, fusion dimensions,
//! an independent decoder re-implementation, and training determinism.

use recon_core::datagen::icosphere;
use recon_core::geom::{sample_surface, Point3, PointCloud, RigidTransform, Vector3};
use recon_core::neural::*;
use recon_core::tactile::{render_tactile, TactileSensorSpec};
use recon_core::wnf::Bvh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sensor_spec() -> TactileSensorSpec {
    TactileSensorSpec::new(12, 8, [0.12, 0.08], 0.08, 0.03).unwrap()
}

fn sensor_pose_touching(mesh_radius: f64, dir: Vector3, spec: &TactileSensorSpec) -> RigidTransform {
    let n = dir.normalize();
    let surface = Point3::from(n * mesh_radius);
    let eye = Point3::from(n * (mesh_radius + spec.gel_rest_depth - 0.5 * spec.max_indentation));
    let up = if n.x.abs() < 0.9 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(0.0, 1.0, 0.0)
    };
    RigidTransform::look_at(eye, surface, up).unwrap()
}

fn small_sampling() -> SamplingConfig {
    SamplingConfig {
        uniform: 400,
        surface: 150,
        per_reading: 150,
        m: 64,
        ..SamplingConfig::default()
    }
}

/// A small synthetic grasp scene: icosphere, partial cloud, two sensors.
fn make_scene(cfg: &ModelConfig, with_tactile: bool) -> TrainScene {
    let mesh = icosphere(0.4, 2);
    let bvh = Bvh::build(&mesh);
    let spec = sensor_spec();
    let cloud = sample_surface(&mesh, 300, 17).unwrap();
    let prep = PreparedCloud::new(cfg, &cloud).unwrap();

    let mut readings = Vec::new();
    if with_tactile {
        for dir in [Vector3::new(1.0, 0.2, 0.0), Vector3::new(-0.8, 0.5, 0.3)] {
            let pose = sensor_pose_touching(0.4, dir, &spec);
            readings.push(render_tactile(&mesh, &pose, &spec));
        }
    }
    let patches: Vec<recon_core::tactile::ContactPatch> = readings
        .iter()
        .enumerate()
        .map(|(i, r)| recon_core::tactile::contact_patch(r, i))
        .collect();
    for p in &patches {
        assert!(!p.points.is_empty(), "test sensors must touch the sphere");
    }
    let pool = build_scene_pool(&mesh, &bvh, &patches, &small_sampling(), 5).unwrap();
    TrainScene {
        prep,
        pool,
        tactile_images: readings.iter().map(|r| r.image.clone()).collect(),
        reading_grasp: (0..readings.len()).map(|_| 0).collect(),
        grasp_count: if readings.is_empty() { 0 } else { 1 },
    }
}

#[test]
fn gradient_check_volume_addition() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let mut model = ReconModel::init(cfg.clone(), 42).unwrap();
    let scene = make_scene(&cfg, true);
    let report = gradient_check(&mut model, &scene, 7, 6);
    for (name, err) in &report.blocks {
        assert!(err <= &1e-4, "block {name} rel err {err}");
    }
}

#[test]
fn gradient_check_multiplane_concat() {
    let mut cfg = ModelConfig::desk(16, 12, 8);
    cfg.encoder = EncoderKind::MultiPlane;
    cfg.fusion = FusionMode::Concat;
    let mut model = ReconModel::init(cfg.clone(), 43).unwrap();
    let scene = make_scene(&cfg, true);
    let report = gradient_check(&mut model, &scene, 8, 6);
    for (name, err) in &report.blocks {
        assert!(err <= &1e-4, "block {name} rel err {err}");
    }
}

#[test]
fn zero_parameters_give_zero_volume() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let mut model = ReconModel::init(cfg.clone(), 1).unwrap();
    for block in model.blocks_mut() {
        block.fill(0.0);
    }
    let cloud = sample_surface(&icosphere(0.4, 2), 100, 3).unwrap();
    let vol = encode_visual(&model, &cloud).unwrap();
    assert!(vol.data.iter().all(|&v| v == 0.0));
}

#[test]
fn encoder_is_permutation_invariant_bit_exact() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 2).unwrap();
    let cloud = sample_surface(&icosphere(0.4, 2), 200, 4).unwrap();
    let mut pts = cloud.points().to_vec();
    let vol1 = encode_visual(&model, &PointCloud::new(pts.clone()).unwrap()).unwrap();
    // Reverse and rotate the ordering.
    pts.reverse();
    pts.rotate_left(37);
    let vol2 = encode_visual(&model, &PointCloud::new(pts).unwrap()).unwrap();
    assert_eq!(vol1.data.len(), vol2.data.len());
    for (a, b) in vol1.data.iter().zip(&vol2.data) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn single_point_receptive_field_is_local() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 3).unwrap();
    let p = Point3::new(0.1, -0.2, 0.3);
    let cloud = PointCloud::new(vec![p]).unwrap();
    let vol = encode_visual(&model, &cloud).unwrap();
    let grid = cfg.feature_grid();
    let home = grid.world_to_index(&p).unwrap();
    let mut nonzero = 0;
    for i in 0..grid.voxel_count() {
        let any = vol.data[i * vol.channels..(i + 1) * vol.channels]
            .iter()
            .any(|&v| v != 0.0);
        if any {
            nonzero += 1;
            let idx = grid.voxel_index(i);
            for k in 0..3 {
                let d = (idx[k] as isize - home[k] as isize).abs();
                assert!(d <= 2, "voxel {idx:?} outside two-conv neighborhood of {home:?}");
            }
        }
    }
    assert!(nonzero > 0);
}

#[test]
fn multiplane_single_point_locality_and_zero_params() {
    let mut cfg = ModelConfig::desk(16, 12, 8);
    cfg.encoder = EncoderKind::MultiPlane;
    let mut model = ReconModel::init(cfg.clone(), 4).unwrap();
    let p = Point3::new(0.1, -0.2, 0.3);
    let cloud = PointCloud::new(vec![p]).unwrap();
    let maps = encode_visual_multiplane(&model, &cloud).unwrap();
    let grid = cfg.feature_grid();
    let home = grid.world_to_index(&p).unwrap();
    let homes = [[home[0], home[1]], [home[0], home[2]], [home[1], home[2]]];
    for (pl, plane) in maps.planes.iter().enumerate() {
        let d = maps.d;
        let mut nonzero = 0;
        for py in 0..d {
            for px in 0..d {
                let any = plane[(py * d + px) * maps.channels..(py * d + px + 1) * maps.channels]
                    .iter()
                    .any(|&v| v != 0.0);
                if any {
                    nonzero += 1;
                    assert!(
                        (px as isize - homes[pl][0] as isize).abs() <= 2
                            && (py as isize - homes[pl][1] as isize).abs() <= 2,
                        "plane {pl} pixel ({px},{py}) outside neighborhood of {:?}",
                        homes[pl]
                    );
                }
            }
        }
        assert!(nonzero > 0, "plane {pl} all zero");
    }
    // Zero params give zero planes.
    for block in model.blocks_mut() {
        block.fill(0.0);
    }
    let maps = encode_visual_multiplane(&model, &cloud).unwrap();
    for plane in &maps.planes {
        assert!(plane.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn fusion_dimensions_and_commutativity() {
    let x = [0.1, 0.2, 0.3];
    let fp: Vec<f64> = (0..32).map(|i| i as f64 * 0.01).collect();
    let ft: Vec<f64> = (0..32).map(|i| -(i as f64) * 0.02).collect();
    let added = fuse(FusionMode::Addition, &x, &fp, &ft).unwrap();
    assert_eq!(added.len(), 35);
    let swapped = fuse(FusionMode::Addition, &x, &ft, &fp).unwrap();
    assert_eq!(added, swapped);
    // F_t = 0 reduces addition to [x | F_p].
    let zero = vec![0.0; 32];
    let vision = fuse(FusionMode::Addition, &x, &fp, &zero).unwrap();
    assert_eq!(&vision[3..], &fp[..]);

    let cat = fuse(FusionMode::Concat, &x, &fp, &ft).unwrap();
    assert_eq!(cat.len(), 67);

    let short = vec![0.0; 16];
    assert!(fuse(FusionMode::Addition, &x, &fp, &short).is_err());
}

#[test]
fn decoder_matches_independent_reimplementation() {
    let cfg = ModelConfig::desk(8, 12, 8);
    let model = ReconModel::init(cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let fused: Vec<f64> = (0..model.decoder.in_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let got = decode_wnf(&model, &fused).unwrap();
        // Plain-loop re-implementation of the forward pass.
        let mut x = fused.clone();
        for (li, layer) in model.decoder.layers.iter().enumerate() {
            let mut y = vec![0.0; layer.out_dim];
            for o in 0..layer.out_dim {
                let mut acc = layer.b[o];
                for i in 0..layer.in_dim {
                    acc += layer.w[o * layer.in_dim + i] * x[i];
                }
                y[o] = if li + 1 == model.decoder.layers.len() {
                    acc
                } else {
                    acc.tanh()
                };
            }
            x = y;
        }
        assert!((got - x[0]).abs() < 1e-12);
        // Bit-identical across repeated evaluation.
        assert_eq!(got.to_bits(), decode_wnf(&model, &fused).unwrap().to_bits());
    }
}

#[test]
fn decoder_zero_final_layer_outputs_bias() {
    let cfg = ModelConfig::desk(8, 12, 8);
    let mut model = ReconModel::init(cfg, 5).unwrap();
    let last = model.decoder.layers.last_mut().unwrap();
    last.w.fill(0.0);
    last.b[0] = 0.625;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let fused: Vec<f64> = (0..model.decoder.in_dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        assert_eq!(decode_wnf(&model, &fused).unwrap(), 0.625);
    }
    // Dimension mismatch is an error.
    assert!(decode_wnf(&model, &[0.0; 10]).is_err());
}

#[test]
fn loss_examples() {
    assert_eq!(wnf_loss(&[0.3], &[0.3], &[true]), 0.0);
    assert!((wnf_loss(&[0.7], &[0.5], &[true]) - 0.2).abs() < 1e-15);
    let base = wnf_loss(&[0.7, 0.1], &[0.5, 0.4], &[true, true]);
    let doubled = wnf_loss(&[0.9, -0.2], &[0.5, 0.4], &[true, true]);
    assert!((doubled - 2.0 * base).abs() < 1e-12);
}

#[test]
fn duplicated_batch_keeps_gradients() {
    // Mean normalization: gradients of a duplicated batch equal gradients of
    // the single batch.
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 11).unwrap();
    let scene = make_scene(&cfg, true);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let active = vec![true; scene.tactile_images.len()];
    let batch = subsample_batch(&scene.pool, &active, &small_sampling(), &mut rng);

    let mut doubled = batch.clone();
    doubled.positions.extend(batch.positions.clone());
    doubled.tactile_slot.extend(batch.tactile_slot.clone());
    doubled.w_star.extend(batch.w_star.clone());
    doubled.mask.extend(batch.mask.clone());

    let mut g1 = ModelGrads::zeros(&model);
    forward_backward(&model, &scene, &batch, &mut g1);
    let mut g2 = ModelGrads::zeros(&model);
    forward_backward(&model, &scene, &doubled, &mut g2);
    for (a, b) in g1.blocks().iter().zip(g2.blocks()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_loss_batch_gives_zero_gradients() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 12).unwrap();
    let scene = make_scene(&cfg, false);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut batch = subsample_batch(&scene.pool, &[], &small_sampling(), &mut rng);
    // Set targets to the model's own predictions: residuals exactly zero,
    // so every gradient must vanish under the 0-subgradient convention.
    assert!(forward_loss(&model, &scene, &batch).is_finite());
    let mut probe = ModelGrads::zeros(&model);
    let preds: Vec<f64> = batch
        .positions
        .iter()
        .map(|p| {
            let prep_enc = encode_scene(&model, &scene.prep, None);
            let (f_p, _) = query_feature(&model.cfg, &prep_enc.acts, p);
            let x = model.cfg.normalize(p);
            let fused = fuse(model.cfg.fusion, &x, &f_p, &vec![0.0; model.cfg.d_t]).unwrap();
            decode_wnf(&model, &fused).unwrap()
        })
        .collect();
    batch.w_star = preds;
    let loss = forward_backward(&model, &scene, &batch, &mut probe);
    assert_eq!(loss, 0.0);
    assert_eq!(probe.max_abs(), 0.0);
}

#[test]
fn training_is_deterministic_and_lr_zero_is_identity() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let scene = make_scene(&cfg, true);
    let tcfg = TrainConfig {
        lr: 1e-3,
        batch_size: 1,
        steps: 10,
        seed: 21,
        sampling: small_sampling(),
        ..TrainConfig::default()
    };
    let mut m1 = ReconModel::init(cfg.clone(), 30).unwrap();
    let c1 = train(&mut m1, std::slice::from_ref(&scene), &tcfg).unwrap();
    let mut m2 = ReconModel::init(cfg.clone(), 30).unwrap();
    let c2 = train(&mut m2, std::slice::from_ref(&scene), &tcfg).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(m1, m2);

    let mut frozen = ReconModel::init(cfg.clone(), 30).unwrap();
    let before = frozen.clone();
    let zero_lr = TrainConfig { lr: 0.0, ..tcfg };
    train(&mut frozen, std::slice::from_ref(&scene), &zero_lr).unwrap();
    assert_eq!(frozen, before);
}

#[test]
fn vision_only_equals_zeroed_tactile_readings() {
    // Reconstructing with no readings must bit-match reconstructing with
    // readings whose images are all zero (no contact pixels).
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 31).unwrap();
    let mesh = icosphere(0.4, 2);
    let cloud = sample_surface(&mesh, 200, 8).unwrap();
    let spec = sensor_spec();
    let grid = recon_core::geom::GridSpec::cube(Point3::origin(), 0.75, 16).unwrap();

    let empty = reconstruct(&model, &cloud, &[], &grid, 0.1).unwrap();
    let zero_reading = recon_core::tactile::TactileReading::new(
        vec![0.0; spec.pixel_count()],
        RigidTransform::identity(),
        spec,
    )
    .unwrap();
    let zeroed = reconstruct(&model, &cloud, &[zero_reading], &grid, 0.1).unwrap();
    for (a, b) in empty.wnf.data().iter().zip(zeroed.wnf.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn tactile_features_are_local_to_contact_balls() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 32).unwrap();
    let mesh = icosphere(0.4, 2);
    let cloud = sample_surface(&mesh, 200, 9).unwrap();
    let spec = sensor_spec();
    let pose = sensor_pose_touching(0.4, Vector3::new(0.0, 0.0, 1.0), &spec);
    let reading = render_tactile(&mesh, &pose, &spec);
    assert!(reading.contact_pixel_count() > 0);
    let patch = recon_core::tactile::contact_patch(&reading, 0);

    let r = 0.1;
    let grid = recon_core::geom::GridSpec::cube(Point3::origin(), 0.75, 16).unwrap();
    let without = reconstruct(&model, &cloud, &[], &grid, r).unwrap();
    let with = reconstruct(&model, &cloud, &[reading], &grid, r).unwrap();
    let mut changed = 0;
    for i in 0..grid.voxel_count() {
        let center = grid.center(grid.voxel_index(i));
        let inside = patch
            .points
            .points()
            .iter()
            .any(|c| (center - c).norm() <= r);
        let same = without.wnf.data()[i].to_bits() == with.wnf.data()[i].to_bits();
        if !inside {
            assert!(same, "voxel {i} outside all contact balls changed");
        } else if !same {
            changed += 1;
        }
    }
    assert!(changed > 0, "tactile features never engaged");
}

#[test]
fn duplicate_reading_is_idempotent() {
    let cfg = ModelConfig::desk(16, 12, 8);
    let model = ReconModel::init(cfg.clone(), 33).unwrap();
    let mesh = icosphere(0.4, 2);
    let cloud = sample_surface(&mesh, 200, 10).unwrap();
    let spec = sensor_spec();
    let pose = sensor_pose_touching(0.4, Vector3::new(0.3, 0.9, 0.1), &spec);
    let reading = render_tactile(&mesh, &pose, &spec);
    let grid = recon_core::geom::GridSpec::cube(Point3::origin(), 0.75, 16).unwrap();
    let one = reconstruct(&model, &cloud, &[reading.clone()], &grid, 0.1).unwrap();
    let two = reconstruct(&model, &cloud, &[reading.clone(), reading], &grid, 0.1).unwrap();
    assert_eq!(one.mesh.vertex_count(), two.mesh.vertex_count());
    for (a, b) in one.wnf.data().iter().zip(two.wnf.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
