//! `selftest`: the embedded oracle suite. Analytic winding-number cases,
//! accelerated-vs-exact agreement, marching-cubes fidelity, gradient checks
//! (with an injected-bug negative control), metric brute-force equivalence,
//! and sensor round trips. Nonzero exit on any failure.

use crate::config::Config;
use recon_core::datagen::{generate_datapoint, icosphere, train_scene_from_datapoint, AnalyticShape, DatagenConfig, ObjectSource, SceneSpec};
use recon_core::geom::{GridSpec, Point3, PointCloud, RigidTransform, TriangleMesh, Vector3, VoxelGrid};
use recon_core::hand::{forward_kinematics, sensor_poses, HandModel, HandPose, FINGERS, JOINT_LIMIT, SEGMENTS};
use recon_core::metrics::{chamfer, emd, hungarian, iou_volume};
use recon_core::neural::{
    forward_backward, forward_loss, gradient_check, subsample_batch, ModelConfig, ModelGrads,
    ReconModel, SamplingConfig,
};
use recon_core::tactile::{contact_patch, render_tactile, tactile_depth, TactileSensorSpec};
use recon_core::wnf::{marching_cubes, winding_number, winding_number_batch, Bvh, WindingMode};
use recon_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Suite {
    failures: Vec<String>,
}

impl Suite {
    fn check(&mut self, name: &str, run: impl FnOnce() -> std::result::Result<(), String>) {
        let t = Instant::now();
        match run() {
            Ok(()) => println!("[ PASS ] {name} ({:.2}s)", t.elapsed().as_secs_f64()),
            Err(msg) => {
                println!("[ FAIL ] {name} ({:.2}s): {msg}", t.elapsed().as_secs_f64());
                self.failures.push(name.to_string());
            }
        }
    }
}

pub fn run(_cfg: &Config) -> Result<()> {
    let total = Instant::now();
    let mut suite = Suite { failures: vec![] };

    suite.check("winding-number analytic cases", || {
        let sphere = icosphere(0.5, 3);
        let inside = winding_number(&sphere, &Point3::origin()).value;
        if (inside - 1.0).abs() > 1e-6 {
            return Err(format!("interior winding {inside}"));
        }
        let outside = winding_number(&sphere, &Point3::new(50.0, 0.0, 0.0)).value;
        if outside.abs() > 1e-6 {
            return Err(format!("exterior winding {outside}"));
        }
        let hemi = hemisphere(1.0, 8, 16);
        let half = winding_number(&hemi, &Point3::origin()).value;
        if (half - 0.5).abs() > 1e-9 {
            return Err(format!("hemisphere boundary-center winding {half}"));
        }
        Ok(())
    });

    suite.check("accelerated winding matches exact", || {
        let mesh = icosphere(0.5, 3);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let queries: Vec<Point3> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-1.2..1.2),
                )
            })
            .collect();
        let exact = winding_number_batch(&mesh, &bvh, &queries, WindingMode::Exact);
        let fast = winding_number_batch(&mesh, &bvh, &queries, WindingMode::Accelerated);
        let max = exact
            .iter()
            .zip(&fast)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max > 1e-3 {
            return Err(format!("max abs error {max}"));
        }
        Ok(())
    });

    suite.check("marching cubes sphere fidelity", || {
        let r = 0.45;
        let spec = GridSpec::cube(Point3::origin(), 0.75, 32).map_err(|e| e.to_string())?;
        let data: Vec<f64> = (0..spec.voxel_count())
            .map(|i| {
                if spec.center(spec.voxel_index(i)).coords.norm() <= r {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let grid = VoxelGrid::new(spec, data).map_err(|e| e.to_string())?;
        let mesh = marching_cubes(&grid, 0.5);
        if !mesh.is_watertight() || mesh.euler_characteristic() != 2 {
            return Err("extraction is not a closed sphere".into());
        }
        for v in mesh.vertices() {
            if (v.coords.norm() - r).abs() > 1.5 * spec.spacing {
                return Err(format!("vertex radius {}", v.coords.norm()));
            }
        }
        let w = recon_core::wnf::winding_number_exact(&mesh, &Point3::origin());
        if (w - 1.0).abs() > 1e-6 {
            return Err(format!("extracted orientation winding {w}"));
        }
        Ok(())
    });

    // One small synthetic scene shared by the gradient checks.
    let scene_setup = || -> std::result::Result<_, String> {
        let spec = SceneSpec {
            object: ObjectSource::Analytic {
                shape: AnalyticShape::Sphere { radius: 0.5 },
                resolution: 1,
            },
            stiffness: 1.0,
            grasps: 1,
            randomize_rotation: false,
        };
        let dcfg = DatagenConfig {
            depth_res: 32,
            n_points: 128,
            grid_res: 16,
            sensor_width: 12,
            sensor_height: 8,
            ..DatagenConfig::desk()
        };
        let dp = generate_datapoint(&spec, &dcfg, 3).map_err(|e| e.to_string())?;
        let mcfg = ModelConfig::desk(16, 12, 8);
        let sampling = SamplingConfig {
            uniform: 400,
            surface: 100,
            per_reading: 100,
            m: 16,
            ..SamplingConfig::default()
        };
        let scene =
            train_scene_from_datapoint(&dp, &mcfg, &sampling).map_err(|e| e.to_string())?;
        Ok((mcfg, sampling, scene))
    };

    suite.check("decoder gradients vs finite differences", || {
        let (mcfg, _, scene) = scene_setup()?;
        let mut model = ReconModel::init(mcfg, 9).map_err(|e| e.to_string())?;
        let report = gradient_check(&mut model, &scene, 11, 4);
        for (name, err) in &report.blocks {
            if *err > 1e-4 {
                return Err(format!("block {name} rel err {err}"));
            }
        }
        Ok(())
    });

    suite.check("injected gradient bug is detected", || {
        // Negative control: corrupt one analytic gradient by 1% and verify
        // the finite-difference comparison flags it.
        let (mcfg, sampling, scene) = scene_setup()?;
        let mut model = ReconModel::init(mcfg, 10).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let active = vec![true; scene.tactile_images.len()];
        let batch = subsample_batch(&scene.pool, &active, &sampling, &mut rng);
        let mut grads = ModelGrads::zeros(&model);
        forward_backward(&model, &scene, &batch, &mut grads);
        // Find a decoder weight with a solid gradient.
        let names = model.block_names();
        let dec_block = names
            .iter()
            .position(|n| n == "decoder.w0")
            .ok_or("missing decoder block")?;
        let gblock = grads.blocks()[dec_block].to_vec();
        let (idx, &g) = gblock
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or("empty block")?;
        if g.abs() < 1e-8 {
            return Err("no usable gradient for the control".into());
        }
        let h = 1e-5;
        let orig = model.blocks()[dec_block][idx];
        model.blocks_mut()[dec_block][idx] = orig + h;
        let fp = forward_loss(&model, &scene, &batch);
        model.blocks_mut()[dec_block][idx] = orig - h;
        let fm = forward_loss(&model, &scene, &batch);
        model.blocks_mut()[dec_block][idx] = orig;
        let fd = (fp - fm) / (2.0 * h);
        let honest = (fd - g).abs() / fd.abs().max(g.abs());
        if honest > 1e-4 {
            return Err(format!("honest gradient failed its own check: {honest}"));
        }
        let corrupted = g * 1.01;
        let detected = (fd - corrupted).abs() / fd.abs().max(corrupted.abs());
        if detected <= 1e-4 {
            return Err(format!("1% corruption not detected (rel err {detected})"));
        }
        Ok(())
    });

    suite.check("chamfer equals brute force", || {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cloud = |rng: &mut ChaCha8Rng| -> PointCloud {
            (0..64)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        let a = cloud(&mut rng);
        let b = cloud(&mut rng);
        let got = chamfer(&a, &b).map_err(|e| e.to_string())?;
        let mut sum_ab = 0.0;
        for p in a.points() {
            sum_ab += b
                .points()
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
        }
        let mut sum_ba = 0.0;
        for q in b.points() {
            sum_ba += a
                .points()
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
        }
        let want = 0.5 * (sum_ab / 64.0 + sum_ba / 64.0) * 100.0;
        if (got - want).abs() > 1e-9 {
            return Err(format!("chamfer {got} vs brute force {want}"));
        }
        Ok(())
    });

    suite.check("emd equals exhaustive matching", || {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let cloud = |rng: &mut ChaCha8Rng| -> PointCloud {
            (0..6)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        let a = cloud(&mut rng);
        let b = cloud(&mut rng);
        let got = emd(&a, &b).map_err(|e| e.to_string())?;
        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..6).collect();
        exhaustive(&mut perm, 0, &mut |p| {
            let total: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &j)| (a.points()[i] - b.points()[j]).norm())
                .sum();
            best = best.min(total / 6.0);
        });
        if (got - best).abs() > 1e-9 {
            return Err(format!("emd {got} vs exhaustive {best}"));
        }
        let _ = hungarian(&[0.0], 1);
        Ok(())
    });

    suite.check("iou of half-overlapping cubes", || {
        let a = recon_core::datagen::box_mesh([1.0, 1.0, 1.0]);
        let b = a.translated(Vector3::new(0.5, 0.0, 0.0));
        let spec = recon_core::metrics::common_grid(&a, &b, 64).map_err(|e| e.to_string())?;
        let iou = iou_volume(&a, &b, &spec);
        if (iou - 1.0 / 3.0).abs() > 0.02 {
            return Err(format!("iou {iou}"));
        }
        Ok(())
    });

    suite.check("tactile render/depth round trip", || {
        let spec = TactileSensorSpec::new(24, 16, [0.12, 0.08], 0.08, 0.03)
            .map_err(|e| e.to_string())?;
        let mesh = icosphere(0.4, 3);
        let eye = Point3::new(0.0, 0.0, 0.4 + spec.gel_rest_depth - 0.5 * spec.max_indentation);
        let pose = RigidTransform::look_at(eye, Point3::origin(), Vector3::new(1.0, 0.0, 0.0))
            .map_err(|e| e.to_string())?;
        let reading = render_tactile(&mesh, &pose, &spec);
        if reading.contact_pixel_count() == 0 {
            return Err("sensor registered no contact".into());
        }
        let depth = tactile_depth(&reading);
        if depth.valid_count() != reading.contact_pixel_count() {
            return Err("depth/contact pixel mismatch".into());
        }
        let patch = contact_patch(&reading, 0);
        let bvh = Bvh::build(&mesh);
        for p in patch.points.points() {
            let d = bvh.distance(&mesh, p);
            if d > 1e-6 {
                return Err(format!("patch point {d} off the surface"));
            }
        }
        Ok(())
    });

    suite.check("fingertip-to-sensor offset invariance", || {
        let model = HandModel::desk_default(0.08, 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let mut pose = HandPose::zero();
            pose.wrist_translation = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            pose.wrist_rotation = Vector3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            for f in 0..FINGERS {
                for s in 0..SEGMENTS {
                    pose.joints[f][s] = Vector3::new(
                        rng.random_range(-JOINT_LIMIT..JOINT_LIMIT),
                        rng.random_range(-JOINT_LIMIT..JOINT_LIMIT),
                        rng.random_range(-JOINT_LIMIT..JOINT_LIMIT),
                    );
                }
            }
            let tips = forward_kinematics(&model, &pose).map_err(|e| e.to_string())?;
            let sensors = sensor_poses(&model, &pose).map_err(|e| e.to_string())?;
            for f in 0..FINGERS {
                let d = (Point3::from(sensors[f].translation()) - tips[f]).norm();
                let want = model.tip_to_sensor[f].translation().norm();
                if (d - want).abs() > 1e-12 {
                    return Err(format!("finger {f} offset drift {}", (d - want).abs()));
                }
            }
        }
        Ok(())
    });

    println!(
        "selftest: {} checks, {} failures, {:.1}s total",
        10,
        suite.failures.len(),
        total.elapsed().as_secs_f64()
    );
    if suite.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Eval(format!(
            "selftest failures: {}",
            suite.failures.join(", ")
        )))
    }
}

/// Upper lat-long hemisphere with the boundary ring exactly at z = 0.
fn hemisphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for r in 1..=rings {
        let polar = std::f64::consts::FRAC_PI_2 * r as f64 / rings as f64;
        for s in 0..segments {
            let az = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * polar.sin() * az.cos(),
                radius * polar.sin() * az.sin(),
                radius * polar.cos(),
            ));
        }
    }
    let mut faces = Vec::new();
    let ring_start = |r: usize| 1 + (r - 1) * segments;
    for s in 0..segments {
        let n = (s + 1) % segments;
        faces.push([0u32, (ring_start(1) + s) as u32, (ring_start(1) + n) as u32]);
    }
    for r in 1..rings {
        for s in 0..segments {
            let n = (s + 1) % segments;
            let a = (ring_start(r) + s) as u32;
            let b = (ring_start(r) + n) as u32;
            let c = (ring_start(r + 1) + s) as u32;
            let d = (ring_start(r + 1) + n) as u32;
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
    }
    let mesh = TriangleMesh::new(vertices, faces).expect("hemisphere construction");
    let mut fixed = Vec::new();
    for (i, f) in mesh.faces().iter().enumerate() {
        if mesh.face_normal(i).dot(&mesh.face_centroid(i).coords) < 0.0 {
            fixed.push([f[0], f[2], f[1]]);
        } else {
            fixed.push(*f);
        }
    }
    TriangleMesh::new(mesh.vertices().to_vec(), fixed).expect("hemisphere orientation")
}

fn exhaustive(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        exhaustive(perm, k + 1, visit);
        perm.swap(k, i);
    }
}
