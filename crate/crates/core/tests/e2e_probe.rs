use recon_core::datagen::*;
use recon_core::metrics::*;
use recon_core::neural::*;
use recon_core::geom::sample_surface;
use std::time::Instant;

fn specs_rigid(grasps: usize) -> Vec<SceneSpec> {
    let mk = |shape, res| SceneSpec {
        object: ObjectSource::Analytic { shape, resolution: res },
        stiffness: 1.0, grasps, randomize_rotation: true,
    };
    vec![
        SceneSpec { randomize_rotation: false, ..mk(AnalyticShape::Sphere { radius: 0.5 }, 2) },
        mk(AnalyticShape::Box { extents: [0.5, 0.38, 0.26] }, 0),
        mk(AnalyticShape::Tube { radius: 0.3, height: 0.9 }, 24),
        mk(AnalyticShape::SlottedPlate { width: 0.9, height: 0.7, slot_width: 0.45, slot_height: 0.2 }, 10),
    ]
}

#[test]
fn probe_tactile_benefit() {
    let t0 = Instant::now();
    let dcfg = DatagenConfig { n_points: 512, grid_res: 32, depth_res: 64, ..DatagenConfig::desk() };
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&specs_rigid(2), (16, 12, 0), dir.path(), 1000, &dcfg).unwrap();
    println!("gen: {:?}", t0.elapsed());

    let mcfg = ModelConfig::desk(32, dcfg.sensor_width, dcfg.sensor_height);
    let sampling = SamplingConfig { uniform: 6000, surface: 1500, per_reading: 600, m: 512, m1_cap_frac: 0.25, ..SamplingConfig::default() };
    let rows = read_manifest(&manifest).unwrap();
    let t1 = Instant::now();
    let mut scenes_vt = Vec::new();
    let mut scenes_vo = Vec::new();
    for row in rows.iter().filter(|r| r.split == "train") {
        let loaded = load_scene(&dir.path().join(&row.path)).unwrap();
        scenes_vt.push(to_train_scene(&loaded, &mcfg, &sampling).unwrap());
        let mut vo = loaded.clone();
        vo.readings.clear();
        scenes_vo.push(to_train_scene(&vo, &mcfg, &sampling).unwrap());
    }
    println!("prep {} scenes: {:?}", scenes_vt.len(), t1.elapsed());

    let tcfg = TrainConfig { lr: 5e-3, lr_final_frac: 0.01, grad_clip: 1.0, batch_size: 4, steps: 1200,
        seed: 7, target_loss: None, patience: 25, grasp_dropout: true, sampling: sampling.clone() };
    let t2 = Instant::now();
    let mut model_vt = ReconModel::init(mcfg.clone(), 42).unwrap();
    let curve = train(&mut model_vt, &scenes_vt, &tcfg).unwrap();
    println!("train vtaco: {:?} final loss {:.4}", t2.elapsed(), curve.last().unwrap().1);
    let t3 = Instant::now();
    let mut model_vo = ReconModel::init(mcfg.clone(), 42).unwrap();
    let curve = train(&mut model_vo, &scenes_vo, &tcfg).unwrap();
    println!("train vision-only: {:?} final loss {:.4}", t3.elapsed(), curve.last().unwrap().1);

    // Eval: CD per scene per variant + grasp-count sweep for vtaco.
    let ecfg = EvalConfig { recon_res: 32, iou_res: 64, metric_points: 2048, contact_radius: 0.1, half_extent: 0.75 };
    let t4 = Instant::now();
    let mut cd_vt = Vec::new();
    let mut cd_vo = Vec::new();
    let mut mono_ok = 0usize;
    let mut n_scenes = 0usize;
    for row in rows.iter().filter(|r| r.split == "test") {
        let loaded = load_scene(&dir.path().join(&row.path)).unwrap();
        let gt_pts = sample_surface(&loaded.mesh, 2048, row.seed ^ 1).unwrap();
        let cd_of = |model: &ReconModel, variant, lim| -> f64 {
            let recon = scene_reconstruction(model, &loaded, variant, lim, &ecfg).unwrap();
            if recon.mesh.is_empty() { return 999.0; }
            let pts = sample_surface(&recon.mesh, 2048, row.seed ^ 2).unwrap();
            chamfer(&pts, &gt_pts).unwrap()
        };
        let vt_full = cd_of(&model_vt, Variant::Vtaco, None);
        let vo = cd_of(&model_vo, Variant::VisionOnly, None);
        let g0 = cd_of(&model_vt, Variant::VisionOnly, None);
        let g1 = cd_of(&model_vt, Variant::Vtaco, Some(1));
        let g2 = cd_of(&model_vt, Variant::Vtaco, Some(2));
        let mono = g1 <= g0 && g2 <= g1;
        if mono { mono_ok += 1; }
        n_scenes += 1;
        println!("  {} [{}]: vt {:.3} vo {:.3} | grasps 0/1/2: {:.3} {:.3} {:.3} {}",
            row.scene, row.category, vt_full, vo, g0, g1, g2, if mono { "mono" } else { "X" });
        cd_vt.push(vt_full);
        cd_vo.push(vo);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("eval: {:?}  mean CD vtaco {:.4} vs vision-only {:.4}  mono {}/{}",
        t4.elapsed(), mean(&cd_vt), mean(&cd_vo), mono_ok, n_scenes);
    println!("TOTAL {:?}", t0.elapsed());
}
