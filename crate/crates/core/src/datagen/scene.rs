//! End-to-end scene synthesis: normalized object mesh, heuristic grasps with
//! fingertip sensors, optional contact indentation, an 8-view depth ring
//! with occlusion-aware view picking, tactile readings, and ground-truth
//! winding-number grids. Plus the on-disk dataset layout and loaders.

use super::grasp::{grasp_sensor_poses, place_grasp, Grasp};
use super::indent::{indent_mesh, IndentSite};
use super::shapes::{make_analytic_mesh, AnalyticShape};
use crate::geom::{
    backproject_depth, io as geom_io, render_depth_with, DepthImage, GridSpec, PinholeCamera,
    Point3, PointCloud, Ray, RigidTransform, TriangleMesh, Vector3,
};
use crate::hand::{HandModel, HandPose};
use crate::neural::{build_scene_pool, SamplingConfig, TrainScene};
use crate::tactile::{render_tactile_with, TactileReading, TactileSensorSpec};
use crate::wnf::{evaluate_wnf_grid_with, Bvh, WindingMode, WnfGrid};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Where a scene's object comes from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ObjectSource {
    Analytic { shape: AnalyticShape, resolution: usize },
    ObjFile { path: PathBuf },
}

impl ObjectSource {
    pub fn category(&self) -> String {
        match self {
            ObjectSource::Analytic { shape, .. } => shape.category().to_string(),
            ObjectSource::ObjFile { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "obj".into()),
        }
    }
}

/// One scene recipe: object, deformability, and grasp count.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneSpec {
    pub object: ObjectSource,
    /// Contact stiffness in (0, 1]; 1 means rigid.
    pub stiffness: f64,
    /// Number of grasp events recorded for the scene (rigid scenes may have
    /// several; deformable scenes are limited to one so the ground truth has
    /// a single deformation state).
    pub grasps: usize,
    /// Extra seeded rotation applied to the object before normalization.
    pub randomize_rotation: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0 && self.stiffness <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness must be in (0, 1], got {}",
                self.stiffness
            )));
        }
        if self.grasps == 0 {
            return Err(Error::InvalidArgument("scene needs at least one grasp".into()));
        }
        Ok(())
    }

    pub fn is_deformable(&self) -> bool {
        self.stiffness < 1.0
    }
}

/// Fixed generation-environment parameters shared by every scene.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatagenConfig {
    pub sensor_width: usize,
    pub sensor_height: usize,
    pub gel_size: [f64; 2],
    pub gel_rest_depth: f64,
    pub max_indentation: f64,
    pub cameras: usize,
    pub camera_radius: f64,
    pub camera_elevation: f64,
    pub depth_res: usize,
    /// Points kept from the back-projected view (N_p).
    pub n_points: usize,
    /// Ground-truth winding-grid resolution.
    pub grid_res: usize,
    /// Half extent of the normalized world cube.
    pub half_extent: f64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            sensor_width: 60,
            sensor_height: 40,
            gel_size: [0.12, 0.08],
            gel_rest_depth: 0.08,
            max_indentation: 0.03,
            cameras: 8,
            camera_radius: 1.8,
            camera_elevation: 0.35,
            depth_res: 64,
            n_points: 3000,
            grid_res: 64,
            half_extent: 0.75,
        }
    }
}

impl DatagenConfig {
    pub fn desk() -> Self {
        Self {
            n_points: 512,
            grid_res: 32,
            ..Self::default()
        }
    }

    pub fn sensor_spec(&self) -> TactileSensorSpec {
        TactileSensorSpec::new(
            self.sensor_width,
            self.sensor_height,
            self.gel_size,
            self.gel_rest_depth,
            self.max_indentation,
        )
        .expect("config validated by construction")
    }

    pub fn hand_model(&self) -> HandModel {
        HandModel::desk_default(self.gel_rest_depth, self.max_indentation)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::cube(Point3::origin(), self.half_extent, self.grid_res)
            .expect("positive extent")
    }

    pub fn camera_ring(&self) -> Vec<PinholeCamera> {
        (0..self.cameras)
            .map(|k| {
                let az = 2.0 * std::f64::consts::PI * k as f64 / self.cameras as f64;
                let eye = Point3::new(
                    self.camera_radius * az.cos(),
                    self.camera_radius * az.sin(),
                    self.camera_elevation,
                );
                let pose = RigidTransform::look_at(eye, Point3::origin(), Vector3::new(0.0, 0.0, 1.0))
                    .expect("camera off-origin");
                PinholeCamera::with_fov(self.depth_res, self.depth_res, 0.62, pose)
                    .expect("valid intrinsics")
            })
            .collect()
    }
}

/// One recorded grasp: the hand pose, which fingers touched, and the
/// readings they produced.
#[derive(Debug, Clone)]
pub struct GraspRecord {
    pub pose: HandPose,
    pub touching: Vec<usize>,
    /// (finger index, reading); only fingers with actual contact pixels.
    pub readings: Vec<(usize, TactileReading)>,
}

/// A complete training/eval sample in memory.
#[derive(Debug, Clone)]
pub struct DataPoint {
    pub category: String,
    pub seed: u64,
    /// Normalization scale applied to the source object.
    pub scale: f64,
    pub stiffness: f64,
    /// Final ground-truth mesh (indented for deformables).
    pub mesh: TriangleMesh,
    pub undeformed: Option<TriangleMesh>,
    pub cameras: Vec<PinholeCamera>,
    pub depth_views: Vec<DepthImage>,
    pub chosen_view: usize,
    pub cloud: PointCloud,
    pub grasps: Vec<GraspRecord>,
    pub wnf: WnfGrid,
    pub wnf_undeformed: Option<WnfGrid>,
}

/// Loads or constructs the object mesh, applies the seeded rotation, and
/// normalizes it into the unit bounding cube centered at the origin.
fn build_object(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<(TriangleMesh, f64)> {
    let raw = match &spec.object {
        ObjectSource::Analytic { shape, resolution } => make_analytic_mesh(shape, *resolution)?,
        ObjectSource::ObjFile { path } => geom_io::read_obj(path)?,
    };
    if raw.is_empty() {
        return Err(Error::InvalidMesh("scene object has no faces".into()));
    }
    let rotated = if spec.randomize_rotation {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let aa = if axis.norm() > 1e-9 {
            axis.normalize() * angle
        } else {
            Vector3::zeros()
        };
        raw.transformed(&RigidTransform::from_axis_angle(aa, Vector3::zeros()))
    } else {
        raw
    };
    let (min, max) = rotated.bounds().expect("non-empty mesh");
    let extent = (max - min).amax().max(1e-12);
    let scale = 1.0 / extent;
    let center = Point3::from((min.coords + max.coords) / 2.0);
    let normalized = rotated.translated(-center.coords).scaled(scale);
    Ok((normalized, scale))
}

/// Count of contact targets visible from a camera (nothing in between).
fn visible_contacts(cam: &PinholeCamera, bvh: &Bvh, mesh: &TriangleMesh, contacts: &[Point3]) -> usize {
    contacts
        .iter()
        .filter(|&&c| {
            let origin = Point3::from(cam.pose.translation());
            let dir = c - origin;
            let ray = Ray { origin, dir };
            match bvh.raycast(mesh, &ray) {
                // Visible when nothing hits strictly before the contact.
                Some(hit) => hit.t >= 1.0 - 1e-6,
                None => true,
            }
        })
        .count()
}

/// Generates one full data point; deterministic per seed. Grasp failures
/// propagate as "no successful touch".
pub fn generate_datapoint(spec: &SceneSpec, cfg: &DatagenConfig, seed: u64) -> Result<DataPoint> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (object, scale) = build_object(spec, &mut rng)?;
    let hand = cfg.hand_model();
    let sensor = cfg.sensor_spec();

    // Grasps on the undeformed object; deformables keep a single grasp so
    // the deformation state is unambiguous.
    let grasp_count = if spec.is_deformable() { 1 } else { spec.grasps };
    let mut grasps: Vec<Grasp> = Vec::new();
    for g in 0..grasp_count {
        grasps.push(place_grasp(&object, &hand, seed ^ (0x9e37_79b9 + g as u64))?);
    }

    // Indentation from every touching finger of every grasp.
    let mesh = if spec.is_deformable() {
        let sites: Vec<IndentSite> = grasps
            .iter()
            .flat_map(|grasp| {
                grasp.touching.iter().map(|&f| IndentSite {
                    point: grasp.targets[f].point,
                    normal: grasp.targets[f].normal,
                    depth: 0.5 * cfg.max_indentation,
                })
            })
            .collect();
        indent_mesh(&object, &sites, spec.stiffness, 2.0 * cfg.gel_size[0])?
    } else {
        object.clone()
    };
    let undeformed = spec.is_deformable().then(|| object.clone());

    let bvh = Bvh::build(&mesh);

    // Tactile readings against the final (possibly indented) geometry.
    let mut grasp_records = Vec::new();
    let mut contact_points = Vec::new();
    for grasp in &grasps {
        let mut readings = Vec::new();
        for (finger, pose) in grasp_sensor_poses(&hand, grasp)? {
            let reading = render_tactile_with(&mesh, &bvh, &pose, &sensor);
            if reading.contact_pixel_count() > 0 {
                readings.push((finger, reading));
                contact_points.push(grasp.targets[finger].point);
            }
        }
        grasp_records.push(GraspRecord {
            pose: grasp.pose.clone(),
            touching: grasp.touching.clone(),
            readings,
        });
    }
    if grasp_records.iter().all(|g| g.readings.is_empty()) {
        return Err(Error::NoSuccessfulTouch);
    }

    // Depth ring; pick the view with the most occluded contacts.
    let cameras = cfg.camera_ring();
    let depth_views: Vec<DepthImage> = cameras
        .iter()
        .map(|cam| render_depth_with(cam, &mesh, &bvh))
        .collect();
    let chosen_view = cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| (visible_contacts(cam, &bvh, &mesh, &contact_points), i))
        .min()
        .map(|(_, i)| i)
        .unwrap_or(0);

    // Back-project the chosen view and subsample to N_p.
    let full = backproject_depth(&cameras[chosen_view], &depth_views[chosen_view])?;
    let cloud = subsample_cloud(&full, cfg.n_points, &mut rng)?;

    // Ground-truth fields.
    let grid = cfg.grid_spec();
    let wnf = evaluate_wnf_grid_with(&mesh, &bvh, &grid, WindingMode::Accelerated);
    let wnf_undeformed = undeformed.as_ref().map(|m| {
        let b = Bvh::build(m);
        evaluate_wnf_grid_with(m, &b, &grid, WindingMode::Accelerated)
    });

    Ok(DataPoint {
        category: spec.object.category(),
        seed,
        scale,
        stiffness: spec.stiffness,
        mesh,
        undeformed,
        cameras,
        depth_views,
        chosen_view,
        cloud,
        grasps: grasp_records,
        wnf,
        wnf_undeformed,
    })
}

fn subsample_cloud(cloud: &PointCloud, n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument(
            "chosen view produced an empty point cloud".into(),
        ));
    }
    if cloud.len() <= n {
        return Ok(cloud.clone());
    }
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    for k in 0..n {
        let j = rng.random_range(k..idx.len());
        idx.swap(k, j);
    }
    PointCloud::new(idx[..n].iter().map(|&i| cloud.points()[i]).collect())
}

// ---------------------------------------------------------------------------
// On-disk layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct PoseJson {
    rotation: Vec<f64>,
    translation: [f64; 3],
}

impl PoseJson {
    fn from(t: &RigidTransform) -> Self {
        let r = t.rotation();
        Self {
            rotation: (0..3)
                .flat_map(|i| (0..3).map(move |j| r[(i, j)]))
                .collect(),
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }

    fn to_transform(&self) -> Result<RigidTransform> {
        if self.rotation.len() != 9 {
            return Err(Error::InvalidTransform("pose rotation needs 9 entries".into()));
        }
        let m = crate::geom::Matrix3::new(
            self.rotation[0],
            self.rotation[1],
            self.rotation[2],
            self.rotation[3],
            self.rotation[4],
            self.rotation[5],
            self.rotation[6],
            self.rotation[7],
            self.rotation[8],
        );
        RigidTransform::new(
            m,
            Vector3::new(self.translation[0], self.translation[1], self.translation[2]),
        )
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    pose: PoseJson,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct ReadingJson {
    finger: usize,
    file: String,
    pose: PoseJson,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct GraspJson {
    /// 51 scalars: wrist translation, wrist axis-angle, then per-finger
    /// per-joint axis-angle xyz (thumb..pinky, proximal..distal).
    theta: Vec<f64>,
    touching: Vec<usize>,
    readings: Vec<ReadingJson>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct SceneJson {
    category: String,
    seed: u64,
    scale: f64,
    stiffness: f64,
    chosen_view: usize,
    n_points: usize,
    sensor: DatagenSensorJson,
    cameras: Vec<CameraJson>,
    grasps: Vec<GraspJson>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct DatagenSensorJson {
    width: usize,
    height: usize,
    gel_size: [f64; 2],
    gel_rest_depth: f64,
    max_indentation: f64,
}

/// One manifest row (JSON lines).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ManifestRow {
    pub scene: String,
    pub path: String,
    pub category: String,
    pub split: String,
    pub seed: u64,
    pub grasps: usize,
    pub deformable: bool,
}

/// Writes one data point into `dir` using the documented layout.
pub fn write_datapoint(dir: &Path, dp: &DataPoint) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    geom_io::write_obj(&dir.join("mesh.obj"), &dp.mesh)?;
    geom_io::write_wng(&dir.join("wnf.wng"), &dp.wnf)?;
    if let (Some(mesh), Some(grid)) = (&dp.undeformed, &dp.wnf_undeformed) {
        geom_io::write_obj(&dir.join("mesh_undeformed.obj"), mesh)?;
        geom_io::write_wng(&dir.join("wnf_undeformed.wng"), grid)?;
    }
    for (k, view) in dp.depth_views.iter().enumerate() {
        geom_io::write_depth(&dir.join(format!("view_{k}.depth")), view)?;
    }
    let mut reading_files = Vec::new();
    let mut counter = 0usize;
    for grasp in &dp.grasps {
        let mut files = Vec::new();
        for (_, reading) in &grasp.readings {
            let name = format!("tactile_{counter}.pgm");
            geom_io::write_pgm16(
                &dir.join(&name),
                reading.spec.width,
                reading.spec.height,
                &reading.image,
            )?;
            files.push(name);
            counter += 1;
        }
        reading_files.push(files);
    }
    let sensor = dp
        .grasps
        .iter()
        .flat_map(|g| g.readings.first())
        .map(|(_, r)| r.spec.clone())
        .next()
        .expect("at least one reading per data point");
    let json = SceneJson {
        category: dp.category.clone(),
        seed: dp.seed,
        scale: dp.scale,
        stiffness: dp.stiffness,
        chosen_view: dp.chosen_view,
        n_points: dp.cloud.len(),
        sensor: DatagenSensorJson {
            width: sensor.width,
            height: sensor.height,
            gel_size: sensor.gel_size,
            gel_rest_depth: sensor.gel_rest_depth,
            max_indentation: sensor.max_indentation,
        },
        cameras: dp
            .cameras
            .iter()
            .map(|c| CameraJson {
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                width: c.width,
                height: c.height,
                pose: PoseJson::from(&c.pose),
            })
            .collect(),
        grasps: dp
            .grasps
            .iter()
            .zip(&reading_files)
            .map(|(g, files)| GraspJson {
                theta: g.pose.to_vec(),
                touching: g.touching.clone(),
                readings: g
                    .readings
                    .iter()
                    .zip(files)
                    .map(|((finger, r), file)| ReadingJson {
                        finger: *finger,
                        file: file.clone(),
                        pose: PoseJson::from(&r.pose),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut f = std::fs::File::create(dir.join("poses.json"))?;
    f.write_all(
        serde_json::to_string_pretty(&json)
            .map_err(|e| Error::Eval(e.to_string()))?
            .as_bytes(),
    )?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Generates `train + test + val` scenes cycling over `specs`, writes them
/// under `out_dir`, and finishes with `manifest.jsonl`. Seeds are disjoint
/// across scenes (`base_seed + index`). Returns the manifest path.
pub fn generate_dataset(
    specs: &[SceneSpec],
    counts: (usize, usize, usize),
    out_dir: &Path,
    base_seed: u64,
    cfg: &DatagenConfig,
) -> Result<PathBuf> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("dataset needs at least one scene spec".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let (train, test, val) = counts;
    let total = train + test + val;
    std::fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.jsonl");

    let result = (|| -> Result<()> {
        let mut rows = Vec::with_capacity(total);
        for i in 0..total {
            let spec = &specs[i % specs.len()];
            let seed = base_seed + i as u64;
            // Grasp placement can fail on hard seeds; retry with an offset
            // stream, still deterministic.
            let mut dp = None;
            for attempt in 0..8u64 {
                match generate_datapoint(spec, cfg, seed + attempt * 0x1000_0000) {
                    Ok(d) => {
                        dp = Some(d);
                        break;
                    }
                    Err(Error::NoSuccessfulTouch) => continue,
                    Err(e) => return Err(e),
                }
            }
            let dp = dp.ok_or(Error::NoSuccessfulTouch)?;
            let name = format!("scene_{i:04}");
            write_datapoint(&out_dir.join(&name), &dp)?;
            let split = if i < train {
                "train"
            } else if i < train + test {
                "test"
            } else {
                "val"
            };
            rows.push(ManifestRow {
                scene: name.clone(),
                path: name,
                category: dp.category.clone(),
                split: split.into(),
                seed: dp.seed,
                grasps: dp.grasps.len(),
                deformable: dp.stiffness < 1.0,
            });
        }
        let mut f = std::fs::File::create(&manifest_path)?;
        for row in &rows {
            let line = serde_json::to_string(row).map_err(|e| Error::Eval(e.to_string()))?;
            f.write_all(line.as_bytes())?;
            f.write_all(b"\n")?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&manifest_path);
        return Err(e);
    }
    Ok(manifest_path)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(line)
                .map_err(|e| Error::parse(path.display().to_string(), format!("row {i}: {e}")))?,
        );
    }
    Ok(rows)
}

/// A scene loaded back from disk, ready for evaluation or training prep.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub dir: PathBuf,
    pub category: String,
    pub seed: u64,
    pub mesh: TriangleMesh,
    pub wnf: WnfGrid,
    pub cloud: PointCloud,
    /// (grasp index, finger, reading) in file order.
    pub readings: Vec<(usize, usize, TactileReading)>,
    pub hand_poses: Vec<HandPose>,
    pub chosen_view: usize,
}

pub fn load_scene(dir: &Path) -> Result<LoadedScene> {
    let text = std::fs::read_to_string(dir.join("poses.json"))?;
    let meta: SceneJson = serde_json::from_str(&text)
        .map_err(|e| Error::parse(dir.display().to_string(), e.to_string()))?;
    let mesh = geom_io::read_obj(&dir.join("mesh.obj"))?;
    let wnf = geom_io::read_wng(&dir.join("wnf.wng"))?;

    // Rebuild the input cloud deterministically from the stored view.
    let cam_json = meta
        .cameras
        .get(meta.chosen_view)
        .ok_or_else(|| Error::parse(dir.display().to_string(), "chosen view out of range"))?;
    let cam = PinholeCamera::new(
        cam_json.fx,
        cam_json.fy,
        cam_json.cx,
        cam_json.cy,
        cam_json.width,
        cam_json.height,
        cam_json.pose.to_transform()?,
    )?;
    let depth = geom_io::read_depth(&dir.join(format!("view_{}.depth", meta.chosen_view)))?;
    let full = backproject_depth(&cam, &depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(meta.seed ^ 0xc10d);
    let cloud = subsample_cloud(&full, meta.n_points, &mut rng)?;

    let sensor = TactileSensorSpec::new(
        meta.sensor.width,
        meta.sensor.height,
        meta.sensor.gel_size,
        meta.sensor.gel_rest_depth,
        meta.sensor.max_indentation,
    )?;
    let mut readings = Vec::new();
    let mut hand_poses = Vec::new();
    for (gi, grasp) in meta.grasps.iter().enumerate() {
        hand_poses.push(HandPose::from_vec(&grasp.theta)?);
        for r in &grasp.readings {
            let (w, h, image) = geom_io::read_pgm16(&dir.join(&r.file))?;
            if (w, h) != (sensor.width, sensor.height) {
                return Err(Error::parse(
                    dir.display().to_string(),
                    format!("tactile image {} has unexpected size", r.file),
                ));
            }
            readings.push((
                gi,
                r.finger,
                TactileReading::new(image, r.pose.to_transform()?, sensor.clone())?,
            ));
        }
    }
    Ok(LoadedScene {
        dir: dir.to_path_buf(),
        category: meta.category,
        seed: meta.seed,
        mesh,
        wnf,
        cloud,
        readings,
        hand_poses,
        chosen_view: meta.chosen_view,
    })
}

/// Prepares an in-memory data point for training without a disk round trip.
pub fn train_scene_from_datapoint(
    dp: &DataPoint,
    model_cfg: &crate::neural::ModelConfig,
    sampling: &SamplingConfig,
) -> Result<TrainScene> {
    let prep = crate::neural::PreparedCloud::new(model_cfg, &dp.cloud)?;
    let readings: Vec<(usize, &TactileReading)> = dp
        .grasps
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| g.readings.iter().map(move |(_, r)| (gi, r)))
        .collect();
    let patches: Vec<crate::tactile::ContactPatch> = readings
        .iter()
        .enumerate()
        .map(|(i, (_, r))| crate::tactile::contact_patch(r, i))
        .collect();
    let bvh = Bvh::build(&dp.mesh);
    let pool = build_scene_pool(&dp.mesh, &bvh, &patches, sampling, dp.seed ^ 0x900d)?;
    Ok(TrainScene {
        prep,
        pool,
        tactile_images: readings.iter().map(|(_, r)| r.image.clone()).collect(),
        reading_grasp: readings.iter().map(|(g, _)| *g).collect(),
        grasp_count: dp.grasps.len(),
    })
}

/// Prepares a loaded scene for training: preprocessed cloud, contact
/// patches, and the exact-winding query pool.
pub fn to_train_scene(
    loaded: &LoadedScene,
    model_cfg: &crate::neural::ModelConfig,
    sampling: &SamplingConfig,
) -> Result<TrainScene> {
    let prep = crate::neural::PreparedCloud::new(model_cfg, &loaded.cloud)?;
    let patches: Vec<crate::tactile::ContactPatch> = loaded
        .readings
        .iter()
        .enumerate()
        .map(|(i, (_, _, r))| crate::tactile::contact_patch(r, i))
        .collect();
    let bvh = Bvh::build(&loaded.mesh);
    let pool = build_scene_pool(&loaded.mesh, &bvh, &patches, sampling, loaded.seed ^ 0x900d)?;
    let grasp_count = loaded
        .readings
        .iter()
        .map(|(g, _, _)| g + 1)
        .max()
        .unwrap_or(0);
    Ok(TrainScene {
        prep,
        pool,
        tactile_images: loaded
            .readings
            .iter()
            .map(|(_, _, r)| r.image.clone())
            .collect(),
        reading_grasp: loaded.readings.iter().map(|(g, _, _)| *g).collect(),
        grasp_count,
    })
}
