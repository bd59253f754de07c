//! Synthetic scene generation: analytic meshes, heuristic grasps, contact
//! indentation, depth/tactile rendering, ground-truth winding-number grids,
//! and the on-disk dataset layout.

mod grasp;
mod indent;
mod scene;
mod shapes;

pub use grasp::{grasp_sensor_poses, place_grasp, ContactTarget, Grasp, CONTACT_TOLERANCE};
pub use indent::{indent_mesh, IndentSite};
pub use scene::{
    generate_datapoint, generate_dataset, load_scene, read_manifest, to_train_scene,
    train_scene_from_datapoint, DataPoint,
    DatagenConfig, GraspRecord, LoadedScene, ManifestRow, ObjectSource, SceneSpec,
};
pub use shapes::{box_mesh, icosphere, make_analytic_mesh, AnalyticShape};
