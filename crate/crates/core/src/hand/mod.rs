//! Simplified articulated hand: five 3-segment finger chains with fixed bone
//! geometry, fingertip sensor offsets, query-sphere sampling around contact
//! patches, and the pose-supervision loss.
//!
//! A pose is 51 scalars: wrist translation (3) + wrist axis-angle (3), then
//! per finger (thumb..pinky) per joint (proximal..distal) an axis-angle
//! vector (x, y, z). Joint angles are limited to [-π/2, π/2] per axis.

use crate::geom::{Point3, PointCloud, RigidTransform, Vector3};
use crate::tactile::ContactPatch;
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FINGERS: usize = 5;
pub const SEGMENTS: usize = 3;
/// Per-axis joint limit (radians).
pub const JOINT_LIMIT: f64 = std::f64::consts::FRAC_PI_2;
/// Default query-sphere radius in scene units.
pub const DEFAULT_QUERY_RADIUS: f64 = 0.1;

/// Fixed bone geometry plus fingertip-to-sensor offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    /// Per-finger offset of the proximal joint from the wrist frame.
    pub base_offsets: [Vector3; FINGERS],
    /// Per-finger, per-segment bone lengths (meters); bones extend along the
    /// local +x axis after each joint rotation.
    pub segment_lengths: [[f64; SEGMENTS]; FINGERS],
    /// Fixed tip-to-sensor transforms, constant per model instance.
    pub tip_to_sensor: [RigidTransform; FINGERS],
}

impl HandModel {
    pub fn new(
        base_offsets: [Vector3; FINGERS],
        segment_lengths: [[f64; SEGMENTS]; FINGERS],
        tip_to_sensor: [RigidTransform; FINGERS],
    ) -> Result<Self> {
        for finger in &segment_lengths {
            if finger.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::InvalidArgument(
                    "segment lengths must be positive".into(),
                ));
            }
        }
        Ok(Self {
            base_offsets,
            segment_lengths,
            tip_to_sensor,
        })
    }

    /// Desk-scale hand sized for unit-cube objects. The sensor sits behind
    /// the fingertip along the tip z axis so the gel rest plane lands on the
    /// touched surface at half indentation.
    pub fn desk_default(gel_rest_depth: f64, max_indentation: f64) -> Self {
        let base_offsets = [
            Vector3::new(0.05, -0.16, 0.0),
            Vector3::new(0.12, -0.08, 0.0),
            Vector3::new(0.13, 0.0, 0.0),
            Vector3::new(0.12, 0.08, 0.0),
            Vector3::new(0.10, 0.16, 0.0),
        ];
        let segment_lengths = [
            [0.22, 0.18, 0.14],
            [0.26, 0.20, 0.15],
            [0.28, 0.22, 0.16],
            [0.26, 0.20, 0.15],
            [0.22, 0.17, 0.13],
        ];
        let pullback = gel_rest_depth - 0.5 * max_indentation;
        let t = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -pullback));
        HandModel {
            base_offsets,
            segment_lengths,
            tip_to_sensor: [t; FINGERS],
        }
    }

    pub fn max_reach(&self, finger: usize) -> f64 {
        self.segment_lengths[finger].iter().sum()
    }
}

/// Wrist 6-DOF plus 45 joint angles.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub wrist_translation: Vector3,
    pub wrist_rotation: Vector3,
    /// `joints[finger][segment]` is an axis-angle vector.
    pub joints: [[Vector3; SEGMENTS]; FINGERS],
}

impl HandPose {
    pub fn zero() -> Self {
        Self {
            wrist_translation: Vector3::zeros(),
            wrist_rotation: Vector3::zeros(),
            joints: [[Vector3::zeros(); SEGMENTS]; FINGERS],
        }
    }

    /// Flattens to the documented 51-float order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(51);
        v.extend_from_slice(self.wrist_translation.as_slice());
        v.extend_from_slice(self.wrist_rotation.as_slice());
        for finger in &self.joints {
            for joint in finger {
                v.extend_from_slice(joint.as_slice());
            }
        }
        v
    }

    pub fn from_vec(values: &[f64]) -> Result<Self> {
        if values.len() != 51 {
            return Err(Error::DimensionMismatch(format!(
                "hand pose needs 51 scalars, got {}",
                values.len()
            )));
        }
        let mut pose = HandPose::zero();
        pose.wrist_translation = Vector3::new(values[0], values[1], values[2]);
        pose.wrist_rotation = Vector3::new(values[3], values[4], values[5]);
        let mut k = 6;
        for f in 0..FINGERS {
            for s in 0..SEGMENTS {
                pose.joints[f][s] = Vector3::new(values[k], values[k + 1], values[k + 2]);
                k += 3;
            }
        }
        Ok(pose)
    }

    /// Joints whose any axis-angle component exceeds the limit.
    pub fn limit_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for f in 0..FINGERS {
            for s in 0..SEGMENTS {
                if self.joints[f][s].iter().any(|a| a.abs() > JOINT_LIMIT + 1e-12) {
                    out.push((f, s));
                }
            }
        }
        out
    }

    pub fn wrist_transform(&self) -> RigidTransform {
        RigidTransform::from_axis_angle(self.wrist_rotation, self.wrist_translation)
    }
}

fn check_limits(pose: &HandPose) -> Result<()> {
    let bad = pose.limit_violations();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::JointLimits(format!(
            "joints out of [-pi/2, pi/2]: {bad:?}"
        )))
    }
}

/// Serial-chain forward kinematics: wrist, finger base offset, then rotate +
/// translate along each bone. Returns the five fingertip frames.
pub fn fingertip_frames(model: &HandModel, pose: &HandPose) -> Result<[RigidTransform; FINGERS]> {
    check_limits(pose)?;
    let wrist = pose.wrist_transform();
    let mut frames = [RigidTransform::identity(); FINGERS];
    for f in 0..FINGERS {
        let mut frame = wrist.compose(&RigidTransform::from_translation(model.base_offsets[f]));
        for s in 0..SEGMENTS {
            let joint = RigidTransform::from_axis_angle(pose.joints[f][s], Vector3::zeros());
            let bone = RigidTransform::from_translation(Vector3::new(
                model.segment_lengths[f][s],
                0.0,
                0.0,
            ));
            frame = frame.compose(&joint).compose(&bone);
        }
        frames[f] = frame;
    }
    Ok(frames)
}

/// Fingertip positions (translations of the tip frames).
pub fn forward_kinematics(model: &HandModel, pose: &HandPose) -> Result<[Point3; FINGERS]> {
    let frames = fingertip_frames(model, pose)?;
    Ok(frames.map(|f| Point3::from(f.translation())))
}

/// Sensor poses: each tip frame composed with the fixed tip-to-sensor offset.
pub fn sensor_poses(model: &HandModel, pose: &HandPose) -> Result<[RigidTransform; FINGERS]> {
    let frames = fingertip_frames(model, pose)?;
    let mut out = [RigidTransform::identity(); FINGERS];
    for f in 0..FINGERS {
        out[f] = frames[f].compose(&model.tip_to_sensor[f]);
    }
    Ok(out)
}

/// Samples `n` positions uniformly inside the union of radius-`radius` balls
/// centered at the patch points (ball picked uniformly, acceptance weighted
/// by overlap count). Deterministic per seed; empty patches give an empty
/// cloud.
pub fn sphere_query_positions(
    patches: &[ContactPatch],
    radius: f64,
    n: usize,
    seed: u64,
) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("query radius must be positive".into()));
    }
    let centers: Vec<Point3> = patches
        .iter()
        .flat_map(|p| p.points.points().iter().copied())
        .collect();
    if centers.is_empty() || n == 0 {
        return Ok(PointCloud::empty());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let c = centers[rng.random_range(0..centers.len())];
        // Uniform in the ball via radius ~ cbrt(u).
        let dir = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let len = v.norm();
            if len > 1e-9 && len <= 1.0 {
                break v / len;
            }
        };
        let r = radius * rng.random_range(0.0..1.0f64).cbrt();
        let p = c + dir * r;
        // Uniformity over the union: accept with probability 1/overlap.
        let overlap = centers.iter().filter(|&&o| (p - o).norm() <= radius).count();
        if overlap <= 1 || rng.random_range(0..overlap) == 0 {
            points.push(p);
        }
    }
    PointCloud::new(points)
}

/// Pose-supervision loss: squared L2 over all 51 pose scalars.
pub fn hand_loss(pred: &HandPose, gt: &HandPose) -> f64 {
    pred.to_vec()
        .iter()
        .zip(gt.to_vec().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}
