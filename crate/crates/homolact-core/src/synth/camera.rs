use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{BodyModel, JointSequence, Pose2D, Pose3D, SequenceMeta};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraKind {
    /// Orthographic projection scaled by `focal / distance`.
    Affine,
    Perspective,
}

/// World-to-camera map `X_c = R X + t`; the camera looks along `+z_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    kind: CameraKind,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    focal: f64,
    principal: [f64; 2],
}

impl CameraModel {
    pub fn new(
        kind: CameraKind,
        rotation: Matrix3<f64>,
        translation: [f64; 3],
        focal: f64,
        principal: [f64; 2],
    ) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(err <= 1e-9) || !(rotation.determinant() > 0.0) {
            return Err(Error::InvalidRig(format!("rotation is not orthonormal (error {err:e})")));
        }
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::InvalidRig(format!("focal length must be positive, got {focal}")));
        }
        if translation.iter().chain(&principal).any(|v| !v.is_finite()) {
            return Err(Error::InvalidRig("non-finite camera parameter".into()));
        }
        Ok(Self {
            kind,
            rotation,
            translation: Vector3::from(translation),
            focal,
            principal,
        })
    }

    /// Camera at `eye` looking at `target` with world `+z` up, rolled by
    /// `roll` radians about its optical axis.
    pub fn look_at(
        kind: CameraKind,
        eye: [f64; 3],
        target: [f64; 3],
        roll: f64,
        focal: f64,
        principal: [f64; 2],
    ) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = Vector3::from(target) - eye;
        let up = Vector3::z();
        let right = forward.cross(&up);
        if forward.norm() == 0.0 || right.norm() <= 1e-9 * forward.norm() {
            return Err(Error::InvalidRig("viewing direction is vertical or undefined".into()));
        }
        let z = forward.normalize();
        let x = right.normalize();
        let y = z.cross(&x);
        let base = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let spin = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::z()), roll);
        let rotation = spin.matrix() * base;
        let translation = -(rotation * eye);
        Self::new(kind, rotation, translation.into(), focal, principal)
    }

    pub fn kind(&self) -> CameraKind {
        self.kind
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation.into()
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal(&self) -> [f64; 2] {
        self.principal
    }

    /// Distance from the camera centre to the world origin of its frame.
    pub fn distance(&self) -> f64 {
        self.translation.norm()
    }

    /// Camera centre in world coordinates, `-Rᵀ t`.
    pub fn centre(&self) -> [f64; 3] {
        let c = -(self.rotation.transpose() * self.translation);
        [c.x, c.y, c.z]
    }

    /// Image point of a world point, or `None` behind a perspective camera.
    pub fn project_point(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let c = self.rotation * Vector3::from(p) + self.translation;
        match self.kind {
            CameraKind::Affine => {
                let s = self.focal / self.distance().max(f64::MIN_POSITIVE);
                Some([s * c.x + self.principal[0], s * c.y + self.principal[1]])
            }
            CameraKind::Perspective => {
                if c.z <= 0.0 {
                    return None;
                }
                Some([
                    self.focal * c.x / c.z + self.principal[0],
                    self.focal * c.y / c.z + self.principal[1],
                ])
            }
        }
    }

    /// Joints behind a perspective camera are marked invalid.
    pub fn project_pose(&self, pose: &Pose3D) -> Pose2D {
        let (points, valid): (Vec<_>, Vec<_>) = pose
            .points
            .iter()
            .map(|p| match self.project_point(*p) {
                Some(q) => (q, true),
                None => (self.principal, false),
            })
            .unzip();
        Pose2D::with_validity(points, valid).expect("projected coordinates are finite")
    }
}

pub fn project(poses: &[Pose3D], camera: &CameraModel, meta: SequenceMeta, model: &BodyModel) -> Result<JointSequence> {
    JointSequence::new(poses.iter().map(|p| camera.project_pose(p)).collect(), meta, model)
}

/// Cameras on a spherical sector around `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigSpec {
    pub count: usize,
    pub seed: u64,
    pub kind: CameraKind,
    /// Metres from `target`.
    pub radius: (f64, f64),
    /// Degrees above the horizontal plane through `target`.
    pub elevation: (f64, f64),
    /// Maximum roll about the optical axis, degrees.
    pub roll_jitter: f64,
    pub focal: f64,
    pub principal: [f64; 2],
    pub target: [f64; 3],
    /// Radius of a sphere around `target` containing the subject; cameras stay outside it.
    pub subject_radius: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            count: 17,
            seed: 0,
            kind: CameraKind::Affine,
            radius: (8.0, 12.0),
            elevation: (-10.0, 40.0),
            roll_jitter: 5.0,
            focal: 1000.0,
            principal: [0.0, 0.0],
            target: [0.0, 0.0, 1.0],
            subject_radius: 2.5,
        }
    }
}

fn ordered(range: (f64, f64), what: &str) -> Result<()> {
    if range.0.is_finite() && range.1.is_finite() && range.0 <= range.1 {
        Ok(())
    } else {
        Err(Error::InvalidRig(format!("invalid {what} range {range:?}")))
    }
}

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

pub fn random_rig(spec: &RigSpec) -> Result<Vec<CameraModel>> {
    if spec.count == 0 {
        return Err(Error::InvalidRig("camera count must be at least 1".into()));
    }
    ordered(spec.radius, "radius")?;
    ordered(spec.elevation, "elevation")?;
    if spec.radius.0 <= spec.subject_radius {
        return Err(Error::InvalidRig(format!(
            "minimum radius {} does not clear the subject radius {}",
            spec.radius.0, spec.subject_radius
        )));
    }
    if spec.elevation.0 < -80.0 || spec.elevation.1 > 80.0 {
        return Err(Error::InvalidRig("elevation must stay within ±80 degrees".into()));
    }
    if !(spec.roll_jitter >= 0.0 && spec.roll_jitter < 180.0) {
        return Err(Error::InvalidRig(format!("roll jitter {} out of range", spec.roll_jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let deg = PI / 180.0;
    (0..spec.count)
        .map(|_| {
            let azimuth = rng.random_range(0.0..2.0 * PI);
            let elevation = draw(&mut rng, spec.elevation) * deg;
            let radius = draw(&mut rng, spec.radius);
            let roll = draw(&mut rng, (-spec.roll_jitter, spec.roll_jitter)) * deg;
            let (ca, sa) = (libm::cos(azimuth), libm::sin(azimuth));
            let (ce, se) = (libm::cos(elevation), libm::sin(elevation));
            let t = spec.target;
            let eye = [t[0] + radius * ce * ca, t[1] + radius * ce * sa, t[2] + radius * se];
            CameraModel::look_at(spec.kind, eye, t, roll, spec.focal, spec.principal)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homology::affinity_from_triplet;
    use alloc::vec;

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::look_at(CameraKind::Perspective, [5.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.3, 800.0, [320.0, 240.0])
            .unwrap();
        let p = cam.project_point([-3.0, 0.0, 1.0]).unwrap();
        assert!((p[0] - 320.0).abs() < 1e-9 && (p[1] - 240.0).abs() < 1e-9);
        assert_eq!(cam.project_point([9.0, 0.0, 1.0]), None);
    }

    #[test]
    fn affine_projection_ignores_depth() {
        let cam = CameraModel::look_at(CameraKind::Affine, [3.0, 4.0, 2.0], [0.0, 0.0, 1.0], 0.1, 500.0, [0.0, 0.0]).unwrap();
        let axis = Vector3::from([0.0, 0.0, 1.0]) - Vector3::from([3.0, 4.0, 2.0]);
        let shift = axis.normalize() * 0.7;
        let p = [0.2, -0.3, 1.4];
        let q = [p[0] + shift.x, p[1] + shift.y, p[2] + shift.z];
        let (a, b) = (cam.project_point(p).unwrap(), cam.project_point(q).unwrap());
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn rotations_are_orthonormal_and_upright() {
        let spec = RigSpec::default();
        for cam in random_rig(&spec).unwrap() {
            let r = cam.rotation();
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            let d = (Vector3::from(cam.centre()) - Vector3::from(spec.target)).norm();
            assert!(d >= spec.radius.0 - 1e-9 && d <= spec.radius.1 + 1e-9 && d > spec.subject_radius);
        }
        assert!(CameraModel::new(CameraKind::Affine, Matrix3::identity() * 2.0, [0.0; 3], 1.0, [0.0; 2]).is_err());
        assert!(CameraModel::new(CameraKind::Perspective, Matrix3::identity(), [0.0; 3], 0.0, [0.0; 2]).is_err());
    }

    #[test]
    fn rigs_are_deterministic_and_distinct() {
        let spec = RigSpec::default();
        let a = random_rig(&spec).unwrap();
        assert_eq!(a.len(), 17);
        assert_eq!(a, random_rig(&spec).unwrap());
        for i in 0..a.len() {
            for j in 0..i {
                assert_ne!(a[i].translation(), a[j].translation());
            }
        }
        let other = random_rig(&RigSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn collapsed_elevation_range() {
        let spec = RigSpec {
            elevation: (20.0, 20.0),
            ..RigSpec::default()
        };
        for cam in random_rig(&spec).unwrap() {
            // The camera centre is -Rᵀt.
            let centre = -(cam.rotation().transpose() * Vector3::from(cam.translation()));
            let rel = centre - Vector3::from(spec.target);
            let elevation = libm::asin(rel.z / rel.norm()) * 180.0 / PI;
            assert!((elevation - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rig_validation() {
        let bad = [
            RigSpec { count: 0, ..RigSpec::default() },
            RigSpec { radius: (2.0, 10.0), ..RigSpec::default() },
            RigSpec { radius: (10.0, 8.0), ..RigSpec::default() },
            RigSpec { elevation: (0.0, 90.0), ..RigSpec::default() },
        ];
        for spec in bad {
            assert!(matches!(random_rig(&spec), Err(Error::InvalidRig(_))));
        }
    }

    #[test]
    fn planar_triplet_maps_by_one_affinity_between_affine_views() {
        let spec = RigSpec::default();
        let cams = random_rig(&spec).unwrap();
        // Points on the plane x + 2y - z = -1.
        let plane = |u: f64, v: f64| [u, v, u + 2.0 * v + 1.0];
        let world: Vec<_> = [(0.1, 0.2), (0.5, -0.3), (-0.4, 0.1), (0.3, 0.4), (-0.2, -0.5)]
            .iter()
            .map(|(u, v)| plane(*u, *v))
            .collect();
        for pair in cams.windows(2) {
            let a: Vec<_> = world.iter().map(|p| pair[0].project_point(*p).unwrap()).collect();
            let b: Vec<_> = world.iter().map(|p| pair[1].project_point(*p).unwrap()).collect();
            let h = affinity_from_triplet(&[a[0], a[1], a[2]], &[b[0], b[1], b[2]], 1e-8).unwrap();
            let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for (p, q) in a.iter().zip(&b).skip(3) {
                let r = h.apply(*p);
                assert!((r[0] - q[0]).abs() <= 1e-9 * scale && (r[1] - q[1]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn joints_behind_the_camera_are_invalid() {
        let cam = CameraModel::look_at(CameraKind::Perspective, [5.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.0, 800.0, [0.0; 2]).unwrap();
        let pose = Pose3D::new(vec![[0.0, 0.0, 1.0], [6.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 2.0]]).unwrap();
        let img = cam.project_pose(&pose);
        assert_eq!(img.validity(), &[true, false, true, true]);
    }
}
