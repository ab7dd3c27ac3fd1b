//! Body model, poses and labeled joint sequences.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default joint labels of the 11-point body model.
pub const DEFAULT_JOINTS: [&str; 11] = [
    "head",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_hand",
    "r_hand",
    "l_knee",
    "r_knee",
    "l_foot",
    "r_foot",
];

/// Ordered set of labeled body points.
///
/// The order is fixed for the lifetime of a dataset: triplet ordinals,
/// weight vectors and file columns all index into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyModel {
    labels: Vec<String>,
}

impl BodyModel {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 4 {
            return Err(Error::InvalidModel(alloc::format!(
                "need at least 4 joints, got {}",
                labels.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() || label.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(Error::InvalidModel(alloc::format!(
                    "joint label `{label}` must be non-empty without whitespace or commas"
                )));
            }
            if labels[..i].contains(label) {
                return Err(Error::InvalidModel(alloc::format!(
                    "duplicate joint label `{label}`"
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn joint_count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `C(n, 3)`.
    pub fn triplet_count(&self) -> usize {
        let n = self.labels.len();
        n * (n - 1) * (n - 2) / 6
    }
}

impl Default for BodyModel {
    fn default() -> Self {
        Self {
            labels: DEFAULT_JOINTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// One frame of image-plane joint coordinates with per-joint validity.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose2D {
    points: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl Pose2D {
    /// All joints valid. Coordinates must be finite.
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let valid = alloc::vec![true; points.len()];
        Self::with_validity(points, valid)
    }

    /// Coordinates of invalid joints are stored as given but must still be finite.
    pub fn with_validity(points: Vec<[f64; 2]>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != valid.len() {
            return Err(Error::JointCountMismatch {
                expected: points.len(),
                found: valid.len(),
            });
        }
        if let Some(joint) = points
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::NonFiniteCoordinate { joint });
        }
        Ok(Self { points, valid })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn point(&self, joint: usize) -> [f64; 2] {
        self.points[joint]
    }

    pub fn is_valid(&self, joint: usize) -> bool {
        self.valid[joint]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] * factor, p[1] * factor])
                .collect(),
            valid: self.valid.clone(),
        }
    }
}

/// One frame of world joint coordinates, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D {
    pub points: Vec<[f64; 3]>,
}

impl Pose3D {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if let Some(joint) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFiniteCoordinate { joint });
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Action, subject and camera labels attached to a sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceMeta {
    pub action: String,
    pub subject: String,
    pub camera: String,
    pub frame_rate: Option<f64>,
}

/// Ordered 2D poses of one observed action instance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSequence {
    poses: Vec<Pose2D>,
    pub meta: SequenceMeta,
}

impl JointSequence {
    /// Validates length and that every pose conforms to `model`.
    pub fn new(poses: Vec<Pose2D>, meta: SequenceMeta, model: &BodyModel) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::SequenceTooShort(poses.len()));
        }
        let n = model.joint_count();
        if let Some(p) = poses.iter().find(|p| p.len() != n) {
            return Err(Error::JointCountMismatch {
                expected: n,
                found: p.len(),
            });
        }
        Ok(Self { poses, meta })
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.poses[0].len()
    }

    /// Uniformly rescales all image coordinates.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            poses: self.poses.iter().map(|p| p.scaled(factor)).collect(),
            meta: self.meta.clone(),
        }
    }
}
