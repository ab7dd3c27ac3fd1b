//! Pose-transition similarity summed over all body-point triplets.
//!
//! Two routes compute the same per-triplet errors:
//!
//! * [`transition_similarity`] fits the two triplet affinities, forms
//!   `H1 * H2^-1` and takes its 3x3 eigenvalues.
//! * [`TransitionMotion`] caches, per transition and triplet, the 2x2
//!   linear part of the frame-to-frame triangle motion. An affinity product
//!   `H1 * H2^-1` is conjugate to `diag(U_A * V_B, 1)` where
//!   `U_A = L_A1^-1 L_A2` and `V_B = L_B2^-1 L_B1` (`L` = triangle edge
//!   matrix), so its spectrum is `{1} ∪ eig(U_A V_B)`. Cost matrices use
//!   this route; it avoids refitting affinities for every cell.

use alloc::vec::Vec;

use nalgebra::Complex;

use crate::body::{BodyModel, Pose2D};
use crate::error::{Error, Result};
use crate::homology::{
    affinity_from_triplet, closest_pair, homology_score, normalized_area, GeometryConfig,
};
use crate::triplet::{enumerate_for, TripletId};

/// Per-triplet errors of one matched transition pair.
///
/// `excluded[t]` marks triplets that touch an invalid joint, are collinear
/// in some frame, or have no scorable eigenvalue pair. Their `values`
/// entry is `0.0` and must not be read as a score.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionErrorVector {
    pub values: Vec<f64>,
    pub excluded: Vec<bool>,
}

impl TransitionErrorVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.excluded.iter().filter(|e| !**e).count()
    }

    pub fn excluded_count(&self) -> usize {
        self.len() - self.valid_count()
    }

    /// Sum of the unexcluded entries.
    pub fn total(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.excluded)
            .filter(|(_, e)| !**e)
            .map(|(v, _)| *v)
            .sum()
    }

    fn check(&self, config: &GeometryConfig) -> Result<()> {
        let total = self.len();
        let required = required_valid(total, config.min_valid_fraction);
        let valid = self.valid_count();
        if valid < required || valid == 0 {
            return Err(Error::TooFewValidTriplets {
                valid,
                total,
                required,
            });
        }
        Ok(())
    }
}

fn required_valid(total: usize, fraction: f64) -> usize {
    libm::ceil(total as f64 * fraction.clamp(0.0, 1.0)) as usize
}

fn triangle(pose: &Pose2D, t: &TripletId) -> Option<[[f64; 2]; 3]> {
    let joints = t.joints();
    if joints.iter().all(|&j| pose.is_valid(j)) {
        Some(joints.map(|j| pose.point(j)))
    } else {
        None
    }
}

/// Per-triplet error vector of two transitions, direct 3x3 route.
///
/// For each triplet, `H1` maps the target's first-frame triangle to the
/// reference's first-frame triangle and `H2` does the same for the second
/// frames; the error is the homology score of `H1 * H2^-1`.
pub fn transition_errors(
    target: (&Pose2D, &Pose2D),
    reference: (&Pose2D, &Pose2D),
    model: &BodyModel,
    config: &GeometryConfig,
) -> Result<TransitionErrorVector> {
    let n = model.joint_count();
    for p in [target.0, target.1, reference.0, reference.1] {
        if p.len() != n {
            return Err(Error::JointCountMismatch {
                expected: n,
                found: p.len(),
            });
        }
    }
    let triplets = enumerate_for(n);
    let mut values = Vec::with_capacity(triplets.len());
    let mut excluded = Vec::with_capacity(triplets.len());
    for t in &triplets {
        let score = (|| {
            let a1 = triangle(target.0, t)?;
            let a2 = triangle(target.1, t)?;
            let b1 = triangle(reference.0, t)?;
            let b2 = triangle(reference.1, t)?;
            let h1 = affinity_from_triplet(&a1, &b1, config.eps_area).ok()?;
            let h2 = affinity_from_triplet(&a2, &b2, config.eps_area).ok()?;
            homology_score(&h1, &h2, config).ok().map(|s| s.score)
        })();
        values.push(score.unwrap_or(0.0));
        excluded.push(score.is_none());
    }
    Ok(TransitionErrorVector { values, excluded })
}

/// Summed triplet error of two pose transitions and the per-triplet vector.
///
/// Fails with `TooFewValidTriplets` when fewer than
/// `min_valid_fraction * C(n, 3)` triplets survive exclusion.
pub fn transition_similarity(
    target: (&Pose2D, &Pose2D),
    reference: (&Pose2D, &Pose2D),
    model: &BodyModel,
    config: &GeometryConfig,
) -> Result<(f64, TransitionErrorVector)> {
    let errors = transition_errors(target, reference, model, config)?;
    errors.check(config)?;
    Ok((errors.total(), errors))
}

/// Cached 2x2 triangle motion of one transition, for every triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMotion {
    /// `None` when the triplet is excluded.
    motions: Vec<Option<Motion>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Motion {
    /// Row-major 2x2 linear motion.
    m: [f64; 4],
    /// Second-frame edge determinant, for the `eps_det` check on `H2`.
    det_second: f64,
}

fn edges(tri: &[[f64; 2]; 3]) -> [f64; 4] {
    [
        tri[1][0] - tri[0][0],
        tri[2][0] - tri[0][0],
        tri[1][1] - tri[0][1],
        tri[2][1] - tri[0][1],
    ]
}

fn det2(m: &[f64; 4]) -> f64 {
    m[0] * m[3] - m[1] * m[2]
}

fn mul2(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn inv2(m: &[f64; 4]) -> [f64; 4] {
    let d = det2(m);
    [m[3] / d, -m[1] / d, -m[2] / d, m[0] / d]
}

/// Eigenvalues of a real 2x2 matrix, computed without cancellation in the discriminant.
fn eigenvalues2(m: &[f64; 4]) -> [Complex<f64>; 2] {
    let half_tr = 0.5 * (m[0] + m[3]);
    let half_diff = 0.5 * (m[0] - m[3]);
    let disc = half_diff * half_diff + m[1] * m[2];
    if disc >= 0.0 {
        let root = libm::sqrt(disc);
        let big = if half_tr >= 0.0 {
            half_tr + root
        } else {
            half_tr - root
        };
        let small = if big != 0.0 { det2(m) / big } else { half_tr - root };
        [Complex::new(big, 0.0), Complex::new(small, 0.0)]
    } else {
        let im = libm::sqrt(-disc);
        [Complex::new(half_tr, im), Complex::new(half_tr, -im)]
    }
}

impl TransitionMotion {
    /// Target-side motion `U = L1^-1 L2`.
    pub fn target(first: &Pose2D, second: &Pose2D, triplets: &[TripletId], config: &GeometryConfig) -> Self {
        Self::build(first, second, triplets, config, false)
    }

    /// Reference-side motion `V = L2^-1 L1`.
    pub fn reference(first: &Pose2D, second: &Pose2D, triplets: &[TripletId], config: &GeometryConfig) -> Self {
        Self::build(first, second, triplets, config, true)
    }

    fn build(
        first: &Pose2D,
        second: &Pose2D,
        triplets: &[TripletId],
        config: &GeometryConfig,
        reverse: bool,
    ) -> Self {
        let motions = triplets
            .iter()
            .map(|t| {
                let t1 = triangle(first, t)?;
                let t2 = triangle(second, t)?;
                if normalized_area(&t1).abs() < config.eps_area
                    || normalized_area(&t2).abs() < config.eps_area
                {
                    return None;
                }
                let (l1, l2) = (edges(&t1), edges(&t2));
                let m = if reverse {
                    mul2(&inv2(&l2), &l1)
                } else {
                    mul2(&inv2(&l1), &l2)
                };
                m.iter().all(|v| v.is_finite()).then_some(Motion {
                    m,
                    det_second: det2(&l2),
                })
            })
            .collect();
        Self { motions }
    }

    pub fn len(&self) -> usize {
        self.motions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motions.is_empty()
    }

    /// Per-triplet errors of `self` (target) against `reference`.
    ///
    /// Exclusion rules match [`transition_errors`], including the `eps_det`
    /// check on `H2`, whose determinant is `det(L_B2) / det(L_A2)`.
    pub fn errors_against(&self, reference: &TransitionMotion, config: &GeometryConfig) -> TransitionErrorVector {
        let mut values = Vec::with_capacity(self.motions.len());
        let mut excluded = Vec::with_capacity(self.motions.len());
        for (a, b) in self.motions.iter().zip(&reference.motions) {
            let score = match (a, b) {
                (Some(a), Some(b)) => {
                    let det_h2 = b.det_second / a.det_second;
                    if !(det_h2.abs() >= config.eps_det) {
                        None
                    } else {
                        let [e0, e1] = eigenvalues2(&mul2(&a.m, &b.m));
                        closest_pair(&[Complex::new(1.0, 0.0), e0, e1], config.eps_sum)
                            .ok()
                            .map(|s| s.score)
                    }
                }
                _ => None,
            };
            values.push(score.unwrap_or(0.0));
            excluded.push(score.is_none());
        }
        TransitionErrorVector { values, excluded }
    }

    /// As [`Self::errors_against`] with the `TooFewValidTriplets` check.
    pub fn similarity(&self, reference: &TransitionMotion, config: &GeometryConfig) -> Result<(f64, TransitionErrorVector)> {
        let errors = self.errors_against(reference, config);
        errors.check(config)?;
        Ok((errors.total(), errors))
    }
}
