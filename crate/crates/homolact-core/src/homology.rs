//! Triplet-induced affinities and the eigenvalue-equality homology score.

use nalgebra::{Complex, Matrix3};

use crate::eigen::{eigenvalues3, modulus};
use crate::error::{Error, Result};

/// Numerical thresholds of the geometry layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    /// Minimum `|det|` of a homography that gets inverted.
    pub eps_det: f64,
    /// Minimum `|a + b|` for an eigenvalue pair to be scored.
    pub eps_sum: f64,
    /// Minimum triangle area after centroid/RMS normalization.
    pub eps_area: f64,
    /// Fraction of triplets that must survive exclusion for a transition to be scored.
    pub min_valid_fraction: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            eps_det: 1e-12,
            eps_sum: 1e-12,
            eps_area: 1e-8,
            min_valid_fraction: 0.5,
        }
    }
}

/// A planar homography as a 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography3x3(pub Matrix3<f64>);

impl Homography3x3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Last row is exactly `(0, 0, 1)`.
    pub fn is_affine(&self) -> bool {
        self.0[(2, 0)] == 0.0 && self.0[(2, 1)] == 0.0 && self.0[(2, 2)] == 1.0
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        let w = m[(2, 0)] * p[0] + m[(2, 1)] * p[1] + m[(2, 2)];
        [
            (m[(0, 0)] * p[0] + m[(0, 1)] * p[1] + m[(0, 2)]) / w,
            (m[(1, 0)] * p[0] + m[(1, 1)] * p[1] + m[(1, 2)]) / w,
        ]
    }
}

/// The selected eigenvalue pair and its score `|a - b| / |a + b|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPairScore {
    pub a: Complex<f64>,
    pub b: Complex<f64>,
    pub score: f64,
}

/// Similarity transform taking a triangle to centroid 0 and RMS radius `sqrt(2)`.
#[derive(Debug, Clone, Copy)]
struct Conditioning {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl Conditioning {
    fn of(tri: &[[f64; 2]; 3]) -> Option<Self> {
        let cx = (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0;
        let cy = (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0;
        let ms = tri
            .iter()
            .map(|p| (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy))
            .sum::<f64>()
            / 3.0;
        if !(ms > 0.0) || !ms.is_finite() {
            return None;
        }
        Some(Self {
            cx,
            cy,
            scale: libm::sqrt(2.0 / ms),
        })
    }

    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.cx) * self.scale, (p[1] - self.cy) * self.scale]
    }

    fn matrix(&self) -> Matrix3<f64> {
        let s = self.scale;
        Matrix3::new(s, 0.0, -s * self.cx, 0.0, s, -s * self.cy, 0.0, 0.0, 1.0)
    }

    fn inverse_matrix(&self) -> Matrix3<f64> {
        let inv = 1.0 / self.scale;
        Matrix3::new(inv, 0.0, self.cx, 0.0, inv, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Signed area of a triangle after centroid/RMS normalization.
///
/// Invariant under similarity transforms of the image plane; zero for
/// coincident or collinear points.
pub fn normalized_area(tri: &[[f64; 2]; 3]) -> f64 {
    match Conditioning::of(tri) {
        None => 0.0,
        Some(c) => {
            let [p0, p1, p2] = tri.map(|p| c.apply(p));
            0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
        }
    }
}

/// The unique affinity mapping `src[i]` to `dst[i]`.
///
/// Fitted on normalized coordinates and de-normalized, with the last row
/// set to exactly `(0, 0, 1)`.
pub fn affinity_from_triplet(
    src: &[[f64; 2]; 3],
    dst: &[[f64; 2]; 3],
    eps_area: f64,
) -> Result<Homography3x3> {
    if normalized_area(src).abs() < eps_area || normalized_area(dst).abs() < eps_area {
        return Err(Error::DegenerateTriplet);
    }
    let (Some(cs), Some(cd)) = (Conditioning::of(src), Conditioning::of(dst)) else {
        return Err(Error::DegenerateTriplet);
    };
    let s = src.map(|p| cs.apply(p));
    let d = dst.map(|p| cd.apply(p));
    // Columns (p1 - p0, p2 - p0, p0) map the unit triangle onto each point set.
    let frame = |t: &[[f64; 2]; 3]| {
        Matrix3::new(
            t[1][0] - t[0][0],
            t[2][0] - t[0][0],
            t[0][0],
            t[1][1] - t[0][1],
            t[2][1] - t[0][1],
            t[0][1],
            0.0,
            0.0,
            1.0,
        )
    };
    let src_frame_inv = frame(&s)
        .try_inverse()
        .ok_or(Error::DegenerateTriplet)?;
    let normalized = frame(&d) * src_frame_inv;
    let mut h = cd.inverse_matrix() * normalized * cs.matrix();
    h[(2, 0)] = 0.0;
    h[(2, 1)] = 0.0;
    h[(2, 2)] = 1.0;
    Ok(Homography3x3(h))
}

/// Picks the pair minimizing `|a - b| / |a + b|` among the three eigenvalues.
///
/// Pairs with `|a + b| <= eps_sum` are not candidates. Ties keep the
/// first pair in the order (0,1), (0,2), (1,2).
pub fn closest_pair(eigenvalues: &[Complex<f64>; 3], eps_sum: f64) -> Result<EigenPairScore> {
    let mut best: Option<EigenPairScore> = None;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = (eigenvalues[i], eigenvalues[j]);
        let sum = modulus(a + b);
        if !(sum > eps_sum) {
            continue;
        }
        let score = modulus(a - b) / sum;
        if best.is_none_or(|cur| score < cur.score) {
            best = Some(EigenPairScore { a, b, score });
        }
    }
    best.ok_or(Error::NumericalDegeneracy)
}

/// Score of `H = h1 * h2^-1`.
pub fn homology_score(
    h1: &Homography3x3,
    h2: &Homography3x3,
    config: &GeometryConfig,
) -> Result<EigenPairScore> {
    let det = h2.0.determinant();
    if !(det.abs() >= config.eps_det) {
        return Err(Error::SingularHomography(det));
    }
    let inv = h2.0.try_inverse().ok_or(Error::SingularHomography(det))?;
    matrix_score(&(h1.0 * inv), config.eps_sum)
}

/// Score of a single matrix (its own closest eigenvalue pair).
pub fn matrix_score(h: &Matrix3<f64>, eps_sum: f64) -> Result<EigenPairScore> {
    let ev = eigenvalues3(h).ok_or(Error::NumericalDegeneracy)?;
    closest_pair(&ev, eps_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const UNIT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn random_triangle(rng: &mut ChaCha8Rng) -> [[f64; 2]; 3] {
        loop {
            let t = [(); 3].map(|_| [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)]);
            if normalized_area(&t).abs() > 0.05 {
                return t;
            }
        }
    }

    #[test]
    fn identity_affinity() {
        let h = affinity_from_triplet(&UNIT, &UNIT, 1e-8).unwrap();
        assert!((h.0 - Matrix3::identity()).abs().max() < 1e-15);
        assert!(h.is_affine());
    }

    #[test]
    fn pure_scaling() {
        let dst = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let h = affinity_from_triplet(&UNIT, &dst, 1e-8).unwrap();
        let want = Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0));
        assert!((h.0 - want).abs().max() < 1e-14);
    }

    #[test]
    fn collinear_source_is_degenerate() {
        let src = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(
            affinity_from_triplet(&src, &UNIT, 1e-8),
            Err(Error::DegenerateTriplet)
        );
        assert_eq!(
            affinity_from_triplet(&UNIT, &src, 1e-8),
            Err(Error::DegenerateTriplet)
        );
        let coincident = [[1.0, 1.0]; 3];
        assert_eq!(
            affinity_from_triplet(&coincident, &UNIT, 1e-8),
            Err(Error::DegenerateTriplet)
        );
    }

    #[test]
    fn affinity_reproduces_correspondences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let src = random_triangle(&mut rng);
            let dst = random_triangle(&mut rng);
            let h = affinity_from_triplet(&src, &dst, 1e-8).unwrap();
            assert!(h.is_affine());
            for (s, d) in src.iter().zip(dst.iter()) {
                let p = h.apply(*s);
                assert!((p[0] - d[0]).abs() < 1e-9 && (p[1] - d[1]).abs() < 1e-9);
            }
            let same = affinity_from_triplet(&src, &src, 1e-8).unwrap();
            assert!((same.0 - Matrix3::identity()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn normalized_area_is_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let t = random_triangle(&mut rng);
            let s = rng.random_range(0.01..100.0);
            let (c, sn) = (libm::cos(0.7), libm::sin(0.7));
            let moved = t.map(|p| [s * (c * p[0] - sn * p[1]) + 5.0, s * (sn * p[0] + c * p[1]) - 3.0]);
            assert!((normalized_area(&t) - normalized_area(&moved)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_scores_zero() {
        let h = Homography3x3::identity();
        let s = homology_score(&h, &h, &GeometryConfig::default()).unwrap();
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn exact_homology_scores_zero() {
        let h = Homography3x3(Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0)));
        let s = homology_score(&h, &Homography3x3::identity(), &GeometryConfig::default()).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!((s.a.re, s.b.re), (1.0, 1.0));
    }

    #[test]
    fn distinct_eigenvalues_pick_3_and_2() {
        // Candidates: (3,2) -> 1/5, (3,1) -> 1/2, (2,1) -> 1/3.
        let h = Homography3x3(Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0)));
        let s = homology_score(&h, &Homography3x3::identity(), &GeometryConfig::default()).unwrap();
        assert!((s.score - 0.2).abs() < 1e-14);
        let mut pair = [s.a.re, s.b.re];
        pair.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((pair[0] - 2.0).abs() < 1e-14 && (pair[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_h2_rejected() {
        let z = Homography3x3(Matrix3::zeros());
        assert!(matches!(
            homology_score(&Homography3x3::identity(), &z, &GeometryConfig::default()),
            Err(Error::SingularHomography(_))
        ));
    }

    #[test]
    fn opposite_eigenvalues_are_degenerate() {
        // (1, -1) has zero sum and is skipped; the other pairs both score 1.
        let ev = [Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0), Complex::new(0.0, 0.0)];
        let s = closest_pair(&ev, 1e-12).unwrap();
        assert_eq!(s.score, 1.0);
        let ev = [Complex::new(0.0, 0.0); 3];
        assert_eq!(closest_pair(&ev, 1e-12), Err(Error::NumericalDegeneracy));
    }

    #[test]
    fn conjugate_pair_scores_by_modulus() {
        let ev = [Complex::new(1.0, 0.1), Complex::new(1.0, -0.1), Complex::new(10.0, 0.0)];
        let s = closest_pair(&ev, 1e-12).unwrap();
        // |0.2i| / |2| = 0.1 beats |-9 + 0.1i| / |11 + 0.1i|.
        assert!((s.score - 0.1).abs() < 1e-15);
        assert_eq!((s.a, s.b), (ev[0], ev[1]));
    }

    #[test]
    fn score_invariant_under_right_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = GeometryConfig::default();
        for _ in 0..500 {
            let h1 = Homography3x3(Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
            let h2 = Homography3x3(Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
            let g: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if h2.0.determinant().abs() < 0.05 || g.determinant().abs() < 0.05 {
                continue;
            }
            let a = homology_score(&h1, &h2, &cfg).unwrap();
            let b = homology_score(&Homography3x3(h1.0 * g), &Homography3x3(h2.0 * g), &cfg).unwrap();
            assert!((a.score - b.score).abs() < 1e-9, "{} vs {}", a.score, b.score);
        }
    }

    #[test]
    fn conjugated_homologies_score_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = GeometryConfig::default();
        let mut n = 0;
        while n < 2000 {
            let g: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if g.determinant().abs() < 0.05 {
                continue;
            }
            let lam = rng.random_range(0.1..4.0);
            let mu = rng.random_range(0.1..4.0);
            let h = g * Matrix3::from_diagonal(&Vector3::new(lam, mu, mu)) * g.try_inverse().unwrap();
            let s = homology_score(&Homography3x3(h), &Homography3x3::identity(), &cfg).unwrap();
            assert!(s.score < 1e-9, "{}", s.score);
            n += 1;
        }
    }
}
