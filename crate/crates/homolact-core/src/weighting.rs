//! Body-point weights, derived triplet weights and weighted similarity scores.
//!
//! Point weights `ω` live on the simplex; a triplet's weight is
//! `2 (ω_i + ω_j + ω_k) / ((n-1)(n-2))`, which sums to one over all
//! `C(n,3)` triplets because every point belongs to `C(n-1,2)` of them.
//! The sequence similarity is affine in `ω`, so it reduces to
//! `a0 - Σ_{i<n} a_i ω_i` once `ω_n = 1 - Σ_{i<n} ω_i` is substituted.

use alloc::format;
use alloc::vec::Vec;

use crate::alignment::ErrorScoreMatrix;
use crate::error::{Error, Result};
use crate::transition::TransitionErrorVector;
use crate::triplet::{choose3, enumerate_for};

/// Tolerance on `Σω = 1` and on the box constraints.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// One weight per body point, non-negative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    omega: Vec<f64>,
}

impl WeightVector {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.len() < 4 {
            return Err(Error::InvalidWeights(format!(
                "need at least 4 weights, got {}",
                omega.len()
            )));
        }
        if let Some((i, w)) = omega
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= -SIMPLEX_TOLERANCE && **w <= 1.0 + SIMPLEX_TOLERANCE))
        {
            return Err(Error::InvalidWeights(format!("weight {i} = {w} outside [0, 1]")));
        }
        let sum: f64 = omega.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { omega })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            omega: alloc::vec![1.0 / n as f64; n],
        }
    }

    /// Builds the full vector from the first `n - 1` entries; `ω_n = 1 - Σ`.
    pub fn from_free(free: &[f64]) -> Result<Self> {
        let last = 1.0 - free.iter().sum::<f64>();
        let mut omega = free.to_vec();
        omega.push(last);
        Self::new(omega)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    /// The first `n - 1` entries.
    pub fn free(&self) -> &[f64] {
        &self.omega[..self.omega.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// One weight per triplet, in lexicographic triplet order.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletWeights {
    pub lambda: Vec<f64>,
}

impl TripletWeights {
    pub fn sum(&self) -> f64 {
        self.lambda.iter().sum()
    }
}

fn pair_normalizer(n: usize) -> f64 {
    2.0 / ((n - 1) as f64 * (n - 2) as f64)
}

pub fn triplet_weights(omega: &WeightVector) -> TripletWeights {
    let n = omega.len();
    let scale = pair_normalizer(n);
    let w = omega.as_slice();
    TripletWeights {
        lambda: enumerate_for(n)
            .iter()
            .map(|t| (w[t.i] + w[t.j] + w[t.k]) * scale)
            .collect(),
    }
}

/// `Σ λ_Δ E(Δ)` over unexcluded triplets, with `λ` renormalized to sum to one
/// over those triplets.
pub fn weighted_transition_error(errors: &TransitionErrorVector, weights: &TripletWeights) -> Result<f64> {
    if errors.len() != weights.lambda.len() {
        return Err(Error::LengthMismatch {
            expected: weights.lambda.len(),
            found: errors.len(),
        });
    }
    let mut weighted = 0.0;
    let mut mass = 0.0;
    for ((v, ex), l) in errors.values.iter().zip(&errors.excluded).zip(&weights.lambda) {
        if !ex {
            weighted += l * v;
            mass += l;
        }
    }
    if errors.valid_count() == 0 {
        return Err(Error::AllTripletsMasked);
    }
    if mass > 0.0 {
        Ok(weighted / mass)
    } else {
        // Every surviving triplet has zero weight.
        Ok(0.0)
    }
}

/// Column values with excluded entries replaced by the column's unexcluded mean.
///
/// At uniform weights this equals the renormalized transition error; unlike
/// renormalization it keeps sequence scores affine in `ω`.
pub fn imputed_column(column: &TransitionErrorVector) -> Result<Vec<f64>> {
    let valid = column.valid_count();
    if valid == 0 {
        return Err(Error::AllTripletsMasked);
    }
    let mean = column.total() / valid as f64;
    Ok(column
        .values
        .iter()
        .zip(&column.excluded)
        .map(|(v, ex)| if *ex { mean } else { *v })
        .collect())
}

fn check_inputs(errors: &ErrorScoreMatrix, n: usize, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    if errors.rows() != choose3(n) {
        return Err(Error::LengthMismatch {
            expected: choose3(n),
            found: errors.rows(),
        });
    }
    if errors.cols() == 0 {
        return Err(Error::InvalidAlignment("empty alignment".into()));
    }
    Ok(())
}

/// Weighted similarity of two aligned sequences, evaluated term by term:
///
/// `N τ - (2N / ((n-1)(n-2))) Σ_l Σ_{i<j<k} (ω_i + ω_j + ω_k) E_l(Δ_ijk)`
///
/// with `N` the number of aligned pairs.
pub fn sequence_similarity(errors: &ErrorScoreMatrix, omega: &WeightVector, tau: f64) -> Result<f64> {
    let n = omega.len();
    check_inputs(errors, n, tau)?;
    let pairs = errors.cols() as f64;
    let w = omega.as_slice();
    let triplets = enumerate_for(n);
    let mut total = 0.0;
    for column in errors.columns() {
        let values = imputed_column(column)?;
        for (t, e) in triplets.iter().zip(&values) {
            total += (w[t.i] + w[t.j] + w[t.k]) * e;
        }
    }
    Ok(pairs * tau - 2.0 * pairs / ((n - 1) as f64 * (n - 2) as f64) * total)
}

/// Constants of the affine form `S̄(ω) = a0 - Σ_{i<n} a_i ω_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScoreCoefficients {
    pub a0: f64,
    /// `n - 1` coefficients.
    pub a: Vec<f64>,
    pub tau: f64,
    /// Aligned-pair count `N`.
    pub pairs: usize,
}

impl AffineScoreCoefficients {
    /// `a0 - Σ a_i ω_i` for the free weights `ω_1..ω_{n-1}`.
    pub fn evaluate(&self, free: &[f64]) -> f64 {
        self.a0 - self.a.iter().zip(free).map(|(a, w)| a * w).sum::<f64>()
    }
}

/// τ-free summary of one alignment: its pair count and, per body point,
/// the summed (imputed) error of every triplet containing that point.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSummary {
    pub pairs: usize,
    pub point_mass: Vec<f64>,
}

impl AlignmentSummary {
    pub fn new(errors: &ErrorScoreMatrix, n: usize) -> Result<Self> {
        if errors.rows() != choose3(n) {
            return Err(Error::LengthMismatch {
                expected: choose3(n),
                found: errors.rows(),
            });
        }
        if errors.cols() == 0 {
            return Err(Error::InvalidAlignment("empty alignment".into()));
        }
        let triplets = enumerate_for(n);
        let mut point_mass = alloc::vec![0.0; n];
        for column in errors.columns() {
            let values = imputed_column(column)?;
            for (t, e) in triplets.iter().zip(&values) {
                point_mass[t.i] += e;
                point_mass[t.j] += e;
                point_mass[t.k] += e;
            }
        }
        Ok(Self {
            pairs: errors.cols(),
            point_mass,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.point_mass.len()
    }

    /// With `G_i` the point mass, `S̄ = Nτ - c Σ_i ω_i G_i` where
    /// `c = 2N / ((n-1)(n-2))`; substituting `ω_n` gives
    /// `a0 = Nτ - c G_n` and `a_i = c (G_i - G_n)`.
    pub fn coefficients(&self, tau: f64) -> Result<AffineScoreCoefficients> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTau(tau));
        }
        let n = self.point_mass.len();
        let c = 2.0 * self.pairs as f64 / ((n - 1) as f64 * (n - 2) as f64);
        let last = self.point_mass[n - 1];
        Ok(AffineScoreCoefficients {
            a0: self.pairs as f64 * tau - c * last,
            a: self.point_mass[..n - 1].iter().map(|g| c * (g - last)).collect(),
            tau,
            pairs: self.pairs,
        })
    }
}

/// Affine coefficients of the weighted sequence similarity; they depend on
/// the stored errors, `τ`, `N` and `n`, never on `ω`.
pub fn affine_coefficients(errors: &ErrorScoreMatrix, n: usize, tau: f64) -> Result<AffineScoreCoefficients> {
    check_inputs(errors, n, tau)?;
    AlignmentSummary::new(errors, n)?.coefficients(tau)
}

/// Uniform-weight transition errors of every column, in order.
pub fn uniform_transition_errors(errors: &ErrorScoreMatrix) -> Result<Vec<f64>> {
    errors
        .columns()
        .iter()
        .map(|c| {
            let valid = c.valid_count();
            if valid == 0 {
                Err(Error::AllTripletsMasked)
            } else {
                Ok(c.total() / valid as f64)
            }
        })
        .collect()
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of a non-empty sample.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Default τ: the `q` percentile of uniform-weight transition errors over
/// the given same-action alignments.
pub fn tau_from_percentile(same_action: &[&ErrorScoreMatrix], q: f64) -> Result<f64> {
    let mut all = Vec::new();
    for e in same_action {
        all.extend(uniform_transition_errors(e)?);
    }
    let tau = percentile(&all, q).ok_or(Error::EmptyGroup)?;
    if tau > 0.0 {
        Ok(tau)
    } else {
        // All-zero training errors; keep τ positive.
        Ok(f64::MIN_POSITIVE)
    }
}
