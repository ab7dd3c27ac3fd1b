//! Per-action training objective over the free point weights.
//!
//! For action `j` with reference `R` the objective is
//! `f = Q1 + α Q2 - β Q3`, where `Q1` and `Q2` are the mean and population
//! variance of `S̄(R, T)` over the action's own training sequences and `Q3`
//! is the mean of `S̄(R, T)` over every sequence of the other actions.
//! Each `S̄` is affine in `ω`, so `f` is a quadratic `xᵀQx + cᵀx + c0` in
//! the free weights `x = (ω_1, …, ω_{n-1})`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::alignment::{align_prepared, AlignConfig, PreparedSequence};
use crate::body::{BodyModel, JointSequence};
use crate::error::{Error, Result};
use crate::weighting::{AffineScoreCoefficients, AlignmentSummary};

/// τ-free alignment summaries of every (reference, training sequence) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    labels: Vec<String>,
    joint_count: usize,
    /// `summaries[j][i][k]`: reference of action `j` against sequence `k` of action `i`.
    summaries: Vec<Vec<Vec<AlignmentSummary>>>,
}

impl TrainingSet {
    pub fn new(labels: Vec<String>, summaries: Vec<Vec<Vec<AlignmentSummary>>>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidTrainingSet(msg));
        let j = labels.len();
        if j < 2 {
            return invalid(format!("need at least 2 actions, got {j}"));
        }
        if summaries.len() != j {
            return invalid(format!("{} reference rows for {j} actions", summaries.len()));
        }
        let sizes: Vec<usize> = summaries[0].iter().map(Vec::len).collect();
        if let Some((i, k)) = sizes.iter().enumerate().find(|(_, k)| **k < 2) {
            return invalid(format!("action `{}` has {k} training sequences, need at least 2", labels[i]));
        }
        let joint_count = summaries[0][0][0].joint_count();
        for (r, row) in summaries.iter().enumerate() {
            let shape: Vec<usize> = row.iter().map(Vec::len).collect();
            if shape != sizes {
                return invalid(format!("reference `{}` is not aligned to every training sequence", labels[r]));
            }
            if row.iter().flatten().any(|s| s.joint_count() != joint_count) {
                return invalid(format!("reference `{}` mixes body models", labels[r]));
            }
        }
        Ok(Self {
            labels,
            joint_count,
            summaries,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn action_count(&self) -> usize {
        self.labels.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    /// Summaries of reference `reference` against the sequences of action `group`.
    pub fn summaries(&self, reference: usize, group: usize) -> &[AlignmentSummary] {
        &self.summaries[reference][group]
    }

    /// Affine coefficients of the same-action and cross-action scores of action `j`.
    pub fn coefficients(
        &self,
        j: usize,
        tau: f64,
    ) -> Result<(Vec<AffineScoreCoefficients>, Vec<Vec<AffineScoreCoefficients>>)> {
        if j >= self.action_count() {
            return Err(Error::InvalidTrainingSet(format!("no action with index {j}")));
        }
        let of = |group: &[AlignmentSummary]| group.iter().map(|s| s.coefficients(tau)).collect::<Result<Vec<_>>>();
        let same = of(&self.summaries[j][j])?;
        let cross = (0..self.action_count())
            .filter(|&i| i != j)
            .map(|i| of(&self.summaries[j][i]))
            .collect::<Result<Vec<_>>>()?;
        Ok((same, cross))
    }
}

/// One action's training material: its reference and its training sequences.
#[derive(Debug, Clone, Copy)]
pub struct TrainingGroup<'a> {
    pub label: &'a str,
    pub reference: &'a JointSequence,
    pub members: &'a [JointSequence],
}

/// Aligns `target` to `reference` and summarizes the resulting errors.
pub fn alignment_summary(
    target: &PreparedSequence,
    reference: &PreparedSequence,
    config: &AlignConfig,
    joint_count: usize,
) -> Result<AlignmentSummary> {
    let (_, errors) = align_prepared(target, reference, config)?;
    AlignmentSummary::new(&errors, joint_count)
}

/// Aligns every training sequence to every reference, sequentially.
pub fn build_training_set(groups: &[TrainingGroup<'_>], model: &BodyModel, config: &AlignConfig) -> Result<TrainingSet> {
    let n = model.joint_count();
    let references = groups
        .iter()
        .map(|g| PreparedSequence::new(g.reference, model, config))
        .collect::<Result<Vec<_>>>()?;
    let members = groups
        .iter()
        .map(|g| g.members.iter().map(|s| PreparedSequence::new(s, model, config)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let summaries = references
        .iter()
        .map(|r| {
            members
                .iter()
                .map(|group| group.iter().map(|t| alignment_summary(t, r, config, n)).collect())
                .collect::<Result<Vec<Vec<_>>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(groups.iter().map(|g| g.label.into()).collect(), summaries)
}

/// Mean similarity of the reference to its own training sequences.
pub fn q1_mean_same(same: &[AffineScoreCoefficients], free: &[f64]) -> Result<f64> {
    if same.is_empty() {
        return Err(Error::EmptyGroup);
    }
    Ok(same.iter().map(|s| s.evaluate(free)).sum::<f64>() / same.len() as f64)
}

/// Population variance of the same-action similarities.
pub fn q2_variance_same(same: &[AffineScoreCoefficients], free: &[f64]) -> Result<f64> {
    let k = same.len() as f64;
    let mean = q1_mean_same(same, free)?;
    let sq = same.iter().map(|s| s.evaluate(free)).map(|v| v * v).sum::<f64>();
    Ok(sq / k - mean * mean)
}

/// Mean similarity of the reference to every sequence of the other actions.
///
/// Groups of unequal size are pooled, so each sequence counts once.
pub fn q3_mean_cross(cross: &[Vec<AffineScoreCoefficients>], free: &[f64]) -> Result<f64> {
    let count: usize = cross.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(Error::NoOtherGroups);
    }
    Ok(cross.iter().flatten().map(|s| s.evaluate(free)).sum::<f64>() / count as f64)
}

/// `f(x) = xᵀQx + cᵀx + c0` over the free weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub c0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl QuadraticObjective {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, c0: f64, alpha: f64, beta: f64) -> Result<Self> {
        let d = c.len();
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "Q is {}x{}, c has {d} entries",
                q.nrows(),
                q.ncols()
            )));
        }
        if d < 3 {
            return Err(Error::InvalidParameter(format!("need at least 3 free weights, got {d}")));
        }
        if q.iter().chain(c.iter()).any(|v| !v.is_finite()) || !c0.is_finite() {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        for r in 0..d {
            for s in 0..r {
                let (a, b) = (q[(r, s)], q[(s, r)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!("Q is not symmetric at ({r}, {s})")));
                }
            }
        }
        Ok(Self { q, c, c0, alpha, beta })
    }

    /// Number of free weights, `n - 1`.
    pub fn dimension(&self) -> usize {
        self.c.len()
    }

    pub fn evaluate(&self, free: &[f64]) -> f64 {
        let x = DVector::from_column_slice(free);
        x.dot(&(&self.q * &x)) + self.c.dot(&x) + self.c0
    }

    /// `2Qx + c`.
    pub fn gradient(&self, free: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(free);
        let g = &self.q * &x * 2.0 + &self.c;
        g.as_slice().to_vec()
    }
}

fn canonical(a: &AffineScoreCoefficients, b: &AffineScoreCoefficients) -> Ordering {
    a.a0.total_cmp(&b.a0)
        .then_with(|| {
            a.a.iter()
                .zip(&b.a)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.pairs.cmp(&b.pairs))
}

/// Assembles the objective from coefficient groups.
///
/// Coefficients are summed in a canonical order, so the result does not
/// depend on how the training sequences are ordered.
pub fn objective_from_coefficients(
    same: &[AffineScoreCoefficients],
    cross: &[Vec<AffineScoreCoefficients>],
    alpha: f64,
    beta: f64,
) -> Result<QuadraticObjective> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta}")));
    }
    if same.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut same: Vec<&AffineScoreCoefficients> = same.iter().collect();
    let mut cross: Vec<&AffineScoreCoefficients> = cross.iter().flatten().collect();
    if cross.is_empty() {
        return Err(Error::NoOtherGroups);
    }
    let d = same[0].a.len();
    if let Some(s) = same.iter().chain(&cross).find(|s| s.a.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            found: s.a.len(),
        });
    }
    same.sort_by(|a, b| canonical(a, b));
    cross.sort_by(|a, b| canonical(a, b));

    let mean = |group: &[&AffineScoreCoefficients]| {
        let k = group.len() as f64;
        let a0 = group.iter().map(|s| s.a0).sum::<f64>() / k;
        let mut a = DVector::zeros(d);
        for s in group {
            a += DVector::from_column_slice(&s.a);
        }
        (a0, a / k)
    };
    let (same_a0, same_a) = mean(&same);
    let (cross_a0, cross_a) = mean(&cross);

    // Q2 = (1/K) Σ (δ0_k - δ_k·x)² with δ the deviations from the group mean.
    let k = same.len() as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut cross_term = DVector::zeros(d);
    let mut var0 = 0.0;
    for s in &same {
        let d0 = s.a0 - same_a0;
        let dv = DVector::from_column_slice(&s.a) - &same_a;
        cov += &dv * dv.transpose();
        cross_term += &dv * d0;
        var0 += d0 * d0;
    }
    cov /= k;
    cross_term /= k;
    var0 /= k;
    let q = cov * alpha;
    let q = (&q + q.transpose()) * 0.5;
    let c = -&same_a - cross_term * (2.0 * alpha) + cross_a * beta;
    let c0 = same_a0 + alpha * var0 - beta * cross_a0;
    QuadraticObjective::new(q, c, c0, alpha, beta)
}

/// Objective of action `j`.
pub fn build_objective(training: &TrainingSet, j: usize, alpha: f64, beta: f64, tau: f64) -> Result<QuadraticObjective> {
    let (same, cross) = training.coefficients(j, tau)?;
    objective_from_coefficients(&same, &cross, alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::ErrorScoreMatrix;
    use crate::transition::TransitionErrorVector;
    use crate::triplet::choose3;
    use crate::weighting::{sequence_similarity, WeightVector};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeff(a0: f64, a: Vec<f64>) -> AffineScoreCoefficients {
        AffineScoreCoefficients {
            a0,
            a,
            tau: 1.0,
            pairs: 1,
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ErrorScoreMatrix {
        let t = choose3(n);
        let cols = rng.random_range(1..6);
        let columns = (0..cols)
            .map(|_| TransitionErrorVector {
                values: (0..t).map(|_| rng.random_range(0.0..1.0)).collect(),
                excluded: (0..t).map(|_| rng.random_bool(0.1)).collect(),
            })
            .map(|mut c| {
                c.excluded[0] = false;
                c
            })
            .collect();
        ErrorScoreMatrix::from_columns(columns, t).unwrap()
    }

    fn random_free(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw[..n - 1].iter().map(|v| v / s).collect()
    }

    #[test]
    fn group_statistics_examples() {
        let x = [0.25, 0.25, 0.25];
        assert_eq!(q1_mean_same(&[coeff(7.0, vec![0.0; 3])], &x), Ok(7.0));
        let pair = [coeff(0.0, vec![0.0; 3]), coeff(2.0, vec![0.0; 3])];
        assert_eq!(q2_variance_same(&pair, &x), Ok(1.0));
        let equal = [coeff(3.0, vec![1.0; 3]), coeff(3.0, vec![1.0; 3])];
        assert_eq!(q2_variance_same(&equal, &x), Ok(0.0));
        assert_eq!(q3_mean_cross(&[vec![coeff(3.0, vec![0.0; 3])]], &x), Ok(3.0));
        assert_eq!(q1_mean_same(&[], &x), Err(Error::EmptyGroup));
        assert_eq!(q2_variance_same(&[], &x), Err(Error::EmptyGroup));
        assert_eq!(q3_mean_cross(&[], &x), Err(Error::NoOtherGroups));
        assert_eq!(q3_mean_cross(&[vec![]], &x), Err(Error::NoOtherGroups));
    }

    #[test]
    fn zero_alpha_and_beta_leave_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let same: Vec<_> = (0..3).map(|_| coeff(rng.random(), (0..4).map(|_| rng.random()).collect())).collect();
        let cross = vec![vec![coeff(1.0, vec![0.5; 4])]];
        let obj = objective_from_coefficients(&same, &cross, 0.0, 0.0).unwrap();
        assert!(obj.q.iter().all(|v| *v == 0.0));
        for _ in 0..20 {
            let x = random_free(&mut rng, 5);
            assert!((obj.evaluate(&x) - q1_mean_same(&same, &x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_form_matches_group_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let d = 5;
            let draw = |rng: &mut ChaCha8Rng| coeff(rng.random_range(0.0..20.0), (0..d).map(|_| rng.random_range(-5.0..5.0)).collect());
            let same: Vec<_> = (0..rng.random_range(2..6)).map(|_| draw(&mut rng)).collect();
            let cross: Vec<Vec<_>> = (0..3).map(|_| (0..3).map(|_| draw(&mut rng)).collect()).collect();
            let (alpha, beta) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0));
            let obj = objective_from_coefficients(&same, &cross, alpha, beta).unwrap();
            for _ in 0..10 {
                let x = random_free(&mut rng, d + 1);
                let direct = q1_mean_same(&same, &x).unwrap() + alpha * q2_variance_same(&same, &x).unwrap()
                    - beta * q3_mean_cross(&cross, &x).unwrap();
                assert!((obj.evaluate(&x) - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn assembly_ignores_sequence_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || coeff(rng.random_range(0.0..20.0), (0..6).map(|_| 0.1 * rng.random_range(-5.0..5.0)).collect());
        let same: Vec<_> = (0..7).map(|_| draw()).collect();
        let cross = vec![(0..5).map(|_| draw()).collect::<Vec<_>>(), (0..4).map(|_| draw()).collect()];
        let base = objective_from_coefficients(&same, &cross, 0.3, 1.0).unwrap();
        let mut same_rev = same.clone();
        same_rev.reverse();
        same_rev.swap(1, 4);
        let mut cross_rev = cross.clone();
        cross_rev[0].reverse();
        let permuted = objective_from_coefficients(&same_rev, &cross_rev, 0.3, 1.0).unwrap();
        assert_eq!(base, permuted);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 10;
        let draw = |rng: &mut ChaCha8Rng| coeff(rng.random_range(0.0..30.0), (0..d).map(|_| rng.random_range(-3.0..3.0)).collect());
        let same: Vec<_> = (0..4).map(|_| draw(&mut rng)).collect();
        let cross = vec![(0..8).map(|_| draw(&mut rng)).collect::<Vec<_>>()];
        let obj = objective_from_coefficients(&same, &cross, 0.1, 1.0).unwrap();
        for _ in 0..20 {
            let x = random_free(&mut rng, d + 1);
            let g = obj.gradient(&x);
            for i in 0..d {
                let (mut hi, mut lo) = (x.clone(), x.clone());
                hi[i] += 1e-6;
                lo[i] -= 1e-6;
                let fd = (obj.evaluate(&hi) - obj.evaluate(&lo)) / 2e-6;
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn small_instance_matches_direct_composition() {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tau = 0.4;
        // errors[j][i][k]: reference j against sequence k of action i; J = 2, K = 2.
        let errors: Vec<Vec<Vec<ErrorScoreMatrix>>> =
            (0..2).map(|_| (0..2).map(|_| (0..2).map(|_| random_matrix(&mut rng, n)).collect()).collect()).collect();
        let summaries = errors
            .iter()
            .map(|row| row.iter().map(|g| g.iter().map(|e| AlignmentSummary::new(e, n).unwrap()).collect()).collect())
            .collect();
        let set = TrainingSet::new(vec!["a".into(), "b".into()], summaries).unwrap();
        for j in 0..2 {
            let obj = build_objective(&set, j, 0.1, 1.0, tau).unwrap();
            for _ in 0..20 {
                let free = random_free(&mut rng, n);
                let omega = WeightVector::from_free(&free).unwrap();
                let s = |e: &ErrorScoreMatrix| sequence_similarity(e, &omega, tau).unwrap();
                let same: Vec<f64> = errors[j][j].iter().map(s).collect();
                let cross: Vec<f64> = errors[j][1 - j].iter().map(s).collect();
                let q1 = (same[0] + same[1]) / 2.0;
                let q2 = ((same[0] - q1) * (same[0] - q1) + (same[1] - q1) * (same[1] - q1)) / 2.0;
                let q3 = (cross[0] + cross[1]) / 2.0;
                let direct = q1 + 0.1 * q2 - q3;
                assert!((obj.evaluate(&free) - direct).abs() <= 1e-9, "{} vs {direct}", obj.evaluate(&free));
            }
        }
    }

    #[test]
    fn training_set_shape_is_checked() {
        let s = AlignmentSummary {
            pairs: 1,
            point_mass: vec![0.0; 5],
        };
        let row = vec![vec![s.clone(), s.clone()], vec![s.clone(), s.clone()]];
        assert!(TrainingSet::new(vec!["a".into(), "b".into()], vec![row.clone(), row.clone()]).is_ok());
        assert!(matches!(
            TrainingSet::new(vec!["a".into()], vec![row.clone()]),
            Err(Error::InvalidTrainingSet(_))
        ));
        let short = vec![vec![s.clone()], vec![s.clone(), s.clone()]];
        assert!(matches!(
            TrainingSet::new(vec!["a".into(), "b".into()], vec![short.clone(), short]),
            Err(Error::InvalidTrainingSet(_))
        ));
    }

    #[test]
    fn parameters_are_validated() {
        let same = vec![coeff(1.0, vec![0.0; 3])];
        let cross = vec![vec![coeff(1.0, vec![0.0; 3])]];
        assert!(objective_from_coefficients(&same, &cross, -0.5, 1.0).is_ok());
        assert!(matches!(
            objective_from_coefficients(&same, &cross, 0.1, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert_eq!(objective_from_coefficients(&[], &cross, 0.1, 1.0), Err(Error::EmptyGroup));
        assert_eq!(objective_from_coefficients(&same, &[], 0.1, 1.0), Err(Error::NoOtherGroups));
    }
}
