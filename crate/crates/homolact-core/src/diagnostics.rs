//! Per-triplet separation statistics between same-action and cross-action alignments.

use alloc::vec::Vec;

use crate::alignment::ErrorScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSignificance {
    pub ordinal: usize,
    pub same_mean: f64,
    pub same_variance: f64,
    pub cross_mean: f64,
    pub cross_variance: f64,
    /// `(cross_mean - same_mean) / sqrt((same_variance + cross_variance) / 2)`.
    ///
    /// Zero when the means agree; `±inf` when they differ with zero spread.
    pub index: f64,
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Population variance, clamped at zero.
    fn variance(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        let m = self.mean();
        (self.sum_sq / self.n as f64 - m * m).max(0.0)
    }
}

fn row_moments(matrices: &[ErrorScoreMatrix], triplet: usize) -> Moments {
    let mut m = Moments::default();
    for e in matrices {
        for v in e.row_values(triplet) {
            m.push(v);
        }
    }
    m
}

/// Descriptive statistics of each triplet's error rows.
///
/// Excluded entries are skipped. A triplet with no entries in one group
/// gets `NaN` statistics.
pub fn triplet_significance_report(
    same_action: &[ErrorScoreMatrix],
    cross_action: &[ErrorScoreMatrix],
) -> Result<Vec<TripletSignificance>> {
    let (Some(first), false) = (same_action.first(), cross_action.is_empty()) else {
        return Err(Error::EmptyGroup);
    };
    let rows = first.rows();
    if let Some(e) = same_action.iter().chain(cross_action).find(|e| e.rows() != rows) {
        return Err(Error::LengthMismatch {
            expected: rows,
            found: e.rows(),
        });
    }
    Ok((0..rows)
        .map(|t| {
            let same = row_moments(same_action, t);
            let cross = row_moments(cross_action, t);
            let diff = cross.mean() - same.mean();
            let pooled = libm::sqrt(0.5 * (same.variance() + cross.variance()));
            let index = if diff == 0.0 {
                0.0
            } else if pooled > 0.0 {
                diff / pooled
            } else {
                diff * f64::INFINITY
            };
            TripletSignificance {
                ordinal: t,
                same_mean: same.mean(),
                same_variance: same.variance(),
                cross_mean: cross.mean(),
                cross_variance: cross.variance(),
                index,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::TransitionErrorVector;
    use alloc::vec;

    fn matrix(rows: &[&[f64]]) -> ErrorScoreMatrix {
        let t = rows.len();
        let l = rows[0].len();
        let cols = (0..l)
            .map(|c| TransitionErrorVector {
                values: rows.iter().map(|r| r[c]).collect(),
                excluded: vec![false; t],
            })
            .collect();
        ErrorScoreMatrix::from_columns(cols, t).unwrap()
    }

    #[test]
    fn identical_groups_give_zero() {
        let m = matrix(&[&[0.1, 0.2, 0.3], &[0.5, 0.5, 0.5]]);
        let r = triplet_significance_report(&[m.clone()], &[m]).unwrap();
        assert!(r.iter().all(|s| s.index == 0.0));
    }

    #[test]
    fn zero_same_error_and_large_cross_error_ranks_first() {
        let same = matrix(&[&[0.0, 0.0], &[0.1, 0.3], &[0.2, 0.2]]);
        let cross = matrix(&[&[2.0, 2.0], &[0.4, 0.5], &[0.2, 0.9]]);
        let r = triplet_significance_report(&[same], &[cross]).unwrap();
        assert_eq!(r[0].index, f64::INFINITY);
        assert!(r[0].index > r[1].index && r[0].index > r[2].index);
        assert!((r[1].same_mean - 0.2).abs() < 1e-15);
        assert!((r[1].same_variance - 0.01).abs() < 1e-15);
    }

    #[test]
    fn excluded_entries_are_skipped() {
        let mut m = matrix(&[&[1.0, 100.0]]);
        let mut cols = m.columns().to_vec();
        cols[1].excluded[0] = true;
        m = ErrorScoreMatrix::from_columns(cols, 1).unwrap();
        let r = triplet_significance_report(&[m.clone()], &[m]).unwrap();
        assert_eq!(r[0].same_mean, 1.0);
    }

    #[test]
    fn empty_groups_rejected() {
        let m = matrix(&[&[1.0]]);
        assert_eq!(triplet_significance_report(&[], &[m.clone()]), Err(Error::EmptyGroup));
        assert_eq!(triplet_significance_report(&[m], &[]), Err(Error::EmptyGroup));
    }
}
