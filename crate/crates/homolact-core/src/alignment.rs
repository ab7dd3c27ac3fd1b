//! Transition cost matrices and monotone dynamic-programming alignment.

use alloc::format;
use alloc::vec::Vec;

use crate::body::{BodyModel, JointSequence, Pose2D};
use crate::error::{Error, Result};
use crate::homology::GeometryConfig;
use crate::transition::{TransitionErrorVector, TransitionMotion};
use crate::triplet::{enumerate_for, TripletId};

/// Settings shared by everything that compares two sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub geometry: GeometryConfig,
    /// Frame offset between the two poses of a transition.
    pub stride: usize,
    /// Cost assigned to cells whose transition pair cannot be scored.
    pub sentinel_cost: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            stride: 1,
            sentinel_cost: 1e6,
        }
    }
}

/// Pose pairs `(t, t + stride)` for every `t` that fits in the sequence.
pub fn transitions_of(seq: &JointSequence, stride: usize) -> Result<Vec<(&Pose2D, &Pose2D)>> {
    if stride == 0 {
        return Err(Error::InvalidStride);
    }
    let poses = seq.poses();
    Ok((0..poses.len().saturating_sub(stride))
        .map(|t| (&poses[t], &poses[t + stride]))
        .collect())
}

/// A sequence with its transition motions cached for both alignment roles.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    as_target: Vec<TransitionMotion>,
    as_reference: Vec<TransitionMotion>,
    triplet_count: usize,
}

impl PreparedSequence {
    pub fn new(seq: &JointSequence, model: &BodyModel, config: &AlignConfig) -> Result<Self> {
        if seq.joint_count() != model.joint_count() {
            return Err(Error::JointCountMismatch {
                expected: model.joint_count(),
                found: seq.joint_count(),
            });
        }
        let transitions = transitions_of(seq, config.stride)?;
        if transitions.is_empty() {
            return Err(Error::SequenceTooShort(seq.len()));
        }
        let triplets: Vec<TripletId> = enumerate_for(model.joint_count());
        let g = &config.geometry;
        Ok(Self {
            as_target: transitions
                .iter()
                .map(|(a, b)| TransitionMotion::target(a, b, &triplets, g))
                .collect(),
            as_reference: transitions
                .iter()
                .map(|(a, b)| TransitionMotion::reference(a, b, &triplets, g))
                .collect(),
            triplet_count: triplets.len(),
        })
    }

    pub fn transition_count(&self) -> usize {
        self.as_target.len()
    }

    pub fn triplet_count(&self) -> usize {
        self.triplet_count
    }

    /// Per-triplet errors of target transition `j` against reference transition `k`.
    pub fn errors_against(
        &self,
        reference: &PreparedSequence,
        j: usize,
        k: usize,
        config: &AlignConfig,
    ) -> TransitionErrorVector {
        self.as_target[j].errors_against(&reference.as_reference[k], &config.geometry)
    }
}

/// Dense row-major `rows x cols` matrix of transition costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Summed triplet error of every target/reference transition pair.
///
/// Cells failing the valid-triplet minimum get `config.sentinel_cost`.
pub fn cost_matrix_prepared(
    target: &PreparedSequence,
    reference: &PreparedSequence,
    config: &AlignConfig,
) -> CostMatrix {
    CostMatrix::from_fn(target.transition_count(), reference.transition_count(), |j, k| {
        match target.as_target[j].similarity(&reference.as_reference[k], &config.geometry) {
            Ok((score, _)) => score,
            Err(_) => config.sentinel_cost,
        }
    })
}

pub fn cost_matrix(
    target: &JointSequence,
    reference: &JointSequence,
    model: &BodyModel,
    config: &AlignConfig,
) -> Result<CostMatrix> {
    let t = PreparedSequence::new(target, model, config)?;
    let r = PreparedSequence::new(reference, model, config)?;
    Ok(cost_matrix_prepared(&t, &r, config))
}

/// Monotone correspondence between target and reference transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pairs: Vec<(usize, usize)>,
    total_cost: f64,
    target_len: usize,
    reference_len: usize,
}

impl Alignment {
    /// Checks endpoints `(0,0)` and `(m-1, n-1)` and that every step is
    /// `(1,0)`, `(0,1)` or `(1,1)`.
    pub fn new(
        pairs: Vec<(usize, usize)>,
        total_cost: f64,
        target_len: usize,
        reference_len: usize,
    ) -> Result<Self> {
        let invalid = |msg: &str| Err(Error::InvalidAlignment(format!("{msg}")));
        if target_len == 0 || reference_len == 0 {
            return invalid("empty sequence");
        }
        match (pairs.first(), pairs.last()) {
            (Some(&(0, 0)), Some(&last)) if last == (target_len - 1, reference_len - 1) => {}
            _ => return invalid("path must run from (0,0) to (m-1,n-1)"),
        }
        for w in pairs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let step = (b.0.wrapping_sub(a.0), b.1.wrapping_sub(a.1));
            if !matches!(step, (1, 0) | (0, 1) | (1, 1)) {
                return invalid("illegal step");
            }
        }
        Ok(Self {
            pairs,
            total_cost,
            target_len,
            reference_len,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Number of aligned pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn reference_len(&self) -> usize {
        self.reference_len
    }
}

/// Minimum-cost monotone path through `cost`.
///
/// Steps are `(1,0)`, `(0,1)`, `(1,1)` with no slope weights. Backtracking
/// prefers the diagonal, then `(1,0)`, then `(0,1)` on ties.
pub fn align(cost: &CostMatrix) -> Alignment {
    let (m, n) = (cost.rows(), cost.cols());
    let mut acc = alloc::vec![0.0; m * n];
    let at = |r: usize, c: usize| r * n + c;
    for r in 0..m {
        for c in 0..n {
            let best_prev = if r == 0 && c == 0 {
                None
            } else {
                let mut best = f64::INFINITY;
                if r > 0 && c > 0 {
                    best = best.min(acc[at(r - 1, c - 1)]);
                }
                if r > 0 {
                    best = best.min(acc[at(r - 1, c)]);
                }
                if c > 0 {
                    best = best.min(acc[at(r, c - 1)]);
                }
                Some(best)
            };
            acc[at(r, c)] = match best_prev {
                None => cost.get(r, c),
                Some(prev) => prev + cost.get(r, c),
            };
        }
    }

    let mut pairs = Vec::with_capacity(m + n);
    let (mut r, mut c) = (m - 1, n - 1);
    pairs.push((r, c));
    while r > 0 || c > 0 {
        let mut next = None;
        let mut best = f64::INFINITY;
        for (dr, dc) in [(1, 1), (1, 0), (0, 1)] {
            if r >= dr && c >= dc {
                let v = acc[at(r - dr, c - dc)];
                if v < best {
                    best = v;
                    next = Some((r - dr, c - dc));
                }
            }
        }
        // Only reachable with NaN costs; fall back to the diagonal-first legal move.
        let (nr, nc) = next.unwrap_or(if r > 0 && c > 0 {
            (r - 1, c - 1)
        } else if r > 0 {
            (r - 1, c)
        } else {
            (r, c - 1)
        });
        r = nr;
        c = nc;
        pairs.push((r, c));
    }
    pairs.reverse();
    Alignment {
        pairs,
        total_cost: acc[at(m - 1, n - 1)],
        target_len: m,
        reference_len: n,
    }
}

/// Per-triplet errors along an alignment: one column per aligned pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScoreMatrix {
    columns: Vec<TransitionErrorVector>,
    triplet_count: usize,
}

impl ErrorScoreMatrix {
    pub fn from_columns(columns: Vec<TransitionErrorVector>, triplet_count: usize) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != triplet_count) {
            return Err(Error::LengthMismatch {
                expected: triplet_count,
                found: c.len(),
            });
        }
        Ok(Self {
            columns,
            triplet_count,
        })
    }

    /// Triplet count `T`.
    pub fn rows(&self) -> usize {
        self.triplet_count
    }

    /// Aligned-pair count `L`.
    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[TransitionErrorVector] {
        &self.columns
    }

    pub fn value(&self, triplet: usize, pair: usize) -> f64 {
        self.columns[pair].values[triplet]
    }

    pub fn is_excluded(&self, triplet: usize, pair: usize) -> bool {
        self.columns[pair].excluded[triplet]
    }

    /// Unexcluded values of one triplet across the alignment.
    pub fn row_values(&self, triplet: usize) -> impl Iterator<Item = f64> + '_ {
        self.columns
            .iter()
            .filter(move |c| !c.excluded[triplet])
            .map(move |c| c.values[triplet])
    }
}

pub fn error_score_matrix_prepared(
    target: &PreparedSequence,
    reference: &PreparedSequence,
    alignment: &Alignment,
    config: &AlignConfig,
) -> Result<ErrorScoreMatrix> {
    let (m, n) = (target.transition_count(), reference.transition_count());
    let mut columns = Vec::with_capacity(alignment.len());
    for &(j, k) in alignment.pairs() {
        if j >= m || k >= n {
            return Err(Error::IndexMismatch {
                target: j,
                reference: k,
                target_len: m,
                reference_len: n,
            });
        }
        columns.push(target.errors_against(reference, j, k, config));
    }
    ErrorScoreMatrix::from_columns(columns, target.triplet_count())
}

pub fn error_score_matrix(
    target: &JointSequence,
    reference: &JointSequence,
    alignment: &Alignment,
    model: &BodyModel,
    config: &AlignConfig,
) -> Result<ErrorScoreMatrix> {
    let t = PreparedSequence::new(target, model, config)?;
    let r = PreparedSequence::new(reference, model, config)?;
    error_score_matrix_prepared(&t, &r, alignment, config)
}

/// Aligns `target` to `reference` and collects the error-score matrix.
pub fn align_prepared(
    target: &PreparedSequence,
    reference: &PreparedSequence,
    config: &AlignConfig,
) -> Result<(Alignment, ErrorScoreMatrix)> {
    let cost = cost_matrix_prepared(target, reference, config);
    let alignment = align(&cost);
    let errors = error_score_matrix_prepared(target, reference, &alignment, config)?;
    Ok((alignment, errors))
}
