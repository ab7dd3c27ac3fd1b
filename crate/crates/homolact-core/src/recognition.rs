//! Weighted nearest-reference classification and confusion counts.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::alignment::{align_prepared, AlignConfig, PreparedSequence};
use crate::body::{BodyModel, JointSequence};
use crate::error::{Error, Result};
use crate::weighting::{sequence_similarity, WeightVector};

/// One action's reference sequence with its trained weights and `τ`.
#[derive(Debug, Clone)]
pub struct ReferenceEntry {
    label: String,
    reference: PreparedSequence,
    weights: WeightVector,
    tau: f64,
}

impl ReferenceEntry {
    pub fn new(
        label: &str,
        reference: &JointSequence,
        weights: WeightVector,
        tau: f64,
        model: &BodyModel,
        config: &AlignConfig,
    ) -> Result<Self> {
        if weights.len() != model.joint_count() {
            return Err(Error::JointCountMismatch {
                expected: model.joint_count(),
                found: weights.len(),
            });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTau(tau));
        }
        Ok(Self {
            label: label.into(),
            reference: PreparedSequence::new(reference, model, config)?,
            weights,
            tau,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// A copy of this entry with different weights.
    pub fn with_weights(&self, weights: WeightVector) -> Result<Self> {
        if weights.len() != self.weights.len() {
            return Err(Error::JointCountMismatch {
                expected: self.weights.len(),
                found: weights.len(),
            });
        }
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    /// `S̄ / N` of `target` against this reference.
    pub fn score(&self, target: &PreparedSequence, config: &AlignConfig) -> Result<EntryScore> {
        let mut s = self.score_many(target, &[&self.weights], config)?;
        Ok(s.remove(0))
    }

    /// Scores `target` under each weight vector, sharing a single alignment.
    pub fn score_many(
        &self,
        target: &PreparedSequence,
        weights: &[&WeightVector],
        config: &AlignConfig,
    ) -> Result<Vec<EntryScore>> {
        let (alignment, errors) = align_prepared(target, &self.reference, config)?;
        let pairs = alignment.len();
        weights
            .iter()
            .map(|w| {
                let similarity = sequence_similarity(&errors, w, self.tau)?;
                Ok(EntryScore {
                    similarity,
                    pairs,
                    score: similarity / pairs as f64,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryScore {
    /// Weighted sequence similarity `S̄`.
    pub similarity: f64,
    /// Aligned-pair count `N`.
    pub pairs: usize,
    /// `S̄ / N`, comparable across references of different length.
    pub score: f64,
}

/// Entries with unique labels, kept in label order.
#[derive(Debug, Clone)]
pub struct ReferenceDatabase {
    entries: Vec<ReferenceEntry>,
}

impl ReferenceDatabase {
    pub fn new(mut entries: Vec<ReferenceEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        entries.sort_by(|a, b| a.label.cmp(&b.label));
        if let Some(w) = entries.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::InvalidTrainingSet(format!("duplicate reference label `{}`", w[0].label)));
        }
        let n = entries[0].weights.len();
        if let Some(e) = entries.iter().find(|e| e.weights.len() != n) {
            return Err(Error::JointCountMismatch {
                expected: n,
                found: e.weights.len(),
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.entries.binary_search_by(|e| e.label.as_str().cmp(label)).ok()
    }

    /// The same references, every one with uniform weights.
    pub fn with_uniform_weights(&self) -> Self {
        let n = self.entries[0].weights.len();
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| ReferenceEntry {
                    weights: WeightVector::uniform(n),
                    ..e.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// One result per database entry, in label order; failed entries carry their error.
    pub scores: Vec<(String, core::result::Result<EntryScore, Error>)>,
}

impl Classification {
    pub fn score_of(&self, label: &str) -> Option<f64> {
        self.scores
            .iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, s)| s.as_ref().ok().map(|s| s.score))
    }

    pub fn failed_entries(&self) -> impl Iterator<Item = (&str, &Error)> {
        self.scores
            .iter()
            .filter_map(|(l, s)| s.as_ref().err().map(|e| (l.as_str(), e)))
    }
}

fn pick(scores: Vec<(String, core::result::Result<EntryScore, Error>)>) -> Result<Classification> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, s)) in scores.iter().enumerate() {
        if let Ok(s) = s {
            if best.is_none_or(|(_, b)| s.score > b) {
                best = Some((i, s.score));
            }
        }
    }
    let (i, _) = best.ok_or(Error::NoScoredEntries)?;
    Ok(Classification {
        label: scores[i].0.clone(),
        scores,
    })
}

/// Scores `target` against every entry and returns the best label.
///
/// Entries that fail to score are skipped; ties go to the earliest label.
pub fn classify_prepared(target: &PreparedSequence, db: &ReferenceDatabase, config: &AlignConfig) -> Result<Classification> {
    pick(
        db.entries
            .iter()
            .map(|e| (e.label.clone(), e.score(target, config)))
            .collect(),
    )
}

/// Classifies `target` with the trained weights and with uniform weights, aligning each reference once.
///
/// Returns `(trained, uniform)`.
pub fn classify_paired(
    target: &PreparedSequence,
    db: &ReferenceDatabase,
    config: &AlignConfig,
) -> Result<(Classification, Classification)> {
    let uniform = WeightVector::uniform(db.entries[0].weights.len());
    let mut trained = Vec::with_capacity(db.entries.len());
    let mut flat = Vec::with_capacity(db.entries.len());
    for e in &db.entries {
        match e.score_many(target, &[&e.weights, &uniform], config) {
            Ok(s) => {
                trained.push((e.label.clone(), Ok(s[0])));
                flat.push((e.label.clone(), Ok(s[1])));
            }
            Err(err) => {
                trained.push((e.label.clone(), Err(err.clone())));
                flat.push((e.label.clone(), Err(err)));
            }
        }
    }
    Ok((pick(trained)?, pick(flat)?))
}

pub fn classify(
    target: &JointSequence,
    db: &ReferenceDatabase,
    model: &BodyModel,
    config: &AlignConfig,
) -> Result<Classification> {
    let target = PreparedSequence::new(target, model, config)?;
    classify_prepared(&target, db, config)
}

/// Ground truth in rows, predictions in columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let j = labels.len();
        Self {
            labels,
            counts: vec![vec![0; j]; j],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.into()))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let (r, c) = (self.index(truth)?, self.index(predicted)?);
        self.counts[r][c] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Trace over total; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / total as f64
    }
}

/// Classifies every labelled test sequence and tallies the results.
pub fn evaluate(
    test_set: &[(String, JointSequence)],
    db: &ReferenceDatabase,
    model: &BodyModel,
    config: &AlignConfig,
) -> Result<ConfusionMatrix> {
    let mut confusion = ConfusionMatrix::new(db.labels());
    if let Some((label, _)) = test_set.iter().find(|(l, _)| db.position(l).is_none()) {
        return Err(Error::UnknownLabel(label.clone()));
    }
    for (truth, seq) in test_set {
        let c = classify(seq, db, model, config)?;
        confusion.record(truth, &c.label)?;
    }
    Ok(confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{Pose2D, SequenceMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, frames: usize) -> JointSequence {
        let poses = (0..frames)
            .map(|_| {
                Pose2D::new((0..11).map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]).collect())
                    .unwrap()
            })
            .collect();
        JointSequence::new(poses, SequenceMeta::default(), &BodyModel::default()).unwrap()
    }

    fn db_of(seqs: &[(&str, &JointSequence)]) -> ReferenceDatabase {
        let model = BodyModel::default();
        let cfg = AlignConfig::default();
        ReferenceDatabase::new(
            seqs.iter()
                .map(|(l, s)| ReferenceEntry::new(l, s, WeightVector::uniform(11), 0.5, &model, &cfg).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn reference_matches_itself_with_full_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (random_seq(&mut rng, 6), random_seq(&mut rng, 7));
        let db = db_of(&[("b", &b), ("a", &a)]);
        let c = classify(&a, &db, &BodyModel::default(), &AlignConfig::default()).unwrap();
        assert_eq!(c.label, "a");
        let (_, s) = &c.scores[0];
        let s = s.as_ref().unwrap();
        assert!((s.similarity - s.pairs as f64 * 0.5).abs() < 1e-12);
        assert_eq!(c.scores[1].0, "b");
    }

    #[test]
    fn single_entry_always_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_seq(&mut rng, 5);
        let db = db_of(&[("only", &r)]);
        for _ in 0..5 {
            let t = random_seq(&mut rng, 6);
            assert_eq!(classify(&t, &db, &BodyModel::default(), &AlignConfig::default()).unwrap().label, "only");
        }
    }

    #[test]
    fn ties_go_to_the_first_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_seq(&mut rng, 5);
        let db = db_of(&[("z", &r), ("m", &r)]);
        let c = classify(&r, &db, &BodyModel::default(), &AlignConfig::default()).unwrap();
        assert_eq!(c.label, "m");
    }

    #[test]
    fn paired_matches_separate_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = BodyModel::default();
        let cfg = AlignConfig::default();
        let refs: Vec<_> = (0..3).map(|_| random_seq(&mut rng, 6)).collect();
        let entries = refs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut w: Vec<f64> = (0..11).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                ReferenceEntry::new(&alloc::format!("r{i}"), r, WeightVector::new(w).unwrap(), 0.3, &model, &cfg).unwrap()
            })
            .collect();
        let db = ReferenceDatabase::new(entries).unwrap();
        let flat = db.with_uniform_weights();
        for _ in 0..4 {
            let t = PreparedSequence::new(&random_seq(&mut rng, 7), &model, &cfg).unwrap();
            let (w, u) = classify_paired(&t, &db, &cfg).unwrap();
            assert_eq!(w, classify_prepared(&t, &db, &cfg).unwrap());
            assert_eq!(u, classify_prepared(&t, &flat, &cfg).unwrap());
        }
    }

    #[test]
    fn database_validation() {
        assert!(matches!(ReferenceDatabase::new(vec![]), Err(Error::EmptyDatabase)));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_seq(&mut rng, 5);
        let model = BodyModel::default();
        let cfg = AlignConfig::default();
        let e = ReferenceEntry::new("x", &r, WeightVector::uniform(11), 0.5, &model, &cfg).unwrap();
        assert!(ReferenceDatabase::new(vec![e.clone(), e]).is_err());
        assert_eq!(
            ReferenceEntry::new("x", &r, WeightVector::uniform(11), 0.0, &model, &cfg).err(),
            Some(Error::InvalidTau(0.0))
        );
    }

    #[test]
    fn confusion_counts() {
        let mut m = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        assert_eq!(m.accuracy(), 0.0);
        m.record("a", "a").unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.counts(), &[vec![1, 0], vec![0, 0]]);
        m.record("b", "a").unwrap();
        m.record("b", "b").unwrap();
        assert_eq!(m.row_sums(), vec![1, 2]);
        assert!((m.accuracy() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.record("c", "a"), Err(Error::UnknownLabel("c".into())));
    }

    #[test]
    fn evaluate_rejects_unknown_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_seq(&mut rng, 5);
        let db = db_of(&[("a", &r)]);
        let set = vec![("q".into(), r.clone())];
        assert_eq!(
            evaluate(&set, &db, &BodyModel::default(), &AlignConfig::default()),
            Err(Error::UnknownLabel("q".into()))
        );
        let set = vec![("a".into(), r)];
        let m = evaluate(&set, &db, &BodyModel::default(), &AlignConfig::default()).unwrap();
        assert_eq!(m.counts(), &[vec![1]]);
    }
}
