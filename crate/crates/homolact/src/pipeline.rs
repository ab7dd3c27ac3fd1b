//! The batch steps behind the command line: align, train, recognize, report.

use std::path::Path;

use homolact_core::alignment::{align, cost_matrix_prepared, error_score_matrix_prepared, Alignment, AlignConfig, CostMatrix, ErrorScoreMatrix, PreparedSequence};
use homolact_core::body::{BodyModel, JointSequence};
use homolact_core::diagnostics::{triplet_significance_report, TripletSignificance};
use homolact_core::learning::{build_objective, TrainingSet};
use homolact_core::optimize::optimize_weights;
use homolact_core::recognition::{classify_paired, ConfusionMatrix, ReferenceDatabase, ReferenceEntry};
use homolact_core::triplet::TripletId;
use homolact_core::weighting::{tau_from_percentile, AlignmentSummary};
use rayon::prelude::*;

use crate::config::{RunConfig, TauPolicy};
use crate::dataset::{write_csv, Dataset, ManifestRow};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::weights::WeightsDoc;

/// Training and test rows under the held-out-camera protocol.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub actions: Vec<String>,
    /// One reference per action, in `actions` order.
    pub references: Vec<&'a ManifestRow>,
    /// Training sequences per action, reference excluded.
    pub train: Vec<Vec<&'a ManifestRow>>,
    pub test: Vec<&'a ManifestRow>,
}

pub fn split<'a>(cfg: &RunConfig, dataset: &'a Dataset) -> Result<Split<'a>> {
    let p = &cfg.protocol;
    let actions = dataset.actions();
    if actions.len() < 2 {
        return Err(Error::Validation(format!("need at least 2 actions, dataset has {}", actions.len())));
    }
    let cameras = dataset.cameras();
    if p.train_cameras > cameras.len() {
        return Err(Error::Validation(format!(
            "protocol.train_cameras = {} but the dataset has {} cameras",
            p.train_cameras,
            cameras.len()
        )));
    }
    let train_cams = &cameras[..p.train_cameras];
    let mut references = Vec::new();
    let mut train = Vec::new();
    for a in &actions {
        let r = dataset.find(a, &p.reference_subject, &p.reference_camera).ok_or_else(|| {
            Error::Validation(format!(
                "no reference for `{a}` (subject {}, camera {})",
                p.reference_subject, p.reference_camera
            ))
        })?;
        references.push(r);
        train.push(
            dataset
                .rows
                .iter()
                .filter(|row| &row.action == a && train_cams.contains(&row.camera) && !std::ptr::eq(*row, r))
                .collect(),
        );
    }
    let test = dataset
        .rows
        .iter()
        .filter(|row| !train_cams.contains(&row.camera) && !references.iter().any(|r| std::ptr::eq(*r, *row)))
        .collect();
    Ok(Split {
        actions,
        references,
        train,
        test,
    })
}

fn prepare_all(
    rows: &[&ManifestRow],
    dataset: &Dataset,
    model: &BodyModel,
    config: &AlignConfig,
) -> Result<Vec<PreparedSequence>> {
    rows.par_iter()
        .map(|r| Ok(PreparedSequence::new(&dataset.load_sequence(r, model)?, model, config)?))
        .collect()
}

/// Error-score matrices of every training sequence against every reference.
pub struct TrainingAlignments<'a> {
    pub split: Split<'a>,
    /// `errors[r][i][k]`: training sequence `k` of action `i` aligned to reference `r`.
    pub errors: Vec<Vec<Vec<ErrorScoreMatrix>>>,
}

pub fn training_alignments<'a>(cfg: &RunConfig, dataset: &'a Dataset) -> Result<TrainingAlignments<'a>> {
    let model = cfg.body_model()?;
    let ac = cfg.align_config();
    let split = split(cfg, dataset)?;
    if let Some((a, _)) = split.actions.iter().zip(&split.train).find(|(_, t)| t.len() < 2) {
        return Err(Error::Validation(format!("action `{a}` has fewer than 2 training sequences")));
    }
    let refs = prepare_all(&split.references, dataset, &model, &ac)?;
    let members = split
        .train
        .iter()
        .map(|g| prepare_all(g, dataset, &model, &ac))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..refs.len())
        .flat_map(|r| {
            members
                .iter()
                .enumerate()
                .flat_map(move |(i, g)| (0..g.len()).map(move |k| (r, i, k)))
        })
        .collect();
    let flat: Vec<ErrorScoreMatrix> = jobs
        .par_iter()
        .map(|&(r, i, k)| Ok(homolact_core::alignment::align_prepared(&members[i][k], &refs[r], &ac)?.1))
        .collect::<Result<_>>()?;
    let mut it = flat.into_iter();
    let errors = (0..refs.len())
        .map(|_| members.iter().map(|g| it.by_ref().take(g.len()).collect()).collect())
        .collect();
    Ok(TrainingAlignments { split, errors })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub docs: Vec<WeightsDoc>,
    /// Objective trace per action, `docs` order.
    pub traces: Vec<Vec<f64>>,
}

impl TrainOutcome {
    pub fn unconverged(&self) -> Vec<String> {
        self.docs.iter().filter(|d| !d.converged).map(|d| d.action.clone()).collect()
    }
}

pub fn train(cfg: &RunConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    let model = cfg.body_model()?;
    let n = model.joint_count();
    let ta = training_alignments(cfg, dataset)?;
    let summaries = ta
        .errors
        .par_iter()
        .map(|row| {
            row.iter()
                .map(|g| g.iter().map(|e| AlignmentSummary::new(e, n)).collect())
                .collect::<homolact_core::error::Result<Vec<Vec<_>>>>()
        })
        .collect::<homolact_core::error::Result<Vec<_>>>()?;
    let set = TrainingSet::new(ta.split.actions.clone(), summaries)?;
    let t = &cfg.train;
    let opt = cfg.optimizer_config();
    let results = (0..set.action_count())
        .into_par_iter()
        .map(|j| {
            let tau = match t.tau.policy {
                TauPolicy::Fixed => t.tau.value,
                TauPolicy::Percentile => {
                    let same: Vec<&ErrorScoreMatrix> = ta.errors[j][j].iter().collect();
                    tau_from_percentile(&same, t.tau.value)?
                }
            };
            let obj = build_objective(&set, j, t.alpha, t.beta, tau)?;
            let out = optimize_weights(&obj, &opt);
            let doc = WeightsDoc {
                action: set.labels()[j].clone(),
                reference: ta.split.references[j].file.clone(),
                alpha: t.alpha,
                beta: t.beta,
                tau,
                converged: out.converged,
                iterations: out.iterations,
                objective_uniform: out.trace[0],
                objective: out.value,
                projected_gradient_norm: out.projected_gradient_norm,
                weights: WeightsDoc::weight_map(&model, &out.weights),
            };
            Ok((doc, out.trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let (docs, traces) = results.into_iter().unzip();
    Ok(TrainOutcome { docs, traces })
}

/// Writes one weight document per action plus `train_log.csv` and `trace.csv`.
pub fn write_training(outcome: &TrainOutcome, dir: &Path) -> Result<()> {
    for d in &outcome.docs {
        d.save(dir)?;
    }
    write_csv(
        &dir.join("train_log.csv"),
        &[
            "action",
            "tau",
            "converged",
            "iterations",
            "objective_uniform",
            "objective",
            "projected_gradient_norm",
        ],
        outcome.docs.iter().map(|d| {
            vec![
                d.action.clone(),
                d.tau.to_string(),
                d.converged.to_string(),
                d.iterations.to_string(),
                d.objective_uniform.to_string(),
                d.objective.to_string(),
                d.projected_gradient_norm.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("trace.csv"),
        &["action", "step", "objective"],
        outcome.docs.iter().zip(&outcome.traces).flat_map(|(d, tr)| {
            tr.iter()
                .enumerate()
                .map(|(i, v)| vec![d.action.clone(), i.to_string(), v.to_string()])
                .collect::<Vec<_>>()
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub file: String,
    pub truth: String,
    pub predicted: String,
    pub score: f64,
    pub predicted_uniform: String,
    pub score_uniform: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub weighted: ConfusionMatrix,
    pub uniform: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

/// Classifies every test sequence with the trained weights and, paired, with uniform weights.
pub fn recognize(cfg: &RunConfig, dataset: &Dataset, weights_dir: &Path) -> Result<Recognition> {
    let model = cfg.body_model()?;
    let ac = cfg.align_config();
    let split = split(cfg, dataset)?;
    if split.test.is_empty() {
        return Err(Error::Validation("the protocol leaves no test sequences".into()));
    }
    let entries = split
        .actions
        .iter()
        .map(|a| {
            let doc = WeightsDoc::load(weights_dir, a)?;
            let origin = crate::weights::doc_path(weights_dir, a).display().to_string();
            let w = doc.weight_vector(&model, &origin)?;
            let reference = crate::seqfile::load_sequence(&dataset.root.join(&doc.reference), &model)?;
            Ok(ReferenceEntry::new(a, &reference, w, doc.tau, &model, &ac)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let db = ReferenceDatabase::new(entries)?;
    let predictions = split
        .test
        .par_iter()
        .map(|row| {
            let seq = dataset.load_sequence(row, &model)?;
            let target = PreparedSequence::new(&seq, &model, &ac)?;
            let (w, u) = classify_paired(&target, &db, &ac)?;
            Ok(Prediction {
                file: row.file.clone(),
                truth: row.action.clone(),
                score: w.score_of(&w.label).unwrap_or(f64::NAN),
                predicted: w.label,
                score_uniform: u.score_of(&u.label).unwrap_or(f64::NAN),
                predicted_uniform: u.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut weighted = ConfusionMatrix::new(db.labels());
    let mut uniform = ConfusionMatrix::new(db.labels());
    for p in &predictions {
        weighted.record(&p.truth, &p.predicted)?;
        uniform.record(&p.truth, &p.predicted_uniform)?;
    }
    Ok(Recognition {
        weighted,
        uniform,
        predictions,
    })
}

fn confusion_rows(m: &ConfusionMatrix) -> Vec<Vec<String>> {
    m.labels()
        .iter()
        .zip(m.counts())
        .map(|(l, row)| std::iter::once(l.clone()).chain(row.iter().map(u64::to_string)).collect())
        .collect()
}

pub fn write_confusion(m: &ConfusionMatrix, path: &Path) -> Result<()> {
    let header: Vec<&str> = std::iter::once("truth").chain(m.labels().iter().map(String::as_str)).collect();
    write_csv(path, &header, confusion_rows(m))
}

pub fn summary_text(r: &Recognition) -> String {
    let (w, u) = (r.weighted.accuracy(), r.uniform.accuracy());
    format!(
        "test_items = {}\naccuracy = {w}\naccuracy_uniform = {u}\ndelta = {}\n",
        r.weighted.total(),
        w - u
    )
}

/// Writes `confusion.csv`, `confusion_uniform.csv`, `predictions.csv` and `summary.txt`.
pub fn write_recognition(r: &Recognition, dir: &Path) -> Result<()> {
    write_confusion(&r.weighted, &dir.join("confusion.csv"))?;
    write_confusion(&r.uniform, &dir.join("confusion_uniform.csv"))?;
    write_csv(
        &dir.join("predictions.csv"),
        &["file", "truth", "predicted", "score", "predicted_uniform", "score_uniform"],
        r.predictions.iter().map(|p| {
            vec![
                p.file.clone(),
                p.truth.clone(),
                p.predicted.clone(),
                p.score.to_string(),
                p.predicted_uniform.clone(),
                p.score_uniform.to_string(),
            ]
        }),
    )?;
    fsutil::write_atomic(&dir.join("summary.txt"), summary_text(r).as_bytes())
}

#[derive(Debug, Clone)]
pub struct PairAlignment {
    pub cost: CostMatrix,
    pub alignment: Alignment,
    pub errors: ErrorScoreMatrix,
}

pub fn align_pair(cfg: &RunConfig, target: &JointSequence, reference: &JointSequence) -> Result<PairAlignment> {
    let model = cfg.body_model()?;
    let ac = cfg.align_config();
    let t = PreparedSequence::new(target, &model, &ac)?;
    let r = PreparedSequence::new(reference, &model, &ac)?;
    let cost = cost_matrix_prepared(&t, &r, &ac);
    let alignment = align(&cost);
    let errors = error_score_matrix_prepared(&t, &r, &alignment, &ac)?;
    Ok(PairAlignment {
        cost,
        alignment,
        errors,
    })
}

fn triplet_labels(model: &BodyModel, ordinal: usize) -> [String; 3] {
    let t = TripletId::from_ordinal(ordinal, model.joint_count()).expect("ordinal in range");
    t.joints().map(|j| model.labels()[j].clone())
}

/// Writes `alignment.csv` (path with per-cell cost) and `errors.csv` (one row per triplet).
pub fn write_alignment(p: &PairAlignment, model: &BodyModel, dir: &Path) -> Result<()> {
    let mut running = 0.0;
    write_csv(
        &dir.join("alignment.csv"),
        &["step", "target", "reference", "cost", "cumulative"],
        p.alignment.pairs().iter().enumerate().map(|(s, &(j, k))| {
            let c = p.cost.get(j, k);
            running += c;
            vec![s.to_string(), j.to_string(), k.to_string(), c.to_string(), running.to_string()]
        }),
    )?;
    let pair_cols: Vec<String> = (0..p.errors.cols()).map(|l| format!("p{l}")).collect();
    let header: Vec<&str> = ["triplet", "joint_a", "joint_b", "joint_c"]
        .into_iter()
        .chain(pair_cols.iter().map(String::as_str))
        .collect();
    write_csv(
        &dir.join("errors.csv"),
        &header,
        (0..p.errors.rows()).map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(triplet_labels(model, t));
            row.extend((0..p.errors.cols()).map(|l| {
                if p.errors.is_excluded(t, l) {
                    String::new()
                } else {
                    p.errors.value(t, l).to_string()
                }
            }));
            row
        }),
    )
}

/// Per action: triplet significance of its reference's same-action versus cross-action training errors.
pub fn significance(cfg: &RunConfig, dataset: &Dataset) -> Result<Vec<(String, Vec<TripletSignificance>)>> {
    let ta = training_alignments(cfg, dataset)?;
    ta.split
        .actions
        .iter()
        .enumerate()
        .map(|(r, a)| {
            let row = &ta.errors[r];
            let cross: Vec<ErrorScoreMatrix> = row
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != r)
                .flat_map(|(_, g)| g.iter().cloned())
                .collect();
            Ok((a.clone(), triplet_significance_report(&row[r], &cross)?))
        })
        .collect()
}

pub fn write_significance(report: &[(String, Vec<TripletSignificance>)], model: &BodyModel, path: &Path) -> Result<()> {
    write_csv(
        path,
        &[
            "action",
            "triplet",
            "joint_a",
            "joint_b",
            "joint_c",
            "same_mean",
            "same_variance",
            "cross_mean",
            "cross_variance",
            "index",
        ],
        report.iter().flat_map(|(a, rows)| {
            rows.iter()
                .map(|s| {
                    let mut row = vec![a.clone(), s.ordinal.to_string()];
                    row.extend(triplet_labels(model, s.ordinal));
                    row.extend(
                        [s.same_mean, s.same_variance, s.cross_mean, s.cross_variance, s.index]
                            .iter()
                            .map(f64::to_string),
                    );
                    row
                })
                .collect::<Vec<_>>()
        }),
    )
}
