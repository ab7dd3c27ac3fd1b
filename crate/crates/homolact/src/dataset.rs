//! Synthetic datasets on disk: a manifest plus one sequence file per (action, subject, camera).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use homolact_core::body::{BodyModel, JointSequence, SequenceMeta};
use homolact_core::synth::{procedural_action, project, random_rig, ActionKind, CameraModel, SubjectParams};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::seqfile::{self, Motion3D};

pub const MANIFEST: &str = "manifest.csv";
pub const CAMERAS: &str = "cameras.csv";

const RIG_STREAM: u64 = 0;
const SUBJECT_STREAM: u64 = 1 << 16;
const MOTION_STREAM: u64 = 1 << 32;

/// Independent 64-bit seed for `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn subject_id(s: usize) -> String {
    format!("s{s}")
}

pub fn camera_id(c: usize) -> String {
    format!("c{c:02}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// Path relative to the dataset root.
    pub file: String,
    pub action: String,
    pub subject: String,
    pub camera: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
}

fn action_index(kind: ActionKind) -> u64 {
    ActionKind::ALL.iter().position(|k| *k == kind).expect("listed") as u64
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Validation(format!("csv encoding: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Validation(format!("csv encoding: {e}")))
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    fsutil::write_atomic(path, &csv_bytes(header, rows)?)
}

fn camera_row(id: &str, cam: &CameraModel) -> Vec<String> {
    let mut row = vec![
        id.to_string(),
        format!("{:?}", cam.kind()).to_lowercase(),
        cam.focal().to_string(),
        cam.principal()[0].to_string(),
        cam.principal()[1].to_string(),
    ];
    row.extend(cam.translation().iter().map(f64::to_string));
    let r = cam.rotation();
    for i in 0..3 {
        for j in 0..3 {
            row.push(r[(i, j)].to_string());
        }
    }
    row
}

/// Writes the full synthetic dataset under `root` and returns its manifest.
///
/// Per (action, subject): one 3D motion in `motions/`, projected through
/// every rig camera into `sequences/`.
pub fn synthesize(cfg: &RunConfig, root: &Path) -> Result<Dataset> {
    cfg.validate()?;
    let model = cfg.body_model()?;
    if model.joint_count() != 11 {
        return Err(Error::Validation(format!(
            "procedural actions drive the default 11-joint model, configured model has {}",
            model.joint_count()
        )));
    }
    let kinds = cfg.action_kinds()?;
    let s = &cfg.synth;
    let rig = random_rig(&cfg.rig_spec(derive_seed(s.seed, RIG_STREAM)))?;
    let subjects: Vec<SubjectParams> = (0..s.subjects)
        .map(|i| SubjectParams::sample(derive_seed(s.seed, SUBJECT_STREAM + i as u64)))
        .collect();
    let jobs: Vec<(ActionKind, usize)> = kinds
        .iter()
        .flat_map(|&k| (0..s.subjects).map(move |i| (k, i)))
        .collect();
    let rows: Vec<Vec<ManifestRow>> = jobs
        .par_iter()
        .map(|&(kind, subj)| {
            let seed = derive_seed(s.seed, MOTION_STREAM + (action_index(kind) << 16) + subj as u64);
            let poses = procedural_action(kind, &subjects[subj], s.frames, seed)?;
            let meta = SequenceMeta {
                action: kind.name().into(),
                subject: subject_id(subj),
                camera: String::new(),
                frame_rate: None,
            };
            let motion = Motion3D { poses, meta };
            let mfile = format!("motions/{}_{}.seq", kind.name(), subject_id(subj));
            seqfile::save_motion(&motion, &model, &root.join(&mfile))?;
            rig.iter()
                .enumerate()
                .map(|(c, cam)| {
                    let meta = SequenceMeta {
                        camera: camera_id(c),
                        ..motion.meta.clone()
                    };
                    let seq = project(&motion.poses, cam, meta, &model)?;
                    let file = format!("sequences/{}_{}_{}.seq", kind.name(), subject_id(subj), camera_id(c));
                    seqfile::save_sequence(&seq, &model, &root.join(&file))?;
                    Ok(ManifestRow {
                        file,
                        action: kind.name().into(),
                        subject: subject_id(subj),
                        camera: camera_id(c),
                        seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ManifestRow> = rows.into_iter().flatten().collect();
    write_csv(
        &root.join(CAMERAS),
        &[
            "camera", "kind", "focal", "cx", "cy", "tx", "ty", "tz", "r11", "r12", "r13", "r21", "r22", "r23", "r31",
            "r32", "r33",
        ],
        rig.iter().enumerate().map(|(c, cam)| camera_row(&camera_id(c), cam)),
    )?;
    let dataset = Dataset {
        root: root.to_path_buf(),
        rows,
    };
    dataset.save_manifest()?;
    Ok(dataset)
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = fsutil::read_text(&path)?;
        let origin = path.display().to_string();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<ManifestRow>().enumerate() {
            let row = rec.map_err(|e| Error::parse(origin.clone(), i + 2, e.to_string()))?;
            rows.push(row);
        }
        let d = Self {
            root: root.to_path_buf(),
            rows,
        };
        d.check().map_err(|m| Error::parse(origin, 1, m))?;
        Ok(d)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.rows.is_empty() {
            return Err("manifest lists no sequences".into());
        }
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert((&r.action, &r.subject, &r.camera)) {
                return Err(format!("duplicate entry {}/{}/{}", r.action, r.subject, r.camera));
            }
        }
        Ok(())
    }

    pub fn save_manifest(&self) -> Result<()> {
        write_csv(
            &self.root.join(MANIFEST),
            &["file", "action", "subject", "camera", "seed"],
            self.rows.iter().map(|r| {
                vec![
                    r.file.clone(),
                    r.action.clone(),
                    r.subject.clone(),
                    r.camera.clone(),
                    r.seed.to_string(),
                ]
            }),
        )
    }

    pub fn path_of(&self, row: &ManifestRow) -> PathBuf {
        self.root.join(&row.file)
    }

    /// Loads a listed sequence and checks its labels against the manifest.
    pub fn load_sequence(&self, row: &ManifestRow, model: &BodyModel) -> Result<JointSequence> {
        let path = self.path_of(row);
        let seq = seqfile::load_sequence(&path, model)?;
        if seq.meta.action != row.action {
            return Err(Error::Validation(format!(
                "{}: action `{}` but the manifest says `{}`",
                path.display(),
                seq.meta.action,
                row.action
            )));
        }
        Ok(seq)
    }

    /// Sorted distinct action labels.
    pub fn actions(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.action.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Sorted distinct camera ids.
    pub fn cameras(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.camera.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn find(&self, action: &str, subject: &str, camera: &str) -> Option<&ManifestRow> {
        self.rows
            .iter()
            .find(|r| r.action == action && r.subject == subject && r.camera == camera)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.synth.frames = 8;
        cfg.synth.rig.count = 3;
        cfg.synth.actions = vec!["walk".into(), "run".into()];
        cfg
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a: BTreeSet<u64> = (0..100).map(|s| derive_seed(7, s)).collect();
        assert_eq!(a.len(), 100);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn writes_every_sequence_and_reloads_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let d = synthesize(&cfg, dir.path()).unwrap();
        assert_eq!(d.rows.len(), 2 * 2 * 3);
        assert_eq!(Dataset::load(dir.path()).unwrap(), d);
        assert_eq!(d.cameras(), vec!["c00", "c01", "c02"]);
        assert_eq!(d.actions(), vec!["run", "walk"]);
        let model = cfg.body_model().unwrap();
        for r in &d.rows {
            let s = d.load_sequence(r, &model).unwrap();
            assert_eq!(s.len(), 8);
            assert_eq!((s.meta.subject.as_str(), s.meta.camera.as_str()), (r.subject.as_str(), r.camera.as_str()));
        }
        let m = seqfile::load_motion(&dir.path().join("motions/run_s1.seq"), &model).unwrap();
        assert_eq!(m.poses.len(), 8);
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small();
        synthesize(&cfg, a.path()).unwrap();
        synthesize(&cfg, b.path()).unwrap();
        for f in [MANIFEST, CAMERAS, "sequences/walk_s1_c02.seq"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let mut other = small();
        other.synth.seed = 2;
        let c = tempfile::tempdir().unwrap();
        synthesize(&other, c.path()).unwrap();
        assert_ne!(
            std::fs::read(a.path().join(MANIFEST)).unwrap(),
            std::fs::read(c.path().join(MANIFEST)).unwrap()
        );
    }

    #[test]
    fn manifest_errors_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(MANIFEST), "file,action,subject,camera,seed\na,b,c,d,notanumber\n").unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Parse { line: 2, .. })));
        std::fs::write(dir.path().join(MANIFEST), "file,action,subject,camera,seed\n").unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Parse { .. })));
    }
}
