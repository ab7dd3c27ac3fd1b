//! Plain-text joint sequence files.
//!
//! ```text
//! #homolact-seq v1
//! #dims 2
//! #joints head,l_shoulder,...
//! #meta action=walk
//! 0,head,12.5,-3,1,l_shoulder,10,4.25,1,...
//! ```
//!
//! Each frame record is the frame index followed by one `label,x,y[,z],valid`
//! group per joint in header order. See `docs/formats.md`.

use std::fmt::Write as _;
use std::path::Path;

use homolact_core::body::{BodyModel, JointSequence, Pose2D, Pose3D, SequenceMeta};

use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &str = "#homolact-seq v1";

/// A 3D joint track with its labels, prior to projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion3D {
    pub poses: Vec<Pose3D>,
    pub meta: SequenceMeta,
}

struct Header {
    dims: usize,
    joints: Vec<String>,
    meta: SequenceMeta,
}

fn check_value(key: &str, value: &str) -> Result<()> {
    if value.contains(['\n', '\r']) {
        return Err(Error::Validation(format!("meta {key} contains a line break")));
    }
    Ok(())
}

fn write_header(out: &mut String, dims: usize, model: &BodyModel, meta: &SequenceMeta) -> Result<()> {
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "#dims {dims}");
    let _ = writeln!(out, "#joints {}", model.labels().join(","));
    for (key, value) in [
        ("action", &meta.action),
        ("subject", &meta.subject),
        ("camera", &meta.camera),
    ] {
        check_value(key, value)?;
        let _ = writeln!(out, "#meta {key}={value}");
    }
    if let Some(rate) = meta.frame_rate {
        let _ = writeln!(out, "#meta frame_rate={rate}");
    }
    Ok(())
}

pub fn write_sequence(seq: &JointSequence, model: &BodyModel) -> Result<String> {
    let mut out = String::new();
    write_header(&mut out, 2, model, &seq.meta)?;
    for (f, pose) in seq.poses().iter().enumerate() {
        let _ = write!(out, "{f}");
        for (j, label) in model.labels().iter().enumerate() {
            let [x, y] = pose.point(j);
            let _ = write!(out, ",{label},{x},{y},{}", u8::from(pose.is_valid(j)));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_motion(motion: &Motion3D, model: &BodyModel) -> Result<String> {
    let mut out = String::new();
    write_header(&mut out, 3, model, &motion.meta)?;
    for (f, pose) in motion.poses.iter().enumerate() {
        if pose.len() != model.joint_count() {
            return Err(Error::Validation(format!(
                "frame {f} has {} joints, model has {}",
                pose.len(),
                model.joint_count()
            )));
        }
        let _ = write!(out, "{f}");
        for (label, [x, y, z]) in model.labels().iter().zip(&pose.points) {
            let _ = write!(out, ",{label},{x},{y},{z},1");
        }
        out.push('\n');
    }
    Ok(out)
}

fn parse_header<'a>(
    origin: &str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<(Header, Option<(usize, &'a str)>)> {
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        Some((n, _)) => return Err(Error::parse(origin, n, format!("expected `{MAGIC}`"))),
        None => return Err(Error::parse(origin, 1, "empty file")),
    }
    let mut dims = None;
    let mut joints = None;
    let mut meta = SequenceMeta::default();
    let mut first_record = None;
    for (n, raw) in lines.by_ref() {
        let line = raw.trim_end_matches('\r');
        let Some(directive) = line.strip_prefix('#') else {
            if !line.trim().is_empty() {
                first_record = Some((n, line));
                break;
            }
            continue;
        };
        let (key, rest) = directive.split_once(' ').unwrap_or((directive, ""));
        match key {
            "dims" => match rest.trim() {
                "2" => dims = Some(2),
                "3" => dims = Some(3),
                other => return Err(Error::parse(origin, n, format!("dims must be 2 or 3, got `{other}`"))),
            },
            "joints" => joints = Some(rest.trim().split(',').map(str::to_string).collect::<Vec<_>>()),
            "meta" => {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(origin, n, "meta entry must be key=value"))?;
                match k.trim() {
                    "action" => meta.action = v.to_string(),
                    "subject" => meta.subject = v.to_string(),
                    "camera" => meta.camera = v.to_string(),
                    "frame_rate" => {
                        let rate: f64 = v
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(origin, n, format!("bad frame_rate `{v}`")))?;
                        if !(rate.is_finite() && rate > 0.0) {
                            return Err(Error::parse(origin, n, "frame_rate must be positive"));
                        }
                        meta.frame_rate = Some(rate);
                    }
                    other => return Err(Error::parse(origin, n, format!("unknown meta key `{other}`"))),
                }
            }
            // Free-form comment.
            _ => {}
        }
    }
    let dims = dims.ok_or_else(|| Error::parse(origin, 1, "missing #dims line"))?;
    let joints = joints.ok_or_else(|| Error::parse(origin, 1, "missing #joints line"))?;
    Ok((Header { dims, joints, meta }, first_record))
}

fn check_schema(origin: &str, joints: &[String], model: &BodyModel) -> Result<()> {
    if joints != model.labels() {
        return Err(Error::SchemaMismatch {
            origin: origin.to_string(),
            expected: model.labels().to_vec(),
            found: joints.to_vec(),
        });
    }
    Ok(())
}

/// Parses the joint groups of one frame record. An empty coordinate marks the joint invalid.
fn parse_record(
    origin: &str,
    n: usize,
    line: &str,
    expected_frame: usize,
    dims: usize,
    joints: &[String],
) -> Result<(Vec<[f64; 3]>, Vec<bool>)> {
    let fields: Vec<&str> = line.split(',').collect();
    let group = dims + 2;
    if fields.len() != 1 + group * joints.len() {
        return Err(Error::parse(
            origin,
            n,
            format!("expected {} fields, found {}", 1 + group * joints.len(), fields.len()),
        ));
    }
    let frame: usize = fields[0]
        .trim()
        .parse()
        .map_err(|_| Error::parse(origin, n, format!("bad frame index `{}`", fields[0])))?;
    if frame != expected_frame {
        return Err(Error::parse(origin, n, format!("frame index {frame}, expected {expected_frame}")));
    }
    let mut points = Vec::with_capacity(joints.len());
    let mut valid = Vec::with_capacity(joints.len());
    for (j, label) in joints.iter().enumerate() {
        let g = &fields[1 + j * group..1 + (j + 1) * group];
        if g[0].trim() != label {
            return Err(Error::parse(
                origin,
                n,
                format!("joint {} labelled `{}`, header says `{label}`", j + 1, g[0].trim()),
            ));
        }
        let mut p = [0.0; 3];
        let mut present = true;
        for (d, text) in g[1..=dims].iter().enumerate() {
            let text = text.trim();
            if text.is_empty() {
                present = false;
                continue;
            }
            p[d] = text
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(origin, n, format!("bad coordinate `{text}` for `{label}`")))?;
        }
        let flag = match g[dims + 1].trim() {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(origin, n, format!("valid flag must be 0 or 1, got `{other}`"))),
        };
        if !present {
            p = [0.0; 3];
        }
        points.push(p);
        valid.push(flag && present);
    }
    Ok((points, valid))
}

fn records<'a>(
    origin: &str,
    first: Option<(usize, &'a str)>,
    rest: impl Iterator<Item = (usize, &'a str)>,
    dims: usize,
    joints: &[String],
) -> Result<Vec<(Vec<[f64; 3]>, Vec<bool>)>> {
    let mut out = Vec::new();
    for (n, raw) in first.into_iter().chain(rest) {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_record(origin, n, line, out.len(), dims, joints)?);
    }
    Ok(out)
}

fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn parse_sequence(text: &str, origin: &str, model: &BodyModel) -> Result<JointSequence> {
    let mut lines = numbered(text);
    let (header, first) = parse_header(origin, &mut lines)?;
    if header.dims != 2 {
        return Err(Error::parse(origin, 2, "expected a 2D sequence (#dims 2)"));
    }
    check_schema(origin, &header.joints, model)?;
    let poses = records(origin, first, lines, 2, &header.joints)?
        .into_iter()
        .map(|(p, v)| Pose2D::with_validity(p.iter().map(|q| [q[0], q[1]]).collect(), v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(JointSequence::new(poses, header.meta, model)?)
}

pub fn parse_motion(text: &str, origin: &str, model: &BodyModel) -> Result<Motion3D> {
    let mut lines = numbered(text);
    let (header, first) = parse_header(origin, &mut lines)?;
    if header.dims != 3 {
        return Err(Error::parse(origin, 2, "expected a 3D motion (#dims 3)"));
    }
    check_schema(origin, &header.joints, model)?;
    let poses = records(origin, first, lines, 3, &header.joints)?
        .into_iter()
        .enumerate()
        .map(|(f, (p, v))| match v.iter().position(|ok| !ok) {
            Some(j) => Err(Error::Validation(format!(
                "{origin}: frame {f}: joint `{}` missing; 3D motions must be complete",
                header.joints[j]
            ))),
            None => Ok(Pose3D::new(p)?),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Motion3D {
        poses,
        meta: header.meta,
    })
}

pub fn load_sequence(path: &Path, model: &BodyModel) -> Result<JointSequence> {
    parse_sequence(&fsutil::read_text(path)?, &path.display().to_string(), model)
}

pub fn save_sequence(seq: &JointSequence, model: &BodyModel, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, write_sequence(seq, model)?.as_bytes())
}

pub fn load_motion(path: &Path, model: &BodyModel) -> Result<Motion3D> {
    parse_motion(&fsutil::read_text(path)?, &path.display().to_string(), model)
}

pub fn save_motion(motion: &Motion3D, model: &BodyModel, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, write_motion(motion, model)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: &BodyModel) -> JointSequence {
        let n = model.joint_count();
        let poses = (0..4)
            .map(|f| {
                let pts = (0..n).map(|j| [0.1 * f as f64 + j as f64 / 3.0, -1e-7 * j as f64]).collect();
                let valid = (0..n).map(|j| !(f == 2 && j == 5)).collect();
                Pose2D::with_validity(pts, valid).unwrap()
            })
            .collect();
        let meta = SequenceMeta {
            action: "walk".into(),
            subject: "s0".into(),
            camera: "c03".into(),
            frame_rate: Some(29.97),
        };
        JointSequence::new(poses, meta, model).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let model = BodyModel::default();
        let seq = sample(&model);
        let text = write_sequence(&seq, &model).unwrap();
        assert_eq!(parse_sequence(&text, "mem", &model).unwrap(), seq);
    }

    #[test]
    fn motion_round_trip() {
        let model = BodyModel::new(["a", "b", "c", "d"]).unwrap();
        let motion = Motion3D {
            poses: (0..3)
                .map(|f| Pose3D::new((0..4).map(|j| [f as f64, j as f64 * 0.7, 1.0 / 3.0]).collect()).unwrap())
                .collect(),
            meta: SequenceMeta::default(),
        };
        let text = write_motion(&motion, &model).unwrap();
        assert_eq!(parse_motion(&text, "mem", &model).unwrap(), motion);
        assert!(parse_sequence(&text, "mem", &model).is_err());
    }

    #[test]
    fn missing_joint_is_schema_mismatch() {
        let model = BodyModel::default();
        let text = write_sequence(&sample(&model), &model).unwrap();
        let ten = BodyModel::new(model.labels()[..10].to_vec()).unwrap();
        let err = parse_sequence(&text, "mem", &ten).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn empty_coordinate_marks_joint_invalid() {
        let model = BodyModel::default();
        let text = write_sequence(&sample(&model), &model).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let rec = lines.iter().position(|l| l.starts_with("1,")).unwrap();
        let mut fields: Vec<String> = lines[rec].split(',').map(str::to_string).collect();
        // Joint 3 (l_elbow) occupies fields 13..17.
        fields[14].clear();
        lines[rec] = fields.join(",");
        let seq = parse_sequence(&lines.join("\n"), "mem", &model).unwrap();
        assert!(!seq.poses()[1].is_valid(3));
        assert!(seq.poses()[1].is_valid(4));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let model = BodyModel::default();
        let text = write_sequence(&sample(&model), &model).unwrap();
        let bad = text.replacen("0,head,", "0,head,abc", 1);
        match parse_sequence(&bad, "f.seq", &model).unwrap_err() {
            Error::Parse { origin, line, .. } => {
                assert_eq!(origin, "f.seq");
                assert_eq!(line, 8);
            }
            e => panic!("unexpected {e}"),
        }
        let skipped = text.replacen("\n1,", "\n2,", 1);
        assert!(matches!(parse_sequence(&skipped, "f", &model), Err(Error::Parse { line: 9, .. })));
        assert!(matches!(parse_sequence("", "f", &model), Err(Error::Parse { line: 1, .. })));
        let flag = text.replacen(",1\n", ",2\n", 1);
        assert!(matches!(parse_sequence(&flag, "f", &model), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_unknown_meta_and_line_breaks() {
        let model = BodyModel::default();
        let mut seq = sample(&model);
        let text = write_sequence(&seq, &model).unwrap().replace("#meta camera", "#meta lens");
        assert!(matches!(parse_sequence(&text, "f", &model), Err(Error::Parse { line: 6, .. })));
        seq.meta.subject = "a\nb".into();
        assert!(write_sequence(&seq, &model).is_err());
    }

    #[test]
    fn file_round_trip() {
        let model = BodyModel::default();
        let seq = sample(&model);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.seq");
        save_sequence(&seq, &model, &path).unwrap();
        assert_eq!(load_sequence(&path, &model).unwrap(), seq);
        let missing = load_sequence(&dir.path().join("nope.seq"), &model).unwrap_err();
        assert_eq!(missing.exit_code(), 6);
    }
}
