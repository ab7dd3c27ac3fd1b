//! Run configuration: one TOML document, every key optional, unknown keys rejected.

use std::path::{Path, PathBuf};

use homolact_core::alignment::AlignConfig;
use homolact_core::body::{BodyModel, DEFAULT_JOINTS};
use homolact_core::optimize::OptimizerConfig;
use homolact_core::synth::{ActionKind, CameraKind, RigSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub synth: SynthConfig,
    pub align: AlignSection,
    pub train: TrainConfig,
    pub protocol: ProtocolConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub joints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub subjects: usize,
    pub frames: usize,
    pub actions: Vec<String>,
    pub rig: RigConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraKindName {
    Affine,
    Perspective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub count: usize,
    pub kind: CameraKindName,
    pub radius: [f64; 2],
    pub elevation: [f64; 2],
    pub roll_jitter: f64,
    pub focal: f64,
    pub principal: [f64; 2],
    pub target: [f64; 3],
    pub subject_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    pub stride: usize,
    pub min_valid_fraction: f64,
    pub sentinel_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauPolicy {
    /// `value` is `τ` itself.
    Fixed,
    /// `value` is a quantile in `(0, 1]` of same-action uniform transition errors.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauConfig {
    pub policy: TauPolicy,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    pub tau: TauConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// The first `train_cameras` camera ids (sorted) train; the rest test.
    pub train_cameras: usize,
    pub reference_subject: String,
    pub reference_camera: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset: PathBuf,
    pub weights: PathBuf,
    pub output: PathBuf,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            joints: DEFAULT_JOINTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            subjects: 2,
            frames: 30,
            actions: ActionKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            rig: RigConfig::default(),
        }
    }
}

impl Default for RigConfig {
    fn default() -> Self {
        let r = RigSpec::default();
        Self {
            count: r.count,
            kind: CameraKindName::Perspective,
            radius: [r.radius.0, r.radius.1],
            elevation: [r.elevation.0, r.elevation.1],
            roll_jitter: r.roll_jitter,
            focal: r.focal,
            principal: r.principal,
            target: r.target,
            subject_radius: r.subject_radius,
        }
    }
}

impl Default for AlignSection {
    fn default() -> Self {
        let a = AlignConfig::default();
        Self {
            stride: a.stride,
            min_valid_fraction: a.geometry.min_valid_fraction,
            sentinel_cost: a.sentinel_cost,
        }
    }
}

impl Default for TauConfig {
    fn default() -> Self {
        Self {
            policy: TauPolicy::Percentile,
            value: 0.9,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            tolerance: OptimizerConfig::default().tolerance,
            max_iterations: None,
            tau: TauConfig::default(),
        }
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            train_cameras: 9,
            reference_subject: "s0".into(),
            reference_camera: "c00".into(),
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            dataset: "data".into(),
            weights: "weights".into(),
            output: "out".into(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            synth: SynthConfig::default(),
            align: AlignSection::default(),
            train: TrainConfig::default(),
            protocol: ProtocolConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

fn invalid(message: String) -> Error {
    Error::Config {
        origin: "config".into(),
        message,
    }
}

fn range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be an ordered finite [min, max], got {r:?}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            origin: origin.into(),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                origin: origin.into(),
                message,
            },
            e => e,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsutil::read_text(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every documented range. Called by `parse`; call again after overriding fields.
    pub fn validate(&self) -> Result<()> {
        self.body_model()?;
        let s = &self.synth;
        if s.subjects == 0 {
            return Err(invalid("synth.subjects must be at least 1".into()));
        }
        if s.frames < 8 {
            return Err(invalid(format!("synth.frames must be at least 8, got {}", s.frames)));
        }
        self.action_kinds()?;
        let r = &s.rig;
        if r.count == 0 {
            return Err(invalid("synth.rig.count must be at least 1".into()));
        }
        range("synth.rig.radius", r.radius)?;
        range("synth.rig.elevation", r.elevation)?;
        if !(r.radius[0] > r.subject_radius && r.subject_radius >= 0.0) {
            return Err(invalid("synth.rig.radius must lie outside synth.rig.subject_radius".into()));
        }
        if !(r.elevation[0] >= -80.0 && r.elevation[1] <= 80.0) {
            return Err(invalid("synth.rig.elevation must lie within [-80, 80] degrees".into()));
        }
        if !(r.roll_jitter >= 0.0 && r.roll_jitter <= 90.0) {
            return Err(invalid("synth.rig.roll_jitter must lie within [0, 90] degrees".into()));
        }
        if !(r.focal > 0.0 && r.focal.is_finite()) {
            return Err(invalid("synth.rig.focal must be positive".into()));
        }
        if !r.principal.iter().chain(&r.target).all(|v| v.is_finite()) {
            return Err(invalid("synth.rig.principal and target must be finite".into()));
        }
        let a = &self.align;
        if a.stride == 0 {
            return Err(invalid("align.stride must be at least 1".into()));
        }
        if !(a.min_valid_fraction > 0.0 && a.min_valid_fraction <= 1.0) {
            return Err(invalid("align.min_valid_fraction must lie in (0, 1]".into()));
        }
        if !(a.sentinel_cost > 0.0 && a.sentinel_cost.is_finite()) {
            return Err(invalid("align.sentinel_cost must be positive".into()));
        }
        let t = &self.train;
        if !t.alpha.is_finite() {
            return Err(invalid("train.alpha must be finite".into()));
        }
        if !(t.beta >= 0.0 && t.beta.is_finite()) {
            return Err(invalid("train.beta must be non-negative".into()));
        }
        if !(t.tolerance > 0.0 && t.tolerance.is_finite()) {
            return Err(invalid("train.tolerance must be positive".into()));
        }
        if t.max_iterations == Some(0) {
            return Err(invalid("train.max_iterations must be at least 1".into()));
        }
        let ok = match t.tau.policy {
            TauPolicy::Fixed => t.tau.value > 0.0 && t.tau.value.is_finite(),
            TauPolicy::Percentile => t.tau.value > 0.0 && t.tau.value <= 1.0,
        };
        if !ok {
            return Err(invalid(format!(
                "train.tau.value {} out of range for the {:?} policy",
                t.tau.value, t.tau.policy
            )));
        }
        if self.protocol.train_cameras == 0 {
            return Err(invalid("protocol.train_cameras must be at least 1".into()));
        }
        Ok(())
    }

    pub fn body_model(&self) -> Result<BodyModel> {
        BodyModel::new(self.model.joints.iter().cloned()).map_err(|e| invalid(format!("model.joints: {e}")))
    }

    pub fn action_kinds(&self) -> Result<Vec<ActionKind>> {
        let mut kinds: Vec<ActionKind> = Vec::new();
        for name in &self.synth.actions {
            let k = ActionKind::from_name(name).ok_or_else(|| invalid(format!("unknown action `{name}`")))?;
            if kinds.contains(&k) {
                return Err(invalid(format!("action `{name}` listed twice")));
            }
            kinds.push(k);
        }
        if kinds.len() < 2 {
            return Err(invalid("synth.actions needs at least 2 actions".into()));
        }
        Ok(kinds)
    }

    pub fn align_config(&self) -> AlignConfig {
        let mut a = AlignConfig::default();
        a.stride = self.align.stride;
        a.sentinel_cost = self.align.sentinel_cost;
        a.geometry.min_valid_fraction = self.align.min_valid_fraction;
        a
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            tolerance: self.train.tolerance,
            max_iterations: self.train.max_iterations,
        }
    }

    /// Rig for the dataset seed; the rig seed is derived from `synth.seed`.
    pub fn rig_spec(&self, rig_seed: u64) -> RigSpec {
        let r = &self.synth.rig;
        RigSpec {
            count: r.count,
            seed: rig_seed,
            kind: match r.kind {
                CameraKindName::Affine => CameraKind::Affine,
                CameraKindName::Perspective => CameraKind::Perspective,
            },
            radius: (r.radius[0], r.radius[1]),
            elevation: (r.elevation[0], r.elevation[1]),
            roll_jitter: r.roll_jitter,
            focal: r.focal,
            principal: r.principal,
            target: r.target,
            subject_radius: r.subject_radius,
        }
    }
}
