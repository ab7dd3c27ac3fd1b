use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::Pose3D;
use crate::error::{Error, Result};

/// Minimum elbow and knee flexion, radians.
pub const MIN_FLEX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Walk,
    Run,
    Jump,
    Swing,
    Climb,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [Self::Walk, Self::Run, Self::Jump, Self::Swing, Self::Climb];

    pub fn name(self) -> &'static str {
        match self {
            Self::Walk => "walk",
            Self::Run => "run",
            Self::Jump => "jump",
            Self::Swing => "swing",
            Self::Climb => "climb",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Body proportions and movement style of one synthetic subject. Lengths in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParams {
    pub hip_height: f64,
    pub torso: f64,
    pub head: f64,
    pub shoulder_width: f64,
    pub hip_width: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub thigh: f64,
    pub shin: f64,
    /// Multiplies the action's cycle count.
    pub cadence: f64,
    /// Multiplies joint-angle excursions.
    pub amplitude: f64,
    /// Multiplies arm excursions on top of `amplitude`.
    pub arm_amplitude: f64,
    /// Phase lag of the arms behind the legs, radians.
    pub arm_lag: f64,
    /// Extra forward lean of the torso, radians.
    pub lean: f64,
    /// Start phase of periodic actions, radians.
    pub phase: f64,
}

impl Default for SubjectParams {
    fn default() -> Self {
        Self {
            hip_height: 0.92,
            torso: 0.52,
            head: 0.24,
            shoulder_width: 0.38,
            hip_width: 0.24,
            upper_arm: 0.3,
            forearm: 0.42,
            thigh: 0.45,
            shin: 0.47,
            cadence: 1.0,
            amplitude: 1.0,
            arm_amplitude: 1.0,
            arm_lag: 0.0,
            lean: 0.0,
            phase: 0.0,
        }
    }
}

impl SubjectParams {
    /// A subject with every proportion jittered by up to ±8% and a random style.
    ///
    /// Arm style varies far more between subjects than leg style.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Self::default();
        let size = rng.random_range(0.9..1.1);
        let mut j = |v: f64| v * size * rng.random_range(0.92..1.08);
        let mut s = Self {
            hip_height: 0.0,
            torso: j(base.torso),
            head: j(base.head),
            shoulder_width: j(base.shoulder_width),
            hip_width: j(base.hip_width),
            upper_arm: j(base.upper_arm),
            forearm: j(base.forearm),
            thigh: j(base.thigh),
            shin: j(base.shin),
            ..base
        };
        s.hip_height = s.thigh + s.shin;
        s.cadence = rng.random_range(0.9..1.1);
        s.amplitude = rng.random_range(0.9..1.1);
        s.phase = rng.random_range(0.0..2.0 * PI);
        s.arm_amplitude = rng.random_range(0.4..1.6);
        s.arm_lag = rng.random_range(-0.8..0.8);
        s.lean = rng.random_range(-0.1..0.15);
        s
    }
}

/// Joint angles of one frame; sagittal angles are measured from straight down,
/// positive forward.
#[derive(Debug, Clone, Copy, Default)]
struct Angles {
    pelvis: [f64; 3],
    yaw: f64,
    torso_yaw: f64,
    lean: f64,
    thigh: [f64; 2],
    knee: [f64; 2],
    leg_spread: [f64; 2],
    shoulder: [f64; 2],
    elbow: [f64; 2],
    arm_spread: [f64; 2],
}

fn heading(yaw: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (c, s) = (libm::cos(yaw), libm::sin(yaw));
    (Vector3::new(c, s, 0.0), Vector3::new(-s, c, 0.0))
}

/// Unit vector at sagittal angle `a` with a sideways component `spread`.
fn limb(a: f64, spread: f64, forward: &Vector3<f64>, side: &Vector3<f64>) -> Vector3<f64> {
    (forward * libm::sin(a) - Vector3::z() * libm::cos(a) + side * spread).normalize()
}

fn pose(body: &SubjectParams, a: &Angles) -> [Vector3<f64>; 11] {
    let up = Vector3::z();
    let pelvis = Vector3::from(a.pelvis);
    let (f, l) = heading(a.yaw);
    let (ft, lt) = heading(a.yaw + a.torso_yaw);
    let neck = pelvis + (ft * libm::sin(a.lean) + up * libm::cos(a.lean)) * body.torso;
    let head = neck + (ft * libm::sin(a.lean + 0.1) + up * libm::cos(a.lean + 0.1)) * body.head;
    let mut out = [Vector3::zeros(); 11];
    out[0] = head;
    for (side, sign) in [(0usize, 1.0), (1, -1.0)] {
        let shoulder = neck + lt * (sign * body.shoulder_width / 2.0);
        let s = a.shoulder[side];
        let elbow = shoulder + limb(s, sign * a.arm_spread[side], &ft, &lt) * body.upper_arm;
        let hand = elbow + limb(s + a.elbow[side].max(MIN_FLEX), sign * a.arm_spread[side], &ft, &lt) * body.forearm;
        let hip = pelvis + l * (sign * body.hip_width / 2.0);
        let t = a.thigh[side];
        let knee = hip + limb(t, sign * a.leg_spread[side], &f, &l) * body.thigh;
        let foot = knee + limb(t - a.knee[side].max(MIN_FLEX), sign * a.leg_spread[side], &f, &l) * body.shin;
        out[1 + side] = shoulder;
        out[3 + side] = elbow;
        out[5 + side] = hand;
        out[7 + side] = knee;
        out[9 + side] = foot;
    }
    out
}

fn smoothstep(a: f64, b: f64, x: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn bump(centre: f64, width: f64, x: f64) -> f64 {
    let z = (x - centre) / width;
    libm::exp(-z * z)
}

/// `s` runs from 0 to 1 over the sequence.
fn angles(kind: ActionKind, body: &SubjectParams, s: f64) -> Angles {
    let amp = body.amplitude;
    let arm = amp * body.arm_amplitude;
    let lean = body.lean;
    let hip = body.hip_height;
    let cycle = |count: f64| 2.0 * PI * count * body.cadence * s + body.phase;
    match kind {
        ActionKind::Walk => {
            let p = cycle(2.0);
            let sp = libm::sin(p);
            let (sa, ca) = (libm::sin(p - body.arm_lag), libm::cos(p - body.arm_lag));
            Angles {
                pelvis: [1.4 * 2.0 * body.cadence * s, 0.0, hip - 0.04 + 0.02 * libm::cos(2.0 * p)],
                lean: 0.05 + lean,
                thigh: [0.4 * amp * sp, -0.4 * amp * sp],
                knee: [0.2 + 0.3 * (1.0 + libm::sin(p - 0.5)), 0.2 + 0.3 * (1.0 - libm::sin(p - 0.5))],
                leg_spread: [0.03, 0.03],
                shoulder: [-0.3 * arm * sa, 0.3 * arm * sa],
                elbow: [0.3 + 0.1 * ca, 0.3 - 0.1 * ca],
                arm_spread: [0.1, 0.1],
                ..Angles::default()
            }
        }
        ActionKind::Run => {
            let p = cycle(3.0);
            let (sp, cp) = (libm::sin(p), libm::cos(p));
            let (sa, ca) = (libm::sin(p - body.arm_lag), libm::cos(p - body.arm_lag));
            Angles {
                pelvis: [2.6 * 3.0 * body.cadence * s, 0.0, hip - 0.08 + 0.06 * libm::fabs(cp)],
                lean: 0.15 + lean,
                thigh: [0.75 * amp * sp, -0.75 * amp * sp],
                knee: [0.4 + 0.65 * amp * (1.0 + libm::sin(p - 0.5)), 0.4 + 0.65 * amp * (1.0 - libm::sin(p - 0.5))],
                leg_spread: [0.04, 0.04],
                shoulder: [-0.4 * arm * sa, 0.4 * arm * sa],
                elbow: [0.6 + 0.15 * ca, 0.6 - 0.15 * ca],
                arm_spread: [0.12, 0.12],
                ..Angles::default()
            }
        }
        ActionKind::Jump => {
            let crouch = bump(0.25, 0.1, s) + 0.8 * bump(0.82, 0.08, s);
            let flight = if (0.42..0.74).contains(&s) {
                libm::sin(PI * (s - 0.42) / 0.32)
            } else {
                0.0
            };
            let delay = 0.03 * body.arm_lag;
            let raise = smoothstep(0.3 + delay, 0.48 + delay, s) - smoothstep(0.66 + delay, 0.92 + delay, s);
            let swing = -0.8 * crouch + 2.6 * arm * raise;
            Angles {
                pelvis: [0.3 * s, 0.0, hip - 0.03 - 0.32 * crouch + 0.4 * amp * flight],
                lean: 0.08 + 0.45 * crouch + lean,
                thigh: [0.1 + 1.0 * crouch, 0.1 + 1.0 * crouch],
                knee: [0.15 + 1.6 * crouch, 0.15 + 1.6 * crouch],
                leg_spread: [0.08, 0.08],
                shoulder: [swing, swing],
                elbow: [0.25 + 0.2 * crouch, 0.25 + 0.2 * crouch],
                arm_spread: [0.15, 0.15],
                ..Angles::default()
            }
        }
        ActionKind::Swing => {
            let twist = -1.5 * amp * smoothstep(0.0, 0.45, s) + 2.8 * amp * smoothstep(0.5, 0.72, s);
            let raise = 0.5 + 0.8 * libm::fabs(twist) * (0.75 + 0.25 * body.arm_amplitude);
            Angles {
                pelvis: [0.0, 0.0, hip - 0.08],
                yaw: 0.35 * twist,
                torso_yaw: 0.65 * twist,
                lean: 0.45 + lean,
                thigh: [0.2, 0.2],
                knee: [0.35 + 0.1 * twist.max(0.0), 0.35 - 0.1 * twist.min(0.0)],
                leg_spread: [0.15, 0.15],
                shoulder: [raise, raise],
                elbow: [0.15, 0.45],
                arm_spread: [-0.35, -0.35],
                ..Angles::default()
            }
        }
        ActionKind::Climb => {
            let p = cycle(2.0);
            let (sp, cp) = (libm::sin(p), libm::cos(p));
            let sa = libm::sin(p - body.arm_lag);
            Angles {
                pelvis: [0.05 * cp, 0.0, hip + 0.6 * 2.0 * body.cadence * s],
                lean: 0.1 + lean,
                thigh: [0.2 + 0.55 * amp * (1.0 + sp), 0.2 + 0.55 * amp * (1.0 - sp)],
                knee: [0.3 + 0.7 * amp * (1.0 + sp), 0.3 + 0.7 * amp * (1.0 - sp)],
                leg_spread: [0.1, 0.1],
                shoulder: [2.5 - 0.4 * arm * sa, 2.5 + 0.4 * arm * sa],
                elbow: [0.4 + 0.35 * (1.0 - sa), 0.4 + 0.35 * (1.0 + sa)],
                arm_spread: [0.2, 0.2],
                ..Angles::default()
            }
        }
    }
}

/// World joint trajectories of a synthetic action, in the default 11-joint order.
///
/// `seed` adds up to 5 mm of per-joint jitter.
pub fn procedural_action(kind: ActionKind, subject: &SubjectParams, frames: usize, seed: u64) -> Result<Vec<Pose3D>> {
    if frames < 8 {
        return Err(Error::TooFewFrames(frames));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames)
        .map(|i| {
            let s = i as f64 / (frames - 1) as f64;
            let joints = pose(subject, &angles(kind, subject, s));
            Pose3D::new(
                joints
                    .iter()
                    .map(|p| {
                        let mut q: [f64; 3] = (*p).into();
                        for c in &mut q {
                            *c += rng.random_range(-0.005..0.005);
                        }
                        q
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Largest distance from `centre` to any joint.
pub fn bounding_radius(poses: &[Pose3D], centre: [f64; 3]) -> f64 {
    let c = Vector3::from(centre);
    poses
        .iter()
        .flat_map(|p| p.points.iter())
        .map(|p| (Vector3::from(*p) - c).norm())
        .fold(0.0, f64::max)
}

/// Mean joint position over the whole sequence.
pub fn centroid(poses: &[Pose3D]) -> [f64; 3] {
    let mut sum = Vector3::zeros();
    let mut count = 0.0;
    for p in poses.iter().flat_map(|p| p.points.iter()) {
        sum += Vector3::from(*p);
        count += 1.0;
    }
    (sum / count).into()
}
