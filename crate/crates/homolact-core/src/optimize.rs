//! Maximization of a quadratic objective over `{x ≥ 0, Σx ≤ 1}`.
//!
//! Active-set projected conjugate gradient: Polak–Ribière directions built
//! from the gradient projected onto the tangent cone of the feasible set,
//! restarted whenever a step hits a new constraint. Steps use the exact
//! quadratic line search clipped at the boundary, then backtrack until the
//! projected point satisfies an Armijo condition.

use alloc::vec;
use alloc::vec::Vec;

use crate::learning::QuadraticObjective;
use crate::weighting::WeightVector;

const ACTIVE: f64 = 1e-15;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Stop once `‖P(x + ∇f) - x‖ ≤ tolerance`.
    pub tolerance: f64,
    /// Defaults to `10 (n-1)²`.
    pub max_iterations: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub weights: WeightVector,
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or no ascent step could be found
    /// before the stopping test passed; `weights` is then the best iterate.
    pub converged: bool,
    pub projected_gradient_norm: f64,
    /// Objective value at the uniform start followed by the running sum of
    /// the exact per-step increments.
    pub trace: Vec<f64>,
}

/// Euclidean projection onto the simplex `{y ≥ 0, Σy = 1}`.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, v) in u.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Euclidean projection onto `{y ≥ 0, Σy ≤ 1}`, with the sum bound held exactly.
pub fn project_feasible(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let mut y = if clipped.iter().sum::<f64>() <= 1.0 {
        clipped
    } else {
        project_simplex(x)
    };
    for _ in 0..8 {
        let excess = y.iter().sum::<f64>() - 1.0;
        if excess <= 0.0 {
            break;
        }
        let (i, _) = y.iter().enumerate().fold((0, f64::MIN), |m, (i, v)| if *v > m.1 { (i, *v) } else { m });
        y[i] = (y[i] - excess).max(0.0);
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    let stepped: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
    let p = project_feasible(&stepped);
    libm::sqrt(p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
}

fn sum_active(x: &[f64]) -> bool {
    1.0 - x.iter().sum::<f64>() <= ACTIVE * x.len() as f64
}

/// Projection of `g` onto the tangent cone of the feasible set at `x`.
fn tangent_gradient(x: &[f64], g: &[f64]) -> Vec<f64> {
    let at_zero: Vec<bool> = x.iter().map(|v| *v <= ACTIVE).collect();
    let clipped: Vec<f64> = g
        .iter()
        .zip(&at_zero)
        .map(|(gi, z)| if *z { gi.max(0.0) } else { *gi })
        .collect();
    if !sum_active(x) || clipped.iter().sum::<f64>() <= 0.0 {
        return clipped;
    }
    // Σd ≤ 0 is binding: d = g - μ on the kept set, where zero-bound
    // coordinates stay kept only while g_i > μ.
    let mut kept: Vec<bool> = at_zero.iter().zip(g).map(|(z, gi)| !z || *gi > 0.0).collect();
    let mut mu;
    loop {
        let (s, c) = g
            .iter()
            .zip(&kept)
            .filter(|(_, k)| **k)
            .fold((0.0, 0usize), |(s, c), (gi, _)| (s + gi, c + 1));
        mu = s / c as f64;
        let mut changed = false;
        for i in 0..g.len() {
            if kept[i] && at_zero[i] && g[i] <= mu {
                kept[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    g.iter().zip(&kept).map(|(gi, k)| if *k { gi - mu } else { 0.0 }).collect()
}

/// Largest step along `d` that stays feasible.
fn max_step(x: &[f64], d: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for (xi, di) in x.iter().zip(d) {
        if *di < 0.0 {
            t = t.min(xi.max(0.0) / -di);
        }
    }
    // A tangent direction on the `Σx = 1` face sums to zero up to rounding.
    let ds: f64 = d.iter().sum();
    let scale: f64 = d.iter().map(|v| v.abs()).sum();
    if ds > 1e-12 * scale {
        t = t.min((1.0 - x.iter().sum::<f64>()).max(0.0) / ds);
    }
    t
}

struct Step {
    x: Vec<f64>,
    value: f64,
    blocked: bool,
}

fn line_search(obj: &QuadraticObjective, x: &[f64], fx: f64, g: &[f64], d: &[f64]) -> Option<Step> {
    let slope = dot(g, d);
    if !(slope > 0.0) {
        return None;
    }
    let t_max = max_step(x, d);
    let qd = &obj.q * nalgebra::DVector::from_column_slice(d);
    let curvature = dot(d, qd.as_slice());
    let mut t = if curvature < 0.0 {
        (slope / (-2.0 * curvature)).min(t_max)
    } else {
        t_max
    };
    if !t.is_finite() || t <= 0.0 {
        return None;
    }
    for _ in 0..MAX_BACKTRACKS {
        let blocked = t >= t_max;
        let raw: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let candidate = project_feasible(&raw);
        let moved: Vec<f64> = candidate.iter().zip(x).map(|(a, b)| a - b).collect();
        let linear = dot(g, &moved);
        let qs = &obj.q * nalgebra::DVector::from_column_slice(&moved);
        // Exact increment of a quadratic; differencing two evaluations
        // loses it to cancellation near the optimum.
        let increase = linear + dot(&moved, qs.as_slice());
        if linear > 0.0 && increase >= ARMIJO * linear {
            return Some(Step {
                x: candidate,
                value: fx + increase,
                blocked,
            });
        }
        t *= 0.5;
    }
    None
}

/// Maximizes `obj` over the free weights from the uniform point.
pub fn optimize_weights(obj: &QuadraticObjective, config: &OptimizerConfig) -> OptimizeOutcome {
    let d = obj.dimension();
    let n = d + 1;
    let cap = config.max_iterations.unwrap_or(10 * d * d);
    let mut x = vec![1.0 / n as f64; d];
    let mut fx = obj.evaluate(&x);
    let mut trace = vec![fx];
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut pg = f64::INFINITY;
    while iterations < cap {
        let g = obj.gradient(&x);
        pg = projected_gradient_norm(&x, &g);
        if pg <= config.tolerance {
            converged = true;
            break;
        }
        let r = tangent_gradient(&x, &g);
        if norm(&r) == 0.0 {
            break;
        }
        let mut direction = r.clone();
        if let Some((r_prev, d_prev)) = &previous {
            let denom = dot(r_prev, r_prev);
            let beta = if denom > 0.0 {
                ((dot(&r, &r) - dot(&r, r_prev)) / denom).max(0.0)
            } else {
                0.0
            };
            let candidate: Vec<f64> = r.iter().zip(d_prev).map(|(a, b)| a + beta * b).collect();
            if dot(&candidate, &g) > 0.0 {
                direction = candidate;
            }
        }
        iterations += 1;
        let step = line_search(obj, &x, fx, &g, &direction).or_else(|| {
            if direction != r {
                line_search(obj, &x, fx, &g, &r)
            } else {
                None
            }
        });
        let Some(step) = step else {
            break;
        };
        previous = if step.blocked { None } else { Some((r, direction)) };
        x = step.x;
        fx = step.value;
        trace.push(fx);
    }
    if !converged {
        pg = projected_gradient_norm(&x, &obj.gradient(&x));
        converged = pg <= config.tolerance;
    }
    let value = obj.evaluate(&x);
    let mut omega = x;
    let last = (1.0 - omega.iter().sum::<f64>()).max(0.0);
    omega.push(last);
    OptimizeOutcome {
        weights: WeightVector::new(omega).expect("projected iterate is feasible"),
        value,
        iterations,
        converged,
        projected_gradient_norm: pg,
        trace,
    }
}
