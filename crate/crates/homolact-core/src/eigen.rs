//! Eigenvalues of real 3x3 matrices.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis double-shift QR iteration. The iteration is backward stable,
//! so non-defective repeated eigenvalues (planar homologies) come out
//! equal to working precision instead of the `sqrt(eps)` split that
//! characteristic-polynomial root finding produces.

use nalgebra::{Complex, Matrix3};

const MAX_ITERATIONS: usize = 60;
const RADIX: f64 = 2.0;

/// Complex modulus without `std`.
pub fn modulus(z: Complex<f64>) -> f64 {
    libm::hypot(z.re, z.im)
}

/// The three eigenvalues of `m`, real ones with zero imaginary part.
///
/// Returns `None` for non-finite input or if the QR iteration stalls.
pub fn eigenvalues3(m: &Matrix3<f64>) -> Option<[Complex<f64>; 3]> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut a = [[0.0; 3]; 3];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    balance(&mut a);
    to_hessenberg(&mut a);
    hqr(&mut a)
}

/// Diagonal similarity by powers of two so row and column norms are comparable.
fn balance(a: &mut [[f64; 3]; 3]) {
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..3 {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..3 {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..3 {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

/// One Householder reflection on rows/columns 1..3 zeroes `a[2][0]`.
fn to_hessenberg(a: &mut [[f64; 3]; 3]) {
    let x0 = a[1][0];
    let x1 = a[2][0];
    if x1 == 0.0 {
        return;
    }
    let alpha = -libm::copysign(libm::hypot(x0, x1), x0);
    let v0 = x0 - alpha;
    let v1 = x1;
    let vnorm2 = v0 * v0 + v1 * v1;
    if vnorm2 == 0.0 {
        return;
    }
    let beta = 2.0 / vnorm2;
    // A <- P A, P = I - beta v v^T acting on rows 1, 2.
    for j in 0..3 {
        let d = v0 * a[1][j] + v1 * a[2][j];
        a[1][j] -= beta * v0 * d;
        a[2][j] -= beta * v1 * d;
    }
    // A <- A P on columns 1, 2.
    for row in a.iter_mut() {
        let d = v0 * row[1] + v1 * row[2];
        row[1] -= beta * v0 * d;
        row[2] -= beta * v1 * d;
    }
    a[2][0] = 0.0;
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut [[f64; 3]; 3]) -> Option<[Complex<f64>; 3]> {
    const N: usize = 3;
    let eps = f64::EPSILON;
    let mut wr = [0.0; N];
    let mut wi = [0.0; N];

    let mut anorm = 0.0;
    for i in 0..N {
        for j in i.saturating_sub(1)..N {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = N as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // Look for a single small subdiagonal element.
            let mut l = nu;
            while l > 0 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = libm::sqrt(q.abs());
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = z;
                    wi[nu] = -z;
                }
                nn -= 2;
                break;
            }
            if its >= MAX_ITERATIONS {
                return None;
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            let (mut p, mut q, mut r);
            let mut m = nu - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[i + 2][i] = 0.0;
                if i != m {
                    a[i + 2][i - 1] = 0.0;
                }
            }
            for k in m..nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign(libm::sqrt(p * p + q * q + r * r), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
            }
        }
    }
    if wr.iter().chain(wi.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some([
        Complex::new(wr[0], wi[0]),
        Complex::new(wr[1], wi[1]),
        Complex::new(wr[2], wi[2]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Closed-form roots of the characteristic polynomial (independent route).
    fn cubic_oracle(m: &Matrix3<f64>) -> [Complex<f64>; 3] {
        let tr = m.trace();
        let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
            - m[(0, 2)] * m[(2, 0)]
            + m[(1, 1)] * m[(2, 2)]
            - m[(1, 2)] * m[(2, 1)];
        let det = m.determinant();
        // x^3 + a x^2 + b x + c
        let (a, b, c) = (-tr, minors, -det);
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let disc = q * q / 4.0 + p * p * p / 27.0;
        let shift = -a / 3.0;
        if disc > 0.0 {
            let s = -q / 2.0;
            let w = s + sign(libm::sqrt(disc), s);
            let u = libm::cbrt(w);
            let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
            let re = -(u + v) / 2.0 + shift;
            let im = libm::sqrt(3.0) / 2.0 * (u - v);
            [
                Complex::new(u + v + shift, 0.0),
                Complex::new(re, im),
                Complex::new(re, -im),
            ]
        } else if p == 0.0 {
            [Complex::new(shift, 0.0); 3]
        } else {
            let r = 2.0 * libm::sqrt(-p / 3.0);
            let arg = (3.0 * q / (2.0 * p) * libm::sqrt(-3.0 / p)).clamp(-1.0, 1.0);
            let theta = libm::acos(arg) / 3.0;
            let two_pi_3 = 2.0 * core::f64::consts::PI / 3.0;
            [0.0, 1.0, 2.0].map(|k| Complex::new(r * libm::cos(theta - two_pi_3 * k) + shift, 0.0))
        }
    }

    fn sorted(mut v: [Complex<f64>; 3]) -> [Complex<f64>; 3] {
        v.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
        v
    }

    #[test]
    fn diagonal_matrices() {
        let ev = sorted(eigenvalues3(&Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0))).unwrap());
        for (e, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e.re - want).abs() < 1e-14 && e.im == 0.0);
        }
        let ev = eigenvalues3(&Matrix3::identity()).unwrap();
        assert!(ev.iter().all(|e| *e == Complex::new(1.0, 0.0)));
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let (s, c) = (0.6f64, 0.8f64);
        let m = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 2.0);
        let ev = sorted(eigenvalues3(&m).unwrap());
        assert!((ev[0].re - 0.8).abs() < 1e-14 && (ev[0].im + 0.6).abs() < 1e-14);
        assert!((ev[1].re - 0.8).abs() < 1e-14 && (ev[1].im - 0.6).abs() < 1e-14);
        assert!((ev[2].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn matches_cubic_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 2000 {
            let m: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let oracle = sorted(cubic_oracle(&m));
            // Skip near-repeated roots where the polynomial route loses digits.
            let sep = (0..3)
                .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
                .map(|(i, j)| modulus(oracle[i] - oracle[j]))
                .fold(f64::INFINITY, f64::min);
            if sep < 1e-2 {
                continue;
            }
            let got = sorted(eigenvalues3(&m).unwrap());
            for (g, o) in got.iter().zip(oracle.iter()) {
                assert!(modulus(*g - *o) < 1e-9, "{m} {got:?} {oracle:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn trace_and_determinant_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let m: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let ev = eigenvalues3(&m).unwrap();
            let sum = ev[0] + ev[1] + ev[2];
            let prod = ev[0] * ev[1] * ev[2];
            assert!((sum.re - m.trace()).abs() < 1e-10 && sum.im.abs() < 1e-10);
            assert!((prod.re - m.determinant()).abs() < 1e-9 * (1.0 + m.determinant().abs()));
        }
    }

    #[test]
    fn conjugated_homology_keeps_repeated_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        let mut n = 0;
        while n < 20000 {
            let g: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if g.determinant().abs() < 0.05 {
                continue;
            }
            let lam = rng.random_range(-3.0..3.0);
            let mu = rng.random_range(0.2..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let h = g * Matrix3::from_diagonal(&Vector3::new(lam, mu, mu)) * g.try_inverse().unwrap();
            let ev = eigenvalues3(&h).unwrap();
            let best = [(0, 1), (0, 2), (1, 2)]
                .iter()
                .map(|&(i, j)| modulus(ev[i] - ev[j]) / modulus(ev[i] + ev[j]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
            n += 1;
        }
        assert!(worst < 1e-9, "worst {worst:e}");
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Matrix3::identity();
        m[(1, 2)] = f64::NAN;
        assert!(eigenvalues3(&m).is_none());
    }
}
