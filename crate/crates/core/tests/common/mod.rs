#![allow(dead_code)]

use focal_selfcal::poly::{BivariateQuartic, MONOMIALS};
use focal_selfcal::synth::SceneConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Scene parameters with |y| ≥ 100 or |θ| ≥ 5°, so the principal axes are
/// well separated.
pub fn random_config(rng: &mut ChaCha8Rng) -> SceneConfig {
    loop {
        let theta: f64 = rng.random_range(-15.0..15.0);
        let y: f64 = rng.random_range(-200.0..200.0);
        if y.abs() >= 100.0 || theta.abs() >= 5.0 {
            return SceneConfig { theta, y, seed: rng.random(), ..Default::default() };
        }
    }
}

pub fn random_quartic(rng: &mut ChaCha8Rng) -> BivariateQuartic {
    let mut q = BivariateQuartic::zero();
    for c in q.coeffs.iter_mut() {
        *c = StandardNormal.sample(rng);
    }
    q
}

/// Plain monomial sum, deliberately not the library's evaluator.
fn eval(q: &BivariateQuartic, x: f64, y: f64) -> f64 {
    MONOMIALS.iter().zip(&q.coeffs).map(|(&(a, b), c)| c * x.powi(a as i32) * y.powi(b as i32)).sum()
}

fn partials(q: &BivariateQuartic, x: f64, y: f64) -> (f64, f64) {
    MONOMIALS.iter().zip(&q.coeffs).fold((0.0, 0.0), |(dx, dy), (&(a, b), c)| {
        let ddx = if a > 0 { c * a as f64 * x.powi(a as i32 - 1) * y.powi(b as i32) } else { 0.0 };
        let ddy = if b > 0 { c * b as f64 * x.powi(a as i32) * y.powi(b as i32 - 1) } else { 0.0 };
        (dx + ddx, dy + ddy)
    })
}

fn magnitude(q: &BivariateQuartic, x: f64, y: f64) -> f64 {
    MONOMIALS
        .iter()
        .zip(&q.coeffs)
        .map(|(&(a, b), c)| (c * x.powi(a as i32) * y.powi(b as i32)).abs())
        .fold(0.0, f64::max)
}

/// Whether both polynomials vanish at `(x, y)` to `gate` relative to their
/// largest term.
pub fn is_common_root(k1: &BivariateQuartic, k2: &BivariateQuartic, x: f64, y: f64, gate: f64) -> bool {
    eval(k1, x, y).abs() <= gate * magnitude(k1, x, y).max(1.0) && eval(k2, x, y).abs() <= gate * magnitude(k2, x, y).max(1.0)
}

fn newton(k1: &BivariateQuartic, k2: &BivariateQuartic, mut x: f64, mut y: f64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let (r1, r2) = (eval(k1, x, y), eval(k2, x, y));
        let (a, b) = partials(k1, x, y);
        let (c, d) = partials(k2, x, y);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (d * r1 - b * r2) / det;
        let dy = (a * r2 - c * r1) / det;
        x -= dx;
        y -= dy;
        if !(x.is_finite() && y.is_finite()) || x.abs() > 1e3 || y.abs() > 1e3 {
            return None;
        }
        if dx.abs() + dy.abs() <= 1e-15 * (1.0 + x.abs() + y.abs()) {
            break;
        }
    }
    Some((x, y))
}

/// Brute-force real roots in `[-half, half]²` on a `steps × steps` grid.
/// Newton starts from every local minimum of the normalized merit
/// `k1² + k2²` and from every cell across which both polynomials change
/// sign; converged points passing the residual gate are kept.
pub fn grid_oracle(k1: &BivariateQuartic, k2: &BivariateQuartic, half: f64, steps: usize, gate: f64) -> Vec<(f64, f64)> {
    let h = 2.0 * half / (steps - 1) as f64;
    let at = |i: usize| -half + i as f64 * h;
    let mut v1 = vec![0.0; steps * steps];
    let mut v2 = vec![0.0; steps * steps];
    let mut merit = vec![0.0; steps * steps];
    for idx in 0..steps * steps {
        let (x, y) = (at(idx / steps), at(idx % steps));
        v1[idx] = eval(k1, x, y);
        v2[idx] = eval(k2, x, y);
        let r1 = v1[idx] / magnitude(k1, x, y).max(1e-300);
        let r2 = v2[idx] / magnitude(k2, x, y).max(1e-300);
        merit[idx] = r1 * r1 + r2 * r2;
    }
    let mut starts = Vec::new();
    for i in 0..steps {
        for j in 0..steps {
            let m = merit[i * steps + j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= steps as i64 || nj >= steps as i64 {
                        continue;
                    }
                    if merit[ni as usize * steps + nj as usize] < m {
                        is_min = false;
                    }
                }
            }
            if is_min {
                starts.push((at(i), at(j)));
            }
            if i + 1 < steps && j + 1 < steps {
                let corners = [i * steps + j, i * steps + j + 1, (i + 1) * steps + j, (i + 1) * steps + j + 1];
                let changes = |v: &[f64]| {
                    let pos = corners.iter().any(|&c| v[c] >= 0.0);
                    let neg = corners.iter().any(|&c| v[c] <= 0.0);
                    pos && neg
                };
                if changes(&v1) && changes(&v2) {
                    starts.push((at(i) + h / 2.0, at(j) + h / 2.0));
                }
            }
        }
    }
    let mut roots: Vec<(f64, f64)> = Vec::new();
    for (sx, sy) in starts {
        if let Some((x, y)) = newton(k1, k2, sx, sy) {
            if x.abs() <= half
                && y.abs() <= half
                && is_common_root(k1, k2, x, y, gate)
                && !roots.iter().any(|r| (r.0 - x).abs() + (r.1 - y).abs() < 1e-7)
            {
                roots.push((x, y));
            }
        }
    }
    roots
}

/// Roots of `a` without a partner in `b` within `tol` (max norm).
pub fn unmatched(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    a.iter()
        .copied()
        .filter(|p| !b.iter().any(|q| (p.0 - q.0).abs() <= tol && (p.1 - q.1).abs() <= tol))
        .collect()
}
