//! Real common roots of two bivariate quartics.
//!
//! `λ2` is eliminated with a Sylvester resultant, which leaves a univariate
//! polynomial of degree at most 16 in `λ1`. Its coefficients are recovered by
//! evaluating the resultant on roots of unity and inverting the DFT. Each real
//! `λ1` is back-substituted into both quartics and every candidate pair is
//! polished with Newton's method and kept only if it passes a residual gate.

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{polynomial_roots, BivariateQuartic};

/// Bezout bound for two quartics.
pub const MAX_SOLUTIONS: usize = 16;

/// Acceptance threshold on `|κ1| + |κ2|` with both polynomials scaled to unit
/// maximum coefficient.
pub const RESIDUAL_GATE: f64 = 1e-8;

/// Imaginary-part tolerance for treating an eigenvalue as a real root
/// candidate. Generous on purpose: the residual gate removes false positives.
pub const REAL_ROOT_TOLERANCE: f64 = 1e-3;

const EVALUATION_POINTS: usize = 32;
/// A resultant below this fraction of its Hadamard bound everywhere on the
/// unit circle is rounding noise, i.e. the two polynomials share a factor.
/// Determinant rounding is about `n ε` of the bound.
const RESULTANT_FLOOR: f64 = 1e-14;
const NEWTON_STEPS: usize = 8;

/// All real solutions of `κ1 = κ2 = 0`, at most [`MAX_SOLUTIONS`].
pub fn solve_quartic_system(k1: &BivariateQuartic, k2: &BivariateQuartic) -> Result<Vec<(f64, f64)>> {
    let p1 = k1.normalized();
    let p2 = k2.normalized();
    if p1.max_abs_coeff() == 0.0 || p2.max_abs_coeff() == 0.0 {
        return Err(Error::SolverFailure);
    }
    let lambda1 = eliminate(&p1, &p2)?;

    let mut candidates = Vec::new();
    for l1 in lambda1 {
        for p in [&p1, &p2] {
            let slice = p.in_lambda2(l1);
            for z in polynomial_roots(&slice) {
                if z.im.abs() <= REAL_ROOT_TOLERANCE * (1.0 + z.re.abs()) {
                    candidates.push((l1, z.re));
                }
            }
        }
    }

    let mut accepted: Vec<((f64, f64), f64)> = Vec::new();
    for start in candidates {
        let x = polish(&p1, &p2, start);
        let r = residual(&p1, &p2, x);
        if !(r <= RESIDUAL_GATE * gate_scale(&p1, &p2, x)) {
            continue;
        }
        match accepted.iter_mut().find(|(y, _)| same_root(x, *y)) {
            Some(existing) if r < existing.1 => *existing = (x, r),
            Some(_) => {}
            None => accepted.push((x, r)),
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoRealSolution);
    }
    if accepted.len() > MAX_SOLUTIONS {
        accepted.sort_by(|a, b| a.1.total_cmp(&b.1));
        accepted.truncate(MAX_SOLUTIONS);
    }
    Ok(accepted.into_iter().map(|(x, _)| x).collect())
}

/// Picks the root with the smallest `|λ1| + |λ2|`, breaking ties by
/// lexicographic order. Returns `None` for an empty list.
pub fn select_multipliers(roots: &[(f64, f64)]) -> Option<(f64, f64)> {
    roots.iter().copied().min_by(|a, b| {
        (a.0.abs() + a.1.abs())
            .total_cmp(&(b.0.abs() + b.1.abs()))
            .then(a.0.total_cmp(&b.0))
            .then(a.1.total_cmp(&b.1))
    })
}

/// Real `λ1` candidates of the system.
fn eliminate(p1: &BivariateQuartic, p2: &BivariateQuartic) -> Result<Vec<f64>> {
    let (d1, d2) = match (p1.lambda2_degree(), p2.lambda2_degree()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::SolverFailure),
    };
    let univariate = match (d1, d2) {
        (0, 0) => return Err(Error::SolverFailure),
        // a polynomial free of λ2 already is the eliminant
        (0, _) => p1.in_lambda1(0.0).to_vec(),
        (_, 0) => p2.in_lambda1(0.0).to_vec(),
        _ => resultant_coefficients(p1, p2, d1, d2)?,
    };
    Ok(polynomial_roots(&univariate)
        .into_iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_TOLERANCE * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect())
}

/// Coefficients of `Res_λ2(κ1, κ2)` in ascending powers of `λ1`.
fn resultant_coefficients(
    p1: &BivariateQuartic,
    p2: &BivariateQuartic,
    d1: usize,
    d2: usize,
) -> Result<Vec<f64>> {
    let n = d1 + d2;
    let mut values = Vec::with_capacity(EVALUATION_POINTS);
    let mut largest = 0.0f64;
    let mut hadamard = 0.0f64;
    for k in 0..EVALUATION_POINTS {
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / EVALUATION_POINTS as f64);
        let s = sylvester(p1, p2, d1, d2, z);
        let bound: f64 = s.row_iter().map(|r| r.norm()).product();
        let det = s.determinant();
        largest = largest.max(det.norm());
        hadamard = hadamard.max(bound);
        values.push(det);
    }
    if !(largest > RESULTANT_FLOOR * hadamard) {
        return Err(Error::SolverFailure);
    }
    let degree = (4 * n).min(EVALUATION_POINTS - 1);
    let coeffs = (0..=degree)
        .map(|j| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    v * Complex64::from_polar(1.0, -std::f64::consts::TAU * (j * k) as f64 / EVALUATION_POINTS as f64)
                })
                .sum();
            sum.re / EVALUATION_POINTS as f64
        })
        .collect::<Vec<_>>();
    Ok(coeffs)
}

/// Sylvester matrix in `λ2` with entries evaluated at `λ1 = z`.
fn sylvester(p1: &BivariateQuartic, p2: &BivariateQuartic, d1: usize, d2: usize, z: Complex64) -> DMatrix<Complex64> {
    let n = d1 + d2;
    let mut s = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let c1: Vec<Complex64> = (0..=d1).map(|b| lambda2_coeff(p1, b, z)).collect();
    let c2: Vec<Complex64> = (0..=d2).map(|b| lambda2_coeff(p2, b, z)).collect();
    for r in 0..d2 {
        for b in 0..=d1 {
            s[(r, r + d1 - b)] = c1[b];
        }
    }
    for r in 0..d1 {
        for b in 0..=d2 {
            s[(d2 + r, r + d2 - b)] = c2[b];
        }
    }
    s
}

fn lambda2_coeff(p: &BivariateQuartic, b: usize, z: Complex64) -> Complex64 {
    (0..=4 - b)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + p.coeff(a, b))
}

fn residual(p1: &BivariateQuartic, p2: &BivariateQuartic, x: (f64, f64)) -> f64 {
    p1.eval(x.0, x.1).abs() + p2.eval(x.0, x.1).abs()
}

/// Rounding error grows with the monomial magnitudes, so far-out roots are
/// judged relative to them.
fn gate_scale(p1: &BivariateQuartic, p2: &BivariateQuartic, x: (f64, f64)) -> f64 {
    (p1.term_magnitude(x.0, x.1) + p2.term_magnitude(x.0, x.1)).max(1.0)
}

fn same_root(a: (f64, f64), b: (f64, f64)) -> bool {
    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    d <= 1e-6 * (1.0 + a.0.hypot(a.1))
}

/// Damped Newton iteration on the 2×2 system; keeps the best point seen.
fn polish(p1: &BivariateQuartic, p2: &BivariateQuartic, start: (f64, f64)) -> (f64, f64) {
    let mut x = start;
    let mut r = residual(p1, p2, x);
    for _ in 0..NEWTON_STEPS {
        if r == 0.0 {
            break;
        }
        let (g1, g2) = (p1.gradient(x.0, x.1), p2.gradient(x.0, x.1));
        let j = Matrix2::new(g1[0], g1[1], g2[0], g2[1]);
        let f = Vector2::new(p1.eval(x.0, x.1), p2.eval(x.0, x.1));
        let Some(step) = j.lu().solve(&f) else { break };
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-3 {
            let y = (x.0 - t * step.x, x.1 - t * step.y);
            let ry = residual(p1, p2, y);
            if ry < r {
                x = y;
                r = ry;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}
