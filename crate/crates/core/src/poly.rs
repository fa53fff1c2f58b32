//! Dense polynomials: total-degree-4 bivariates and univariate root finding.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// Number of monomials `λ1^a λ2^b` with `a + b ≤ 4`.
pub const QUARTIC_TERMS: usize = 15;

/// Position of `λ1^a λ2^b` in graded order: `1, λ1, λ2, λ1², λ1λ2, λ2², …`.
pub const fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exponents `(a, b)` of every coefficient slot, in storage order.
pub const MONOMIALS: [(usize, usize); QUARTIC_TERMS] = {
    let mut out = [(0, 0); QUARTIC_TERMS];
    let mut d = 0;
    let mut i = 0;
    while d <= 4 {
        let mut b = 0;
        while b <= d {
            out[i] = (d - b, b);
            i += 1;
            b += 1;
        }
        d += 1;
    }
    out
};

/// A polynomial in `(λ1, λ2)` of total degree at most four.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BivariateQuartic {
    pub coeffs: [f64; QUARTIC_TERMS],
}

impl BivariateQuartic {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.coeffs[0] = c;
        p
    }

    /// `c0 + c1 λ1 + c2 λ2`.
    pub fn linear(c0: f64, c1: f64, c2: f64) -> Self {
        let mut p = Self::zero();
        p.coeffs[..3].copy_from_slice(&[c0, c1, c2]);
        p
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        self.coeffs[monomial_index(a, b)]
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, value: f64) {
        self.coeffs[monomial_index(a, b)] = value;
    }

    pub fn total_degree(&self) -> Option<usize> {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|((a, b), _)| a + b)
            .max()
    }

    pub fn eval(&self, l1: f64, l2: f64) -> f64 {
        // Horner in λ2 with λ1-polynomial coefficients
        (0..=4)
            .rev()
            .fold(0.0, |acc, b| acc * l2 + self.lambda1_part(b, l1))
    }

    /// Coefficient of `λ2^b` as a polynomial in `λ1`, evaluated at `l1`.
    fn lambda1_part(&self, b: usize, l1: f64) -> f64 {
        (0..=4 - b)
            .rev()
            .fold(0.0, |acc, a| acc * l1 + self.coeff(a, b))
    }

    /// Coefficients in ascending powers of `λ2` once `λ1` is fixed.
    pub fn in_lambda2(&self, l1: f64) -> [f64; 5] {
        std::array::from_fn(|b| self.lambda1_part(b, l1))
    }

    /// Coefficients in ascending powers of `λ1` once `λ2` is fixed.
    pub fn in_lambda1(&self, l2: f64) -> [f64; 5] {
        std::array::from_fn(|a| {
            (0..=4 - a)
                .rev()
                .fold(0.0, |acc, b| acc * l2 + self.coeff(a, b))
        })
    }

    pub fn gradient(&self, l1: f64, l2: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for ((a, b), c) in MONOMIALS.iter().zip(&self.coeffs) {
            if *a > 0 {
                g[0] += c * *a as f64 * l1.powi(*a as i32 - 1) * l2.powi(*b as i32);
            }
            if *b > 0 {
                g[1] += c * *b as f64 * l1.powi(*a as i32) * l2.powi(*b as i32 - 1);
            }
        }
        g
    }

    /// Sum of the magnitudes of all terms at `(l1, l2)`.
    pub fn term_magnitude(&self, l1: f64, l2: f64) -> f64 {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .map(|((a, b), c)| (c * l1.powi(*a as i32) * l2.powi(*b as i32)).abs())
            .sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.map(|c| c * s) }
    }

    /// Scaled to unit maximum coefficient magnitude; zero stays zero.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs_coeff();
        if m > 0.0 {
            self.scale(1.0 / m)
        } else {
            *self
        }
    }

    /// Highest power of `λ2` with a nonzero coefficient polynomial.
    pub fn lambda2_degree(&self) -> Option<usize> {
        (0..=4)
            .rev()
            .find(|&b| (0..=4 - b).any(|a| self.coeff(a, b) != 0.0))
    }

    /// Substitutes `λ = L ν + o` for a 2×2 matrix `L` and offset `o`.
    pub fn substitute(&self, l: [[f64; 2]; 2], o: [f64; 2]) -> Self {
        let x = Self::linear(o[0], l[0][0], l[0][1]);
        let y = Self::linear(o[1], l[1][0], l[1][1]);
        let mut out = Self::zero();
        for ((a, b), c) in MONOMIALS.iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let mut term = Self::constant(*c);
            for _ in 0..*a {
                term = term * x;
            }
            for _ in 0..*b {
                term = term * y;
            }
            out = out + term;
        }
        out
    }
}

impl Add for BivariateQuartic {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for BivariateQuartic {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + -rhs
    }
}

impl Neg for BivariateQuartic {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for BivariateQuartic {
    type Output = Self;

    /// Product truncated to total degree four. Callers multiply factors whose
    /// degrees sum to at most four; anything above is a logic error.
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for ((a1, b1), c1) in MONOMIALS.iter().zip(&self.coeffs) {
            if *c1 == 0.0 {
                continue;
            }
            for ((a2, b2), c2) in MONOMIALS.iter().zip(&rhs.coeffs) {
                if *c2 == 0.0 {
                    continue;
                }
                let (a, b) = (a1 + a2, b1 + b2);
                debug_assert!(a + b <= 4, "product exceeds total degree four");
                if a + b <= 4 {
                    out.coeffs[monomial_index(a, b)] += c1 * c2;
                }
            }
        }
        out
    }
}

/// Evaluates `Σ c_i x^i` (ascending coefficients).
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Complex roots of `Σ c_i x^i` (ascending coefficients).
///
/// Leading coefficients smaller than `1e-14` times the largest are dropped as
/// roots at infinity. Remaining roots come from the eigenvalues of a balanced
/// companion matrix. Returns an empty list for constant or zero input.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(max > 0.0) || !max.is_finite() {
        return Vec::new();
    }
    let mut hi = coeffs.len() - 1;
    while hi > 0 && coeffs[hi].abs() <= 1e-14 * max {
        hi -= 1;
    }
    let mut lo = 0;
    while lo < hi && coeffs[lo] == 0.0 {
        lo += 1;
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); lo];
    let n = hi - lo;
    if n == 0 {
        return roots;
    }
    let lead = coeffs[hi];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -coeffs[hi - 1 - j] / lead;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    balance(&mut companion);
    match Schur::try_new(companion, f64::EPSILON, 10_000) {
        Some(schur) => roots.extend(schur.complex_eigenvalues().iter().copied()),
        None => return Vec::new(),
    }
    roots
}

/// Real roots of `Σ c_i x^i`: eigenvalues with `|Im| ≤ tol (1 + |Re|)`,
/// reported by their real part.
pub fn real_roots(coeffs: &[f64], tol: f64) -> Vec<f64> {
    polynomial_roots(coeffs)
        .into_iter()
        .filter(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Diagonal similarity scaling by powers of two that equalizes row and column
/// norms, which makes companion eigenvalues far less sensitive.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while c > g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}
