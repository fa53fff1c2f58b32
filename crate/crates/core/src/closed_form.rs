//! Closed-form focal lengths from a fundamental matrix.
//!
//! All three estimators assume the principal points have been moved to the
//! image origin with [`translate_f_to_origin`].

use nalgebra::{Matrix3, Vector2};

use crate::epipolar::{normalize_f, FundamentalMatrix};
use crate::error::{Error, Result};

/// Relative size of the Bougnoux denominator, compared with the sum of the
/// magnitudes of its monomials, below which the formula is singular.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-15;

/// A squared focal length kept as an unevaluated ratio so its sign can be read
/// without dividing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalSquaredRatio {
    pub numerator: f64,
    pub denominator: f64,
}

impl FocalSquaredRatio {
    /// `f² > 0`, decided from signs only. Zero numerator or denominator is
    /// not positive.
    pub fn is_positive(&self) -> bool {
        (self.numerator > 0.0 && self.denominator > 0.0)
            || (self.numerator < 0.0 && self.denominator < 0.0)
    }

    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }

    /// `Some(f)` when `f²` is positive and finite.
    pub fn focal(&self) -> Option<f64> {
        let v = self.value();
        (self.is_positive() && v.is_finite()).then(|| v.sqrt())
    }
}

fn translation(c: &Vector2<f64>) -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, c.x, 0.0, 1.0, c.y, 0.0, 0.0, 1.0)
}

/// `T2ᵀ F T1` for pixel translations `x = T x'` that put `c1`, `c2` at the
/// origin. No normalization is applied.
pub fn translate_matrix(m: &Matrix3<f64>, c1: &Vector2<f64>, c2: &Vector2<f64>) -> Matrix3<f64> {
    translation(c2).transpose() * m * translation(c1)
}

/// Expresses `F` in coordinates whose origins are the principal points `c1`
/// (image 1) and `c2` (image 2).
pub fn translate_f_to_origin(
    f: &FundamentalMatrix,
    c1: &Vector2<f64>,
    c2: &Vector2<f64>,
) -> Result<FundamentalMatrix> {
    normalize_f(&translate_matrix(f.matrix(), c1, c2))
}

/// Numerator, denominator and the sum of the absolute denominator monomials
/// of the squared focal length of camera 1.
fn focal_ratio_terms(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let f = |r: usize, c: usize| m[(r - 1, c - 1)];
    let (f11, f12, f13) = (f(1, 1), f(1, 2), f(1, 3));
    let (f21, f22, f23) = (f(2, 1), f(2, 2), f(2, 3));
    let (f31, f32, f33) = (f(3, 1), f(3, 2), f(3, 3));
    let numerator = -f33
        * (f12 * f13 * f33 - f13 * f13 * f32 + f22 * f23 * f33 - f23 * f23 * f32);
    let monomials = [
        f11 * f12 * f31 * f33,
        -f11 * f13 * f31 * f32,
        f12 * f12 * f32 * f33,
        -f12 * f13 * f32 * f32,
        f21 * f22 * f31 * f33,
        -f21 * f23 * f31 * f32,
        f22 * f22 * f32 * f33,
        -f22 * f23 * f32 * f32,
    ];
    let denominator = monomials.iter().sum();
    let magnitude = monomials.iter().map(|t| t.abs()).sum();
    (numerator, denominator, magnitude)
}

/// `(f1², f2²)` as ratios for an arbitrary (unnormalized) matrix.
pub fn focal_ratios(m: &Matrix3<f64>) -> [FocalSquaredRatio; 2] {
    let (n1, d1, _) = focal_ratio_terms(m);
    let (n2, d2, _) = focal_ratio_terms(&m.transpose());
    [
        FocalSquaredRatio { numerator: n1, denominator: d1 },
        FocalSquaredRatio { numerator: n2, denominator: d2 },
    ]
}

/// Bougnoux's squared focal lengths in polynomial-ratio form. `f2²` uses the
/// same expression on `Fᵀ`.
pub fn bougnoux(f: &FundamentalMatrix) -> Result<[FocalSquaredRatio; 2]> {
    let mut out = [FocalSquaredRatio { numerator: 0.0, denominator: 0.0 }; 2];
    for (slot, m) in out.iter_mut().zip([*f.matrix(), f.matrix().transpose()]) {
        let (numerator, denominator, magnitude) = focal_ratio_terms(&m);
        if denominator.abs() <= DEGENERATE_DENOMINATOR * magnitude {
            return Err(Error::DegenerateFormula { denominator });
        }
        *slot = FocalSquaredRatio { numerator, denominator };
    }
    Ok(out)
}

/// Real focal length check: both squared focal lengths positive, read from
/// signs alone.
pub fn rfc_check(f: &FundamentalMatrix) -> bool {
    rfc_check_matrix(f.matrix())
}

/// [`rfc_check`] on a raw matrix whose principal points are at the origin.
pub fn rfc_check_matrix(m: &Matrix3<f64>) -> bool {
    focal_ratios(m).iter().all(FocalSquaredRatio::is_positive)
}

/// [`rfc_check`] for a pixel-space matrix with known principal points.
pub fn rfc_check_with_principal_points(m: &Matrix3<f64>, c1: &Vector2<f64>, c2: &Vector2<f64>) -> bool {
    rfc_check_matrix(&translate_matrix(m, c1, c2))
}

/// Coefficients `[c0, c1, c2]` of `κ1(x)` and `κ2(x)` after substituting
/// `ω1* = ω2* = diag(x, x, 1)`.
pub fn equal_focal_quadratics(f: &FundamentalMatrix) -> [[f64; 3]; 2] {
    let svd = f.svd();
    let (u1, u2, v1, v2) = (svd.u_col(0), svd.u_col(1), svd.v_col(0), svd.v_col(1));
    // aᵀ diag(x, x, 1) b = x (a0 b0 + a1 b1) + a2 b2, stored as [const, slope]
    let form = |a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>| [a.z * b.z, a.x * b.x + a.y * b.y];
    let mul = |p: [f64; 2], q: [f64; 2]| [p[0] * q[0], p[0] * q[1] + p[1] * q[0], p[1] * q[1]];
    let add = |p: [f64; 3], q: [f64; 3], s: f64, t: f64| [s * p[0] + t * q[0], s * p[1] + t * q[1], s * p[2] + t * q[2]];
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    [
        add(mul(form(&v1, &v1), form(&u1, &u2)), mul(form(&v1, &v2), form(&u2, &u2)), s1, s2),
        add(mul(form(&v1, &v2), form(&u1, &u1)), mul(form(&v2, &v2), form(&u1, &u2)), s1, s2),
    ]
}

/// Linear factors `[c0, c1]` with `κj(x) = (1 − x) ℓj(x)`.
///
/// Orthogonality of the singular vectors makes `u1ᵀ ω u2` and `v1ᵀ ω v2`
/// both proportional to `1 − x`, so every `F` has the common root `ω* = I`.
/// In pixel units that root carries no information about the focal length.
fn equal_focal_factors(f: &FundamentalMatrix) -> [[f64; 2]; 2] {
    let svd = f.svd();
    let (u1, u2, v1, v2) = (svd.u_col(0), svd.u_col(1), svd.v_col(0), svd.v_col(1));
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    let (cu, cv) = (u1.z * u2.z, v1.z * v2.z);
    let (a, d) = (square_form(&v1), square_form(&u2));
    let (e, g) = (square_form(&u1), square_form(&v2));
    [
        [s1 * cu * a[0] + s2 * cv * d[0], s1 * cu * a[1] + s2 * cv * d[1]],
        [s1 * cv * e[0] + s2 * cu * g[0], s1 * cv * e[1] + s2 * cu * g[1]],
    ]
}

/// `aᵀ diag(x, x, 1) a` as `[const, slope]`.
fn square_form(a: &nalgebra::Vector3<f64>) -> [f64; 2] {
    [a.z * a.z, a.x * a.x + a.y * a.y]
}

/// Relative residual of `σ1² (v1ᵀωv1)(u1ᵀωu1) = σ2² (v2ᵀωv2)(u2ᵀωu2)`, the
/// Kruppa relation that does not involve the cross terms and so does not
/// vanish at `ω* = I` unless `σ1 = σ2`.
fn diagonal_relation_residual(f: &FundamentalMatrix, x: f64) -> f64 {
    let svd = f.svd();
    let q = |a: &nalgebra::Vector3<f64>| {
        let [c, s] = square_form(a);
        c + s * x
    };
    let lhs = svd.sigma1.powi(2) * q(&svd.v_col(0)) * q(&svd.u_col(0));
    let rhs = svd.sigma2.powi(2) * q(&svd.v_col(1)) * q(&svd.u_col(1));
    (lhs - rhs).abs() / (lhs.abs() + rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Largest relative residual of the diagonal Kruppa relation for which the
/// shared root `x = 1` is kept as a genuine solution.
const STRUCTURAL_ROOT_TOLERANCE: f64 = 1e-6;

/// Equal focal length from the Kruppa quadratics in `x = f²`.
///
/// The roots of `κ1` are `x = 1` and the root of its linear factor; when that
/// factor is degenerate `κ2` is used instead. `x = 1` is kept only if it also
/// satisfies the diagonal relation, which happens when `F` is essential. Among
/// the positive roots the one best satisfying that relation wins.
pub fn sturm_equal_focal(f: &FundamentalMatrix) -> Result<f64> {
    let mut candidates = Vec::new();
    if diagonal_relation_residual(f, 1.0) <= STRUCTURAL_ROOT_TOLERANCE {
        candidates.push(1.0);
    }
    for [c0, c1] in equal_focal_factors(f) {
        if c1 == 0.0 || c1.abs() <= 1e-15 * c0.abs() {
            continue;
        }
        let x = -c0 / c1;
        if x > 0.0 && x.is_finite() {
            candidates.push(x);
        }
        break;
    }
    candidates
        .into_iter()
        .map(|x| (diagonal_relation_residual(f, x), x))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, x)| x.sqrt())
        .ok_or(Error::NoRealFocal)
}
