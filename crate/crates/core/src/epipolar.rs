//! Two-view epipolar geometry.
//!
//! Convention used throughout the crate: a correspondence `(x1, x2)` in
//! homogeneous pixel coordinates satisfies `x2ᵀ F x1 = 0`, so `F` maps points
//! of image 1 to epipolar lines in image 2, and for calibration matrices
//! `K1`, `K2` the matrix `E = K2ᵀ F K1` is essential. Relative poses map
//! camera-1 coordinates to camera-2 coordinates: `X2 = R X1 + t`.
//!
//! The Kruppa residuals pair the right singular vectors of `F` (the `v_i`)
//! with camera 1 and the left singular vectors (the `u_i`) with camera 2,
//! which is the pairing under which they vanish on exact geometry with this
//! convention.

use nalgebra::{Matrix3, Point2, SMatrix, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio `sigma2 / sigma1` below which a matrix is treated as rank one.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Partial derivatives of `(κ1, κ2)` (rows) with respect to
/// `(f1, u1, v1, f2, u2, v2)` (columns).
pub type KruppaJacobian = SMatrix<f64, 2, 6>;

/// Pinhole intrinsics with square pixels and zero skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal: f64,
    pub principal_point: Vector2<f64>,
}

impl Intrinsics {
    pub fn new(focal: f64, u: f64, v: f64) -> Self {
        Self {
            focal,
            principal_point: Vector2::new(u, v),
        }
    }

    /// `K = [[f, 0, u], [0, f, v], [0, 0, 1]]`.
    pub fn calibration_matrix(&self) -> Matrix3<f64> {
        let (f, u, v) = (self.focal, self.principal_point.x, self.principal_point.y);
        Matrix3::new(f, 0.0, u, 0.0, f, v, 0.0, 0.0, 1.0)
    }

    pub fn inverse_calibration_matrix(&self) -> Matrix3<f64> {
        let (f, u, v) = (self.focal, self.principal_point.x, self.principal_point.y);
        Matrix3::new(1.0 / f, 0.0, -u / f, 0.0, 1.0 / f, -v / f, 0.0, 0.0, 1.0)
    }

    /// Dual image of the absolute conic, `ω* = K Kᵀ`.
    pub fn dual_conic(&self) -> Matrix3<f64> {
        let k = self.calibration_matrix();
        k * k.transpose()
    }

    /// Maps a pixel to normalized camera coordinates (`z = 1`).
    pub fn normalize_point(&self, p: &Point2<f64>) -> Vector3<f64> {
        Vector3::new(
            (p.x - self.principal_point.x) / self.focal,
            (p.y - self.principal_point.y) / self.focal,
            1.0,
        )
    }

    pub fn project(&self, x: &Vector3<f64>) -> Point2<f64> {
        Point2::new(
            self.focal * x.x / x.z + self.principal_point.x,
            self.focal * x.y / x.z + self.principal_point.y,
        )
    }

    /// `aᵀ ω* b` with its partial derivatives in `(f, u, v)`.
    ///
    /// Uses `ω* = f² diag(1, 1, 0) + c̃ c̃ᵀ` with `c̃ = (u, v, 1)`.
    fn conic_form(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> ConicForm {
        let f = self.focal;
        let c = Vector3::new(self.principal_point.x, self.principal_point.y, 1.0);
        let ab = a.x * b.x + a.y * b.y;
        let ac = a.dot(&c);
        let bc = b.dot(&c);
        let abs_dot = |x: &Vector3<f64>| x.x.abs() * c.x.abs() + x.y.abs() * c.y.abs() + x.z.abs();
        ConicForm {
            value: f * f * ab + ac * bc,
            grad: [2.0 * f * ab, a.x * bc + b.x * ac, a.y * bc + b.y * ac],
            magnitude: f * f * ((a.x * b.x).abs() + (a.y * b.y).abs()) + abs_dot(a) * abs_dot(b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ConicForm {
    value: f64,
    grad: [f64; 3],
    /// Value with every summand replaced by its absolute value.
    magnitude: f64,
}

/// Cached factorization `F = U diag(σ1, σ2, 0) Vᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdF {
    pub u: Matrix3<f64>,
    pub v: Matrix3<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SvdF {
    pub fn u_col(&self, i: usize) -> Vector3<f64> {
        self.u.column(i).into_owned()
    }

    pub fn v_col(&self, i: usize) -> Vector3<f64> {
        self.v.column(i).into_owned()
    }

    pub fn reconstruct(&self) -> Matrix3<f64> {
        let d = Matrix3::from_diagonal(&Vector3::new(self.sigma1, self.sigma2, 0.0));
        self.u * d * self.v.transpose()
    }
}

/// A rank-2 fundamental matrix with unit Frobenius norm whose
/// largest-magnitude entry is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
    svd: SvdF,
}

impl FundamentalMatrix {
    /// Canonicalizes `raw`; see [`normalize_f`].
    pub fn new(raw: Matrix3<f64>) -> Result<Self> {
        normalize_f(&raw)
    }

    /// Builds `F = K2⁻ᵀ [t]ₓ R K1⁻¹` from ground-truth cameras.
    pub fn from_cameras(k1: &Intrinsics, k2: &Intrinsics, pose: &RelativePose) -> Result<Self> {
        let e = essential_from_pose(pose);
        normalize_f(
            &(k2.inverse_calibration_matrix().transpose() * e * k1.inverse_calibration_matrix()),
        )
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn svd(&self) -> &SvdF {
        &self.svd
    }

    /// The fundamental matrix of the swapped image pair.
    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
            svd: SvdF {
                u: self.svd.v,
                v: self.svd.u,
                sigma1: self.svd.sigma1,
                sigma2: self.svd.sigma2,
            },
        }
    }

    /// Algebraic epipolar residual `x2ᵀ F x1`.
    pub fn epipolar_residual(&self, x1: &Point2<f64>, x2: &Point2<f64>) -> f64 {
        x2.to_homogeneous().dot(&(self.m * x1.to_homogeneous()))
    }

    pub fn as_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)], m[(0, 1)], m[(0, 2)],
            m[(1, 0)], m[(1, 1)], m[(1, 2)],
            m[(2, 0)], m[(2, 1)], m[(2, 2)],
        ]
    }
}

/// One-sided Jacobi SVD of a 3×3 matrix: `(A V, V)` with the columns of
/// `A V` mutually orthogonal and ordered by decreasing norm, and `V`
/// orthogonal. Unlike bidiagonalization it keeps small singular triplets
/// accurate relative to their own size, which matters for fundamental
/// matrices in pixel units, whose entries span many orders of magnitude.
fn jacobi_svd3(a: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let mut w = *a;
    let mut v = Matrix3::identity();
    for _ in 0..30 {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = w.column(p).norm_squared();
            let beta = w.column(q).norm_squared();
            let gamma = w.column(p).dot(&w.column(q));
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            for m in [&mut w, &mut v] {
                for r in 0..3 {
                    let (x, y) = (m[(r, p)], m[(r, q)]);
                    m[(r, p)] = c * x - s * y;
                    m[(r, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order = [0usize, 1, 2];
    let norms = [w.column(0).norm(), w.column(1).norm(), w.column(2).norm()];
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    (
        Matrix3::from_columns(&order.map(|i| w.column(i).into_owned())),
        Matrix3::from_columns(&order.map(|i| v.column(i).into_owned())),
    )
}

/// Scales to unit Frobenius norm, zeroes the smallest singular value and fixes
/// the sign so that the largest-magnitude entry is positive.
pub fn normalize_f(raw: &Matrix3<f64>) -> Result<FundamentalMatrix> {
    let norm = raw.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::InvalidMatrix);
    }
    let scaled = raw / norm;
    let (w, v) = jacobi_svd3(&scaled);
    let (s1, s2) = (w.column(0).norm(), w.column(1).norm());
    if !(s1 > 0.0) || s2 / s1 < RANK_TOLERANCE {
        return Err(Error::RankDeficient {
            ratio: if s1 > 0.0 { s2 / s1 } else { 0.0 },
        });
    }
    // the third column of A V is σ3 u3, so this removes exactly the
    // smallest component and leaves the rest of the input untouched
    let truncated = scaled - w.column(2) * v.column(2).transpose();
    let scale = truncated.norm();
    let (mut u1, mut u2) = (w.column(0) / s1, w.column(1) / s2);
    let mut m = truncated / scale;
    let mut largest = 0.0f64;
    let mut sign = 1.0;
    for x in m.iter() {
        if x.abs() > largest {
            largest = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        m = -m;
        u1 = -u1;
        u2 = -u2;
    }
    let svd = SvdF {
        u: Matrix3::from_columns(&[u1, u2, u1.cross(&u2)]),
        v,
        sigma1: s1 / scale,
        sigma2: s2 / scale,
    };
    Ok(FundamentalMatrix { m, svd })
}

/// Relative pose with `X2 = R X1 + t` and `‖t‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    pub translation: Unit<Vector3<f64>>,
}

impl RelativePose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation: Unit::new_normalize(translation),
        }
    }
}

pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// `E = [t]ₓ R`, so that `x̂2ᵀ E x̂1 = 0` for normalized points.
pub fn essential_from_pose(pose: &RelativePose) -> Matrix3<f64> {
    skew(pose.translation.as_ref()) * pose.rotation
}

/// The essential matrix implied by `F` and the two calibrations, `K2ᵀ F K1`.
pub fn essential_from_fundamental(
    f: &FundamentalMatrix,
    k1: &Intrinsics,
    k2: &Intrinsics,
) -> Matrix3<f64> {
    k2.calibration_matrix().transpose() * f.matrix() * k1.calibration_matrix()
}

fn kruppa_forms(svd: &SvdF, k1: &Intrinsics, k2: &Intrinsics) -> [ConicForm; 6] {
    let (u1, u2) = (svd.u_col(0), svd.u_col(1));
    let (v1, v2) = (svd.v_col(0), svd.v_col(1));
    [
        k1.conic_form(&v1, &v1), // a
        k2.conic_form(&u1, &u2), // b
        k1.conic_form(&v1, &v2), // c
        k2.conic_form(&u2, &u2), // d
        k2.conic_form(&u1, &u1), // e
        k1.conic_form(&v2, &v2), // g
    ]
}

/// The two Kruppa residuals
///
/// ```text
/// κ1 = σ1 (v1ᵀω1 v1)(u1ᵀω2 u2) + σ2 (v1ᵀω1 v2)(u2ᵀω2 u2)
/// κ2 = σ1 (v1ᵀω1 v2)(u1ᵀω2 u1) + σ2 (v2ᵀω1 v2)(u1ᵀω2 u2)
/// ```
///
/// where `ωi = Ki Kiᵀ`.
pub fn kruppa_residuals(svd: &SvdF, k1: &Intrinsics, k2: &Intrinsics) -> [f64; 2] {
    let [a, b, c, d, e, g] = kruppa_forms(svd, k1, k2);
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    [
        s1 * a.value * b.value + s2 * c.value * d.value,
        s1 * c.value * e.value + s2 * g.value * b.value,
    ]
}

/// Size of the largest additive term in either residual, with each quadratic
/// form expanded into absolute summands. Rounding in the residuals scales
/// with this, so tolerances are stated against it.
pub fn kruppa_term_scale(svd: &SvdF, k1: &Intrinsics, k2: &Intrinsics) -> f64 {
    let [a, b, c, d, e, g] = kruppa_forms(svd, k1, k2);
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    [
        s1 * a.magnitude * b.magnitude,
        s2 * c.magnitude * d.magnitude,
        s1 * c.magnitude * e.magnitude,
        s2 * g.magnitude * b.magnitude,
    ]
    .into_iter()
    .fold(0.0f64, f64::max)
}

/// Analytic Jacobian of [`kruppa_residuals`] in `(f1, u1, v1, f2, u2, v2)`.
pub fn kruppa_derivatives(svd: &SvdF, k1: &Intrinsics, k2: &Intrinsics) -> KruppaJacobian {
    let [a, b, c, d, e, g] = kruppa_forms(svd, k1, k2);
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    let mut jac = KruppaJacobian::zeros();
    for p in 0..3 {
        // camera 1 enters through a, c, g; camera 2 through b, d, e
        jac[(0, p)] = s1 * a.grad[p] * b.value + s2 * c.grad[p] * d.value;
        jac[(0, p + 3)] = s1 * a.value * b.grad[p] + s2 * c.value * d.grad[p];
        jac[(1, p)] = s1 * c.grad[p] * e.value + s2 * g.grad[p] * b.value;
        jac[(1, p + 3)] = s1 * c.value * e.grad[p] + s2 * g.value * b.grad[p];
    }
    jac
}

/// Singular values of a 3×3 matrix in descending order.
pub(crate) fn sorted_singular_values(m: &Matrix3<f64>) -> [f64; 3] {
    let sv = m.singular_values();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Whether `K2ᵀ F K1` has two equal singular values and a zero one, both
/// relative to the largest singular value and within `tol`.
pub fn is_valid_essential(f: &FundamentalMatrix, k1: &Intrinsics, k2: &Intrinsics, tol: f64) -> bool {
    let [s1, s2, s3] = sorted_singular_values(&essential_from_fundamental(f, k1, k2));
    s1 > 0.0 && s3 / s1 <= tol && (s1 - s2) / s1 <= tol
}

/// Depths `(d1, d2)` with `d1 R x1 + t ≈ d2 x2` in the least-squares sense.
fn triangulate_depths(pose: &RelativePose, x1: &Vector3<f64>, x2: &Vector3<f64>) -> Option<(f64, f64)> {
    let a = pose.rotation * x1;
    let b = -x2;
    let t = pose.translation.as_ref();
    // normal equations of [a b] [d1 d2]ᵀ = -t
    let (aa, ab, bb) = (a.dot(&a), a.dot(&b), b.dot(&b));
    let (at, bt) = (-a.dot(t), -b.dot(t));
    let det = aa * bb - ab * ab;
    if det.abs() <= 1e-14 * aa * bb {
        return None;
    }
    Some(((bb * at - ab * bt) / det, (aa * bt - ab * at) / det))
}

/// Recovers `(R, t)` from `F` and known intrinsics by enumerating the four
/// decompositions of `E = K2ᵀ F K1` and voting on positive depth in both
/// cameras. Ties go to the earliest candidate.
pub fn decompose_pose(
    f: &FundamentalMatrix,
    k1: &Intrinsics,
    k2: &Intrinsics,
    correspondences: &[(Point2<f64>, Point2<f64>)],
) -> Result<RelativePose> {
    if correspondences.is_empty() {
        return Err(Error::TooFewPoints { required: 1, got: 0 });
    }
    let e = essential_from_fundamental(f, k1, k2);
    let svd = e.svd(true, true);
    let (mut u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::InvalidMatrix),
    };
    let mut v = v_t.transpose();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    u = Matrix3::from_columns(&order.map(|i| u.column(i).into_owned()));
    v = Matrix3::from_columns(&order.map(|i| v.column(i).into_owned()));
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v.determinant() < 0.0 {
        v = -v;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let ra = u * w * v.transpose();
    let rb = u * w.transpose() * v.transpose();
    let t = u.column(2).into_owned();
    let candidates = [
        RelativePose::new(ra, t),
        RelativePose::new(ra, -t),
        RelativePose::new(rb, t),
        RelativePose::new(rb, -t),
    ];
    let normalized: Vec<_> = correspondences
        .iter()
        .map(|(p1, p2)| (k1.normalize_point(p1), k2.normalize_point(p2)))
        .collect();
    let mut best = (0usize, 0usize);
    for (i, pose) in candidates.iter().enumerate() {
        let votes = normalized
            .iter()
            .filter(|(x1, x2)| matches!(triangulate_depths(pose, x1, x2), Some((d1, d2)) if d1 > 0.0 && d2 > 0.0))
            .count();
        if votes > best.1 {
            best = (i, votes);
        }
    }
    if best.1 == 0 {
        return Err(Error::CheiralityAmbiguous);
    }
    Ok(candidates[best.0])
}
