//! Fundamental-matrix estimation from point correspondences.

use nalgebra::{DMatrix, Matrix3, Point2, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::rfc_check_with_principal_points;
use crate::epipolar::{normalize_f, FundamentalMatrix};
use crate::error::{Error, Result};
use crate::poly::polynomial_roots;

/// Minimal sample size.
pub const SAMPLE_SIZE: usize = 7;

/// Gate on the epipolar residuals and determinant of 7-point solutions,
/// measured in Hartley-normalized coordinates with `‖F‖ = 1`.
pub const SEVEN_POINT_GATE: f64 = 1e-9;

const CUBIC_REAL_TOLERANCE: f64 = 1e-10;
const RANK_GAP: f64 = 1e-10;

/// A match between a pixel in image 1 and a pixel in image 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub x1: Point2<f64>,
    pub x2: Point2<f64>,
}

impl Correspondence {
    pub fn new(x1: Point2<f64>, x2: Point2<f64>) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.iter().chain(self.x2.iter()).all(|v| v.is_finite())
    }
}

/// Similarity moving the centroid to the origin with RMS distance `√2`.
/// Coincident points give the pure translation.
pub fn hartley_normalization<'a>(points: impl IntoIterator<Item = &'a Point2<f64>>) -> Matrix3<f64> {
    let pts: Vec<&Point2<f64>> = points.into_iter().collect();
    let n = pts.len().max(1) as f64;
    let c = pts.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / n;
    let rms = (pts.iter().map(|p| (p.coords - c).norm_squared()).sum::<f64>() / n).sqrt();
    let s = if rms > 0.0 { std::f64::consts::SQRT_2 / rms } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn homogeneous(t: &Matrix3<f64>, p: &Point2<f64>) -> Vector3<f64> {
    t * Vector3::new(p.x, p.y, 1.0)
}

/// Normalized design matrix, padded with zero rows to at least 9×9 so that
/// the SVD yields a full right basis.
fn design(corr: &[Correspondence], t1: &Matrix3<f64>, t2: &Matrix3<f64>) -> DMatrix<f64> {
    let rows = corr.len().max(9);
    let mut a = DMatrix::zeros(rows, 9);
    for (i, c) in corr.iter().enumerate() {
        let p = homogeneous(t1, &c.x1);
        let q = homogeneous(t2, &c.x2);
        for r in 0..3 {
            for s in 0..3 {
                a[(i, 3 * r + s)] = q[r] * p[s];
            }
        }
    }
    a
}

/// Right singular vectors ordered by increasing singular value, with the
/// singular values in decreasing order.
fn null_space(a: DMatrix<f64>) -> Result<(Vec<f64>, Vec<Matrix3<f64>>)> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateSample)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = order
        .iter()
        .rev()
        .map(|&i| Matrix3::from_row_slice(v_t.row(i).transpose().as_slice()))
        .collect();
    Ok((sigma, vecs))
}

/// The 1 to 3 fundamental matrices through seven correspondences.
pub fn seven_point(sample: &[Correspondence]) -> Result<Vec<FundamentalMatrix>> {
    if sample.len() != SAMPLE_SIZE {
        return Err(Error::TooFewPoints { required: SAMPLE_SIZE, got: sample.len() });
    }
    let t1 = hartley_normalization(sample.iter().map(|c| &c.x1));
    let t2 = hartley_normalization(sample.iter().map(|c| &c.x2));
    let (sigma, null) = null_space(design(sample, &t1, &t2))?;
    if !(sigma[0] > 0.0) || sigma[6] <= RANK_GAP * sigma[0] {
        return Err(Error::DegenerateSample);
    }
    let (fa, fb) = (null[0], null[1]);

    // det(α Fa + (1 − α) Fb) is a cubic; recover it from four samples
    let det = |a: f64| (fb + (fa - fb) * a).determinant();
    let (d0, d1, dm, d2) = (det(0.0), det(1.0), det(-1.0), det(2.0));
    let c0 = d0;
    let c2 = (d1 + dm) / 2.0 - d0;
    let c3 = (d2 - 2.0 * d1 + d0 - 2.0 * c2) / 6.0;
    let c1 = d1 - c0 - c2 - c3;
    let coeffs = [c0, c1, c2, c3];
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let mut candidates: Vec<Matrix3<f64>> = polynomial_roots(&coeffs)
        .into_iter()
        .filter(|z| z.im.abs() <= CUBIC_REAL_TOLERANCE * (1.0 + z.re.abs()))
        .map(|z| fb + (fa - fb) * z.re)
        .collect();
    if c3.abs() <= 1e-14 * scale {
        // the root at infinity is the direction Fa − Fb itself
        candidates.push(fa - fb);
    }

    let mut out: Vec<FundamentalMatrix> = Vec::new();
    for m in candidates {
        let norm = m.norm();
        if !(norm > 0.0) {
            continue;
        }
        let m = m / norm;
        let ok = m.determinant().abs() <= SEVEN_POINT_GATE
            && sample.iter().all(|c| {
                let r = homogeneous(&t2, &c.x2).dot(&(m * homogeneous(&t1, &c.x1)));
                r.abs() <= SEVEN_POINT_GATE
            });
        if !ok {
            continue;
        }
        if let Ok(f) = normalize_f(&(t2.transpose() * m * t1)) {
            if !out.iter().any(|g| (g.matrix() - f.matrix()).norm() < 1e-12) {
                out.push(f);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateSample);
    }
    Ok(out)
}

/// Least-squares fundamental matrix from eight or more correspondences.
///
/// Planar scenes leave a three-dimensional solution space; one member of it
/// is returned. Only samples spanning fewer than six constraints fail.
pub fn eight_point_refit(corr: &[Correspondence]) -> Result<FundamentalMatrix> {
    if corr.len() < 8 {
        return Err(Error::TooFewPoints { required: 8, got: corr.len() });
    }
    let t1 = hartley_normalization(corr.iter().map(|c| &c.x1));
    let t2 = hartley_normalization(corr.iter().map(|c| &c.x2));
    let (sigma, null) = null_space(design(corr, &t1, &t2))?;
    if !(sigma[0] > 0.0) || sigma[5] <= RANK_GAP * sigma[0] {
        return Err(Error::DegenerateSample);
    }
    normalize_f(&(t2.transpose() * null[0] * t1)).map_err(|_| Error::DegenerateSample)
}

/// First-order geometric error in pixels²; `+∞` where both epipolar lines
/// are degenerate.
pub fn sampson_error(f: &FundamentalMatrix, c: &Correspondence) -> f64 {
    sampson_error_matrix(f.matrix(), c)
}

fn sampson_error_matrix(m: &Matrix3<f64>, c: &Correspondence) -> f64 {
    let p = Vector3::new(c.x1.x, c.x1.y, 1.0);
    let q = Vector3::new(c.x2.x, c.x2.y, 1.0);
    let fp = m * p;
    let ftq = m.transpose() * q;
    let num = q.dot(&fp);
    let den = fp.x * fp.x + fp.y * fp.y + ftq.x * ftq.x + ftq.y * ftq.y;
    if den == 0.0 {
        f64::INFINITY
    } else {
        num * num / den
    }
}

/// RANSAC settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Inlier threshold on the Sampson distance, pixels.
    pub threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Discard minimal models with imaginary focal lengths before scoring.
    pub rfc_enabled: bool,
    /// Principal points assumed by the focal-length check.
    pub rfc_principal_points: [Vector2<f64>; 2],
    /// Early-termination confidence; `1.0` always runs `max_iterations`.
    pub confidence: f64,
    /// Refit the best model on its inliers.
    pub lo_enabled: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            max_iterations: 1000,
            seed: 0,
            rfc_enabled: true,
            rfc_principal_points: [Vector2::zeros(); 2],
            confidence: 0.999,
            lo_enabled: true,
        }
    }
}

impl RansacConfig {
    /// Places the principal points used by the check at the image centers.
    pub fn with_image_sizes(mut self, size1: (f64, f64), size2: (f64, f64)) -> Self {
        self.rfc_principal_points = [
            Vector2::new(size1.0 / 2.0, size1.1 / 2.0),
            Vector2::new(size2.0 / 2.0, size2.1 / 2.0),
        ];
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || self.max_iterations == 0 || !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidConfig(format!(
                "need threshold > 0, max_iterations >= 1 and confidence in [0, 1], got {}, {}, {}",
                self.threshold, self.max_iterations, self.confidence
            )));
        }
        Ok(())
    }
}

/// Outcome of [`ransac_f`].
#[derive(Debug, Clone, PartialEq)]
pub struct RansacReport {
    pub best_f: FundamentalMatrix,
    pub inlier_mask: Vec<bool>,
    pub iterations_run: usize,
    /// Minimal models produced by the 7-point solver.
    pub models_generated: usize,
    pub models_rejected_rfc: usize,
    /// Correspondence-model error evaluations performed while scoring.
    pub score_evaluations: usize,
    pub refit_accepted: bool,
}

impl RansacReport {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|b| **b).count()
    }
}

fn score(m: &Matrix3<f64>, corr: &[Correspondence], t2: f64) -> (usize, Vec<bool>) {
    let mask: Vec<bool> = corr.iter().map(|c| sampson_error_matrix(m, c) <= t2).collect();
    (mask.iter().filter(|b| **b).count(), mask)
}

fn required_iterations(inlier_ratio: f64, confidence: f64) -> f64 {
    if confidence >= 1.0 {
        return f64::INFINITY;
    }
    let good = inlier_ratio.powi(SAMPLE_SIZE as i32);
    if good <= 0.0 {
        return f64::INFINITY;
    }
    if good >= 1.0 {
        return 0.0;
    }
    (1.0 - confidence).ln() / (1.0 - good).ln()
}

/// Seeded RANSAC over 7-point samples with optional focal-length rejection
/// and a final least-squares refit.
///
/// The random stream does not depend on the rejection setting, so runs with
/// and without it draw the same samples.
pub fn ransac_f(corr: &[Correspondence], cfg: &RansacConfig) -> Result<RansacReport> {
    cfg.validate()?;
    if corr.len() < SAMPLE_SIZE {
        return Err(Error::TooFewPoints { required: SAMPLE_SIZE, got: corr.len() });
    }
    let t2 = cfg.threshold * cfg.threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [c1, c2] = cfg.rfc_principal_points;

    let mut best: Option<(usize, FundamentalMatrix, Vec<bool>)> = None;
    let (mut iterations, mut generated, mut rejected, mut evaluations) = (0, 0, 0, 0);
    let mut sample = Vec::with_capacity(SAMPLE_SIZE);
    while iterations < cfg.max_iterations {
        iterations += 1;
        sample.clear();
        sample.extend(rand::seq::index::sample(&mut rng, corr.len(), SAMPLE_SIZE).iter().map(|i| corr[i]));
        let Ok(models) = seven_point(&sample) else { continue };
        for f in models {
            generated += 1;
            if cfg.rfc_enabled && !rfc_check_with_principal_points(f.matrix(), &c1, &c2) {
                rejected += 1;
                continue;
            }
            evaluations += corr.len();
            let (count, mask) = score(f.matrix(), corr, t2);
            if best.as_ref().is_none_or(|b| count > b.0) {
                best = Some((count, f, mask));
            }
        }
        if let Some((count, _, _)) = &best {
            let needed = required_iterations(*count as f64 / corr.len() as f64, cfg.confidence);
            if (iterations as f64) >= needed {
                break;
            }
        }
    }

    let (count, mut best_f, mut mask) = best.ok_or(Error::NoModelFound)?;
    let mut refit_accepted = false;
    if cfg.lo_enabled && count >= 8 {
        let inliers: Vec<Correspondence> = corr.iter().zip(&mask).filter(|(_, m)| **m).map(|(c, _)| *c).collect();
        if let Ok(g) = eight_point_refit(&inliers) {
            evaluations += corr.len();
            let (c, m) = score(g.matrix(), corr, t2);
            if c >= count {
                (best_f, mask) = (g, m);
                refit_accepted = true;
            }
        }
    }
    Ok(RansacReport {
        best_f,
        inlier_mask: mask,
        iterations_run: iterations,
        models_generated: generated,
        models_rejected_rfc: rejected,
        score_evaluations: evaluations,
        refit_accepted,
    })
}
