//! Synthetic two-camera scenes and parameter sweeps.
//!
//! Camera 1 sits at the origin looking down `+z`. Camera 2 has its center at
//! `(1200, y, 600)` and is yawed by 60° towards camera 1's principal axis, then
//! tilted by `θ` about its own x-axis. With `θ = 0` and `y = 0` both principal
//! axes lie in the plane `y = 0` and intersect, which is the configuration in
//! which Bougnoux's formula is singular.

use nalgebra::{Matrix3, Point2, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{bougnoux, sturm_equal_focal, translate_f_to_origin};
use crate::epipolar::{FundamentalMatrix, Intrinsics, RelativePose};
use crate::error::{Error, Result};
use crate::metrics::focal_error;
use crate::prior::{calibrate, calibrate_equal_focal, CalibrationStatus, CameraPrior, PriorConfig, SolverOptions};
use crate::robust::{ransac_f, Correspondence, RansacConfig};

pub const CAMERA2_X: f64 = 1200.0;
pub const CAMERA2_Z: f64 = 600.0;
pub const CAMERA2_YAW_DEG: f64 = 60.0;
/// Depth slab of camera 1 in which points are sampled.
pub const DEPTH_RANGE: (f64, f64) = (800.0, 2000.0);
/// Sampling gives up after this many attempts per requested point.
pub const ATTEMPTS_PER_POINT: usize = 10;

/// Parameters of one synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Extra rotation of camera 2 about its x-axis, degrees.
    pub theta: f64,
    /// y-coordinate of camera 2's center.
    pub y: f64,
    pub f1: f64,
    pub f2: f64,
    pub image_size: (f64, f64),
    pub n_points: usize,
    /// Pixel-noise standard deviation.
    pub sigma_n: f64,
    /// Standard deviation of each coordinate of the principal-point offset
    /// the estimators are told about.
    pub sigma_p: f64,
    /// Fraction of correspondences whose second point is replaced by a
    /// uniformly random pixel.
    pub outlier_ratio: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            theta: 0.0,
            y: 300.0,
            f1: 600.0,
            f2: 400.0,
            image_size: (640.0, 480.0),
            n_points: 100,
            sigma_n: 0.0,
            sigma_p: 0.0,
            outlier_ratio: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn image_center(&self) -> Vector2<f64> {
        Vector2::new(self.image_size.0 / 2.0, self.image_size.1 / 2.0)
    }

    pub fn intrinsics(&self) -> [Intrinsics; 2] {
        let c = self.image_center();
        [Intrinsics::new(self.f1, c.x, c.y), Intrinsics::new(self.f2, c.x, c.y)]
    }

    pub fn camera2_center(&self) -> Vector3<f64> {
        Vector3::new(CAMERA2_X, self.y, CAMERA2_Z)
    }

    /// Camera-2-to-world rotation.
    fn camera2_orientation(&self) -> Matrix3<f64> {
        let yaw = Rotation3::from_axis_angle(&Vector3::y_axis(), -CAMERA2_YAW_DEG.to_radians());
        let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), self.theta.to_radians());
        (yaw * tilt).into_inner()
    }

    /// World (camera 1) to camera 2, `X2 = R X + t`, with `t` scaled to unit
    /// length.
    pub fn relative_pose(&self) -> RelativePose {
        let r = self.camera2_orientation().transpose();
        RelativePose::new(r, -r * self.camera2_center())
    }

    fn validate(&self) -> Result<()> {
        let ok = self.f1 > 0.0
            && self.f2 > 0.0
            && self.image_size.0 > 0.0
            && self.image_size.1 > 0.0
            && self.n_points >= 1
            && self.sigma_n >= 0.0
            && self.sigma_p >= 0.0
            && (0.0..=1.0).contains(&self.outlier_ratio)
            && self.theta.is_finite()
            && self.y.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid scene configuration {self:?}")))
        }
    }
}

/// Distance between the two principal axes, in world units.
pub fn principal_axes_distance(cfg: &SceneConfig) -> f64 {
    let d1 = Vector3::z();
    let d2 = cfg.camera2_orientation() * Vector3::z();
    let between = cfg.camera2_center();
    let n = d1.cross(&d2);
    if n.norm() < 1e-15 {
        return between.cross(&d1).norm();
    }
    between.dot(&n).abs() / n.norm()
}

/// Whether the principal axes intersect, the singular configuration of the
/// closed-form focal lengths.
pub fn is_degenerate(cfg: &SceneConfig) -> bool {
    principal_axes_distance(cfg) <= 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    /// Ground-truth intrinsics; principal points at the image centers.
    pub cameras: [Intrinsics; 2],
    pub pose: RelativePose,
    pub gt_f: FundamentalMatrix,
    pub correspondences: Vec<Correspondence>,
    /// `true` for correspondences that were not replaced by outliers.
    pub inlier_mask: Vec<bool>,
    /// Principal points the estimators are told about.
    pub assumed_pp: [Vector2<f64>; 2],
    pub degenerate: bool,
}

impl SyntheticScene {
    /// Priors with the given focal lengths at the assumed principal points.
    pub fn priors(&self, f1: f64, f2: f64) -> PriorConfig {
        PriorConfig::new(
            CameraPrior::new(f1, self.assumed_pp[0].x, self.assumed_pp[0].y),
            CameraPrior::new(f2, self.assumed_pp[1].x, self.assumed_pp[1].y),
        )
    }
}

fn inside(p: &Point2<f64>, size: (f64, f64)) -> bool {
    (0.0..=size.0).contains(&p.x) && (0.0..=size.1).contains(&p.y)
}

/// Builds a scene; points are uniform in camera 1's frustum between the
/// depths of [`DEPTH_RANGE`] and kept if camera 2 sees them too.
pub fn generate_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [k1, k2] = cfg.intrinsics();
    let r = cfg.camera2_orientation().transpose();
    let t = -r * cfg.camera2_center();
    let pose = RelativePose::new(r, t);
    let gt_f = FundamentalMatrix::from_cameras(&k1, &k2, &pose)?;

    let (z0, z1) = DEPTH_RANGE;
    let (w, h) = cfg.image_size;
    let mut clean = Vec::with_capacity(cfg.n_points);
    let attempts = ATTEMPTS_PER_POINT * cfg.n_points;
    for _ in 0..attempts {
        if clean.len() == cfg.n_points {
            break;
        }
        // volume of a pyramid slab grows like z³
        let u: f64 = rng.random();
        let z = (z0.powi(3) + u * (z1.powi(3) - z0.powi(3))).cbrt();
        let p1 = Point2::new(rng.random_range(0.0..=w), rng.random_range(0.0..=h));
        let x = k1.normalize_point(&p1) * z;
        let xc2 = r * x + t;
        if xc2.z <= 0.0 {
            continue;
        }
        let p2 = k2.project(&xc2);
        if inside(&p2, cfg.image_size) {
            clean.push(Correspondence::new(p1, p2));
        }
    }
    if clean.len() < cfg.n_points {
        return Err(Error::FrustumEmpty { requested: cfg.n_points, found: clean.len() });
    }

    let pixel = Normal::new(0.0, cfg.sigma_n).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut correspondences: Vec<Correspondence> = clean
        .iter()
        .map(|c| {
            let mut jitter = || Vector2::new(pixel.sample(&mut rng), pixel.sample(&mut rng));
            Correspondence::new(c.x1 + jitter(), c.x2 + jitter())
        })
        .collect();
    let n_out = (cfg.outlier_ratio * cfg.n_points as f64).round() as usize;
    let mut inlier_mask = vec![true; cfg.n_points];
    for i in rand::seq::index::sample(&mut rng, cfg.n_points, n_out) {
        correspondences[i].x2 = Point2::new(rng.random_range(0.0..=w), rng.random_range(0.0..=h));
        inlier_mask[i] = false;
    }
    let offset = Normal::new(0.0, cfg.sigma_p).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let center = cfg.image_center();
    let assumed_pp = [0, 1].map(|_| center + Vector2::new(offset.sample(&mut rng), offset.sample(&mut rng)));

    Ok(SyntheticScene {
        config: *cfg,
        cameras: [k1, k2],
        pose,
        gt_f,
        correspondences,
        inlier_mask,
        assumed_pp,
        degenerate: is_degenerate(cfg),
    })
}

/// The quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Theta,
    Y,
    SigmaN,
    SigmaP,
    /// Multiplier applied to both ground-truth focals to form the priors.
    FocalPrior,
    /// `w_f / w_c` with `w_c = 1`.
    WeightRatio,
    /// Stopping threshold of the iterative solver.
    Epsilon,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::Y => "y",
            SweepParam::SigmaN => "sigma_n",
            SweepParam::SigmaP => "sigma_p",
            SweepParam::FocalPrior => "focal_prior",
            SweepParam::WeightRatio => "weight_ratio",
            SweepParam::Epsilon => "epsilon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Prior-weighted iterative solver, separate focal lengths.
    Ours,
    /// Prior-weighted iterative solver, shared focal length.
    OursEqual,
    Bougnoux,
    Sturm,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ours => "ours",
            Estimator::OursEqual => "ours_equal",
            Estimator::Bougnoux => "bougnoux",
            Estimator::Sturm => "sturm",
        }
    }
}

/// Where each trial's fundamental matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FSource {
    /// The exact matrix of the ground-truth cameras.
    GroundTruth,
    /// Robust estimation from the noisy correspondences.
    Ransac(RansacConfig),
}

/// An experiment varying one parameter over a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base: SceneConfig,
    pub estimators: Vec<Estimator>,
    pub f_source: FSource,
    /// Focal priors of the iterative solvers.
    pub focal_priors: (f64, f64),
    pub w_f: f64,
    pub w_c: f64,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            param: SweepParam::Y,
            values: vec![0.0],
            trials: 100,
            base: SceneConfig { sigma_n: 1.0, sigma_p: 10.0, ..Default::default() },
            estimators: vec![Estimator::Ours, Estimator::Bougnoux],
            f_source: FSource::Ransac(RansacConfig { rfc_enabled: false, ..Default::default() }),
            focal_priors: (700.0, 400.0),
            w_f: crate::prior::DEFAULT_FOCAL_WEIGHT,
            w_c: crate::prior::DEFAULT_PRINCIPAL_POINT_WEIGHT,
            solver: SolverOptions::default(),
            seed: 0,
        }
    }
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: f64,
    pub trial: usize,
    pub estimator: String,
    pub f1_est: f64,
    pub f2_est: f64,
    pub f1_err: f64,
    pub f2_err: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
    #[serde(skip)]
    pub degenerate: bool,
}

/// Independent stream per `(seed, trial)` so every swept value sees the same
/// random draws for a given trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Setting {
    scene: SceneConfig,
    priors: (f64, f64),
    w_f: f64,
    solver: SolverOptions,
}

fn setting(spec: &SweepSpec, value: f64) -> Setting {
    let mut s = Setting {
        scene: spec.base,
        priors: spec.focal_priors,
        w_f: spec.w_f,
        solver: spec.solver,
    };
    match spec.param {
        SweepParam::Theta => s.scene.theta = value,
        SweepParam::Y => s.scene.y = value,
        SweepParam::SigmaN => s.scene.sigma_n = value,
        SweepParam::SigmaP => s.scene.sigma_p = value,
        SweepParam::FocalPrior => s.priors = (value * spec.base.f1, value * spec.base.f2),
        SweepParam::WeightRatio => s.w_f = value * spec.w_c,
        SweepParam::Epsilon => s.solver.epsilon = value,
    }
    s
}

fn error_status(e: &Error) -> &'static str {
    match e {
        Error::InvalidMatrix => "invalid_matrix",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::CheiralityAmbiguous => "cheirality_ambiguous",
        Error::DegenerateFormula { .. } => "degenerate_formula",
        Error::NoRealFocal => "no_real_focal",
        Error::NoRealSolution => "no_real_solution",
        Error::SolverFailure => "solver_failure",
        Error::InvalidPrior(_) => "invalid_prior",
        Error::DegenerateSample => "degenerate_sample",
        Error::TooFewPoints { .. } => "too_few_points",
        Error::NoModelFound => "no_model_found",
        Error::FrustumEmpty { .. } => "frustum_empty",
        Error::InvalidConfig(_) => "invalid_config",
    }
}

fn calibration_status(s: CalibrationStatus) -> &'static str {
    match s {
        CalibrationStatus::Converged => "ok",
        CalibrationStatus::MaxIterations => "max_iterations",
        CalibrationStatus::NoRealSolution => "no_real_solution",
        CalibrationStatus::SolverFailure => "solver_failure",
    }
}

/// Result of one estimator: focal estimates (NaN when absent), iterations,
/// converged, status.
struct Estimate(f64, f64, usize, bool, &'static str);

fn failed(status: &'static str) -> Estimate {
    Estimate(f64::NAN, f64::NAN, 0, false, status)
}

fn run_estimator(est: Estimator, f: &FundamentalMatrix, scene: &SyntheticScene, s: &Setting, w_c: f64) -> Estimate {
    let [c1, c2] = scene.assumed_pp;
    match est {
        Estimator::Ours => {
            let mut pr = scene.priors(s.priors.0, s.priors.1);
            for c in &mut pr.cameras {
                *c = c.with_weights(s.w_f, w_c);
            }
            match calibrate(f, &pr, &s.solver) {
                Ok(r) => Estimate(r.intrinsics[0].focal, r.intrinsics[1].focal, r.iterations, r.converged, calibration_status(r.status)),
                Err(e) => failed(error_status(&e)),
            }
        }
        Estimator::OursEqual => {
            let pr = CameraPrior::new(s.priors.0, c1.x, c1.y).with_weights(s.w_f, w_c);
            match calibrate_equal_focal(f, &pr, &s.solver) {
                Ok(r) => Estimate(r.intrinsics[0].focal, r.intrinsics[1].focal, r.iterations, r.converged, calibration_status(r.status)),
                Err(e) => failed(error_status(&e)),
            }
        }
        Estimator::Bougnoux => match translate_f_to_origin(f, &c1, &c2).and_then(|g| bougnoux(&g)) {
            Ok([a, b]) => match (a.focal(), b.focal()) {
                (Some(x), Some(y)) => Estimate(x, y, 0, true, "ok"),
                (x, y) => Estimate(x.unwrap_or(f64::NAN), y.unwrap_or(f64::NAN), 0, false, "imaginary_focal"),
            },
            Err(e) => failed(error_status(&e)),
        },
        Estimator::Sturm => match translate_f_to_origin(f, &c1, &c2).and_then(|g| sturm_equal_focal(&g)) {
            Ok(x) => Estimate(x, x, 0, true, "ok"),
            Err(e) => failed(error_status(&e)),
        },
    }
}

fn err_or_one(est: f64, gt: f64) -> f64 {
    if est > 0.0 && est.is_finite() {
        focal_error(est, gt)
    } else {
        1.0
    }
}

fn run_trial(spec: &SweepSpec, value: f64, trial: usize) -> Vec<SweepRow> {
    let s = setting(spec, value);
    let mut cfg = s.scene;
    cfg.seed = trial_seed(spec.seed, trial);
    let row = |est: Estimator, e: Estimate, degenerate: bool| SweepRow {
        sweep_param: spec.param.name().to_string(),
        value,
        trial,
        estimator: est.name().to_string(),
        f1_est: e.0,
        f2_est: e.1,
        f1_err: err_or_one(e.0, cfg.f1),
        f2_err: err_or_one(e.1, cfg.f2),
        iterations: e.2,
        converged: e.3,
        status: e.4.to_string(),
        degenerate,
    };
    let degenerate = is_degenerate(&cfg);
    let scene = match generate_scene(&cfg) {
        Ok(sc) => sc,
        Err(e) => return spec.estimators.iter().map(|&est| row(est, failed(error_status(&e)), degenerate)).collect(),
    };
    let f = match &spec.f_source {
        FSource::GroundTruth => Ok(scene.gt_f.clone()),
        FSource::Ransac(rc) => {
            let mut rc = *rc;
            rc.seed = cfg.seed;
            rc.rfc_principal_points = scene.assumed_pp;
            ransac_f(&scene.correspondences, &rc).map(|r| r.best_f)
        }
    };
    match f {
        Ok(f) => spec
            .estimators
            .iter()
            .map(|&est| row(est, run_estimator(est, &f, &scene, &s, spec.w_c), degenerate))
            .collect(),
        Err(e) => spec.estimators.iter().map(|&est| row(est, failed(error_status(&e)), degenerate)).collect(),
    }
}

/// Runs every `(value, trial)` pair, in parallel on the current rayon pool.
/// Rows are ordered by value, then trial, then estimator, independent of
/// scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() || spec.trials == 0 || spec.estimators.is_empty() {
        return Err(Error::InvalidConfig("a sweep needs values, trials and estimators".into()));
    }
    spec.base.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(v, t)| run_trial(spec, v, t))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Serializes rows with the header
/// `sweep_param,value,trial,estimator,f1_est,f2_est,f1_err,f2_err,iterations,converged,status`.
pub fn write_rows<W: std::io::Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
