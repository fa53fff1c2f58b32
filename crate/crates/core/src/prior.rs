//! Focal lengths and principal points closest to their priors subject to the
//! Kruppa constraints.
//!
//! Each iteration linearizes the constraints at the previous estimate, which
//! makes the stationarity conditions of the Lagrangian give the updates
//! `Δ = W⁻¹ Jᵀ λ` as linear functions of the two multipliers. Substituting
//! `prior + Δ(λ)` back into the exact constraints leaves two quartics in
//! `(λ1, λ2)`. All real roots are found and the one with the smallest
//! `|λ1| + |λ2|` defines the next estimate.

use nalgebra::{Matrix2, SMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::epipolar::{kruppa_derivatives, normalize_f, FundamentalMatrix, Intrinsics, SvdF};
use crate::error::{Error, Result};
use crate::poly::BivariateQuartic;
use crate::solver::{select_multipliers, solve_quartic_system};

pub const DEFAULT_FOCAL_WEIGHT: f64 = 5e-4;
pub const DEFAULT_PRINCIPAL_POINT_WEIGHT: f64 = 1.0;
/// Default focal prior as a multiple of the larger image dimension.
pub const DEFAULT_FOCAL_FACTOR: f64 = 1.2;

/// Costs at or below this value (normalized units) count as exactly zero
/// for the stopping rule.
const COST_FLOOR: f64 = 1e-24;

/// `Δ = M λ` for the stacked parameters `(f1, u1, v1, f2, u2, v2)`.
pub type UpdateMap = SMatrix<f64, 6, 2>;

/// Prior and weights for one camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPrior {
    pub focal: f64,
    pub principal_point: Vector2<f64>,
    pub w_f: f64,
    pub w_c: f64,
}

impl CameraPrior {
    pub fn new(focal: f64, u: f64, v: f64) -> Self {
        Self {
            focal,
            principal_point: Vector2::new(u, v),
            w_f: DEFAULT_FOCAL_WEIGHT,
            w_c: DEFAULT_PRINCIPAL_POINT_WEIGHT,
        }
    }

    /// Focal `1.2 · max(width, height)` at the image center.
    pub fn from_image(width: f64, height: f64) -> Self {
        Self::new(DEFAULT_FOCAL_FACTOR * width.max(height), width / 2.0, height / 2.0)
    }

    pub fn with_weights(mut self, w_f: f64, w_c: f64) -> Self {
        self.w_f = w_f;
        self.w_c = w_c;
        self
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            focal: self.focal,
            principal_point: self.principal_point,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.focal.is_finite() && self.principal_point.iter().all(|x| x.is_finite());
        if !finite || !(self.focal > 0.0) {
            return Err(Error::InvalidPrior(format!("focal prior must be positive, got {}", self.focal)));
        }
        if !(self.w_f > 0.0 && self.w_c > 0.0) || !self.w_f.is_finite() || !self.w_c.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "weights must be positive and finite, got w_f = {}, w_c = {}",
                self.w_f, self.w_c
            )));
        }
        Ok(())
    }
}

/// Priors for both cameras.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub cameras: [CameraPrior; 2],
}

impl PriorConfig {
    pub fn new(camera1: CameraPrior, camera2: CameraPrior) -> Self {
        Self { cameras: [camera1, camera2] }
    }

    pub fn from_images(size1: (f64, f64), size2: (f64, f64)) -> Self {
        Self::new(CameraPrior::from_image(size1.0, size1.1), CameraPrior::from_image(size2.0, size2.1))
    }

    pub fn validate(&self) -> Result<()> {
        self.cameras.iter().try_for_each(CameraPrior::validate)
    }

    fn stacked(&self) -> [f64; 6] {
        let [a, b] = &self.cameras;
        [
            a.focal,
            a.principal_point.x,
            a.principal_point.y,
            b.focal,
            b.principal_point.x,
            b.principal_point.y,
        ]
    }

    fn weights(&self) -> [f64; 6] {
        let [a, b] = &self.cameras;
        [a.w_f, a.w_c, a.w_c, b.w_f, b.w_c, b.w_c]
    }

    fn scaled(&self, alpha: f64) -> Self {
        let mut out = *self;
        for c in &mut out.cameras {
            c.focal /= alpha;
            c.principal_point /= alpha;
        }
        out
    }
}

/// Options for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the relative change of the cost drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Divide all pixel quantities by the larger focal prior before building
    /// the polynomial systems.
    pub normalize: bool,
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 50,
            normalize: true,
            record_history: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(format!(
                "need epsilon > 0 and max_iterations >= 1, got {} and {}",
                self.epsilon, self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStatus {
    Converged,
    MaxIterations,
    /// The polynomial system of some iteration had no real root; the
    /// previous iterate is returned.
    NoRealSolution,
    /// Elimination broke down numerically; the previous iterate is returned.
    SolverFailure,
}

/// One step of the iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Weighted squared distance to the priors, in pixels².
    pub cost: f64,
    /// Selected multipliers (normalized units).
    pub lambda: (f64, f64),
    pub intrinsics: [Intrinsics; 2],
    /// Every real root of the iteration's system (normalized units).
    pub roots: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub intrinsics: [Intrinsics; 2],
    pub iterations: usize,
    /// Weighted squared distance to the priors, in pixels².
    pub final_cost: f64,
    pub converged: bool,
    pub status: CalibrationStatus,
    pub history: Option<Vec<IterationRecord>>,
}

/// The polynomial system of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSystem {
    /// `κ1`, `κ2` as quartics in the multipliers.
    pub kappa: [BivariateQuartic; 2],
    /// The same constraints in `μ` with `λ = basis · μ`, where the columns of
    /// `update_map · basis` are orthonormal.
    pub conditioned: [BivariateQuartic; 2],
    pub basis: Matrix2<f64>,
    pub update_map: UpdateMap,
    prior: [f64; 6],
}

impl IterationSystem {
    /// Parameter updates `(Δf1, Δu1, Δv1, Δf2, Δu2, Δv2)`.
    pub fn update(&self, lambda: (f64, f64)) -> [f64; 6] {
        let d = self.update_map * Vector2::new(lambda.0, lambda.1);
        std::array::from_fn(|i| d[i])
    }

    /// Intrinsics `prior + Δ(λ)`.
    pub fn estimate(&self, lambda: (f64, f64)) -> [Intrinsics; 2] {
        let d = self.update(lambda);
        let s: [f64; 6] = std::array::from_fn(|i| self.prior[i] + d[i]);
        unstack(&s)
    }

    pub fn to_lambda(&self, mu: (f64, f64)) -> (f64, f64) {
        let l = self.basis * Vector2::new(mu.0, mu.1);
        (l.x, l.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unknowns {
    Separate,
    SharedFocal,
}

fn stack(k: &[Intrinsics; 2]) -> [f64; 6] {
    [
        k[0].focal,
        k[0].principal_point.x,
        k[0].principal_point.y,
        k[1].focal,
        k[1].principal_point.x,
        k[1].principal_point.y,
    ]
}

fn unstack(s: &[f64; 6]) -> [Intrinsics; 2] {
    [Intrinsics::new(s[0], s[1], s[2]), Intrinsics::new(s[3], s[4], s[5])]
}

/// Builds the iteration system at `previous` for separate focal lengths.
pub fn build_iteration_system(svd: &SvdF, previous: &[Intrinsics; 2], priors: &PriorConfig) -> IterationSystem {
    build(svd, previous, priors, Unknowns::Separate)
}

/// As [`build_iteration_system`] with one focal length shared by both
/// cameras. The focal weight and prior of camera 1 are used.
pub fn build_equal_focal_system(svd: &SvdF, previous: &[Intrinsics; 2], priors: &PriorConfig) -> IterationSystem {
    build(svd, previous, priors, Unknowns::SharedFocal)
}

fn build(svd: &SvdF, previous: &[Intrinsics; 2], priors: &PriorConfig, unknowns: Unknowns) -> IterationSystem {
    let jac = kruppa_derivatives(svd, &previous[0], &previous[1]);
    let w = priors.weights();
    let mut prior = priors.stacked();
    let mut map = UpdateMap::zeros();
    for j in 0..2 {
        for i in 0..6 {
            map[(i, j)] = jac[(j, i)] / w[i];
        }
        if unknowns == Unknowns::SharedFocal {
            // ∂/∂f = ∂/∂f1 + ∂/∂f2 with a single focal weight
            let df = (jac[(j, 0)] + jac[(j, 3)]) / w[0];
            map[(0, j)] = df;
            map[(3, j)] = df;
        }
    }
    if unknowns == Unknowns::SharedFocal {
        prior[3] = prior[0];
    }
    let kappa = kruppa_quartics(svd, &prior, &map);
    let basis = conditioning_basis(&map);
    let conditioned = kruppa_quartics(svd, &prior, &(map * basis));
    IterationSystem {
        kappa,
        conditioned,
        basis,
        update_map: map,
        prior,
    }
}

/// `R⁻¹` from the thin QR factorization of the update map, or a diagonal
/// column scaling when the map is (nearly) rank one.
fn conditioning_basis(map: &UpdateMap) -> Matrix2<f64> {
    let r: Matrix2<f64> = map.qr().r();
    let (r11, r22) = (r[(0, 0)].abs(), r[(1, 1)].abs());
    if r11 > 0.0 && r22 > 1e-12 * r11 {
        if let Some(inv) = r.try_inverse() {
            return inv;
        }
    }
    let n0 = map.column(0).norm();
    let n1 = map.column(1).norm();
    let inv = |n: f64| if n > 0.0 { 1.0 / n } else { 1.0 };
    Matrix2::new(inv(n0), 0.0, 0.0, inv(n1))
}

/// Kruppa residuals with every parameter replaced by `base_i + L_i · λ`.
fn kruppa_quartics(svd: &SvdF, base: &[f64; 6], l: &UpdateMap) -> [BivariateQuartic; 2] {
    let p: [BivariateQuartic; 6] = std::array::from_fn(|i| BivariateQuartic::linear(base[i], l[(i, 0)], l[(i, 1)]));
    let (u1, u2) = (svd.u_col(0), svd.u_col(1));
    let (v1, v2) = (svd.v_col(0), svd.v_col(1));
    // aᵀ ω* b = f² (a0 b0 + a1 b1) + (aᵀ c̃)(bᵀ c̃) with c̃ = (u, v, 1)
    let form = |cam: usize, a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>| {
        let (f, u, v) = (p[3 * cam], p[3 * cam + 1], p[3 * cam + 2]);
        let ac = u.scale(a.x) + v.scale(a.y) + BivariateQuartic::constant(a.z);
        let bc = u.scale(b.x) + v.scale(b.y) + BivariateQuartic::constant(b.z);
        (f * f).scale(a.x * b.x + a.y * b.y) + ac * bc
    };
    let a = form(0, &v1, &v1);
    let b = form(1, &u1, &u2);
    let c = form(0, &v1, &v2);
    let d = form(1, &u2, &u2);
    let e = form(1, &u1, &u1);
    let g = form(0, &v2, &v2);
    let (s1, s2) = (svd.sigma1, svd.sigma2);
    [
        (a * b).scale(s1) + (c * d).scale(s2),
        (c * e).scale(s1) + (g * b).scale(s2),
    ]
}

/// Estimates `f1, f2, c1, c2` from `F` and priors on all of them.
pub fn calibrate(f: &FundamentalMatrix, priors: &PriorConfig, options: &SolverOptions) -> Result<CalibrationResult> {
    priors.validate()?;
    run(f, priors, options, Unknowns::Separate)
}

/// Estimates one focal length shared by both cameras and the two principal
/// points. Both principal points start from the prior's.
pub fn calibrate_equal_focal(
    f: &FundamentalMatrix,
    prior: &CameraPrior,
    options: &SolverOptions,
) -> Result<CalibrationResult> {
    prior.validate()?;
    run(f, &PriorConfig::new(*prior, *prior), options, Unknowns::SharedFocal)
}

fn run(f: &FundamentalMatrix, priors: &PriorConfig, options: &SolverOptions, unknowns: Unknowns) -> Result<CalibrationResult> {
    options.validate()?;
    let alpha = if options.normalize {
        priors.cameras[0].focal.max(priors.cameras[1].focal)
    } else {
        1.0
    };
    let d = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(alpha, alpha, 1.0));
    let fn_ = normalize_f(&(d * f.matrix() * d))?;
    let pn = priors.scaled(alpha);
    let p = pn.stacked();
    let w = pn.weights();
    let rescale = |k: &[Intrinsics; 2]| {
        k.map(|c| Intrinsics {
            focal: c.focal * alpha,
            principal_point: c.principal_point * alpha,
        })
    };
    let cost_of = |s: &[f64; 6]| -> f64 {
        let d: [f64; 6] = std::array::from_fn(|i| s[i] - p[i]);
        let shared = unknowns == Unknowns::SharedFocal;
        (0..6)
            .filter(|&i| !(shared && i == 3))
            .map(|i| w[i] * d[i] * d[i])
            .sum()
    };

    let mut current: [Intrinsics; 2] = unstack(&p);
    let mut cost = 0.0;
    let mut history = options.record_history.then(Vec::new);
    let finish = |current: &[Intrinsics; 2], k: usize, cost: f64, status: CalibrationStatus, history: Option<Vec<IterationRecord>>| CalibrationResult {
        intrinsics: rescale(current),
        iterations: k,
        final_cost: cost * alpha * alpha,
        converged: status == CalibrationStatus::Converged,
        status,
        history,
    };

    for k in 1..=options.max_iterations {
        let system = build(fn_.svd(), &current, &pn, unknowns);
        let roots = match solve_quartic_system(&system.conditioned[0], &system.conditioned[1]) {
            Ok(r) => r,
            Err(Error::NoRealSolution) => return Ok(finish(&current, k - 1, cost, CalibrationStatus::NoRealSolution, history)),
            Err(_) => return Ok(finish(&current, k - 1, cost, CalibrationStatus::SolverFailure, history)),
        };
        let roots: Vec<(f64, f64)> = roots.into_iter().map(|mu| system.to_lambda(mu)).collect();
        let Some(lambda) = select_multipliers(&roots) else {
            return Ok(finish(&current, k - 1, cost, CalibrationStatus::NoRealSolution, history));
        };
        let mut next = system.estimate(lambda);
        // ω* only sees f², so a negative focal is the same camera
        for c in &mut next {
            c.focal = c.focal.abs();
        }
        let next_cost = cost_of(&stack(&next));
        if let Some(h) = history.as_mut() {
            h.push(IterationRecord {
                k,
                cost: next_cost * alpha * alpha,
                lambda,
                intrinsics: rescale(&next),
                roots,
            });
        }
        let settled = if next_cost <= COST_FLOOR {
            cost <= COST_FLOOR
        } else {
            (next_cost - cost).abs() / next_cost < options.epsilon
        };
        current = next;
        cost = next_cost;
        if k > 1 && settled {
            return Ok(finish(&current, k, cost, CalibrationStatus::Converged, history));
        }
    }
    Ok(finish(&current, options.max_iterations, cost, CalibrationStatus::MaxIterations, history))
}
