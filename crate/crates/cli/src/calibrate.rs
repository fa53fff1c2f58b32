use std::path::PathBuf;

use clap::ValueEnum;
use focal_selfcal::closed_form::{bougnoux, sturm_equal_focal, translate_f_to_origin};
use focal_selfcal::epipolar::FundamentalMatrix;
use focal_selfcal::formats::read_matrix_file;
use focal_selfcal::prior::{
    calibrate, calibrate_equal_focal, CalibrationResult, CalibrationStatus, CameraPrior, PriorConfig, SolverOptions,
    DEFAULT_FOCAL_FACTOR, DEFAULT_FOCAL_WEIGHT, DEFAULT_PRINCIPAL_POINT_WEIGHT,
};
use focal_selfcal::Error;
use nalgebra::Vector2;
use serde::Serialize;

use crate::{open_input, parse_pair, to_json, write_output, CmdResult, Failure};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Iterative prior-weighted solver.
    Ours,
    /// Closed form, separate focal lengths.
    Bougnoux,
    /// Closed form, one shared focal length.
    Sturm,
}

#[derive(clap::Args)]
pub struct Args {
    /// Matrix JSON as written by `estimate-f` (`-` for stdin).
    input: PathBuf,
    #[arg(long)]
    prior_f1: Option<f64>,
    #[arg(long)]
    prior_f2: Option<f64>,
    /// Principal-point prior of image 1, `u,v`.
    #[arg(long, value_parser = parse_pair)]
    prior_pp1: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair)]
    prior_pp2: Option<(f64, f64)>,
    /// Estimate one focal length for both cameras (camera 1's prior).
    #[arg(long)]
    equal_focal: bool,
    #[arg(long, default_value_t = DEFAULT_FOCAL_WEIGHT)]
    wf: f64,
    #[arg(long, default_value_t = DEFAULT_PRINCIPAL_POINT_WEIGHT)]
    wc: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 50)]
    maxiter: usize,
    #[arg(long, value_enum, default_value_t = Method::Ours)]
    method: Method,
    /// Result JSON destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Output {
    method: &'static str,
    f1: f64,
    f2: f64,
    c1: [f64; 2],
    c2: [f64; 2],
    iterations: usize,
    converged: bool,
    /// Weighted squared distance to the priors; absent for closed forms.
    cost: Option<f64>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f2_squared: Option<f64>,
}

const PRIORS_REQUIRED: &str = "priors required: give --prior-f1/--prior-f2 and --prior-pp1/--prior-pp2 or store image sizes in the matrix file";

fn resolve(focal: Option<f64>, pp: Option<(f64, f64)>, size: Option<(f64, f64)>) -> Option<(Option<f64>, (f64, f64))> {
    let default_focal = size.map(|(w, h)| DEFAULT_FOCAL_FACTOR * w.max(h));
    let pp = pp.or(size.map(|(w, h)| (w / 2.0, h / 2.0)))?;
    Some((focal.or(default_focal), pp))
}

fn method_failure(e: Error) -> Failure {
    match e {
        Error::InvalidPrior(_) | Error::InvalidConfig(_) => Failure::input(e.to_string()),
        e => Failure::method(e.to_string()),
    }
}

fn status_name(s: CalibrationStatus) -> &'static str {
    match s {
        CalibrationStatus::Converged => "converged",
        CalibrationStatus::MaxIterations => "max_iterations",
        CalibrationStatus::NoRealSolution => "no_real_solution",
        CalibrationStatus::SolverFailure => "solver_failure",
    }
}

fn iterative(r: CalibrationResult) -> Result<Output, Failure> {
    if r.iterations == 0 {
        return Err(Failure::method(format!("no estimate: {}", status_name(r.status).replace('_', " "))));
    }
    let [k1, k2] = r.intrinsics;
    Ok(Output {
        method: "ours",
        f1: k1.focal,
        f2: k2.focal,
        c1: [k1.principal_point.x, k1.principal_point.y],
        c2: [k2.principal_point.x, k2.principal_point.y],
        iterations: r.iterations,
        converged: r.converged,
        cost: Some(r.final_cost),
        status: status_name(r.status),
        f1_squared: None,
        f2_squared: None,
    })
}

fn closed_form(f: &FundamentalMatrix, method: Method, c1: Vector2<f64>, c2: Vector2<f64>) -> Result<Output, Failure> {
    let g = translate_f_to_origin(f, &c1, &c2).map_err(method_failure)?;
    let out = |name, f1, f2, squared: Option<(f64, f64)>| Output {
        method: name,
        f1,
        f2,
        c1: [c1.x, c1.y],
        c2: [c2.x, c2.y],
        iterations: 0,
        converged: true,
        cost: None,
        status: "ok",
        f1_squared: squared.map(|s| s.0),
        f2_squared: squared.map(|s| s.1),
    };
    match method {
        Method::Bougnoux => {
            let [a, b] = bougnoux(&g).map_err(method_failure)?;
            match (a.focal(), b.focal()) {
                (Some(f1), Some(f2)) => Ok(out("bougnoux", f1, f2, Some((a.value(), b.value())))),
                _ => Err(Failure::method(format!(
                    "imaginary focal length: f1^2 = {:e}, f2^2 = {:e}",
                    a.value(),
                    b.value()
                ))),
            }
        }
        _ => {
            let f = sturm_equal_focal(&g).map_err(method_failure)?;
            Ok(out("sturm", f, f, None))
        }
    }
}

pub fn run(a: Args) -> CmdResult {
    let file = read_matrix_file(open_input(&a.input)?).map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    let f = file.fundamental().map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    let (size1, size2) = (file.image1.map(|s| s.as_tuple()), file.image2.map(|s| s.as_tuple()));
    let cam1 = resolve(a.prior_f1, a.prior_pp1, size1).ok_or_else(|| Failure::input(PRIORS_REQUIRED))?;
    let cam2 = resolve(a.prior_f2, a.prior_pp2, size2).ok_or_else(|| Failure::input(PRIORS_REQUIRED))?;
    let (c1, c2) = (Vector2::new(cam1.1 .0, cam1.1 .1), Vector2::new(cam2.1 .0, cam2.1 .1));

    let output = match a.method {
        Method::Ours => {
            let options = SolverOptions { epsilon: a.eps, max_iterations: a.maxiter, ..Default::default() };
            let f1 = cam1.0.ok_or_else(|| Failure::input(PRIORS_REQUIRED))?;
            let p1 = CameraPrior::new(f1, c1.x, c1.y).with_weights(a.wf, a.wc);
            let result = if a.equal_focal {
                calibrate_equal_focal(&f, &p1, &options)
            } else {
                let f2 = cam2.0.ok_or_else(|| Failure::input(PRIORS_REQUIRED))?;
                let p2 = CameraPrior::new(f2, c2.x, c2.y).with_weights(a.wf, a.wc);
                calibrate(&f, &PriorConfig::new(p1, p2), &options)
            };
            iterative(result.map_err(method_failure)?)?
        }
        m => closed_form(&f, m, c1, c2)?,
    };
    write_output(a.out.as_ref(), &to_json(&output))
}
