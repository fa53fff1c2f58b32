use std::path::PathBuf;

use clap::ValueEnum;
use focal_selfcal::robust::RansacConfig;
use focal_selfcal::synth::{run_sweep, write_rows, Estimator, FSource, SceneConfig, SweepParam, SweepSpec};

use crate::{write_output, CmdResult, Failure};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    /// Stopping threshold, non-degenerate base, priors 660/440.
    Convergence,
    /// Extra x-rotation of camera 2 with y = 0.
    CoplanarityTheta,
    /// Vertical offset of camera 2 with θ = 0.
    CoplanarityY,
    /// Principal-point noise.
    PpNoise,
    /// Pixel noise.
    PixelNoise,
    /// Focal priors as multiples of the true focals.
    Prior,
    /// Focal to principal-point weight ratio.
    Weights,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Ours,
    OursEqual,
    Bougnoux,
    Sturm,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ours => Estimator::Ours,
            EstimatorArg::OursEqual => Estimator::OursEqual,
            EstimatorArg::Bougnoux => Estimator::Bougnoux,
            EstimatorArg::Sturm => Estimator::Sturm,
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    sweep: Sweep,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Swept values, comma separated; replaces the sweep's defaults.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorArg>>,
    /// Base extra x-rotation of camera 2, degrees.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Base y-offset of camera 2.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    #[arg(long)]
    sigma_n: Option<f64>,
    #[arg(long)]
    sigma_p: Option<f64>,
    #[arg(long)]
    outliers: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    prior_f1: Option<f64>,
    #[arg(long)]
    prior_f2: Option<f64>,
    /// Use the exact matrix instead of estimating it from the points.
    #[arg(long)]
    exact_f: bool,
}

/// Swept parameter, default values and base `(θ, y)` of a named sweep.
fn preset(s: Sweep) -> (SweepParam, Vec<f64>, (f64, f64)) {
    let non_degenerate = (10.0, 150.0);
    match s {
        Sweep::Convergence => (SweepParam::Epsilon, vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8], non_degenerate),
        Sweep::CoplanarityTheta => {
            (SweepParam::Theta, vec![-15.0, -10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0, 15.0], (0.0, 0.0))
        }
        Sweep::CoplanarityY => {
            (SweepParam::Y, vec![-200.0, -100.0, -50.0, -25.0, 0.0, 25.0, 50.0, 100.0, 200.0], (0.0, 0.0))
        }
        Sweep::PpNoise => (SweepParam::SigmaP, vec![0.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0], non_degenerate),
        Sweep::PixelNoise => (SweepParam::SigmaN, vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0], non_degenerate),
        Sweep::Prior => (SweepParam::FocalPrior, vec![0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0], non_degenerate),
        Sweep::Weights => (SweepParam::WeightRatio, vec![1e-6, 1e-5, 1e-4, 5e-4, 1e-3, 1e-2, 1e-1, 1.0], non_degenerate),
    }
}

fn spec(a: &Args) -> SweepSpec {
    let (param, values, (theta, y)) = preset(a.sweep);
    let defaults = SweepSpec::default();
    let base = SceneConfig {
        theta: a.theta.unwrap_or(theta),
        y: a.y.unwrap_or(y),
        sigma_n: a.sigma_n.unwrap_or(defaults.base.sigma_n),
        sigma_p: a.sigma_p.unwrap_or(defaults.base.sigma_p),
        outlier_ratio: a.outliers.unwrap_or(defaults.base.outlier_ratio),
        n_points: a.points.unwrap_or(defaults.base.n_points),
        ..defaults.base
    };
    let priors = if a.sweep == Sweep::Convergence { (660.0, 440.0) } else { defaults.focal_priors };
    SweepSpec {
        param,
        values: a.values.clone().unwrap_or(values),
        trials: a.trials,
        base,
        estimators: a
            .estimators
            .as_ref()
            .map_or(defaults.estimators.clone(), |v| v.iter().map(|&e| e.into()).collect()),
        f_source: if a.exact_f {
            FSource::GroundTruth
        } else {
            FSource::Ransac(RansacConfig { rfc_enabled: false, ..Default::default() })
        },
        focal_priors: (a.prior_f1.unwrap_or(priors.0), a.prior_f2.unwrap_or(priors.1)),
        seed: a.seed,
        ..defaults
    }
}

pub fn run(a: Args) -> CmdResult {
    let rows = run_sweep(&spec(&a)).map_err(|e| Failure::input(e.to_string()))?;
    let mut bytes = Vec::new();
    write_rows(&rows, &mut bytes).map_err(|e| Failure::input(e.to_string()))?;
    write_output(a.out.as_ref(), &bytes)
}
