use std::path::PathBuf;

use focal_selfcal::formats::{read_correspondences, write_matrix_file, ImageSize, MatrixFile};
use focal_selfcal::robust::{ransac_f, Correspondence, RansacConfig};
use focal_selfcal::Error;
use nalgebra::{Point2, Vector2};
use serde::Serialize;

use crate::{open_input, parse_pair, to_json, write_output, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Correspondence CSV with header x1,y1,x2,y2 (`-` for stdin).
    input: PathBuf,
    /// Sampson-distance inlier threshold, pixels.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reject minimal models with imaginary focal lengths (default).
    #[arg(long, overrides_with = "no_rfc")]
    rfc: bool,
    #[arg(long)]
    no_rfc: bool,
    /// Principal point of image 1 assumed by the focal check, `u,v`.
    #[arg(long, value_parser = parse_pair)]
    pp1: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair)]
    pp2: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.999)]
    confidence: f64,
    /// Size of image 1, `width,height`; stored in the matrix file.
    #[arg(long, value_parser = parse_pair)]
    image1: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair)]
    image2: Option<(f64, f64)>,
    /// Matrix JSON destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the RANSAC report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    inliers: usize,
    correspondences: usize,
    iterations_run: usize,
    models_generated: usize,
    models_rejected_rfc: usize,
    score_evaluations: usize,
    refit_accepted: bool,
    rfc_enabled: bool,
    rfc_principal_points: [[f64; 2]; 2],
    inlier_mask: Vec<bool>,
}

fn bbox_center<'a>(points: impl Iterator<Item = &'a Point2<f64>>) -> Vector2<f64> {
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in points {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    (lo + hi) / 2.0
}

/// Explicit point, else image center, else center of the points' bounding box.
fn principal_point<'a>(
    pp: Option<(f64, f64)>,
    image: Option<(f64, f64)>,
    points: impl Iterator<Item = &'a Point2<f64>>,
) -> Vector2<f64> {
    match (pp, image) {
        (Some((u, v)), _) => Vector2::new(u, v),
        (None, Some((w, h))) => Vector2::new(w / 2.0, h / 2.0),
        (None, None) => bbox_center(points),
    }
}

fn image_size(s: Option<(f64, f64)>) -> Result<Option<ImageSize>, Failure> {
    match s {
        Some((width, height)) if !(width > 0.0 && height > 0.0) => {
            Err(Failure::input(format!("image size must be positive, got {width},{height}")))
        }
        s => Ok(s.map(|(width, height)| ImageSize { width, height })),
    }
}

pub fn run(a: Args) -> CmdResult {
    let corr: Vec<Correspondence> = read_correspondences(open_input(&a.input)?)
        .map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    let (image1, image2) = (image_size(a.image1)?, image_size(a.image2)?);
    let pp = [
        principal_point(a.pp1, a.image1, corr.iter().map(|c| &c.x1)),
        principal_point(a.pp2, a.image2, corr.iter().map(|c| &c.x2)),
    ];
    let cfg = RansacConfig {
        threshold: a.threshold,
        max_iterations: a.iters,
        seed: a.seed,
        rfc_enabled: !a.no_rfc,
        rfc_principal_points: pp,
        confidence: a.confidence,
        ..Default::default()
    };
    let report = ransac_f(&corr, &cfg).map_err(|e| match e {
        Error::TooFewPoints { .. } | Error::NoModelFound => Failure::insufficient(e.to_string()),
        e => Failure::input(e.to_string()),
    })?;

    let mut file = MatrixFile::new(&report.best_f);
    file.image1 = image1;
    file.image2 = image2;
    let mut bytes = Vec::new();
    write_matrix_file(&file, &mut bytes).map_err(|e| Failure::input(e.to_string()))?;
    write_output(a.out.as_ref(), &bytes)?;

    if let Some(path) = &a.report {
        let r = Report {
            inliers: report.inlier_count(),
            correspondences: corr.len(),
            iterations_run: report.iterations_run,
            models_generated: report.models_generated,
            models_rejected_rfc: report.models_rejected_rfc,
            score_evaluations: report.score_evaluations,
            refit_accepted: report.refit_accepted,
            rfc_enabled: cfg.rfc_enabled,
            rfc_principal_points: pp.map(|p| [p.x, p.y]),
            inlier_mask: report.inlier_mask,
        };
        write_output(Some(path), &to_json(&r))?;
    }
    Ok(())
}
