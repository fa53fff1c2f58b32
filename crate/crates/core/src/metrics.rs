//! Error metrics and their aggregation.

use serde::{Deserialize, Serialize};

use nalgebra::Vector3;

use crate::epipolar::RelativePose;

/// Width of one mAA bin for pose errors, degrees.
pub const POSE_BIN_DEG: f64 = 1.0;
/// Width of one mAA bin for relative focal errors.
pub const FOCAL_BIN: f64 = 0.01;

/// Relative focal error `|f_est − f_gt| / max(f_est, f_gt)`.
pub fn focal_error(f_est: f64, f_gt: f64) -> f64 {
    (f_est - f_gt).abs() / f_est.max(f_gt)
}

/// Angle of `R_est R_gtᵀ` in degrees.
pub fn rotation_error(est: &RelativePose, gt: &RelativePose) -> f64 {
    let r = est.rotation * gt.rotation.transpose();
    // atan2 stays accurate near zero, where acos of the trace does not
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    (axis.norm() / 2.0).atan2((r.trace() - 1.0) / 2.0).to_degrees()
}

/// Angle between translation directions in degrees. With `sign_agnostic`
/// the sign of the estimate is ignored.
pub fn translation_error(est: &RelativePose, gt: &RelativePose, sign_agnostic: bool) -> f64 {
    let (a, b) = (est.translation.as_ref(), gt.translation.as_ref());
    let angle = a.cross(b).norm().atan2(a.dot(b)).to_degrees();
    if sign_agnostic {
        angle.min(180.0 - angle)
    } else {
        angle
    }
}

/// The larger of the rotation and translation errors, degrees. Pass
/// `sign_agnostic = false` when the estimate's translation sign was fixed by
/// cheirality.
pub fn pose_error(est: &RelativePose, gt: &RelativePose, sign_agnostic: bool) -> f64 {
    rotation_error(est, gt).max(translation_error(est, gt, sign_agnostic))
}

/// Mean over `t_j = j · max_threshold / n_bins`, `j = 1..=n_bins`, of the
/// fraction of errors strictly below `t_j`. Zero for an empty list.
pub fn mean_average_accuracy(errors: &[f64], max_threshold: f64, n_bins: usize) -> f64 {
    if errors.is_empty() || n_bins == 0 {
        return 0.0;
    }
    let step = max_threshold / n_bins as f64;
    let n = errors.len() as f64;
    (1..=n_bins)
        .map(|j| {
            let t = j as f64 * step;
            errors.iter().filter(|e| **e < t).count() as f64 / n
        })
        .sum::<f64>()
        / n_bins as f64
}

/// mAA with the default bin widths: 1° for poses, 0.01 for focal errors.
pub fn maa_pose(errors: &[f64], max_deg: f64) -> f64 {
    mean_average_accuracy(errors, max_deg, (max_deg / POSE_BIN_DEG).round().max(1.0) as usize)
}

pub fn maa_focal(errors: &[f64], max_err: f64) -> f64 {
    mean_average_accuracy(errors, max_err, (max_err / FOCAL_BIN).round().max(1.0) as usize)
}

/// Median; the mean of the middle pair for even lengths. `None` if empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

/// Errors of one estimate. Failed estimates carry `f_err = 1` and
/// `p_err = 180`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(default)]
    pub group: String,
    pub f_err: Vec<f64>,
    #[serde(default)]
    pub p_err: Option<f64>,
    #[serde(default = "yes")]
    pub success: bool,
}

fn yes() -> bool {
    true
}

impl EvalRecord {
    pub fn failure(group: impl Into<String>, cameras: usize, with_pose: bool) -> Self {
        Self {
            group: group.into(),
            f_err: vec![1.0; cameras],
            p_err: with_pose.then_some(180.0),
            success: false,
        }
    }
}

/// Aggregates over one group of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub group: String,
    pub count: usize,
    pub failures: usize,
    pub median_p_err: Option<f64>,
    /// `(max threshold, mAA)` per requested pose threshold.
    pub maa_p: Vec<(f64, f64)>,
    /// Median over every camera's focal error.
    pub median_f_err: Option<f64>,
    pub maa_f: Vec<(f64, f64)>,
}

/// Summaries per group, in order of first appearance.
pub fn summarize(records: &[EvalRecord], pose_thresholds: &[f64], focal_thresholds: &[f64]) -> Vec<Summary> {
    let mut groups: Vec<(&str, Vec<&EvalRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(g, _)| *g == r.group) {
            Some((_, v)) => v.push(r),
            None => groups.push((&r.group, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(group, recs)| {
            let p: Vec<f64> = recs.iter().filter_map(|r| r.p_err).collect();
            let f: Vec<f64> = recs.iter().flat_map(|r| r.f_err.iter().copied()).collect();
            Summary {
                group: group.to_string(),
                count: recs.len(),
                failures: recs.iter().filter(|r| !r.success).count(),
                median_p_err: median(&p),
                maa_p: if p.is_empty() {
                    Vec::new()
                } else {
                    pose_thresholds.iter().map(|&t| (t, maa_pose(&p, t))).collect()
                },
                median_f_err: median(&f),
                maa_f: focal_thresholds.iter().map(|&t| (t, maa_focal(&f, t))).collect(),
            }
        })
        .collect()
}
