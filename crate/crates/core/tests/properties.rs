use focal_selfcal::closed_form::{bougnoux, rfc_check, sturm_equal_focal, translate_f_to_origin, translate_matrix};
use focal_selfcal::epipolar::{
    decompose_pose, essential_from_pose, kruppa_derivatives, kruppa_residuals, kruppa_term_scale, normalize_f, FundamentalMatrix, Intrinsics,
    RelativePose,
};
use focal_selfcal::formats::{read_correspondences, read_matrix_file, write_correspondences, write_matrix_file, MatrixFile};
use focal_selfcal::metrics::{focal_error, mean_average_accuracy, pose_error};
use focal_selfcal::robust::{hartley_normalization, ransac_f, seven_point, Correspondence, RansacConfig, SEVEN_POINT_GATE};
use focal_selfcal::synth::{generate_scene, SceneConfig};
use nalgebra::{Matrix3, Point2, Rotation3, Vector3};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-1.0f64..1.0).prop_map(|a| Matrix3::from_row_slice(&a))
}

/// Non-degenerate scene parameters with random focal lengths.
fn scene() -> impl Strategy<Value = SceneConfig> {
    (-15.0f64..15.0, -300.0f64..300.0, 300.0f64..1200.0, 300.0f64..1200.0, any::<u64>())
        .prop_filter("principal axes too close", |(t, y, ..)| t.abs() >= 5.0 || y.abs() >= 100.0)
        .prop_map(|(theta, y, f1, f2, seed)| SceneConfig { theta, y, f1, f2, seed, ..Default::default() })
}

fn cameras() -> impl Strategy<Value = (Intrinsics, Intrinsics, RelativePose)> {
    (
        prop::array::uniform3(200.0f64..1500.0),
        prop::array::uniform3(-200.0f64..200.0),
        prop::array::uniform3(-0.6f64..0.6),
        prop::array::uniform3(-1.0f64..1.0),
    )
        .prop_filter("translation too short", |(.., t)| t.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|(f, c, r, t)| {
            let k1 = Intrinsics::new(f[0], 320.0 + c[0], 240.0 + c[1]);
            let k2 = Intrinsics::new(f[1], 320.0 + c[2], 240.0 - c[1] / 2.0);
            let rot = Rotation3::from_euler_angles(r[0], r[1], r[2]).into_inner();
            (k1, k2, RelativePose::new(rot, Vector3::new(t[0], t[1], t[2])))
        })
}

fn truth_raw(cfg: &SceneConfig) -> Matrix3<f64> {
    let [k1, k2] = cfg.intrinsics();
    k2.inverse_calibration_matrix().transpose() * essential_from_pose(&cfg.relative_pose()) * k1.inverse_calibration_matrix()
}

fn truth_f(cfg: &SceneConfig) -> FundamentalMatrix {
    let [k1, k2] = cfg.intrinsics();
    FundamentalMatrix::from_cameras(&k1, &k2, &cfg.relative_pose()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent_and_scale_free(m in matrix(), e in -3.0f64..3.0) {
        if let Ok(f) = normalize_f(&m) {
            let again = normalize_f(f.matrix()).unwrap();
            prop_assert!((again.matrix() - f.matrix()).amax() <= 1e-15);
            let scaled = normalize_f(&(m * 10f64.powf(e))).unwrap();
            prop_assert!((scaled.matrix() - f.matrix()).amax() <= 1e-14);
            // power-of-two multiples scale exactly, so the whole decomposition matches
            prop_assert_eq!(&normalize_f(&(m * 2.0)).unwrap(), &f);
            prop_assert_eq!(&normalize_f(&(m * -0.5)).unwrap(), &f);
            prop_assert!((f.matrix().norm() - 1.0).abs() <= 1e-15);
            prop_assert!(f.matrix().determinant().abs() <= 1e-15);
        }
    }

    #[test]
    fn kruppa_vanishes_on_consistent_geometry((k1, k2, pose) in cameras()) {
        let f = FundamentalMatrix::from_cameras(&k1, &k2, &pose).unwrap();
        let scale = kruppa_term_scale(f.svd(), &k1, &k2);
        let [r1, r2] = kruppa_residuals(f.svd(), &k1, &k2);
        prop_assert!(r1.abs().max(r2.abs()) <= 1e-8 * scale, "{r1} {r2} {scale}");
    }

    #[test]
    fn kruppa_jacobian_matches_central_differences(
        (k1, k2, pose) in cameras(),
        d in prop::array::uniform6(-0.2f64..0.2),
    ) {
        let f = FundamentalMatrix::from_cameras(&k1, &k2, &pose).unwrap();
        // evaluate away from the exact solution too
        let state = [
            k1.focal * (1.0 + d[0]), k1.principal_point.x + 100.0 * d[1], k1.principal_point.y + 100.0 * d[2],
            k2.focal * (1.0 + d[3]), k2.principal_point.x + 100.0 * d[4], k2.principal_point.y + 100.0 * d[5],
        ];
        let at = |s: &[f64; 6]| kruppa_residuals(f.svd(), &Intrinsics::new(s[0], s[1], s[2]), &Intrinsics::new(s[3], s[4], s[5]));
        let jac = kruppa_derivatives(f.svd(), &Intrinsics::new(state[0], state[1], state[2]), &Intrinsics::new(state[3], state[4], state[5]));
        for row in 0..2 {
            let row_scale = (0..6).map(|c| jac[(row, c)].abs()).fold(0.0, f64::max);
            for col in 0..6 {
                let h = 1e-4 * state[col].abs().max(1.0);
                let (mut plus, mut minus) = (state, state);
                plus[col] += h;
                minus[col] -= h;
                let fd = (at(&plus)[row] - at(&minus)[row]) / (2.0 * h);
                prop_assert!((fd - jac[(row, col)]).abs() <= 1e-6 * row_scale, "({row},{col}) {fd} {}", jac[(row, col)]);
            }
        }
    }

    #[test]
    fn bougnoux_recovers_truth_and_ignores_scale(cfg in scene()) {
        let f = truth_f(&cfg);
        let c = cfg.image_center();
        let g = translate_f_to_origin(&f, &c, &c).unwrap();
        let [a, b] = bougnoux(&g).unwrap();
        prop_assert!((a.focal().unwrap() - cfg.f1).abs() <= 1e-6 * cfg.f1);
        prop_assert!((b.focal().unwrap() - cfg.f2).abs() <= 1e-6 * cfg.f2);
        prop_assert!(rfc_check(&g));
        // the same raw matrix, once doubled before canonicalization
        let raw = translate_matrix(&(truth_raw(&cfg) * 3.7), &c, &c);
        let (once, twice) = (normalize_f(&raw).unwrap(), normalize_f(&(raw * 2.0)).unwrap());
        prop_assert_eq!(bougnoux(&twice).unwrap(), bougnoux(&once).unwrap());
        prop_assert_eq!(rfc_check(&twice), rfc_check(&once));
        prop_assert_eq!(sturm_equal_focal(&twice).ok(), sturm_equal_focal(&once).ok());
    }

    #[test]
    fn rfc_agrees_with_focal_signs(m in matrix()) {
        if let Ok(f) = normalize_f(&m) {
            if let Ok([a, b]) = bougnoux(&f) {
                prop_assert_eq!(rfc_check(&f), a.value() > 0.0 && b.value() > 0.0);
            }
        }
    }

    #[test]
    fn sturm_solution_satisfies_both_equations(cfg in scene()) {
        let cfg = SceneConfig { f2: cfg.f1, ..cfg };
        let c = cfg.image_center();
        let g = translate_f_to_origin(&truth_f(&cfg), &c, &c).unwrap();
        let f = sturm_equal_focal(&g).unwrap();
        prop_assert!((f - cfg.f1).abs() <= 1e-6 * cfg.f1);
        let k = Intrinsics::new(f, 0.0, 0.0);
        let [r1, r2] = kruppa_residuals(g.svd(), &k, &k);
        prop_assert!(r1.abs() + r2.abs() <= 1e-6 * kruppa_term_scale(g.svd(), &k, &k));
    }

    #[test]
    fn pose_is_recovered_from_noiseless_geometry(cfg in scene()) {
        let s = generate_scene(&cfg);
        prop_assume!(s.is_ok(), "too few mutually visible points");
        let s = s.unwrap();
        let pairs: Vec<_> = s.correspondences.iter().map(|c| (c.x1, c.x2)).collect();
        let pose = decompose_pose(&s.gt_f, &s.cameras[0], &s.cameras[1], &pairs).unwrap();
        prop_assert!(pose_error(&pose, &s.pose, false) <= 1e-6);
        prop_assert!((pose.rotation - s.pose.rotation).amax() <= 1e-6);
    }

    #[test]
    fn seven_point_models_pass_the_gate(pts in prop::array::uniform7(prop::array::uniform4(0.0f64..640.0))) {
        let sample: Vec<_> = pts.iter().map(|p| Correspondence::new(Point2::new(p[0], p[1]), Point2::new(p[2], p[3]))).collect();
        if let Ok(models) = seven_point(&sample) {
            prop_assert!(!models.is_empty() && models.len() <= 3);
            let t1 = hartley_normalization(sample.iter().map(|c| &c.x1));
            let t2 = hartley_normalization(sample.iter().map(|c| &c.x2));
            for f in models {
                // the model in normalized coordinates, scaled to unit norm
                let m = t2.try_inverse().unwrap().transpose() * f.matrix() * t1.try_inverse().unwrap();
                let m = m / m.norm();
                prop_assert!(m.determinant().abs() <= SEVEN_POINT_GATE);
                for c in &sample {
                    let p = t1 * Vector3::new(c.x1.x, c.x1.y, 1.0);
                    let q = t2 * Vector3::new(c.x2.x, c.x2.y, 1.0);
                    prop_assert!(q.dot(&(m * p)).abs() <= SEVEN_POINT_GATE);
                }
            }
        }
    }

    #[test]
    fn focal_error_is_symmetric_and_scale_free(x in 1.0f64..5000.0, y in 1.0f64..5000.0, a in 0.01f64..100.0) {
        prop_assert_eq!(focal_error(x, y), focal_error(y, x));
        prop_assert!((focal_error(a * x, a * y) - focal_error(x, y)).abs() <= 1e-15);
        prop_assert!((0.0..1.0).contains(&focal_error(x, y)));
    }

    #[test]
    fn maa_is_monotone(errors in prop::collection::vec(0.0f64..30.0, 1..40), i in any::<prop::sample::Index>(), grow in 0.0f64..20.0) {
        let base = mean_average_accuracy(&errors, 10.0, 10);
        prop_assert!(mean_average_accuracy(&errors, 20.0, 20) >= base - 1e-15);
        let mut worse = errors.clone();
        worse[i.index(errors.len())] += grow;
        prop_assert!(mean_average_accuracy(&worse, 10.0, 10) <= base + 1e-15);
    }

    #[test]
    fn pose_error_of_itself_is_zero((_, _, pose) in cameras()) {
        prop_assert_eq!(pose_error(&pose, &pose, false), 0.0);
    }

    #[test]
    fn correspondence_files_round_trip(pts in prop::collection::vec(prop::array::uniform4(-1e4f64..1e4), 0..30)) {
        let corr: Vec<_> = pts.iter().map(|p| Correspondence::new(Point2::new(p[0], p[1]), Point2::new(p[2], p[3]))).collect();
        let mut buf = Vec::new();
        write_correspondences(&corr, &mut buf).unwrap();
        prop_assert_eq!(read_correspondences(buf.as_slice()).unwrap(), corr);
    }

    #[test]
    fn matrix_files_round_trip(m in matrix()) {
        if let Ok(f) = normalize_f(&m) {
            let mut buf = Vec::new();
            write_matrix_file(&MatrixFile::new(&f), &mut buf).unwrap();
            let back = read_matrix_file(buf.as_slice()).unwrap();
            prop_assert_eq!(back.matrix(), *f.matrix());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ransac_returns_canonical_matrices(cfg in scene(), seed in any::<u64>()) {
        let cfg = SceneConfig { sigma_n: 1.0, outlier_ratio: 0.3, ..cfg };
        let s = generate_scene(&cfg).unwrap();
        let rc = RansacConfig { seed, rfc_principal_points: [cfg.image_center(); 2], ..Default::default() };
        let report = ransac_f(&s.correspondences, &rc).unwrap();
        let m = report.best_f.matrix();
        prop_assert!((m.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(m.determinant().abs() <= 1e-12);
        let largest = m.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        prop_assert!(largest > 0.0);
        prop_assert_eq!(report.inlier_mask.len(), s.correspondences.len());
        let again = ransac_f(&s.correspondences, &rc).unwrap();
        prop_assert_eq!(again.best_f.matrix(), m);
        prop_assert_eq!(again.inlier_mask, report.inlier_mask);
    }
}

#[test]
fn sampson_error_is_symmetric_under_transpose() {
    let cfg = SceneConfig { theta: 8.0, y: 120.0, sigma_n: 2.0, ..Default::default() };
    let s = generate_scene(&cfg).unwrap();
    let ft = s.gt_f.transpose();
    for c in &s.correspondences {
        let swapped = Correspondence::new(c.x2, c.x1);
        let (a, b) = (focal_selfcal::robust::sampson_error(&s.gt_f, c), focal_selfcal::robust::sampson_error(&ft, &swapped));
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}
