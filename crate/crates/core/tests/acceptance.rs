//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any of them fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{grid_oracle, is_common_root, random_config, random_quartic, rel, unmatched};
use focal_selfcal::closed_form::{bougnoux, rfc_check, sturm_equal_focal, translate_f_to_origin};
use focal_selfcal::epipolar::{is_valid_essential, kruppa_derivatives, kruppa_residuals, FundamentalMatrix, Intrinsics, RelativePose};
use focal_selfcal::metrics::{focal_error, maa_focal, maa_pose, mean_average_accuracy, median};
use focal_selfcal::prior::{calibrate, calibrate_equal_focal, CalibrationStatus, CameraPrior, SolverOptions};
use focal_selfcal::robust::{eight_point_refit, hartley_normalization, ransac_f, seven_point, Correspondence, RansacConfig};
use focal_selfcal::solver::{solve_quartic_system, MAX_SOLUTIONS, RESIDUAL_GATE};
use focal_selfcal::synth::{generate_scene, run_sweep, Estimator, SceneConfig, SweepParam, SweepRow, SweepSpec, SyntheticScene};
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = (bool, String);

/// The 100 non-degenerate noiseless scenes shared by criteria 1 to 3.
fn round_trip_scenes() -> Vec<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    while out.len() < 100 {
        if let Ok(s) = generate_scene(&random_config(&mut rng)) {
            out.push(s);
        }
    }
    out
}

fn c1_bougnoux(scenes: &[SyntheticScene]) -> Outcome {
    let ok = scenes
        .iter()
        .filter(|s| {
            let [c1, c2] = s.assumed_pp;
            match translate_f_to_origin(&s.gt_f, &c1, &c2).and_then(|g| bougnoux(&g)) {
                Ok([a, b]) => matches!((a.focal(), b.focal()), (Some(x), Some(y)) if rel(x, 600.0) <= 1e-6 && rel(y, 400.0) <= 1e-6),
                Err(_) => false,
            }
        })
        .count();
    (ok >= 99, format!("{ok}/100 scenes within 1e-6 (need 99)"))
}

fn c2_c3_calibrate(scenes: &[SyntheticScene]) -> (Outcome, Outcome) {
    let options = SolverOptions { epsilon: 1e-6, max_iterations: 50, record_history: true, ..Default::default() };
    let results: Vec<_> = scenes.par_iter().map(|s| (s, calibrate(&s.gt_f, &s.priors(700.0, 400.0), &options))).collect();
    let mut close = 0;
    let mut iterates = 0;
    let mut violations = 0;
    for (s, r) in &results {
        let Ok(r) = r else { continue };
        let [k1, k2] = r.intrinsics;
        if r.converged && rel(k1.focal, 600.0) <= 0.01 && rel(k2.focal, 400.0) <= 0.01 {
            close += 1;
        }
        for rec in r.history.as_deref().unwrap_or_default() {
            iterates += 1;
            if !is_valid_essential(&s.gt_f, &rec.intrinsics[0], &rec.intrinsics[1], 1e-5) {
                violations += 1;
            }
        }
    }
    (
        (close >= 95, format!("{close}/100 converged within 1% (need 95)")),
        (violations == 0 && iterates > 0, format!("{violations} invalid essential matrices over {iterates} iterates")),
    )
}

fn c4_solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<_> = (0..200).map(|_| (random_quartic(&mut rng), random_quartic(&mut rng))).collect();
    let checks: Vec<(bool, bool, usize)> = pairs
        .par_iter()
        .map(|(k1, k2)| {
            let found = solve_quartic_system(k1, k2).unwrap_or_default();
            let all_roots = found.iter().all(|&(x, y)| is_common_root(k1, k2, x, y, RESIDUAL_GATE));
            let inside: Vec<_> = found.iter().copied().filter(|r| r.0.abs() <= 10.0 && r.1.abs() <= 10.0).collect();
            let oracle = grid_oracle(k1, k2, 10.0, 401, RESIDUAL_GATE);
            let matched = unmatched(&oracle, &inside, 1e-6).is_empty() && unmatched(&inside, &oracle, 1e-6).is_empty();
            (matched && all_roots, found.len() <= MAX_SOLUTIONS, oracle.len())
        })
        .collect();
    let matched = checks.iter().filter(|c| c.0).count();
    let capped = checks.iter().all(|c| c.1);
    let roots: usize = checks.iter().map(|c| c.2).sum();
    (
        matched == 200 && capped,
        format!("{matched}/200 root sets match the grid oracle ({roots} oracle roots), at most {MAX_SOLUTIONS} roots: {capped}"),
    )
}

fn c5_jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k1 = Intrinsics::new(rng.random_range(200.0..1500.0), rng.random_range(100.0..500.0), rng.random_range(100.0..400.0));
        let k2 = Intrinsics::new(rng.random_range(200.0..1500.0), rng.random_range(100.0..500.0), rng.random_range(100.0..400.0));
        let rot = Rotation3::from_euler_angles(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = FundamentalMatrix::from_cameras(&k1, &k2, &RelativePose::new(rot.into_inner(), t)).unwrap();
        // evaluate at a point away from the exact intrinsics
        let state: [f64; 6] = std::array::from_fn(|i| {
            let base = [k1.focal, k1.principal_point.x, k1.principal_point.y, k2.focal, k2.principal_point.x, k2.principal_point.y][i];
            base * rng.random_range(0.8..1.2)
        });
        let eval = |s: &[f64; 6]| kruppa_residuals(f.svd(), &Intrinsics::new(s[0], s[1], s[2]), &Intrinsics::new(s[3], s[4], s[5]));
        let jac = kruppa_derivatives(f.svd(), &Intrinsics::new(state[0], state[1], state[2]), &Intrinsics::new(state[3], state[4], state[5]));
        for row in 0..2 {
            let scale = (0..6).map(|c| jac[(row, c)].abs()).fold(0.0, f64::max);
            for col in 0..6 {
                let h = 1e-4 * state[col].abs();
                let (mut plus, mut minus) = (state, state);
                plus[col] += h;
                minus[col] -= h;
                let fd = (eval(&plus)[row] - eval(&minus)[row]) / (2.0 * h);
                worst = worst.max((fd - jac[(row, col)]).abs() / scale);
            }
        }
    }
    (worst <= 1e-6, format!("max relative error {worst:.2e} over 100 instances (limit 1e-6)"))
}

fn f1_median(rows: &[SweepRow], estimator: &str, values: &[f64]) -> f64 {
    let errs: Vec<f64> = rows.iter().filter(|r| r.estimator == estimator && values.contains(&r.value)).map(|r| r.f1_err).collect();
    median(&errs).unwrap_or(f64::NAN)
}

fn c6_degeneracy() -> Outcome {
    let base = SceneConfig { theta: 0.0, y: 0.0, sigma_n: 1.0, sigma_p: 10.0, ..Default::default() };
    let mut pass = true;
    let mut detail = Vec::new();
    for (param, values, far) in [
        (SweepParam::Y, vec![0.0, 25.0, -25.0, 50.0, -50.0, 100.0, -100.0, 200.0, -200.0], [200.0, -200.0]),
        (SweepParam::Theta, vec![0.0, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0, 15.0, -15.0], [15.0, -15.0]),
    ] {
        let spec = SweepSpec {
            param,
            values,
            trials: 100,
            base,
            estimators: vec![Estimator::Ours, Estimator::Bougnoux],
            focal_priors: (700.0, 400.0),
            seed: 6,
            ..Default::default()
        };
        let rows = run_sweep(&spec).expect("sweep");
        let ours0 = f1_median(&rows, "ours", &[0.0]);
        let boug0 = f1_median(&rows, "bougnoux", &[0.0]);
        let ours_far = f1_median(&rows, "ours", &far);
        let ok = ours0 < boug0 && ours0 <= 2.0 * ours_far;
        pass &= ok;
        detail.push(format!(
            "{}: median f1 err at 0 ours {ours0:.4} vs bougnoux {boug0:.4}, ours at ±{} {ours_far:.4}",
            param.name(),
            far[0]
        ));
    }
    (pass, detail.join("; "))
}

fn convergence_fraction(configs: &[SceneConfig]) -> f64 {
    let options = SolverOptions { epsilon: 1e-6, max_iterations: 50, ..Default::default() };
    let converged: usize = configs
        .par_iter()
        .map(|cfg| {
            let Ok(s) = generate_scene(cfg) else { return 0 };
            let rc = RansacConfig { seed: cfg.seed, rfc_enabled: false, ..Default::default() };
            let Ok(report) = ransac_f(&s.correspondences, &rc) else { return 0 };
            match calibrate(&report.best_f, &s.priors(660.0, 440.0), &options) {
                Ok(r) if r.status == CalibrationStatus::Converged => 1,
                _ => 0,
            }
        })
        .sum();
    converged as f64 / configs.len() as f64
}

fn c7_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noisy = |cfg: SceneConfig| SceneConfig { sigma_n: 1.0, sigma_p: 10.0, ..cfg };
    let regular: Vec<_> = (0..1000).map(|_| noisy(random_config(&mut rng))).collect();
    let degenerate: Vec<_> = (0..1000).map(|_| noisy(SceneConfig { theta: 0.0, y: 0.0, seed: rng.random(), ..Default::default() })).collect();
    let (a, b) = (convergence_fraction(&regular), convergence_fraction(&degenerate));
    (
        a >= 0.9 && b < a,
        format!("converged within 50 iterations: non-degenerate {:.1}% (need 90%), degenerate {:.1}% (need lower)", 100.0 * a, 100.0 * b),
    )
}

fn c8_rfc() -> Outcome {
    // (a) equivalence on noisy least-squares estimates, some from contaminated data
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut agree, mut tested, mut rejected) = (0, 0, 0);
    while tested < 1000 {
        let cfg = SceneConfig { sigma_n: 1.0, outlier_ratio: rng.random_range(0.0..0.6), n_points: 20, ..random_config(&mut rng) };
        let Ok(s) = generate_scene(&cfg) else { continue };
        let Ok(f) = eight_point_refit(&s.correspondences) else { continue };
        let c = cfg.image_center();
        let Ok(g) = translate_f_to_origin(&f, &c, &c) else { continue };
        let Ok([a, b]) = bougnoux(&g) else { continue };
        tested += 1;
        let rfc = rfc_check(&g);
        rejected += usize::from(!rfc);
        agree += usize::from(rfc == (a.value() > 0.0 && b.value() > 0.0));
    }
    let part_a = agree == tested;

    // (b) effect inside RANSAC
    let scenes: Vec<_> = (0..50)
        .map(|i| SceneConfig { sigma_n: 1.0, outlier_ratio: 0.3, seed: 800 + i, ..random_config(&mut rng) })
        .collect();
    let runs: Vec<_> = scenes
        .par_iter()
        .map(|cfg| {
            let s = generate_scene(cfg).expect("scene");
            let rc = RansacConfig { seed: cfg.seed, rfc_principal_points: [cfg.image_center(); 2], ..Default::default() };
            let on = ransac_f(&s.correspondences, &RansacConfig { rfc_enabled: true, ..rc }).expect("ransac");
            let off = ransac_f(&s.correspondences, &RansacConfig { rfc_enabled: false, ..rc }).expect("ransac");
            let truth = s.inlier_mask.iter().filter(|m| **m).count() as f64;
            let recall = |mask: &[bool]| mask.iter().zip(&s.inlier_mask).filter(|(a, b)| **a && **b).count() as f64 / truth;
            (on.models_rejected_rfc, on.score_evaluations, off.score_evaluations, recall(&on.inlier_mask), recall(&off.inlier_mask))
        })
        .collect();
    let with_rejections: Vec<_> = runs.iter().filter(|r| r.0 > 0).collect();
    let cheaper = with_rejections.iter().filter(|r| r.1 < r.2).count();
    let recall_kept = runs.iter().filter(|r| r.3 >= 0.98 * r.4).count();
    let part_b = cheaper == with_rejections.len() && recall_kept == runs.len();
    (
        part_a && part_b,
        format!(
            "(a) {agree}/{tested} agree ({rejected} rejected by RFC); (b) fewer evaluations in {cheaper}/{} scenes with rejections, recall kept within 2% in {recall_kept}/50",
            with_rejections.len()
        ),
    )
}

fn seven_point_gate_holds(sample: &[Correspondence], models: &[FundamentalMatrix]) -> bool {
    let t1 = hartley_normalization(sample.iter().map(|c| &c.x1));
    let t2 = hartley_normalization(sample.iter().map(|c| &c.x2));
    let (i1, i2) = (t1.try_inverse().unwrap(), t2.try_inverse().unwrap());
    models.iter().all(|f| {
        let m = i2.transpose() * f.matrix() * i1;
        let m = m / m.norm();
        m.determinant().abs() <= 1e-9
            && sample.iter().all(|c| {
                let p = t1 * Vector3::new(c.x1.x, c.x1.y, 1.0);
                let q = t2 * Vector3::new(c.x2.x, c.x2.y, 1.0);
                q.dot(&(m * p)).abs() <= 1e-9
            })
    })
}

fn c9_seven_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut gate_ok = true;
    let mut models = 0;
    for _ in 0..1000 {
        let sample: Vec<_> = (0..7)
            .map(|_| {
                let mut p = || nalgebra::Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
                Correspondence::new(p(), p())
            })
            .collect();
        if let Ok(fs) = seven_point(&sample) {
            models += fs.len();
            gate_ok &= seven_point_gate_holds(&sample, &fs);
        }
    }
    let mut found = 0;
    for _ in 0..1000 {
        let s = loop {
            if let Ok(s) = generate_scene(&SceneConfig { n_points: 7, ..random_config(&mut rng) }) {
                break s;
            }
        };
        if let Ok(fs) = seven_point(&s.correspondences) {
            models += fs.len();
            gate_ok &= seven_point_gate_holds(&s.correspondences, &fs);
            if fs.iter().any(|f| (f.matrix() - s.gt_f.matrix()).norm() <= 1e-8) {
                found += 1;
            }
        }
    }
    (
        gate_ok && found >= 990,
        format!("gate held on all {models} models: {gate_ok}; ground truth among roots in {found}/1000 (need 990)"),
    )
}

fn c10_equal_focal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let options = SolverOptions::default();
    let (mut close, mut exact, mut n) = (0, 0, 0);
    while n < 100 {
        let Ok(s) = generate_scene(&SceneConfig { f2: 600.0, ..random_config(&mut rng) }) else { continue };
        n += 1;
        let c = s.assumed_pp[0];
        if let Ok(r) = calibrate_equal_focal(&s.gt_f, &CameraPrior::new(700.0, c.x, c.y), &options) {
            if r.converged && r.intrinsics.iter().all(|k| rel(k.focal, 600.0) <= 0.01) {
                close += 1;
            }
        }
        let sturm = translate_f_to_origin(&s.gt_f, &c, &c).and_then(|g| sturm_equal_focal(&g));
        if matches!(sturm, Ok(f) if rel(f, 600.0) <= 1e-6) {
            exact += 1;
        }
    }
    let errs: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let cfg = SceneConfig { theta: 0.0, y: 0.0, f2: 600.0, sigma_n: 1.0, sigma_p: 10.0, seed: 1000 + i, ..Default::default() };
            let s = generate_scene(&cfg).expect("scene");
            let rc = RansacConfig { seed: cfg.seed, rfc_enabled: false, ..Default::default() };
            let Ok(report) = ransac_f(&s.correspondences, &rc) else { return (1.0, 1.0) };
            let [c1, c2] = s.assumed_pp;
            let ours = calibrate_equal_focal(&report.best_f, &CameraPrior::new(700.0, c1.x, c1.y), &options)
                .map_or(1.0, |r| focal_error(r.intrinsics[0].focal, 600.0));
            let sturm = translate_f_to_origin(&report.best_f, &c1, &c2)
                .and_then(|g| sturm_equal_focal(&g))
                .map_or(1.0, |f| focal_error(f, 600.0));
            (ours, sturm)
        })
        .collect();
    let ours = median(&errs.iter().map(|e| e.0).collect::<Vec<_>>()).unwrap();
    let sturm = median(&errs.iter().map(|e| e.1).collect::<Vec<_>>()).unwrap();
    (
        close >= 95 && exact == 100 && ours <= sturm,
        format!("{close}/100 within 1% (need 95); Sturm exact in {exact}/100; at C(0,0) median err ours {ours:.4} vs Sturm {sturm:.4}"),
    )
}

fn c11_metrics() -> Outcome {
    let fixtures = focal_error(600.0, 600.0) == 0.0
        && focal_error(300.0, 600.0) == 0.5
        && focal_error(600.0, 300.0) == 0.5
        && focal_error(750.0, 600.0) == 0.2
        && mean_average_accuracy(&[0.0; 4], 10.0, 10) == 1.0
        && mean_average_accuracy(&[12.0, 40.0], 10.0, 10) == 0.0
        && mean_average_accuracy(&[2.5, 7.5], 10.0, 10) == 0.55
        && (maa_pose(&[0.5, 1.5, 25.0], 10.0) - 19.0 / 30.0).abs() <= 1e-15
        && maa_focal(&[0.005, 0.3], 0.1) == 0.5
        && mean_average_accuracy(&[], 10.0, 10) == 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut monotone = 0;
    for _ in 0..1000 {
        let errors: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0.0..25.0)).collect();
        let base = mean_average_accuracy(&errors, 10.0, 10);
        let mut worse = errors.clone();
        let i = rng.random_range(0..errors.len());
        worse[i] += rng.random_range(0.0..10.0);
        let wider = mean_average_accuracy(&errors, 20.0, 20);
        if mean_average_accuracy(&worse, 10.0, 10) <= base + 1e-15 && wider >= base - 1e-15 {
            monotone += 1;
        }
    }
    (fixtures && monotone == 1000, format!("hand-computed fixtures exact: {fixtures}; monotone under {monotone}/1000 perturbations"))
}

fn report(id: u32, name: &str, limit: Duration, start: Instant, (pass, detail): Outcome, failures: &mut u32) {
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    if !ok {
        *failures += 1;
    }
    println!(
        "criterion {id:>2} {} {name}: {detail} [{:.1}s, limit {}s{}]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", too slow" }
    );
}

fn main() -> ExitCode {
    let mut failures = 0;
    let secs = Duration::from_secs;

    let t = Instant::now();
    let scenes = round_trip_scenes();
    report(1, "closed-form round trip", secs(5), t, c1_bougnoux(&scenes), &mut failures);

    let t = Instant::now();
    let (c2, c3) = c2_c3_calibrate(&scenes);
    report(2, "iterative round trip", secs(60), t, c2, &mut failures);
    report(3, "essential matrix at every iterate", secs(60), t, c3, &mut failures);

    let t = Instant::now();
    report(4, "quartic solver vs grid oracle", secs(120), t, c4_solver_oracle(), &mut failures);
    let t = Instant::now();
    report(5, "Kruppa Jacobian vs finite differences", secs(5), t, c5_jacobian(), &mut failures);
    let t = Instant::now();
    report(6, "behaviour at coplanar principal axes", secs(15 * 60), t, c6_degeneracy(), &mut failures);
    let t = Instant::now();
    report(7, "convergence rate", secs(10 * 60), t, c7_convergence(), &mut failures);
    let t = Instant::now();
    report(8, "RFC equivalence and effect", secs(5 * 60), t, c8_rfc(), &mut failures);
    let t = Instant::now();
    report(9, "seven-point solver", secs(30), t, c9_seven_point(), &mut failures);
    let t = Instant::now();
    report(10, "equal focal lengths", secs(5 * 60), t, c10_equal_focal(), &mut failures);
    let t = Instant::now();
    report(11, "metrics", secs(5), t, c11_metrics(), &mut failures);

    if failures == 0 {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
