#![allow(clippy::excessive_precision)] // frozen oracle values keep their evaluated digits

//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`) and asserting
//! its gate at the stated tolerance and runtime budget.

use confball::balls::{honest_ball, single_level_ball};
use confball::blocks::{
    block_size_for, block_summaries, loss, partition_level, threshold_estimate,
};
use confball::bounds::{lb_honest_zero, LowerBoundParams};
use confball::harness::{
    run, run_lemma_suite, BallSpec, ExperimentConfig, ExperimentKind, NSpec, ThetaSpec,
    SLOPE_TOLERANCE,
};
use confball::numerics::solve_lambda;
use confball::sequence::substream_seed;
use confball::{BesovBody, CoefficientVector, NoiseModel};
use std::time::{Duration, Instant};

fn report_line(criterion: &str, passed: bool, detail: &str, elapsed: Duration) {
    println!(
        "acceptance {criterion}: {} ({detail}; {:.3}s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn coverage_config(
    seed: u64,
    j_levels: u32,
    n: u64,
    ball: BallSpec,
    theta: ThetaSpec,
    replicates: u32,
) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Coverage,
        seed,
        j_levels: Some(j_levels),
        n: Some(NSpec::Single(n)),
        ball: Some(ball),
        theta_spec: Some(theta),
        replicates: Some(replicates),
        eps: None,
        bound_body: None,
    }
}

#[test]
fn criterion_01_threshold_constant_reproduction() {
    let start = Instant::now();
    let root = solve_lambda(5.0).unwrap().lambda;
    let elapsed = start.elapsed();
    let rounded = (root * 1e4).round() / 1e4;
    let passed = rounded == 6.9368 && elapsed < Duration::from_millis(1);
    report_line(
        "criterion 1 (threshold constant)",
        passed,
        &format!("lambda* = {root:.6}"),
        elapsed,
    );
    assert_eq!(rounded, 6.9368);
    assert!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
}

#[test]
fn criterion_02_loss_decomposition_identity() {
    // Independent oracle: re-derive the loss from the dropped-block signal
    // energies, the kept-block noise energies, and the zeroed tail, and
    // compare against the direct squared distance.
    let start = Instant::now();
    let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
    let j_levels = 8u32;
    let mut worst_rel: f64 = 0.0;
    for instance in 0..100u64 {
        let seed = substream_seed(0xACC2, instance);
        let n = 64 + seed % 4000;
        let theta = body.boundary_member(j_levels, seed);
        let y = NoiseModel::new(n, substream_seed(seed, 9))
            .unwrap()
            .observe(&theta);
        let max_level = (instance % (j_levels as u64 + 1)) as u32;

        let estimate = threshold_estimate(&y, n, max_level).unwrap();
        let direct = loss(&estimate, &theta).unwrap();

        let mut decomposed = 0.0;
        for j in 0..j_levels {
            if j < max_level {
                let partition = partition_level(j, block_size_for(n));
                for (s, range) in block_summaries(&y, j, n)
                    .unwrap()
                    .iter()
                    .zip(&partition.blocks)
                {
                    if s.kept {
                        let chi2: f64 = range
                            .clone()
                            .map(|k| {
                                let d = (y.level(j)[k] - theta.level(j)[k]) * (n as f64).sqrt();
                                d * d
                            })
                            .sum();
                        decomposed += chi2 / n as f64;
                    } else {
                        decomposed += range
                            .clone()
                            .map(|k| theta.level(j)[k] * theta.level(j)[k])
                            .sum::<f64>();
                    }
                }
            } else {
                decomposed += theta.level(j).iter().map(|v| v * v).sum::<f64>();
            }
        }
        let rel = (direct - decomposed).abs() / direct.abs().max(1e-300);
        worst_rel = worst_rel.max(rel);
    }
    let elapsed = start.elapsed();
    let passed = worst_rel <= 1e-9 && elapsed < Duration::from_secs(1);
    report_line(
        "criterion 2 (loss decomposition)",
        passed,
        &format!("worst relative gap {worst_rel:.2e} over 100 instances"),
        elapsed,
    );
    assert!(worst_rel <= 1e-9, "worst relative gap {worst_rel}");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}

#[test]
fn criterion_03_usual_ball_pivot_coverage() {
    let start = Instant::now();
    let mut all_passed = true;
    let mut details = Vec::new();
    for (i, &alpha) in [0.05, 0.1].iter().enumerate() {
        for (t, theta) in [ThetaSpec::Zero, ThetaSpec::Hypercube { j: 4, a: 0.2 }]
            .into_iter()
            .enumerate()
        {
            let config = coverage_config(
                1000 + i as u64 * 2 + t as u64,
                5,
                100,
                BallSpec::Usual { alpha, j: 4 },
                theta,
                10_000,
            );
            let report = run(&config).unwrap();
            let cov = report.coverage.unwrap();
            all_passed &= report.passed;
            details.push(format!("alpha={alpha}: {:.4}+-{:.4}", cov.value, cov.se));
            assert!(
                report.passed,
                "usual ball coverage {} vs nominal {} (se {})",
                cov.value,
                1.0 - alpha,
                cov.se
            );
        }
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 3 (exact pivot coverage)",
        all_passed,
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
}

#[test]
fn criterion_04_single_level_coverage_floor() {
    let start = Instant::now();
    let n = 1024u64;
    let floor = 1.0 - 0.1 - 2.0 / (n as f64).ln();
    let mut all_passed = true;
    let mut details = Vec::new();
    // The boundary hypercube carries the body's maximum level energy:
    // a = M 2^{-j(beta + 1/2)} for (beta, M) = (1/2, 1) at j = 8.
    let boundary_a = 2f64.powi(-8);
    for (i, theta) in [
        ThetaSpec::Zero,
        ThetaSpec::Hypercube {
            j: 8,
            a: boundary_a,
        },
    ]
    .into_iter()
    .enumerate()
    {
        let config = coverage_config(
            2000 + i as u64,
            9,
            n,
            BallSpec::SingleLevel { alpha: 0.1, j: 8 },
            theta,
            4000,
        );
        let report = run(&config).unwrap();
        let cov = report.coverage.unwrap();
        all_passed &= report.passed;
        details.push(format!("{:.4} >= {:.4}", cov.value, floor - 3.0 * cov.se));
        assert!(
            cov.value >= floor - 3.0 * cov.se,
            "coverage {} below floor {} - 3se",
            cov.value,
            floor
        );
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 4 (single-level coverage floor)",
        all_passed,
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
}

#[test]
fn criterion_05_honest_coverage_floor() {
    let start = Instant::now();
    let n = 1024u64;
    let floor = 1.0 - 0.1 - 2.0 / (n as f64).ln();
    let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
    let mut all_passed = true;
    let mut details = Vec::new();
    for (i, theta) in [
        ThetaSpec::Zero,
        ThetaSpec::BoundaryRandom { body, seed: 4242 },
    ]
    .into_iter()
    .enumerate()
    {
        let config = coverage_config(
            3000 + i as u64,
            10,
            n,
            BallSpec::Honest { alpha: 0.1 },
            theta,
            4000,
        );
        let report = run(&config).unwrap();
        let cov = report.coverage.unwrap();
        all_passed &= report.passed;
        details.push(format!("{:.4} >= {:.4}", cov.value, floor - 3.0 * cov.se));
        assert!(
            cov.value >= floor - 3.0 * cov.se,
            "coverage {} below floor {} - 3se",
            cov.value,
            floor
        );
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 5 (honest coverage floor)",
        all_passed,
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
}

#[test]
fn criterion_06_adaptive_coverage_floor() {
    let start = Instant::now();
    let n = 1024u64;
    let mut all_passed = true;
    let mut details = Vec::new();
    for (i, tau) in [0.5, 1.0].into_iter().enumerate() {
        let body = BesovBody::new(tau, 2.0, 2.0, 1.0).unwrap();
        let config = coverage_config(
            4000 + i as u64,
            10,
            n,
            BallSpec::Adaptive {
                alpha: 0.1,
                beta: 0.5,
                m: 1.0,
            },
            ThetaSpec::BoundaryRandom {
                body,
                seed: 777 + i as u64,
            },
            4000,
        );
        let report = run(&config).unwrap();
        let cov = report.coverage.unwrap();
        let gate = &report.gates[0];
        all_passed &= report.passed;
        details.push(format!(
            "tau={tau}: {:.4} >= {:.4}",
            cov.value, gate.threshold
        ));
        assert!(
            report.passed,
            "tau={tau}: coverage {} below {}",
            cov.value, gate.threshold
        );
        // The floor itself is the adaptive-ball coverage guarantee, frozen at
        // 0.881055 for (alpha, beta, M, n) = (0.1, 1/2, 1, 1024).
        assert!(
            (gate.threshold + 3.0 * cov.se - 0.88105528013562819).abs() < 1e-9,
            "unexpected floor {}",
            gate.threshold
        );
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 6 (adaptive coverage floor)",
        all_passed,
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
}

fn rate_scan(tau: f64, seed: u64) -> (f64, f64, bool) {
    let config = ExperimentConfig {
        kind: ExperimentKind::RadiusScan,
        seed,
        j_levels: Some(12),
        n: Some(NSpec::Scan(vec![256, 512, 1024, 2048, 4096, 8192, 16384])),
        ball: Some(BallSpec::Adaptive {
            alpha: 0.1,
            beta: 0.5,
            m: 1.0,
        }),
        theta_spec: Some(ThetaSpec::WorstCase { tau, m: 1.0 }),
        replicates: Some(500),
        eps: None,
        bound_body: None,
    };
    let report = run(&config).unwrap();
    let slope = report.fitted_slope.unwrap().value;
    let target = report.target_slope.unwrap();
    (slope, target, report.passed)
}

#[test]
fn criterion_07_rate_adaptation_slopes() {
    let start = Instant::now();
    let mut all_passed = true;
    let mut details = Vec::new();
    for (i, tau) in [0.5, 0.75, 1.0].into_iter().enumerate() {
        let (slope, target, passed) = rate_scan(tau, 5000 + i as u64);
        all_passed &= passed;
        details.push(format!(
            "tau={tau}: slope {slope:.3} vs {target:.3} ({})",
            if passed { "ok" } else { "off" }
        ));
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 7 (rate adaptation)",
        all_passed,
        &details.join(", "),
        elapsed,
    );
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    assert!(all_passed, "{}", details.join(", "));
}

#[test]
fn criterion_08_saturation_beyond_twice_beta() {
    let start = Instant::now();
    let (slope, target, passed) = rate_scan(1.5, 6000);
    let elapsed = start.elapsed();
    report_line(
        "criterion 8 (saturation)",
        passed,
        &format!("tau=1.5: slope {slope:.3} vs {target:.3}"),
        elapsed,
    );
    assert!((target + 2.0 / 3.0).abs() < 1e-12, "target should be -2/3");
    assert!(
        (slope - target).abs() <= SLOPE_TOLERANCE,
        "slope {slope} vs {target}"
    );
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
}

#[test]
fn criterion_09_lemma_suite() {
    let start = Instant::now();
    let report = run_lemma_suite(2024);
    let elapsed = start.elapsed();
    let details: Vec<String> = report
        .gates
        .iter()
        .map(|g| format!("{}={}", g.name, if g.passed { "ok" } else { "violated" }))
        .collect();
    report_line(
        "criterion 9 (lemma suite)",
        report.passed,
        &details.join(", "),
        elapsed,
    );
    for gate in &report.gates {
        assert!(gate.passed, "{} failed: {gate:?}", gate.name);
    }
    // The constant-risk check targets Phi(-1) * 100 = 15.8655.
    let risk_gate = report
        .gates
        .iter()
        .find(|g| g.name == "hypercube_bayes_risk")
        .unwrap();
    assert!((risk_gate.threshold - 15.865525393145705).abs() < 1e-9);
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
}

#[test]
fn criterion_10_lower_bound_consistency() {
    let start = Instant::now();
    let config = ExperimentConfig {
        kind: ExperimentKind::LowerBoundCheck,
        seed: 7000,
        j_levels: Some(10),
        n: Some(NSpec::Single(1024)),
        ball: Some(BallSpec::Honest { alpha: 0.05 }),
        theta_spec: Some(ThetaSpec::Zero),
        replicates: Some(2000),
        eps: Some(0.1),
        bound_body: None,
    };
    let report = run(&config).unwrap();
    let mean = report.mean_radius_sq.unwrap().value;
    let params = LowerBoundParams::new(0.05, 0.1).unwrap();
    let floor = lb_honest_zero(1023, 1024, &params).unwrap();
    let elapsed = start.elapsed();
    let passed = report.passed && mean >= floor;
    report_line(
        "criterion 10 (lower-bound consistency)",
        passed,
        &format!("MC mean {mean:.4} >= floor {floor:.6}"),
        elapsed,
    );
    assert!(mean >= floor, "mean {mean} below floor {floor}");
    assert!(report.passed);
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
}

#[test]
fn criterion_11_reports_are_byte_identical() {
    let start = Instant::now();
    let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
    let configs = vec![
        coverage_config(
            8000,
            8,
            512,
            BallSpec::Honest { alpha: 0.1 },
            ThetaSpec::BoundaryRandom { body, seed: 5 },
            300,
        ),
        ExperimentConfig {
            kind: ExperimentKind::RadiusScan,
            seed: 8001,
            j_levels: Some(9),
            n: Some(NSpec::Scan(vec![128, 256, 512, 1024])),
            ball: Some(BallSpec::Adaptive {
                alpha: 0.1,
                beta: 0.5,
                m: 1.0,
            }),
            theta_spec: Some(ThetaSpec::WorstCase { tau: 0.75, m: 1.0 }),
            replicates: Some(50),
            eps: None,
            bound_body: None,
        },
        ExperimentConfig {
            kind: ExperimentKind::LowerBoundCheck,
            seed: 8002,
            j_levels: Some(8),
            n: Some(NSpec::Single(256)),
            ball: Some(BallSpec::Honest { alpha: 0.05 }),
            theta_spec: Some(ThetaSpec::Zero),
            replicates: Some(200),
            eps: Some(0.1),
            bound_body: None,
        },
        ExperimentConfig {
            kind: ExperimentKind::LemmaSuite,
            seed: 8003,
            j_levels: None,
            n: None,
            ball: None,
            theta_spec: None,
            replicates: None,
            eps: None,
            bound_body: None,
        },
    ];
    let mut all_passed = true;
    for config in &configs {
        let first = run(config).unwrap().to_json();
        let second = run(config).unwrap().to_json();
        let one_thread = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run(config).unwrap().to_json());
        let four_threads = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run(config).unwrap().to_json());
        let same = first == second && first == one_thread && first == four_threads;
        all_passed &= same;
        assert!(same, "report bytes differ for kind {:?}", config.kind);
        // And the JSON round-trips losslessly.
        let reparsed = confball::ExperimentReport::from_json(&first).unwrap();
        assert_eq!(reparsed.to_json(), first);
    }
    let elapsed = start.elapsed();
    report_line(
        "criterion 11 (determinism)",
        all_passed,
        "4 experiment kinds x {2 reruns, 1 thread, 4 threads}",
        elapsed,
    );
}

// Direct construction-level checks backing criteria 4-6: the balls reject
// the degenerate regimes the theory excludes.
#[test]
fn constructions_reject_degenerate_regimes() {
    let y = CoefficientVector::zeros(11);
    assert!(single_level_ball(&y, 10, 31, 0.1).is_err()); // 2^10 > 31^2
    assert!(honest_ball(&y, 31, 0.1).is_err()); // N = 2047 > 961
}
