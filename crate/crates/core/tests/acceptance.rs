//! Acceptance checks; one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use handsoff::analysis::{l0_oracle, min_energy_baseline, sparsity, verify_equivalence, DEFAULT_THRESHOLD};
use handsoff::cli::{cmd_solve, cmd_sweep, cmd_verify_equivalence, Command, RunConfig, SweepGrid, EXIT_DISAGREE};
use handsoff::discretize::{build_reachability, matrix_exponential, zoh_discretize};
use handsoff::solver::{nonzeros, solve, SolveOptions, SolveStatus, WeightMatrix};
use handsoff::ControlProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let out = f();
    let elapsed = started.elapsed();
    let pass = out.pass && elapsed <= budget;
    println!(
        "{} [{id}] {name}: {} ({:.3} s, budget {:.3} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    pass
}

fn discretization_exactness() -> Outcome {
    let plant = double_integrator();
    let mut worst = 0.0f64;
    for h in [0.01, 0.1, 1.0] {
        let (ad, bd) = zoh_discretize(&plant, h).unwrap();
        let ad_ref = DMatrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0]);
        let bd_ref = DMatrix::from_row_slice(2, 1, &[h * h / 2.0, h]);
        worst = worst.max((ad - ad_ref).abs().max()).max((bd - bd_ref).abs().max());
    }
    Outcome {
        pass: worst <= 1e-14,
        detail: format!("max abs error {worst:.2e}"),
    }
}

fn taylor(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.abs().row_sum().max()
}

fn exponential_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut m = random_matrix(&mut rng, 4, 4);
        m *= rng.gen_range(0.01..1.0) / norm1(&m);
        let e = matrix_exponential(&m).unwrap();
        let t = taylor(&m, 50);
        worst = worst.max(norm1(&(e - &t)) / norm1(&t));
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("worst relative error {worst:.2e} over 100 matrices"),
    }
}

fn solver_certification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    let (mut worst_err, mut worst_gap) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=2);
        let steps = rng.gen_range(5..=200);
        let horizon = rng.gen_range(1.0..5.0);
        let a = random_matrix(&mut rng, n, n) * (1.5 / n as f64);
        let plant = handsoff::PlantModel::new(a, random_matrix(&mut rng, n, m)).unwrap();
        let p = reachable_problem(&mut rng, plant, horizon, steps, 0.8);
        let r = solve(&p, &opts).unwrap();
        let x0n = p.x0.norm();
        let err = r.terminal_error / (1.0 + x0n);
        worst_err = worst_err.max(err);
        worst_gap = worst_gap.max(r.gap);
        let ok = r.feasibility_slack > 0.0
            && r.status == SolveStatus::Optimal
            && r.signal.max_abs() <= 1.0 + 1e-9
            && err <= 1e-6
            && r.gap <= 1e-8;
        if !ok {
            failures.push(format!("#{i} {} n={n} m={m} N={steps}", r.status.as_str()));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{} of 50 optimal and certified; worst terminal error {worst_err:.1e}, worst gap {worst_gap:.1e} {:?}",
            50 - failures.len(),
            failures
        ),
    }
}

fn equivalence_small() -> Outcome {
    let opts = SolveOptions::default();
    let di = ControlProblem::with_unit_weights(double_integrator(), DVector::from_vec(vec![1.0, 0.0]), 5.0, 8)
        .unwrap();
    let r = verify_equivalence(&di, &opts).unwrap();
    let mut notes = vec![format!("double integrator L1 {} / L0 {}", r.l1_support, r.l0_support)];
    let mut pass = r.agree && r.l1_support == r.l0_support;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut agreed, mut explained) = (0, 0);
    for i in 0..20 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let steps = rng.gen_range(n.max(3)..=16 / m);
        let horizon = rng.gen_range(1.0..4.0);
        let a = random_matrix(&mut rng, n, n);
        let plant = handsoff::PlantModel::new(a, random_matrix(&mut rng, n, m)).unwrap();
        let p = reachable_problem(&mut rng, plant, horizon, steps, 0.6);
        let r = verify_equivalence(&p, &opts).unwrap();
        if r.agree {
            agreed += 1;
        } else if r.optimal_face_dim > 0 {
            explained += 1;
            notes.push(format!("#{i} disagrees with face dimension {}", r.optimal_face_dim));
        } else {
            pass = false;
            notes.push(format!("#{i} unexplained: L1 {} / L0 {}", r.l1_support, r.l0_support));
        }
    }
    notes.push(format!("random: {agreed} agree, {explained} explained by non-normality"));
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn non_normal_instance() -> Outcome {
    let path = testdata("scalar_integrator.json");
    let p = handsoff::model::read_problem(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let dp = build_reachability(&p).unwrap();
    let w = WeightMatrix::new(p.weights.clone()).unwrap();
    let l0 = l0_oracle(&dp, &w, dp.steps * dp.m()).unwrap().min_support;
    let polished = verify_equivalence(&p, &SolveOptions::default()).unwrap();

    let mut cfg = RunConfig::new(Command::VerifyEquivalence, &path);
    cfg.solve.polish = false;
    let out = cmd_verify_equivalence(&cfg).unwrap();
    let doc: Value = serde_json::from_str(&out.document).unwrap();
    let exposed = doc["l1_support"].as_u64() == Some(8) && doc["l0_support"].as_u64() == Some(4);

    Outcome {
        pass: l0 == 4 && polished.l1_support == 4 && polished.agree && exposed && out.exit_code == EXIT_DISAGREE,
        detail: format!(
            "l0 {l0}, polished L1 {}, unpolished {} (document l1_support {}), no-polish exit {}",
            polished.l1_support, polished.unpolished_support, doc["l1_support"], out.exit_code
        ),
    }
}

fn hands_off_contrast() -> Outcome {
    let p = ControlProblem::with_unit_weights(double_integrator(), DVector::from_vec(vec![1.0, 0.0]), 10.0, 100)
        .unwrap();
    let r = solve(&p, &SolveOptions::default()).unwrap();
    let dp = build_reachability(&p).unwrap();
    let l2 = min_energy_baseline(&dp).unwrap();
    let l1_ratio = sparsity(&r.signal, DEFAULT_THRESHOLD).hands_off_ratio;
    let l2_ratio = sparsity(&l2.signal, DEFAULT_THRESHOLD).hands_off_ratio;
    let distance = |v: f64| [-1.0, 0.0, 1.0].iter().map(|t| (v - t).abs()).fold(f64::INFINITY, f64::min);
    let off: Vec<(usize, f64)> = r
        .signal
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| distance(**v) > 1e-4)
        .map(|(k, v)| (k, *v))
        .collect();
    Outcome {
        pass: r.status == SolveStatus::Optimal && l1_ratio > l2_ratio && off.is_empty(),
        detail: format!(
            "hands-off L1 {l1_ratio:.2} vs L2 {l2_ratio:.2}; J1 {:.10}; entries off {{-1,0,1}} by > 1e-4: {off:?}",
            r.objective
        ),
    }
}

fn horizon_monotonicity() -> Outcome {
    let mut cfg = RunConfig::new(Command::Sweep, testdata("double_integrator.json"));
    cfg.sweep = Some(SweepGrid::Horizons(vec![5.0, 7.5, 10.0]));
    let out = cmd_sweep(&cfg).unwrap();
    let doc: Value = serde_json::from_str(&out.document).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let j: Vec<f64> = rows.iter().filter_map(|r| r["objective"].as_f64()).collect();
    let steps: Vec<u64> = rows.iter().filter_map(|r| r["steps"].as_u64()).collect();
    let all_optimal = rows.iter().all(|r| r["status"] == "optimal");
    Outcome {
        pass: all_optimal && j.len() == 3 && doc["j1_nonincreasing"] == Value::Bool(true) && steps == [50, 75, 100],
        detail: format!("N {steps:?}, J1 {j:?}"),
    }
}

fn scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let plant = random_stable_plant(&mut rng, 4, 2, 0.1);
    let p = reachable_problem(&mut rng, plant, 10.0, 1000, 0.8);
    let r = solve(&p, &SolveOptions::default()).unwrap();
    Outcome {
        pass: r.status == SolveStatus::Optimal,
        detail: format!(
            "{} in {} iterations, support {} of 2000",
            r.status.as_str(),
            r.iterations,
            nonzeros(r.signal.values(), DEFAULT_THRESHOLD)
        ),
    }
}

fn strip_wall_time(doc: &str) -> Value {
    let mut v: Value = serde_json::from_str(doc).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

fn golden() -> Outcome {
    let cfg = RunConfig::new(Command::Solve, testdata("double_integrator.json"));
    let first = cmd_solve(&cfg).unwrap();
    let second = cmd_solve(&cfg).unwrap();
    let golden = std::fs::read_to_string(testdata("double_integrator.result.json")).unwrap();
    let (a, b, g) = (
        strip_wall_time(&first.document),
        strip_wall_time(&second.document),
        strip_wall_time(&golden),
    );
    Outcome {
        pass: a == b && a == g && first.exit_code == 0,
        detail: format!("runs identical: {}, matches committed document: {}", a == b, a == g),
    }
}

fn main() {
    let ms = Duration::from_millis;
    let s = Duration::from_secs;
    let results = [
        check(1, "discretization exactness", ms(1), discretization_exactness),
        check(2, "exponential oracle", s(1), exponential_oracle),
        check(3, "solver feasibility and certification", s(30), solver_certification),
        check(4, "L1/L0 equivalence at desk scale", s(120), equivalence_small),
        check(5, "non-normal instance behavior", s(5), non_normal_instance),
        check(6, "hands-off contrast and bang-off-bang", s(5), hands_off_contrast),
        check(7, "horizon monotonicity", s(10), horizon_monotonicity),
        check(8, "scale n=4 m=2 N=1000", s(10), scale),
        check(9, "determinism and golden document", s(10), golden),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
