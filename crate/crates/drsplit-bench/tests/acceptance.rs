//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see the lines for passing criteria).
//!
//! Criteria 7-9 reproduce the reference benchmark protocol at desk scale.
//! Where a measured number misses its pinned threshold, the test states the
//! measurement and fails honestly; the update rules themselves are pinned to
//! the published formulas by the equivalence criteria, and the benchmark
//! accuracy is the plain objective at the consensus projection of the
//! scenario solutions (the deployable point).

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use drsplit::drs::{
    assembled_residual, drs_step, estimate_linear_rate, residual, DrsParams, DrsState,
    SplitProblem,
};
use drsplit::hedging::{ph_equivalence_check, ScenarioProblem};
use drsplit::numeric::rel_gap;
use drsplit::oracle::{
    AbsValue, AsProx, Indicator, ProxFn, Quadratic, SmoothFn, SquaredDistance, WeaklyConvexAbs,
    Zero,
};
use drsplit::penalty::{equivalence_check, PenalizedProblem};
use drsplit::phase::{solve_subproblem_closed_form, PhaseRetrievalInstance, SubproblemInput};
use drsplit::set::{replicate_block, ConvexSet};

use drsplit_bench::config::{BenchConfig, Method};
use drsplit_bench::report::{accuracy_table, performance_profile, tables_csv, TABLE_THRESHOLDS};
use drsplit_bench::runner::run_benchmark;
use drsplit_bench::BenchOutcome;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------------------
// Criteria 1-3: per-iteration envelope inequalities across a problem suite.
// ---------------------------------------------------------------------------

struct Case {
    name: &'static str,
    problem: SplitProblem,
    s0: Vec<f64>,
}

fn problem_suite() -> Vec<Case> {
    let mut cases = vec![
        Case {
            name: "quadratic+zero",
            problem: SplitProblem::new(
                Arc::new(Quadratic::centered(1.0, 1)),
                Arc::new(AsProx(Zero)),
            ),
            s0: vec![1.0],
        },
        Case {
            name: "convex quadratic pair",
            problem: SplitProblem::new(
                Arc::new(Quadratic::new(1.0, vec![1.0])),
                Arc::new(AsProx(Quadratic::centered(1.0, 1))),
            ),
            s0: vec![-2.0],
        },
        Case {
            name: "zero+abs",
            problem: SplitProblem::new(Arc::new(Zero), Arc::new(AbsValue)),
            s0: vec![1.5],
        },
        Case {
            name: "quadratic+weakly-convex-abs",
            problem: SplitProblem::new(
                Arc::new(Quadratic::centered(1.0, 1)),
                Arc::new(WeaklyConvexAbs::new(0.5)),
            ),
            s0: vec![2.0],
        },
        Case {
            name: "box-penalty+quadratic",
            problem: SplitProblem::new(
                Arc::new(SquaredDistance::new(
                    Arc::new(ConvexSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()),
                    2.0,
                )),
                Arc::new(AsProx(Quadratic::new(1.0, vec![2.0, 2.0]))),
            ),
            s0: vec![0.5, -0.25],
        },
        Case {
            name: "ball-penalty+abs",
            problem: SplitProblem::new(
                Arc::new(SquaredDistance::new(
                    Arc::new(ConvexSet::ball(vec![1.0, 0.0], 0.75)),
                    1.5,
                )),
                Arc::new(AbsValue),
            ),
            s0: vec![2.0, 1.0],
        },
        Case {
            name: "quadratic+box-indicator",
            problem: SplitProblem::new(
                Arc::new(Quadratic::new(2.0, vec![1.0, 0.0])),
                Arc::new(Indicator::new(Arc::new(
                    ConvexSet::boxed(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap(),
                ))),
            ),
            s0: vec![1.0, 1.0],
        },
        Case {
            name: "subspace-penalty+quadratic",
            problem: SplitProblem::new(
                Arc::new(SquaredDistance::new(
                    Arc::new(ConvexSet::subspace_from_basis(&[vec![1.0, 0.0]]).unwrap()),
                    2.0,
                )),
                Arc::new(AsProx(Quadratic::new(1.0, vec![3.0, -2.0]))),
            ),
            s0: vec![0.0, 0.0],
        },
        Case {
            name: "quadratic+measurement-residual",
            problem: SplitProblem::new(
                Arc::new(Quadratic::centered(0.5, 2)),
                Arc::new(drsplit::phase::PhaseComponent::new(vec![1.0, 0.5], 1.0)),
            ),
            s0: vec![1.2, -0.4],
        },
    ];

    let two = ScenarioProblem::consensus(
        vec![
            Arc::new(AsProx(Quadratic::new(1.0, vec![0.0]))) as Arc<dyn ProxFn>,
            Arc::new(AsProx(Quadratic::new(1.0, vec![2.0]))),
        ],
        vec![0.5, 0.5],
        1,
        1.0,
    )
    .unwrap();
    cases.push(Case {
        name: "two-scenario quadratic split",
        problem: two.as_penalized().unwrap().split(),
        s0: vec![1.0, 1.0],
    });

    let inst = PhaseRetrievalInstance::generate(30, 10, 5);
    let mu = 30f64.sqrt() / 2.0;
    let scen = inst.scenario_problem(mu).unwrap();
    let x0: Vec<f64> = (0..10).map(|i| ((i as f64) * 0.37).sin() * 0.3).collect();
    cases.push(Case {
        name: "phase retrieval (30,10) consensus split",
        problem: scen.as_penalized().unwrap().split(),
        s0: replicate_block(&x0, 30),
    });

    cases
}

fn admissible_params(lipschitz: f64) -> Vec<DrsParams> {
    let mut out = Vec::new();
    for &lambda in &[0.5, 1.0, 1.5, 1.9] {
        for &frac in &[0.3, 0.9] {
            let gamma = if lipschitz > 0.0 {
                frac * (2.0 - lambda) / (2.0 * lipschitz)
            } else {
                frac
            };
            out.push(DrsParams::new(gamma, lambda).with_max_iter(250));
        }
    }
    out
}

/// Walks the whole suite once, handing every consecutive state pair to the
/// caller; shared by criteria 1-3.
fn sweep_suite(mut check: impl FnMut(&Case, &DrsParams, &DrsState, &DrsState)) {
    for case in problem_suite() {
        let lipschitz = case.problem.lipschitz();
        for params in admissible_params(lipschitz) {
            if params.gamma * case.problem.phi2.weak_convexity() >= 1.0 {
                continue;
            }
            params.validate(lipschitz).expect("suite must stay admissible");
            let mut state = DrsState::init(&case.problem, &params, &case.s0).unwrap();
            for _ in 0..params.max_iter {
                let next = drs_step(&case.problem, &params, &state).unwrap();
                check(&case, &params, &state, &next);
                if next.residual_norm <= 1e-13 {
                    break;
                }
                state = next;
            }
        }
    }
}

#[test]
fn criterion_1_sufficient_decrease_of_the_envelope() {
    let mut iterations = 0usize;
    let mut worst = f64::INFINITY;
    sweep_suite(|case, params, state, next| {
        iterations += 1;
        let lipschitz = case.problem.lipschitz();
        let c = params.descent_constant(lipschitz);
        let gamma_l = 1.0 + params.gamma * lipschitz;
        let geom = &case.problem.geometry;
        let decrease = state.dre - next.dre;
        let bound = c
            * (geom.dist_sq(&state.s, &next.s) / (gamma_l * gamma_l))
                .max(geom.dist_sq(&state.u, &next.u));
        worst = worst.min(decrease - bound);
        assert!(
            decrease >= bound - 1e-9,
            "sufficient decrease violated on {} (lambda={}, gamma={}): {decrease} < {bound}",
            case.name,
            params.lambda,
            params.gamma
        );
    });
    verdict(
        "criterion 1 (sufficient decrease)",
        true,
        &format!("{iterations} iterations checked, worst margin {worst:.3e}"),
    );
}

#[test]
fn criterion_2_residual_identity() {
    let mut iterations = 0usize;
    let mut worst = 0f64;
    sweep_suite(|case, params, state, next| {
        iterations += 1;
        let geom = &case.problem.geometry;
        let formula = residual(geom, params.gamma, params.lambda, &state.s, &next.s);
        let assembled = assembled_residual(geom, params.gamma, &state.u, &state.v);
        let gap = rel_gap(formula, assembled);
        worst = worst.max(gap);
        assert!(
            gap <= 1e-12,
            "residual identity violated on {}: {formula} vs {assembled}",
            case.name
        );
    });
    verdict(
        "criterion 2 (residual identity)",
        true,
        &format!("{iterations} iterations checked, worst relative gap {worst:.3e}"),
    );
}

#[test]
fn criterion_3_sandwich_inequalities() {
    let mut iterations = 0usize;
    sweep_suite(|case, params, state, _next| {
        iterations += 1;
        let lipschitz = case.problem.lipschitz();
        let geom = &case.problem.geometry;
        let phi_u = case.problem.objective(&state.u);
        let phi_v = case.problem.objective(&state.v);
        assert!(
            state.dre <= phi_u + 1e-8,
            "upper sandwich violated on {}: dre {} > phi(u) {}",
            case.name,
            state.dre,
            phi_u
        );
        let gap = (1.0 - params.gamma * lipschitz) / (2.0 * params.gamma)
            * geom.dist_sq(&state.u, &state.v);
        assert!(
            phi_v <= state.dre - gap + 1e-8,
            "lower sandwich violated on {}",
            case.name
        );
    });
    verdict(
        "criterion 3 (sandwich inequalities)",
        true,
        &format!("{iterations} iterations checked at 1e-8 slack"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: dual-path equivalence oracles.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_equivalence_oracles() {
    let quad = |c: f64, center: Vec<f64>| -> Arc<dyn ProxFn> {
        Arc::new(AsProx(Quadratic::new(c, center)))
    };
    // Five constrained-pattern instances vs the generic engine.
    let penalized: Vec<(PenalizedProblem, Vec<f64>, f64, f64)> = vec![
        (
            PenalizedProblem::new(
                quad(1.0, vec![2.0, -2.0]),
                Arc::new(ConvexSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()),
                2.0,
            )
            .unwrap(),
            vec![0.5, 0.5],
            0.1,
            1.0,
        ),
        (
            PenalizedProblem::new(
                Arc::new(AsProx(Zero)),
                Arc::new(ConvexSet::ball(vec![1.0, 0.0], 0.75)),
                1.0,
            )
            .unwrap(),
            vec![4.0, 4.0],
            0.3,
            1.4,
        ),
        (
            PenalizedProblem::new(
                Arc::new(AbsValue),
                Arc::new(ConvexSet::subspace_from_basis(&[vec![1.0, 1.0]]).unwrap()),
                1.5,
            )
            .unwrap(),
            vec![1.0, -2.0],
            0.12,
            0.8,
        ),
        (
            PenalizedProblem::new(
                Arc::new(WeaklyConvexAbs::new(0.4)),
                Arc::new(ConvexSet::boxed(vec![-2.0], vec![2.0]).unwrap()),
                1.0,
            )
            .unwrap(),
            vec![3.0],
            0.25,
            1.2,
        ),
        (
            {
                let inst = PhaseRetrievalInstance::generate(30, 10, 3);
                inst.scenario_problem(30f64.sqrt() / 2.0)
                    .unwrap()
                    .as_penalized()
                    .unwrap()
            },
            replicate_block(
                &(0..10).map(|i| ((i as f64) + 0.5).cos() * 0.4).collect::<Vec<f64>>(),
                30,
            ),
            0.5 / (2.0 * 30f64.sqrt() / 2.0),
            1.0,
        ),
    ];
    let mut worst = 0f64;
    for (problem, s0, gamma, lambda) in &penalized {
        let report = equivalence_check(problem, *gamma, *lambda, s0, 200, 1e-10).unwrap();
        worst = worst.max(report.max_deviation);
    }

    // Five hedging instances vs the constrained pattern.
    let hedging: Vec<(ScenarioProblem, Vec<f64>, f64, f64)> = vec![
        (
            ScenarioProblem::consensus(
                vec![quad(1.0, vec![0.0]), quad(1.0, vec![2.0])],
                vec![0.5, 0.5],
                1,
                1.0,
            )
            .unwrap(),
            vec![1.0, 1.0],
            0.2,
            1.0,
        ),
        (
            ScenarioProblem::consensus(
                vec![
                    Arc::new(Indicator::new(Arc::new(ConvexSet::point(vec![1.0])))),
                    Arc::new(Indicator::new(Arc::new(ConvexSet::point(vec![-1.0])))),
                ],
                vec![0.5, 0.5],
                1,
                1.0,
            )
            .unwrap(),
            vec![0.25, 0.25],
            0.4,
            1.0,
        ),
        (
            ScenarioProblem::consensus(
                vec![
                    Arc::new(AbsValue),
                    quad(2.0, vec![1.0]),
                    Arc::new(WeaklyConvexAbs::new(0.3)),
                ],
                vec![0.25, 0.5, 0.25],
                1,
                1.5,
            )
            .unwrap(),
            vec![0.6, 0.6, 0.6],
            0.1,
            1.3,
        ),
        (
            ScenarioProblem::consensus(
                (0..5)
                    .map(|i| quad(1.0 + 0.2 * i as f64, vec![i as f64, -(i as f64)]))
                    .collect(),
                vec![0.1, 0.15, 0.2, 0.25, 0.3],
                2,
                2.0,
            )
            .unwrap(),
            replicate_block(&[0.5, 0.5], 5),
            0.05,
            0.9,
        ),
        (
            PhaseRetrievalInstance::generate(30, 10, 4)
                .scenario_problem(30f64.sqrt() / 2.0)
                .unwrap(),
            replicate_block(
                &(0..10).map(|i| ((2 * i + 1) as f64).sin() * 0.5).collect::<Vec<f64>>(),
                30,
            ),
            0.7 * 0.8 / (2.0 * 30f64.sqrt() / 2.0),
            1.2,
        ),
    ];
    for (problem, s0, gamma, lambda) in &hedging {
        let report = ph_equivalence_check(problem, *gamma, *lambda, s0, 200, 1e-10).unwrap();
        worst = worst.max(report.max_deviation);
    }
    verdict(
        "criterion 4 (equivalence oracles)",
        true,
        &format!("10 instances x 200 iterations, worst deviation {worst:.3e}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: closed-form subproblem vs a dense grid oracle.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_closed_form_subproblem_vs_grid() {
    const INSTANCES: usize = 1000;
    const GRID: usize = 2001; // ~4e6 points over [-4, 4]^2

    let inputs: Vec<SubproblemInput> = {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut out = Vec::with_capacity(INSTANCES);
        while out.len() < INSTANCES {
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if drsplit::geometry::norm_sq(&a) < 0.25 {
                continue;
            }
            out.push(SubproblemInput {
                a,
                b: rng.gen_range(0.0..1.5),
                z: (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                w: (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                gamma: rng.gen_range(0.02..0.5),
            });
        }
        out
    };

    let worst_gap = inputs
        .par_iter()
        .map(|input| {
            let x = solve_subproblem_closed_form(input);
            assert!(
                x.iter().all(|v| v.abs() <= 3.5),
                "minimizer escaped the grid box: {x:?}"
            );
            let closed = input.objective(&x);
            let (_, grid_best) = drsplit::numeric::grid_min_2d(
                |p, q| input.objective(&[p, q]),
                -4.0,
                4.0,
                GRID,
            );
            let gap = closed - grid_best;
            assert!(
                gap <= 1e-5,
                "closed form {closed} worse than grid {grid_best} on {input:?}"
            );
            gap
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    verdict(
        "criterion 5 (closed-form subproblem vs grid)",
        true,
        &format!("{INSTANCES} random subproblems, worst objective gap {worst_gap:.3e}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: observed linear rate on strongly convex quadratic pairs.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_linear_rate_on_quadratic_pairs() {
    // (phi1, phi2, optimal value of phi1 + phi2, start).
    let pairs: Vec<(Quadratic, Quadratic, f64, Vec<f64>)> = vec![
        // (1/2)(x-1)^2 + (1/2)x^2: min 1/4 at x = 1/2.
        (
            Quadratic::new(1.0, vec![1.0]),
            Quadratic::centered(1.0, 1),
            0.25,
            vec![3.0],
        ),
        // (x-2)^2 + (1/2)x^2: min at x = 4/3.
        (
            Quadratic::new(2.0, vec![2.0]),
            Quadratic::centered(1.0, 1),
            (4.0 / 3.0f64 - 2.0).powi(2) + 0.5 * (4.0 / 3.0f64).powi(2),
            vec![3.0],
        ),
        // 2d: (1/2)||x-(1,1)||^2 + ||x||^2: min at (1/3, 1/3).
        (
            Quadratic::new(1.0, vec![1.0, 1.0]),
            Quadratic::centered(2.0, 2),
            0.5 * (2.0 / 3.0f64).powi(2) * 2.0 + (1.0 / 3.0f64).powi(2) * 2.0,
            vec![3.0, -1.0],
        ),
    ];
    let mut report = String::new();
    for (i, (phi1, phi2, optimum, s0)) in pairs.into_iter().enumerate() {
        let lipschitz = phi1.lipschitz();
        let problem = SplitProblem::new(Arc::new(phi1), Arc::new(AsProx(phi2)));
        let params = DrsParams::new(0.8 * 1.0 / (2.0 * lipschitz), 1.0)
            .with_max_iter(300)
            .with_tol_residual(0.0);
        let out = drsplit::run(&problem, &params, &s0).unwrap();
        let est = estimate_linear_rate(&out.trace, optimum);
        let q = est.q_factor.expect("geometric decay expected");
        let r2 = est.r_squared.expect("fit expected");
        assert!(q < 0.999, "pair {i}: q = {q}");
        assert!(r2 > 0.99, "pair {i}: R^2 = {r2}");
        report.push_str(&format!("pair {i}: q={q:.4}, R2={r2:.5}, window={}; ", est.window));
    }
    verdict("criterion 6 (linear rate observation)", true, report.trim_end());
}

// ---------------------------------------------------------------------------
// Criteria 7-9: benchmark reproduction at desk scale.
// ---------------------------------------------------------------------------

fn desk_outcome() -> &'static BenchOutcome {
    static OUTCOME: OnceLock<BenchOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let config = BenchConfig {
            sizes: vec![(30, 10)],
            ..BenchConfig::default()
        };
        run_benchmark(&config).expect("desk benchmark must run")
    })
}

#[test]
fn criterion_7_best_parameter_accuracy_reproduction() {
    let config = BenchConfig {
        sizes: vec![(30, 10)],
        methods: vec![Method::Dr],
        lambda_grid: vec![1.95],
        gamma_count: 1, // single-point grids take the upper stepsize end
        ..BenchConfig::default()
    };
    let outcome = run_benchmark(&config).expect("benchmark must run");
    assert_eq!(outcome.records.len(), 15);
    let total = outcome.records.len() as f64;
    let at4 = outcome
        .records
        .iter()
        .filter(|r| r.best_accuracy < 1e-4)
        .count() as f64
        / total
        * 100.0;
    let at6 = outcome
        .records
        .iter()
        .filter(|r| r.best_accuracy < 1e-6)
        .count() as f64
        / total
        * 100.0;
    let pass = at4 >= 90.0 && at6 >= 80.0;
    verdict(
        "criterion 7 (best-parameter accuracy, lambda=1.95, gamma=0.99(2-lambda)/(2mu))",
        pass,
        &format!(
            "measured {at4:.1}% at 1e-4 and {at6:.1}% at 1e-6 (required 90% / 80%); \
             the update rules are pinned to the published formulas by criterion 4, and at \
             this stepsize the consensus-point objective needs roughly twice the 5000-iteration \
             budget to cross 1e-4 on converging starts, while the remaining starts settle at \
             measurement-wise critical points"
        ),
    );
    assert!(
        pass,
        "best-parameter reproduction out of reach: {at4:.1}% at 1e-4, {at6:.1}% at 1e-6"
    );
}

#[test]
fn criterion_8_profile_ordering_dr_pd_vs_spl() {
    let outcome = desk_outcome();
    let thresholds = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let curves = performance_profile(&outcome.records, &thresholds);
    let dr = &curves[&Method::Dr];
    let spl = &curves[&Method::Spl];
    let pd = &curves[&Method::Pd];
    let mut pass = true;
    let mut detail = String::new();
    for (i, tau) in thresholds.iter().enumerate() {
        detail.push_str(&format!(
            "tau={tau:.0e}: DR {:.3} PD {:.3} SPL {:.3}; ",
            dr[i], pd[i], spl[i]
        ));
        if dr[i] < spl[i] || pd[i] < spl[i] {
            pass = false;
        }
    }
    verdict(
        "criterion 8 (profile ordering: DR and PD dominate SPL at tau <= 1e-2)",
        pass,
        &format!(
            "{detail}— the prox-linear baseline with reshuffled sweeps solves these \
             consistent instances from most stepsizes, while the splitting sweep is \
             throttled by its admissible stepsize bound"
        ),
    );
    assert!(pass, "profile ordering not reproduced: {detail}");
}

#[test]
fn criterion_9_accuracy_table_shape_and_coarse_column() {
    let outcome = desk_outcome();
    let dr_records: Vec<_> = outcome
        .records
        .iter()
        .filter(|r| r.method == Method::Dr)
        .cloned()
        .collect();
    let table = accuracy_table(&dr_records, &TABLE_THRESHOLDS);

    // Shape: six thresholds, nonincreasing percentages, CSV emitted.
    assert_eq!(table.len(), 6);
    for w in table.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12, "table not monotone: {table:?}");
    }
    let csv = tables_csv(&outcome.records);
    assert!(csv.lines().count() > 6);

    let coarse = table[0].1;
    let detail: Vec<String> = table
        .iter()
        .map(|(tau, pct)| format!("<{tau:.0e}: {pct:.3}%"))
        .collect();
    let pass = coarse >= 100.0;
    verdict(
        "criterion 9 (full-grid accuracy table, coarse column at 100%)",
        pass,
        &format!(
            "{} — table shape and monotonicity hold; the coarse column counts only runs \
             whose consensus-point objective drops below 1e-1, and grid points outside \
             the contraction regime stall above it",
            detail.join(", ")
        ),
    );
    assert!(
        pass,
        "coarse accuracy column reads {coarse:.3}%, not 100%"
    );
}
