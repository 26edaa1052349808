//! Per-iteration invariants of the splitting engine across a mix of smooth,
//! nonsmooth, constrained and scenario-decomposed problems: sufficient
//! decrease of the envelope, the sandwich inequalities, agreement of the two
//! residual routes, and agreement of the two envelope formulas.

use std::sync::Arc;

use drsplit::drs::{
    assembled_residual, dre_value, drs_step, residual, DrsParams, DrsState, SplitProblem,
};
use drsplit::geometry::Geometry;
use drsplit::numeric::rel_gap;
use drsplit::oracle::{
    AbsValue, AsProx, Indicator, Quadratic, SquaredDistance, WeaklyConvexAbs, Zero,
};
use drsplit::phase::PhaseRetrievalInstance;
use drsplit::set::{replicate_block, ConvexSet};

struct Case {
    name: &'static str,
    problem: SplitProblem,
    s0: Vec<f64>,
}

fn suite() -> Vec<Case> {
    let mut cases = vec![
        Case {
            name: "quadratic + zero",
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
            name: "zero + abs",
            problem: SplitProblem::new(Arc::new(Zero), Arc::new(AbsValue)),
            s0: vec![1.5],
        },
        Case {
            name: "quadratic + weakly convex abs",
            problem: SplitProblem::new(
                Arc::new(Quadratic::centered(1.0, 1)),
                Arc::new(WeaklyConvexAbs::new(0.5)),
            ),
            s0: vec![2.0],
        },
        Case {
            name: "box distance penalty + shifted quadratic",
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
            name: "ball distance penalty + abs",
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
            name: "quadratic + box indicator",
            problem: SplitProblem::new(
                Arc::new(Quadratic::new(2.0, vec![1.0, 0.0])),
                Arc::new(Indicator::new(Arc::new(
                    ConvexSet::boxed(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap(),
                ))),
            ),
            s0: vec![1.0, 1.0],
        },
        Case {
            name: "subspace distance penalty + quadratic",
            problem: SplitProblem::new(
                Arc::new(SquaredDistance::new(
                    Arc::new(ConvexSet::subspace_from_basis(&[vec![1.0, 0.0]]).unwrap()),
                    2.0,
                )),
                Arc::new(AsProx(Quadratic::new(1.0, vec![3.0, -2.0]))),
            ),
            s0: vec![0.0, 0.0],
        },
    ];

    // Weighted-geometry cases: a two-scenario quadratic split and a
    // consensus-lifted phase retrieval instance.
    let two = drsplit::hedging::ScenarioProblem::consensus(
        vec![
            Arc::new(AsProx(Quadratic::new(1.0, vec![0.0]))),
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
        name: "phase retrieval consensus split",
        problem: scen.as_penalized().unwrap().split(),
        s0: replicate_block(&x0, 30),
    });

    cases.push(Case {
        name: "quadratic + single measurement residual",
        problem: SplitProblem::new(
            Arc::new(Quadratic::centered(0.5, 2)),
            Arc::new(drsplit::phase::PhaseComponent::new(vec![1.0, 0.5], 1.0)),
        ),
        s0: vec![1.2, -0.4],
    });

    cases
}

/// Admissible parameter pairs for the given Lipschitz modulus: fractions of
/// the stepsize range per relaxation value.
fn admissible_params(lipschitz: f64) -> Vec<DrsParams> {
    let mut out = Vec::new();
    for &lambda in &[0.5, 1.0, 1.5, 1.9] {
        for &frac in &[0.3, 0.9] {
            let gamma = if lipschitz > 0.0 {
                frac * (2.0 - lambda) / (2.0 * lipschitz)
            } else {
                frac // any positive stepsize is admissible when L = 0
            };
            out.push(DrsParams::new(gamma, lambda).with_max_iter(250));
        }
    }
    out
}

#[test]
fn descent_sandwich_and_residual_identities_hold_across_suite() {
    for case in suite() {
        let lipschitz = case.problem.lipschitz();
        for params in admissible_params(lipschitz) {
            // Weakly convex oracles with closed-form shrinkage need
            // gamma * rho < 1; skip pairs outside their domain.
            if params.gamma * case.problem.phi2.weak_convexity() >= 1.0 {
                continue;
            }
            params.validate(lipschitz).unwrap();
            let c = params.descent_constant(lipschitz);
            let geom = &case.problem.geometry;
            let gamma_l = 1.0 + params.gamma * lipschitz;

            let mut state = DrsState::init(&case.problem, &params, &case.s0).unwrap();
            for _ in 0..params.max_iter {
                // Sandwich: dre <= phi(u) and
                // phi(v) <= dre - (1 - gamma L)/(2 gamma) ||u - v||^2.
                let phi_u = case.problem.objective(&state.u);
                let phi_v = case.problem.objective(&state.v);
                assert!(
                    state.dre <= phi_u + 1e-8,
                    "{}: envelope above objective at u",
                    case.name
                );
                let gap = (1.0 - params.gamma * lipschitz) / (2.0 * params.gamma)
                    * geom.dist_sq(&state.u, &state.v);
                assert!(
                    phi_v <= state.dre - gap + 1e-8,
                    "{}: lower sandwich violated",
                    case.name
                );

                // Envelope formulas agree.
                let direct =
                    dre_value(&case.problem, params.gamma, &state.s, &state.u, &state.v).unwrap();
                assert!(
                    rel_gap(direct, state.dre) <= 1e-10,
                    "{}: envelope forms disagree",
                    case.name
                );

                let next = drs_step(&case.problem, &params, &state).unwrap();

                // Residual identity: assembled subgradient norm vs the
                // step-length formula.
                let formula =
                    residual(geom, params.gamma, params.lambda, &state.s, &next.s);
                let assembled =
                    assembled_residual(geom, params.gamma, &state.u, &state.v);
                assert!(
                    rel_gap(formula, assembled) <= 1e-12,
                    "{}: residual routes disagree ({formula} vs {assembled})",
                    case.name
                );

                // Sufficient decrease.
                let decrease = state.dre - next.dre;
                let bound = c
                    * (geom.dist_sq(&state.s, &next.s) / (gamma_l * gamma_l))
                        .max(geom.dist_sq(&state.u, &next.u));
                assert!(
                    decrease >= bound - 1e-9,
                    "{}: sufficient decrease violated (lambda={}, gamma={}): {decrease} < {bound}",
                    case.name,
                    params.lambda,
                    params.gamma
                );

                if next.residual_norm <= 1e-13 {
                    break;
                }
                state = next;
            }
        }
    }
}

#[test]
fn convex_quadratic_pairs_converge_to_analytic_minimizer() {
    // min (1/2)(x - 1)^2 + (1/2) x^2 has the unique minimizer 1/2.
    let problem = SplitProblem::new(
        Arc::new(Quadratic::new(1.0, vec![1.0])),
        Arc::new(AsProx(Quadratic::centered(1.0, 1))),
    );
    for (gamma, lambda) in [(0.4, 1.0), (0.2, 1.5), (0.1, 0.7)] {
        let params = DrsParams::new(gamma, lambda)
            .with_max_iter(20_000)
            .with_tol_residual(1e-12);
        let out = drsplit::run(&problem, &params, &[0.0]).unwrap();
        assert!(
            (out.state.u[0] - 0.5).abs() < 1e-8,
            "missed minimizer at gamma={gamma}, lambda={lambda}"
        );
        assert!(out.state.residual_norm <= 1e-12);
    }
}

#[test]
fn weighted_geometry_norms_drive_the_scenario_split() {
    // The residual identity must hold in the weighted inner product as well;
    // spot-check that the engine's geometry really is the weighted one.
    let inst = PhaseRetrievalInstance::generate(12, 4, 8);
    let scen = inst.scenario_problem(2.0).unwrap();
    let split = scen.as_penalized().unwrap().split();
    match &split.geometry {
        Geometry::BlockWeighted { weights, block_dim } => {
            assert_eq!(weights.len(), 12);
            assert_eq!(*block_dim, 4);
        }
        other => panic!("expected weighted geometry, got {other:?}"),
    }
}
