//! Benchmark execution: instance/start derivation and the three method
//! drivers.
//!
//! Every run is deterministic in the configuration seed: instances, start
//! points and shuffling streams are derived through tagged child seeds, so
//! the work pool can execute runs in any order. Collected records are sorted
//! by a deterministic key before serialization.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use drsplit::error::SolverError;
use drsplit::hedging::{ph_step, PhState, ScenarioProblem};
use drsplit::phase::{pd_step, spl_step, PdState, PhaseRetrievalInstance};
use drsplit::set::replicate_block;

use crate::config::{child_seed, BenchConfig, Method};
use crate::report::RunRecord;

/// Tag namespaces for child-seed derivation.
const TAG_INSTANCE: u64 = 1;
const TAG_START: u64 = 2;
const TAG_SHUFFLE: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// The records plus the resolved configuration they were produced under.
#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub config: BenchConfig,
    pub records: Vec<RunRecord>,
    /// The instances actually used, one per configured size.
    pub instances: Vec<Arc<PhaseRetrievalInstance>>,
}

struct SizeContext {
    size_idx: usize,
    instance: Arc<PhaseRetrievalInstance>,
    /// Consensus view with probability-weighted components, driven by the
    /// penalty machinery (DR sweep).
    problem: Arc<ScenarioProblem>,
    /// Consensus view with raw residual components for the
    /// progressive-decoupling baseline, whose only scale knob is its own
    /// stepsize.
    problem_pd: Arc<ScenarioProblem>,
    starts: Vec<Vec<f64>>,
}

/// Raw-component consensus view used by the decoupling baseline.
fn pd_view(instance: &PhaseRetrievalInstance) -> Result<ScenarioProblem, SolverError> {
    use drsplit::oracle::ProxFn;
    use drsplit::phase::PhaseComponent;
    let n = instance.n_measurements;
    let p = 1.0 / n as f64;
    let components: Vec<Arc<dyn ProxFn>> = (0..n)
        .map(|i| {
            Arc::new(PhaseComponent::new(instance.row(i).to_vec(), instance.b[i]))
                as Arc<dyn ProxFn>
        })
        .collect();
    ScenarioProblem::consensus(components, vec![p; n], instance.dim, 1.0)
}

struct Task<'a> {
    ctx: &'a SizeContext,
    method: Method,
    start_idx: usize,
    lambda: Option<f64>,
    gamma: f64,
    lambda_idx: usize,
    gamma_idx: usize,
    shuffle_seed: u64,
}

/// Deterministic instance seed for one configured size slot.
pub fn instance_seed(config_seed: u64, size_idx: usize) -> u64 {
    child_seed(config_seed, &[TAG_INSTANCE, size_idx as u64])
}

/// Uniform unit-sphere start point for one (size, start) slot.
pub fn start_point(config_seed: u64, size_idx: usize, start_idx: usize, dim: usize) -> Vec<f64> {
    let seed = child_seed(config_seed, &[TAG_START, size_idx as u64, start_idx as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = drsplit::geometry::norm(&x);
        if nrm > 0.0 {
            return x.into_iter().map(|v| v / nrm).collect();
        }
    }
}

/// Runs the configured benchmark with freshly generated instances.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    run_benchmark_with_instances(config, |n_meas, dim, seed| {
        Ok(PhaseRetrievalInstance::generate(n_meas, dim, seed))
    })
}

/// Runs the benchmark with caller-supplied instances (e.g. loaded from
/// disk). The provider receives `(N, n, derived_seed)` per configured size.
pub fn run_benchmark_with_instances<F>(
    config: &BenchConfig,
    provider: F,
) -> Result<BenchOutcome, BenchError>
where
    F: Fn(usize, usize, u64) -> Result<PhaseRetrievalInstance, BenchError>,
{
    config.validate().map_err(BenchError::Config)?;

    let mut contexts = Vec::with_capacity(config.sizes.len());
    for (size_idx, &(n_meas, dim)) in config.sizes.iter().enumerate() {
        let instance = provider(n_meas, dim, instance_seed(config.seed, size_idx))?;
        if instance.n_measurements != n_meas || instance.dim != dim {
            return Err(BenchError::Config(format!(
                "instance shape ({}, {}) does not match configured size ({n_meas}, {dim})",
                instance.n_measurements, instance.dim
            )));
        }
        let mu = config.mu_rule.mu(n_meas);
        let problem = instance.scenario_problem(mu)?;
        let problem_pd = pd_view(&instance)?;
        let starts = (0..config.num_starts)
            .map(|s| start_point(config.seed, size_idx, s, dim))
            .collect();
        contexts.push(SizeContext {
            size_idx,
            instance: Arc::new(instance),
            problem: Arc::new(problem),
            problem_pd: Arc::new(problem_pd),
            starts,
        });
    }

    let mut tasks = Vec::new();
    for ctx in &contexts {
        let mu = config.mu_rule.mu(ctx.instance.n_measurements);
        for start_idx in 0..config.num_starts {
            for &method in &config.methods {
                match method {
                    Method::Dr => {
                        for (lambda_idx, &lambda) in config.lambda_grid.iter().enumerate() {
                            for (gamma_idx, &gamma) in
                                config.gamma_grid(lambda, mu).iter().enumerate()
                            {
                                tasks.push(Task {
                                    ctx,
                                    method,
                                    start_idx,
                                    lambda: Some(lambda),
                                    gamma,
                                    lambda_idx,
                                    gamma_idx,
                                    shuffle_seed: 0,
                                });
                            }
                        }
                    }
                    Method::Spl | Method::Pd => {
                        for (gamma_idx, &gamma) in
                            config.baseline_stepsizes().iter().enumerate()
                        {
                            tasks.push(Task {
                                ctx,
                                method,
                                start_idx,
                                lambda: None,
                                gamma,
                                lambda_idx: 0,
                                gamma_idx,
                                shuffle_seed: child_seed(
                                    config.seed,
                                    &[
                                        TAG_SHUFFLE,
                                        ctx.size_idx as u64,
                                        start_idx as u64,
                                        gamma_idx as u64,
                                    ],
                                ),
                            });
                        }
                    }
                }
            }
        }
    }

    let mut records: Vec<RunRecord> = tasks
        .par_iter()
        .map(|task| execute(task, config))
        .collect();
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    Ok(BenchOutcome {
        config: config.clone(),
        records,
        instances: contexts.into_iter().map(|c| c.instance).collect(),
    })
}

fn execute(task: &Task<'_>, config: &BenchConfig) -> RunRecord {
    let started = Instant::now();
    let x0 = &task.ctx.starts[task.start_idx];
    let (best_accuracy, iterations) = match task.method {
        Method::Dr => run_dr(task.ctx, x0, task.lambda.unwrap(), task.gamma, config),
        Method::Pd => run_pd(task.ctx, x0, task.gamma, config),
        Method::Spl => run_spl(task.ctx, x0, task.gamma, task.shuffle_seed, config),
    };
    RunRecord {
        method: task.method,
        n_measurements: task.ctx.instance.n_measurements,
        dim: task.ctx.instance.dim,
        start: task.start_idx,
        lambda: task.lambda,
        gamma: task.gamma,
        best_accuracy,
        iterations,
        wall_time_s: started.elapsed().as_secs_f64(),
        size_idx: task.ctx.size_idx,
        lambda_idx: task.lambda_idx,
        gamma_idx: task.gamma_idx,
    }
}

/// Keeps the running best, ignoring non-finite values.
fn fold_best(best: &mut f64, candidate: f64) {
    if candidate.is_finite() && candidate < *best {
        *best = candidate;
    }
}

/// Hedging sweep run: track the true objective at the consensus projection
/// of the subproblem solutions (the deployable point) and stop at the target.
fn run_dr(
    ctx: &SizeContext,
    x0: &[f64],
    lambda: f64,
    gamma: f64,
    config: &BenchConfig,
) -> (f64, usize) {
    let z0 = replicate_block(x0, ctx.instance.n_measurements);
    let mut state = match PhState::init(&ctx.problem, gamma, &z0) {
        Ok(s) => s,
        Err(_) => return (f64::INFINITY, 0),
    };
    let mut best = f64::INFINITY;
    fold_best(
        &mut best,
        ctx.instance.objective(&ctx.problem.consensus_point(&state.x)),
    );
    while best > config.target_accuracy && state.iter < config.max_iter {
        state = match ph_step(&ctx.problem, gamma, lambda, &state) {
            Ok(s) => s,
            Err(_) => break, // diverged run keeps its best-so-far accuracy
        };
        fold_best(
            &mut best,
            ctx.instance.objective(&ctx.problem.consensus_point(&state.x)),
        );
    }
    (best, state.iter)
}

/// Progressive-decoupling run: the primal iterate is already consensus
/// feasible, so the objective is evaluated at its first block.
fn run_pd(ctx: &SizeContext, x0: &[f64], gamma: f64, config: &BenchConfig) -> (f64, usize) {
    let dim = ctx.instance.dim;
    let z0 = replicate_block(x0, ctx.instance.n_measurements);
    let mut state = match PdState::init(&ctx.problem_pd, &z0) {
        Ok(s) => s,
        Err(_) => return (f64::INFINITY, 0),
    };
    let mut best = f64::INFINITY;
    fold_best(&mut best, ctx.instance.objective(&state.z[..dim]));
    while best > config.target_accuracy && state.iter < config.max_iter {
        state = match pd_step(&ctx.problem_pd, &state, gamma) {
            Ok(s) => s,
            Err(_) => break,
        };
        fold_best(&mut best, ctx.instance.objective(&state.z[..dim]));
    }
    (best, state.iter)
}

/// Stochastic prox-linear run: cyclic sweeps with a reshuffled component
/// order per epoch, constant stepsize.
fn run_spl(
    ctx: &SizeContext,
    x0: &[f64],
    gamma: f64,
    shuffle_seed: u64,
    config: &BenchConfig,
) -> (f64, usize) {
    let n_meas = ctx.instance.n_measurements;
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..n_meas).collect();
    let mut x = x0.to_vec();
    let mut best = f64::INFINITY;
    fold_best(&mut best, ctx.instance.objective(&x));
    let mut iterations = 0;
    for k in 0..config.max_iter {
        if best <= config.target_accuracy {
            break;
        }
        if k % n_meas == 0 {
            order.shuffle(&mut rng);
        }
        let i = order[k % n_meas];
        x = spl_step(&ctx.instance, &x, gamma, i);
        iterations = k + 1;
        fold_best(&mut best, ctx.instance.objective(&x));
    }
    (best, iterations)
}
