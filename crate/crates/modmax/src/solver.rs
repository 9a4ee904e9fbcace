//! The detection pipeline.
//!
//! Three steps, run by [`detect_communities`]:
//!
//! 1. **Spectral initialization.** The top `q−1` eigenvectors of the
//!    modularity matrix (computed densely after deflating the all-ones
//!    direction, which `M` annihilates) are stacked next to `1ₙ/√n`,
//!    giving a feasible starting frame.
//! 2. **Accelerated projected proximal gradient.** [`accelerated_loop`]
//!    minimizes `F(X) = −tr(XᵀMX) + λ‖X‖₁` over the feasible set: each
//!    iteration solves the tangent-space prox subproblem at the
//!    extrapolated point `y_k`, retracts, projects back onto the feasible
//!    set, and updates the momentum combination through the inverse
//!    retraction. Every `N` iterations a [`safeguard`] step makes a plain
//!    backtracked proximal step from a reference iterate and resets the
//!    momentum whenever acceleration has overshot, which is what gives the
//!    method its monotone safeguarded subsequence.
//! 3. **Continuation and rounding.** The ℓ1 weight grows geometrically,
//!    warm-starting each solve from the last, until the penalized objective
//!    stops improving; the final frame is rounded row-wise (largest
//!    magnitude wins) into a [`Partition`].
//!
//! Reported objective values use the maximization convention
//! `tr(XᵀMX) − λ‖X‖₁`; the loop minimizes its negation internally.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, ModularityOperator};
use crate::manifold::{
    certify_feasible, feasible_project, inverse_retract, retract, FeasiblePoint,
    ManifoldError, StiefelPoint, TangentVector, FEASIBILITY_TOL,
};
use crate::partition::Partition;
use crate::prox::{solve_tangent_prox, ProxError, ProxProblem};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
    #[error("community count q={q} must satisfy 2 <= q < n (n = {n})")]
    BadCommunityCount { q: usize, n: usize },
    #[error("proximal subproblem failed at outer iteration {iteration}: {source}")]
    Prox {
        iteration: usize,
        #[source]
        source: ProxError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Tunable parameters of the pipeline. Defaults follow proximal-gradient
/// conventions and are all overridable; none of them are graph-dependent
/// except the stationarity tolerance, which scales as `√(nq)` unless pinned.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Target community count (columns of the frame).
    pub q: usize,
    /// Initial ℓ1 weight for the continuation schedule.
    pub lambda0: f64,
    /// Multiplicative λ growth factor, strictly above 1.
    pub lambda_growth: f64,
    /// The prox step is `mu_scale / L`; must lie in (0, 1].
    pub mu_scale: f64,
    /// Sufficient-decrease constant of the safeguard line search, in (0, 1).
    pub sigma: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub beta: f64,
    /// Invoke the safeguard every this many iterations.
    pub safeguard_period: usize,
    /// Iteration cap for one fixed-λ solve.
    pub max_outer_iter: usize,
    /// Stationarity tolerance on `‖η‖_F/μ`; `None` selects `1e-6·√(nq)`.
    pub grad_tol: Option<f64>,
    /// Cap on continuation rounds.
    pub max_lambda_rounds: usize,
    /// Seed for restart rotations (the pipeline is otherwise deterministic).
    pub seed: u64,
    /// Number of restarts; the first always uses the plain spectral frame.
    pub restarts: usize,
}

impl SolverConfig {
    pub fn new(q: usize) -> Self {
        SolverConfig {
            q,
            lambda0: 0.2,
            lambda_growth: 1.3,
            mu_scale: 1.0,
            sigma: 1e-4,
            beta: 0.5,
            safeguard_period: 5,
            max_outer_iter: 2000,
            grad_tol: None,
            max_lambda_rounds: 50,
            seed: 0,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.q < 2 {
            return Err(SolverError::BadConfig("q must be at least 2"));
        }
        if !(self.lambda0 >= 0.0) {
            return Err(SolverError::BadConfig("lambda0 must be nonnegative"));
        }
        if !(self.lambda_growth > 1.0) {
            return Err(SolverError::BadConfig("lambda_growth must exceed 1"));
        }
        if !(self.mu_scale > 0.0 && self.mu_scale <= 1.0) {
            return Err(SolverError::BadConfig("mu_scale must lie in (0, 1]"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(SolverError::BadConfig("sigma must lie in (0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SolverError::BadConfig("beta must lie in (0, 1)"));
        }
        if self.safeguard_period == 0 {
            return Err(SolverError::BadConfig("safeguard period must be positive"));
        }
        if self.max_outer_iter == 0 || self.max_lambda_rounds == 0 {
            return Err(SolverError::BadConfig("iteration caps must be positive"));
        }
        if self.restarts == 0 {
            return Err(SolverError::BadConfig("restarts must be at least 1"));
        }
        if let Some(tol) = self.grad_tol {
            if !(tol > 0.0) {
                return Err(SolverError::BadConfig("grad_tol must be positive"));
            }
        }
        Ok(())
    }

    fn resolved_grad_tol(&self, n: usize) -> f64 {
        self.grad_tol.unwrap_or(1e-6 * ((n * self.q) as f64).sqrt())
    }
}

/// Noteworthy things that happened during a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SolverEvent {
    SafeguardActivated { iteration: usize, lambda: f64 },
    SafeguardUnderflow { iteration: usize, lambda: f64 },
    MomentumReset { iteration: usize, lambda: f64 },
    SpectralDeficit { positive_available: usize, requested: usize },
    ProxToleranceRelaxed { iteration: usize, lambda: f64, tol: f64 },
}

/// Iterates of the accelerated loop. Public so the safeguard contract can be
/// exercised directly on synthetic states.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: FeasiblePoint,
    pub y: FeasiblePoint,
    pub z: FeasiblePoint,
    pub t: f64,
    pub k: usize,
    /// `F(x)` in the minimization convention.
    pub f_x: f64,
    /// Warm-start multiplier for the prox subproblem.
    pub multiplier: Option<DMatrix<f64>>,
}

impl SolverState {
    pub fn fresh(op: &ModularityOperator<'_>, x0: FeasiblePoint, lambda: f64) -> Result<Self, SolverError> {
        let f_x = min_objective(op, x0.matrix(), lambda)?;
        Ok(SolverState {
            x: x0.clone(),
            y: x0.clone(),
            z: x0,
            t: 1.0,
            k: 0,
            f_x,
            multiplier: None,
        })
    }
}

/// Everything [`detect_communities`] learned about one graph.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub partition: Partition,
    pub x_star: DMatrix<f64>,
    /// `tr(XᵀMX) − λ‖X‖₁` after every outer iteration, across all rounds.
    pub objective_trace: Vec<f64>,
    /// λ values visited by the continuation schedule.
    pub lambda_path: Vec<f64>,
    /// Final penalized objective of each round, aligned with `lambda_path`.
    pub round_objectives: Vec<f64>,
    pub modularity: f64,
    pub iterations: usize,
    pub wall_time: std::time::Duration,
    pub events: Vec<SolverEvent>,
    /// Per-row `max|X_ij| / ‖row‖₂`, a sparsity diagnostic in `[1/√q, 1]`.
    pub row_dominance: Vec<f64>,
}

/// The penalized objective in maximization form: `tr(XᵀMX) − λ‖X‖₁`.
pub fn penalized_objective(
    op: &ModularityOperator<'_>,
    x: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64, SolverError> {
    Ok(op.quadratic(x)? - lambda * x.abs().sum())
}

fn min_objective(op: &ModularityOperator<'_>, x: &DMatrix<f64>, lambda: f64) -> Result<f64, SolverError> {
    Ok(-penalized_objective(op, x, lambda)?)
}

/// Estimates the gradient Lipschitz constant `L = 2‖M‖₂` by power iteration
/// (100 steps or relative change below `1e-6`), inflated by 1% to cover
/// under-estimation and floored at `1e-12` for degenerate operators.
pub fn estimate_lipschitz(op: &ModularityOperator<'_>) -> f64 {
    let n = op.node_count();
    let estimate = spectral_norm_estimate(|v| op.apply(v).expect("square input"), n);
    (2.0 * estimate * 1.01).max(1e-12)
}

fn spectral_norm_estimate<F>(apply: F, n: usize) -> f64
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    // fixed-seed start vector: the estimate must not depend on run order
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED_0F11);
    let mut v = DMatrix::from_fn(n, 1, |_, _| {
        rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
    });
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..100 {
        let w = apply(&v);
        let w_norm = w.norm();
        if w_norm <= 1e-300 {
            return 0.0;
        }
        let change = (w_norm - estimate).abs() / w_norm.max(1e-300);
        estimate = w_norm;
        v = w / w_norm;
        if change < 1e-6 {
            break;
        }
    }
    estimate
}

/// Result of [`spectral_init`]: the feasible starting frame and the `q−1`
/// eigenvalues backing it. `deficit` counts how many of those eigenvalues
/// were not positive — a warning sign, not an error.
#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub point: FeasiblePoint,
    pub eigenvalues: Vec<f64>,
    pub deficit: usize,
}

/// Builds `X₀ = [Y* 1ₙ/√n]` where `Y*` maximizes `tr(YᵀMY)` over
/// `St(q−1, n)`, i.e. holds the top `q−1` eigenvectors of `M`. The all-ones
/// direction is deflated before the dense symmetric eigensolve, which keeps
/// the eigenvectors orthogonal to the appended column.
pub fn spectral_init(op: &ModularityOperator<'_>, q: usize) -> Result<SpectralInit, SolverError> {
    let n = op.node_count();
    if q < 2 || q >= n {
        return Err(SolverError::BadCommunityCount { q, n });
    }
    // materialize M densely for the eigensolve (init only; the loop stays matrix-free)
    let dense = op.apply(&DMatrix::identity(n, n))?;
    let ones_tilde = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    // symmetric deflation of the 1̃ direction
    let mu = &dense * &ones_tilde;
    let mut deflated = dense;
    let correction = &mu * ones_tilde.transpose();
    deflated -= &correction;
    deflated -= correction.transpose();
    let scale = ones_tilde.dot(&mu);
    deflated += &ones_tilde * ones_tilde.transpose() * scale;
    // symmetrize round-off
    deflated = (&deflated + deflated.transpose()) * 0.5;

    let eigen = deflated.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("eigenvalues are finite")
    });

    let k = q - 1;
    let mut frame = DMatrix::zeros(n, q);
    let mut eigenvalues = Vec::with_capacity(k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let mut v = eigen.eigenvectors.column(idx).into_owned();
        // re-orthogonalize against 1̃ and earlier columns
        v -= &ones_tilde * ones_tilde.dot(&v);
        for prev in 0..col {
            let p = frame.column(prev).into_owned();
            v -= &p * p.dot(&v);
        }
        v /= v.norm();
        // deterministic sign: largest-magnitude entry positive
        let mut best = 0usize;
        for i in 0..n {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        if v[best] < 0.0 {
            v = -v;
        }
        frame.column_mut(col).copy_from(&v);
        eigenvalues.push(eigen.eigenvalues[idx]);
    }
    frame.column_mut(q - 1).copy_from(&ones_tilde);

    let deficit = eigenvalues.iter().filter(|&&g| g <= 0.0).count();
    let point = certify_feasible(StiefelPoint::new(frame)?)?;
    Ok(SpectralInit { point, eigenvalues, deficit })
}

/// Momentum recurrence `t' = (√(4t²+1)+1)/2`, the positive root of
/// `t'(t'−1) = t²`.
pub fn next_momentum(t: f64) -> f64 {
    ((4.0 * t * t + 1.0).sqrt() + 1.0) / 2.0
}

/// What one safeguard invocation did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeguardOutcome {
    pub activated: bool,
    pub alpha: f64,
    pub backtracks: usize,
    pub underflow: bool,
}

/// Backtracking schedule: shrink `alpha` by `beta` until `accepts` holds.
/// Returns `None` when `alpha` underflows `1e-16`.
fn backtrack<F: FnMut(f64) -> bool>(beta: f64, mut accepts: F) -> Option<(f64, usize)> {
    let mut alpha = 1.0;
    let mut backtracks = 0usize;
    loop {
        if accepts(alpha) {
            return Some((alpha, backtracks));
        }
        alpha *= beta;
        backtracks += 1;
        if alpha < 1e-16 {
            return None;
        }
    }
}

/// Solves the prox subproblem, loosening the KKT tolerance (up to a bound)
/// when the inner iteration cap is hit. Near a degenerate solution the
/// semismooth Newton method can stall just above the default tolerance; a
/// slightly less exact direction still serves the outer loop, which projects
/// and line-searches anyway.
fn solve_prox_relaxed(
    base: &StiefelPoint,
    grad: &DMatrix<f64>,
    mu: f64,
    lambda: f64,
    warm: Option<&DMatrix<f64>>,
    iteration: usize,
    events: &mut Vec<SolverEvent>,
) -> Result<crate::prox::ProxSolution, SolverError> {
    let scale = 1.0 + grad.norm();
    let mut tol = 1e-8 * scale;
    let cap = 1e-3 * scale;
    loop {
        let problem = ProxProblem::with_tol(base, grad, mu, lambda, tol)
            .map_err(|source| SolverError::Prox { iteration, source })?;
        match solve_tangent_prox(&problem, warm) {
            Ok(solution) => return Ok(solution),
            Err(ProxError::MaxIterations { best_residual, .. }) if tol < cap => {
                tol = (best_residual * 10.0).max(tol * 100.0).min(cap);
                events.push(SolverEvent::ProxToleranceRelaxed { iteration, lambda, tol });
            }
            Err(source) => return Err(SolverError::Prox { iteration, source }),
        }
    }
}

/// The periodic monotone safeguard.
///
/// Solves the prox subproblem at the reference iterate `z`, backtracks a step
/// `α` until `F(proj(R_z(αη))) ≤ F(z) − σα‖η‖²`, and if the landed point
/// improves on `F(x)` replaces both `x` and `y` with it and resets the
/// momentum to 1. Either way the reference iterate for the next invocation
/// becomes the current `x`. An `α` underflow leaves the state untouched
/// except for that reference update.
pub fn safeguard(
    state: &mut SolverState,
    op: &ModularityOperator<'_>,
    mu: f64,
    sigma: f64,
    beta: f64,
    lambda: f64,
    events: &mut Vec<SolverEvent>,
) -> Result<SafeguardOutcome, SolverError> {
    let grad = op.negated_gradient(state.z.matrix())?;
    let solution = solve_prox_relaxed(
        state.z.point(),
        &grad,
        mu,
        lambda,
        state.multiplier.as_ref(),
        state.k,
        events,
    )?;
    state.multiplier = Some(solution.multiplier.clone());
    let eta = solution.eta;
    // a vanishing step lands on z itself; compare objectives directly instead
    // of pushing a zero retraction through round-off noise
    if eta.norm() <= 1e-13 {
        let f_z = min_objective(op, state.z.matrix(), lambda)?;
        let activated = f_z < state.f_x;
        if activated {
            state.x = state.z.clone();
            state.y = state.z.clone();
            state.t = 1.0;
            state.f_x = f_z;
        }
        state.z = state.x.clone();
        return Ok(SafeguardOutcome { activated, alpha: 1.0, backtracks: 0, underflow: false });
    }
    let f_z = min_objective(op, state.z.matrix(), lambda)?;
    let decrease = sigma * eta.norm() * eta.norm();

    let mut candidate: Option<(FeasiblePoint, f64)> = None;
    let accepted = backtrack(beta, |alpha| {
        let stepped = match retract(state.z.point(), &eta.scaled(alpha)) {
            Ok(p) => feasible_project(&p),
            Err(_) => return false,
        };
        let f_stepped = match min_objective(op, stepped.matrix(), lambda) {
            Ok(f) => f,
            Err(_) => return false,
        };
        if f_stepped <= f_z - alpha * decrease {
            candidate = Some((stepped, f_stepped));
            true
        } else {
            false
        }
    });

    let outcome = match (accepted, candidate) {
        (Some((alpha, backtracks)), Some((point, f_point))) => {
            let activated = f_point < state.f_x;
            if activated {
                state.x = point.clone();
                state.y = point;
                state.t = 1.0;
                state.f_x = f_point;
            }
            SafeguardOutcome { activated, alpha, backtracks, underflow: false }
        }
        _ => SafeguardOutcome { activated: false, alpha: 0.0, backtracks: 0, underflow: true },
    };
    // z_{k+N} = x_k, whether or not the safeguard took effect
    state.z = state.x.clone();
    Ok(outcome)
}

/// Outcome of one fixed-λ accelerated solve.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub x: FeasiblePoint,
    /// Penalized objective (maximization form) after each outer iteration,
    /// starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub events: Vec<SolverEvent>,
    pub multiplier: Option<DMatrix<f64>>,
}

/// Runs the accelerated projected proximal gradient loop at a fixed λ,
/// starting from the feasible point `x0`.
pub fn accelerated_loop(
    op: &ModularityOperator<'_>,
    config: &SolverConfig,
    x0: FeasiblePoint,
    lambda: f64,
) -> Result<LoopOutcome, SolverError> {
    config.validate()?;
    let lipschitz = estimate_lipschitz(op);
    let mu = config.mu_scale / lipschitz;
    let grad_tol = config.resolved_grad_tol(op.node_count());
    accelerated_loop_with(op, config, mu, grad_tol, x0, lambda, None, 0)
}

#[allow(clippy::too_many_arguments)]
fn accelerated_loop_with(
    op: &ModularityOperator<'_>,
    config: &SolverConfig,
    mu: f64,
    grad_tol: f64,
    x0: FeasiblePoint,
    lambda: f64,
    warm_multiplier: Option<DMatrix<f64>>,
    iteration_offset: usize,
) -> Result<LoopOutcome, SolverError> {
    let mut state = SolverState::fresh(op, x0, lambda)?;
    state.multiplier = warm_multiplier;
    let mut events = Vec::new();
    let mut trace = vec![-state.f_x];
    let mut converged = false;
    let mut iterations = 0usize;

    // The prox step norm measures stationarity over the whole Stiefel
    // manifold; when the span constraint binds, the projection keeps undoing
    // the infeasible component and that norm plateaus above any tolerance.
    // Objective stagnation is the stop that actually fires in that regime;
    // it compares windowed bests because acceleration makes F non-monotone.
    const STALL_WINDOW: usize = 100;
    const STALL_REL_TOL: f64 = 1e-9;
    let mut best_f = state.f_x;
    let mut window_anchor = f64::INFINITY;
    let mut escapes = 0usize;

    for k in 0..config.max_outer_iter {
        state.k = iteration_offset + k;
        if k % config.safeguard_period == 0 {
            let outcome =
                safeguard(&mut state, op, mu, config.sigma, config.beta, lambda, &mut events)?;
            if outcome.activated {
                events.push(SolverEvent::SafeguardActivated { iteration: state.k, lambda });
            }
            if outcome.underflow {
                events.push(SolverEvent::SafeguardUnderflow { iteration: state.k, lambda });
            }
        }

        let grad = op.negated_gradient(state.y.matrix())?;
        let solution = solve_prox_relaxed(
            state.y.point(),
            &grad,
            mu,
            lambda,
            state.multiplier.as_ref(),
            state.k,
            &mut events,
        )?;
        state.multiplier = Some(solution.multiplier.clone());

        iterations = k + 1;
        if solution.eta.norm() / mu <= grad_tol {
            // Symmetric inputs can park the iterate on a degenerate critical
            // point: the prox step vanishes but nearby frames still lower the
            // objective at second order (the trace is invariant to rotations
            // within the span, and the ℓ1 gain of rotating is quadratic).
            // Probe a few seeded tangent directions before believing it.
            if lambda > 0.0 && escapes < 3 {
                if let Some((point, f_point)) = saddle_escape(op, &state.y, lambda)? {
                    escapes += 1;
                    state.f_x = f_point;
                    state.x = point.clone();
                    state.y = point;
                    state.t = 1.0;
                    state.z = state.x.clone();
                    trace.push(-state.f_x);
                    best_f = best_f.min(state.f_x);
                    continue;
                }
            }
            converged = true;
            iterations = k;
            break;
        }

        let x_next = feasible_project(&retract(state.y.point(), &solution.eta)?);
        let t_next = next_momentum(state.t);
        let momentum_coeff = (1.0 - state.t) / t_next;
        let combined = inverse_retract(x_next.point(), state.x.point())
            .and_then(|back| retract(x_next.point(), &back.scaled(momentum_coeff)));
        let (y_next, t_next) = match combined {
            Ok(point) => (feasible_project(&point), t_next),
            Err(ManifoldError::RetractionDomain) | Err(ManifoldError::RankDeficient { .. }) => {
                events.push(SolverEvent::MomentumReset { iteration: state.k, lambda });
                (x_next.clone(), 1.0)
            }
            Err(other) => return Err(other.into()),
        };

        state.f_x = min_objective(op, x_next.matrix(), lambda)?;
        state.x = x_next;
        state.y = y_next;
        state.t = t_next;
        trace.push(-state.f_x);

        debug_assert!(state.x.certificate() <= FEASIBILITY_TOL);
        debug_assert!(state.y.certificate() <= FEASIBILITY_TOL);
        debug_assert!(state.x.point().orthonormality_defect() <= 1e-9);
        debug_assert!(state.y.point().orthonormality_defect() <= 1e-9);

        best_f = best_f.min(state.f_x);
        if (k + 1) % STALL_WINDOW == 0 {
            if best_f >= window_anchor - STALL_REL_TOL * (1.0 + window_anchor.abs()) {
                break;
            }
            window_anchor = best_f;
        }
    }

    Ok(LoopOutcome {
        x: state.x,
        objective_trace: trace,
        iterations,
        converged,
        events,
        multiplier: state.multiplier,
    })
}

/// Probes around a prox-stationary point and returns the best strictly
/// improving feasible neighbor, if any. Finds nothing at genuine local
/// minima. The probe directions are the span-preserving rotations
/// `η = Y·(e_ie_jᵀ − e_je_iᵀ)` — always tangent, and exactly the directions
/// along which the trace term is flat on an invariant subspace while the ℓ1
/// term can still fall at second order, which is the degenerate geometry
/// that strands symmetric inputs.
fn saddle_escape(
    op: &ModularityOperator<'_>,
    y: &FeasiblePoint,
    lambda: f64,
) -> Result<Option<(FeasiblePoint, f64)>, SolverError> {
    let q = y.dims().1;
    let f_here = min_objective(op, y.matrix(), lambda)?;
    let mut best: Option<(FeasiblePoint, f64)> = None;
    let mut omega = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in (i + 1)..q {
            omega.fill(0.0);
            omega[(i, j)] = 1.0;
            omega[(j, i)] = -1.0;
            let dir_matrix = y.matrix() * &omega;
            let dir = TangentVector::new(y.point().clone(), dir_matrix)?;
            for scale in [0.01, -0.01, 0.1, -0.1, 0.4, -0.4] {
                let stepped = feasible_project(&retract(y.point(), &dir.scaled(scale))?);
                let f_stepped = min_objective(op, stepped.matrix(), lambda)?;
                let improves = f_stepped <= f_here - 1e-12 * (1.0 + f_here.abs());
                let best_so_far = best.as_ref().map(|(_, f)| *f).unwrap_or(f64::INFINITY);
                if improves && f_stepped < best_so_far {
                    best = Some((stepped, f_stepped));
                }
            }
        }
    }
    Ok(best)
}

/// Rounds a frame to a partition: each row joins the column holding its
/// largest-magnitude entry, ties to the lowest column index; unused columns
/// are dropped and the survivors relabeled densely in column order.
pub fn round_to_assignment(x: &StiefelPoint) -> Partition {
    round_matrix(x.matrix())
}

fn round_matrix(m: &DMatrix<f64>) -> Partition {
    let (n, q) = (m.nrows(), m.ncols());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = 0usize;
        for j in 1..q {
            if m[(i, j)].abs() > m[(i, best)].abs() {
                best = j;
            }
        }
        labels.push(best as u32);
    }
    // dense relabel preserving column order
    let mut used: Vec<u32> = labels.clone();
    used.sort_unstable();
    used.dedup();
    let remap: std::collections::HashMap<u32, u32> =
        used.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
    let labels = labels.into_iter().map(|c| remap[&c]).collect();
    Partition::from_labels(labels).expect("n > 0")
}

/// The full pipeline: spectral start, λ-continuation with warm starts,
/// optional restarts, rounding. Deterministic for a fixed config and input.
pub fn detect_communities(
    op: &ModularityOperator<'_>,
    config: &SolverConfig,
) -> Result<DetectionResult, SolverError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let n = op.node_count();
    if config.q >= n {
        return Err(SolverError::BadCommunityCount { q: config.q, n });
    }
    let lipschitz = estimate_lipschitz(op);
    let mu = config.mu_scale / lipschitz;
    let grad_tol = config.resolved_grad_tol(n);
    let init = spectral_init(op, config.q)?;

    let mut shared_events = Vec::new();
    if init.deficit > 0 {
        shared_events.push(SolverEvent::SpectralDeficit {
            positive_available: config.q - 1 - init.deficit,
            requested: config.q - 1,
        });
    }

    let mut best: Option<ContinuationRun> = None;
    for restart in 0..config.restarts {
        let x0 = if restart == 0 {
            init.point.clone()
        } else {
            rotated_init(&init.point, config.seed, restart)
        };
        let run = continuation_run(op, config, mu, grad_tol, x0)?;
        let better = match &best {
            None => true,
            Some(current) => run.final_objective > current.final_objective,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");

    let x_star = best.x.into_point();
    let partition = round_to_assignment(&x_star);
    let modularity = crate::graph::modularity_score(op.graph(), &partition)?;
    let row_dominance = x_star
        .matrix()
        .row_iter()
        .map(|row| {
            let norm = row.norm();
            if norm <= 1e-300 {
                0.0
            } else {
                row.iter().map(|v| v.abs()).fold(0.0, f64::max) / norm
            }
        })
        .collect();

    let mut events = shared_events;
    events.extend(best.events);
    Ok(DetectionResult {
        partition,
        x_star: x_star.into_matrix(),
        objective_trace: best.objective_trace,
        lambda_path: best.lambda_path,
        round_objectives: best.round_objectives,
        modularity,
        iterations: best.iterations,
        wall_time: started.elapsed(),
        events,
        row_dominance,
    })
}

/// Randomly rotates the eigenvector block of the initial frame, leaving the
/// all-ones column alone, so a restart explores a different representative of
/// the same invariant subspace.
fn rotated_init(init: &FeasiblePoint, seed: u64, restart: usize) -> FeasiblePoint {
    let q = init.dims().1;
    let k = q - 1;
    let mut rng =
        ChaCha12Rng::seed_from_u64(seed.wrapping_add(restart as u64).wrapping_mul(0x9E37_79B9));
    if k == 0 {
        return init.clone();
    }
    let gauss = DMatrix::from_fn(k, k, |_, _| {
        rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
    });
    let qr = gauss.qr();
    let rotation = qr.q();
    let block = init.matrix().columns(0, k) * rotation;
    let mut frame = init.matrix().clone();
    frame.columns_mut(0, k).copy_from(&block);
    feasible_project(&StiefelPoint::from_computed(frame))
}

struct ContinuationRun {
    x: FeasiblePoint,
    objective_trace: Vec<f64>,
    lambda_path: Vec<f64>,
    round_objectives: Vec<f64>,
    iterations: usize,
    events: Vec<SolverEvent>,
    final_objective: f64,
}

fn continuation_run(
    op: &ModularityOperator<'_>,
    config: &SolverConfig,
    mu: f64,
    grad_tol: f64,
    x0: FeasiblePoint,
) -> Result<ContinuationRun, SolverError> {
    let mut lambda = config.lambda0;
    let mut x = x0;
    let mut multiplier = None;
    let mut trace = Vec::new();
    let mut lambda_path = Vec::new();
    let mut round_objectives = Vec::new();
    let mut events = Vec::new();
    let mut iterations = 0usize;
    let mut final_objective = f64::NEG_INFINITY;

    for _round in 0..config.max_lambda_rounds {
        let warm_objective = penalized_objective(op, x.matrix(), lambda)?;
        let outcome = accelerated_loop_with(
            op,
            config,
            mu,
            grad_tol,
            x.clone(),
            lambda,
            multiplier.take(),
            iterations,
        )?;
        iterations += outcome.iterations;
        trace.extend(outcome.objective_trace.iter().copied());
        events.extend(outcome.events);
        multiplier = outcome.multiplier;
        x = outcome.x;
        let solved_objective = penalized_objective(op, x.matrix(), lambda)?;
        lambda_path.push(lambda);
        round_objectives.push(solved_objective);
        final_objective = solved_objective;

        // continuation stop: the current round's λ prices both frames
        let improvement = solved_objective - warm_objective;
        if improvement < 1e-6 * (1.0 + warm_objective.abs()) {
            break;
        }
        lambda *= config.lambda_growth;
    }

    Ok(ContinuationRun {
        x,
        objective_trace: trace,
        lambda_path,
        round_objectives,
        iterations,
        events,
        final_objective,
    })
}
