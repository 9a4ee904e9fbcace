//! The tangent-space proximal subproblem.
//!
//! At a base point `Y ∈ St(q,n)` with smooth-part Euclidean gradient `G`,
//! step `μ > 0` and ℓ1 weight `λ ≥ 0`, the search direction is
//!
//! ```text
//! η* = argmin ⟨grad, η⟩ + (1/2μ)‖η‖²_F + λ‖Y + η‖₁
//!      s.t.   Yᵀη + ηᵀY = 0,
//! ```
//!
//! with `grad` the tangent projection of `G`. Dualizing the symmetric linear
//! constraint with a multiplier `Λ = Λᵀ` makes the inner minimizer explicit,
//!
//! ```text
//! η(Λ) = soft(Y − μ(grad + YΛ), μλ) − Y,
//! ```
//!
//! an entrywise soft-threshold, and reduces the problem to the q(q+1)/2-
//! dimensional nonsmooth root equation `Φ(Λ) = Yᵀη(Λ) + η(Λ)ᵀY = 0`. That
//! equation is solved by a semismooth Newton method whose generalized
//! Jacobian needs nothing beyond the 0/1 activity mask of the threshold;
//! when the Newton step stalls, the iteration falls back to ascent on the
//! concave dual, maximized exactly along the gradient ray by bisection. The
//! KKT residual of the subproblem is exactly `‖Φ‖_F` because `η(Λ)`
//! satisfies stationarity by construction.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::manifold::{tangent_project, ManifoldError, StiefelPoint, TangentVector};

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("invalid prox parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("no convergence in {iterations} inner iterations (best residual {best_residual:.3e}, tol {tol:.3e})")]
    MaxIterations { iterations: usize, best_residual: f64, tol: f64 },
}

/// One subproblem instance. `tol` bounds the KKT residual `‖Φ(Λ)‖_F`.
#[derive(Debug, Clone)]
pub struct ProxProblem<'a> {
    pub base: &'a StiefelPoint,
    pub euclidean_grad: &'a DMatrix<f64>,
    pub mu: f64,
    pub lambda: f64,
    pub tol: f64,
}

impl<'a> ProxProblem<'a> {
    /// Builds a problem with the default tolerance `1e-8·(1 + ‖grad‖_F)`.
    pub fn new(
        base: &'a StiefelPoint,
        euclidean_grad: &'a DMatrix<f64>,
        mu: f64,
        lambda: f64,
    ) -> Result<Self, ProxError> {
        let tol = 1e-8 * (1.0 + euclidean_grad.norm());
        Self::with_tol(base, euclidean_grad, mu, lambda, tol)
    }

    pub fn with_tol(
        base: &'a StiefelPoint,
        euclidean_grad: &'a DMatrix<f64>,
        mu: f64,
        lambda: f64,
        tol: f64,
    ) -> Result<Self, ProxError> {
        if !(mu > 0.0) {
            return Err(ProxError::BadParameter("mu must be positive"));
        }
        if !(lambda >= 0.0) {
            return Err(ProxError::BadParameter("lambda must be nonnegative"));
        }
        if !(tol > 0.0) {
            return Err(ProxError::BadParameter("tol must be positive"));
        }
        let (n, q) = base.dims();
        if euclidean_grad.nrows() != n || euclidean_grad.ncols() != q {
            return Err(ProxError::Manifold(ManifoldError::ShapeMismatch {
                expected_rows: n,
                expected_cols: q,
                rows: euclidean_grad.nrows(),
                cols: euclidean_grad.ncols(),
            }));
        }
        Ok(ProxProblem { base, euclidean_grad, mu, lambda, tol })
    }

    /// The subproblem objective at a candidate direction.
    pub fn objective(&self, eta: &DMatrix<f64>) -> f64 {
        let grad = tangent_project(self.base, self.euclidean_grad)
            .expect("shapes checked at construction");
        let linear = (grad.matrix().transpose() * eta).trace();
        let quad = eta.norm_squared() / (2.0 * self.mu);
        let shifted = self.base.matrix() + eta;
        linear + quad + self.lambda * shifted.abs().sum()
    }
}

/// Solution of a subproblem: the direction, the dual multiplier for warm
/// starts, and solve diagnostics.
#[derive(Debug, Clone)]
pub struct ProxSolution {
    pub eta: TangentVector,
    pub multiplier: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn soft_threshold(v: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    v.map(|x| {
        if x > threshold {
            x - threshold
        } else if x < -threshold {
            x + threshold
        } else {
            0.0
        }
    })
}

/// Solves the subproblem. `warm` seeds the multiplier (zero otherwise); the
/// returned multiplier should be fed back in on the next call at a nearby
/// base point.
pub fn solve_tangent_prox(
    problem: &ProxProblem<'_>,
    warm: Option<&DMatrix<f64>>,
) -> Result<ProxSolution, ProxError> {
    let y = problem.base.matrix();
    let (n, q) = problem.base.dims();
    let mu = problem.mu;
    let threshold = mu * problem.lambda;
    let grad = tangent_project(problem.base, problem.euclidean_grad)?;
    let grad = grad.matrix().clone();

    let mut multiplier = match warm {
        Some(w) if w.nrows() == q && w.ncols() == q => (w + w.transpose()) * 0.5,
        _ => DMatrix::zeros(q, q),
    };

    // state at a multiplier: threshold argument, direction, constraint residual
    struct Eval {
        v: DMatrix<f64>,
        eta: DMatrix<f64>,
        phi: DMatrix<f64>,
        residual: f64,
    }
    let evaluate = |m: &DMatrix<f64>| {
        let v = y - (&grad + y * m) * mu;
        let w = soft_threshold(&v, threshold);
        let eta = &w - y;
        let ye = y.transpose() * &eta;
        let phi = &ye + ye.transpose();
        let residual = phi.norm();
        Eval { v, eta, phi, residual }
    };

    let p = q * (q + 1) / 2;
    let max_iter = 100usize;
    let mut best_residual = f64::INFINITY;
    let mut state = evaluate(&multiplier);

    for iter in 0..=max_iter {
        best_residual = best_residual.min(state.residual);
        if state.residual <= problem.tol {
            return Ok(finalize(problem, state.eta, multiplier, state.residual, iter));
        }
        if iter == max_iter {
            break;
        }

        // Activity mask of the threshold; the kink |v| = μλ counts as active
        // (slope one), which is a valid generalized-derivative selection.
        let mask = state.v.map(|x| if x.abs() >= threshold { 1.0 } else { 0.0 });

        // The generalized Jacobian is −μ·H with H symmetric PSD in
        // orthonormal symmetric coordinates, so (μH + εI)δ = φ interpolates
        // between the Newton step (ε = 0) and a gradient step. Grow ε until
        // the residual drops; an active-set flip can make the raw step cycle.
        let hessian = assemble_hessian(y, &mask, mu, n, q, p);
        let scale = hessian.trace() / p as f64 + 1e-300;
        let mut stepped = false;
        for epsilon in [0.0, 1e-8 * scale, 1e-4 * scale, 1e-1 * scale] {
            let mut system = hessian.clone();
            for d in 0..p {
                system[(d, d)] += epsilon;
            }
            let Some(solution) = system.lu().solve(&svec(&state.phi, q, p)) else {
                continue;
            };
            if solution.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let candidate = &multiplier + unsvec(&solution, q);
            let trial = evaluate(&candidate);
            if trial.residual <= state.residual * (1.0 - 1e-4) {
                multiplier = candidate;
                state = trial;
                stepped = true;
                break;
            }
        }

        if !stepped {
            // Ascent fallback on the concave dual, whose gradient is φ/2.
            // The dual restricted to the ray Λ + s·φ is concave piecewise
            // quadratic (linear wherever the active set freezes, which is
            // exactly where H is singular and fixed-size steps crawl), so
            // maximize along the ray outright: the directional derivative
            // g(s) = ⟨φ(Λ+sφ), φ⟩ is nonincreasing and a bisection crosses
            // every soft-threshold kink in one outer iteration.
            let phi0 = state.phi.clone();
            let slope = |m: &DMatrix<f64>| (m.transpose() * &phi0).trace();
            let mut hi = 1.0 / (2.0 * mu);
            let mut hi_eval = evaluate(&(&multiplier + &phi0 * hi));
            let mut doublings = 0;
            while slope(&hi_eval.phi) > 0.0 && doublings < 60 {
                hi *= 2.0;
                hi_eval = evaluate(&(&multiplier + &phi0 * hi));
                doublings += 1;
            }
            let mut lo = 0.0f64;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let mid_eval = evaluate(&(&multiplier + &phi0 * mid));
                if slope(&mid_eval.phi) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_eval = mid_eval;
                }
            }
            multiplier += &phi0 * hi;
            state = hi_eval;
        }
    }

    Err(ProxError::MaxIterations {
        iterations: max_iter,
        best_residual,
        tol: problem.tol,
    })
}

// symmetric-coordinate order: (0,0), (1,0), (1,1), (2,0), ...
fn sym_coords(q: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..q).flat_map(move |i| (0..=i).map(move |j| (i, j)))
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Coordinates of a symmetric matrix in the orthonormal basis
/// `{e_i e_iᵀ} ∪ {(e_i e_jᵀ + e_j e_iᵀ)/√2}`.
fn svec(m: &DMatrix<f64>, q: usize, p: usize) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    for (row, (i, j)) in sym_coords(q).enumerate() {
        out[row] = if i == j { m[(i, i)] } else { SQRT2 * m[(i, j)] };
    }
    out
}

fn unsvec(v: &DVector<f64>, q: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(q, q);
    for (row, (i, j)) in sym_coords(q).enumerate() {
        if i == j {
            out[(i, i)] = v[row];
        } else {
            out[(i, j)] = v[row] / SQRT2;
            out[(j, i)] = v[row] / SQRT2;
        }
    }
    out
}

/// The (negated, scaled) generalized Jacobian `μ·H` in orthonormal symmetric
/// coordinates, where `H(S) = Yᵀ(D∘(YS)) + (D∘(YS))ᵀY`. `H` is PSD:
/// `⟨H(S), S⟩ = 2·Σ D_ij (YS)²_ij ≥ 0`.
fn assemble_hessian(
    y: &DMatrix<f64>,
    mask: &DMatrix<f64>,
    mu: f64,
    n: usize,
    q: usize,
    p: usize,
) -> DMatrix<f64> {
    let mut hess = DMatrix::zeros(p, p);
    // the basis perturbation Y·E touches only columns k and l; build sparsely
    let mut t = DMatrix::zeros(n, q);
    for (col, (k, l)) in sym_coords(q).enumerate() {
        t.fill(0.0);
        let weight = if k == l { 1.0 } else { 1.0 / SQRT2 };
        for i in 0..n {
            t[(i, l)] += mask[(i, l)] * y[(i, k)] * weight;
        }
        if k != l {
            for i in 0..n {
                t[(i, k)] += mask[(i, k)] * y[(i, l)] * weight;
            }
        }
        let yt = y.transpose() * &t;
        let h_of_basis = (&yt + yt.transpose()) * mu;
        let column = svec(&h_of_basis, q, p);
        hess.column_mut(col).copy_from(&column);
    }
    // symmetrize round-off
    let transposed = hess.transpose();
    (hess + transposed) * 0.5
}

fn finalize(
    problem: &ProxProblem<'_>,
    eta: DMatrix<f64>,
    multiplier: DMatrix<f64>,
    residual: f64,
    iterations: usize,
) -> ProxSolution {
    // scrub the O(residual) normal component so the tangency invariant holds
    let eta = tangent_project(problem.base, &eta)
        .expect("shapes checked at construction");
    ProxSolution { eta, multiplier, residual, iterations }
}
