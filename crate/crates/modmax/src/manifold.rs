//! Stiefel-manifold primitives.
//!
//! Points live on `St(q,n) = {X ∈ ℝⁿˣᑫ : XᵀX = I}` with the metric inherited
//! from the ambient Frobenius inner product. Besides the usual tangent
//! projection and a QR+SVD retraction with its Lyapunov-equation inverse, this
//! module provides the closed-form projection onto the feasible set
//!
//! ```text
//! F = { X ∈ St(q,n) : 1ₙ ∈ range(X) }
//! ```
//!
//! which the solver applies after every retraction step.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Frobenius tolerance below which a constructed point is accepted as-is.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Worst orthonormality defect the constructor will repair by re-orthonormalizing.
const REPAIR_TOL: f64 = 1e-6;
/// Feasibility certificate bound for [`FeasiblePoint`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("matrix is {nrows}x{ncols}, expected strictly more rows than columns")]
    BadShape { nrows: usize, ncols: usize },
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    ShapeMismatch { expected_rows: usize, expected_cols: usize, rows: usize, cols: usize },
    #[error("columns are too far from orthonormal to repair (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },
    #[error("retraction argument is rank deficient (smallest singular value {sigma_min:.3e})")]
    RankDeficient { sigma_min: f64 },
    #[error("points not in retraction domain")]
    RetractionDomain,
    #[error("the all-ones vector is not in the column span (certificate {certificate:.3e})")]
    NotFeasible { certificate: f64 },
}

/// A point on `St(q,n)`, kept orthonormal to within [`ORTHONORMALITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    mat: DMatrix<f64>,
}

impl StiefelPoint {
    /// Wraps a matrix after checking `‖XᵀX − I‖_F`. Defects up to `1e-6` are
    /// repaired by a thin QR re-orthonormalization; anything worse is rejected.
    pub fn new(mat: DMatrix<f64>) -> Result<Self, ManifoldError> {
        let (n, q) = (mat.nrows(), mat.ncols());
        if q == 0 || q >= n {
            return Err(ManifoldError::BadShape { nrows: n, ncols: q });
        }
        let defect = orthonormality_defect(&mat);
        if defect <= ORTHONORMALITY_TOL {
            return Ok(StiefelPoint { mat });
        }
        if defect <= REPAIR_TOL {
            return Ok(StiefelPoint { mat: orthonormalize(&mat) });
        }
        Err(ManifoldError::NotOrthonormal { defect })
    }

    /// Construction for matrices that are orthonormal by construction;
    /// still repairs drift so long runs cannot accumulate error.
    pub(crate) fn from_computed(mat: DMatrix<f64>) -> Self {
        if orthonormality_defect(&mat) > ORTHONORMALITY_TOL {
            StiefelPoint { mat: orthonormalize(&mat) }
        } else {
            StiefelPoint { mat }
        }
    }

    /// A uniformly random point, via thin QR of a Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Self {
        assert!(q < n && q > 0, "need 0 < q < n");
        let g = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        StiefelPoint { mat: orthonormalize(&g) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.mat.nrows(), self.mat.ncols())
    }

    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.mat)
    }
}

/// A tangent vector `η ∈ T_X St(q,n)`, i.e. `Xᵀη + ηᵀX = 0`, carried together
/// with its base point.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: StiefelPoint,
    eta: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: StiefelPoint, eta: DMatrix<f64>) -> Result<Self, ManifoldError> {
        let (n, q) = base.dims();
        if eta.nrows() != n || eta.ncols() != q {
            return Err(ManifoldError::ShapeMismatch {
                expected_rows: n,
                expected_cols: q,
                rows: eta.nrows(),
                cols: eta.ncols(),
            });
        }
        let defect = tangency_defect(base.matrix(), &eta);
        debug_assert!(
            defect <= 1e-9 * (1.0 + eta.norm()),
            "tangency defect {defect} too large"
        );
        Ok(TangentVector { base, eta })
    }

    pub fn zero(base: StiefelPoint) -> Self {
        let (n, q) = base.dims();
        TangentVector { base, eta: DMatrix::zeros(n, q) }
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.eta
    }

    pub fn norm(&self) -> f64 {
        self.eta.norm()
    }

    /// Tangent spaces are linear, so scaling stays tangent.
    pub fn scaled(&self, factor: f64) -> TangentVector {
        TangentVector { base: self.base.clone(), eta: &self.eta * factor }
    }

    pub fn tangency_defect(&self) -> f64 {
        tangency_defect(self.base.matrix(), &self.eta)
    }
}

/// A Stiefel point certified to lie in the feasible set `F`, carrying the
/// certificate `c = ‖(I − XXᵀ)·1ₙ/√n‖₂`.
#[derive(Debug, Clone)]
pub struct FeasiblePoint {
    point: StiefelPoint,
    certificate: f64,
}

impl FeasiblePoint {
    pub fn point(&self) -> &StiefelPoint {
        &self.point
    }

    pub fn into_point(self) -> StiefelPoint {
        self.point
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.point.matrix()
    }

    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    pub fn dims(&self) -> (usize, usize) {
        self.point.dims()
    }
}

fn orthonormality_defect(mat: &DMatrix<f64>) -> f64 {
    let q = mat.ncols();
    let gram = mat.transpose() * mat;
    (gram - DMatrix::identity(q, q)).norm()
}

fn tangency_defect(x: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    let xe = x.transpose() * eta;
    (&xe + xe.transpose()).norm()
}

/// Thin QR with the sign of each diagonal of `R` fixed positive, so the
/// result is deterministic and continuous in the input.
fn orthonormalize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let q = mat.ncols();
    let qr = mat.clone().qr();
    let mut qmat = qr.q();
    let r = qr.r();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            for i in 0..qmat.nrows() {
                qmat[(i, j)] = -qmat[(i, j)];
            }
        }
    }
    qmat
}

fn sym(b: &DMatrix<f64>) -> DMatrix<f64> {
    (b + b.transpose()) * 0.5
}

/// Orthogonal projection of an ambient matrix onto `T_X St(q,n)`:
/// `η = V − X·sym(XᵀV)`.
pub fn tangent_project(x: &StiefelPoint, v: &DMatrix<f64>) -> Result<TangentVector, ManifoldError> {
    let (n, q) = x.dims();
    if v.nrows() != n || v.ncols() != q {
        return Err(ManifoldError::ShapeMismatch {
            expected_rows: n,
            expected_cols: q,
            rows: v.nrows(),
            cols: v.ncols(),
        });
    }
    let xv = x.matrix().transpose() * v;
    let eta = v - x.matrix() * sym(&xv);
    Ok(TangentVector { base: x.clone(), eta })
}

/// QR+SVD retraction: `R_X(η) = Q·(UVᵀ)` where `[Q,R] = qr(X+η)` and
/// `[U,S,V] = svd(R)`. `UVᵀ` is the polar factor of `R`, which makes the map
/// well defined whenever `X+η` has full column rank.
pub fn retract(x: &StiefelPoint, eta: &TangentVector) -> Result<StiefelPoint, ManifoldError> {
    let (n, q) = x.dims();
    let em = eta.matrix();
    if em.nrows() != n || em.ncols() != q {
        return Err(ManifoldError::ShapeMismatch {
            expected_rows: n,
            expected_cols: q,
            rows: em.nrows(),
            cols: em.ncols(),
        });
    }
    let sum = x.matrix() + em;
    let qr = sum.qr();
    let mut qmat = qr.q();
    let mut r = qr.r();
    // sign-fix so Q and R are uniquely determined
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                qmat[(i, j)] = -qmat[(i, j)];
            }
            for c in 0..q {
                r[(j, c)] = -r[(j, c)];
            }
        }
    }
    let svd = r.svd(true, true);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min > 1e-12) {
        return Err(ManifoldError::RankDeficient { sigma_min });
    }
    let (mut u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut v_t = v_t;
    // Deterministic sign convention: largest-magnitude entry of each left
    // singular vector positive. The compensating flip of vᵀ keeps U·Vᵀ intact.
    for j in 0..q {
        let mut best = 0usize;
        for i in 0..q {
            if u[(i, j)].abs() > u[(best, j)].abs() {
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..q {
                u[(i, j)] = -u[(i, j)];
                v_t[(j, i)] = -v_t[(j, i)];
            }
        }
    }
    let polar = u * v_t;
    Ok(StiefelPoint::from_computed(qmat * polar))
}

/// Inverse of [`retract`]: returns `η = Y·S − X` where `S` solves the
/// Lyapunov equation `(XᵀY)S + S(YᵀX) = 2I`.
///
/// The equation is linearized over the `q²` entries of `S` (Kronecker form)
/// and solved densely; `q` stays small here, so this is both simple and exact.
/// A singular system means some pair of eigenvalues of `XᵀY` sums to zero,
/// i.e. the points are outside the retraction's invertibility domain.
pub fn inverse_retract(x: &StiefelPoint, y: &StiefelPoint) -> Result<TangentVector, ManifoldError> {
    let (n, q) = x.dims();
    if y.dims() != (n, q) {
        let (rows, cols) = y.dims();
        return Err(ManifoldError::ShapeMismatch {
            expected_rows: n,
            expected_cols: q,
            rows,
            cols,
        });
    }
    let b = x.matrix().transpose() * y.matrix(); // XᵀY, and YᵀX = Bᵀ
    let s = solve_lyapunov(&b)?;
    let eta = y.matrix() * &s - x.matrix();
    // the exact solution is tangent; scrub round-off so the invariant holds
    let xv = x.matrix().transpose() * &eta;
    let eta = eta - x.matrix() * sym(&xv);
    Ok(TangentVector { base: x.clone(), eta })
}

/// Solves `B·S + S·Bᵀ = 2I` for `S` (returned symmetrized).
fn solve_lyapunov(b: &DMatrix<f64>) -> Result<DMatrix<f64>, ManifoldError> {
    let q = b.nrows();
    let mut kron = DMatrix::zeros(q * q, q * q);
    // vec(BS) = (I ⊗ B) vec(S), vec(SBᵀ) = (B ⊗ I) vec(S), columns vec'd
    for col in 0..q {
        for row in 0..q {
            let out = col * q + row;
            for k in 0..q {
                kron[(out, col * q + k)] += b[(row, k)];
                kron[(out, k * q + row)] += b[(col, k)];
            }
        }
    }
    let mut rhs = DVector::zeros(q * q);
    for i in 0..q {
        rhs[i * q + i] = 2.0;
    }
    let lu = kron.clone().lu();
    let sol = lu.solve(&rhs).ok_or(ManifoldError::RetractionDomain)?;
    let s = DMatrix::from_fn(q, q, |i, j| sol[j * q + i]);
    // reject ill-conditioned solves the LU did not flag
    let residual = (b * &s + &s * b.transpose()
        - DMatrix::<f64>::identity(q, q) * 2.0)
        .norm();
    if !residual.is_finite() || residual > 1e-6 {
        return Err(ManifoldError::RetractionDomain);
    }
    Ok(sym(&s))
}

/// Closed-form projection onto the feasible set: with `1̃ = 1ₙ/√n` and
/// `q* = Xᵀ1̃/‖Xᵀ1̃‖₂`,
///
/// ```text
/// Y* = 1̃ q*ᵀ + X (I − q* q*ᵀ)
/// ```
///
/// maximizes `tr(XᵀY)` over `F`, equivalently minimizes `‖X − Y‖_F`. In the
/// measure-zero degenerate case `Xᵀ1̃ = 0` the maximizer is undefined and the
/// last canonical basis vector is substituted for `q*`, which deterministically
/// replaces the last column direction with `1̃`.
pub fn feasible_project(x: &StiefelPoint) -> FeasiblePoint {
    let (n, q) = x.dims();
    let ones_tilde = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let xt1 = x.matrix().transpose() * &ones_tilde;
    let norm = xt1.norm();
    let q_star = if norm <= 1e-12 {
        let mut e = DVector::zeros(q);
        e[q - 1] = 1.0;
        e
    } else {
        &xt1 / norm
    };
    let correction = DMatrix::identity(q, q) - &q_star * q_star.transpose();
    let y = &ones_tilde * q_star.transpose() + x.matrix() * correction;
    let point = StiefelPoint::from_computed(y);
    let certificate = feasibility_certificate(&point);
    debug_assert!(certificate <= FEASIBILITY_TOL, "certificate {certificate}");
    FeasiblePoint { point, certificate }
}

/// `‖(I − XXᵀ)·1̃‖₂`: zero exactly when `1ₙ` lies in the column span.
pub fn feasibility_certificate(x: &StiefelPoint) -> f64 {
    let n = x.dims().0;
    let ones_tilde = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let xt1 = x.matrix().transpose() * &ones_tilde;
    (&ones_tilde - x.matrix() * xt1).norm()
}

/// Certifies that a point already lies in `F` without modifying it.
pub fn certify_feasible(point: StiefelPoint) -> Result<FeasiblePoint, ManifoldError> {
    let certificate = feasibility_certificate(&point);
    if certificate > FEASIBILITY_TOL {
        return Err(ManifoldError::NotFeasible { certificate });
    }
    Ok(FeasiblePoint { point, certificate })
}
