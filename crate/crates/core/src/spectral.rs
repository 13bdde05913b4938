//! Spectral decomposition of self-adjoint operators, the SVD assembled from
//! the normal operator `A*A`, the four fundamental subspaces, and orthogonal
//! projectors.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{jacobi_eigen, scale_vec, Matrix};
use crate::operator::{
    adjoint_pair_check, orthonormality_defect, DenseOperator, InnerProductSpace,
};
use crate::scalar::Scalar;

/// Normalized adjoint defect above which an operator is rejected as not
/// self-adjoint.
pub const SELF_ADJOINT_TOL: f64 = 1e-8;

/// Relative rank cut-off used when no explicit tolerance is given.
pub const DEFAULT_RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigResult<T> {
    /// Descending.
    pub eigenvalues: Vec<T>,
    /// Orthonormal in the operator's metric, matching `eigenvalues`.
    pub eigenvectors: Vec<Vec<T>>,
}

impl<T: Scalar> EigResult<T> {
    /// `Σ λᵢ vᵢ ⟨vᵢ, ·⟩` as a matrix.
    pub fn reconstruct(&self, space: &InnerProductSpace<T>) -> Result<Matrix<T>> {
        let n = space.dim();
        let mut out = Matrix::zeros(n, n);
        for (&lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let mv = space.apply_metric(v)?;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + lambda * v[i] * mv[j];
                }
            }
        }
        Ok(out)
    }
}

/// Eigendecomposition of an operator that is self-adjoint in its metric.
///
/// With `M = L Lᵀ` the symmetric matrix `L⁻¹ (M A) L⁻ᵀ` is diagonalized by
/// cyclic Jacobi and its eigenvectors are mapped back through `L⁻ᵀ`.
pub fn eig_self_adjoint<T: Scalar>(op: &DenseOperator<T>) -> Result<EigResult<T>> {
    if op.domain() != op.codomain() {
        return Err(Error::InvalidArgument(
            "eigendecomposition needs an operator from a space to itself".into(),
        ));
    }
    let report = adjoint_pair_check(op, op, 16, 0x5eed)?;
    if report.max_defect > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint {
            defect: report.max_defect,
        });
    }
    eig_unchecked(op)
}

fn eig_unchecked<T: Scalar>(op: &DenseOperator<T>) -> Result<EigResult<T>> {
    let space = op.domain();
    match space.cholesky() {
        None => {
            let (values, vectors) = jacobi_eigen(op.matrix())?;
            Ok(EigResult {
                eigenvalues: values,
                eigenvectors: vectors.columns(),
            })
        }
        Some(chol) => {
            let s = space.metric().matmul(op.matrix())?.symmetrized();
            let n = space.dim();
            // L⁻¹ S, then L⁻¹ (L⁻¹ S)ᵀ = L⁻¹ S L⁻ᵀ since S is symmetric.
            let half: Vec<Vec<T>> = s.columns().iter().map(|c| chol.solve_lower(c)).collect();
            let half_t = Matrix::from_columns(n, &half)?.transpose();
            let cols: Vec<Vec<T>> = half_t
                .columns()
                .iter()
                .map(|c| chol.solve_lower(c))
                .collect();
            let b = Matrix::from_columns(n, &cols)?;
            let (values, w) = jacobi_eigen(&b)?;
            let vectors = w.columns().iter().map(|c| chol.solve_upper(c)).collect();
            Ok(EigResult {
                eigenvalues: values,
                eigenvectors: vectors,
            })
        }
    }
}

/// Singular system of a dense operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult<T> {
    /// Nonnegative, descending, one per domain dimension.
    pub sigma: Vec<T>,
    /// `u₁..u_n`, orthonormal in the domain metric.
    pub right_vectors: Vec<Vec<T>>,
    /// `v₁..v_m`, orthonormal in the codomain metric.
    pub left_vectors: Vec<Vec<T>>,
    pub rank: usize,
    pub rank_tol: T,
}

impl<T: Scalar> SvdResult<T> {
    /// `Σ_{i≤r} σᵢ vᵢ ⟨uᵢ, ·⟩_X` as a matrix.
    pub fn reconstruct(&self, domain: &InnerProductSpace<T>) -> Result<Matrix<T>> {
        let m = self.left_vectors.len();
        let n = self.right_vectors.len();
        let mut out = Matrix::zeros(m, n);
        for i in 0..self.rank {
            let mu = domain.apply_metric(&self.right_vectors[i])?;
            let v = &self.left_vectors[i];
            for r in 0..m {
                for c in 0..n {
                    out[(r, c)] = out[(r, c)] + self.sigma[i] * v[r] * mu[c];
                }
            }
        }
        Ok(out)
    }

    /// Smallest retained singular value, if any.
    pub fn sigma_min_retained(&self) -> Option<T> {
        self.rank.checked_sub(1).map(|i| self.sigma[i])
    }
}

/// Flips `v` so that its first entry of largest magnitude is positive.
fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < T::zero() { -T::one() } else { T::one() };
        }
    }
    if sign < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// SVD through the eigendecomposition of `A*A`.
///
/// Singular values are taken as `‖A uᵢ‖` rather than square roots of the
/// eigenvalues of `A*A`, which keeps numerically-null directions at
/// roundoff level instead of `√ε`. `rank_tol` defaults to `1e-10·σ₁`.
pub fn svd<T: Scalar>(op: &DenseOperator<T>, rank_tol: Option<T>) -> Result<SvdResult<T>> {
    let adj = op.adjoint()?;
    let normal = adj.compose(op)?;
    let eig = eig_unchecked(&normal)?;
    let codomain = op.codomain();

    let mut pairs: Vec<(T, Vec<T>)> = eig
        .eigenvectors
        .into_iter()
        .map(|mut u| {
            canonical_sign(&mut u);
            let s = codomain.norm(&op.apply(&u)?)?;
            Ok((s, u))
        })
        .collect::<Result<_>>()?;
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let sigma_max = pairs.first().map_or(T::zero(), |p| p.0);
    let tol = rank_tol.unwrap_or(T::of(DEFAULT_RANK_RTOL) * sigma_max);
    let rank = pairs.iter().take_while(|p| p.0 > tol && p.0 > T::zero()).count();

    let (sigma, right_vectors): (Vec<T>, Vec<Vec<T>>) = pairs.into_iter().unzip();
    let mut left_vectors: Vec<Vec<T>> = right_vectors[..rank]
        .iter()
        .zip(&sigma)
        .map(|(u, &s)| Ok(scale_vec(T::one() / s, &op.apply(u)?)))
        .collect::<Result<_>>()?;

    let m = codomain.dim();
    if left_vectors.len() < m {
        let outer = op.compose(&adj)?;
        let candidates = eig_unchecked(&outer)?.eigenvectors;
        // Smallest eigenvalues of AA* first: those span N(A*).
        for mut c in candidates.into_iter().rev() {
            if left_vectors.len() == m {
                break;
            }
            for _pass in 0..2 {
                for q in &left_vectors {
                    let d = codomain.inner(&c, q)?;
                    crate::linalg::axpy(-d, q, &mut c);
                }
            }
            let nc = codomain.norm(&c)?;
            if nc > T::of(1e-8) {
                let mut q = scale_vec(T::one() / nc, &c);
                canonical_sign(&mut q);
                left_vectors.push(q);
            }
        }
        if left_vectors.len() < m {
            return Err(Error::NonConvergence {
                context: "left singular basis completion",
                iterations: m,
            });
        }
    }

    Ok(SvdResult {
        sigma,
        right_vectors,
        left_vectors,
        rank,
        rank_tol: tol,
    })
}

/// Orthonormal bases of R(A), N(A), R(A*), N(A*).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceBases<T> {
    pub range_a: Vec<Vec<T>>,
    pub null_a: Vec<Vec<T>>,
    pub range_astar: Vec<Vec<T>>,
    pub null_astar: Vec<Vec<T>>,
}

impl<T> SubspaceBases<T> {
    /// `(dim R(A), dim N(A), dim R(A*), dim N(A*))`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.range_a.len(),
            self.null_a.len(),
            self.range_astar.len(),
            self.null_astar.len(),
        )
    }
}

pub fn fundamental_subspaces<T: Scalar>(s: &SvdResult<T>) -> SubspaceBases<T> {
    let r = s.rank;
    SubspaceBases {
        range_a: s.left_vectors[..r].to_vec(),
        null_astar: s.left_vectors[r..].to_vec(),
        range_astar: s.right_vectors[..r].to_vec(),
        null_a: s.right_vectors[r..].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solvability {
    pub solvable: bool,
    /// ‖P_{N(A*)} y‖ / ‖y‖.
    pub defect: f64,
}

/// `A x = y` is solvable iff `y ⊥ N(A*)`.
pub fn solvability_check<T: Scalar>(
    op: &DenseOperator<T>,
    y: &[T],
    tol: T,
) -> Result<Solvability> {
    check_len("right-hand side", op.codomain().dim(), y.len())?;
    let space = op.codomain();
    let y_norm = space.norm(y)?;
    if y_norm == T::zero() {
        return Ok(Solvability {
            solvable: true,
            defect: 0.0,
        });
    }
    let basis = fundamental_subspaces(&svd(op, None)?).null_astar;
    let mut proj = vec![T::zero(); y.len()];
    for q in &basis {
        let c = space.inner(y, q)?;
        crate::linalg::axpy(c, q, &mut proj);
    }
    let defect = space.norm(&proj)? / y_norm;
    Ok(Solvability {
        solvable: defect <= tol,
        defect: defect.as_f64(),
    })
}

/// `P = Σ qᵢ ⟨qᵢ, ·⟩` for a basis orthonormal in `space`'s metric.
pub fn orthogonal_projector<T: Scalar>(
    basis: &[Vec<T>],
    space: &InnerProductSpace<T>,
) -> Result<DenseOperator<T>> {
    for q in basis {
        check_len("projector basis vector", space.dim(), q.len())?;
    }
    let deviation = orthonormality_defect(basis, space)?;
    if deviation > T::of(1e-10) {
        return Err(Error::NotOrthonormal {
            deviation: deviation.as_f64(),
        });
    }
    let n = space.dim();
    let mut p = Matrix::zeros(n, n);
    for q in basis {
        let mq = space.apply_metric(q)?;
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] = p[(i, j)] + q[i] * mq[j];
            }
        }
    }
    DenseOperator::new(space.clone(), space.clone(), p)
}
