//! Weighted inner-product spaces, dense operators between them, and the
//! adjoint contract `⟨A u, v⟩_Y = ⟨u, A* v⟩_X` that the rest of the crate
//! builds on.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// `ℝⁿ` with the inner product `⟨x, y⟩ = xᵀ M y` for an SPD metric `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProductSpace<T> {
    metric: Option<(Matrix<T>, Cholesky<T>)>,
    dim: usize,
}

impl<T: Scalar> InnerProductSpace<T> {
    /// Standard Euclidean inner product.
    pub fn euclidean(dim: usize) -> Self {
        Self { metric: None, dim }
    }

    /// Validates symmetry (to `1e-12·max|M|`) and positive definiteness.
    pub fn with_metric(metric: Matrix<T>) -> Result<Self> {
        check_len("metric (square)", metric.rows(), metric.cols())?;
        let asym = metric.asymmetry();
        if asym > T::of(1e-12) * metric.max_abs() {
            return Err(Error::NotSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        let chol = Cholesky::factor(&metric)?;
        Ok(Self {
            dim: metric.rows(),
            metric: Some((metric, chol)),
        })
    }

    /// Diagonal metric `diag(weights)`; quadrature weights, typically.
    pub fn weighted(weights: &[T]) -> Result<Self> {
        Self::with_metric(Matrix::from_diag(weights))
    }

    /// Euclidean inner product scaled by `h`, the midpoint-rule L² proxy.
    pub fn scaled(dim: usize, h: T) -> Result<Self> {
        Self::weighted(&vec![h; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        self.metric.is_none()
    }

    pub fn metric(&self) -> Matrix<T> {
        match &self.metric {
            Some((m, _)) => m.clone(),
            None => Matrix::identity(self.dim),
        }
    }

    pub fn cholesky(&self) -> Option<&Cholesky<T>> {
        self.metric.as_ref().map(|(_, c)| c)
    }

    /// `M x`.
    pub fn apply_metric(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("metric application", self.dim, x.len())?;
        match &self.metric {
            Some((m, _)) => m.matvec(x),
            None => Ok(x.to_vec()),
        }
    }

    /// `M⁻¹ b` through the cached Cholesky factor.
    pub fn solve_metric(&self, b: &[T]) -> Result<Vec<T>> {
        check_len("metric solve", self.dim, b.len())?;
        match &self.metric {
            Some((_, c)) => c.solve(b),
            None => Ok(b.to_vec()),
        }
    }

    pub fn inner(&self, x: &[T], y: &[T]) -> Result<T> {
        check_len("inner product (left)", self.dim, x.len())?;
        check_len("inner product (right)", self.dim, y.len())?;
        Ok(dot(x, &self.apply_metric(y)?))
    }

    pub fn norm(&self, x: &[T]) -> Result<T> {
        Ok(self.inner(x, x)?.max(T::zero()).sqrt())
    }

    /// Random vector of unit norm in this space.
    pub fn random_unit(&self, rng: &mut SeededRng) -> Vec<T> {
        loop {
            let v: Vec<T> = rng.vector(self.dim);
            let n = self.norm(&v).expect("length matches");
            if n > T::of(1e-8) {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

/// Free-function form of [`InnerProductSpace::inner`].
pub fn inner<T: Scalar>(space: &InnerProductSpace<T>, x: &[T], y: &[T]) -> Result<T> {
    space.inner(x, y)
}

/// Linear map `A : X → Y` stored as its `dim Y × dim X` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T> {
    domain: InnerProductSpace<T>,
    codomain: InnerProductSpace<T>,
    matrix: Matrix<T>,
}

impl<T: Scalar> DenseOperator<T> {
    pub fn new(
        domain: InnerProductSpace<T>,
        codomain: InnerProductSpace<T>,
        matrix: Matrix<T>,
    ) -> Result<Self> {
        check_len("operator rows vs codomain", codomain.dim(), matrix.rows())?;
        check_len("operator cols vs domain", domain.dim(), matrix.cols())?;
        Ok(Self {
            domain,
            codomain,
            matrix,
        })
    }

    /// Operator between Euclidean spaces.
    pub fn euclidean(matrix: Matrix<T>) -> Self {
        Self {
            domain: InnerProductSpace::euclidean(matrix.cols()),
            codomain: InnerProductSpace::euclidean(matrix.rows()),
            matrix,
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Ok(Self::euclidean(Matrix::from_rows(rows)?))
    }

    pub fn domain(&self) -> &InnerProductSpace<T> {
        &self.domain
    }

    pub fn codomain(&self) -> &InnerProductSpace<T> {
        &self.codomain
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        self.matrix.matvec(x)
    }

    /// Same matrix, different entries; spaces unchanged.
    pub fn with_matrix(&self, matrix: Matrix<T>) -> Result<Self> {
        Self::new(self.domain.clone(), self.codomain.clone(), matrix)
    }

    pub fn compose(&self, inner: &Self) -> Result<Self> {
        Self::new(
            inner.domain.clone(),
            self.codomain.clone(),
            self.matrix.matmul(&inner.matrix)?,
        )
    }

    /// `M_X⁻¹ Aᵀ M_Y`, with domain and codomain swapped.
    pub fn adjoint(&self) -> Result<Self> {
        let mut entries = self.matrix.transpose();
        if !self.codomain.is_euclidean() {
            entries = entries.matmul(&self.codomain.metric())?;
        }
        if let Some(chol) = self.domain.cholesky() {
            entries = chol.solve_matrix(&entries)?;
        }
        Self::new(self.codomain.clone(), self.domain.clone(), entries)
    }

    /// Operator norm induced by the two metrics, by power iteration on `A*A`.
    pub fn norm(&self) -> Result<T> {
        let normal = self.adjoint()?.compose(self)?;
        Ok(power_iteration_norm(&normal)?.sqrt())
    }

    /// Whether `A` is self-adjoint in its metric up to `tol` normalized defect.
    pub fn self_adjoint_defect(&self) -> Result<T> {
        if self.domain != self.codomain {
            return Err(Error::InvalidArgument(
                "self-adjointness needs identical domain and codomain".into(),
            ));
        }
        // M A must be symmetric.
        let ma = self.domain.metric().matmul(&self.matrix)?;
        let scale = ma.max_abs().max(T::min_positive_value());
        Ok(ma.asymmetry() / scale)
    }
}

/// Free-function form of [`DenseOperator::adjoint`].
pub fn adjoint<T: Scalar>(op: &DenseOperator<T>) -> Result<DenseOperator<T>> {
    op.adjoint()
}

/// Largest eigenvalue of an operator that is self-adjoint and positive
/// semidefinite in its own metric.
pub(crate) fn power_iteration_norm<T: Scalar>(op: &DenseOperator<T>) -> Result<T> {
    let space = op.domain();
    let n = space.dim();
    if n == 0 || op.matrix().max_abs() == T::zero() {
        return Ok(T::zero());
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut x: Vec<T> = (0..n)
        .map(|i| T::one() + T::of(0.37) * T::of(((i * 7919) % 13) as f64))
        .collect();
    let nx = space.norm(&x)?;
    x.iter_mut().for_each(|v| *v = *v / nx);
    let mut lambda = T::zero();
    for _ in 0..5000 {
        let y = op.apply(&x)?;
        let ny = space.norm(&y)?;
        if ny == T::zero() {
            return Ok(T::zero());
        }
        let next = space.inner(&x, &y)?;
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= T::of(1e-15) * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Outcome of a randomized adjoint identity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjointReport {
    pub trials: usize,
    /// max |⟨Au,v⟩ − ⟨u,A*v⟩| / (‖u‖‖v‖‖A‖) over the sampled pairs.
    pub max_defect: f64,
}

/// Checks the adjoint identity for `op` and the adjoint built by [`adjoint`].
pub fn adjoint_consistency_check<T: Scalar>(
    op: &DenseOperator<T>,
    trials: usize,
    seed: u64,
) -> Result<AdjointReport> {
    adjoint_pair_check(op, &op.adjoint()?, trials, seed)
}

/// Checks the adjoint identity for an arbitrary candidate adjoint.
pub fn adjoint_pair_check<T: Scalar>(
    op: &DenseOperator<T>,
    candidate: &DenseOperator<T>,
    trials: usize,
    seed: u64,
) -> Result<AdjointReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    check_len(
        "candidate adjoint rows",
        op.domain().dim(),
        candidate.matrix().rows(),
    )?;
    check_len(
        "candidate adjoint cols",
        op.codomain().dim(),
        candidate.matrix().cols(),
    )?;
    let op_norm = op.norm()?;
    let scale = if op_norm > T::zero() { op_norm } else { T::one() };
    let mut rng = SeededRng::new(seed);
    let mut worst = T::zero();
    for _ in 0..trials {
        let u = op.domain().random_unit(&mut rng);
        let v = op.codomain().random_unit(&mut rng);
        let lhs = op.codomain().inner(&op.apply(&u)?, &v)?;
        let rhs = op.domain().inner(&u, &candidate.apply(&v)?)?;
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(AdjointReport {
        trials,
        max_defect: worst.as_f64(),
    })
}

/// Modified Gram-Schmidt in the metric of `space`, with one
/// re-orthogonalization pass per vector.
///
/// A vector whose residual falls below `1e-12` times the largest input norm
/// is reported as linearly dependent.
pub fn orthonormalize<T: Scalar>(
    vectors: &[Vec<T>],
    space: &InnerProductSpace<T>,
) -> Result<Vec<Vec<T>>> {
    let mut largest = T::zero();
    for v in vectors {
        largest = largest.max(space.norm(v)?);
    }
    let threshold = T::of(1e-12) * largest;
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        for _pass in 0..2 {
            for q in &basis {
                let c = space.inner(&w, q)?;
                crate::linalg::axpy(-c, q, &mut w);
            }
        }
        let nw = space.norm(&w)?;
        if !(nw > threshold) {
            return Err(Error::LinearlyDependent {
                index,
                residual: nw.as_f64(),
            });
        }
        basis.push(w.into_iter().map(|x| x / nw).collect());
    }
    Ok(basis)
}

/// Largest |⟨qᵢ, qⱼ⟩ − δᵢⱼ| over a set of vectors.
pub fn orthonormality_defect<T: Scalar>(
    basis: &[Vec<T>],
    space: &InnerProductSpace<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for (i, qi) in basis.iter().enumerate() {
        for (j, qj) in basis.iter().enumerate().skip(i) {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((space.inner(qi, qj)? - target).abs());
        }
    }
    Ok(worst)
}

/// JSON exchange record for an operator; omitted metrics mean identity.
/// Matrices are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorRecord {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_metric: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codomain_metric: Option<Vec<f64>>,
}

impl OperatorRecord {
    pub fn to_operator<T: Scalar>(&self) -> Result<DenseOperator<T>> {
        let cast = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        let matrix = Matrix::from_row_major(self.rows, self.cols, cast(&self.entries))?;
        let space = |dim: usize, metric: &Option<Vec<f64>>| match metric {
            None => Ok(InnerProductSpace::euclidean(dim)),
            Some(m) => InnerProductSpace::with_metric(Matrix::from_row_major(dim, dim, cast(m))?),
        };
        DenseOperator::new(
            space(self.cols, &self.domain_metric)?,
            space(self.rows, &self.codomain_metric)?,
            matrix,
        )
    }

    pub fn from_operator<T: Scalar>(op: &DenseOperator<T>) -> Self {
        let flat = |m: &Matrix<T>| m.as_slice().iter().map(|x| x.as_f64()).collect();
        let metric = |s: &InnerProductSpace<T>| (!s.is_euclidean()).then(|| flat(&s.metric()));
        Self {
            rows: op.matrix().rows(),
            cols: op.matrix().cols(),
            entries: flat(op.matrix()),
            domain_metric: metric(op.domain()),
            codomain_metric: metric(op.codomain()),
        }
    }
}
