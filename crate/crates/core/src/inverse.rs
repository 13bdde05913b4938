//! Least squares, Tikhonov regularization, Picard diagnostics and the
//! instability of inverting an operator with decaying singular values.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{add_vec, axpy, norm2, scale_vec, sub_vec, Cholesky, Matrix};
use crate::operator::{DenseOperator, InnerProductSpace};
use crate::scalar::Scalar;
use crate::spectral::{fundamental_subspaces, svd, SvdResult};

/// Minimum-norm least-squares solution `x = Σ_{i≤r} σᵢ⁻¹ ⟨y, vᵢ⟩ uᵢ`.
pub fn normal_solve<T: Scalar>(op: &DenseOperator<T>, y: &[T]) -> Result<Vec<T>> {
    check_len("least-squares data", op.codomain().dim(), y.len())?;
    let s = svd(op, None)?;
    pseudo_inverse_apply(op, &s, y)
}

fn pseudo_inverse_apply<T: Scalar>(
    op: &DenseOperator<T>,
    s: &SvdResult<T>,
    y: &[T],
) -> Result<Vec<T>> {
    let mut x = vec![T::zero(); op.domain().dim()];
    for i in 0..s.rank {
        let c = op.codomain().inner(y, &s.left_vectors[i])? / s.sigma[i];
        axpy(c, &s.right_vectors[i], &mut x);
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TikhonovSolution<T> {
    pub x: Vec<T>,
    pub kappa: T,
    /// ‖A x − y‖ in the codomain metric.
    pub residual_norm: T,
    /// ‖x − x₀‖ in the domain metric.
    pub prior_distance: T,
}

/// Solves `(A*A + κI) x = A*y + κx₀`.
///
/// Multiplying through by the domain metric gives the SPD system
/// `(AᵀM_Y A + κM_X) x = AᵀM_Y y + κM_X x₀`, which is factored by Cholesky.
pub fn tikhonov_solve<T: Scalar>(
    op: &DenseOperator<T>,
    y: &[T],
    kappa: T,
    x0: &[T],
) -> Result<TikhonovSolution<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "regularization parameter must be positive, got {kappa}"
        )));
    }
    check_len("Tikhonov data", op.codomain().dim(), y.len())?;
    check_len("Tikhonov prior", op.domain().dim(), x0.len())?;
    let a = op.matrix();
    let my_a = op.codomain().metric().matmul(a)?;
    let mx = op.domain().metric();
    let lhs = a.transpose().matmul(&my_a)?.add(&mx.scale(kappa))?.symmetrized();
    let rhs = add_vec(
        &a.tr_matvec(&op.codomain().apply_metric(y)?)?,
        &scale_vec(kappa, &op.domain().apply_metric(x0)?),
    );
    let x = Cholesky::factor(&lhs)?.solve(&rhs)?;
    let residual_norm = op.codomain().norm(&sub_vec(&op.apply(&x)?, y))?;
    let prior_distance = op.domain().norm(&sub_vec(&x, x0))?;
    Ok(TikhonovSolution {
        x,
        kappa,
        residual_norm,
        prior_distance,
    })
}

/// Euclidean norm of the Tikhonov optimality-system residual
/// `(A*A + κI)x − (A*y + κx₀)`.
pub fn tikhonov_optimality_residual<T: Scalar>(
    op: &DenseOperator<T>,
    y: &[T],
    x0: &[T],
    sol: &TikhonovSolution<T>,
) -> Result<T> {
    let adj = op.adjoint()?;
    let lhs = add_vec(
        &adj.apply(&op.apply(&sol.x)?)?,
        &scale_vec(sol.kappa, &sol.x),
    );
    let rhs = add_vec(&adj.apply(y)?, &scale_vec(sol.kappa, x0));
    Ok(norm2(&sub_vec(&lhs, &rhs)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardRow {
    /// 1-based singular index.
    pub i: usize,
    pub sigma: f64,
    pub coeff: f64,
    pub ratio: f64,
    pub cumsum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardTable {
    pub rows: Vec<PicardRow>,
    /// ‖P_{N(A*)} y‖ / ‖y‖: solvability requires this to vanish.
    pub null_defect: f64,
}

impl PicardTable {
    pub const CSV_HEADER: &'static str = "i,sigma,coeff,ratio,cumsum";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.i, r.sigma, r.coeff, r.ratio, r.cumsum
            ));
        }
        out
    }
}

/// Tabulates `|⟨y, vᵢ⟩|`, its ratio to `σᵢ` and the running `Σ ratio²` over
/// the retained singular values.
pub fn picard_diagnostic<T: Scalar>(op: &DenseOperator<T>, y: &[T]) -> Result<PicardTable> {
    check_len("Picard data", op.codomain().dim(), y.len())?;
    let s = svd(op, None)?;
    let space = op.codomain();
    let mut cumsum = 0.0;
    let mut rows = Vec::with_capacity(s.rank);
    for i in 0..s.rank {
        let coeff = space.inner(y, &s.left_vectors[i])?.abs().as_f64();
        let sigma = s.sigma[i].as_f64();
        let ratio = coeff / sigma;
        cumsum += ratio * ratio;
        rows.push(PicardRow {
            i: i + 1,
            sigma,
            coeff,
            ratio,
            cumsum,
        });
    }
    let y_norm = space.norm(y)?;
    let null_defect = if y_norm == T::zero() {
        0.0
    } else {
        let mut proj = vec![T::zero(); y.len()];
        for q in &fundamental_subspaces(&s).null_astar {
            axpy(space.inner(y, q)?, q, &mut proj);
        }
        (space.norm(&proj)? / y_norm).as_f64()
    };
    Ok(PicardTable { rows, null_defect })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amplification {
    /// ‖x̃ − x‖ / ‖ỹ − y‖.
    pub amplification: f64,
    /// The singular value `σ_N` whose left vector carried the perturbation.
    pub sigma: f64,
}

/// Perturbs `y` by `δ·v_N`, solves both systems by minimum-norm least
/// squares and reports the error amplification (1-based `index`).
pub fn instability_demo<T: Scalar>(
    op: &DenseOperator<T>,
    y: &[T],
    index: usize,
    delta: T,
) -> Result<Amplification> {
    check_len("instability data", op.codomain().dim(), y.len())?;
    let s = svd(op, None)?;
    if index == 0 || index > s.rank {
        return Err(Error::InvalidArgument(format!(
            "singular index {index} outside 1..={}",
            s.rank
        )));
    }
    if delta == T::zero() {
        return Err(Error::InvalidArgument("perturbation size must be nonzero".into()));
    }
    let mut perturbed = y.to_vec();
    axpy(delta, &s.left_vectors[index - 1], &mut perturbed);
    let x = pseudo_inverse_apply(op, &s, y)?;
    let x_pert = pseudo_inverse_apply(op, &s, &perturbed)?;
    let dx = op.domain().norm(&sub_vec(&x_pert, &x))?;
    let dy = op.codomain().norm(&sub_vec(&perturbed, y))?;
    Ok(Amplification {
        amplification: (dx / dy).as_f64(),
        sigma: s.sigma[index - 1].as_f64(),
    })
}

/// Midpoint-rule discretization of `x ↦ ∫₀ᵗ x(s) ds` on `(0,1)`.
///
/// `x` is sampled at cell midpoints, `y` at right cell endpoints, and both
/// spaces carry the `h`-scaled inner product so discrete norms approximate
/// L² norms.
pub fn integration_operator<T: Scalar>(n: usize) -> Result<DenseOperator<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "integration operator needs n >= 2, got {n}"
        )));
    }
    let h = T::one() / T::of(n as f64);
    let a = Matrix::from_fn(n, n, |i, j| if i >= j { h } else { T::zero() });
    let space = InnerProductSpace::scaled(n, h)?;
    DenseOperator::new(space.clone(), space, a)
}

/// Cell midpoints `(j + ½) h` matching [`integration_operator`]'s domain.
pub fn midpoints<T: Scalar>(n: usize) -> Vec<T> {
    let h = 1.0 / n as f64;
    (0..n).map(|j| T::of((j as f64 + 0.5) * h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::rng::SeededRng;

    fn op(rows: &[&[f64]]) -> DenseOperator<f64> {
        DenseOperator::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn consistent_system_recovered() {
        let mut rng = SeededRng::new(2);
        let a = DenseOperator::<f64>::euclidean(rng.matrix(4, 4));
        let x_true: Vec<f64> = rng.vector(4);
        let x = normal_solve(&a, &a.apply(&x_true).unwrap()).unwrap();
        assert!(max_abs(&sub_vec(&x, &x_true)) < 1e-10);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm_minimizer() {
        let a = op(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let y = [1.0, 0.0];
        let x = normal_solve(&a, &y).unwrap();
        // Normal equations hold.
        let at = a.adjoint().unwrap();
        let lhs = at.apply(&a.apply(&x).unwrap()).unwrap();
        let rhs = at.apply(&y).unwrap();
        assert!(max_abs(&sub_vec(&lhs, &rhs)) < 1e-12);
        // Minimum norm: x ∈ R(A*) = span{[1,2]}, and x₁ + 2x₂ = 1/2.
        assert!((x[0] - 0.1).abs() < 1e-12 && (x[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn line_fit_through_collinear_points() {
        let t = [0.0, 1.0, 2.0];
        let a = op(&[&[1.0, t[0]], &[1.0, t[1]], &[1.0, t[2]]]);
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t + 1.0).collect();
        let x = normal_solve(&a, &y).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_to_range() {
        let mut rng = SeededRng::new(13);
        let a = DenseOperator::<f64>::euclidean(rng.matrix(7, 3));
        let y: Vec<f64> = rng.vector(7);
        let x = normal_solve(&a, &y).unwrap();
        let r = sub_vec(&a.apply(&x).unwrap(), &y);
        for _ in 0..20 {
            let w: Vec<f64> = rng.vector(3);
            let aw = a.apply(&w).unwrap();
            assert!(crate::linalg::dot(&r, &aw).abs() <= 1e-9);
        }
    }

    #[test]
    fn tikhonov_limits() {
        let mut rng = SeededRng::new(17);
        let a = DenseOperator::<f64>::euclidean(rng.matrix(6, 4));
        let y: Vec<f64> = rng.vector(6);
        let x0: Vec<f64> = rng.vector(4);
        let heavy = tikhonov_solve(&a, &y, 1e8, &x0).unwrap();
        assert!(norm2(&sub_vec(&heavy.x, &x0)) <= 1e-6 * norm2(&x0));
        let light = tikhonov_solve(&a, &y, 1e-12, &x0).unwrap();
        let ls = normal_solve(&a, &y).unwrap();
        assert!(norm2(&sub_vec(&light.x, &ls)) <= 1e-6 * norm2(&ls));
    }

    #[test]
    fn tikhonov_rejects_nonpositive_kappa() {
        let a = op(&[&[1.0]]);
        assert!(matches!(
            tikhonov_solve(&a, &[1.0], 0.0, &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(tikhonov_solve(&a, &[1.0], -1.0, &[0.0]).is_err());
    }

    #[test]
    fn tikhonov_optimality_and_stability_bound_in_weighted_spaces() {
        let mut rng = SeededRng::new(23);
        let a = DenseOperator::new(
            InnerProductSpace::with_metric(rng.spd_matrix::<f64>(4)).unwrap(),
            InnerProductSpace::with_metric(rng.spd_matrix::<f64>(5)).unwrap(),
            rng.matrix(5, 4),
        )
        .unwrap();
        let y: Vec<f64> = rng.vector(5);
        let x0: Vec<f64> = rng.vector(4);
        for kappa in [1e-3, 1e-1, 10.0] {
            let sol = tikhonov_solve(&a, &y, kappa, &x0).unwrap();
            let a_norm = a.norm().unwrap();
            let res = tikhonov_optimality_residual(&a, &y, &x0, &sol).unwrap();
            let xn = norm2(&sol.x);
            assert!(res <= 1e-10 * (a_norm * a_norm + kappa) * xn, "kappa={kappa} res={res}");
            // Smallest eigenvalue of A*A + κI is at least κ.
            let dom = a.domain();
            let bound = (a_norm * a.codomain().norm(&y).unwrap() + kappa * dom.norm(&x0).unwrap()) / kappa;
            assert!(dom.norm(&sol.x).unwrap() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn picard_table_for_single_left_vector() {
        let a = integration_operator::<f64>(16).unwrap();
        let s = svd(&a, None).unwrap();
        let n = s.rank;
        let t = picard_diagnostic(&a, &s.left_vectors[n - 1]).unwrap();
        for row in &t.rows[..n - 1] {
            assert!(row.coeff < 1e-12);
        }
        let last = t.rows[n - 1];
        assert!((last.coeff - 1.0).abs() < 1e-12);
        assert!((last.ratio - 1.0 / last.sigma).abs() < 1e-9 / last.sigma);
    }

    #[test]
    fn picard_table_for_null_adjoint_data() {
        let a = op(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let t = picard_diagnostic(&a, &[1.0, -1.0]).unwrap();
        assert!(t.rows.iter().all(|r| r.coeff <= 1e-12));
        assert!((t.null_defect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn picard_smooth_data_decays_and_cumsum_converges() {
        let n = 64;
        let a = integration_operator::<f64>(n).unwrap();
        let x: Vec<f64> = midpoints(n).iter().map(|s| (std::f64::consts::PI * s).sin()).collect();
        let t = picard_diagnostic(&a, &a.apply(&x).unwrap()).unwrap();
        assert!(t.null_defect < 1e-12);
        for w in t.rows.windows(2) {
            assert!(w[1].cumsum >= w[0].cumsum);
        }
        // Σ ratio² = ‖x‖² for exact data (x lies in R(A*) since A is invertible).
        let xn2 = a.domain().inner(&x, &x).unwrap();
        assert!((t.rows.last().unwrap().cumsum - xn2).abs() < 1e-9);
        let head: f64 = t.rows[..4].iter().map(|r| r.ratio).sum();
        let tail: f64 = t.rows[n - 4..].iter().map(|r| r.ratio).sum();
        assert!(tail < 1e-2 * head, "head {head} tail {tail}");
        assert!(t.to_csv().starts_with("i,sigma,coeff,ratio,cumsum\n1,"));
    }

    #[test]
    fn integration_operator_basics() {
        let a = integration_operator::<f64>(2).unwrap();
        assert_eq!(a.apply(&[1.0, 1.0]).unwrap(), vec![0.5, 1.0]);
        assert_eq!(a.apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(integration_operator::<f64>(1).is_err());
        let cond = |n| {
            let s = svd(&integration_operator::<f64>(n).unwrap(), None).unwrap();
            s.sigma[0] / s.sigma[n - 1]
        };
        let (c16, c32, c64) = (cond(16), cond(32), cond(64));
        assert!(c16 < c32 && c32 < c64, "{c16} {c32} {c64}");
    }

    #[test]
    fn amplification_is_inverse_singular_value() {
        let n = 32;
        let a = integration_operator::<f64>(n).unwrap();
        let y = a.apply(&vec![1.0; n]).unwrap();
        let s = svd(&a, None).unwrap();
        let first = instability_demo(&a, &y, 1, 1e-3).unwrap();
        assert!((first.amplification * s.sigma[0] - 1.0).abs() < 1e-6);
        let last = instability_demo(&a, &y, n, 1e-3).unwrap();
        assert!((last.amplification * s.sigma[n - 1] - 1.0).abs() < 1e-6);
        assert!(last.amplification > first.amplification);
        let scaled = instability_demo(&a, &y, n, 1e-1).unwrap();
        assert!((scaled.amplification - last.amplification).abs() <= 1e-10 * last.amplification);
        assert!(instability_demo(&a, &y, n + 1, 1e-3).is_err());
        assert!(instability_demo(&a, &y, 0, 1e-3).is_err());
    }
}
