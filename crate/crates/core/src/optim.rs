//! Reduced-space adjoint machinery for equality-constrained problems
//! `min f(u, z)` subject to `c(u, z) = 0`, where the state `u` is eliminated
//! through the forward solve and the gradient with respect to the control
//! `z` is assembled from one adjoint solve.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{add_vec, axpy, dot, max_abs, norm2, scale_vec, sub_vec, Lu, Matrix};
use crate::scalar::Scalar;

/// Callback interface of a separable equality-constrained problem.
///
/// The constraint maps `(u, z) ∈ ℝⁿ × ℝᵖ` to `ℝⁿ`, so `D_u c` is square.
/// All inner products are Euclidean; problems that discretize L² fold their
/// quadrature weights into `f` and `c`.
pub trait ConstrainedProblem<T: Scalar>: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// `c(u, z)`.
    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>>;

    /// `u` with `c(u, z) = 0`.
    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>>;

    /// `[D_u c(u, z)] du`.
    fn apply_duc(&self, u: &[T], z: &[T], du: &[T]) -> Result<Vec<T>>;

    /// `[D_u c(u, z)]* y`.
    fn apply_duc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>>;

    /// Solves `[D_u c(u, z)]* y = rhs`.
    ///
    /// The default assembles `D_u c` column by column and factors it densely;
    /// problems with structure (triangular, tridiagonal) override this.
    fn solve_duc_adjoint(&self, u: &[T], z: &[T], rhs: &[T]) -> Result<Vec<T>> {
        dense_adjoint_solve(self, u, z, rhs)
    }

    /// `[D_z c(u, z)]* y`.
    fn apply_dzc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>>;

    fn objective(&self, u: &[T], z: &[T]) -> T;
    fn grad_u_objective(&self, u: &[T], z: &[T]) -> Vec<T>;
    fn grad_z_objective(&self, u: &[T], z: &[T]) -> Vec<T>;
}

/// `D_u c(u, z)` assembled from Jacobian-vector products.
pub fn dense_duc<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    u: &[T],
    z: &[T],
) -> Result<Matrix<T>> {
    let n = problem.state_dim();
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        cols.push(problem.apply_duc(u, z, &e)?);
        e[j] = T::zero();
    }
    Matrix::from_columns(n, &cols)
}

/// Generic dense fallback for the adjoint solve.
pub fn dense_adjoint_solve<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    u: &[T],
    z: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let jac = dense_duc(problem, u, z)?;
    Lu::factor(&jac, T::of(1e-13), "adjoint system")?.solve_transpose(rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedGradientReport<T> {
    pub f_value: T,
    pub gradient: Vec<T>,
    pub state: Vec<T>,
    pub adjoint: Vec<T>,
    /// ‖c(u, z)‖.
    pub forward_residual_norm: T,
    /// ‖[D_u c]* y + ∇_u f‖.
    pub adjoint_residual_norm: T,
}

/// Forward solve, adjoint solve `[D_u c]* y = −∇_u f`, then
/// `∇f = ∇_z f + [D_z c]* y`.
pub fn reduced_gradient<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    z: &[T],
) -> Result<ReducedGradientReport<T>> {
    check_len("control", problem.control_dim(), z.len())?;
    let u = problem.solve_forward(z)?;
    check_len("forward state", problem.state_dim(), u.len())?;
    let forcing = scale_vec(-T::one(), &problem.grad_u_objective(&u, z));
    let y = problem.solve_duc_adjoint(&u, z, &forcing)?;
    let gradient = add_vec(
        &problem.grad_z_objective(&u, z),
        &problem.apply_dzc_adjoint(&u, z, &y)?,
    );
    let forward_residual_norm = norm2(&problem.residual(&u, z)?);
    let adjoint_residual_norm = norm2(&sub_vec(&problem.apply_duc_adjoint(&u, z, &y)?, &forcing));
    if !gradient.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite {
            context: "reduced gradient",
        });
    }
    Ok(ReducedGradientReport {
        f_value: problem.objective(&u, z),
        gradient,
        state: u,
        adjoint: y,
        forward_residual_norm,
        adjoint_residual_norm,
    })
}

/// `z ↦ f(u(z), z)`.
pub fn reduced_objective<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    z: &[T],
) -> Result<T> {
    let u = problem.solve_forward(z)?;
    Ok(problem.objective(&u, z))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdCheck {
    pub step: f64,
    /// ‖g_fd − g‖_∞ / ‖g‖_∞.
    pub rel_error: f64,
    /// ‖g_fd − g‖_∞.
    pub abs_error: f64,
}

/// Central differences of the reduced objective along every control
/// direction, compared against [`reduced_gradient`].
pub fn fd_gradient_check<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    z: &[T],
    steps: &[T],
) -> Result<Vec<FdCheck>> {
    let g = reduced_gradient(problem, z)?.gradient;
    let g_scale = max_abs(&g).max(T::min_positive_value());
    steps
        .iter()
        .map(|&h| {
            if !(h > T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "finite-difference step must be positive, got {h}"
                )));
            }
            let fd = fd_gradient(problem, z, h)?;
            let err = max_abs(&sub_vec(&fd, &g));
            Ok(FdCheck {
                step: h.as_f64(),
                rel_error: (err / g_scale).as_f64(),
                abs_error: err.as_f64(),
            })
        })
        .collect()
}

/// Central-difference gradient of the reduced objective.
pub fn fd_gradient<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    z: &[T],
    h: T,
) -> Result<Vec<T>> {
    let two_h = h + h;
    let mut probe = z.to_vec();
    (0..z.len())
        .map(|j| {
            probe[j] = z[j] + h;
            let fp = reduced_objective(problem, &probe)?;
            probe[j] = z[j] - h;
            let fm = reduced_objective(problem, &probe)?;
            probe[j] = z[j];
            Ok((fp - fm) / two_h)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// Step length accepted by the line search (0 on the final record).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub records: Vec<IterationRecord>,
    pub z: Vec<T>,
    /// ‖∇f‖ ≤ tol was reached.
    pub converged: bool,
    /// The line search could not find a decrease.
    pub stalled: bool,
}

impl<T> Trajectory<T> {
    pub const CSV_HEADER: &'static str = "k,f,grad_norm,step";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", r.k, r.f, r.grad_norm, r.step));
        }
        out
    }

    pub fn objective_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }
}

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Steepest descent on the reduced objective with Armijo backtracking.
///
/// Every iteration starts from the nominal `step` and halves it until
/// `f(z − s g) ≤ f(z) − c₁ s ‖g‖²`. Trial points whose forward solve fails
/// count as rejected; a failure at an accepted iterate is an error.
pub fn gradient_descent<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    z0: &[T],
    step: T,
    iters: usize,
    tol: T,
) -> Result<Trajectory<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "descent step must be positive, got {step}"
        )));
    }
    let wrap = |iterate: usize| move |e: Error| Error::ForwardSolve {
        iterate,
        source: Box::new(e),
    };
    let mut z = z0.to_vec();
    let mut report = reduced_gradient(problem, &z).map_err(wrap(0))?;
    let mut records = Vec::with_capacity(iters + 1);
    let c1 = T::of(ARMIJO_C1);
    let half = T::of(0.5);
    let mut converged = false;
    let mut stalled = false;
    for k in 0..iters {
        let g = &report.gradient;
        let g2 = dot(g, g);
        if g2.sqrt() <= tol {
            converged = true;
            break;
        }
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = z.clone();
            axpy(-s, g, &mut trial);
            if let Ok(f_trial) = reduced_objective(problem, &trial) {
                if f_trial.is_finite() && f_trial <= report.f_value - c1 * s * g2 {
                    accepted = Some(trial);
                    break;
                }
            }
            s = s * half;
        }
        let Some(next) = accepted else {
            stalled = true;
            break;
        };
        records.push(IterationRecord {
            k,
            f: report.f_value.as_f64(),
            grad_norm: g2.sqrt().as_f64(),
            step: s.as_f64(),
        });
        z = next;
        report = reduced_gradient(problem, &z).map_err(wrap(k + 1))?;
    }
    let grad_norm = norm2(&report.gradient);
    if grad_norm <= tol {
        converged = true;
    }
    records.push(IterationRecord {
        k: records.len(),
        f: report.f_value.as_f64(),
        grad_norm: grad_norm.as_f64(),
        step: 0.0,
    });
    Ok(Trajectory {
        records,
        z,
        converged,
        stalled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// ‖c(u, z)‖.
    pub forward: f64,
    /// ‖∇_u f + [D_u c]* y‖.
    pub adjoint: f64,
    /// ‖∇_z f + [D_z c]* y‖.
    pub control: f64,
}

pub fn kkt_residuals<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    u: &[T],
    y: &[T],
    z: &[T],
) -> Result<KktResiduals> {
    check_len("KKT state", problem.state_dim(), u.len())?;
    check_len("KKT adjoint", problem.state_dim(), y.len())?;
    check_len("KKT control", problem.control_dim(), z.len())?;
    let forward = norm2(&problem.residual(u, z)?);
    let adjoint = norm2(&add_vec(
        &problem.grad_u_objective(u, z),
        &problem.apply_duc_adjoint(u, z, y)?,
    ));
    let control = norm2(&add_vec(
        &problem.grad_z_objective(u, z),
        &problem.apply_dzc_adjoint(u, z, y)?,
    ));
    Ok(KktResiduals {
        forward: forward.as_f64(),
        adjoint: adjoint.as_f64(),
        control: control.as_f64(),
    })
}

/// Largest normalized defect of `⟨D_u c · du, y⟩ = ⟨du, [D_u c]* y⟩` over
/// `trials` random pairs.
pub fn duc_adjoint_defect<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    u: &[T],
    z: &[T],
    trials: usize,
    seed: u64,
) -> Result<T> {
    let mut rng = crate::rng::SeededRng::new(seed);
    let n = problem.state_dim();
    let mut worst = T::zero();
    for _ in 0..trials {
        let du: Vec<T> = rng.unit_vector(n);
        let y: Vec<T> = rng.unit_vector(n);
        let jdu = problem.apply_duc(u, z, &du)?;
        let jty = problem.apply_duc_adjoint(u, z, &y)?;
        let scale = norm2(&jdu).max(norm2(&jty)).max(T::one());
        worst = worst.max((dot(&jdu, &y) - dot(&du, &jty)).abs() / scale);
    }
    Ok(worst)
}

/// Largest relative mismatch between `apply_duc` and central differences of
/// the residual in `u`, over the canonical directions.
pub fn duc_fd_defect<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    u: &[T],
    z: &[T],
    h: T,
) -> Result<T> {
    let n = problem.state_dim();
    let mut worst = T::zero();
    let mut probe = u.to_vec();
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let exact = problem.apply_duc(u, z, &e)?;
        e[j] = T::zero();
        probe[j] = u[j] + h;
        let rp = problem.residual(&probe, z)?;
        probe[j] = u[j] - h;
        let rm = problem.residual(&probe, z)?;
        probe[j] = u[j];
        let fd = scale_vec(T::one() / (h + h), &sub_vec(&rp, &rm));
        let scale = max_abs(&exact).max(T::one());
        worst = worst.max(max_abs(&sub_vec(&fd, &exact)) / scale);
    }
    Ok(worst)
}

/// `c(u, z) = u − B z`, `f = ½ w_u ‖u‖² + ½ w_z ‖z‖²`.
///
/// The reduced objective is `½ zᵀ (w_u BᵀB + w_z I) z`, so every quantity
/// has a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQuadratic<T> {
    pub b: Matrix<T>,
    pub state_weight: T,
    pub control_weight: T,
}

impl<T: Scalar> LinearQuadratic<T> {
    pub fn new(b: Matrix<T>, state_weight: T, control_weight: T) -> Self {
        Self {
            b,
            state_weight,
            control_weight,
        }
    }

    /// `(w_u BᵀB + w_z I) z`.
    pub fn exact_gradient(&self, z: &[T]) -> Result<Vec<T>> {
        let btbz = self.b.tr_matvec(&self.b.matvec(z)?)?;
        Ok(add_vec(
            &scale_vec(self.state_weight, &btbz),
            &scale_vec(self.control_weight, z),
        ))
    }
}

impl<T: Scalar> ConstrainedProblem<T> for LinearQuadratic<T> {
    fn state_dim(&self) -> usize {
        self.b.rows()
    }

    fn control_dim(&self) -> usize {
        self.b.cols()
    }

    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>> {
        Ok(sub_vec(u, &self.b.matvec(z)?))
    }

    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>> {
        self.b.matvec(z)
    }

    fn apply_duc(&self, _u: &[T], _z: &[T], du: &[T]) -> Result<Vec<T>> {
        Ok(du.to_vec())
    }

    fn apply_duc_adjoint(&self, _u: &[T], _z: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(y.to_vec())
    }

    fn apply_dzc_adjoint(&self, _u: &[T], _z: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(scale_vec(-T::one(), &self.b.tr_matvec(y)?))
    }

    fn objective(&self, u: &[T], z: &[T]) -> T {
        let half = T::of(0.5);
        half * self.state_weight * dot(u, u) + half * self.control_weight * dot(z, z)
    }

    fn grad_u_objective(&self, u: &[T], _z: &[T]) -> Vec<T> {
        scale_vec(self.state_weight, u)
    }

    fn grad_z_objective(&self, _u: &[T], z: &[T]) -> Vec<T> {
        scale_vec(self.control_weight, z)
    }
}
