//! One-dimensional PDE-constrained control problems posed through
//! [`ConstrainedProblem`]: boundary control of steady advection and
//! log-diffusivity inversion for a steady diffusion equation.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::operator::DenseOperator;
use crate::optim::{reduced_gradient, ConstrainedProblem};
use crate::scalar::Scalar;
use crate::spectral::svd;

/// Thomas algorithm for `lower[i−1] x[i−1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn tridiagonal_solve<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    check_len("tridiagonal rhs", n, rhs.len())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    check_len("tridiagonal lower", n - 1, lower.len())?;
    check_len("tridiagonal upper", n - 1, upper.len())?;
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - lower[i - 1] * c[i - 1];
        }
        if pivot == T::zero() || !pivot.is_finite() {
            return Err(Error::ZeroPivot {
                context: "tridiagonal solve",
                row: i,
            });
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        d[i] = if i == 0 {
            rhs[0] / pivot
        } else {
            (rhs[i] - lower[i - 1] * d[i - 1]) / pivot
        };
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Ok(d)
}

/// Steady transport `β u′ = 0` on `(0, 1)` with inflow condition
/// `−β u(0) = z` and objective `½∫u²`.
///
/// Unknowns are the nodal values `u_0..u_n`, `h = 1/n`. The constraint is
/// `c_0 = −β u_0 − z`, `c_i = β (u_i − u_{i−1})` (upwind), and the objective
/// uses trapezoid weights, so for constant states every quantity is exact:
/// `u ≡ −z/β`, `f = z²/(2β²)`, `∇f = z/β²`.
///
/// The multiplier `y` of this discretization is the continuous adjoint `v`
/// of `−β v′ = −u, v(1) = 0` at the nodes `x_i, i ≥ 1`, while `y_0 = −v(0)`
/// carries the inflow pairing. The reduced gradient is `−y_0 = v(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionProblem<T> {
    pub n: usize,
    pub beta: T,
    weights: Vec<T>,
}

impl<T: Scalar> AdvectionProblem<T> {
    pub fn new(n: usize, beta: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 2 cells, got {n}")));
        }
        if !(beta > T::zero()) {
            return Err(Error::InvalidArgument(format!("velocity must be positive, got {beta}")));
        }
        let h = T::one() / T::of(n as f64);
        let mut weights = vec![h; n + 1];
        weights[0] = h / T::of(2.0);
        weights[n] = h / T::of(2.0);
        Ok(Self { n, beta, weights })
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.n).map(|i| T::of(i as f64) / T::of(self.n as f64)).collect()
    }

    /// `z/β²`.
    pub fn exact_gradient(&self, z: T) -> T {
        z / (self.beta * self.beta)
    }

    /// Nodal adjoint field `v` recovered from the multiplier.
    pub fn adjoint_field(&self, y: &[T]) -> Vec<T> {
        let mut v = y.to_vec();
        v[0] = -v[0];
        v
    }
}

impl<T: Scalar> ConstrainedProblem<T> for AdvectionProblem<T> {
    fn state_dim(&self) -> usize {
        self.n + 1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>> {
        check_len("advection state", self.n + 1, u.len())?;
        check_len("advection control", 1, z.len())?;
        let mut c = self.apply_duc(u, z, u)?;
        c[0] = c[0] - z[0];
        Ok(c)
    }

    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>> {
        check_len("advection control", 1, z.len())?;
        let mut u = vec![T::zero(); self.n + 1];
        u[0] = -z[0] / self.beta;
        for i in 1..=self.n {
            u[i] = u[i - 1];
        }
        Ok(u)
    }

    fn apply_duc(&self, _u: &[T], _z: &[T], du: &[T]) -> Result<Vec<T>> {
        check_len("advection direction", self.n + 1, du.len())?;
        let b = self.beta;
        Ok((0..=self.n)
            .map(|i| if i == 0 { -b * du[0] } else { b * (du[i] - du[i - 1]) })
            .collect())
    }

    fn apply_duc_adjoint(&self, _u: &[T], _z: &[T], y: &[T]) -> Result<Vec<T>> {
        check_len("advection multiplier", self.n + 1, y.len())?;
        let b = self.beta;
        let n = self.n;
        Ok((0..=n)
            .map(|k| {
                let own = if k == 0 { -b * y[0] } else { b * y[k] };
                let next = if k < n { b * y[k + 1] } else { T::zero() };
                own - next
            })
            .collect())
    }

    /// Downwind sweep from the outflow boundary.
    fn solve_duc_adjoint(&self, _u: &[T], _z: &[T], rhs: &[T]) -> Result<Vec<T>> {
        check_len("advection adjoint rhs", self.n + 1, rhs.len())?;
        let b = self.beta;
        let n = self.n;
        let mut y = vec![T::zero(); n + 1];
        y[n] = rhs[n] / b;
        for k in (1..n).rev() {
            y[k] = rhs[k] / b + y[k + 1];
        }
        y[0] = -(rhs[0] / b + y[1]);
        Ok(y)
    }

    fn apply_dzc_adjoint(&self, _u: &[T], _z: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(vec![-y[0]])
    }

    fn objective(&self, u: &[T], _z: &[T]) -> T {
        self.weights
            .iter()
            .zip(u)
            .fold(T::zero(), |s, (&w, &x)| s + w * x * x)
            / T::of(2.0)
    }

    fn grad_u_objective(&self, u: &[T], _z: &[T]) -> Vec<T> {
        self.weights.iter().zip(u).map(|(&w, &x)| w * x).collect()
    }

    fn grad_z_objective(&self, _u: &[T], _z: &[T]) -> Vec<T> {
        vec![T::zero()]
    }
}

/// `−(e^z u′)′ = 0` on `(0, 1)`, `u(0) = g0`, `u(1) = g1`, with the
/// log-diffusivity `z` piecewise constant on the `n + 1` cells between the
/// interior nodes `x_i = i h`, `h = 1/(n+1)`.
///
/// Constraint `c = K(z) u − b(z)` with the conservative stiffness
/// `K(z)/h`; objective `½ h Σ (u_i − u_obs,i)² + ½ κ h Σ (z_j − z0_j)²`.
/// `K` is symmetric, so the adjoint solve reuses the forward operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProblem<T> {
    pub n: usize,
    pub g0: T,
    pub g1: T,
    pub u_obs: Vec<T>,
    pub kappa: T,
    pub z_prior: Vec<T>,
}

impl<T: Scalar> EllipticProblem<T> {
    pub fn new(n: usize, g0: T, g1: T, u_obs: Vec<T>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("need n >= 3 interior nodes, got {n}")));
        }
        check_len("observations", n, u_obs.len())?;
        Ok(Self {
            n,
            g0,
            g1,
            u_obs,
            kappa: T::zero(),
            z_prior: vec![T::zero(); n + 1],
        })
    }

    /// Adds `½ κ h ‖z − z0‖²` to the objective.
    pub fn with_regularization(mut self, kappa: T, z_prior: Vec<T>) -> Result<Self> {
        if !(kappa >= T::zero()) {
            return Err(Error::InvalidArgument(format!("kappa must be nonnegative, got {kappa}")));
        }
        check_len("prior control", self.n + 1, z_prior.len())?;
        self.kappa = kappa;
        self.z_prior = z_prior;
        Ok(self)
    }

    /// Data generated by the forward model at `z_true`.
    pub fn synthetic(n: usize, g0: T, g1: T, z_true: &[T]) -> Result<Self> {
        let blank = Self::new(n, g0, g1, vec![T::zero(); n])?;
        let u_obs = blank.solve_forward(z_true)?;
        Ok(Self { u_obs, ..blank })
    }

    pub fn h(&self) -> T {
        T::one() / T::of((self.n + 1) as f64)
    }

    pub fn nodes(&self) -> Vec<T> {
        (1..=self.n).map(|i| T::of(i as f64) * self.h()).collect()
    }

    pub fn cell_midpoints(&self) -> Vec<T> {
        (0..=self.n)
            .map(|j| (T::of(j as f64) + T::of(0.5)) * self.h())
            .collect()
    }

    /// `(lower, diag, upper)` of `K(z)`.
    pub fn tridiagonal(&self, z: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        check_len("log-diffusivity", self.n + 1, z.len())?;
        let h = self.h();
        let a: Vec<T> = z.iter().map(|&zj| zj.exp() / h).collect();
        let diag = (0..self.n).map(|i| a[i] + a[i + 1]).collect();
        let off: Vec<T> = (1..self.n).map(|i| -a[i]).collect();
        Ok((off.clone(), diag, off))
    }

    pub fn stiffness(&self, z: &[T]) -> Result<Matrix<T>> {
        let (lower, diag, upper) = self.tridiagonal(z)?;
        let n = self.n;
        Ok(Matrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                lower[j]
            } else if i + 1 == j {
                upper[i]
            } else {
                T::zero()
            }
        }))
    }

    fn load(&self, z: &[T]) -> Vec<T> {
        let h = self.h();
        let mut b = vec![T::zero(); self.n];
        b[0] = z[0].exp() / h * self.g0;
        b[self.n - 1] = b[self.n - 1] + z[self.n].exp() / h * self.g1;
        b
    }

    fn extended(&self, u: &[T], left: T, right: T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n + 2);
        out.push(left);
        out.extend_from_slice(u);
        out.push(right);
        out
    }

    fn tridiag_apply(&self, z: &[T], x: &[T]) -> Result<Vec<T>> {
        let (lower, diag, upper) = self.tridiagonal(z)?;
        check_len("elliptic vector", self.n, x.len())?;
        Ok((0..self.n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s = s + lower[i - 1] * x[i - 1];
                }
                if i + 1 < self.n {
                    s = s + upper[i] * x[i + 1];
                }
                s
            })
            .collect())
    }

    /// Per-cell `e^{z_j} (Δu/h)(Δv/h) h` with boundary values `g` for `u` and
    /// zero for `v`.
    pub fn cell_gradient(&self, u: &[T], v: &[T], z: &[T]) -> Vec<T> {
        let h = self.h();
        let ue = self.extended(u, self.g0, self.g1);
        let ve = self.extended(v, T::zero(), T::zero());
        (0..=self.n)
            .map(|j| z[j].exp() * (ue[j + 1] - ue[j]) / h * (ve[j + 1] - ve[j]) / h * h)
            .collect()
    }
}

impl<T: Scalar> ConstrainedProblem<T> for EllipticProblem<T> {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.n + 1
    }

    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>> {
        let ku = self.tridiag_apply(z, u)?;
        Ok(ku.iter().zip(self.load(z)).map(|(&a, b)| a - b).collect())
    }

    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>> {
        let (lower, diag, upper) = self.tridiagonal(z)?;
        tridiagonal_solve(&lower, &diag, &upper, &self.load(z))
    }

    fn apply_duc(&self, _u: &[T], z: &[T], du: &[T]) -> Result<Vec<T>> {
        self.tridiag_apply(z, du)
    }

    fn apply_duc_adjoint(&self, _u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        self.tridiag_apply(z, y)
    }

    fn solve_duc_adjoint(&self, _u: &[T], z: &[T], rhs: &[T]) -> Result<Vec<T>> {
        let (lower, diag, upper) = self.tridiagonal(z)?;
        tridiagonal_solve(&lower, &diag, &upper, rhs)
    }

    /// `∂c_i/∂z_j` is nonzero only for the two nodes bounding cell `j`.
    fn apply_dzc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        check_len("elliptic multiplier", self.n, y.len())?;
        Ok(self.cell_gradient(u, y, z))
    }

    fn objective(&self, u: &[T], z: &[T]) -> T {
        let h = self.h();
        let misfit = u
            .iter()
            .zip(&self.u_obs)
            .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b));
        let prior = z
            .iter()
            .zip(&self.z_prior)
            .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b));
        (h * misfit + self.kappa * h * prior) / T::of(2.0)
    }

    fn grad_u_objective(&self, u: &[T], _z: &[T]) -> Vec<T> {
        let h = self.h();
        u.iter().zip(&self.u_obs).map(|(&a, &b)| h * (a - b)).collect()
    }

    fn grad_z_objective(&self, _u: &[T], z: &[T]) -> Vec<T> {
        let s = self.kappa * self.h();
        z.iter().zip(&self.z_prior).map(|(&a, &b)| s * (a - b)).collect()
    }
}

/// Smallest singular value of a discrete operator: a positive value
/// certifies unique discrete solvability with stability constant `1/σ_min`.
pub fn discrete_infsup<T: Scalar>(op: &DenseOperator<T>) -> Result<T> {
    let s = svd(op, None)?;
    let k = op.domain().dim().min(op.codomain().dim());
    Ok(s.sigma.get(k.wrapping_sub(1)).copied().unwrap_or(T::zero()))
}

/// Nodal fields of a solved problem, written as CSV columns `x,u,v,grad`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDump {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Gradient samples aligned with `x`; `None` where the control has no
    /// value at that node.
    pub grad: Vec<Option<f64>>,
}

impl FieldDump {
    pub const CSV_HEADER: &'static str = "x,u,v,grad";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.x.len() {
            let g = self.grad[i].map(|g| format!("{g:e}")).unwrap_or_default();
            out.push_str(&format!("{:e},{:e},{:e},{g}\n", self.x[i], self.u[i], self.v[i]));
        }
        out
    }
}

/// Settings shared by the registered problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeConfig {
    pub n: usize,
    pub beta: f64,
    pub g0: f64,
    pub g1: f64,
    pub kappa: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            n: 31,
            beta: 1.0,
            g0: 0.0,
            g1: 1.0,
            kappa: 0.0,
        }
    }
}

/// Smooth log-diffusivity used to synthesize elliptic observations.
pub fn reference_log_diffusivity<T: Scalar>(x: T) -> T {
    T::of(0.5) * (T::of(std::f64::consts::PI) * x).sin() - T::of(0.3) * x
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdeProblem<T> {
    Advection(AdvectionProblem<T>),
    Elliptic(EllipticProblem<T>),
}

impl<T: Scalar> PdeProblem<T> {
    pub const NAMES: [&'static str; 2] = ["advection", "elliptic"];

    /// Builds a registered problem. The elliptic instance observes the
    /// state produced by [`reference_log_diffusivity`].
    pub fn build(name: &str, cfg: &PdeConfig) -> Result<Self> {
        match name {
            "advection" => Ok(Self::Advection(AdvectionProblem::new(cfg.n, T::of(cfg.beta))?)),
            "elliptic" => {
                if cfg.n < 3 {
                    return Err(Error::InvalidArgument(format!("need n >= 3, got {}", cfg.n)));
                }
                let h = 1.0 / (cfg.n + 1) as f64;
                let z_true: Vec<T> = (0..=cfg.n)
                    .map(|j| reference_log_diffusivity(T::of((j as f64 + 0.5) * h)))
                    .collect();
                let prob = EllipticProblem::synthetic(cfg.n, T::of(cfg.g0), T::of(cfg.g1), &z_true)?
                    .with_regularization(T::of(cfg.kappa), vec![T::zero(); cfg.n + 1])?;
                Ok(Self::Elliptic(prob))
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown problem {other:?}; expected one of {:?}",
                Self::NAMES
            ))),
        }
    }

    fn inner(&self) -> &dyn ConstrainedProblem<T> {
        match self {
            Self::Advection(p) => p,
            Self::Elliptic(p) => p,
        }
    }

    /// Default starting control: `z = 1` for advection, `z ≡ 0` for elliptic.
    pub fn initial_control(&self) -> Vec<T> {
        match self {
            Self::Advection(_) => vec![T::one()],
            Self::Elliptic(p) => vec![T::zero(); p.n + 1],
        }
    }

    /// Nominal line-search step.
    pub fn default_step(&self) -> T {
        match self {
            Self::Advection(p) => p.beta * p.beta,
            Self::Elliptic(_) => T::of(ELLIPTIC_STEP),
        }
    }

    pub fn fields(&self, z: &[T]) -> Result<FieldDump> {
        let rep = reduced_gradient(self.inner(), z)?;
        let f64s = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        match self {
            Self::Advection(p) => {
                let mut grad = vec![None; p.n + 1];
                grad[0] = Some(rep.gradient[0].as_f64());
                Ok(FieldDump {
                    x: f64s(&p.nodes()),
                    u: f64s(&rep.state),
                    v: f64s(&p.adjoint_field(&rep.adjoint)),
                    grad,
                })
            }
            Self::Elliptic(p) => {
                // Rows at x_0 = 0 and the interior nodes; the gradient of
                // cell (x_i, x_{i+1}) sits on the row of its left node.
                let mut x = vec![0.0];
                x.extend(f64s(&p.nodes()));
                let mut u = vec![p.g0.as_f64()];
                u.extend(f64s(&rep.state));
                let mut v = vec![0.0];
                v.extend(f64s(&rep.adjoint));
                x.push(1.0);
                u.push(p.g1.as_f64());
                v.push(0.0);
                let mut grad: Vec<Option<f64>> = rep.gradient.iter().map(|g| Some(g.as_f64())).collect();
                grad.push(None);
                Ok(FieldDump { x, u, v, grad })
            }
        }
    }
}

/// Nominal Armijo step for the elliptic inversion.
pub const ELLIPTIC_STEP: f64 = 64.0;

impl<T: Scalar> ConstrainedProblem<T> for PdeProblem<T> {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn control_dim(&self) -> usize {
        self.inner().control_dim()
    }
    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>> {
        self.inner().residual(u, z)
    }
    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>> {
        self.inner().solve_forward(z)
    }
    fn apply_duc(&self, u: &[T], z: &[T], du: &[T]) -> Result<Vec<T>> {
        self.inner().apply_duc(u, z, du)
    }
    fn apply_duc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        self.inner().apply_duc_adjoint(u, z, y)
    }
    fn solve_duc_adjoint(&self, u: &[T], z: &[T], rhs: &[T]) -> Result<Vec<T>> {
        self.inner().solve_duc_adjoint(u, z, rhs)
    }
    fn apply_dzc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        self.inner().apply_dzc_adjoint(u, z, y)
    }
    fn objective(&self, u: &[T], z: &[T]) -> T {
        self.inner().objective(u, z)
    }
    fn grad_u_objective(&self, u: &[T], z: &[T]) -> Vec<T> {
        self.inner().grad_u_objective(u, z)
    }
    fn grad_z_objective(&self, u: &[T], z: &[T]) -> Vec<T> {
        self.inner().grad_z_objective(u, z)
    }
}

/// Largest entrywise difference between the assembled `D_u c` and its
/// assembled adjoint. Zero when the discretization is self-adjoint.
pub fn elliptic_adjoint_matrix_defect<T: Scalar>(prob: &EllipticProblem<T>, z: &[T]) -> Result<T> {
    let u = prob.solve_forward(z)?;
    let forward = crate::optim::dense_duc(prob, &u, z)?;
    let n = prob.n;
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        cols.push(prob.apply_duc_adjoint(&u, z, &e)?);
        e[j] = T::zero();
    }
    let adjoint = Matrix::from_columns(n, &cols)?;
    Ok(forward.sub(&adjoint)?.max_abs())
}
