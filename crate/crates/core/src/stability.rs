//! Stability of equilibria of autonomous ODEs `ẋ = f(x)`.
//!
//! Hurwitz status is decided twice: by a Routh table on the characteristic
//! polynomial and by the existence of an SPD solution of the Lyapunov
//! equation `PA + AᵀP + Q = 0`. Nonsymmetric eigenvalues are never computed.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, jacobi_eigen, norm2, scale_vec, Cholesky, Lu, Matrix};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Largest state dimension accepted by the Kronecker-product solvers.
pub const MAX_DIM: usize = 64;

/// Bound on `‖f(x_eq)‖` for a point to count as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

fn check_square<T: Scalar>(a: &Matrix<T>, context: &'static str) -> Result<usize> {
    check_len(context, a.rows(), a.cols())?;
    let n = a.rows();
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "{context}: dimension {n} outside 1..={MAX_DIM}"
        )));
    }
    Ok(n)
}

/// `PA + AᵀP + Q`.
pub fn lyapunov_residual<T: Scalar>(a: &Matrix<T>, p: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    p.matmul(a)?.add(&a.transpose().matmul(p)?)?.add(q)
}

/// Solves `PA + AᵀP + Q = 0` through the `n² × n²` system
/// `(Aᵀ⊗I + I⊗Aᵀ) vec(P) = −vec(Q)` with column-major `vec`.
///
/// The system is singular exactly when `A` and `−A` share an eigenvalue,
/// which covers every matrix with a pair of eigenvalues on the imaginary axis.
/// Two steps of iterative refinement are applied before symmetrizing.
pub fn lyapunov_solve<T: Scalar>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    let n = check_square(a, "Lyapunov A")?;
    check_len("Lyapunov Q rows", n, q.rows())?;
    check_len("Lyapunov Q cols", n, q.cols())?;
    let at = a.transpose();
    let eye = Matrix::identity(n);
    let kron = at.kron(&eye).add(&eye.kron(&at))?;
    let lu = Lu::factor(&kron, T::of(1e-12), "Lyapunov system")?;

    let vec_of = |m: &Matrix<T>| -> Vec<T> {
        let mut v = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                v.push(m[(i, j)]);
            }
        }
        v
    };
    let unvec = |v: &[T]| Matrix::from_fn(n, n, |i, j| v[i + j * n]);

    let rhs: Vec<T> = vec_of(q).into_iter().map(|x| -x).collect();
    let mut x = lu.solve(&rhs)?;
    for _ in 0..2 {
        let r = vec_of(&lyapunov_residual(a, &unvec(&x), q)?);
        let dx = lu.solve(&r)?;
        axpy(-T::one(), &dx, &mut x);
    }
    let p = unvec(&x).symmetrized();
    if !p.is_finite() {
        return Err(Error::NonFinite {
            context: "Lyapunov solution",
        });
    }
    Ok(p)
}

/// Coefficients `[1, c_{n−1}, …, c₀]` of `det(λI − A)` by Faddeev–LeVerrier.
pub fn characteristic_polynomial<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    let n = check_square(a, "characteristic polynomial")?;
    let mut coeffs = vec![T::one()];
    let mut m = Matrix::zeros(n, n);
    let mut c_prev = T::one();
    for k in 1..=n {
        for i in 0..n {
            m[(i, i)] = m[(i, i)] + c_prev;
        }
        let am = a.matmul(&m)?;
        let trace = am.diagonal().into_iter().fold(T::zero(), |s, x| s + x);
        let c = -trace / T::of(k as f64);
        coeffs.push(c);
        m = am;
        c_prev = c;
    }
    Ok(coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurwitzCheck {
    pub hurwitz: bool,
    /// Smallest leading-column magnitude of the Routh table, computed for
    /// `A / ‖A‖_F` so it is scale free. Zero on the boundary.
    pub margin: f64,
    /// A zero pivot was met: some root sits on (or numerically at) the
    /// imaginary axis.
    pub boundary: bool,
}

const ROUTH_ZERO_TOL: f64 = 1e-10;

/// Routh–Hurwitz test on the characteristic polynomial of `A`.
pub fn hurwitz_check<T: Scalar>(a: &Matrix<T>) -> Result<HurwitzCheck> {
    let n = check_square(a, "Hurwitz check")?;
    let scale = a.frobenius_norm();
    if scale == T::zero() {
        return Ok(HurwitzCheck {
            hurwitz: false,
            margin: 0.0,
            boundary: true,
        });
    }
    let coeffs: Vec<f64> = characteristic_polynomial(&a.scale(T::one() / scale))?
        .into_iter()
        .map(Scalar::as_f64)
        .collect();
    let tol = ROUTH_ZERO_TOL * coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let width = n / 2 + 1;
    let row_from = |start: usize| -> Vec<f64> {
        (0..width)
            .map(|k| coeffs.get(start + 2 * k).copied().unwrap_or(0.0))
            .collect()
    };
    let mut upper = row_from(0);
    let mut lower = row_from(1);
    let mut margin = upper[0].abs();
    let mut all_positive = true;
    // Rows 1..=n of the table; row 0 is the monic leading coefficient.
    for _ in 1..=n {
        let pivot = lower[0];
        margin = margin.min(pivot.abs());
        if pivot.abs() <= tol {
            return Ok(HurwitzCheck {
                hurwitz: false,
                margin: 0.0,
                boundary: true,
            });
        }
        if pivot < 0.0 {
            all_positive = false;
        }
        let next: Vec<f64> = (0..width)
            .map(|k| {
                let u = upper.get(k + 1).copied().unwrap_or(0.0);
                let l = lower.get(k + 1).copied().unwrap_or(0.0);
                (pivot * u - upper[0] * l) / pivot
            })
            .collect();
        upper = std::mem::replace(&mut lower, next);
    }
    Ok(HurwitzCheck {
        hurwitz: all_positive,
        margin,
        boundary: false,
    })
}

/// Central-difference Jacobian of `f` at an equilibrium.
///
/// `h` defaults to `1e−5·(1 + ‖x_eq‖)`.
pub fn linearize<T, F>(f: &F, x_eq: &[T], h: Option<T>) -> Result<Matrix<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    let n = x_eq.len();
    let f0 = f(x_eq);
    check_len("vector field output", n, f0.len())?;
    let residual = norm2(&f0).as_f64();
    if !(residual <= EQUILIBRIUM_TOL) {
        return Err(Error::NotEquilibrium { residual });
    }
    let h = h.unwrap_or(T::of(1e-5) * (T::one() + norm2(x_eq)));
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut probe = x_eq.to_vec();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x_eq[j] + h;
        let fp = f(&probe);
        probe[j] = x_eq[j] - h;
        let fm = f(&probe);
        probe[j] = x_eq[j];
        check_len("vector field output", n, fp.len())?;
        check_len("vector field output", n, fm.len())?;
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(&p, &m)| (p - m) / (h + h))
                .collect::<Vec<T>>(),
        );
    }
    Matrix::from_columns(n, &cols)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NextGeneration<T> {
    /// `ρ(F V⁻¹)`.
    pub r0: T,
    pub k: Matrix<T>,
    pub iterations: usize,
    /// Conditions on the splitting that were violated. They are reported,
    /// not enforced.
    pub warnings: Vec<String>,
}

const R0_TOL: f64 = 1e-10;
const R0_MAX_ITERS: usize = 10_000;

/// Next-generation matrix `K = F V⁻¹` and its spectral radius by power
/// iteration from the all-ones vector.
///
/// If plain iteration stalls (an imprimitive `K` makes the norm ratio
/// oscillate) the remaining budget is spent on `K + cI` with `c` the largest
/// row sum, which has the same Perron vector.
pub fn next_generation<T: Scalar>(f: &Matrix<T>, v: &Matrix<T>) -> Result<NextGeneration<T>> {
    let n = check_square(v, "next-generation V")?;
    check_len("next-generation F rows", n, f.rows())?;
    check_len("next-generation F cols", n, f.cols())?;
    let lu = Lu::factor(v, T::of(1e-13), "next-generation V")?;
    // Row i of F V⁻¹ is V⁻ᵀ applied to row i of F.
    let rows = (0..n)
        .map(|i| lu.solve_transpose(f.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let k = Matrix::from_rows(&rows)?;

    let mut warnings = Vec::new();
    if f.as_slice().iter().any(|&x| x < T::zero()) {
        warnings.push("F has negative entries".to_string());
    }
    let neg_tol = T::of(1e-14) * k.max_abs();
    if k.as_slice().iter().any(|&x| x < -neg_tol) {
        warnings.push("F V^-1 has negative entries; the Perron assumption may fail".to_string());
    }
    let offdiag_positive =
        (0..n).any(|i| (0..n).any(|j| i != j && v[(i, j)] > T::zero()));
    if offdiag_positive {
        warnings.push("V has positive off-diagonal entries (not a Z-matrix)".to_string());
    }

    if k.max_abs() == T::zero() {
        return Ok(NextGeneration {
            r0: T::zero(),
            k,
            iterations: 0,
            warnings,
        });
    }

    let half = R0_MAX_ITERS / 2;
    let (r0, used) = match perron_root(&k, T::zero(), half) {
        Some(found) => found,
        None => {
            let c = (0..n)
                .map(|i| k.row(i).iter().fold(T::zero(), |s, x| s + x.abs()))
                .fold(T::zero(), T::max);
            let (lambda, it) =
                perron_root(&k, c, R0_MAX_ITERS - half).ok_or(Error::NonConvergence {
                    context: "next-generation power iteration",
                    iterations: R0_MAX_ITERS,
                })?;
            (lambda - c, it + half)
        }
    };
    Ok(NextGeneration {
        r0: r0.max(T::zero()),
        k,
        iterations: used,
        warnings,
    })
}

/// Power iteration on `K + shift·I`; returns the dominant eigenvalue
/// estimate and the iteration count on convergence.
fn perron_root<T: Scalar>(k: &Matrix<T>, shift: T, max_iters: usize) -> Option<(T, usize)> {
    let n = k.rows();
    let mut x = vec![T::one() / T::of(n as f64).sqrt(); n];
    let mut lambda = T::zero();
    let tol = T::of(R0_TOL);
    for it in 1..=max_iters {
        let mut y = k.matvec(&x).ok()?;
        axpy(shift, &x, &mut y);
        let ny = norm2(&y);
        if ny == T::zero() {
            return Some((T::zero(), it));
        }
        if !ny.is_finite() {
            return None;
        }
        let y = scale_vec(T::one() / ny, &y);
        let dx = norm2(&crate::linalg::sub_vec(&y, &x));
        let converged = (ny - lambda).abs() <= tol * ny.max(T::one()) && dx <= T::of(1e-8);
        lambda = ny;
        x = y;
        if converged {
            return Some((lambda, it));
        }
    }
    None
}

/// Basic reproduction number `ρ(F V⁻¹)`.
pub fn r0<T: Scalar>(f: &Matrix<T>, v: &Matrix<T>) -> Result<T> {
    next_generation(f, v).map(|ng| ng.r0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub hurwitz: bool,
    pub jacobian: Matrix<T>,
    /// Solution of `PA + AᵀP + I = 0`, absent when that system is singular.
    pub lyapunov_p: Option<Matrix<T>>,
    /// `P` exists and is SPD.
    pub spd_certificate: bool,
    /// Upper bound on `max Re λ(A)`: the tighter of the Gershgorin bound and,
    /// when `P` is SPD, `−λ_min(Q) / (2 λ_max(P))`.
    pub spectral_abscissa_bound: T,
    pub routh_margin: f64,
    pub r0: Option<T>,
}

/// Gershgorin bound `max_i (a_ii + Σ_{j≠i} |a_ij|)` on the real parts.
pub fn gershgorin_abscissa<T: Scalar>(a: &Matrix<T>) -> T {
    (0..a.rows())
        .map(|i| {
            let off = (0..a.cols())
                .filter(|&j| j != i)
                .fold(T::zero(), |s, j| s + a[(i, j)].abs());
            a[(i, i)] + off
        })
        .fold(T::neg_infinity(), T::max)
}

/// Decides stability of the linearization of `A` by both routes and
/// insists that they agree.
pub fn stability_of_matrix<T: Scalar>(a: &Matrix<T>) -> Result<StabilityReport<T>> {
    let n = check_square(a, "stability")?;
    let routh = hurwitz_check(a)?;
    let q = Matrix::identity(n);
    let p = match lyapunov_solve(a, &q) {
        Ok(p) => Some(p),
        Err(Error::Singular { .. }) => None,
        Err(e) => return Err(e),
    };
    let spd = p.as_ref().is_some_and(|p| Cholesky::factor(p).is_ok());
    if spd != routh.hurwitz {
        return Err(Error::RouteDisagreement {
            routh: routh.hurwitz,
            lyapunov: spd,
        });
    }
    let mut bound = gershgorin_abscissa(a);
    if spd {
        let p = p.as_ref().expect("certificate implies a solution");
        let (values, _) = jacobi_eigen(p)?;
        let lambda_max = values[0];
        bound = bound.min(-T::one() / (lambda_max + lambda_max));
    }
    Ok(StabilityReport {
        hurwitz: routh.hurwitz,
        jacobian: a.clone(),
        lyapunov_p: p,
        spd_certificate: spd,
        spectral_abscissa_bound: bound,
        routh_margin: routh.margin,
        r0: None,
    })
}

/// Linearizes `f` at `x_eq` and runs [`stability_of_matrix`] on the
/// Jacobian with `Q = I`.
pub fn stability_verdict<T, F>(f: &F, x_eq: &[T], h: Option<T>) -> Result<StabilityReport<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    stability_of_matrix(&linearize(f, x_eq, h)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
}

impl<T: Scalar> OdeTrajectory<T> {
    pub fn last(&self) -> &[T] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Classical RK4 on `[0, t_end]`. The step is shrunk to `t_end / ⌈t_end/dt⌉`
/// so the final sample lands on `t_end`.
pub fn simulate<T, F>(f: &F, x0: &[T], t_end: T, dt: T) -> Result<OdeTrajectory<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / dt - T::of(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
    let h = t_end / T::of(steps as f64);
    let half = h / T::of(2.0);
    let n = x0.len();
    let mut times = vec![T::zero()];
    let mut states = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    let shifted = |x: &[T], k: &[T], s: T| -> Vec<T> {
        x.iter().zip(k).map(|(&a, &b)| a + s * b).collect()
    };
    for step in 1..=steps {
        let k1 = f(&x);
        check_len("vector field output", n, k1.len())?;
        let k2 = f(&shifted(&x, &k1, half));
        let k3 = f(&shifted(&x, &k2, half));
        let k4 = f(&shifted(&x, &k3, h));
        for i in 0..n {
            x[i] = x[i] + h / T::of(6.0) * (k1[i] + T::of(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "ODE simulation",
            });
        }
        times.push(h * T::of(step as f64));
        states.push(x.clone());
    }
    Ok(OdeTrajectory { times, states })
}

/// `P = ∫₀^T exp(Aᵀt) Q exp(At) dt`, with `exp(At)` propagated by RK4 and
/// the integral by composite Simpson. An independent check on
/// [`lyapunov_solve`] for Hurwitz `A` and large enough `T`.
pub fn lyapunov_quadrature<T: Scalar>(a: &Matrix<T>, q: &Matrix<T>, horizon: T, dt: T) -> Result<Matrix<T>> {
    let n = check_square(a, "Lyapunov quadrature")?;
    let mut steps = (horizon / dt).ceil().to_usize().unwrap_or(2).max(2);
    if steps % 2 == 1 {
        steps += 1;
    }
    let h = horizon / T::of(steps as f64);
    let rhs = |phi: &Matrix<T>| a.matmul(phi).expect("square");
    let integrand = |phi: &Matrix<T>| phi.transpose().matmul(q).and_then(|m| m.matmul(phi));
    let mut phi = Matrix::identity(n);
    let mut acc = integrand(&phi)?;
    for s in 1..=steps {
        let k1 = rhs(&phi);
        let k2 = rhs(&phi.add(&k1.scale(h / T::of(2.0)))?);
        let k3 = rhs(&phi.add(&k2.scale(h / T::of(2.0)))?);
        let k4 = rhs(&phi.add(&k3.scale(h))?);
        let incr = k1.add(&k2.scale(T::of(2.0)))?.add(&k3.scale(T::of(2.0)))?.add(&k4)?;
        phi = phi.add(&incr.scale(h / T::of(6.0)))?;
        let weight = if s == steps {
            T::one()
        } else if s % 2 == 1 {
            T::of(4.0)
        } else {
            T::of(2.0)
        };
        acc = acc.add(&integrand(&phi)?.scale(weight))?;
    }
    Ok(acc.scale(h / T::of(3.0)).symmetrized())
}

/// Random `n × n` matrix with a prescribed kind of spectrum, built as
/// `S D S⁻¹` where `D` holds 2×2 rotation-scaling blocks `[[a, b], [−b, a]]`
/// (and one real eigenvalue when `n` is odd) and `S = Q·diag(s)` is a
/// well-conditioned similarity.
///
/// With `hurwitz` every real part lies in `[−3, −0.1]`; otherwise at least
/// one real part lies in `[0.1, 2]`.
pub fn matrix_with_spectrum<T: Scalar>(rng: &mut SeededRng, n: usize, hurwitz: bool) -> Matrix<T> {
    let mut d = Matrix::zeros(n, n);
    let unstable_block = if hurwitz { usize::MAX } else { rng.index(n.div_ceil(2)) };
    let real_part = |block: usize, rng: &mut SeededRng| -> T {
        if block == unstable_block {
            rng.uniform(0.1, 2.0)
        } else if hurwitz {
            rng.uniform(-3.0, -0.1)
        } else {
            rng.uniform(-3.0, 2.0)
        }
    };
    let mut i = 0;
    let mut block = 0;
    while i < n {
        let a = real_part(block, rng);
        if i + 1 < n {
            let b: T = rng.uniform(0.2, 2.0);
            d[(i, i)] = a;
            d[(i + 1, i + 1)] = a;
            d[(i, i + 1)] = b;
            d[(i + 1, i)] = -b;
            i += 2;
        } else {
            d[(i, i)] = a;
            i += 1;
        }
        block += 1;
    }
    let q: Matrix<T> = rng.orthogonal_matrix(n);
    let s: Vec<T> = (0..n).map(|_| rng.uniform(0.5, 2.0)).collect();
    let sim = Matrix::from_fn(n, n, |i, j| q[(i, j)] * s[j]);
    let sim_inv = Matrix::from_fn(n, n, |i, j| q[(j, i)] / s[i]);
    sim.matmul(&d)
        .and_then(|m| m.matmul(&sim_inv))
        .expect("square factors")
}

/// SEIRS compartments `(S, E, I, R)` with total population 1, births and
/// deaths at rate `μ`, incidence `βSI`, incubation `σ`, recovery `γ` and
/// waning immunity `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SeirsParams<T> {
    pub beta: T,
    pub sigma: T,
    pub gamma: T,
    pub mu: T,
    pub omega: T,
}

impl<T: Scalar> SeirsParams<T> {
    pub fn demo() -> Self {
        Self {
            beta: T::of(0.5),
            sigma: T::of(0.2),
            gamma: T::of(0.25),
            mu: T::of(0.02),
            omega: T::of(0.05),
        }
    }

    pub fn rhs(&self, x: &[T]) -> Vec<T> {
        let (s, e, i, r) = (x[0], x[1], x[2], x[3]);
        let infection = self.beta * s * i;
        vec![
            self.mu - infection - self.mu * s + self.omega * r,
            infection - (self.sigma + self.mu) * e,
            self.sigma * e - (self.gamma + self.mu) * i,
            self.gamma * i - (self.omega + self.mu) * r,
        ]
    }

    /// Disease-free equilibrium.
    pub fn dfe(&self) -> Vec<T> {
        vec![T::one(), T::zero(), T::zero(), T::zero()]
    }

    /// Splitting of the infected block `(E, I)` at the disease-free
    /// equilibrium into new infections `F` and transitions `V`.
    pub fn next_generation_pair(&self) -> (Matrix<T>, Matrix<T>) {
        let z = T::zero();
        let f = Matrix::from_rows(&[vec![z, self.beta], vec![z, z]]).expect("2x2");
        let v = Matrix::from_rows(&[
            vec![self.sigma + self.mu, z],
            vec![-self.sigma, self.gamma + self.mu],
        ])
        .expect("2x2");
        (f, v)
    }

    /// `βσ / ((σ + μ)(γ + μ))`.
    pub fn r0_closed_form(&self) -> T {
        self.beta * self.sigma / ((self.sigma + self.mu) * (self.gamma + self.mu))
    }
}

/// Models available by name from the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinModel<T> {
    /// `ẋ = [x₂, −x₁ − x₂]`.
    DampedOscillator,
    /// `ẋ = x(1 − x)`.
    Logistic,
    Seirs(SeirsParams<T>),
}

impl<T: Scalar> BuiltinModel<T> {
    pub const NAMES: [&'static str; 3] = ["damped-oscillator", "logistic", "seirs"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "damped-oscillator" | "oscillator" => Ok(Self::DampedOscillator),
            "logistic" => Ok(Self::Logistic),
            "seirs" => Ok(Self::Seirs(SeirsParams::demo())),
            other => Err(Error::InvalidArgument(format!(
                "unknown model {other:?}; expected one of {:?}",
                Self::NAMES
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::DampedOscillator => 2,
            Self::Logistic => 1,
            Self::Seirs(_) => 4,
        }
    }

    pub fn rhs(&self, x: &[T]) -> Vec<T> {
        match self {
            Self::DampedOscillator => vec![x[1], -x[0] - x[1]],
            Self::Logistic => vec![x[0] * (T::one() - x[0])],
            Self::Seirs(p) => p.rhs(x),
        }
    }

    pub fn default_equilibrium(&self) -> Vec<T> {
        match self {
            Self::Seirs(p) => p.dfe(),
            _ => vec![T::zero(); self.dim()],
        }
    }

    /// Verdict at `x_eq`, with `R₀` filled in for epidemic models.
    pub fn verdict(&self, x_eq: &[T]) -> Result<StabilityReport<T>> {
        check_len("equilibrium", self.dim(), x_eq.len())?;
        let mut report = stability_verdict(&|x: &[T]| self.rhs(x), x_eq, None)?;
        if let Self::Seirs(p) = self {
            let (f, v) = p.next_generation_pair();
            report.r0 = Some(r0(&f, &v)?);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn lyapunov_diagonal_cases() {
        let p = lyapunov_solve(&Matrix::identity(3).scale(-1.0), &Matrix::identity(3)).unwrap();
        assert!(close(&p, &Matrix::identity(3).scale(0.5), 1e-14));
        let p = lyapunov_solve(&Matrix::from_diag(&[-1.0, -2.0]), &Matrix::identity(2)).unwrap();
        assert!(close(&p, &Matrix::from_diag(&[0.5, 0.25]), 1e-14));
    }

    #[test]
    fn lyapunov_matches_quadrature() {
        let a = m(&[&[0.0, 1.0], &[-1.0, -1.0]]);
        let q = Matrix::identity(2);
        let p = lyapunov_solve(&a, &q).unwrap();
        let oracle = lyapunov_quadrature(&a, &q, 60.0, 0.005).unwrap();
        assert!(close(&p, &oracle, 1e-6), "{p:?} vs {oracle:?}");
        let r = lyapunov_residual(&a, &p, &q).unwrap();
        assert!(r.frobenius_norm() <= 1e-9 * q.frobenius_norm());
    }

    #[test]
    fn lyapunov_rejects_rotation() {
        let a = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(
            lyapunov_solve(&a, &Matrix::identity(2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn characteristic_polynomial_of_companion() {
        // det(λI − A) = λ² + λ + 1.
        let c = characteristic_polynomial(&m(&[&[0.0, 1.0], &[-1.0, -1.0]])).unwrap();
        assert_eq!(c, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn hurwitz_examples() {
        assert!(hurwitz_check(&Matrix::<f64>::identity(4).scale(-1.0)).unwrap().hurwitz);
        let rot = hurwitz_check(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        assert!(!rot.hurwitz && rot.boundary);
        assert!(!hurwitz_check(&Matrix::<f64>::identity(2)).unwrap().hurwitz);
        assert!(hurwitz_check(&m(&[&[0.0, 1.0], &[-1.0, -1.0]])).unwrap().hurwitz);
    }

    #[test]
    fn hurwitz_on_placed_spectrum() {
        let mut rng = SeededRng::new(3);
        let q: Matrix<f64> = rng.orthogonal_matrix(3);
        let a = q
            .matmul(&Matrix::from_diag(&[-1.0, -2.0, -3.0]))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        let c = characteristic_polynomial(&a).unwrap();
        for (got, want) in c.iter().zip([1.0, 6.0, 11.0, 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(hurwitz_check(&a).unwrap().hurwitz);
    }

    #[test]
    fn equivalence_on_constructed_matrices() {
        let mut rng = SeededRng::new(7);
        for trial in 0..40 {
            let n = 1 + trial % 6;
            let hurwitz = trial % 2 == 0;
            let a: Matrix<f64> = matrix_with_spectrum(&mut rng, n, hurwitz);
            let report = stability_of_matrix(&a).unwrap();
            assert_eq!(report.hurwitz, hurwitz, "trial {trial}");
        }
    }

    #[test]
    fn linearize_examples() {
        let mm = m(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        let jac = linearize(&|x: &[f64]| mm.matvec(x).unwrap(), &[0.0, 0.0], None).unwrap();
        assert!(close(&jac, &mm, 1e-10));
        let logistic = |x: &[f64]| vec![x[0] * (1.0 - x[0])];
        assert!((linearize(&logistic, &[0.0], None).unwrap()[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((linearize(&logistic, &[1.0], None).unwrap()[(0, 0)] + 1.0).abs() < 1e-10);
        assert!(matches!(
            linearize(&logistic, &[0.5], None),
            Err(Error::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn r0_examples() {
        let f: Matrix<f64> = Matrix::identity(3).scale(0.6);
        let v = Matrix::identity(3).scale(0.3);
        assert!((r0(&f, &v).unwrap() - 2.0).abs() < 1e-10);
        let (beta, sigma, gamma) = (0.9, 0.3, 0.45);
        let f = m(&[&[0.0, beta], &[0.0, 0.0]]);
        let v = m(&[&[sigma, 0.0], &[-sigma, gamma]]);
        assert!((r0(&f, &v).unwrap() - beta / gamma).abs() < 1e-10);
        assert_eq!(r0(&Matrix::zeros(2, 2), &v).unwrap(), 0.0);
        assert!(matches!(
            r0(&f, &Matrix::zeros(2, 2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn r0_imprimitive_matrix() {
        // K = [[0, 4], [1, 0]] has eigenvalues ±2; plain power iteration
        // oscillates between norm ratios.
        let f = m(&[&[0.0, 4.0], &[1.0, 0.0]]);
        let ng = next_generation(&f, &Matrix::identity(2)).unwrap();
        assert!((ng.r0 - 2.0).abs() < 1e-8, "{}", ng.r0);
    }

    #[test]
    fn r0_warns_on_bad_signs() {
        let f = m(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        let ng = next_generation(&f, &Matrix::identity(2)).unwrap();
        assert!(!ng.warnings.is_empty());
    }

    #[test]
    fn verdict_examples() {
        let osc = BuiltinModel::<f64>::DampedOscillator;
        let rep = osc.verdict(&[0.0, 0.0]).unwrap();
        assert!(rep.hurwitz && rep.spd_certificate);
        assert!(rep.spectral_abscissa_bound >= -0.5 - 1e-9);
        let grow = stability_verdict(&|x: &[f64]| x.to_vec(), &[0.0], None).unwrap();
        assert!(!grow.hurwitz && !grow.spd_certificate);
        let logistic = BuiltinModel::<f64>::Logistic;
        assert!(logistic.verdict(&[1.0]).unwrap().hurwitz);
        assert!(!logistic.verdict(&[0.0]).unwrap().hurwitz);
    }

    #[test]
    fn seirs_threshold() {
        for (beta, expect_stable) in [(0.1, true), (0.2, true), (0.5, false), (1.5, false)] {
            let p: SeirsParams<f64> = SeirsParams {
                beta,
                ..SeirsParams::demo()
            };
            let rep = BuiltinModel::Seirs(p).verdict(&p.dfe()).unwrap();
            let r = rep.r0.unwrap();
            assert!((r - p.r0_closed_form()).abs() < 1e-10);
            assert_eq!(rep.hurwitz, expect_stable);
            assert_eq!(r < 1.0, expect_stable);
        }
    }

    #[test]
    fn simulate_exponential() {
        let traj = simulate(&|x: &[f64]| vec![-x[0]], &[1.0], 1.0, 0.01).unwrap();
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert!((traj.times.last().unwrap() - 1.0).abs() < 1e-12);
        let still = simulate(&|x: &[f64]| vec![x[0] * (1.0 - x[0])], &[1.0], 5.0, 0.1).unwrap();
        assert!(still.states.iter().all(|s| s[0] == 1.0));
    }

    #[test]
    fn lyapunov_function_decays() {
        let osc = BuiltinModel::<f64>::DampedOscillator;
        let rep = osc.verdict(&[0.0, 0.0]).unwrap();
        let p = rep.lyapunov_p.unwrap();
        let traj = simulate(&|x: &[f64]| osc.rhs(x), &[1.0, -0.5], 20.0, 0.01).unwrap();
        let v: Vec<f64> = traj
            .states
            .iter()
            .map(|x| crate::linalg::dot(x, &p.matvec(x).unwrap()))
            .collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-8));
        assert!(norm2(traj.last()) < norm2(&[1.0, -0.5]));
    }
}
