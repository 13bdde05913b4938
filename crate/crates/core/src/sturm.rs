//! Finite-difference Sturm–Liouville problems `−(p v′)′ + q v = λ ρ v` on
//! `(0, 1)` and the generalized Fourier series in their eigenmodes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{jacobi_eigen, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `v(0) = v(1) = 0`, unknowns at the interior nodes `x_i = i h`,
    /// `h = 1/(n+1)`.
    Dirichlet,
    /// `v′(0) = v′(1) = 0`, unknowns at cell centres `x_i = (i + ½) h`,
    /// `h = 1/n`, with ghost values reflected across each boundary.
    Neumann,
    /// `v(0) = v(1)`, unknowns at `x_i = i h`, `h = 1/n`, wrapping around.
    Periodic,
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary condition {other:?}; expected dirichlet, neumann or periodic"
            ))),
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::Periodic => "periodic",
        })
    }
}

impl BoundaryCondition {
    pub fn spacing<T: Scalar>(self, n: usize) -> T {
        match self {
            Self::Dirichlet => T::one() / T::of((n + 1) as f64),
            Self::Neumann | Self::Periodic => T::one() / T::of(n as f64),
        }
    }

    pub fn nodes<T: Scalar>(self, n: usize) -> Vec<T> {
        let h: T = self.spacing(n);
        (0..n)
            .map(|i| {
                let i = T::of(i as f64);
                match self {
                    Self::Dirichlet => (i + T::one()) * h,
                    Self::Neumann => (i + T::of(0.5)) * h,
                    Self::Periodic => i * h,
                }
            })
            .collect()
    }
}

pub type Coefficient<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `−(p v′)′ + q v = λ ρ v` with `p, ρ > 0` and `q ≥ 0`.
///
/// Operators written as `(1/ρ)[(p v′)′ + q v] = κ v` with `p < 0` map onto
/// this form through `p ↦ −p`, `q ↦ −q` and `λ = −κ`.
#[derive(Clone)]
pub struct SlProblem<T> {
    pub p: Coefficient<T>,
    pub q: Coefficient<T>,
    pub rho: Coefficient<T>,
    pub bc: BoundaryCondition,
    pub n: usize,
}

impl<T> fmt::Debug for SlProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlProblem")
            .field("bc", &self.bc)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SlProblem<T> {
    /// `−v″ = λ v`.
    pub fn laplacian(bc: BoundaryCondition, n: usize) -> Self {
        Self {
            p: Arc::new(|_| T::one()),
            q: Arc::new(|_| T::zero()),
            rho: Arc::new(|_| T::one()),
            bc,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization<T> {
    /// Symmetric stiffness matrix.
    pub k: Matrix<T>,
    /// Diagonal of `Mρ`.
    pub rho: Vec<T>,
    pub h: T,
    pub nodes: Vec<T>,
    pub bc: BoundaryCondition,
}

/// Conservative three-point stencil
/// `(Kv)_i = [p_{i+½}(v_i − v_{i+1}) + p_{i−½}(v_i − v_{i−1})]/h² + q_i v_i`.
pub fn discretize<T: Scalar>(prob: &SlProblem<T>) -> Result<Discretization<T>> {
    let n = prob.n;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n >= 3 grid points, got {n}")));
    }
    let bc = prob.bc;
    let h: T = bc.spacing(n);
    let nodes = bc.nodes::<T>(n);
    let half = h / T::of(2.0);
    let h2 = h * h;
    let wrap = |x: T| if x < T::zero() { x + T::one() } else { x };

    let mut k = Matrix::zeros(n, n);
    for (i, &x) in nodes.iter().enumerate() {
        let pm = (prob.p)(wrap(x - half));
        let pp = (prob.p)(x + half);
        if !(pm > T::zero() && pp > T::zero()) {
            return Err(Error::InvalidArgument(format!("p must be positive, failed near x = {x}")));
        }
        let qi = (prob.q)(x);
        let left = match (bc, i) {
            (BoundaryCondition::Neumann, 0) => None,
            (BoundaryCondition::Periodic, 0) => Some(n - 1),
            (_, 0) => {
                k[(i, i)] = k[(i, i)] + pm / h2;
                None
            }
            _ => Some(i - 1),
        };
        let right = match (bc, i + 1 == n) {
            (BoundaryCondition::Neumann, true) => None,
            (BoundaryCondition::Periodic, true) => Some(0),
            (_, true) => {
                k[(i, i)] = k[(i, i)] + pp / h2;
                None
            }
            _ => Some(i + 1),
        };
        if let Some(j) = left {
            k[(i, i)] = k[(i, i)] + pm / h2;
            k[(i, j)] = k[(i, j)] - pm / h2;
        }
        if let Some(j) = right {
            k[(i, i)] = k[(i, i)] + pp / h2;
            k[(i, j)] = k[(i, j)] - pp / h2;
        }
        k[(i, i)] = k[(i, i)] + qi;
    }
    let rho: Vec<T> = nodes.iter().map(|&x| (prob.rho)(x)).collect();
    Ok(Discretization {
        k: k.symmetrized(),
        rho,
        h,
        nodes,
        bc,
    })
}

/// Eigenpairs of the discrete problem, orthonormal in `(f, g)_ρ = h Σ ρ_i f_i g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    pub modes: Vec<Vec<T>>,
    pub rho: Vec<T>,
    pub h: T,
    pub nodes: Vec<T>,
}

impl<T: Scalar> ModeSet<T> {
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        self.h
            * f.iter()
                .zip(g)
                .zip(&self.rho)
                .fold(T::zero(), |s, ((&a, &b), &r)| s + r * a * b)
    }

    pub fn norm(&self, f: &[T]) -> T {
        self.inner(f, f).sqrt()
    }

    pub const CSV_HEADER: &'static str = "lambda,mode-samples";

    /// One row per mode: the eigenvalue followed by the mode's nodal values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (lambda, v) in self.eigenvalues.iter().zip(&self.modes) {
            out.push_str(&format!("{:e}", lambda.as_f64()));
            for x in v {
                out.push_str(&format!(",{:e}", x.as_f64()));
            }
            out.push('\n');
        }
        out
    }

    /// `max |(v_i, v_j)_ρ − δ_ij|`.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, vi) in self.modes.iter().enumerate() {
            for (j, vj) in self.modes.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((self.inner(vi, vj) - target).abs());
            }
        }
        worst
    }
}

/// Lowest `count` eigenpairs of `K v = λ Mρ v`.
///
/// Solved as the symmetric problem `Mρ^{-1/2} K Mρ^{-1/2}`, then mapped back.
/// Each mode is signed so that its first entry that is not negligible is
/// positive.
pub fn solve_modes<T: Scalar>(disc: &Discretization<T>, count: usize) -> Result<ModeSet<T>> {
    let n = disc.k.rows();
    check_len("density samples", n, disc.rho.len())?;
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("mode count must be in 1..={n}, got {count}")));
    }
    if let Some(bad) = disc.rho.iter().position(|&r| !(r > T::zero())) {
        return Err(Error::InvalidArgument(format!(
            "density must be positive, got {} at node {bad}",
            disc.rho[bad]
        )));
    }
    let inv_sqrt: Vec<T> = disc.rho.iter().map(|&r| T::one() / r.sqrt()).collect();
    let b = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * disc.k[(i, j)] * inv_sqrt[j]);
    let (values, vectors) = jacobi_eigen(&b)?;
    let scale = T::one() / disc.h.sqrt();
    let mut eigenvalues = Vec::with_capacity(count);
    let mut modes = Vec::with_capacity(count);
    for idx in (0..n).rev().take(count) {
        eigenvalues.push(values[idx]);
        let mut v: Vec<T> = (0..n).map(|i| vectors[(i, idx)] * inv_sqrt[i] * scale).collect();
        let peak = crate::linalg::max_abs(&v);
        if let Some(&first) = v.iter().find(|x| x.abs() > T::of(1e-6) * peak) {
            if first < T::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        modes.push(v);
    }
    Ok(ModeSet {
        eigenvalues,
        modes,
        rho: disc.rho.clone(),
        h: disc.h,
        nodes: disc.nodes.clone(),
    })
}

/// `‖K v_j − λ_j Mρ v_j‖` for every mode.
pub fn eigen_residuals<T: Scalar>(disc: &Discretization<T>, modes: &ModeSet<T>) -> Result<Vec<T>> {
    modes
        .eigenvalues
        .iter()
        .zip(&modes.modes)
        .map(|(&lambda, v)| {
            let kv = disc.k.matvec(v)?;
            let r: Vec<T> = kv
                .iter()
                .zip(v)
                .zip(&disc.rho)
                .map(|((&a, &b), &r)| a - lambda * r * b)
                .collect();
            Ok(crate::linalg::norm2(&r))
        })
        .collect()
}

/// `c_j = (f, v_j)_ρ`.
pub fn fourier_coefficients<T: Scalar>(f: &[T], modes: &ModeSet<T>) -> Result<Vec<T>> {
    check_len("sampled function", modes.rho.len(), f.len())?;
    Ok(modes.modes.iter().map(|v| modes.inner(f, v)).collect())
}

/// `Σ_{j<terms} c_j v_j`.
pub fn reconstruct<T: Scalar>(coeffs: &[T], modes: &ModeSet<T>, terms: usize) -> Vec<T> {
    let mut out = vec![T::zero(); modes.rho.len()];
    for (&c, v) in coeffs.iter().zip(&modes.modes).take(terms) {
        crate::linalg::axpy(c, v, &mut out);
    }
    out
}

/// `ρ`-weighted error of the `N`-term expansion for each `N` in `terms`.
pub fn truncation_error<T: Scalar>(f: &[T], modes: &ModeSet<T>, terms: &[usize]) -> Result<Vec<T>> {
    let coeffs = fourier_coefficients(f, modes)?;
    terms
        .iter()
        .map(|&t| {
            if t > modes.modes.len() {
                return Err(Error::InvalidArgument(format!(
                    "{t} terms requested but only {} modes available",
                    modes.modes.len()
                )));
            }
            let approx = reconstruct(&coeffs, modes, t);
            Ok(modes.norm(&crate::linalg::sub_vec(f, &approx)))
        })
        .collect()
}

/// Eigenvalue `j ≥ 1` of the constant-coefficient Dirichlet stencil,
/// `(4/h²) sin²(jπh/2)`.
pub fn dirichlet_exact_eigenvalue<T: Scalar>(j: usize, h: T) -> T {
    let s = (T::of(j as f64) * T::of(std::f64::consts::PI) * h / T::of(2.0)).sin();
    T::of(4.0) * s * s / (h * h)
}
