//! Cross-module invariant suites, runnable from the command line.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{Activation, NetworkProblem, NetworkSpec, Parameters, Sample};
use crate::operator::{adjoint_pair_check, DenseOperator, InnerProductSpace};
use crate::optim::{fd_gradient_check, reduced_gradient};
use crate::pde::{AdvectionProblem, EllipticProblem};
use crate::rng::SeededRng;
use crate::stability::{lyapunov_residual, matrix_with_spectrum, stability_of_matrix};
use crate::sturm::{dirichlet_exact_eigenvalue, discretize, solve_modes, BoundaryCondition, SlProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Adjoint,
    Gradient,
    Hurwitz,
    Sturm,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Adjoint, Suite::Gradient, Suite::Hurwitz, Suite::Sturm];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Adjoint => "adjoint",
            Suite::Gradient => "gradient",
            Suite::Hurwitz => "hurwitz",
            Suite::Sturm => "sturm",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Negative control: shifts one entry of every adjoint under test.
    pub corrupt_adjoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    /// Worst observed value of the suite's headline quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Random operator of shape at most `12 × 9` between spaces with a
/// Euclidean, diagonal or dense SPD metric (chosen per space).
pub fn seeded_operator(rng: &mut SeededRng) -> Result<DenseOperator<f64>> {
    let m = 1 + rng.index(12);
    let n = 1 + rng.index(9);
    let space = |dim: usize, rng: &mut SeededRng| -> Result<InnerProductSpace<f64>> {
        match rng.index(3) {
            0 => Ok(InnerProductSpace::euclidean(dim)),
            1 => InnerProductSpace::weighted(&rng.uniform_vector(dim, 0.2, 5.0)),
            _ => InnerProductSpace::with_metric(rng.spd_matrix(dim)),
        }
    };
    let domain = space(n, rng)?;
    let codomain = space(m, rng)?;
    DenseOperator::new(domain, codomain, rng.matrix(m, n))
}

fn adjoint_suite(opts: SelftestOptions) -> Result<SuiteReport> {
    const TOL: f64 = 1e-10;
    let mut rng = SeededRng::new(opts.seed);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let op = seeded_operator(&mut rng)?;
        let mut adj = op.adjoint()?;
        if opts.corrupt_adjoint {
            let mut m = adj.matrix().clone();
            m[(0, 0)] += 1.0;
            adj = adj.with_matrix(m)?;
        }
        let rep = adjoint_pair_check(&op, &adj, 100, opts.seed ^ k)?;
        worst = worst.max(rep.max_defect);
    }
    Ok(SuiteReport {
        suite: Suite::Adjoint,
        passed: worst <= TOL,
        worst,
        tolerance: TOL,
        detail: "100 operators, normalized adjoint defect".into(),
    })
}

fn gradient_suite(opts: SelftestOptions) -> Result<SuiteReport> {
    const NET_TOL: f64 = 1e-6;
    const PDE_TOL: f64 = 1e-5;
    let mut rng = SeededRng::new(opts.seed);
    let mut worst_net = 0.0f64;
    for (k, sizes) in [vec![2, 3, 1], vec![3, 5, 2], vec![4, 8, 8, 3]].into_iter().enumerate() {
        let spec = NetworkSpec::new(sizes, Activation::Tanh)?;
        let samples = vec![Sample {
            x: rng.uniform_vector(spec.input_dim(), -1.0, 1.0),
            a_obs: rng.uniform_vector(spec.output_dim(), -1.0, 1.0),
        }];
        let params = Parameters::<f64>::random(&spec, opts.seed + k as u64).flatten();
        let prob = NetworkProblem::new(spec, samples)?;
        let chk = fd_gradient_check(&prob, &params, &[1e-5])?;
        worst_net = worst_net.max(chk[0].rel_error);
    }

    let n = 31;
    let prob = EllipticProblem::synthetic(n, 0.0, 1.0, &vec![0.25; n + 1])?;
    let mut worst_pde = 0.0f64;
    for _ in 0..3 {
        let z = rng.uniform_vector::<f64>(n + 1, -0.5, 0.5);
        worst_pde = worst_pde.max(fd_gradient_check(&prob, &z, &[1e-5])?[0].rel_error);
    }
    let adv = AdvectionProblem::<f64>::new(16, 1.3)?;
    let g = reduced_gradient(&adv, &[0.7])?.gradient[0];
    let adv_err = (g - adv.exact_gradient(0.7)).abs();

    Ok(SuiteReport {
        suite: Suite::Gradient,
        passed: worst_net <= NET_TOL && worst_pde <= PDE_TOL && adv_err <= 1e-10,
        worst: worst_net.max(worst_pde),
        tolerance: NET_TOL,
        detail: format!(
            "network FD rel error {worst_net:.3e}, elliptic FD rel error {worst_pde:.3e}, \
             advection closed-form error {adv_err:.3e}"
        ),
    })
}

fn hurwitz_suite(opts: SelftestOptions) -> Result<SuiteReport> {
    let mut rng = SeededRng::new(opts.seed);
    let mut disagreements = 0;
    let mut worst_residual = 0.0f64;
    for k in 0..50 {
        let n = 1 + k % 6;
        let hurwitz = k % 2 == 0;
        let a: Matrix<f64> = matrix_with_spectrum(&mut rng, n, hurwitz);
        match stability_of_matrix(&a) {
            Ok(rep) => {
                if rep.hurwitz != hurwitz {
                    disagreements += 1;
                }
                if let Some(p) = &rep.lyapunov_p {
                    let q = Matrix::identity(n);
                    let r = lyapunov_residual(&a, p, &q)?.frobenius_norm() / q.frobenius_norm();
                    worst_residual = worst_residual.max(r);
                }
            }
            Err(Error::RouteDisagreement { .. }) => disagreements += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SuiteReport {
        suite: Suite::Hurwitz,
        passed: disagreements == 0 && worst_residual <= 1e-9,
        worst: worst_residual,
        tolerance: 1e-9,
        detail: format!("50 matrices, {disagreements} disagreements, relative Lyapunov residual"),
    })
}

fn sturm_suite() -> Result<SuiteReport> {
    const TOL: f64 = 1e-9;
    let disc = discretize(&SlProblem::<f64>::laplacian(BoundaryCondition::Dirichlet, 63))?;
    let modes = solve_modes(&disc, 63)?;
    let worst = modes
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let exact = dirichlet_exact_eigenvalue(j + 1, disc.h);
            (l - exact).abs() / exact
        })
        .fold(0.0f64, f64::max);
    Ok(SuiteReport {
        suite: Suite::Sturm,
        passed: worst <= TOL,
        worst,
        tolerance: TOL,
        detail: "dirichlet n=63, relative error against the exact discrete spectrum".into(),
    })
}

pub fn run_suite(suite: Suite, opts: SelftestOptions) -> SuiteReport {
    let outcome = match suite {
        Suite::Adjoint => adjoint_suite(opts),
        Suite::Gradient => gradient_suite(opts),
        Suite::Hurwitz => hurwitz_suite(opts),
        Suite::Sturm => sturm_suite(),
    };
    outcome.unwrap_or_else(|e| SuiteReport {
        suite,
        passed: false,
        worst: f64::NAN,
        tolerance: f64::NAN,
        detail: format!("error: {e}"),
    })
}

pub fn selftest(suites: &[Suite], opts: SelftestOptions) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run_suite(s, opts)).collect()
}
