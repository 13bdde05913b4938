//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always print.
//! Exits nonzero if any criterion fails, except for entries listed in
//! `KNOWN_DEVIATIONS`, whose failure must match the recorded cause.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use adjointkit::linalg::{max_abs, norm2, sub_vec, Matrix};
use adjointkit::neural::{batch_loss_and_gradient, Activation, NetworkProblem, NetworkSpec, Parameters, Sample};
use adjointkit::operator::{adjoint_consistency_check, DenseOperator, InnerProductSpace};
use adjointkit::optim::{fd_gradient_check, gradient_descent, reduced_gradient, ConstrainedProblem};
use adjointkit::pde::{discrete_infsup, reference_log_diffusivity, AdvectionProblem, EllipticProblem};
use adjointkit::rng::{SeededRng, DEFAULT_SEED};
use adjointkit::selftest::seeded_operator;
use adjointkit::spectral::{fundamental_subspaces, solvability_check, svd};
use adjointkit::stability::{
    lyapunov_quadrature, lyapunov_residual, lyapunov_solve, matrix_with_spectrum, next_generation,
    stability_of_matrix, BuiltinModel, SeirsParams,
};
use adjointkit::sturm::{dirichlet_exact_eigenvalue, discretize, solve_modes, BoundaryCondition, SlProblem};
use adjointkit::inverse::{instability_demo, integration_operator, midpoints, tikhonov_solve};
use adjointkit::Error;

type Res<T> = Result<T, Error>;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Criteria expected to fail, with a predicate confirming the cause.
const KNOWN_DEVIATIONS: &[(usize, &str)] = &[(
    2,
    "printed left factor column 1 has a sign typo in its first entry",
)];

fn timed(limit: Duration, f: impl FnOnce() -> Res<Verdict>) -> Res<Verdict> {
    let t = Instant::now();
    let v = f()?;
    let elapsed = t.elapsed();
    let pass = v.pass && elapsed < limit;
    Ok(Verdict::new(pass, format!("{} ({:.2?}, limit {:?})", v.detail, elapsed, limit)))
}

fn c1() -> Res<Verdict> {
    timed(Duration::from_secs(1), || {
        let mut rng = SeededRng::new(DEFAULT_SEED);
        let mut worst = 0.0f64;
        let mut weighted = 0;
        for k in 0..100 {
            let op = seeded_operator(&mut rng)?;
            assert!(op.matrix().rows() <= 12 && op.matrix().cols() <= 9);
            if !op.domain().is_euclidean() || !op.codomain().is_euclidean() {
                weighted += 1;
            }
            worst = worst.max(adjoint_consistency_check(&op, 20, k)?.max_defect);
        }
        Ok(Verdict::new(
            worst <= 1e-10 && weighted > 0,
            format!("max defect {worst:.2e} over 100 operators ({weighted} non-Euclidean)"),
        ))
    })
}

/// Distance between `a` and `±b`.
fn up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = max_abs(&sub_vec(a, b));
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

/// Also returns whether the only discrepancy is the known sign typo.
fn c2() -> Res<(Verdict, bool)> {
    let op: DenseOperator<f64> = DenseOperator::from_rows(&[vec![2.0, 0.0, 1.0], vec![2.0, 4.0 / 3.0, 1.0 / 3.0]])?;
    let s = svd(&op, None)?;
    let sigma_err = (s.sigma[0] - 3.1306).abs().max((s.sigma[1] - 1.0433).abs());
    let printed_u = [
        [-0.9023, -0.3162, -0.2931],
        [0.1385, -0.8564, 0.4974],
        [-0.4082, 0.4082, 0.8165],
    ];
    let printed_v = [[-0.6701, 0.7423], [0.7423, -0.6701]];
    let u_err = (0..3).map(|i| up_to_sign(&s.right_vectors[i], &printed_u[i])).fold(0.0, f64::max);
    let v_errs: Vec<f64> = (0..2).map(|i| up_to_sign(&s.left_vectors[i], &printed_v[i])).collect();
    let v_err = v_errs[0].max(v_errs[1]);
    let pass = sigma_err <= 5e-5 && u_err <= 1e-3 && v_err <= 1e-3;

    // The printed first column is not orthogonal to the second, so it cannot
    // be a singular vector. Flipping the sign of its first entry repairs it.
    let dot = printed_v[0][0] * printed_v[1][0] + printed_v[0][1] * printed_v[1][1];
    let repaired = [-printed_v[0][0], printed_v[0][1]];
    let typo_only = sigma_err <= 5e-5
        && u_err <= 1e-3
        && v_errs[1] <= 1e-3
        && dot.abs() > 0.5
        && up_to_sign(&s.left_vectors[0], &repaired) <= 1e-3;
    Ok((
        Verdict::new(
            pass,
            format!(
                "sigma err {sigma_err:.1e}, U err {u_err:.1e}, V col errs {:.1e}/{:.1e}; \
                 printed V columns have inner product {dot:.3}",
                v_errs[0], v_errs[1]
            ),
        ),
        typo_only,
    ))
}

fn c3() -> Res<Verdict> {
    let op = DenseOperator::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]])?;
    let s = solvability_check(&op, &[1.0, 0.0], 1e-10)?;
    let err = (s.defect - 0.5f64.sqrt()).abs();
    Ok(Verdict::new(
        !s.solvable && err <= 1e-10,
        format!("solvable={} defect {:.15} (|err| {err:.1e})", s.solvable, s.defect),
    ))
}

fn c4() -> Res<Verdict> {
    let mut rng = SeededRng::new(DEFAULT_SEED + 4);
    let mut worst = 0.0f64;
    let mut nullity_ok = true;
    let mut deficient = 0;
    for k in 0..50 {
        let m = 1 + rng.index(8);
        let n = 1 + rng.index(8);
        // Every other matrix is a product through a thin middle dimension.
        let a: Matrix<f64> = if k % 2 == 0 {
            rng.matrix(m, n)
        } else {
            let r = 1 + rng.index(m.min(n));
            rng.matrix(m, r).matmul(&rng.matrix(r, n))?
        };
        let dom = if k % 3 == 0 {
            InnerProductSpace::weighted(&rng.uniform_vector(n, 0.5, 2.0))?
        } else {
            InnerProductSpace::euclidean(n)
        };
        let op = DenseOperator::new(dom, InnerProductSpace::euclidean(m), a)?;
        let s = svd(&op, None)?;
        let b = fundamental_subspaces(&s);
        let (ra, na, ras, nas) = b.dims();
        nullity_ok &= ra + na == n && ras + nas == m && ra == ras;
        if ra < m.min(n) {
            deficient += 1;
        }
        let scale = op.norm()?.max(1.0);
        let adj = op.adjoint()?;
        for q in &b.range_a {
            for p in &b.null_astar {
                worst = worst.max(op.codomain().inner(q, p)?.abs());
            }
        }
        for q in &b.range_astar {
            for p in &b.null_a {
                worst = worst.max(op.domain().inner(q, p)?.abs());
            }
        }
        for p in &b.null_a {
            worst = worst.max(norm2(&op.apply(p)?) / scale);
        }
        for p in &b.null_astar {
            worst = worst.max(norm2(&adj.apply(p)?) / scale);
        }
    }
    Ok(Verdict::new(
        nullity_ok && worst <= 1e-10,
        format!("rank-nullity exact={nullity_ok}, worst orthogonality defect {worst:.1e}, {deficient} rank-deficient"),
    ))
}

fn c5() -> Res<Verdict> {
    let n = 64;
    let a = integration_operator::<f64>(n)?;
    let x_true: Vec<f64> = midpoints::<f64>(n).iter().map(|t| (std::f64::consts::PI * t).sin()).collect();
    let y = a.apply(&x_true)?;
    let s = svd(&a, None)?;
    let first = instability_demo(&a, &y, 1, 1e-3)?;
    let last = instability_demo(&a, &y, s.rank, 1e-3)?;
    let ratio = last.amplification / first.amplification;

    // 1% noise along the most amplified direction.
    let delta = 0.01 * a.codomain().norm(&y)?;
    let mut noisy = y.clone();
    for (yi, vi) in noisy.iter_mut().zip(&s.left_vectors[s.rank - 1]) {
        *yi += delta * vi;
    }
    let zero = vec![0.0; n];
    let clean = tikhonov_solve(&a, &y, 1e-4, &zero)?;
    let pert = tikhonov_solve(&a, &noisy, 1e-4, &zero)?;
    let growth = a.domain().norm(&pert.x)? / a.domain().norm(&clean.x)?;
    Ok(Verdict::new(
        ratio >= 10.0 && growth <= 2.0,
        format!("amplification ratio {ratio:.1}, Tikhonov growth {growth:.3} at 1% noise"),
    ))
}

/// Same problem, but the adjoint goes through the generic dense solve.
struct Generic<'a>(&'a NetworkProblem<f64>);

impl ConstrainedProblem<f64> for Generic<'_> {
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }
    fn control_dim(&self) -> usize {
        self.0.control_dim()
    }
    fn residual(&self, u: &[f64], z: &[f64]) -> Res<Vec<f64>> {
        self.0.residual(u, z)
    }
    fn solve_forward(&self, z: &[f64]) -> Res<Vec<f64>> {
        self.0.solve_forward(z)
    }
    fn apply_duc(&self, u: &[f64], z: &[f64], du: &[f64]) -> Res<Vec<f64>> {
        self.0.apply_duc(u, z, du)
    }
    fn apply_duc_adjoint(&self, u: &[f64], z: &[f64], y: &[f64]) -> Res<Vec<f64>> {
        self.0.apply_duc_adjoint(u, z, y)
    }
    fn apply_dzc_adjoint(&self, u: &[f64], z: &[f64], y: &[f64]) -> Res<Vec<f64>> {
        self.0.apply_dzc_adjoint(u, z, y)
    }
    fn objective(&self, u: &[f64], z: &[f64]) -> f64 {
        self.0.objective(u, z)
    }
    fn grad_u_objective(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        self.0.grad_u_objective(u, z)
    }
    fn grad_z_objective(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        self.0.grad_z_objective(u, z)
    }
}

fn c6() -> Res<Verdict> {
    timed(Duration::from_secs(5), || {
        let shapes = [vec![2, 3, 1], vec![3, 5, 2], vec![4, 8, 3], vec![4, 8, 8, 3], vec![1, 4, 4, 1]];
        let mut rng = SeededRng::new(DEFAULT_SEED + 6);
        let (mut fd_worst, mut generic_worst) = (0.0f64, 0.0f64);
        for k in 0..10 {
            let spec = NetworkSpec::new(shapes[k % shapes.len()].clone(), Activation::Tanh)?;
            let samples: Vec<Sample<f64>> = (0..1 + k % 3)
                .map(|_| Sample {
                    x: rng.uniform_vector(spec.input_dim(), -1.0, 1.0),
                    a_obs: rng.uniform_vector(spec.output_dim(), -1.0, 1.0),
                })
                .collect();
            let params = Parameters::<f64>::random(&spec, DEFAULT_SEED + k as u64);
            let flat = params.flatten();
            let (_, grad) = batch_loss_and_gradient(&spec, &params, &samples)?;
            let backprop = grad.flatten();
            let prob = NetworkProblem::new(spec, samples)?;
            fd_worst = fd_worst.max(fd_gradient_check(&prob, &flat, &[1e-5])?[0].rel_error);
            let generic = reduced_gradient(&Generic(&prob), &flat)?.gradient;
            generic_worst = generic_worst.max(max_abs(&sub_vec(&generic, &backprop)));
        }
        Ok(Verdict::new(
            fd_worst <= 1e-6 && generic_worst <= 1e-13,
            format!("FD rel error {fd_worst:.1e}, backprop vs generic {generic_worst:.1e}"),
        ))
    })
}

fn c7() -> Res<Verdict> {
    let mut rng = SeededRng::new(DEFAULT_SEED + 7);
    let mut disagreements = 0;
    let mut worst_residual = 0.0f64;
    for k in 0..50 {
        let n = 1 + k % 6;
        let hurwitz = k % 2 == 0;
        let a: Matrix<f64> = matrix_with_spectrum(&mut rng, n, hurwitz);
        match stability_of_matrix(&a) {
            Ok(rep) => {
                let certified = rep.lyapunov_p.is_some() && rep.spd_certificate;
                if rep.hurwitz != hurwitz || certified != hurwitz {
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

    let mut quad_worst = 0.0f64;
    for k in 0..5 {
        let n = 2 + k % 3;
        let a: Matrix<f64> = matrix_with_spectrum(&mut rng, n, true);
        let q = Matrix::identity(n);
        let p = lyapunov_solve(&a, &q)?;
        // Slowest decay rate is at least 0.1; e^{-0.2 T} is negligible at T = 200.
        let oracle = lyapunov_quadrature(&a, &q, 200.0, 0.005)?;
        quad_worst = quad_worst.max(p.sub(&oracle)?.max_abs());
    }
    Ok(Verdict::new(
        disagreements == 0 && worst_residual <= 1e-9 && quad_worst <= 1e-6,
        format!(
            "{disagreements} disagreements in 50, Lyapunov residual {worst_residual:.1e}, quadrature diff {quad_worst:.1e}"
        ),
    ))
}

fn c8() -> Res<Verdict> {
    let mut worst = 0.0f64;
    for (beta, gamma) in [(0.3f64, 0.1f64), (0.5, 0.25), (0.2, 0.4), (1.2, 0.7), (0.05, 0.5)] {
        let sigma = 0.2;
        let f = Matrix::from_rows(&[vec![0.0, beta], vec![0.0, 0.0]])?;
        let v = Matrix::from_rows(&[vec![sigma, 0.0], vec![-sigma, gamma]])?;
        let r0 = next_generation(&f, &v)?.r0;
        worst = worst.max((r0 - beta / gamma).abs());
    }

    let mut consistent = 0;
    let mut seen = (false, false);
    let betas = [0.1, 0.2, 0.25, 0.35, 0.5, 0.8];
    for beta in betas {
        let p = SeirsParams { beta, ..SeirsParams::demo() };
        let rep = BuiltinModel::Seirs(p).verdict(&p.dfe())?;
        let r0 = rep.r0.expect("SEIRS reports R0");
        if r0 < 1.0 {
            seen.0 = true;
        } else {
            seen.1 = true;
        }
        if rep.hurwitz == (r0 < 1.0) {
            consistent += 1;
        }
    }
    Ok(Verdict::new(
        worst <= 1e-8 && consistent == betas.len() && seen.0 && seen.1,
        format!("max |R0 - beta/gamma| {worst:.1e}; SEIRS threshold consistent in {consistent}/{}", betas.len()),
    ))
}

fn c9() -> Res<Verdict> {
    let dirichlet = |n| -> Res<_> {
        let disc = discretize(&SlProblem::<f64>::laplacian(BoundaryCondition::Dirichlet, n))?;
        let modes = solve_modes(&disc, n)?;
        Ok((disc, modes))
    };
    let (disc, modes) = dirichlet(63)?;
    let spectrum_err = modes
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let exact = dirichlet_exact_eigenvalue(j + 1, disc.h);
            (l - exact).abs() / exact
        })
        .fold(0.0f64, f64::max);

    let mut mode_err = 0.0f64;
    for j in 0..5 {
        let exact: Vec<f64> = disc
            .nodes
            .iter()
            .map(|&x| 2f64.sqrt() * ((j + 1) as f64 * std::f64::consts::PI * x).sin())
            .collect();
        let v = &modes.modes[j];
        let l2 = |sign: f64| {
            (disc.h * v.iter().zip(&exact).map(|(a, b)| (a - sign * b).powi(2)).sum::<f64>()).sqrt()
        };
        mode_err = mode_err.max(l2(1.0).min(l2(-1.0)));
    }

    let coarse = modes;
    let (_, fine) = dirichlet(127)?;
    let mut worst_ratio_dev = 0.0f64;
    let mut ratios = Vec::new();
    for j in 0..5 {
        let exact = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
        let ratio = (coarse.eigenvalues[j] - exact).abs() / (fine.eigenvalues[j] - exact).abs();
        worst_ratio_dev = worst_ratio_dev.max((ratio / 4.0 - 1.0).abs());
        ratios.push(format!("{ratio:.3}"));
    }
    Ok(Verdict::new(
        spectrum_err <= 1e-9 && mode_err <= 1e-3 && worst_ratio_dev <= 0.2,
        format!(
            "spectrum rel err {spectrum_err:.1e}, mode L2 err {mode_err:.1e}, refinement ratios [{}]",
            ratios.join(", ")
        ),
    ))
}

fn c10() -> Res<Verdict> {
    timed(Duration::from_secs(10), || {
        let mut adv_err = 0.0f64;
        let mut rng = SeededRng::new(DEFAULT_SEED + 10);
        for _ in 0..10 {
            let z: f64 = rng.uniform(-2.0, 2.0);
            let beta: f64 = rng.uniform(0.2, 3.0);
            let prob = AdvectionProblem::new(16, beta)?;
            let g = reduced_gradient(&prob, &[z])?.gradient[0];
            adv_err = adv_err.max((g - z / (beta * beta)).abs());
        }

        let n = 31;
        let h = 1.0 / (n + 1) as f64;
        let z_true: Vec<f64> = (0..=n).map(|j| reference_log_diffusivity((j as f64 + 0.5) * h)).collect();
        let prob = EllipticProblem::synthetic(n, 0.0, 1.0, &z_true)?;
        let mut fd_err = 0.0f64;
        for _ in 0..5 {
            let z = rng.uniform_vector::<f64>(n + 1, -0.5, 0.5);
            fd_err = fd_err.max(fd_gradient_check(&prob, &z, &[1e-5])?[0].rel_error);
        }

        let traj = gradient_descent(&prob, &vec![0.0; n + 1], adjointkit::pde::ELLIPTIC_STEP, 200, 1e-14)?;
        let f = traj.objective_values();
        let reduction = f[0] / f[f.len() - 1];
        Ok(Verdict::new(
            adv_err <= 1e-10 && fd_err <= 1e-5 && reduction >= 100.0 && f.len() <= 201,
            format!(
                "advection err {adv_err:.1e}, elliptic FD rel err {fd_err:.1e}, descent reduction {reduction:.0}x in {} iterations",
                f.len() - 1
            ),
        ))
    })
}

fn c11() -> Res<Verdict> {
    let prob = EllipticProblem::<f64>::new(15, 0.0, 1.0, vec![0.0; 15])?;
    let stiff = prob.stiffness(&[0.0; 16])?;
    let elliptic = discrete_infsup(&DenseOperator::euclidean(stiff))?;
    let singular = discrete_infsup(&DenseOperator::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]])?)?;
    Ok(Verdict::new(
        elliptic > 1e-6 && singular <= 1e-10,
        format!("sigma_min elliptic {elliptic:.4e}, singular 2x2 {singular:.1e}"),
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Res<Verdict>)> = Vec::new();
    results.push((1, c1()));
    let (c2_verdict, typo_only) = match c2() {
        Ok((v, t)) => (Ok(v), t),
        Err(e) => (Err(e), false),
    };
    results.push((2, c2_verdict));
    results.push((3, c3()));
    results.push((4, c4()));
    results.push((5, c5()));
    results.push((6, c6()));
    results.push((7, c7()));
    results.push((8, c8()));
    results.push((9, c9()));
    results.push((10, c10()));
    results.push((11, c11()));

    let mut ok = true;
    for (id, r) in &results {
        let (pass, detail) = match r {
            Ok(v) => (v.pass, v.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        if pass {
            continue;
        }
        match KNOWN_DEVIATIONS.iter().find(|(k, _)| k == id) {
            Some((_, cause)) if *id == 2 && typo_only => println!("              known deviation: {cause}"),
            _ => ok = false,
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
