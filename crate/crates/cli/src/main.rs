//! `adjointkit` command-line front end.
//!
//! Exit status: 0 on success, 1 when a selftest suite fails, 2 on invalid
//! input, 3 on numerical failure (a JSON diagnostic is printed).

mod io;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adjointkit::inverse::{integration_operator, normal_solve, picard_diagnostic, tikhonov_solve};
use adjointkit::neural::{Activation, NetworkSpec, Sample};
use adjointkit::operator::adjoint_consistency_check;
use adjointkit::optim::{fd_gradient_check, gradient_descent, Trajectory};
use adjointkit::pde::{PdeConfig, PdeProblem};
use adjointkit::rng::{SeededRng, DEFAULT_SEED};
use adjointkit::selftest::{selftest, SelftestOptions, Suite};
use adjointkit::spectral::{fundamental_subspaces, solvability_check, svd};
use adjointkit::stability::{next_generation, BuiltinModel};
use adjointkit::sturm::{discretize, solve_modes, BoundaryCondition, SlProblem};
use adjointkit::{DenseOperator, Error, NetworkProblem, Parameters, StabilityReport};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "adjointkit", version, about = "Adjoint-based numerical toolkit")]
struct Cli {
    /// Seed for every randomized check and initialization.
    #[arg(long, global = true, env = "ADJOINTKIT_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Write results to this file instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized check of ⟨Au, v⟩ = ⟨u, A*v⟩ for an operator record.
    AdjointCheck {
        #[arg(long)]
        op: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Singular system and fundamental subspace dimensions.
    Svd {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Minimum-norm least-squares solution with a solvability verdict.
    Solve {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Tikhonov-regularized solution.
    Tikhonov {
        #[command(flatten)]
        problem: InverseInput,
        #[arg(long)]
        kappa: f64,
        /// Prior x₀ as a JSON array (defaults to zero).
        #[arg(long)]
        prior: Option<PathBuf>,
    },
    /// Picard table as CSV.
    Picard {
        #[command(flatten)]
        problem: InverseInput,
    },
    /// Trains a feed-forward network by steepest descent; prints the loss curve.
    Train {
        /// Layer sizes, e.g. `sizes=2,4,1`.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "tanh")]
        act: Activation,
        /// JSON list of {"x": [...], "a_obs": [...]}.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Stability verdict at an equilibrium of a built-in model or of ẋ = Ax.
    Stability {
        /// damped-oscillator, logistic, seirs, or a JSON matrix file.
        #[arg(long)]
        model: String,
        /// Equilibrium, comma separated (defaults to the model's own).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eq: Option<Vec<f64>>,
    },
    /// Basic reproduction number ρ(F V⁻¹).
    R0 {
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long = "V")]
        v: PathBuf,
    },
    /// Sturm-Liouville modes of −v″ = λv as CSV.
    Sturm {
        #[arg(long, default_value = "dirichlet")]
        bc: BoundaryCondition,
        #[arg(long, default_value_t = 63)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        modes: usize,
    },
    /// PDE-constrained control problems.
    Pdeopt(PdeoptArgs),
    /// Cross-module invariant suites.
    Selftest {
        #[arg(long)]
        suite: Vec<Suite>,
        #[arg(long, hide = true)]
        corrupt_adjoint: bool,
    },
}

#[derive(Args)]
struct InverseInput {
    /// Operator record; mutually exclusive with --integration.
    #[arg(long, conflicts_with = "integration", required_unless_present = "integration")]
    op: Option<PathBuf>,
    /// Use the n-point integration operator on (0, 1).
    #[arg(long)]
    integration: Option<usize>,
    /// Data as a JSON array. With --integration it defaults to samples of
    /// ∫₀ᵗ sin(πs) ds.
    #[arg(long)]
    rhs: Option<PathBuf>,
    /// Standard deviation of seeded Gaussian noise added to the data.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args)]
struct PdeoptArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = PdeConfig::default().n)]
    n: usize,
    #[arg(long, default_value_t = PdeConfig::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = PdeConfig::default().g0, allow_hyphen_values = true)]
    g0: f64,
    #[arg(long, default_value_t = PdeConfig::default().g1, allow_hyphen_values = true)]
    g1: f64,
    #[arg(long, default_value_t = PdeConfig::default().kappa)]
    kappa: f64,
    /// Compare the adjoint gradient with central differences (JSON).
    #[arg(long, conflicts_with = "descend")]
    check_gradient: bool,
    /// Run steepest descent and print the iteration log (CSV).
    #[arg(long)]
    descend: bool,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Nominal line-search step (problem default if omitted).
    #[arg(long)]
    step: Option<f64>,
    /// Also write the `x,u,v,grad` fields at the final control to this file.
    #[arg(long)]
    fields: Option<PathBuf>,
}

/// Successful output: text for the output stream plus the exit status.
struct Outcome {
    text: String,
    status: u8,
}

impl From<String> for Outcome {
    fn from(text: String) -> Self {
        Outcome { text, status: 0 }
    }
}

fn json_line(value: &serde_json::Value) -> String {
    let mut s = value.to_string();
    s.push('\n');
    s
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--{name} must be positive, got {x}")))
    }
}

fn adjoint_check(op: &Path, trials: usize, tol: f64) -> CliResult<String> {
    positive("tol", tol)?;
    let op = io::read_operator(op)?;
    let rep = adjoint_consistency_check(&op, trials, 0x5eed)?;
    Ok(json_line(&json!({
        "trials": rep.trials,
        "max_defect": rep.max_defect,
        "tol": tol,
        "passed": rep.max_defect <= tol,
    })))
}

fn svd_cmd(op: &Path, rank_tol: Option<f64>) -> CliResult<String> {
    if let Some(t) = rank_tol {
        positive("rank-tol", t)?;
    }
    let op = io::read_operator(op)?;
    let s = svd(&op, rank_tol)?;
    let (r_a, n_a, r_as, n_as) = fundamental_subspaces(&s).dims();
    let mut out = json_line(&json!({
        "sigma": s.sigma,
        "rank": s.rank,
        "U": s.right_vectors,
        "V": s.left_vectors,
    }));
    let retained: Vec<String> = s.sigma[..s.rank].iter().map(|x| format!("{x:.4}")).collect();
    writeln!(out, "{}", retained.join(",")).unwrap();
    writeln!(out, "dim R(A)={r_a} dim N(A)={n_a} dim R(A*)={r_as} dim N(A*)={n_as}").unwrap();
    Ok(out)
}

fn solve_cmd(op: &Path, rhs: &Path, tol: f64) -> CliResult<String> {
    positive("tol", tol)?;
    let op = io::read_operator(op)?;
    let y = io::read_vector(rhs)?;
    let verdict = solvability_check(&op, &y, tol)?;
    let x = normal_solve(&op, &y)?;
    let r = adjointkit::linalg::sub_vec(&op.apply(&x)?, &y);
    Ok(json_line(&json!({
        "x": x,
        "residual_norm": op.codomain().norm(&r)?,
        "solvable": verdict.solvable,
        "defect": verdict.defect,
    })))
}

fn inverse_problem(input: &InverseInput, seed: u64) -> CliResult<(DenseOperator, Vec<f64>)> {
    if input.noise < 0.0 {
        return Err(CliError::Validation("--noise must be nonnegative".into()));
    }
    let op = match (&input.op, input.integration) {
        (Some(path), _) => io::read_operator(path)?,
        (None, Some(n)) => integration_operator::<f64>(n)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut y = match (&input.rhs, input.integration) {
        (Some(path), _) => io::read_vector(path)?,
        (None, Some(n)) => {
            let pi = std::f64::consts::PI;
            (1..=n)
                .map(|i| (1.0 - (pi * i as f64 / n as f64).cos()) / pi)
                .collect()
        }
        (None, None) => return Err(CliError::Validation("--rhs is required with --op".into())),
    };
    if input.noise > 0.0 {
        let mut rng = SeededRng::new(seed);
        for v in &mut y {
            *v += input.noise * rng.normal::<f64>();
        }
    }
    Ok((op, y))
}

fn tikhonov_cmd(input: &InverseInput, kappa: f64, prior: Option<&Path>, seed: u64) -> CliResult<String> {
    positive("kappa", kappa)?;
    let (op, y) = inverse_problem(input, seed)?;
    let x0 = match prior {
        Some(p) => io::read_vector(p)?,
        None => vec![0.0; op.domain().dim()],
    };
    let sol = tikhonov_solve(&op, &y, kappa, &x0)?;
    Ok(json_line(&serde_json::to_value(&sol).expect("plain data")))
}

fn picard_cmd(input: &InverseInput, seed: u64) -> CliResult<String> {
    let (op, y) = inverse_problem(input, seed)?;
    Ok(picard_diagnostic(&op, &y)?.to_csv())
}

fn parse_sizes(spec: &str) -> CliResult<Vec<usize>> {
    let list = spec.strip_prefix("sizes=").unwrap_or(spec);
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Validation(format!("bad layer size {s:?} in --spec")))
        })
        .collect()
}

fn train_cmd(spec: &str, act: Activation, data: &Path, iters: usize, step: f64, seed: u64) -> CliResult<String> {
    positive("step", step)?;
    let spec = NetworkSpec::new(parse_sizes(spec)?, act)?;
    let samples: Vec<Sample<f64>> = io::read_json(data)?;
    let params = Parameters::random(&spec, seed).flatten();
    let problem = NetworkProblem::new(spec, samples)?;
    let traj: Trajectory<f64> = gradient_descent(&problem, &params, step, iters, 1e-12)?;
    Ok(traj.to_csv())
}

fn report_json(rep: &StabilityReport) -> serde_json::Value {
    json!({
        "hurwitz": rep.hurwitz,
        "spd_certificate": rep.spd_certificate,
        "spectral_abscissa_bound": rep.spectral_abscissa_bound,
        "routh_margin": rep.routh_margin,
        "r0": rep.r0,
        "jacobian": io::rows_of(&rep.jacobian),
        "lyapunov_P": rep.lyapunov_p.as_ref().map(io::rows_of),
    })
}

fn stability_cmd(model: &str, eq: Option<&[f64]>) -> CliResult<String> {
    let rep = match BuiltinModel::<f64>::from_name(model) {
        Ok(m) => {
            let x_eq = eq.map_or_else(|| m.default_equilibrium(), <[f64]>::to_vec);
            m.verdict(&x_eq)?
        }
        Err(_) if Path::new(model).exists() => {
            if eq.is_some() {
                return Err(CliError::Validation("--eq does not apply to a linear model".into()));
            }
            let a = io::read_matrix(Path::new(model))?;
            adjointkit::stability::stability_of_matrix(&a)?
        }
        Err(e) => return Err(e.into()),
    };
    Ok(json_line(&report_json(&rep)))
}

fn r0_cmd(f: &Path, v: &Path) -> CliResult<String> {
    let ng = next_generation(&io::read_matrix(f)?, &io::read_matrix(v)?)?;
    for w in &ng.warnings {
        eprintln!("warning: {w}");
    }
    Ok(json_line(&json!({
        "r0": ng.r0,
        "iterations": ng.iterations,
        "warnings": ng.warnings,
    })))
}

fn sturm_cmd(bc: BoundaryCondition, n: usize, modes: usize) -> CliResult<String> {
    let disc = discretize(&SlProblem::<f64>::laplacian(bc, n))?;
    Ok(solve_modes(&disc, modes)?.to_csv())
}

fn pdeopt_cmd(args: &PdeoptArgs) -> CliResult<String> {
    positive("beta", args.beta)?;
    if args.kappa < 0.0 {
        return Err(CliError::Validation("--kappa must be nonnegative".into()));
    }
    let cfg = PdeConfig {
        n: args.n,
        beta: args.beta,
        g0: args.g0,
        g1: args.g1,
        kappa: args.kappa,
    };
    let problem = PdeProblem::build(&args.problem, &cfg)?;
    let z0 = problem.initial_control();
    let (text, z_final) = if args.check_gradient {
        let steps = [1e-3, 1e-4, 1e-5, 1e-6];
        let checks = fd_gradient_check(&problem, &z0, &steps)?;
        let g = adjointkit::optim::reduced_gradient(&problem, &z0)?.gradient;
        let text = json_line(&json!({
            "problem": args.problem,
            "gradient": g,
            "fd": checks,
        }));
        (text, z0)
    } else if args.descend {
        let step = args.step.unwrap_or_else(|| problem.default_step());
        positive("step", step)?;
        let traj = gradient_descent(&problem, &z0, step, args.iters, 1e-12)?;
        (traj.to_csv(), traj.z)
    } else {
        (problem.fields(&z0)?.to_csv(), z0)
    };
    if let Some(path) = &args.fields {
        let csv = problem.fields(&z_final)?.to_csv();
        fs::write(path, csv)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(text)
}

fn selftest_cmd(suites: &[Suite], corrupt_adjoint: bool, seed: u64) -> Outcome {
    let chosen: Vec<Suite> = if suites.is_empty() { Suite::ALL.to_vec() } else { suites.to_vec() };
    let reports = selftest(&chosen, SelftestOptions { seed, corrupt_adjoint });
    let mut text = String::new();
    for r in &reports {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        writeln!(
            text,
            "{}: {verdict} (worst {:.3e}, tol {:.0e}) {}",
            r.suite.name(),
            r.worst,
            r.tolerance,
            r.detail
        )
        .unwrap();
    }
    let status = if reports.iter().all(|r| r.passed) { 0 } else { 1 };
    Outcome { text, status }
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    let seed = cli.seed;
    let text = match &cli.command {
        Command::AdjointCheck { op, trials, tol } => adjoint_check(op, *trials, *tol)?,
        Command::Svd { op, rank_tol } => svd_cmd(op, *rank_tol)?,
        Command::Solve { op, rhs, tol } => solve_cmd(op, rhs, *tol)?,
        Command::Tikhonov { problem, kappa, prior } => tikhonov_cmd(problem, *kappa, prior.as_deref(), seed)?,
        Command::Picard { problem } => picard_cmd(problem, seed)?,
        Command::Train {
            spec,
            act,
            data,
            iters,
            step,
        } => train_cmd(spec, *act, data, *iters, *step, seed)?,
        Command::Stability { model, eq } => stability_cmd(model, eq.as_deref())?,
        Command::R0 { f, v } => r0_cmd(f, v)?,
        Command::Sturm { bc, n, modes } => sturm_cmd(*bc, *n, *modes)?,
        Command::Pdeopt(args) => pdeopt_cmd(args)?,
        Command::Selftest { suite, corrupt_adjoint } => return Ok(selftest_cmd(suite, *corrupt_adjoint, seed)),
    };
    Ok(text.into())
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => match emit(cli.output.as_deref(), &outcome.text) {
            Ok(()) => ExitCode::from(outcome.status),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        },
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(e)) => {
            println!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(3)
        }
    }
}
