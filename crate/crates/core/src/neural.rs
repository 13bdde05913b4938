//! Fully connected feed-forward networks: forward pass, layer-wise adjoint
//! recursion and parameter gradients, plus the same network posed as a
//! [`ConstrainedProblem`] whose reduced gradient is backpropagation.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, sub_vec, Matrix};
use crate::optim::ConstrainedProblem;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
            Activation::Logistic => T::one() / (T::one() + (-x).exp()),
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Identity => T::one(),
            Activation::Logistic => {
                let s = self.eval(x);
                s * (T::one() - s)
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            "logistic" => Ok(Activation::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Layer widths `s₀ … s_L` and the shared activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a network needs an input and at least one layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        Ok(Self {
            layer_sizes,
            activation,
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("nonempty")
    }

    /// Total activation count `Σ sᵢ`, the state dimension.
    pub fn state_dim(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Total weight and bias count.
    pub fn parameter_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    /// `Wⁱ` is `sᵢ × sᵢ₋₁`.
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Parameters<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let (weights, biases) = spec
            .layer_sizes
            .windows(2)
            .map(|w| (Matrix::zeros(w[1], w[0]), vec![T::zero(); w[1]]))
            .unzip();
        Self { weights, biases }
    }

    /// Entries drawn uniformly from (−0.5, 0.5).
    pub fn random(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let (weights, biases) = spec
            .layer_sizes
            .windows(2)
            .map(|w| {
                (
                    Matrix::from_fn(w[1], w[0], |_, _| rng.uniform(-0.5, 0.5)),
                    rng.uniform_vector(w[1], -0.5, 0.5),
                )
            })
            .unzip();
        Self { weights, biases }
    }

    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        check_len("layer count", spec.layers(), self.weights.len())?;
        check_len("bias count", spec.layers(), self.biases.len())?;
        for (i, w) in spec.layer_sizes.windows(2).enumerate() {
            check_len("weight rows", w[1], self.weights[i].rows())?;
            check_len("weight cols", w[0], self.weights[i].cols())?;
            check_len("bias length", w[1], self.biases[i].len())?;
        }
        Ok(())
    }

    /// `[W¹ (row-major), b¹, W², b², …]`.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn unflatten(spec: &NetworkSpec, flat: &[T]) -> Result<Self> {
        check_len("flattened parameters", spec.parameter_count(), flat.len())?;
        let mut offset = 0;
        let mut weights = Vec::with_capacity(spec.layers());
        let mut biases = Vec::with_capacity(spec.layers());
        for w in spec.layer_sizes.windows(2) {
            let (rows, cols) = (w[1], w[0]);
            weights.push(Matrix::from_row_major(
                rows,
                cols,
                flat[offset..offset + rows * cols].to_vec(),
            )?);
            offset += rows * cols;
            biases.push(flat[offset..offset + rows].to_vec());
            offset += rows;
        }
        Ok(Self { weights, biases })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// `a⁰ … a^L`, with `a⁰ = x`.
    pub activations: Vec<Vec<T>>,
    /// `Wⁱ aⁱ⁻¹ + bⁱ` for `i = 1 … L` (index `i − 1`).
    pub pre_activations: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("nonempty trace")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrace<T> {
    /// `y⁰ … y^L`.
    pub adjoints: Vec<Vec<T>>,
}

/// `aⁱ = σ(Wⁱ aⁱ⁻¹ + bⁱ)` layer by layer.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    x: &[T],
) -> Result<ForwardTrace<T>> {
    params.check_shape(spec)?;
    check_len("network input", spec.input_dim(), x.len())?;
    let mut activations = Vec::with_capacity(spec.layers() + 1);
    let mut pre_activations = Vec::with_capacity(spec.layers());
    activations.push(x.to_vec());
    for (w, b) in params.weights.iter().zip(&params.biases) {
        let prev = activations.last().expect("input pushed");
        let z: Vec<T> = w
            .matvec(prev)?
            .iter()
            .zip(b)
            .map(|(&wz, &bi)| wz + bi)
            .collect();
        activations.push(z.iter().map(|&v| spec.activation.eval(v)).collect());
        pre_activations.push(z);
    }
    Ok(ForwardTrace {
        activations,
        pre_activations,
    })
}

/// `½ ‖a_obs − a^L‖²`.
pub fn loss<T: Scalar>(trace: &ForwardTrace<T>, a_obs: &[T]) -> Result<T> {
    check_len("observation", trace.output().len(), a_obs.len())?;
    let r = sub_vec(a_obs, trace.output());
    Ok(T::of(0.5) * dot(&r, &r))
}

/// `y^L = a_obs − a^L`, then `yⁱ = (Wⁱ⁺¹)ᵀ [σ′(Wⁱ⁺¹aⁱ + bⁱ⁺¹) ∘ yⁱ⁺¹]` down to
/// `i = 0`.
pub fn adjoint_pass<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    trace: &ForwardTrace<T>,
    a_obs: &[T],
) -> Result<AdjointTrace<T>> {
    check_len("observation", spec.output_dim(), a_obs.len())?;
    let terminal = sub_vec(a_obs, trace.output());
    backward_sweep(spec, params, trace, terminal)
}

/// The backward recursion with an arbitrary terminal value `y^L`.
fn backward_sweep<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    trace: &ForwardTrace<T>,
    terminal: Vec<T>,
) -> Result<AdjointTrace<T>> {
    let layers = spec.layers();
    let mut adjoints = vec![Vec::new(); layers + 1];
    adjoints[layers] = terminal;
    for i in (0..layers).rev() {
        let weighted: Vec<T> = trace.pre_activations[i]
            .iter()
            .zip(&adjoints[i + 1])
            .map(|(&z, &y)| spec.activation.derivative(z) * y)
            .collect();
        adjoints[i] = params.weights[i].tr_matvec(&weighted)?;
    }
    Ok(AdjointTrace { adjoints })
}

/// Largest residual over the block equations the adjoint trace must satisfy.
pub fn adjoint_block_residual<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    trace: &ForwardTrace<T>,
    adjoints: &AdjointTrace<T>,
    a_obs: &[T],
) -> Result<T> {
    let layers = spec.layers();
    let mut worst = crate::linalg::max_abs(&sub_vec(
        &adjoints.adjoints[layers],
        &sub_vec(a_obs, trace.output()),
    ));
    for i in 0..layers {
        let weighted: Vec<T> = trace.pre_activations[i]
            .iter()
            .zip(&adjoints.adjoints[i + 1])
            .map(|(&z, &y)| spec.activation.derivative(z) * y)
            .collect();
        let rhs = params.weights[i].tr_matvec(&weighted)?;
        worst = worst.max(crate::linalg::max_abs(&sub_vec(&adjoints.adjoints[i], &rhs)));
    }
    Ok(worst)
}

/// `∂f/∂Wⁱ = −[yⁱ ∘ σ′(·)] (aⁱ⁻¹)ᵀ`, `∂f/∂bⁱ = −yⁱ ∘ σ′(·)`.
pub fn gradients<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    trace: &ForwardTrace<T>,
    adjoints: &AdjointTrace<T>,
) -> Result<Parameters<T>> {
    params.check_shape(spec)?;
    let mut grad = Parameters::zeros(spec);
    accumulate_gradients(spec, trace, adjoints, &mut grad);
    Ok(grad)
}

fn accumulate_gradients<T: Scalar>(
    spec: &NetworkSpec,
    trace: &ForwardTrace<T>,
    adjoints: &AdjointTrace<T>,
    grad: &mut Parameters<T>,
) {
    for i in 1..=spec.layers() {
        let delta: Vec<T> = trace.pre_activations[i - 1]
            .iter()
            .zip(&adjoints.adjoints[i])
            .map(|(&z, &y)| -(y * spec.activation.derivative(z)))
            .collect();
        let prev = &trace.activations[i - 1];
        let gw = &mut grad.weights[i - 1];
        for (r, &d) in delta.iter().enumerate() {
            for (c, &a) in prev.iter().enumerate() {
                gw[(r, c)] = gw[(r, c)] + d * a;
            }
        }
        for (gb, &d) in grad.biases[i - 1].iter_mut().zip(&delta) {
            *gb = *gb + d;
        }
    }
}

/// One labelled training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub x: Vec<T>,
    pub a_obs: Vec<T>,
}

/// Loss and gradient summed over samples by backpropagation.
pub fn batch_loss_and_gradient<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    samples: &[Sample<T>],
) -> Result<(T, Parameters<T>)> {
    let mut total = T::zero();
    let mut grad = Parameters::zeros(spec);
    for s in samples {
        let trace = forward(spec, params, &s.x)?;
        total = total + loss(&trace, &s.a_obs)?;
        let adj = adjoint_pass(spec, params, &trace, &s.a_obs)?;
        accumulate_gradients(spec, &trace, &adj, &mut grad);
    }
    Ok((total, grad))
}

/// Training posed as `c(u, z) = 0` with `u` the stacked activations of every
/// sample and `z` the flattened parameters. `D_u c` is block lower
/// bidiagonal with identity diagonal blocks, so the adjoint solve is one
/// backward sweep per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkProblem<T> {
    spec: NetworkSpec,
    samples: Vec<Sample<T>>,
}

/// Single-sample network problem.
pub fn as_constrained_problem<T: Scalar>(
    spec: &NetworkSpec,
    x: &[T],
    a_obs: &[T],
) -> Result<NetworkProblem<T>> {
    NetworkProblem::new(
        spec.clone(),
        vec![Sample {
            x: x.to_vec(),
            a_obs: a_obs.to_vec(),
        }],
    )
}

impl<T: Scalar> NetworkProblem<T> {
    pub fn new(spec: NetworkSpec, samples: Vec<Sample<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("at least one sample is required".into()));
        }
        for s in &samples {
            check_len("sample input", spec.input_dim(), s.x.len())?;
            check_len("sample label", spec.output_dim(), s.a_obs.len())?;
        }
        Ok(Self { spec, samples })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    /// Splits a stacked vector into per-sample, per-layer blocks.
    fn split<'a>(&self, u: &'a [T]) -> Vec<Vec<&'a [T]>> {
        let per = self.spec.state_dim();
        u.chunks(per)
            .map(|chunk| {
                let mut blocks = Vec::with_capacity(self.spec.layer_sizes.len());
                let mut offset = 0;
                for &s in &self.spec.layer_sizes {
                    blocks.push(&chunk[offset..offset + s]);
                    offset += s;
                }
                blocks
            })
            .collect()
    }

    /// Forward trace rebuilt from a (not necessarily feasible) state.
    fn trace_at(&self, params: &Parameters<T>, blocks: &[&[T]]) -> Result<ForwardTrace<T>> {
        let mut pre_activations = Vec::with_capacity(self.spec.layers());
        for i in 0..self.spec.layers() {
            let z: Vec<T> = params.weights[i]
                .matvec(blocks[i])?
                .iter()
                .zip(&params.biases[i])
                .map(|(&wz, &b)| wz + b)
                .collect();
            pre_activations.push(z);
        }
        Ok(ForwardTrace {
            activations: blocks.iter().map(|b| b.to_vec()).collect(),
            pre_activations,
        })
    }

    fn check_dims(&self, u: &[T], z: &[T]) -> Result<Parameters<T>> {
        check_len("network state", self.state_dim(), u.len())?;
        Parameters::unflatten(&self.spec, z)
    }
}

impl<T: Scalar> ConstrainedProblem<T> for NetworkProblem<T> {
    fn state_dim(&self) -> usize {
        self.spec.state_dim() * self.samples.len()
    }

    fn control_dim(&self) -> usize {
        self.spec.parameter_count()
    }

    fn residual(&self, u: &[T], z: &[T]) -> Result<Vec<T>> {
        let params = self.check_dims(u, z)?;
        let mut out = Vec::with_capacity(u.len());
        for (blocks, sample) in self.split(u).iter().zip(&self.samples) {
            out.extend(sub_vec(blocks[0], &sample.x));
            let trace = self.trace_at(&params, blocks)?;
            for i in 1..blocks.len() {
                out.extend(
                    blocks[i]
                        .iter()
                        .zip(&trace.pre_activations[i - 1])
                        .map(|(&a, &p)| a - self.spec.activation.eval(p)),
                );
            }
        }
        Ok(out)
    }

    fn solve_forward(&self, z: &[T]) -> Result<Vec<T>> {
        let params = Parameters::unflatten(&self.spec, z)?;
        let mut out = Vec::with_capacity(self.state_dim());
        for s in &self.samples {
            for a in forward(&self.spec, &params, &s.x)?.activations {
                out.extend(a);
            }
        }
        Ok(out)
    }

    fn apply_duc(&self, u: &[T], z: &[T], du: &[T]) -> Result<Vec<T>> {
        let params = self.check_dims(u, z)?;
        check_len("state direction", u.len(), du.len())?;
        let mut out = Vec::with_capacity(u.len());
        for (blocks, dblocks) in self.split(u).iter().zip(self.split(du)) {
            let trace = self.trace_at(&params, blocks)?;
            out.extend_from_slice(dblocks[0]);
            for i in 1..blocks.len() {
                let wd = params.weights[i - 1].matvec(dblocks[i - 1])?;
                out.extend(
                    dblocks[i]
                        .iter()
                        .zip(&trace.pre_activations[i - 1])
                        .zip(&wd)
                        .map(|((&d, &p), &w)| d - self.spec.activation.derivative(p) * w),
                );
            }
        }
        Ok(out)
    }

    fn apply_duc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        let params = self.check_dims(u, z)?;
        check_len("adjoint vector", u.len(), y.len())?;
        let mut out = Vec::with_capacity(u.len());
        for (blocks, yblocks) in self.split(u).iter().zip(self.split(y)) {
            let trace = self.trace_at(&params, blocks)?;
            let layers = self.spec.layers();
            for i in 0..=layers {
                let mut v = yblocks[i].to_vec();
                if i < layers {
                    let weighted: Vec<T> = trace.pre_activations[i]
                        .iter()
                        .zip(yblocks[i + 1])
                        .map(|(&p, &yy)| self.spec.activation.derivative(p) * yy)
                        .collect();
                    v = sub_vec(&v, &params.weights[i].tr_matvec(&weighted)?);
                }
                out.extend(v);
            }
        }
        Ok(out)
    }

    /// Backward sweep: the identity diagonal blocks make the transposed
    /// system block upper triangular.
    fn solve_duc_adjoint(&self, u: &[T], z: &[T], rhs: &[T]) -> Result<Vec<T>> {
        let params = self.check_dims(u, z)?;
        check_len("adjoint right-hand side", u.len(), rhs.len())?;
        let layers = self.spec.layers();
        let mut out = Vec::with_capacity(u.len());
        for (blocks, rblocks) in self.split(u).iter().zip(self.split(rhs)) {
            let trace = self.trace_at(&params, blocks)?;
            let mut ys: Vec<Vec<T>> = vec![Vec::new(); layers + 1];
            ys[layers] = rblocks[layers].to_vec();
            for i in (0..layers).rev() {
                let weighted: Vec<T> = trace.pre_activations[i]
                    .iter()
                    .zip(&ys[i + 1])
                    .map(|(&p, &yy)| self.spec.activation.derivative(p) * yy)
                    .collect();
                let back = params.weights[i].tr_matvec(&weighted)?;
                ys[i] = rblocks[i].iter().zip(&back).map(|(&r, &b)| r + b).collect();
            }
            for y in ys {
                out.extend(y);
            }
        }
        Ok(out)
    }

    fn apply_dzc_adjoint(&self, u: &[T], z: &[T], y: &[T]) -> Result<Vec<T>> {
        let params = self.check_dims(u, z)?;
        let mut grad = Parameters::zeros(&self.spec);
        for (blocks, yblocks) in self.split(u).iter().zip(self.split(y)) {
            let trace = self.trace_at(&params, blocks)?;
            let adj = AdjointTrace {
                adjoints: yblocks.iter().map(|b| b.to_vec()).collect(),
            };
            accumulate_gradients(&self.spec, &trace, &adj, &mut grad);
        }
        Ok(grad.flatten())
    }

    fn objective(&self, u: &[T], _z: &[T]) -> T {
        let half = T::of(0.5);
        self.split(u)
            .iter()
            .zip(&self.samples)
            .map(|(blocks, s)| {
                let r = sub_vec(&s.a_obs, blocks[blocks.len() - 1]);
                half * dot(&r, &r)
            })
            .sum()
    }

    fn grad_u_objective(&self, u: &[T], _z: &[T]) -> Vec<T> {
        let last = self.spec.output_dim();
        let per = self.spec.state_dim();
        let mut g = vec![T::zero(); u.len()];
        for (k, s) in self.samples.iter().enumerate() {
            let start = (k + 1) * per - last;
            for j in 0..last {
                g[start + j] = u[start + j] - s.a_obs[j];
            }
        }
        g
    }

    fn grad_z_objective(&self, _u: &[T], z: &[T]) -> Vec<T> {
        vec![T::zero(); z.len()]
    }
}
