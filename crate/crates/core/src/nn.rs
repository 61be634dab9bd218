//! Dense feed-forward networks over a flat parameter vector.
//!
//! Parameters for layer `l` are stored as `weights (fan_out x fan_in, row-major)`
//! followed by `biases (fan_out)`, layers in order. Everything is `f64`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Index ranges of one layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRange {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub biases: Range<usize>,
}

impl MlpSpec {
    /// Tanh hidden layers, linear output.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        Self::with_activations(layer_sizes, Activation::Tanh, Activation::Linear)
    }

    pub fn with_activations(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least an input and an output layer, got {} sizes",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("layer {pos} has size 0")));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn layout(&self) -> Vec<LayerRange> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset..offset + fan_in * fan_out;
                let biases = weights.end..weights.end + fan_out;
                offset = biases.end;
                LayerRange {
                    fan_in,
                    fan_out,
                    weights,
                    biases,
                }
            })
            .collect()
    }

    pub fn unflatten(&self, params: &ParamVector) -> Result<Vec<LayerParams>> {
        self.check_params(params.as_slice())?;
        Ok(self
            .layout()
            .into_iter()
            .map(|r| LayerParams {
                fan_in: r.fan_in,
                fan_out: r.fan_out,
                weights: params.as_slice()[r.weights].to_vec(),
                biases: params.as_slice()[r.biases].to_vec(),
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[LayerParams]) -> Result<ParamVector> {
        let layout = self.layout();
        if layers.len() != layout.len() {
            return Err(Error::dims("flatten layers", layout.len(), layers.len()));
        }
        let mut values = Vec::with_capacity(self.n_params());
        for (l, r) in layers.iter().zip(&layout) {
            if l.weights.len() != r.weights.len() {
                return Err(Error::dims("flatten weights", r.weights.len(), l.weights.len()));
            }
            if l.biases.len() != r.biases.len() {
                return Err(Error::dims("flatten biases", r.biases.len(), l.biases.len()));
            }
            values.extend_from_slice(&l.weights);
            values.extend_from_slice(&l.biases);
        }
        Ok(ParamVector::from(values))
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::dims("mlp parameters", self.n_params(), params.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Flat, ordered parameter storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Little-endian `u32` length followed by little-endian `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.0.len());
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the [`ParamVector::to_bytes`] format; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (len_bytes, rest) = bytes
            .split_first_chunk::<4>()
            .ok_or_else(|| Error::Checkpoint("parameter blob shorter than its length prefix".into()))?;
        let len = u32::from_le_bytes(*len_bytes) as usize;
        if rest.len() != len * 8 {
            return Err(Error::Checkpoint(format!(
                "parameter blob declares {len} values but carries {} bytes",
                rest.len()
            )));
        }
        let values = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self(values))
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Fan-in scaled uniform weights (limit `1/sqrt(fan_in)`), zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    init_params_with_head_scale(spec, seed, 1.0)
}

/// As [`init_params`], with the output layer's weights multiplied by `head_scale`.
pub fn init_params_with_head_scale(spec: &MlpSpec, seed: u64, head_scale: f64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.n_params()];
    let layout = spec.layout();
    let last = layout.len() - 1;
    for (l, r) in layout.into_iter().enumerate() {
        let limit = 1.0 / (r.fan_in as f64).sqrt();
        let scale = if l == last { head_scale } else { 1.0 };
        for w in &mut values[r.weights] {
            *w = rng.random_range(-limit..limit) * scale;
        }
    }
    ParamVector(values)
}

/// Post-activation values of every layer, input included.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input at least")
    }
}

pub fn forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    let mut trace = forward_trace(spec, params, input)?;
    Ok(trace.activations.pop().expect("non-empty"))
}

pub fn forward_trace(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<ForwardTrace> {
    spec.check_params(params)?;
    if input.len() != spec.input_dim() {
        return Err(Error::dims("network input", spec.input_dim(), input.len()));
    }
    let mut activations = Vec::with_capacity(spec.n_layers() + 1);
    activations.push(input.to_vec());
    for (l, r) in spec.layout().into_iter().enumerate() {
        let act = spec.activation(l);
        let x = &activations[l];
        let w = &params[r.weights];
        let b = &params[r.biases];
        let out: Vec<f64> = (0..r.fan_out)
            .map(|j| {
                let row = &w[j * r.fan_in..(j + 1) * r.fan_in];
                let z = b[j] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                act.apply(z)
            })
            .collect();
        activations.push(out);
    }
    Ok(ForwardTrace { activations })
}

/// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
pub fn backward(
    spec: &MlpSpec,
    params: &[f64],
    trace: &ForwardTrace,
    d_output: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    spec.check_params(params)?;
    if grad.len() != params.len() {
        return Err(Error::dims("gradient buffer", params.len(), grad.len()));
    }
    if d_output.len() != spec.output_dim() {
        return Err(Error::dims("output adjoint", spec.output_dim(), d_output.len()));
    }
    let layout = spec.layout();
    let mut delta = d_output.to_vec();
    for l in (0..layout.len()).rev() {
        let r = &layout[l];
        let act = spec.activation(l);
        let out = &trace.activations[l + 1];
        for (d, &a) in delta.iter_mut().zip(out) {
            *d *= act.derivative_from_output(a);
        }
        let x = &trace.activations[l];
        let (gw, gb) = grad[r.weights.start..r.biases.end].split_at_mut(r.weights.len());
        for j in 0..r.fan_out {
            let dj = delta[j];
            if dj == 0.0 {
                continue;
            }
            gb[j] += dj;
            for (g, xi) in gw[j * r.fan_in..(j + 1) * r.fan_in].iter_mut().zip(x) {
                *g += dj * xi;
            }
        }
        if l > 0 {
            let w = &params[r.weights.clone()];
            let mut prev = vec![0.0; r.fan_in];
            for j in 0..r.fan_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[j * r.fan_in..(j + 1) * r.fan_in]) {
                    *p += dj * wi;
                }
            }
            delta = prev;
        }
    }
    Ok(())
}

/// Loss value and `d(loss)/d(params)` for a batch of inputs.
///
/// The closure receives one tape variable per network output per input and
/// returns the scalar loss node. Network outputs are differentiated on the
/// tape, then pulled back through the layers by [`backward`].
pub fn gradient<F>(spec: &MlpSpec, params: &ParamVector, inputs: &[Vec<f64>], loss: F) -> Result<(f64, ParamVector)>
where
    F: FnOnce(&mut Tape, &[Vec<Var>]) -> Var,
{
    let traces = inputs
        .iter()
        .map(|x| forward_trace(spec, params.as_slice(), x))
        .collect::<Result<Vec<_>>>()?;
    let mut tape = Tape::with_capacity(inputs.len() * (spec.output_dim() + 8));
    let outputs: Vec<Vec<Var>> = traces
        .iter()
        .map(|t| t.output().iter().map(|&o| tape.var(o)).collect())
        .collect();
    let root = loss(&mut tape, &outputs);
    let value = tape.value(root);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("loss evaluated to {value}")));
    }
    let adjoint = tape.backward(root);
    let mut grad = ParamVector::zeros(params.len());
    for (trace, outs) in traces.iter().zip(&outputs) {
        let d_out: Vec<f64> = outs.iter().map(|v| adjoint[v.index()]).collect();
        backward(spec, params.as_slice(), trace, &d_out, grad.as_mut_slice())?;
    }
    if !grad.is_finite() {
        return Err(Error::Numerical("non-finite gradient entry".into()));
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Defaults `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self::with_betas(n_params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(n_params: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n {
            return Err(Error::dims("adam parameters", n, params.len()));
        }
        if grad.len() != n {
            return Err(Error::dims("adam gradient", n, grad.len()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let p = params.as_mut_slice();
        for i in 0..n {
            let g = grad[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(state: &AdamState, params: &ParamVector, grad: &ParamVector) -> Result<(AdamState, ParamVector)> {
    let mut state = state.clone();
    let mut params = params.clone();
    state.step(&mut params, grad)?;
    Ok((state, params))
}
