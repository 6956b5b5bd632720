//! Parameters, forward pass and analytic backpropagation.
//!
//! Activations are stored channel-major (`[channel][row][col]`). All
//! parameters live in one flat vector; [`Layout`] records where each tensor
//! starts.

use rand::Rng;

use super::config::{NetworkConfig, KERNEL, POOL};
use crate::error::{Error, Result};
use crate::sampling::RandomSource;
use crate::tomography::MeasurementVector;

/// Measurement values arranged as a 2-D grid in joint-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct InputGrid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl InputGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }
}

/// Row-major fill of 6^⌈m/2⌉ × 6^⌊m/2⌋.
pub fn reshape_input(v: &MeasurementVector) -> Result<InputGrid> {
    let m = v.num_qubits();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "single-qubit inputs are too narrow for 2x2 convolutions; pad to m >= 2".into(),
        ));
    }
    let (rows, cols) = NetworkConfig::new(m).input_shape();
    Ok(InputGrid { rows, cols, data: v.values().to_vec() })
}

/// Named parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    dense1_w: usize,
    dense1_b: usize,
    dense2_w: usize,
    dense2_b: usize,
    out_w: usize,
    out_b: usize,
}

pub fn tensor_specs(config: &NetworkConfig) -> Vec<TensorSpec> {
    let f = config.filters;
    let [d1, d2] = config.dense;
    let shapes: [(&'static str, Vec<usize>); 10] = [
        ("conv1.weight", vec![f, 1, KERNEL, KERNEL]),
        ("conv1.bias", vec![f]),
        ("conv2.weight", vec![f, f, KERNEL, KERNEL]),
        ("conv2.bias", vec![f]),
        ("dense1.weight", vec![d1, config.flat_len()]),
        ("dense1.bias", vec![d1]),
        ("dense2.weight", vec![d2, d1]),
        ("dense2.bias", vec![d2]),
        ("output.weight", vec![config.output_len(), d2]),
        ("output.bias", vec![config.output_len()]),
    ];
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, dims)| {
            let spec = TensorSpec { name, dims, offset };
            offset += spec.len();
            spec
        })
        .collect()
}

fn layout(specs: &[TensorSpec]) -> Layout {
    Layout {
        conv1_w: specs[0].offset,
        conv1_b: specs[1].offset,
        conv2_w: specs[2].offset,
        conv2_b: specs[3].offset,
        dense1_w: specs[4].offset,
        dense1_b: specs[5].offset,
        dense2_w: specs[6].offset,
        dense2_b: specs[7].offset,
        out_w: specs[8].offset,
        out_b: specs[9].offset,
    }
}

/// Weights, biases and Adagrad accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    config: NetworkConfig,
    specs: Vec<TensorSpec>,
    pub(crate) values: Vec<f64>,
    pub(crate) accumulators: Vec<f64>,
}

impl NetworkParams {
    /// All parameters zero.
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let specs = tensor_specs(config);
        let total = specs.last().map_or(0, |s| s.offset + s.len());
        Ok(Self {
            config: config.clone(),
            specs,
            values: vec![0.0; total],
            accumulators: vec![0.0; total],
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init(config: &NetworkConfig, rng: &mut RandomSource) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        for spec in &params.specs {
            if spec.dims.len() == 1 {
                continue;
            }
            let (fan_in, fan_out) = match spec.dims.as_slice() {
                [out, inp, kh, kw] => (inp * kh * kw, out * kh * kw),
                [out, inp] => (*inp, *out),
                _ => unreachable!("weights are 2-D or 4-D"),
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut params.values[spec.range()] {
                *v = rng.gen_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub(crate) fn from_parts(
        config: NetworkConfig,
        values: Vec<f64>,
        accumulators: Vec<f64>,
    ) -> Result<Self> {
        let mut params = Self::zeros(&config)?;
        if values.len() != params.values.len() || accumulators.len() != params.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {} values and {} accumulators",
                params.values.len(),
                values.len(),
                accumulators.len()
            )));
        }
        params.values = values;
        params.accumulators = accumulators;
        Ok(params)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Updates the stored epoch budget; the only field that does not affect shapes.
    pub fn set_max_epochs(&mut self, epochs: usize) {
        self.config.max_epochs = epochs;
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accumulators
    }

    fn layout(&self) -> Layout {
        layout(&self.specs)
    }
}

/// Inverted-dropout multipliers (0 or 1/(1−rate)) for the second dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn sample(width: usize, rate: f64, rng: &mut RandomSource) -> Self {
        if rate == 0.0 {
            return Self::keep_all(width);
        }
        let keep = 1.0 / (1.0 - rate);
        Self((0..width).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect())
    }

    pub fn keep_all(width: usize) -> Self {
        Self(vec![1.0; width])
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    Infer,
    Train(&'a DropoutMask),
}

/// Network input: raw grid plus regression target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub grid: InputGrid,
    pub target: Vec<f64>,
}

/// Intermediate activations kept for backpropagation.
struct Activations {
    input: Vec<f64>,
    conv1: Vec<f64>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    conv2: Vec<f64>,
    dense1: Vec<f64>,
    dense2: Vec<f64>,
    dropped: Vec<f64>,
    output: Vec<f64>,
}

/// Valid 2×2 convolution, stride 1, followed by ReLU.
fn conv_forward(
    input: &[f64],
    channels: usize,
    (h, w): (usize, usize),
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let filters = bias.len();
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    let mut out = vec![0.0; filters * oh * ow];
    for f in 0..filters {
        let plane = &mut out[f * oh * ow..(f + 1) * oh * ow];
        plane.fill(bias[f]);
        for c in 0..channels {
            let src = &input[c * h * w..(c + 1) * h * w];
            let k = &weights[(f * channels + c) * KERNEL * KERNEL..][..KERNEL * KERNEL];
            for i in 0..oh {
                let row = &mut plane[i * ow..(i + 1) * ow];
                for ki in 0..KERNEL {
                    let s = &src[(i + ki) * w..];
                    for kj in 0..KERNEL {
                        let wv = k[ki * KERNEL + kj];
                        for (j, o) in row.iter_mut().enumerate() {
                            *o += wv * s[j + kj];
                        }
                    }
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Backward pass of [`conv_forward`]. `grad_out` is the gradient with respect
/// to the post-ReLU output; `out` is that output.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    channels: usize,
    (h, w): (usize, usize),
    weights: &[f64],
    out: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let filters = grad_b.len();
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    for f in 0..filters {
        for p in 0..oh * ow {
            let idx = f * oh * ow + p;
            if out[idx] <= 0.0 {
                continue;
            }
            let g = grad_out[idx];
            if g == 0.0 {
                continue;
            }
            let (i, j) = (p / ow, p % ow);
            grad_b[f] += g;
            for c in 0..channels {
                let base = (f * channels + c) * KERNEL * KERNEL;
                for ki in 0..KERNEL {
                    for kj in 0..KERNEL {
                        let src = c * h * w + (i + ki) * w + j + kj;
                        grad_w[base + ki * KERNEL + kj] += g * input[src];
                        if let Some(gi) = grad_in.as_deref_mut() {
                            gi[src] += g * weights[base + ki * KERNEL + kj];
                        }
                    }
                }
            }
        }
    }
}

/// 2×2 max pooling, stride 2, floor. Returns values and flat source indices.
fn pool_forward(input: &[f64], channels: usize, (h, w): (usize, usize)) -> (Vec<f64>, Vec<usize>) {
    let (ph, pw) = (h / POOL, w / POOL);
    let mut out = Vec::with_capacity(channels * ph * pw);
    let mut arg = Vec::with_capacity(channels * ph * pw);
    for c in 0..channels {
        for i in 0..ph {
            for j in 0..pw {
                let mut best = c * h * w + (i * POOL) * w + j * POOL;
                for di in 0..POOL {
                    for dj in 0..POOL {
                        let idx = c * h * w + (i * POOL + di) * w + j * POOL + dj;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

fn dense_forward(x: &[f64], weights: &[f64], bias: &[f64], relu: bool) -> Vec<f64> {
    let n_in = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weights[o * n_in..(o + 1) * n_in];
            let v = b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            if relu {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect()
}

/// Accumulates weight/bias gradients of a dense layer and returns the
/// gradient with respect to its input. `grad_pre` is taken with respect to
/// the pre-activation.
fn dense_backward(
    x: &[f64],
    weights: &[f64],
    grad_pre: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let n_in = x.len();
    let mut grad_in = if want_input { vec![0.0; n_in] } else { Vec::new() };
    for (o, &g) in grad_pre.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad_b[o] += g;
        let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
        for (gwi, xi) in gw.iter_mut().zip(x) {
            *gwi += g * xi;
        }
        if want_input {
            let row = &weights[o * n_in..(o + 1) * n_in];
            for (gi, wi) in grad_in.iter_mut().zip(row) {
                *gi += g * wi;
            }
        }
    }
    grad_in
}

fn run(params: &NetworkParams, grid: &InputGrid, mode: Mode<'_>) -> Result<Activations> {
    let cfg = &params.config;
    let (h, w) = cfg.input_shape();
    if grid.rows != h || grid.cols != w || grid.data.len() != h * w {
        return Err(Error::DimensionMismatch(format!(
            "network expects a {h}x{w} grid, got {}x{}",
            grid.rows, grid.cols
        )));
    }
    let lay = params.layout();
    let p = &params.values;
    let f = cfg.filters;
    let [d1, d2] = cfg.dense;
    let out_len = cfg.output_len();

    // center so the maximally mixed input maps to zero
    let shift = 0.5f64.powi(cfg.num_qubits as i32);
    let scale = 2f64.powi(cfg.num_qubits as i32);
    let input: Vec<f64> = grid.data.iter().map(|x| (x - shift) * scale).collect();

    let conv1 = conv_forward(&input, 1, (h, w), &p[lay.conv1_w..lay.conv1_b], &p[lay.conv1_b..lay.conv1_b + f]);
    let (pooled, argmax) = pool_forward(&conv1, f, cfg.conv1_shape());
    let conv2 = conv_forward(
        &pooled,
        f,
        cfg.pool_shape(),
        &p[lay.conv2_w..lay.conv2_b],
        &p[lay.conv2_b..lay.conv2_b + f],
    );
    let dense1 = dense_forward(&conv2, &p[lay.dense1_w..lay.dense1_b], &p[lay.dense1_b..lay.dense1_b + d1], true);
    let dense2 = dense_forward(&dense1, &p[lay.dense2_w..lay.dense2_b], &p[lay.dense2_b..lay.dense2_b + d2], true);
    let dropped = match mode {
        Mode::Infer => dense2.clone(),
        Mode::Train(mask) => {
            if mask.0.len() != d2 {
                return Err(Error::DimensionMismatch(format!(
                    "dropout mask has {} entries, layer has {d2}",
                    mask.0.len()
                )));
            }
            dense2.iter().zip(&mask.0).map(|(a, m)| a * m).collect()
        }
    };
    let output = dense_forward(&dropped, &p[lay.out_w..lay.out_b], &p[lay.out_b..lay.out_b + out_len], false);
    Ok(Activations { input, conv1, pooled, argmax, conv2, dense1, dense2, dropped, output })
}

/// Network output (a raw τ-vector) for one grid.
pub fn forward(params: &NetworkParams, grid: &InputGrid, mode: Mode<'_>) -> Result<Vec<f64>> {
    Ok(run(params, grid, mode)?.output)
}

/// Mean squared difference over components.
pub fn loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "loss between vectors of length {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// Mean batch loss with fixed per-example dropout masks.
pub fn batch_loss(params: &NetworkParams, batch: &[&Sample], masks: &[DropoutMask]) -> Result<f64> {
    check_batch(batch, masks)?;
    let mut total = 0.0;
    for (s, mask) in batch.iter().zip(masks) {
        total += loss(&forward(params, &s.grid, Mode::Train(mask))?, &s.target)?;
    }
    Ok(total / batch.len() as f64)
}

fn check_batch(batch: &[&Sample], masks: &[DropoutMask]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if batch.len() != masks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} examples but {} dropout masks",
            batch.len(),
            masks.len()
        )));
    }
    Ok(())
}

/// Analytic gradient of the mean batch loss. Returns (loss, gradient).
pub fn gradients(params: &NetworkParams, batch: &[&Sample], masks: &[DropoutMask]) -> Result<(f64, Vec<f64>)> {
    check_batch(batch, masks)?;
    let mut grad = vec![0.0; params.values.len()];
    let mut total = 0.0;
    for (s, mask) in batch.iter().zip(masks) {
        total += accumulate_example(params, s, mask, batch.len(), &mut grad)?;
    }
    Ok((total / batch.len() as f64, grad))
}

fn accumulate_example(
    params: &NetworkParams,
    sample: &Sample,
    mask: &DropoutMask,
    batch_len: usize,
    grad: &mut [f64],
) -> Result<f64> {
    let cfg = &params.config;
    let lay = params.layout();
    let p = &params.values;
    let act = run(params, &sample.grid, Mode::Train(mask))?;
    let example_loss = loss(&act.output, &sample.target)?;
    let out_len = act.output.len();
    let norm = 2.0 / (out_len * batch_len) as f64;
    let grad_out: Vec<f64> = act.output.iter().zip(&sample.target).map(|(y, t)| norm * (y - t)).collect();

    let (head, tail) = grad.split_at_mut(lay.out_b);
    let g_dropped = dense_backward(&act.dropped, &p[lay.out_w..lay.out_b], &grad_out, &mut head[lay.out_w..], &mut tail[..out_len], true);

    // dropout then ReLU of dense2
    let g_dense2: Vec<f64> = g_dropped
        .iter()
        .zip(&mask.0)
        .zip(&act.dense2)
        .map(|((g, m), a)| if *a > 0.0 { g * m } else { 0.0 })
        .collect();
    let (head, tail) = grad.split_at_mut(lay.dense2_b);
    let g_dense1 = dense_backward(&act.dense1, &p[lay.dense2_w..lay.dense2_b], &g_dense2, &mut head[lay.dense2_w..], &mut tail[..g_dense2.len()], true);

    let g_dense1: Vec<f64> = g_dense1.iter().zip(&act.dense1).map(|(g, a)| if *a > 0.0 { *g } else { 0.0 }).collect();
    let (head, tail) = grad.split_at_mut(lay.dense1_b);
    let g_conv2 = dense_backward(&act.conv2, &p[lay.dense1_w..lay.dense1_b], &g_dense1, &mut head[lay.dense1_w..], &mut tail[..g_dense1.len()], true);

    let f = cfg.filters;
    let mut g_pooled = vec![0.0; act.pooled.len()];
    let (head, tail) = grad.split_at_mut(lay.conv2_b);
    conv_backward(
        &act.pooled,
        f,
        cfg.pool_shape(),
        &p[lay.conv2_w..lay.conv2_b],
        &act.conv2,
        &g_conv2,
        &mut head[lay.conv2_w..],
        &mut tail[..f],
        Some(&mut g_pooled),
    );

    let mut g_conv1 = vec![0.0; act.conv1.len()];
    for (g, &src) in g_pooled.iter().zip(&act.argmax) {
        g_conv1[src] += g;
    }
    let (head, tail) = grad.split_at_mut(lay.conv1_b);
    conv_backward(
        &act.input,
        1,
        cfg.input_shape(),
        &p[lay.conv1_w..lay.conv1_b],
        &act.conv1,
        &g_conv1,
        &mut head[lay.conv1_w..],
        &mut tail[..f],
        None,
    );
    Ok(example_loss)
}
