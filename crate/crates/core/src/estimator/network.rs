use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EstimatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    /// Square kernel, zero padding `kernel / 2`.
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    },
    /// Non-overlapping max pooling; trailing rows/columns are dropped.
    Pool { size: usize },
    Dense {
        in_features: usize,
        out_features: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            LayerSpec::Pool { .. } => 0,
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => out_features * in_features + out_features,
        }
    }

    fn output_shape(&self, input: InputShape) -> Result<InputShape, EstimatorError> {
        let mismatch = |what: &str| EstimatorError::InvalidSpec(format!("{what} in {self:?} for input {input:?}"));
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if in_channels != input.channels {
                    return Err(mismatch("channel mismatch"));
                }
                if kernel == 0 || stride == 0 || out_channels == 0 {
                    return Err(mismatch("zero-sized conv"));
                }
                let pad = kernel / 2;
                let out = |n: usize| (n + 2 * pad).checked_sub(kernel).map(|m| m / stride + 1);
                match (out(input.height), out(input.width)) {
                    (Some(h), Some(w)) if h > 0 && w > 0 => Ok(InputShape {
                        channels: out_channels,
                        height: h,
                        width: w,
                    }),
                    _ => Err(mismatch("kernel larger than input")),
                }
            }
            LayerSpec::Pool { size } => {
                if size == 0 || input.height < size || input.width < size {
                    return Err(mismatch("pool larger than input"));
                }
                Ok(InputShape {
                    channels: input.channels,
                    height: input.height / size,
                    width: input.width / size,
                })
            }
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => {
                if in_features != input.len() || out_features == 0 {
                    return Err(mismatch("feature mismatch"));
                }
                Ok(InputShape {
                    channels: out_features,
                    height: 1,
                    width: 1,
                })
            }
        }
    }
}

/// Layer stack of a scalar regressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl RegressorSpec {
    /// Four conv3x3 + ReLU + pool2 blocks (8, 16, 32, 32 channels) followed
    /// by one dense layer to a scalar.
    pub fn compact(width: usize, height: usize) -> Self {
        let channels = [3, 8, 16, 32, 32];
        let mut layers = Vec::new();
        let (mut h, mut w) = (height, width);
        for pair in channels.windows(2) {
            layers.push(LayerSpec::Conv {
                in_channels: pair[0],
                out_channels: pair[1],
                kernel: 3,
                stride: 1,
                activation: Activation::Relu,
            });
            layers.push(LayerSpec::Pool { size: 2 });
            h /= 2;
            w /= 2;
        }
        layers.push(LayerSpec::Dense {
            in_features: channels[4] * h * w,
            out_features: 1,
            activation: Activation::None,
        });
        Self {
            input: InputShape {
                channels: 3,
                height,
                width,
            },
            layers,
        }
    }

    /// Per-layer output shapes; errors unless the chain is consistent and
    /// ends in a single scalar.
    pub fn shapes(&self) -> Result<Vec<InputShape>, EstimatorError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for layer in &self.layers {
            cur = layer.output_shape(cur)?;
            shapes.push(cur);
        }
        if cur.len() != 1 {
            return Err(EstimatorError::InvalidSpec(format!(
                "network output has {} values, expected 1",
                cur.len()
            )));
        }
        Ok(shapes)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }
}

/// Weights of a [`RegressorSpec`] stored as one flat vector; each weighted
/// layer holds its weights followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: RegressorSpec,
    shapes: Vec<InputShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate values kept by [`Network::forward_cached`] for backprop.
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<f64>>,
    /// Argmax input index per pool output, per pool layer.
    pool_idx: Vec<Vec<usize>>,
    /// Patch matrix per layer; empty for non-conv layers.
    cols: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("non-empty network")[0]
    }
}

/// Conv weights ~ N(0, sqrt(2 / (c k^2))) with c the layer's output channel
/// count; dense weights ~ N(0, sqrt(2 / fan_in)); biases zero.
pub fn init_weights(spec: &RegressorSpec, seed: u64) -> Result<Network, EstimatorError> {
    let mut net = Network::zeros(spec.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, layer) in spec.layers.iter().enumerate() {
        let (n_weights, std) = match *layer {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (
                out_channels * in_channels * kernel * kernel,
                (2.0 / (out_channels * kernel * kernel) as f64).sqrt(),
            ),
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => (out_features * in_features, (2.0 / in_features as f64).sqrt()),
            LayerSpec::Pool { .. } => continue,
        };
        let normal = Normal::new(0.0, std).expect("finite std");
        let start = net.offsets[i];
        for w in &mut net.params[start..start + n_weights] {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(net)
}

impl Network {
    pub fn zeros(spec: RegressorSpec) -> Result<Self, EstimatorError> {
        let shapes = spec.shapes()?;
        let mut offsets = Vec::with_capacity(spec.layers.len());
        let mut total = 0;
        for layer in &spec.layers {
            offsets.push(total);
            total += layer.param_count();
        }
        Ok(Self {
            spec,
            shapes,
            offsets,
            params: vec![0.0; total],
        })
    }

    pub fn from_params(spec: RegressorSpec, params: Vec<f64>) -> Result<Self, EstimatorError> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(EstimatorError::ShapeMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Slice of weights (without biases) of layer `index`.
    pub fn layer_weights(&self, index: usize) -> &[f64] {
        let n = match self.spec.layers[index] {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel,
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => out_features * in_features,
            LayerSpec::Pool { .. } => 0,
        };
        &self.params[self.offsets[index]..self.offsets[index] + n]
    }

    pub fn layer_biases(&self, index: usize) -> &[f64] {
        let start = self.offsets[index] + self.layer_weights(index).len();
        let end = self.offsets.get(index + 1).copied().unwrap_or(self.params.len());
        &self.params[start..end]
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64, EstimatorError> {
        Ok(self.forward_cached(input)?.output())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, EstimatorError> {
        if input.len() != self.spec.input.len() {
            return Err(EstimatorError::ShapeMismatch {
                expected: self.spec.input.len(),
                got: input.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut pool_idx = Vec::new();
        let mut all_cols = Vec::with_capacity(self.spec.layers.len());
        acts.push(input.to_vec());
        let mut in_shape = self.spec.input;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let out_shape = self.shapes[i];
            let x = acts.last().expect("input pushed");
            let p = &self.params[self.offsets[i]..self.offsets[i] + layer.param_count()];
            let y = match *layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    activation,
                    ..
                } => {
                    let cols = im2col(x, in_shape, out_shape, kernel, stride);
                    let mut y = conv_forward(&cols, out_shape, p, in_shape.channels * kernel * kernel);
                    activate(&mut y, activation);
                    all_cols.push(cols);
                    y
                }
                LayerSpec::Pool { size } => {
                    let (y, idx) = pool_forward(x, in_shape, out_shape, size);
                    pool_idx.push(idx);
                    all_cols.push(Vec::new());
                    y
                }
                LayerSpec::Dense {
                    in_features,
                    out_features,
                    activation,
                } => {
                    let (w, b) = p.split_at(in_features * out_features);
                    let mut y: Vec<f64> = (0..out_features)
                        .map(|j| b[j] + dot(&w[j * in_features..(j + 1) * in_features], x))
                        .collect();
                    activate(&mut y, activation);
                    all_cols.push(Vec::new());
                    y
                }
            };
            acts.push(y);
            in_shape = out_shape;
        }
        Ok(ForwardCache {
            acts,
            pool_idx,
            cols: all_cols,
        })
    }

    /// Accumulates `d_out * d(output)/d(params)` into `grad`.
    pub fn backward(&self, cache: &ForwardCache, d_out: f64, grad: &mut [f64]) {
        let n_layers = self.spec.layers.len();
        let mut delta = vec![d_out];
        let mut pool_k = cache.pool_idx.len();
        for i in (0..n_layers).rev() {
            let layer = self.spec.layers[i];
            let in_shape = if i == 0 { self.spec.input } else { self.shapes[i - 1] };
            let out_shape = self.shapes[i];
            let x = &cache.acts[i];
            let y = &cache.acts[i + 1];
            let range = self.offsets[i]..self.offsets[i] + layer.param_count();
            let p = &self.params[range.clone()];
            let g = &mut grad[range];
            let need_input_grad = i > 0;
            delta = match layer {
                LayerSpec::Conv {
                    kernel,
                    stride,
                    activation,
                    ..
                } => {
                    activation_backward(&mut delta, y, activation);
                    conv_backward(
                        &cache.cols[i],
                        &delta,
                        in_shape,
                        out_shape,
                        p,
                        g,
                        kernel,
                        stride,
                        need_input_grad,
                    )
                }
                LayerSpec::Pool { .. } => {
                    pool_k -= 1;
                    let mut dx = vec![0.0; in_shape.len()];
                    for (o, src) in cache.pool_idx[pool_k].iter().enumerate() {
                        dx[*src] += delta[o];
                    }
                    dx
                }
                LayerSpec::Dense {
                    in_features,
                    out_features,
                    activation,
                } => {
                    activation_backward(&mut delta, y, activation);
                    let (w, _) = p.split_at(in_features * out_features);
                    let (gw, gb) = g.split_at_mut(in_features * out_features);
                    let mut dx = vec![0.0; in_features];
                    for j in 0..out_features {
                        let d = delta[j];
                        gb[j] += d;
                        let row = j * in_features;
                        for k in 0..in_features {
                            gw[row + k] += d * x[k];
                            dx[k] += d * w[row + k];
                        }
                    }
                    dx
                }
            };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn activate(y: &mut [f64], activation: Activation) {
    if activation == Activation::Relu {
        for v in y.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

fn activation_backward(delta: &mut [f64], y: &[f64], activation: Activation) {
    if activation == Activation::Relu {
        for (d, v) in delta.iter_mut().zip(y) {
            if *v <= 0.0 {
                *d = 0.0;
            }
        }
    }
}

/// Output columns `ox` whose input column `ox * stride + k - pad` lies in
/// `[0, n)`.
fn valid_range(n: usize, out_n: usize, k: usize, pad: usize, stride: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k).div_ceil(stride);
    // largest ox with ox * stride + k - pad <= n - 1
    let hi = if n + pad < k + 1 {
        0
    } else {
        ((n - 1 + pad - k) / stride + 1).min(out_n)
    };
    (lo.min(hi), hi)
}

/// Unrolls `x` into a `(c k k) x (oh ow)` row-major patch matrix; padded
/// taps stay zero.
fn im2col(x: &[f64], is: InputShape, os: InputShape, k: usize, s: usize) -> Vec<f64> {
    let pad = k / 2;
    let p = os.height * os.width;
    let mut cols = vec![0.0; is.channels * k * k * p];
    for ic in 0..is.channels {
        let inp = &x[ic * is.height * is.width..(ic + 1) * is.height * is.width];
        for ky in 0..k {
            let (oy0, oy1) = valid_range(is.height, os.height, ky, pad, s);
            for kx in 0..k {
                let (ox0, ox1) = valid_range(is.width, os.width, kx, pad, s);
                let row = &mut cols[((ic * k + ky) * k + kx) * p..][..p];
                for oy in oy0..oy1 {
                    let in_row = &inp[(oy * s + ky - pad) * is.width..][..is.width];
                    let out_row = &mut row[oy * os.width..(oy + 1) * os.width];
                    for ox in ox0..ox1 {
                        out_row[ox] = in_row[ox * s + kx - pad];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
fn col2im(cols: &[f64], is: InputShape, os: InputShape, k: usize, s: usize) -> Vec<f64> {
    let pad = k / 2;
    let p = os.height * os.width;
    let mut dx = vec![0.0; is.len()];
    for ic in 0..is.channels {
        let plane = &mut dx[ic * is.height * is.width..(ic + 1) * is.height * is.width];
        for ky in 0..k {
            let (oy0, oy1) = valid_range(is.height, os.height, ky, pad, s);
            for kx in 0..k {
                let (ox0, ox1) = valid_range(is.width, os.width, kx, pad, s);
                let row = &cols[((ic * k + ky) * k + kx) * p..][..p];
                for oy in oy0..oy1 {
                    let in_row = &mut plane[(oy * s + ky - pad) * is.width..][..is.width];
                    let src = &row[oy * os.width..(oy + 1) * os.width];
                    for ox in ox0..ox1 {
                        in_row[ox * s + kx - pad] += src[ox];
                    }
                }
            }
        }
    }
    dx
}

/// `c = a b + beta c` for row-major `a: m x k`, `b: k x n`, with optional
/// transposition of either operand.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // row-major buffers whose lengths are checked by the callers' shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn conv_forward(cols: &[f64], os: InputShape, p: &[f64], patch: usize) -> Vec<f64> {
    let (w, b) = p.split_at(os.channels * patch);
    let plane = os.height * os.width;
    let mut y = vec![0.0; os.len()];
    for (oc, out) in y.chunks_exact_mut(plane).enumerate() {
        out.fill(b[oc]);
    }
    gemm(os.channels, patch, plane, w, false, cols, false, 1.0, &mut y);
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    cols: &[f64],
    dy: &[f64],
    is: InputShape,
    os: InputShape,
    p: &[f64],
    g: &mut [f64],
    k: usize,
    s: usize,
    need_input_grad: bool,
) -> Vec<f64> {
    let patch = is.channels * k * k;
    let plane = os.height * os.width;
    let (w, _) = p.split_at(os.channels * patch);
    let (gw, gb) = g.split_at_mut(os.channels * patch);
    for (oc, d) in dy.chunks_exact(plane).enumerate() {
        gb[oc] += d.iter().sum::<f64>();
    }
    gemm(os.channels, plane, patch, dy, false, cols, true, 1.0, gw);
    if !need_input_grad {
        return Vec::new();
    }
    let mut dcols = vec![0.0; patch * plane];
    gemm(patch, os.channels, plane, w, true, dy, false, 0.0, &mut dcols);
    col2im(&dcols, is, os, k, s)
}

fn pool_forward(x: &[f64], is: InputShape, os: InputShape, size: usize) -> (Vec<f64>, Vec<usize>) {
    let mut y = vec![0.0; os.len()];
    let mut idx = vec![0usize; os.len()];
    for c in 0..os.channels {
        for oy in 0..os.height {
            for ox in 0..os.width {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = (c * is.height + oy * size + dy) * is.width + ox * size + dx;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * os.height + oy) * os.width + ox;
                y[o] = best;
                idx[o] = best_i;
            }
        }
    }
    (y, idx)
}
