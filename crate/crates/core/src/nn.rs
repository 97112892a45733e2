//! Small multi-output feed-forward regressor with hand-written backprop.
//!
//! Parameters are stored flat: every layer's weight matrix (row-major, one row
//! per output unit) in layer order, followed by every layer's bias vector.
//! Gradients use the same layout, and so does the on-disk format.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Error, Result};
use crate::math;
use crate::rng::{self, Domain};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => math::sigmoid(x),
            Activation::Tanh => math::tanh(x),
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    w_off: Vec<usize>,
    b_off: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> (Vec<usize>, Vec<usize>, usize) {
    let layers = sizes.len() - 1;
    let mut w_off = Vec::with_capacity(layers);
    let mut pos = 0;
    for l in 0..layers {
        w_off.push(pos);
        pos += sizes[l] * sizes[l + 1];
    }
    let mut b_off = Vec::with_capacity(layers);
    for l in 0..layers {
        b_off.push(pos);
        pos += sizes[l + 1];
    }
    (w_off, b_off, pos)
}

impl Network {
    /// All-zero network with the given layer widths.
    pub fn zeros(sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        ensure!(
            sizes.len() >= 2,
            "a network needs at least an input and an output layer"
        );
        ensure!(
            sizes.iter().all(|&s| s >= 1),
            "layer widths must be >= 1: {sizes:?}"
        );
        let (w_off, b_off, total) = offsets(&sizes);
        Ok(Network {
            sizes,
            activation,
            params: vec![0.0; total],
            w_off,
            b_off,
        })
    }

    /// Gaussian weights with standard deviation `scale / sqrt(fan_in)`, zero biases.
    pub fn init(sizes: Vec<usize>, activation: Activation, scale: f64, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        let mut rng = rng::stream(seed, Domain::NetworkInit, 0);
        for l in 0..net.layers() {
            let sd = scale / math::sqrt(net.sizes[l] as f64);
            let (start, len) = (net.w_off[l], net.sizes[l] * net.sizes[l + 1]);
            for w in &mut net.params[start..start + len] {
                let z: f64 = rng.sample(StandardNormal);
                *w = sd * z;
            }
        }
        Ok(net)
    }

    pub fn from_params(
        sizes: Vec<usize>,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        ensure!(
            params.len() == net.params.len(),
            "expected {} parameters for {:?}, got {}",
            net.params.len(),
            net.sizes,
            params.len()
        );
        ensure!(
            params.iter().all(|p| p.is_finite()),
            "network parameters must be finite"
        );
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }
    pub fn n_outputs(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }
    /// Number of weight layers.
    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.params[self.w_off[l]..self.w_off[l] + self.sizes[l] * self.sizes[l + 1]]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.params[self.b_off[l]..self.b_off[l] + self.sizes[l + 1]]
    }

    /// Scratch buffers sized for this network.
    pub fn workspace(&self) -> Workspace {
        let max = *self.sizes.iter().max().unwrap_or(&1);
        Workspace {
            acts: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            delta: vec![0.0; max],
            delta_prev: vec![0.0; max],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            input.len() == self.n_inputs(),
            "input width {} does not match network input {}",
            input.len(),
            self.n_inputs()
        );
        let mut ws = self.workspace();
        let mut out = vec![0.0; self.n_outputs()];
        self.forward_with(input, &mut ws, &mut out);
        Ok(out)
    }

    /// Unchecked forward pass; leaves every layer's activations in `ws`.
    #[inline]
    pub fn forward_with(&self, input: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        ws.acts[0].copy_from_slice(input);
        let last = self.layers() - 1;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[self.w_off[l]..self.w_off[l] + n_in * n_out];
            let b = &self.params[self.b_off[l]..self.b_off[l] + n_out];
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            let a_in = &lo[l];
            let a_out = &mut hi[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = b[o];
                for i in 0..n_in {
                    z += row[i] * a_in[i];
                }
                a_out[o] = if l == last {
                    z
                } else {
                    self.activation.apply(z)
                };
            }
        }
        out.copy_from_slice(&ws.acts[self.layers()]);
    }

    /// Adds `d loss / d params` for one sample to `grad`, where the sample's
    /// loss contribution is `scale * sum_k w_k (y_k - t_k)^2`. Returns the
    /// unscaled weighted squared error.
    fn accumulate(
        &self,
        x: &[f64],
        t: &[f64],
        w: Option<&[f64]>,
        scale: f64,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        let layers = self.layers();
        let k = self.n_outputs();
        ws.acts[0].copy_from_slice(x);
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let wm = &self.params[self.w_off[l]..self.w_off[l] + n_in * n_out];
            let b = &self.params[self.b_off[l]..self.b_off[l] + n_out];
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            for o in 0..n_out {
                let row = &wm[o * n_in..(o + 1) * n_in];
                let mut z = b[o];
                for i in 0..n_in {
                    z += row[i] * lo[l][i];
                }
                hi[0][o] = if l == layers - 1 {
                    z
                } else {
                    self.activation.apply(z)
                };
            }
        }
        let y = &ws.acts[layers];
        let mut sq = 0.0;
        for o in 0..k {
            let wk = w.map_or(1.0, |w| w[o]);
            let r = y[o] - t[o];
            sq += wk * r * r;
            ws.delta[o] = 2.0 * scale * wk * r;
        }
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a_in = &ws.acts[l];
            let (w_off, b_off) = (self.w_off[l], self.b_off[l]);
            for o in 0..n_out {
                let d = ws.delta[o];
                grad[b_off + o] += d;
                let g = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for i in 0..n_in {
                    g[i] += d * a_in[i];
                }
            }
            if l > 0 {
                let wm = &self.params[w_off..w_off + n_in * n_out];
                for i in 0..n_in {
                    let mut s = 0.0;
                    for o in 0..n_out {
                        s += wm[o * n_in + i] * ws.delta[o];
                    }
                    ws.delta_prev[i] = s * self.activation.slope(a_in[i]);
                }
                core::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
        sq
    }
}

/// Per-thread scratch for forward and backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

/// Regression samples stored row-major, with optional per-entry weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    weights: Option<Vec<f64>>,
    n_in: usize,
    n_out: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, n_in: usize, n_out: usize) -> Result<Self> {
        ensure!(
            n_in >= 1 && n_out >= 1,
            "input and output widths must be >= 1"
        );
        ensure!(
            inputs.len() % n_in == 0,
            "input buffer is not a multiple of width {n_in}"
        );
        ensure!(
            targets.len() % n_out == 0,
            "target buffer is not a multiple of width {n_out}"
        );
        ensure!(
            inputs.len() / n_in == targets.len() / n_out,
            "{} input rows but {} target rows",
            inputs.len() / n_in,
            targets.len() / n_out
        );
        ensure!(!inputs.is_empty(), "empty batch");
        Ok(Dataset {
            inputs,
            targets,
            weights: None,
            n_in,
            n_out,
        })
    }

    /// Per-(sample, output) weights, laid out like the targets.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        ensure!(
            weights.len() == self.targets.len(),
            "weight buffer must match the target buffer"
        );
        ensure!(
            weights.iter().all(|w| w.is_finite() && *w >= 0.0),
            "weights must be finite and >= 0"
        );
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.n_in
    }
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
    pub fn n_in(&self) -> usize {
        self.n_in
    }
    pub fn n_out(&self) -> usize {
        self.n_out
    }
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    fn row(&self, j: usize) -> (&[f64], &[f64], Option<&[f64]>) {
        let (a, b) = (j * self.n_in, j * self.n_out);
        (
            &self.inputs[a..a + self.n_in],
            &self.targets[b..b + self.n_out],
            self.weights.as_ref().map(|w| &w[b..b + self.n_out]),
        )
    }
}

fn check_shapes(net: &Network, data: &Dataset) -> Result<()> {
    ensure!(
        net.n_inputs() == data.n_in && net.n_outputs() == data.n_out,
        "network {:?} does not fit data of widths ({}, {})",
        net.sizes,
        data.n_in,
        data.n_out
    );
    Ok(())
}

/// Mean over samples of the squared error summed over outputs.
pub fn loss(net: &Network, data: &Dataset) -> Result<f64> {
    check_shapes(net, data)?;
    Ok(full_loss(net, data, &mut net.workspace()))
}

fn full_loss(net: &Network, data: &Dataset, ws: &mut Workspace) -> f64 {
    let mut out = vec![0.0; data.n_out];
    let mut total = 0.0;
    for j in 0..data.len() {
        let (x, t, w) = data.row(j);
        net.forward_with(x, ws, &mut out);
        for o in 0..data.n_out {
            let r = out[o] - t[o];
            total += w.map_or(1.0, |w| w[o]) * r * r;
        }
    }
    total / data.len() as f64
}

/// Gradient of [`loss`] with respect to the flat parameter vector.
pub fn gradient(net: &Network, data: &Dataset) -> Result<Vec<f64>> {
    check_shapes(net, data)?;
    let mut grad = vec![0.0; net.params.len()];
    let mut ws = net.workspace();
    let scale = 1.0 / data.len() as f64;
    for j in 0..data.len() {
        let (x, t, w) = data.row(j);
        net.accumulate(x, t, w, scale, &mut ws, &mut grad);
    }
    Ok(grad)
}

/// Hyperparameters of the fit. Training is mini-batch Adam with a per-epoch
/// geometric learning-rate decay; the best full-batch parameters seen are
/// returned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Relative loss decrease that counts as progress.
    pub tolerance: f64,
    /// Epochs without progress before stopping.
    pub patience: usize,
    pub init_scale: f64,
    pub normalize_inputs: bool,
    pub normalize_targets: bool,
    /// After the gradient phase, solve the linear output layer exactly by
    /// weighted least squares on the final hidden features.
    pub refit_output: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![10, 10],
            activation: Activation::Sigmoid,
            learning_rate: 0.01,
            lr_decay: 0.98,
            max_epochs: 200,
            batch_size: 64,
            tolerance: 1e-5,
            patience: 15,
            init_scale: 1.0,
            normalize_inputs: true,
            normalize_targets: true,
            refit_output: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be > 0"
        );
        ensure!(
            self.lr_decay > 0.0 && self.lr_decay <= 1.0,
            "lr_decay must lie in (0, 1]"
        );
        ensure!(self.max_epochs >= 1, "max_epochs must be >= 1");
        ensure!(self.batch_size >= 1, "batch_size must be >= 1");
        ensure!(self.tolerance >= 0.0, "tolerance must be >= 0");
        ensure!(self.patience >= 1, "patience must be >= 1");
        ensure!(self.init_scale > 0.0, "init_scale must be > 0");
        ensure!(
            self.hidden.iter().all(|&h| h >= 1),
            "hidden widths must be >= 1"
        );
        Ok(())
    }

    /// `[n_in, hidden..., n_out]`.
    pub fn layer_sizes(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(n_out);
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: Network,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Fit `net` to `data`. The returned loss never exceeds the initial one.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    check_shapes(net, data)?;
    cfg.validate()?;
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    let mut work = net.clone();
    let mut ws = work.workspace();
    let n_params = work.params.len();
    let (mut m, mut v, mut grad) = (
        vec![0.0; n_params],
        vec![0.0; n_params],
        vec![0.0; n_params],
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::stream(cfg.seed, Domain::Shuffle, 0);

    let initial_loss = full_loss(&work, data, &mut ws);
    if !initial_loss.is_finite() {
        return Err(Error::Training {
            date: None,
            epoch: 0,
            loss: initial_loss,
        });
    }
    let mut best = initial_loss;
    let mut best_params = work.params.clone();
    let mut stall = 0;
    let mut lr = cfg.learning_rate;
    let mut step = 0i32;
    let mut epochs = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &j in batch {
                let (x, t, w) = data.row(j);
                work.accumulate(x, t, w, scale, &mut ws, &mut grad);
            }
            step += 1;
            let bc1 = 1.0 - libm::pow(BETA1, step as f64);
            let bc2 = 1.0 - libm::pow(BETA2, step as f64);
            for p in 0..n_params {
                m[p] = BETA1 * m[p] + (1.0 - BETA1) * grad[p];
                v[p] = BETA2 * v[p] + (1.0 - BETA2) * grad[p] * grad[p];
                work.params[p] -= lr * (m[p] / bc1) / (math::sqrt(v[p] / bc2) + EPS);
            }
        }
        let l = full_loss(&work, data, &mut ws);
        if !l.is_finite() {
            return Err(Error::Training {
                date: None,
                epoch,
                loss: l,
            });
        }
        if l < best {
            if l < best * (1.0 - cfg.tolerance) {
                stall = 0;
            } else {
                stall += 1;
            }
            best = l;
            best_params.copy_from_slice(&work.params);
        } else {
            stall += 1;
        }
        if stall >= cfg.patience {
            break;
        }
        lr *= cfg.lr_decay;
    }
    work.params = best_params;
    if cfg.refit_output {
        let before = work.params.clone();
        refit_output_layer(&mut work, data, &mut ws);
        let l = full_loss(&work, data, &mut ws);
        if l.is_finite() && l < best {
            best = l;
        } else {
            work.params = before;
        }
    }
    Ok(TrainOutcome {
        network: work,
        initial_loss,
        final_loss: best,
        epochs,
    })
}

/// Replace the output layer of `net` by the weighted least-squares solution
/// on the last hidden layer's activations (plus a constant), one output at
/// a time. Outputs whose normal equations are singular keep their weights.
fn refit_output_layer(net: &mut Network, data: &Dataset, ws: &mut Workspace) {
    let l = net.layers() - 1;
    let (h, k) = (net.sizes[l], net.sizes[l + 1]);
    let m = h + 1;
    let shared = data.weights.is_none();
    let mut gram = vec![0.0; if shared { m * m } else { k * m * m }];
    let mut rhs = vec![0.0; k * m];
    let mut out = vec![0.0; k];
    let mut phi = vec![0.0; m];
    for j in 0..data.len() {
        let (x, t, w) = data.row(j);
        net.forward_with(x, ws, &mut out);
        phi[..h].copy_from_slice(&ws.acts[l]);
        phi[h] = 1.0;
        for o in 0..k {
            let wo = w.map_or(1.0, |w| w[o]);
            if wo == 0.0 {
                continue;
            }
            if !shared || o == 0 {
                let g = if shared {
                    &mut gram[..]
                } else {
                    &mut gram[o * m * m..(o + 1) * m * m]
                };
                for a in 0..m {
                    let pa = wo * phi[a];
                    for b in 0..=a {
                        g[a * m + b] += pa * phi[b];
                    }
                }
            }
            for a in 0..m {
                rhs[o * m + a] += wo * phi[a] * t[o];
            }
        }
    }
    let (w_off, b_off) = (net.w_off[l], net.b_off[l]);
    for o in 0..k {
        let mut g = if shared {
            gram.clone()
        } else {
            gram[o * m * m..(o + 1) * m * m].to_vec()
        };
        for a in 0..m {
            for b in 0..a {
                g[b * m + a] = g[a * m + b];
            }
        }
        let mut beta = rhs[o * m..(o + 1) * m].to_vec();
        if solve_spd(&mut g, &mut beta, m) {
            net.params[w_off + o * h..w_off + (o + 1) * h].copy_from_slice(&beta[..h]);
            net.params[b_off + o] = beta[h];
        }
    }
}

/// Solve `a x = b` for symmetric positive definite `a` (row-major `m x m`)
/// by Cholesky with a relative ridge of 1e-12 on the diagonal. `b` is
/// overwritten with `x`. Returns false if the factorisation breaks down.
fn solve_spd(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    let trace: f64 = (0..m).map(|i| a[i * m + i]).sum();
    if !(trace > 0.0 && trace.is_finite()) {
        return false;
    }
    let ridge = 1e-12 * trace / m as f64;
    for i in 0..m {
        a[i * m + i] += ridge;
    }
    for j in 0..m {
        let mut d = a[j * m + j];
        for p in 0..j {
            d -= a[j * m + p] * a[j * m + p];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = math::sqrt(d);
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for p in 0..j {
                s -= a[i * m + p] * a[j * m + p];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * m + p] * b[p];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for p in i + 1..m {
            s -= a[p * m + i] * b[p];
        }
        b[i] = s / a[i * m + i];
    }
    b.iter().all(|x| x.is_finite())
}

/// A network wrapped in the affine input and output maps it was trained
/// with: `y = out_shift + out_scale * net((x - in_shift) / in_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolator {
    net: Network,
    in_shift: Vec<f64>,
    in_scale: Vec<f64>,
    out_shift: Vec<f64>,
    out_scale: Vec<f64>,
}

/// Scratch for [`Interpolator::evaluate_with`].
#[derive(Debug, Clone)]
pub struct EvalScratch {
    ws: Workspace,
    x: Vec<f64>,
}

impl Interpolator {
    pub fn new(
        net: Network,
        in_shift: Vec<f64>,
        in_scale: Vec<f64>,
        out_shift: Vec<f64>,
        out_scale: Vec<f64>,
    ) -> Result<Self> {
        ensure!(
            in_shift.len() == net.n_inputs() && in_scale.len() == net.n_inputs(),
            "input scaling does not match the network input width"
        );
        ensure!(
            out_shift.len() == net.n_outputs() && out_scale.len() == net.n_outputs(),
            "output scaling does not match the network output width"
        );
        ensure!(
            in_scale.iter().all(|s| s.is_finite() && *s != 0.0)
                && in_shift
                    .iter()
                    .chain(&out_shift)
                    .chain(&out_scale)
                    .all(|s| s.is_finite()),
            "scaling coefficients must be finite with nonzero input scales"
        );
        Ok(Interpolator {
            net,
            in_shift,
            in_scale,
            out_shift,
            out_scale,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }
    pub fn in_shift(&self) -> &[f64] {
        &self.in_shift
    }
    pub fn in_scale(&self) -> &[f64] {
        &self.in_scale
    }
    pub fn out_shift(&self) -> &[f64] {
        &self.out_shift
    }
    pub fn out_scale(&self) -> &[f64] {
        &self.out_scale
    }
    pub fn n_inputs(&self) -> usize {
        self.net.n_inputs()
    }
    pub fn n_outputs(&self) -> usize {
        self.net.n_outputs()
    }

    pub fn scratch(&self) -> EvalScratch {
        EvalScratch {
            ws: self.net.workspace(),
            x: vec![0.0; self.net.n_inputs()],
        }
    }

    pub fn evaluate(&self, state: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            state.len() == self.n_inputs(),
            "state width {} != {}",
            state.len(),
            self.n_inputs()
        );
        let mut out = vec![0.0; self.n_outputs()];
        self.evaluate_with(state, &mut self.scratch(), &mut out);
        Ok(out)
    }

    #[inline]
    pub fn evaluate_with(&self, state: &[f64], s: &mut EvalScratch, out: &mut [f64]) {
        for i in 0..state.len() {
            s.x[i] = (state[i] - self.in_shift[i]) / self.in_scale[i];
        }
        self.net.forward_with(&s.x, &mut s.ws, out);
        for k in 0..out.len() {
            out[k] = self.out_shift[k] + self.out_scale[k] * out[k];
        }
    }

    /// Fit raw (state, value) samples. Inputs are first divided by `spots`
    /// and, with `normalize_inputs`, standardised; targets are standardised
    /// per output with `normalize_targets`. `warm` seeds the weights.
    pub fn fit(
        data: &Dataset,
        spots: &[f64],
        warm: Option<&Network>,
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainOutcome)> {
        let (n_in, n_out) = (data.n_in, data.n_out);
        ensure!(spots.len() == n_in, "need one reference spot per input");
        let n = data.len();

        let mut in_shift = vec![0.0; n_in];
        let mut in_scale: Vec<f64> = spots.to_vec();
        if cfg.normalize_inputs {
            for i in 0..n_in {
                let col = (0..n).map(|j| data.inputs[j * n_in + i] / spots[i]);
                let (mean, sd) = mean_sd(col, n);
                in_shift[i] = mean * spots[i];
                in_scale[i] = if sd > 1e-12 { sd * spots[i] } else { spots[i] };
            }
        }
        let mut out_shift = vec![0.0; n_out];
        let mut out_scale = vec![1.0; n_out];
        // columns that are constant on the samples are reproduced exactly
        let mut constant = vec![false; n_out];
        if cfg.normalize_targets {
            for k in 0..n_out {
                let active: Vec<f64> = (0..n)
                    .filter(|&j| data.weights.as_ref().is_none_or(|w| w[j * n_out + k] > 0.0))
                    .map(|j| data.targets[j * n_out + k])
                    .collect();
                if active.is_empty() {
                    continue;
                }
                let (mean, sd) = mean_sd(active.iter().copied(), active.len());
                out_shift[k] = mean;
                if sd > 1e-12 * mean.abs().max(1.0) {
                    out_scale[k] = sd;
                } else {
                    constant[k] = true;
                }
            }
        }

        let inputs: Vec<f64> = data
            .inputs
            .iter()
            .enumerate()
            .map(|(idx, x)| (x - in_shift[idx % n_in]) / in_scale[idx % n_in])
            .collect();
        let targets: Vec<f64> = data
            .targets
            .iter()
            .enumerate()
            .map(|(idx, y)| (y - out_shift[idx % n_out]) / out_scale[idx % n_out])
            .collect();
        let mut scaled = Dataset::new(inputs, targets, n_in, n_out)?;
        if let Some(w) = &data.weights {
            scaled = scaled.with_weights(w.clone())?;
        }

        let sizes = cfg.layer_sizes(n_in, n_out);
        let start = match warm {
            Some(net) if net.sizes == sizes && net.activation == cfg.activation => net.clone(),
            _ => Network::init(sizes, cfg.activation, cfg.init_scale, cfg.seed)?,
        };
        let outcome = train(&start, &scaled, cfg)?;
        for k in 0..n_out {
            if constant[k] {
                out_scale[k] = 0.0;
            }
        }
        let interp = Interpolator::new(
            outcome.network.clone(),
            in_shift,
            in_scale,
            out_shift,
            out_scale,
        )?;
        Ok((interp, outcome))
    }
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, math::sqrt(var))
}
