//! Sequence-forecasting networks for POD temporal coefficients.
//!
//! Both models read a window of `q` snapshots of `N` coefficients and emit
//! `p` future snapshots through `p` separate output heads.
//!
//! LSTM model:
//!
//! ```text
//! input q x N -> LSTM(units), final hidden state -> FC(p * units) -> reshape p x units
//!   -> FC(80) shared across the p rows -> split(p) -> p x FC(N)
//! ```
//!
//! Conv1D model:
//!
//! ```text
//! input q x N -> Conv1D(30, k=3, valid) -> Conv1D(60, k=3, valid) -> flatten (q-4)*60
//!   -> FC(100) -> FC(100) -> split(p): the same vector feeds every head -> p x FC(N)
//! ```
//!
//! All parameters live in one flat `f64` array. The LSTM gate blocks are laid
//! out as (input, forget, cell, output).

mod adam;
mod checkpoint;
mod cnn;
mod dense;
mod loss;
mod lstm;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use loss::{loss_mse, loss_pa_mse, LossSpec, LossValue, MassBalance};

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RomError};

/// Width of the per-step FC layer of the LSTM model.
pub const LSTM_STEP_WIDTH: usize = 80;
pub const CNN_CHANNELS: [usize; 2] = [30, 60];
pub const CNN_KERNEL: usize = 3;
pub const CNN_DENSE_WIDTH: usize = 100;
pub const DEFAULT_UNITS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// alpha = 1
    Elu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Elu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Activation::Relu,
            1 => Activation::Elu,
            2 => Activation::Sigmoid,
            3 => Activation::Tanh,
            _ => return None,
        })
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: ModelKind,
    /// Input and output feature width (retained modes).
    pub n_modes: usize,
    /// Forecast horizon `p`.
    pub horizon: usize,
    /// Input window length `q`.
    pub window: usize,
    /// LSTM hidden width.
    pub units: usize,
    pub step_width: usize,
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub dense_width: usize,
    pub hidden: Activation,
    pub output: Activation,
}

impl NetworkSpec {
    pub fn lstm(n_modes: usize, horizon: usize, window: usize, units: usize) -> Self {
        NetworkSpec {
            kind: ModelKind::Lstm,
            n_modes,
            horizon,
            window,
            units,
            step_width: LSTM_STEP_WIDTH,
            conv_channels: CNN_CHANNELS,
            kernel: CNN_KERNEL,
            dense_width: CNN_DENSE_WIDTH,
            hidden: Activation::Relu,
            output: Activation::Sigmoid,
        }
    }

    pub fn cnn(n_modes: usize, horizon: usize, window: usize) -> Self {
        NetworkSpec {
            kind: ModelKind::Cnn,
            ..NetworkSpec::lstm(n_modes, horizon, window, DEFAULT_UNITS)
        }
    }

    pub fn with_activations(mut self, hidden: Activation, output: Activation) -> Self {
        self.hidden = hidden;
        self.output = output;
        self
    }

    /// Length of the second convolution's output.
    pub fn conv_out_len(&self) -> usize {
        self.window + 2 - 2 * self.kernel
    }

    pub fn validate(&self) -> Result<()> {
        let zero = [
            ("n_modes", self.n_modes),
            ("horizon", self.horizon),
            ("window", self.window),
        ];
        if let Some((name, _)) = zero.iter().find(|(_, v)| *v == 0) {
            return Err(RomError::InvalidInput(format!("network {name} must be >= 1")));
        }
        match self.kind {
            ModelKind::Lstm => {
                if self.units == 0 || self.step_width == 0 {
                    return Err(RomError::InvalidInput("LSTM widths must be >= 1".into()));
                }
            }
            ModelKind::Cnn => {
                if self.kernel == 0
                    || self.conv_channels.contains(&0)
                    || self.dense_width == 0
                {
                    return Err(RomError::InvalidInput("CNN widths must be >= 1".into()));
                }
                if self.window + 2 <= 2 * self.kernel {
                    return Err(RomError::InvalidInput(format!(
                        "window {} too short for two valid convolutions of kernel {}",
                        self.window, self.kernel
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ordered parameter blocks of this architecture.
    pub fn slots(&self) -> Vec<Slot> {
        let mut b = SlotBuilder::default();
        let n = self.n_modes;
        match self.kind {
            ModelKind::Lstm => {
                let u = self.units;
                b.dense("lstm", 4 * u, n + u, n + u);
                b.dense("fc_expand", self.horizon * u, u, u);
                b.dense("fc_step", self.step_width, u, u);
                for k in 0..self.horizon {
                    b.dense(&format!("head{k}"), n, self.step_width, self.step_width);
                }
            }
            ModelKind::Cnn => {
                let [c1, c2] = self.conv_channels;
                let kk = self.kernel;
                b.dense("conv1", c1, kk * n, kk * n);
                b.dense("conv2", c2, kk * c1, kk * c1);
                let flat = self.conv_out_len() * c2;
                b.dense("fc1", self.dense_width, flat, flat);
                b.dense("fc2", self.dense_width, self.dense_width, self.dense_width);
                for k in 0..self.horizon {
                    b.dense(&format!("head{k}"), n, self.dense_width, self.dense_width);
                }
            }
        }
        b.slots
    }
}

/// Exact trainable-parameter count (weights and biases).
pub fn count_parameters(spec: &NetworkSpec) -> usize {
    spec.slots().iter().map(|s| s.len()).sum()
}

/// One weight block (`rows x cols`, row-major) or bias vector in the flat store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Default)]
struct SlotBuilder {
    slots: Vec<Slot>,
    next: usize,
}

impl SlotBuilder {
    fn push(&mut self, name: String, rows: usize, cols: usize, fan_in: usize) {
        let slot = Slot {
            name,
            offset: self.next,
            rows,
            cols,
            fan_in,
        };
        self.next += slot.len();
        self.slots.push(slot);
    }

    /// Weight `rows x cols` followed by a bias of length `rows`.
    fn dense(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize) {
        self.push(format!("{name}.weight"), rows, cols, fan_in);
        self.push(format!("{name}.bias"), rows, 1, fan_in);
    }
}

/// Flat trainable store with a matching gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
    slots: Vec<Slot>,
}

impl Parameters {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let slots = spec.slots();
        let n = slots.iter().map(Slot::len).sum();
        Parameters {
            values: vec![0.0; n],
            grads: vec![0.0; n],
            slots,
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per block; LSTM forget-gate
    /// biases start at 1.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut p = Parameters::zeros(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in &p.slots {
            let bound = 1.0 / (slot.fan_in as f64).sqrt();
            for v in &mut p.values[slot.range()] {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        if spec.kind == ModelKind::Lstm {
            let u = spec.units;
            let bias = p.slot("lstm.bias").expect("lstm bias slot").offset;
            p.values[bias + u..bias + 2 * u].fill(1.0);
        }
        p
    }

    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        let mut p = Parameters::zeros(spec);
        if values.len() != p.values.len() {
            return Err(RomError::mismatch("parameter count", p.values.len(), values.len()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }

    pub(crate) fn block(&self, index: usize) -> &[f64] {
        &self.values[self.slots[index].range()]
    }
}

/// A network: architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: Parameters,
}

impl Network {
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Network {
            params: Parameters::init(&spec, seed),
            spec,
        })
    }

    pub fn with_params(spec: NetworkSpec, params: Parameters) -> Result<Self> {
        spec.validate()?;
        if params.slots != spec.slots() {
            return Err(RomError::mismatch(
                "parameter layout",
                count_parameters(&spec),
                params.len(),
            ));
        }
        Ok(Network { spec, params })
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        let want = self.spec.window * self.spec.n_modes;
        if window.len() != want {
            return Err(RomError::mismatch("input window", want, window.len()));
        }
        if let Some(i) = window.iter().position(|x| !x.is_finite()) {
            return Err(RomError::NonFinite(format!("input window entry {i}")));
        }
        Ok(())
    }

    /// Window is `q x N` row-major (one snapshot per row); result is `p x N`.
    pub fn forward(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        match self.spec.kind {
            ModelKind::Lstm => lstm::forward(&self.spec, &self.params, window).map(|c| c.output),
            ModelKind::Cnn => cnn::forward(&self.spec, &self.params, window).map(|c| c.output),
        }
    }

    /// Loss over a batch of `(window, target)` pairs and its gradient, which is
    /// written to `self.params.grads` (averaged over the batch).
    pub fn loss_and_gradient(
        &mut self,
        batch: &[(&[f64], &[f64])],
        loss: &LossSpec,
    ) -> Result<LossValue> {
        if batch.is_empty() {
            return Err(RomError::InvalidInput("empty batch".into()));
        }
        let out_len = self.spec.horizon * self.spec.n_modes;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; self.params.len()];
        let mut total = LossValue::default();
        for &(window, target) in batch {
            self.check_window(window)?;
            if target.len() != out_len {
                return Err(RomError::mismatch("target", out_len, target.len()));
            }
            let n = self.spec.n_modes;
            let value = match self.spec.kind {
                ModelKind::Lstm => {
                    let cache = lstm::forward(&self.spec, &self.params, window)?;
                    let (value, dy) = loss.value_and_grad(&cache.output, target, n)?;
                    lstm::backward(&self.spec, &self.params, &cache, &dy, scale, &mut grads);
                    value
                }
                ModelKind::Cnn => {
                    let cache = cnn::forward(&self.spec, &self.params, window)?;
                    let (value, dy) = loss.value_and_grad(&cache.output, target, n)?;
                    cnn::backward(&self.spec, &self.params, &cache, &dy, scale, &mut grads);
                    value
                }
            };
            total.accumulate(&value, scale);
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(RomError::NonFinite(format!("gradient at parameter offset {i}")));
        }
        self.params.grads = grads;
        Ok(total)
    }

    /// Batch loss without gradients.
    pub fn loss(&self, batch: &[(&[f64], &[f64])], loss: &LossSpec) -> Result<LossValue> {
        if batch.is_empty() {
            return Err(RomError::InvalidInput("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = LossValue::default();
        for &(window, target) in batch {
            let pred = self.forward(window)?;
            let value = loss.value(&pred, target, self.spec.n_modes)?;
            total.accumulate(&value, scale);
        }
        Ok(total)
    }
}

pub(crate) fn check_finite(values: &[f64], layer: usize, name: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RomError::NonFinite(format!("output of layer {layer} ({name})")));
    }
    Ok(())
}
