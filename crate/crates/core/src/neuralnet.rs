//! Three-layer (input / hidden / output) feedforward network trained with
//! plain SGD on mean squared error.
//!
//! Parameter layout: `w1` is `hidden x input`, `b1` is `hidden`, `w2` is
//! `output x hidden`, `b2` is `output`, all row-major.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::{arbitrate, BehaviorParams, SensorSnapshot};
use crate::dynamics::{wrap_angle, Pose};
use crate::world::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("inputs and targets differ in length ({inputs} vs {targets})")]
    DatasetLength { inputs: usize, targets: usize },
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("network file, line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }
}

struct ForwardCache {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    out_pre: Vec<f64>,
    out: Vec<f64>,
}

impl MlpNetwork {
    /// Network with all parameters zero.
    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; output_dim * hidden_dim],
            b2: vec![0.0; output_dim],
            hidden_activation,
            output_activation,
        }
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn random(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim, hidden_activation, output_activation);
        let s1 = 1.0 / (input_dim.max(1) as f64).sqrt();
        let s2 = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        for w in net.w1.iter_mut().chain(net.b1.iter_mut()) {
            *w = rng.gen_range(-s1..=s1);
        }
        for w in net.w2.iter_mut().chain(net.b2.iter_mut()) {
            *w = rng.gen_range(-s2..=s2);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn activations(&self) -> (Activation, Activation) {
        (self.hidden_activation, self.output_activation)
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NetError> {
        if input.len() != self.input_dim {
            return Err(NetError::Dimension { expected: self.input_dim, got: input.len() });
        }
        Ok(())
    }

    fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let hidden_pre: Vec<f64> = (0..self.hidden_dim)
            .map(|j| {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                self.b1[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|&z| self.hidden_activation.apply(z)).collect();
        let out_pre: Vec<f64> = (0..self.output_dim)
            .map(|k| {
                let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
                self.b2[k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        let out = out_pre.iter().map(|&z| self.output_activation.apply(z)).collect();
        ForwardCache { hidden_pre, hidden, out_pre, out }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        Ok(self.forward_cached(input).out)
    }

    /// Loss and analytic parameter gradients for one sample.
    pub fn backprop(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradients), NetError> {
        self.check_input(input)?;
        if target.len() != self.output_dim {
            return Err(NetError::Dimension { expected: self.output_dim, got: target.len() });
        }
        let cache = self.forward_cached(input);
        let loss = mse_loss(&cache.out, target)?;
        let n = self.output_dim as f64;
        let mut g = Gradients::zeros_like(self);

        let delta_out: Vec<f64> = (0..self.output_dim)
            .map(|k| {
                let dl_da = 2.0 * (cache.out[k] - target[k]) / n;
                dl_da * self.output_activation.derivative(cache.out_pre[k], cache.out[k])
            })
            .collect();
        for (k, &d) in delta_out.iter().enumerate() {
            g.b2[k] = d;
            for (w, &h) in g.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim].iter_mut().zip(&cache.hidden) {
                *w = d * h;
            }
        }
        for j in 0..self.hidden_dim {
            let back: f64 = (0..self.output_dim).map(|k| self.w2[k * self.hidden_dim + j] * delta_out[k]).sum();
            let delta = back * self.hidden_activation.derivative(cache.hidden_pre[j], cache.hidden[j]);
            g.b1[j] = delta;
            for (w, &x) in g.w1[j * self.input_dim..(j + 1) * self.input_dim].iter_mut().zip(input) {
                *w = delta * x;
            }
        }
        Ok((loss, g))
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    /// Parameter `idx` in the flat `w1, b1, w2, b2` order.
    fn param_slot(&mut self, mut idx: usize) -> &mut f64 {
        for block in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if idx < block.len() {
                return &mut block[idx];
            }
            idx -= block.len();
        }
        panic!("parameter index out of range")
    }

    /// Mean loss over a dataset.
    pub fn dataset_loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, NetError> {
        check_dataset(inputs, targets)?;
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            total += mse_loss(&self.forward(x)?, t)?;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Minibatch SGD. Returns the trained copy and the dataset loss after
    /// every epoch.
    pub fn train(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        config: &TrainConfig,
    ) -> Result<(MlpNetwork, Vec<f64>), NetError> {
        config.validate()?;
        check_dataset(inputs, targets)?;
        let mut net = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut history = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let mut acc = Gradients::zeros_like(&net);
                for &i in batch {
                    let (_, g) = net.backprop(&inputs[i], &targets[i])?;
                    for (a, b) in [
                        (&mut acc.w1, &g.w1),
                        (&mut acc.b1, &g.b1),
                        (&mut acc.w2, &g.w2),
                        (&mut acc.b2, &g.b2),
                    ] {
                        a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
                    }
                }
                let scale = config.learning_rate / batch.len() as f64;
                let step: Vec<f64> = acc.flat().map(|g| scale * g).collect();
                net.params_mut().zip(step).for_each(|(p, s)| *p -= s);
            }
            let loss = net.dataset_loss(inputs, targets)?;
            if !loss.is_finite() {
                return Err(NetError::Diverged { epoch, loss });
            }
            history.push(loss);
        }
        Ok((net, history))
    }

    /// Max relative error between backprop gradients and central finite
    /// differences, `|a - n| / max(1, |n|)` over every parameter.
    pub fn gradient_check(&self, input: &[f64], target: &[f64], eps: f64) -> Result<f64, NetError> {
        let (_, analytic) = self.backprop(input, target)?;
        let analytic: Vec<f64> = analytic.flat().collect();
        let mut probe = self.clone();
        let mut worst = 0.0f64;
        for (idx, a) in analytic.iter().enumerate() {
            let original = *probe.param_slot(idx);
            *probe.param_slot(idx) = original + eps;
            let plus = mse_loss(&probe.forward_cached(input).out, target)?;
            *probe.param_slot(idx) = original - eps;
            let minus = mse_loss(&probe.forward_cached(input).out, target)?;
            *probe.param_slot(idx) = original;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
        }
        Ok(worst)
    }

    /// Text serialization: a header, then one labelled block per parameter
    /// tensor with one matrix row per line.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self, NetError> {
        let fmt_err = |line: usize, message: String| NetError::Format { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut next = |what: &str| {
            lines.next().ok_or_else(|| fmt_err(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, header) = next("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "mlp" {
            return Err(fmt_err(ln, "expected `mlp <in> <hidden> <out> <hidden_act> <out_act>`".into()));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| fmt_err(ln, format!("bad dimension `{s}`")));
        let (i, h, o) = (dim(fields[1])?, dim(fields[2])?, dim(fields[3])?);
        let ha = fields[4].parse().map_err(|e| fmt_err(ln, e))?;
        let oa = fields[5].parse().map_err(|e| fmt_err(ln, e))?;
        let mut net = Self::zeros(i, h, o, ha, oa);

        for (name, rows, cols) in [("w1", h, i), ("b1", 1, h), ("w2", o, h), ("b2", 1, o)] {
            let (ln, label) = next(name)?;
            if label != format!("{name} {rows} {cols}") {
                return Err(fmt_err(ln, format!("expected block header `{name} {rows} {cols}`, found `{label}`")));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = next(name)?;
                let parsed = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| fmt_err(ln, format!("bad number `{t}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if parsed.len() != cols {
                    return Err(fmt_err(ln, format!("expected {cols} values, found {}", parsed.len())));
                }
                values.extend(parsed);
            }
            let slot = match name {
                "w1" => &mut net.w1,
                "b1" => &mut net.b1,
                "w2" => &mut net.w2,
                _ => &mut net.b2,
            };
            *slot = values;
        }
        if let Some((ln, extra)) = lines.next() {
            return Err(fmt_err(ln, format!("trailing content `{extra}`")));
        }
        Ok(net)
    }
}

impl fmt::Display for MlpNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mlp {} {} {} {} {}",
            self.input_dim,
            self.hidden_dim,
            self.output_dim,
            self.hidden_activation.name(),
            self.output_activation.name()
        )?;
        let blocks = [
            ("w1", &self.w1, self.hidden_dim, self.input_dim),
            ("b1", &self.b1, 1, self.hidden_dim),
            ("w2", &self.w2, self.output_dim, self.hidden_dim),
            ("b2", &self.b2, 1, self.output_dim),
        ];
        for (name, values, rows, cols) in blocks {
            writeln!(f, "{name} {rows} {cols}")?;
            for r in 0..rows {
                let mut line = String::new();
                for (c, v) in values[r * cols..(r + 1) * cols].iter().enumerate() {
                    if c > 0 {
                        line.push(' ');
                    }
                    write!(line, "{v:?}")?;
                }
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

fn check_dataset(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(), NetError> {
    if inputs.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if inputs.len() != targets.len() {
        return Err(NetError::DatasetLength { inputs: inputs.len(), targets: targets.len() });
    }
    Ok(())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, NetError> {
    if pred.len() != target.len() {
        return Err(NetError::Dimension { expected: target.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 500, batch_size: 1, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NetError::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Number of features produced by [`velocity_features`].
pub const VELOCITY_FEATURES: usize = 10;

/// Ten normalized features describing the robot pose relative to the goal
/// and the nearest obstacle.
pub fn velocity_features(pose: &Pose, scenario: &Scenario) -> [f64; VELOCITY_FEATURES] {
    let b = &scenario.bounds;
    let (w, h) = (b.width(), b.height());
    let diag = w.hypot(h);
    let p = pose.position();
    let goal = scenario.goal;
    let near = scenario.nearest_obstacle(p);
    let d_obs = if near.distance.is_finite() { (near.distance / diag).min(1.0) } else { 1.0 };
    let phi_obs = wrap_angle(near.bearing - pose.theta);
    [
        (p.x - b.min_x) / w,
        (p.y - b.min_y) / h,
        pose.theta.cos(),
        pose.theta.sin(),
        (goal.x - p.x) / w,
        (goal.y - p.y) / h,
        p.distance(goal) / diag,
        d_obs,
        phi_obs.cos(),
        phi_obs.sin(),
    ]
}

/// Fits a 10-feature -> (v, omega) network to behavior-arbitration outputs
/// at `samples` random poses. A demonstration of the network pipeline, not
/// a planner.
pub fn fit_velocity_predictor(
    scenario: &Scenario,
    params: &BehaviorParams,
    samples: usize,
    hidden_dim: usize,
    config: &TrainConfig,
) -> Result<(MlpNetwork, Vec<f64>), NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let b = scenario.bounds;
    let mut inputs = Vec::with_capacity(samples);
    let mut targets = Vec::with_capacity(samples);
    for _ in 0..samples {
        let pose = Pose::new(
            rng.gen_range(b.min_x..=b.max_x),
            rng.gen_range(b.min_y..=b.max_y),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let p = pose.position();
        let near = scenario.nearest_obstacle(p);
        let snap = SensorSnapshot {
            phi_obstacle: wrap_angle(near.bearing - pose.theta),
            d_obstacle: near.distance,
            phi_goal: wrap_angle((scenario.goal.y - p.y).atan2(scenario.goal.x - p.x) - pose.theta),
            d_goal: p.distance(scenario.goal),
        };
        let cmd = arbitrate(&snap, params).cmd;
        inputs.push(velocity_features(&pose, scenario).to_vec());
        targets.push(vec![cmd.v, cmd.omega]);
    }
    let net = MlpNetwork::random(
        VELOCITY_FEATURES,
        hidden_dim,
        2,
        Activation::Relu,
        Activation::Linear,
        config.seed,
    );
    net.train(&inputs, &targets, config)
}
