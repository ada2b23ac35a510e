//! Shared-trunk actor-critic: `8 → 64 → 32` tanh trunk, a 2-way softmax
//! policy head and a linear value head, with hand-written gradients of the
//! PPO composite loss and an Adam optimizer.
//!
//! Parameters are one flat `f64` buffer so the optimizer and gradient checks
//! can treat them uniformly. Weight matrices are row-major `[out][in]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{Observation, OBS_DIM};
use crate::seed::rng_from;

pub const HIDDEN1: usize = 64;
pub const HIDDEN2: usize = 32;
pub const ACTIONS: usize = 2;

const W1: usize = 0;
const B1: usize = W1 + HIDDEN1 * OBS_DIM;
const W2: usize = B1 + HIDDEN1;
const B2: usize = W2 + HIDDEN2 * HIDDEN1;
const WP: usize = B2 + HIDDEN2;
const BP: usize = WP + ACTIONS * HIDDEN2;
const WV: usize = BP + ACTIONS;
const BV: usize = WV + HIDDEN2;
pub const NUM_PARAMS: usize = BV + 1;

/// Named parameter blocks in layout order: (name, offset, rows, cols).
pub const LAYOUT: [(&str, usize, usize, usize); 8] = [
    ("trunk1_weight", W1, HIDDEN1, OBS_DIM),
    ("trunk1_bias", B1, HIDDEN1, 1),
    ("trunk2_weight", W2, HIDDEN2, HIDDEN1),
    ("trunk2_bias", B2, HIDDEN2, 1),
    ("policy_weight", WP, ACTIONS, HIDDEN2),
    ("policy_bias", BP, ACTIONS, 1),
    ("value_weight", WV, 1, HIDDEN2),
    ("value_bias", BV, 1, 1),
];

/// Scale applied to the policy head at initialization so the first policy is
/// close to uniform.
pub const POLICY_HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    values: Vec<f64>,
}

impl NetParams {
    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; NUM_PARAMS],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.len() != NUM_PARAMS {
            return Err(Error::input(format!(
                "expected {NUM_PARAMS} parameters, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        LAYOUT
            .iter()
            .find(|(n, ..)| *n == name)
            .map(|&(_, off, r, c)| &self.values[off..off + r * c])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct NamedBlock {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Serialize for NetParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks: Vec<NamedBlock> = LAYOUT
            .iter()
            .map(|&(name, off, rows, cols)| NamedBlock {
                name: name.to_string(),
                rows,
                cols,
                values: self.values[off..off + rows * cols].to_vec(),
            })
            .collect();
        blocks.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let blocks = Vec::<NamedBlock>::deserialize(d)?;
        if blocks.len() != LAYOUT.len() {
            return Err(D::Error::custom("wrong number of parameter blocks"));
        }
        let mut values = Vec::with_capacity(NUM_PARAMS);
        for (block, &(name, _, rows, cols)) in blocks.iter().zip(LAYOUT.iter()) {
            if block.name != name || block.rows != rows || block.cols != cols || block.values.len() != rows * cols {
                return Err(D::Error::custom(format!("parameter block `{}` does not match layout", block.name)));
            }
            values.extend_from_slice(&block.values);
        }
        NetParams::from_vec(values).map_err(D::Error::custom)
    }
}

/// Fan-in scaled uniform weights `U(-1/√fan_in, 1/√fan_in)`, the policy head
/// further scaled by [`POLICY_HEAD_INIT_SCALE`], zero biases.
pub fn init_params(seed: u64) -> NetParams {
    let mut rng = rng_from(seed);
    let mut p = NetParams::zeros();
    for &(name, off, rows, cols) in LAYOUT.iter() {
        if cols == 1 && name.ends_with("bias") {
            continue;
        }
        let bound = 1.0 / (cols as f64).sqrt();
        let scale = if name == "policy_weight" { POLICY_HEAD_INIT_SCALE } else { 1.0 };
        for v in &mut p.values[off..off + rows * cols] {
            *v = scale * rng.random_range(-bound..bound);
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: [f64; ACTIONS],
    pub probs: [f64; ACTIONS],
    pub log_probs: [f64; ACTIONS],
    pub value: f64,
    pub hidden1: [f64; HIDDEN1],
    pub hidden2: [f64; HIDDEN2],
}

impl ForwardOutput {
    pub fn greedy_action(&self) -> u8 {
        // ties go to flat
        u8::from(self.probs[1] > self.probs[0])
    }

    /// Inverse-CDF draw from the two-class policy with `u ∈ [0, 1)`.
    pub fn sample_action(&self, u: f64) -> u8 {
        u8::from(u >= self.probs[0])
    }

    pub fn entropy(&self) -> f64 {
        -(0..ACTIONS).map(|k| self.probs[k] * self.log_probs[k]).sum::<f64>()
    }
}

pub fn forward(params: &NetParams, obs: &[f64]) -> Result<ForwardOutput> {
    if obs.len() != OBS_DIM {
        return Err(Error::input(format!("observation has {} values, expected {OBS_DIM}", obs.len())));
    }
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation".into()));
    }
    let w = &params.values;
    let mut hidden1 = [0.0; HIDDEN1];
    for (j, h) in hidden1.iter_mut().enumerate() {
        let row = &w[W1 + j * OBS_DIM..W1 + (j + 1) * OBS_DIM];
        let z: f64 = w[B1 + j] + row.iter().zip(obs).map(|(a, b)| a * b).sum::<f64>();
        *h = z.tanh();
    }
    let mut hidden2 = [0.0; HIDDEN2];
    for (j, h) in hidden2.iter_mut().enumerate() {
        let row = &w[W2 + j * HIDDEN1..W2 + (j + 1) * HIDDEN1];
        let z: f64 = w[B2 + j] + row.iter().zip(&hidden1).map(|(a, b)| a * b).sum::<f64>();
        *h = z.tanh();
    }
    let mut logits = [0.0; ACTIONS];
    for (k, l) in logits.iter_mut().enumerate() {
        let row = &w[WP + k * HIDDEN2..WP + (k + 1) * HIDDEN2];
        *l = w[BP + k] + row.iter().zip(&hidden2).map(|(a, b)| a * b).sum::<f64>();
    }
    let value = w[BV] + w[WV..WV + HIDDEN2].iter().zip(&hidden2).map(|(a, b)| a * b).sum::<f64>();

    let m = logits[0].max(logits[1]);
    let sum: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let lse = m + sum.ln();
    let log_probs = [logits[0] - lse, logits[1] - lse];
    let probs = [log_probs[0].exp(), log_probs[1].exp()];
    if !value.is_finite() || !lse.is_finite() {
        return Err(Error::NonFinite("forward pass".into()));
    }
    Ok(ForwardOutput {
        logits,
        probs,
        log_probs,
        value,
        hidden1,
        hidden2,
    })
}

/// Coefficients of the composite PPO loss
/// `-surrogate + value_coef · MSE - entropy_coef · entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

/// Per-sample clipped surrogate `min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)`.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// d/dρ of [`clipped_objective`]: `Â` while the unclipped term is selected, else 0.
pub fn clipped_objective_grad(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

/// Training samples for one gradient step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Minibatch {
    pub observations: Vec<Observation>,
    pub actions: Vec<u8>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        if n == 0 {
            return Err(Error::input("empty minibatch"));
        }
        if [self.observations.len(), self.old_log_probs.len(), self.advantages.len(), self.returns.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::input("minibatch columns differ in length"));
        }
        if self.actions.iter().any(|&a| a as usize >= ACTIONS) {
            return Err(Error::input("minibatch action out of range"));
        }
        Ok(())
    }
}

/// Loss components averaged over a minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub surrogate: f64,
    pub value_mse: f64,
    pub entropy: f64,
    /// Share of samples whose ratio left `[1-ε, 1+ε]`.
    pub clip_fraction: f64,
}

/// Composite loss value only.
pub fn loss(params: &NetParams, batch: &Minibatch, spec: &LossSpec) -> Result<LossParts> {
    backward_impl(params, batch, spec, None)
}

/// Composite loss and its gradient with respect to every parameter.
pub fn backward(params: &NetParams, batch: &Minibatch, spec: &LossSpec) -> Result<(LossParts, Vec<f64>)> {
    let mut grad = vec![0.0; NUM_PARAMS];
    let parts = backward_impl(params, batch, spec, Some(&mut grad))?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((parts, grad))
}

fn backward_impl(
    params: &NetParams,
    batch: &Minibatch,
    spec: &LossSpec,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<LossParts> {
    batch.validate()?;
    let n = batch.len() as f64;
    let w = &params.values;
    let mut parts = LossParts::default();

    for i in 0..batch.len() {
        let x = batch.observations[i].as_slice();
        let out = forward(params, x)?;
        let a = batch.actions[i] as usize;
        let adv = batch.advantages[i];
        let ratio = (out.log_probs[a] - batch.old_log_probs[i]).exp();
        let surrogate = clipped_objective(ratio, adv, spec.clip_epsilon);
        let entropy = out.entropy();
        let verr = out.value - batch.returns[i];

        parts.surrogate += surrogate / n;
        parts.value_mse += verr * verr / n;
        parts.entropy += entropy / n;
        if (ratio - 1.0).abs() > spec.clip_epsilon {
            parts.clip_fraction += 1.0 / n;
        }

        let Some(g) = grad.as_deref_mut() else { continue };

        // dL/dlogit_k: surrogate through ρ = π_a/π_old, entropy through softmax
        let dsurr = clipped_objective_grad(ratio, adv, spec.clip_epsilon);
        let mut dlogit = [0.0; ACTIONS];
        for (k, d) in dlogit.iter_mut().enumerate() {
            let indicator = if k == a { 1.0 } else { 0.0 };
            let dratio = ratio * (indicator - out.probs[k]);
            let dentropy = -out.probs[k] * (out.log_probs[k] + entropy);
            *d = (-dsurr * dratio - spec.entropy_coef * dentropy) / n;
        }
        let dvalue = spec.value_coef * 2.0 * verr / n;

        let mut dh2 = [0.0; HIDDEN2];
        for k in 0..ACTIONS {
            g[BP + k] += dlogit[k];
            for j in 0..HIDDEN2 {
                g[WP + k * HIDDEN2 + j] += dlogit[k] * out.hidden2[j];
                dh2[j] += dlogit[k] * w[WP + k * HIDDEN2 + j];
            }
        }
        g[BV] += dvalue;
        for j in 0..HIDDEN2 {
            g[WV + j] += dvalue * out.hidden2[j];
            dh2[j] += dvalue * w[WV + j];
        }

        let mut dh1 = [0.0; HIDDEN1];
        for j in 0..HIDDEN2 {
            let dz = dh2[j] * (1.0 - out.hidden2[j] * out.hidden2[j]);
            g[B2 + j] += dz;
            let row = W2 + j * HIDDEN1;
            for m in 0..HIDDEN1 {
                g[row + m] += dz * out.hidden1[m];
                dh1[m] += dz * w[row + m];
            }
        }
        for m in 0..HIDDEN1 {
            let dz = dh1[m] * (1.0 - out.hidden1[m] * out.hidden1[m]);
            g[B1 + m] += dz;
            let row = W1 + m * OBS_DIM;
            for (q, xq) in x.iter().enumerate() {
                g[row + q] += dz * xq;
            }
        }
    }

    parts.total = -parts.surrogate + spec.value_coef * parts.value_mse - spec.entropy_coef * parts.entropy;
    if !parts.total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; NUM_PARAMS],
            second_moment: vec![0.0; NUM_PARAMS],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, descending `grads`.
pub fn adam_step(params: &mut NetParams, grads: &[f64], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.values.len()
        || state.first_moment.len() != params.values.len()
        || state.second_moment.len() != params.values.len()
    {
        return Err(Error::input("parameter, gradient and moment shapes differ"));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for i in 0..grads.len() {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        params.values[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}
