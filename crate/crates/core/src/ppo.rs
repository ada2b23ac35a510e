//! Proximal policy optimization over the trading environment.
//!
//! One training iteration collects a fixed-size rollout buffer with the
//! stochastic policy, estimates advantages with GAE (γ = 1), and runs several
//! epochs of shuffled minibatch Adam steps on the clipped surrogate loss.
//! After every full pass over the training days the greedy policy is scored
//! on the validation days; training stops once that score has failed to
//! improve `patience` times in a row and the best-scoring parameters are kept.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_days, GreedyPolicy};
use crate::env::{EnvConfig, PreparedDay, RewardMode, TradingEnv, GAMMA};
use crate::error::{Error, Result};
use crate::evaluation::stats::{compounded_return, daily_returns};
use crate::indicators::{IndicatorConfig, Observation};
use crate::neural::{adam_step, backward, forward, init_params, AdamConfig, AdamState, LossParts, LossSpec, Minibatch, NetParams};
use crate::seed::{derive_seed, rng_from, short_hash};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub buffer_size: usize,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub adam: AdamConfig,
    /// Upper bound on collect/update iterations.
    pub max_iterations: usize,
    /// Consecutive non-improving validation scores that stop training.
    pub patience: usize,
    /// Commission φ used when scoring the validation days (RF feedback).
    pub validation_commission: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            epochs: 10,
            minibatch_size: 64,
            buffer_size: 1024,
            gae_lambda: 0.95,
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: true,
            adam: AdamConfig::default(),
            max_iterations: 200,
            patience: 3,
            validation_commission: 1e-4,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::config("clip epsilon must lie in (0, 1)"));
        }
        if self.minibatch_size == 0 || self.buffer_size == 0 || self.buffer_size % self.minibatch_size != 0 {
            return Err(Error::config("minibatch size must divide the buffer size"));
        }
        if self.epochs == 0 || self.max_iterations == 0 || self.patience == 0 {
            return Err(Error::config("epochs, max iterations and patience must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("GAE lambda must lie in [0, 1]"));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Transitions from the behavior policy, in collection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Observation>,
    pub actions: Vec<u8>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Episode ended at this step.
    pub dones: Vec<bool>,
    /// V(s) of the state after the last record; 0 when that record ended an episode.
    pub bootstrap_value: f64,
    /// The buffer ends mid-episode and is bootstrapped with `bootstrap_value`.
    pub truncated: bool,
    /// Trainer-reward sums of the episodes that finished inside this buffer.
    pub episode_rewards: Vec<f64>,
    /// RF sums of the same episodes.
    pub episode_rf: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn completed_episodes(&self) -> usize {
        self.dones.iter().filter(|&&d| d).count()
    }
}

/// Cycles through training days in order, carrying an unfinished episode
/// across buffer boundaries.
pub struct EpisodeStream<'a> {
    days: &'a [PreparedDay],
    config: &'a EnvConfig,
    indicators: &'a IndicatorConfig,
    next_day: usize,
    current: Option<(TradingEnv<'a>, Observation)>,
    passes: usize,
    reward_sum: f64,
    rf_sum: f64,
}

impl<'a> EpisodeStream<'a> {
    pub fn new(days: &'a [PreparedDay], config: &'a EnvConfig, indicators: &'a IndicatorConfig) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::input("no training days available"));
        }
        Ok(Self {
            days,
            config,
            indicators,
            next_day: 0,
            current: None,
            passes: 0,
            reward_sum: 0.0,
            rf_sum: 0.0,
        })
    }

    /// Completed passes over all training days.
    pub fn passes(&self) -> usize {
        self.passes
    }

    fn ensure_episode(&mut self) -> Result<()> {
        if self.current.is_none() {
            let day = &self.days[self.next_day];
            self.current = Some(TradingEnv::reset(day, self.config, self.indicators)?);
            self.reward_sum = 0.0;
            self.rf_sum = 0.0;
        }
        Ok(())
    }
}

/// Fills a buffer of `capacity` steps with actions drawn from the policy.
pub fn collect_rollout(
    stream: &mut EpisodeStream<'_>,
    params: &NetParams,
    rng: &mut ChaCha8Rng,
    capacity: usize,
) -> Result<RolloutBuffer> {
    let mode = stream.config.reward_mode;
    let mut buf = RolloutBuffer::default();
    while buf.len() < capacity {
        stream.ensure_episode()?;
        let (env, obs) = stream.current.as_mut().expect("episode started");
        let out = forward(params, obs.as_slice())?;
        let action = out.sample_action(rng.random::<f64>());
        let step = env.step(action)?;

        buf.observations.push(*obs);
        buf.actions.push(action);
        buf.log_probs.push(out.log_probs[action as usize]);
        buf.values.push(out.value);
        buf.rewards.push(step.reward(mode));
        buf.dones.push(step.done);
        stream.reward_sum += step.reward(mode);
        stream.rf_sum += step.r_rf;

        match step.observation {
            Some(next) => *obs = next,
            None => {
                buf.episode_rewards.push(stream.reward_sum);
                buf.episode_rf.push(stream.rf_sum);
                stream.current = None;
                stream.next_day += 1;
                if stream.next_day == stream.days.len() {
                    stream.next_day = 0;
                    stream.passes += 1;
                }
            }
        }
    }
    match &stream.current {
        Some((_, obs)) => {
            buf.truncated = true;
            buf.bootstrap_value = forward(params, obs.as_slice())?.value;
        }
        None => {
            buf.truncated = false;
            buf.bootstrap_value = 0.0;
        }
    }
    Ok(buf)
}

/// Advantage estimates and value targets for one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    /// Normalized (unless degenerate or disabled) advantages used by the update.
    pub advantages: Vec<f64>,
    /// Advantages before normalization.
    pub raw: Vec<f64>,
    /// Value targets `raw + V(s)`.
    pub returns: Vec<f64>,
    pub normalized: bool,
}

/// Generalized advantage estimation:
/// `δ_t = r_t + γ V(s_{t+1}) (1 - done_t) - V(s_t)`,
/// `A_t = δ_t + γ λ (1 - done_t) A_{t+1}`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit (population) variance. Returns
/// false and leaves the input alone when the variance is zero.
pub fn normalize_advantages(adv: &mut [f64]) -> bool {
    if adv.len() < 2 {
        return false;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12) {
        return false;
    }
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
    true
}

pub fn compute_advantages(buffer: &RolloutBuffer, gamma: f64, lambda: f64, normalize: bool) -> Advantages {
    let (raw, returns) = gae(&buffer.rewards, &buffer.values, &buffer.dones, buffer.bootstrap_value, gamma, lambda);
    let mut advantages = raw.clone();
    let normalized = normalize && normalize_advantages(&mut advantages);
    Advantages {
        advantages,
        raw,
        returns,
        normalized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Loss components averaged over every minibatch step.
    pub mean: LossParts,
    pub steps: usize,
}

/// Epochs of shuffled minibatch Adam steps on the composite loss. On a
/// non-finite loss or gradient the parameters are left untouched.
pub fn ppo_update(
    params: &mut NetParams,
    adam: &mut AdamState,
    buffer: &RolloutBuffer,
    advantages: &Advantages,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if buffer.is_empty() || buffer.len() % config.minibatch_size != 0 {
        return Err(Error::input(format!(
            "buffer of {} steps does not split into minibatches of {}",
            buffer.len(),
            config.minibatch_size
        )));
    }
    let spec = config.loss_spec();
    let mut work = params.clone();
    let mut work_adam = adam.clone();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut stats = UpdateStats::default();

    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (mb, chunk) in order.chunks(config.minibatch_size).enumerate() {
            let batch = Minibatch {
                observations: chunk.iter().map(|&i| buffer.observations[i]).collect(),
                actions: chunk.iter().map(|&i| buffer.actions[i]).collect(),
                old_log_probs: chunk.iter().map(|&i| buffer.log_probs[i]).collect(),
                advantages: chunk.iter().map(|&i| advantages.advantages[i]).collect(),
                returns: chunk.iter().map(|&i| advantages.returns[i]).collect(),
            };
            let (parts, grad) = backward(&work, &batch, &spec)
                .map_err(|e| Error::Runtime(format!("update aborted at epoch {epoch}, minibatch {mb}: {e}")))?;
            adam_step(&mut work, &grad, &mut work_adam)?;
            if !work.is_finite() {
                return Err(Error::Runtime(format!(
                    "update aborted at epoch {epoch}, minibatch {mb}: parameters became non-finite"
                )));
            }
            stats.steps += 1;
            stats.mean.total += parts.total;
            stats.mean.surrogate += parts.surrogate;
            stats.mean.value_mse += parts.value_mse;
            stats.mean.entropy += parts.entropy;
            stats.mean.clip_fraction += parts.clip_fraction;
        }
    }
    let k = stats.steps.max(1) as f64;
    stats.mean.total /= k;
    stats.mean.surrogate /= k;
    stats.mean.value_mse /= k;
    stats.mean.entropy /= k;
    stats.mean.clip_fraction /= k;
    *params = work;
    *adam = work_adam;
    Ok(stats)
}

/// Patience-based early stopping on a metric to maximize.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records a score; only a strict improvement resets the counter.
    pub fn observe(&mut self, metric: f64) -> StopDecision {
        let improved = self.best.is_none_or(|b| metric > b);
        if improved {
            self.best = Some(metric);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        StopDecision {
            improved,
            stop: self.stale >= self.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    /// Mean trainer reward (RF or RIF) of the episodes finished in this buffer.
    pub mean_episode_reward: Option<f64>,
    pub mean_episode_rf: Option<f64>,
    /// Validation cumulative return of the greedy policy, when scored this iteration.
    pub validation_return: Option<f64>,
    pub stop_counter: usize,
    pub stopped: bool,
    pub loss: f64,
}

pub const CHECKPOINT_FORMAT: &str = "rif-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild and run a trained policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Master seed of the run that produced this checkpoint.
    pub seed: u64,
    /// Seed the trainer itself was given.
    pub training_seed: u64,
    pub config_hash: String,
    pub iteration: usize,
    pub validation_return: Option<f64>,
    pub env: EnvConfig,
    pub indicators: IndicatorConfig,
    pub ppo: PpoConfig,
    pub params: NetParams,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::input(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn training_config_hash(env: &EnvConfig, indicators: &IndicatorConfig, ppo: &PpoConfig, seed: u64) -> Result<String> {
    let bytes = serde_json::to_vec(&(env, indicators, ppo, seed))?;
    Ok(short_hash(&bytes))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation parameters.
    pub checkpoint: Checkpoint,
    pub history: Vec<TrainRecord>,
    pub final_params: NetParams,
}

/// Greedy cumulative return over `days` with RF feedback at `commission`.
pub fn validation_score(
    params: &NetParams,
    days: &[PreparedDay],
    env: &EnvConfig,
    indicators: &IndicatorConfig,
    commission: f64,
) -> Result<f64> {
    let cfg = EnvConfig {
        trading_commission: commission,
        reward_mode: RewardMode::Rf,
        ..*env
    };
    let log = run_days(days, &cfg, indicators, &mut GreedyPolicy(params))?;
    let daily: Vec<f64> = daily_returns(&log).into_iter().map(|d| d.ret).collect();
    Ok(compounded_return(&daily))
}

/// Trains one agent. All randomness derives from `seed`.
pub fn train(
    train_days: &[PreparedDay],
    validation_days: &[PreparedDay],
    env: &EnvConfig,
    indicators: &IndicatorConfig,
    config: &PpoConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    env.validate()?;
    indicators.validate()?;
    config.validate()?;
    if train_days.is_empty() || validation_days.is_empty() {
        return Err(Error::input("training window needs both training and validation days"));
    }

    let mut params = init_params(derive_seed(seed, &["init"]));
    let mut adam = AdamState::new(config.adam);
    let mut rollout_rng = rng_from(derive_seed(seed, &["rollout"]));
    let mut update_rng = rng_from(derive_seed(seed, &["minibatch"]));
    let mut stream = EpisodeStream::new(train_days, env, indicators)?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<(usize, f64, NetParams)> = None;
    let mut history = Vec::new();

    let mut passes_seen = 0;
    for iteration in 1..=config.max_iterations {
        let buffer = collect_rollout(&mut stream, &params, &mut rollout_rng, config.buffer_size)?;
        let adv = compute_advantages(&buffer, GAMMA, config.gae_lambda, config.normalize_advantages);
        let stats = ppo_update(&mut params, &mut adam, &buffer, &adv, config, &mut update_rng)?;

        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mut record = TrainRecord {
            iteration,
            mean_episode_reward: mean(&buffer.episode_rewards),
            mean_episode_rf: mean(&buffer.episode_rf),
            validation_return: None,
            stop_counter: stopper.stale,
            stopped: false,
            loss: stats.mean.total,
        };

        let last = iteration == config.max_iterations;
        if stream.passes() > passes_seen || (last && best.is_none()) {
            passes_seen = stream.passes();
            let score = validation_score(&params, validation_days, env, indicators, config.validation_commission)?;
            let decision = stopper.observe(score);
            if decision.improved {
                best = Some((iteration, score, params.clone()));
            }
            record.validation_return = Some(score);
            record.stop_counter = stopper.stale;
            record.stopped = decision.stop;
            history.push(record);
            if decision.stop {
                break;
            }
        } else {
            history.push(record);
        }
    }

    let (iteration, score, best_params) = best.expect("validation runs at least once");
    let checkpoint = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        seed,
        training_seed: seed,
        config_hash: training_config_hash(env, indicators, config, seed)?,
        iteration,
        validation_return: Some(score),
        env: *env,
        indicators: *indicators,
        ppo: *config,
        params: best_params,
    };
    Ok(TrainOutcome {
        checkpoint,
        history,
        final_params: params,
    })
}

/// Training history as CSV: iteration, mean reward, validation return, stop flag.
pub fn history_csv(history: &[TrainRecord]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("iteration,mean_episode_reward,mean_episode_rf,validation_return,stop_counter,stopped\n");
    for r in history {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration,
            fmt(r.mean_episode_reward),
            fmt(r.mean_episode_rf),
            fmt(r.validation_return),
            r.stop_counter,
            r.stopped
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{generate_synthetic, SyntheticKind, SyntheticSpec};

    fn days(n: usize, cfg: &EnvConfig, ind: &IndicatorConfig) -> Vec<PreparedDay> {
        let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, n, 4e-4, 0.0, 21);
        generate_synthetic(&spec)
            .unwrap()
            .into_iter()
            .map(|d| PreparedDay::new(d, cfg, ind).unwrap())
            .collect()
    }

    #[test]
    fn gae_monte_carlo_case() {
        let (adv, ret) = gae(&[1.0, 1.0, 1.0], &[0.0; 3], &[false, false, true], 0.0, 1.0, 1.0);
        assert_eq!(ret, vec![3.0, 2.0, 1.0]);
        assert_eq!(adv, ret);
    }

    #[test]
    fn gae_perfect_values_give_zero_advantage() {
        let rewards = [0.5, -1.0, 2.0];
        let values = [1.5, 1.0, 2.0];
        let (adv, _) = gae(&rewards, &values, &[false, false, true], 0.0, 1.0, 0.95);
        assert!(adv.iter().all(|&a| a.abs() < 1e-15));
    }

    #[test]
    fn gae_lambda_zero_is_one_step_td() {
        let rewards = [0.3, -0.2, 0.7, 0.1];
        let values = [0.1, 0.4, -0.3, 0.2];
        let dones = [false, true, false, false];
        let boot = 0.9;
        let (adv, _) = gae(&rewards, &values, &dones, boot, 1.0, 0.0);
        let next = [values[1], 0.0, values[3], boot];
        for t in 0..4 {
            let live = if dones[t] { 0.0 } else { 1.0 };
            assert_eq!(adv[t], rewards[t] + next[t] * live - values[t]);
        }
    }

    #[test]
    fn normalization_and_degenerate_case() {
        let mut a = vec![1.0, 2.0, 3.0, 10.0];
        assert!(normalize_advantages(&mut a));
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
        let mut flat = vec![2.0; 5];
        assert!(!normalize_advantages(&mut flat));
        assert_eq!(flat, vec![2.0; 5]);
    }

    #[test]
    fn early_stopping_fires_on_third_stale_score() {
        let mut s = EarlyStopping::new(3);
        assert!(!s.observe(0.1).stop);
        assert!(!s.observe(0.2).stop);
        assert!(!s.observe(0.2).stop);
        assert!(!s.observe(0.15).stop);
        assert!(s.observe(0.2).stop);
        let mut rising = EarlyStopping::new(3);
        for i in 0..100 {
            assert!(!rising.observe(i as f64).stop);
        }
    }

    #[test]
    fn rollout_is_full_and_reproducible() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let d = days(2, &cfg, &ind);
        let params = init_params(1);
        let collect = || {
            let mut stream = EpisodeStream::new(&d, &cfg, &ind).unwrap();
            let mut rng = rng_from(3);
            let a = collect_rollout(&mut stream, &params, &mut rng, 1024).unwrap();
            let b = collect_rollout(&mut stream, &params, &mut rng, 1024).unwrap();
            (a, b, stream.passes())
        };
        let (a, b, passes) = collect();
        assert_eq!(a.len(), 1024);
        assert_eq!(b.len(), 1024);
        // 387-step episodes: 2 finish in the first 1024 steps, the third is truncated
        assert_eq!(a.completed_episodes(), 2);
        assert!(a.truncated);
        assert_eq!(a.completed_episodes() + b.completed_episodes(), 2048 / 387);
        assert_eq!(passes, 2);
        let (a2, b2, _) = collect();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn stream_requires_days() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        assert!(EpisodeStream::new(&[], &cfg, &ind).is_err());
    }

    #[test]
    fn first_minibatch_ratios_are_one() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let d = days(1, &cfg, &ind);
        let params = init_params(2);
        let mut stream = EpisodeStream::new(&d, &cfg, &ind).unwrap();
        let buf = collect_rollout(&mut stream, &params, &mut rng_from(4), 64).unwrap();
        for i in 0..buf.len() {
            let out = forward(&params, buf.observations[i].as_slice()).unwrap();
            let ratio = (out.log_probs[buf.actions[i] as usize] - buf.log_probs[i]).exp();
            assert_eq!(ratio, 1.0);
        }
    }

    #[test]
    fn config_validation() {
        PpoConfig::default().validate().unwrap();
        let bad = PpoConfig { minibatch_size: 100, ..PpoConfig::default() };
        assert!(bad.validate().is_err());
        let bad = PpoConfig { clip_epsilon: 1.0, ..PpoConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn short_training_is_reproducible_and_checkpoints_round_trip() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let d = days(3, &cfg, &ind);
        let ppo = PpoConfig { max_iterations: 3, epochs: 2, ..PpoConfig::default() };
        let a = train(&d[..2], &d[2..], &cfg, &ind, &ppo, 5).unwrap();
        let b = train(&d[..2], &d[2..], &cfg, &ind, &ppo, 5).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.history, b.history);
        assert!(a.history.iter().any(|r| r.validation_return.is_some()));
        let json = a.checkpoint.to_json().unwrap();
        assert_eq!(Checkpoint::from_json(&json).unwrap(), a.checkpoint);
        assert!(train(&d[..2], &[], &cfg, &ind, &ppo, 5).is_err());
    }
}
