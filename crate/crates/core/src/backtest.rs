//! Runs a policy through whole episodes and collects the step log.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvConfig, PreparedDay, StepRecord, TradingEnv};
use crate::error::Result;
use crate::indicators::{IndicatorConfig, Observation};
use crate::neural::{forward, NetParams};

/// What a policy may see at a decision: the observation, plus the minute and
/// oracle label for the fixed benchmark policies that need them.
pub struct DecisionContext {
    pub minute: usize,
    pub first_minute: usize,
    pub label: u8,
}

pub trait Policy {
    fn act(&mut self, obs: &Observation, ctx: &DecisionContext) -> Result<u8>;
}

/// Argmax of the network policy.
pub struct GreedyPolicy<'a>(pub &'a NetParams);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, obs: &Observation, _: &DecisionContext) -> Result<u8> {
        Ok(forward(self.0, obs.as_slice())?.greedy_action())
    }
}

/// Uniform over {0, 1}.
pub struct RandomPolicy {
    pub rng: ChaCha8Rng,
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &Observation, _: &DecisionContext) -> Result<u8> {
        Ok(self.rng.random_range(0..2u8))
    }
}

/// Long from the first decision minute until the forced exit.
pub struct BuyAndHold;

impl Policy for BuyAndHold {
    fn act(&mut self, _: &Observation, _: &DecisionContext) -> Result<u8> {
        Ok(1)
    }
}

pub struct Flat;

impl Policy for Flat {
    fn act(&mut self, _: &Observation, _: &DecisionContext) -> Result<u8> {
        Ok(0)
    }
}

/// Copies the oracle label at every minute.
pub struct FollowLabels;

impl Policy for FollowLabels {
    fn act(&mut self, _: &Observation, ctx: &DecisionContext) -> Result<u8> {
        Ok(ctx.label)
    }
}

pub fn run_episode(
    day: &PreparedDay,
    config: &EnvConfig,
    indicators: &IndicatorConfig,
    policy: &mut dyn Policy,
) -> Result<Vec<StepRecord>> {
    let (mut env, mut obs) = TradingEnv::reset(day, config, indicators)?;
    let mut log = Vec::with_capacity(day.span.len());
    loop {
        let ctx = DecisionContext {
            minute: env.minute(),
            first_minute: day.span.first,
            label: env.current_label(),
        };
        let action = policy.act(&obs, &ctx)?;
        let out = env.step(action)?;
        log.push(out.record);
        match out.observation {
            Some(next) => obs = next,
            None => break,
        }
    }
    Ok(log)
}

/// Runs `policy` over every day in order and concatenates the logs.
pub fn run_days(
    days: &[PreparedDay],
    config: &EnvConfig,
    indicators: &IndicatorConfig,
    policy: &mut dyn Policy,
) -> Result<Vec<StepRecord>> {
    let mut log = Vec::new();
    for day in days {
        log.extend(run_episode(day, config, indicators, policy)?);
    }
    Ok(log)
}

/// Fraction of decision minutes (forced exits excluded) where the logged
/// action equals the oracle label.
pub fn label_agreement(log: &[StepRecord]) -> f64 {
    let decisions: Vec<&StepRecord> = log.iter().filter(|r| !r.forced).collect();
    if decisions.is_empty() {
        return 0.0;
    }
    decisions.iter().filter(|r| r.action == r.label).count() as f64 / decisions.len() as f64
}
