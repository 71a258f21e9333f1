//! Training loops, demonstration recording, action clustering and evaluation.

mod eval;
mod expert;
mod inspiration;
mod kmeans;

pub use eval::{evaluate, EvalMode, Evaluation};
pub use expert::{record_demos, train_expert, DemoSet};
pub use inspiration::{decision_stride, train_inspiration, train_inspiration_with, EnvEvaluator, Monitor, NoMonitor};
pub use kmeans::{kmeans_actions, kmeans_with_history, KmeansResult};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::model::{
    accumulate_gaussian_policy_grad, accumulate_policy_grad, accumulate_value_grad, softmax, GradAccumulator, ModelParams,
};
use crate::rewards::ScoreVector;
use crate::types::{ActionSet, StateVec};

/// The action vocabulary a policy emits.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(ActionSet),
    /// Raw continuous controls of the given dimension (Gaussian policy).
    Continuous { dim: usize },
}

/// An action as taken by the policy.
#[derive(Debug, Clone, PartialEq)]
pub enum TakenAction {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// One collected step.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub s: StateVec,
    pub action: TakenAction,
    /// Per-action classifier scores; absent for task-reward training.
    pub scores: Option<ScoreVector>,
    pub value: f64,
    pub reward: f64,
    pub s_next: StateVec,
    pub done: bool,
}

/// Up to `capacity` consecutive steps of one actor.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    capacity: usize,
    records: Vec<Record>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return invalid("rollout capacity must be positive");
        }
        Ok(Self {
            capacity,
            records: Vec::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, r: Record) -> Result<()> {
        if self.is_full() {
            return invalid("rollout buffer is full");
        }
        self.records.push(r);
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        self.records.len() >= self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    /// True when the last step ended an episode.
    pub fn ended(&self) -> bool {
        self.records.last().is_some_and(|r| r.done)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// Per-update telemetry. Evaluation fields are NaN for rows without an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub total_steps: u64,
    pub episode_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub classifier_loss: f64,
    pub mean_reward: f64,
    pub reward_variance: f64,
    pub success_rate: f64,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 8] = [
        "total_steps",
        "episode_return",
        "policy_loss",
        "value_loss",
        "classifier_loss",
        "mean_reward",
        "reward_variance",
        "success_rate",
    ];
}

/// `(R_t, A_t)` with `R_t = r_t + gamma * R_{t+1}` seeded by `bootstrap`, and `A_t = R_t - v_t`.
pub fn discounted_returns(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64) -> Result<Vec<(f64, f64)>> {
    if rewards.len() != values.len() {
        return invalid("rewards and values differ in length");
    }
    let mut out = vec![(0.0, 0.0); rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = (acc, acc - values[t]);
    }
    Ok(out)
}

pub fn compute_returns(buf: &RolloutBuffer, bootstrap_v: f64, gamma: f64) -> Result<Vec<(f64, f64)>> {
    discounted_returns(&buf.rewards(), &buf.values(), bootstrap_v, gamma)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Picks an action from the policy head output.
fn choose_action(p: &ModelParams, out: &[f64], greedy: bool, rng: &mut impl Rng) -> TakenAction {
    match p.log_std() {
        None => {
            if greedy {
                TakenAction::Discrete(argmax(out))
            } else {
                TakenAction::Discrete(sample_categorical(&softmax(out), rng))
            }
        }
        Some(log_std) => TakenAction::Continuous(
            out.iter()
                .zip(log_std)
                .map(|(&m, &ls)| {
                    if greedy {
                        m
                    } else {
                        let z: f64 = rng.sample(StandardNormal);
                        m + ls.exp() * z
                    }
                })
                .collect(),
        ),
    }
}

/// Policy and value gradients of one rollout, averaged over its steps.
/// Returns `(policy_loss, value_loss)`.
fn actor_critic_grads(
    p: &ModelParams,
    g: &mut GradAccumulator,
    buf: &RolloutBuffer,
    bootstrap: f64,
    gamma: f64,
    entropy_coef: f64,
) -> Result<(f64, f64)> {
    let ra = compute_returns(buf, bootstrap, gamma)?;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    for (rec, &(ret, adv)) in buf.records().iter().zip(&ra) {
        let terms = match &rec.action {
            TakenAction::Discrete(a) => accumulate_policy_grad(p, g, &rec.s, *a, adv, entropy_coef)?,
            TakenAction::Continuous(a) => accumulate_gaussian_policy_grad(p, g, &rec.s, a, adv, entropy_coef)?,
        };
        policy_loss -= terms.log_prob * adv + entropy_coef * terms.entropy;
        value_loss += accumulate_value_grad(p, g, &rec.s, ret)?;
    }
    let n = buf.len() as f64;
    Ok((policy_loss / n, value_loss / n))
}
