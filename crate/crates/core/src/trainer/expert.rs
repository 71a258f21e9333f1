use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{actor_critic_grads, choose_action, mean_var, ActionSpace, MetricsRow, Record, RolloutBuffer, TakenAction};
use crate::envs::{Control, Env, EnvHandle, StepResult};
use crate::error::{invalid, Result};
use crate::model::{apply_grads_clipped, GradAccumulator, ModelLayout, ModelParams, PolicyHead};
use crate::types::{ExpertTrajectory, TrainConfig};

const SAMPLING_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Greedy expert rollouts. `actions[i][t]` is the primitive control that
/// moved `trajectories[i]` from state `t` to state `t + 1`; it is kept only
/// for action clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub trajectories: Vec<ExpertTrajectory>,
    pub actions: Vec<Vec<Vec<f64>>>,
}

impl DemoSet {
    /// Every logged control, in rollout order.
    pub fn flat_actions(&self) -> Vec<Vec<f64>> {
        self.actions.iter().flatten().cloned().collect()
    }
}

pub(super) fn policy_head(space: &ActionSpace) -> Result<PolicyHead> {
    match space {
        ActionSpace::Discrete(acts) => Ok(PolicyHead::Categorical { n_actions: acts.len() }),
        ActionSpace::Continuous { dim } => Ok(PolicyHead::Gaussian { action_dim: *dim }),
    }
}

pub(super) fn check_space(env: &Env, space: &ActionSpace) -> Result<()> {
    match space {
        ActionSpace::Discrete(acts) => env.check_actions(acts),
        ActionSpace::Continuous { dim } => match env.continuous_dim() {
            Some(d) if d == *dim => Ok(()),
            _ => invalid(format!("environment does not take {dim}-dimensional continuous controls")),
        },
    }
}

pub(super) fn execute(h: &mut EnvHandle, space: &ActionSpace, a: &TakenAction) -> Result<StepResult> {
    match (space, a) {
        (ActionSpace::Discrete(acts), TakenAction::Discrete(i)) => h.step(acts.get(*i)?),
        (ActionSpace::Continuous { .. }, TakenAction::Continuous(x)) => h.step_continuous(x),
        _ => invalid("action does not match the action space"),
    }
}

/// n-step advantage actor-critic on the task reward.
///
/// Observations are single frames; `cfg.stack_k` only applies to the
/// inspiration learner. Returns the trained parameters and one metrics row
/// per update, whose evaluation fields summarize the training episodes that
/// finished during that update.
pub fn train_expert(env: &Env, space: &ActionSpace, cfg: &TrainConfig) -> Result<(ModelParams, Vec<MetricsRow>)> {
    cfg.validate()?;
    env.validate()?;
    check_space(env, space)?;
    let layout = ModelLayout::new(env.obs_dim(), cfg.hidden.clone(), policy_head(space)?, cfg.shared_trunk)?;
    let mut p = ModelParams::init(layout, cfg.seed);
    let mut g = GradAccumulator::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLING_STREAM);
    let mut h = EnvHandle::new(env.clone())?;
    let mut s = h.reset(cfg.seed);
    let mut buf = RolloutBuffer::new(cfg.rollout_len)?;
    let mut rows = Vec::new();
    let mut total: u64 = 0;
    let mut ep_return = 0.0;

    while total < cfg.max_steps {
        buf.clear();
        let mut finished: Vec<(f64, bool)> = Vec::new();
        while !buf.is_full() && total < cfg.max_steps {
            let (out, value) = p.policy_value(&s)?;
            let action = choose_action(&p, &out, false, &mut rng);
            let res = execute(&mut h, space, &action)?;
            total += res.visited.len() as u64;
            ep_return += res.task_reward;
            buf.push(Record {
                s: s.clone(),
                action,
                scores: None,
                value,
                reward: res.task_reward,
                s_next: res.next.clone(),
                done: res.done,
            })?;
            s = res.next;
            if res.done {
                finished.push((ep_return, res.reached_goal));
                ep_return = 0.0;
                s = h.reset(cfg.seed);
                break;
            }
        }
        let bootstrap = if buf.ended() { 0.0 } else { p.policy_value(&s)?.1 };
        let (policy_loss, value_loss) = actor_critic_grads(&p, &mut g, &buf, bootstrap, cfg.gamma, cfg.entropy_coef)?;
        let n = buf.len() as f64;
        g.scale(1.0 / n, 1.0 / n, 0.0);
        apply_grads_clipped(&mut p, &mut g, cfg.learning_rate, cfg.max_grad_norm)?;

        let (mean_reward, reward_variance) = mean_var(&buf.rewards());
        let (episode_return, success_rate) = if finished.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let k = finished.len() as f64;
            (
                finished.iter().map(|f| f.0).sum::<f64>() / k,
                finished.iter().filter(|f| f.1).count() as f64 / k,
            )
        };
        rows.push(MetricsRow {
            total_steps: total,
            episode_return,
            policy_loss,
            value_loss,
            classifier_loss: f64::NAN,
            mean_reward,
            reward_variance,
            success_rate,
        });
        log::debug!("expert step {total}: policy {policy_loss:.4} value {value_loss:.4}");
    }
    Ok((p, rows))
}

/// Rolls out `n` greedy episodes and keeps their states at primitive granularity.
///
/// Resets are deterministic, so `seed` only matters for environments whose
/// reset depends on it.
pub fn record_demos(p: &ModelParams, env: &Env, space: &ActionSpace, n: usize, seed: u64) -> Result<DemoSet> {
    if n == 0 {
        return invalid("number of demonstrations must be positive");
    }
    check_space(env, space)?;
    if p.layout().obs_dim != env.obs_dim() || p.layout().policy != policy_head(space)? {
        return invalid("parameters do not match the environment and action space");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = EnvHandle::new(env.clone())?;
    let mut demos = DemoSet {
        trajectories: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut states = vec![h.reset(seed.wrapping_add(i as u64))];
        let mut log = Vec::new();
        loop {
            let (out, _) = p.policy_value(states.last().expect("nonempty"))?;
            let action = choose_action(p, &out, true, &mut rng);
            let res = execute(&mut h, space, &action)?;
            let controls: Vec<Vec<f64>> = match (&action, space) {
                (TakenAction::Discrete(id), ActionSpace::Discrete(acts)) => env
                    .controls(acts.get(*id)?)?
                    .into_iter()
                    .map(|c| match c {
                        Control::Primitive(k) => vec![k as f64],
                        Control::Continuous(v) => v.to_vec(),
                    })
                    .collect(),
                (TakenAction::Continuous(v), _) => vec![v.clone()],
                _ => return invalid("action does not match the action space"),
            };
            log.extend(controls.into_iter().take(res.visited.len()));
            states.extend(res.visited);
            if res.done {
                break;
            }
        }
        demos.trajectories.push(ExpertTrajectory::new(states)?);
        demos.actions.push(log);
    }
    Ok(demos)
}
