use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{actor_critic_grads, choose_action, evaluate, mean_var, ActionSpace, EvalMode, Evaluation, MetricsRow, Record, RolloutBuffer, TakenAction};
use crate::envs::{Env, EnvHandle, ObservationView};
use crate::error::{invalid, Result};
use crate::model::{accumulate_classifier_grad, apply_grads_clipped, GradAccumulator, Label, ModelLayout, ModelParams, PolicyHead};
use crate::rewards::{reward, score_all_actions, ScoreVector};
use crate::types::{ActionSet, ActionSpec, ExpertTrajectory, StateVec, TrainConfig, Transition};

const SAMPLING_STREAM: u64 = 0x2545_f491_4f6c_dd1d;

/// Hooks into the inspiration loop.
pub trait Monitor {
    /// Called for every agent step with the scores of all actions.
    fn on_step(&mut self, _scores: &ScoreVector, _action: usize, _reward: f64) {}

    /// Task-level evaluation of the current parameters, when available.
    fn evaluate(&mut self, _p: &ModelParams) -> Result<Option<Evaluation>> {
        Ok(None)
    }

    fn on_update(&mut self, _row: &MetricsRow) -> Result<()> {
        Ok(())
    }
}

pub struct NoMonitor;

impl Monitor for NoMonitor {}

/// Evaluates on its own copy of the environment and keeps every metrics row.
pub struct EnvEvaluator {
    pub env: Env,
    pub space: ActionSpace,
    pub episodes: usize,
    pub seed: u64,
    pub mode: EvalMode,
    pub rows: Vec<MetricsRow>,
}

impl EnvEvaluator {
    pub fn new(env: Env, acts: ActionSet, episodes: usize, seed: u64) -> Self {
        Self {
            env,
            space: ActionSpace::Discrete(acts),
            episodes,
            seed,
            mode: EvalMode::Greedy,
            rows: Vec::new(),
        }
    }
}

impl Monitor for EnvEvaluator {
    fn evaluate(&mut self, p: &ModelParams) -> Result<Option<Evaluation>> {
        evaluate(p, &self.env, &self.space, self.episodes, self.seed, self.mode).map(Some)
    }

    fn on_update(&mut self, row: &MetricsRow) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }
}

/// Trains an agent from state-only demonstrations on `env`, evaluating every
/// `cfg.eval_every` steps. Returns the parameters and the metrics stream.
pub fn train_inspiration(
    env: &Env,
    acts: &ActionSet,
    demos: &[ExpertTrajectory],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<MetricsRow>)> {
    let mut handle = EnvHandle::new(env.clone())?;
    let mut view = ObservationView::new(&mut handle);
    let mut monitor = EnvEvaluator::new(env.clone(), acts.clone(), cfg.eval_episodes, cfg.seed);
    let p = train_inspiration_with(&mut view, acts, demos, cfg, &mut monitor)?;
    Ok((p, monitor.rows))
}

/// Environment steps per agent decision, rounded: the mean skill length for
/// macro actions, one otherwise.
pub fn decision_stride(acts: &ActionSet) -> usize {
    let lens: Vec<usize> = acts
        .iter()
        .map(|a| match a {
            ActionSpec::Macro { steps, .. } => steps.len(),
            _ => 1,
        })
        .collect();
    let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
    (mean.round() as usize).max(1)
}

/// Expert transitions at the agent's time scale, so the classifier cannot
/// separate the two by step size alone.
fn expert_pool(demos: &[ExpertTrajectory], frame: usize, k: usize, stride: usize) -> Result<Vec<Transition>> {
    if demos.is_empty() {
        return invalid("at least one demonstration is required");
    }
    let mut pool = Vec::new();
    for d in demos {
        if d.dim() != frame {
            return invalid(format!("demonstration states have {} entries, environment has {frame}", d.dim()));
        }
        pool.extend(d.strided_transitions(k, stride)?);
    }
    Ok(pool)
}

/// The learning loop proper. It sees the environment only through a view
/// without the reward channel; rewards come from the transition classifier.
pub fn train_inspiration_with(
    view: &mut ObservationView<'_>,
    acts: &ActionSet,
    demos: &[ExpertTrajectory],
    cfg: &TrainConfig,
    monitor: &mut dyn Monitor,
) -> Result<ModelParams> {
    cfg.validate()?;
    view.check_actions(acts)?;
    let frame = view.obs_dim();
    let k = cfg.stack_k;
    let pool = expert_pool(demos, frame, k, decision_stride(acts))?;
    let layout = ModelLayout::new(frame * k, cfg.hidden.clone(), PolicyHead::Categorical { n_actions: acts.len() }, cfg.shared_trunk)?;
    let mut p = ModelParams::init(layout, cfg.seed);
    let mut g = GradAccumulator::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLING_STREAM);
    let mut buf = RolloutBuffer::new(cfg.rollout_len)?;
    let stacked = |s: StateVec| StateVec(s.0.repeat(k));
    let mut s = stacked(view.reset(cfg.seed));
    let mut total: u64 = 0;
    let mut next_eval = cfg.eval_every;

    while total < cfg.max_steps {
        buf.clear();
        while !buf.is_full() && total < cfg.max_steps {
            let (out, value) = p.policy_value(&s)?;
            let TakenAction::Discrete(a) = choose_action(&p, &out, false, &mut rng) else {
                unreachable!("categorical head")
            };
            let scores = score_all_actions(&p, view, &s, frame, acts)?;
            let r = reward(cfg.reward_mode, &scores, a)?;
            monitor.on_step(&scores, a, r);
            let obs = view.step(acts.get(a)?)?;
            total += obs.visited.len() as u64;
            let s_next = s.advance(&obs.next);
            buf.push(Record {
                s: s.clone(),
                action: TakenAction::Discrete(a),
                scores: Some(scores),
                value,
                reward: r,
                s_next: s_next.clone(),
                done: obs.done,
            })?;
            s = s_next;
            if obs.done {
                s = stacked(view.reset(cfg.seed));
                break;
            }
        }

        let bootstrap = if buf.ended() { 0.0 } else { p.policy_value(&s)?.1 };
        let (policy_loss, value_loss) = actor_critic_grads(&p, &mut g, &buf, bootstrap, cfg.gamma, cfg.entropy_coef)?;
        let mut classifier_loss = 0.0;
        for rec in buf.records() {
            let agent = Transition::new(rec.s.clone(), rec.s_next.clone())?;
            classifier_loss += accumulate_classifier_grad(&p, &mut g, &agent, Label::Agent)?;
            let expert = &pool[rng.random_range(0..pool.len())];
            classifier_loss += accumulate_classifier_grad(&p, &mut g, expert, Label::Expert)?;
        }
        let n = buf.len() as f64;
        classifier_loss /= 2.0 * n;
        g.scale(1.0 / n, 1.0 / n, 1.0 / (2.0 * n));
        apply_grads_clipped(&mut p, &mut g, cfg.learning_rate, cfg.max_grad_norm)?;

        let (mean_reward, reward_variance) = mean_var(&buf.rewards());
        let mut row = MetricsRow {
            total_steps: total,
            episode_return: f64::NAN,
            policy_loss,
            value_loss,
            classifier_loss,
            mean_reward,
            reward_variance,
            success_rate: f64::NAN,
        };
        if cfg.eval_every > 0 && (total >= next_eval || total >= cfg.max_steps) {
            while next_eval <= total {
                next_eval += cfg.eval_every;
            }
            if let Some(e) = monitor.evaluate(&p)? {
                row.episode_return = e.mean_return;
                row.success_rate = e.success_rate;
            }
        }
        log::debug!("inspiration step {total}: clf {classifier_loss:.4} reward {mean_reward:.3}");
        monitor.on_update(&row)?;
    }
    Ok(p)
}
