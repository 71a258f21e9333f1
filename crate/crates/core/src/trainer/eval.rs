use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::expert::{check_space, execute, policy_head};
use super::{choose_action, ActionSpace};
use crate::envs::{Env, EnvHandle};
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::types::StateVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Most probable action (mean for Gaussian policies).
    Greedy,
    /// Actions drawn from the policy.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_return: f64,
    pub success_rate: f64,
}

/// Runs `episodes` full episodes on a fresh environment and reports the task
/// return and the fraction that reached the goal. Policies whose input is a
/// stack of frames are fed stacked observations.
pub fn evaluate(
    p: &ModelParams,
    env: &Env,
    space: &ActionSpace,
    episodes: usize,
    seed: u64,
    mode: EvalMode,
) -> Result<Evaluation> {
    if episodes == 0 {
        return invalid("number of evaluation episodes must be positive");
    }
    check_space(env, space)?;
    let frame = env.obs_dim();
    let obs_dim = p.layout().obs_dim;
    if !obs_dim.is_multiple_of(frame) || p.layout().policy != policy_head(space)? {
        return invalid("parameters do not match the environment and action space");
    }
    let k = obs_dim / frame;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = EnvHandle::new(env.clone())?;
    let mut total_return = 0.0;
    let mut successes = 0usize;
    for ep in 0..episodes {
        let s0 = h.reset(seed.wrapping_add(ep as u64));
        let mut s = StateVec(s0.0.repeat(k));
        loop {
            let (out, _) = p.policy_value(&s)?;
            let action = choose_action(p, &out, mode == EvalMode::Greedy, &mut rng);
            let res = execute(&mut h, space, &action)?;
            total_return += res.task_reward;
            s = s.advance(&res.next);
            if res.done {
                successes += usize::from(res.reached_goal);
                break;
            }
        }
    }
    Ok(Evaluation {
        mean_return: total_return / episodes as f64,
        success_rate: successes as f64 / episodes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GRID_MOVES;
    use crate::model::init_params;
    use rand::Rng;

    /// Monte-Carlo success rate of a uniform random walk.
    fn random_walk_success(env: &Env, episodes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = EnvHandle::new(env.clone()).unwrap();
        let acts = env.primitive_actions().unwrap();
        let mut hits = 0;
        for _ in 0..episodes {
            h.reset(0);
            loop {
                let a = acts.get(rng.random_range(0..GRID_MOVES.len())).unwrap();
                let r = h.step(a).unwrap();
                if r.done {
                    hits += usize::from(r.reached_goal);
                    break;
                }
            }
        }
        hits as f64 / episodes as f64
    }

    #[test]
    fn untrained_sampled_policy_matches_random_walk() {
        let env = Env::preset("grid4").unwrap();
        let space = ActionSpace::Discrete(env.primitive_actions().unwrap());
        let p = init_params(3, 2, &[64, 64], 4, true).unwrap();
        let baseline = random_walk_success(&env, 4000, 1);
        let got = evaluate(&p, &env, &space, 4000, 2, EvalMode::Sampled).unwrap().success_rate;
        // binomial standard error at n = 4000 is under 0.008
        assert!((got - baseline).abs() < 0.04, "{got} vs {baseline}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let env = Env::preset("grid7").unwrap();
        let space = ActionSpace::Discrete(env.primitive_actions().unwrap());
        let p = init_params(5, 2, &[8], 4, true).unwrap();
        for mode in [EvalMode::Greedy, EvalMode::Sampled] {
            let a = evaluate(&p, &env, &space, 20, 9, mode).unwrap();
            let b = evaluate(&p, &env, &space, 20, 9, mode).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let env = Env::preset("grid7").unwrap();
        let space = ActionSpace::Discrete(env.primitive_actions().unwrap());
        let p = init_params(5, 2, &[8], 4, true).unwrap();
        assert!(evaluate(&p, &env, &space, 0, 0, EvalMode::Greedy).is_err());
        let wrong = init_params(5, 3, &[8], 4, true).unwrap();
        assert!(evaluate(&wrong, &env, &space, 1, 0, EvalMode::Greedy).is_err());
        let macros = ActionSpace::Discrete(env.macro_actions().unwrap());
        assert!(evaluate(&p, &env, &macros, 1, 0, EvalMode::Greedy).is_err());
    }

    #[test]
    fn stacked_policy_is_accepted() {
        let env = Env::preset("grid7").unwrap();
        let space = ActionSpace::Discrete(env.primitive_actions().unwrap());
        let p = init_params(5, 6, &[8], 4, true).unwrap();
        assert!(evaluate(&p, &env, &space, 2, 0, EvalMode::Sampled).is_ok());
    }
}
