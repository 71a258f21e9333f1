//! Classifier-derived rewards.
//!
//! Every action of the agent's vocabulary is scored by classifying the
//! transition it would cause (obtained through the environment's transition
//! oracle). The chosen action's reward is then its raw score, its normalized
//! rank among all actions, or its softmax weight.

use crate::envs::TransitionOracle;
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::types::{ActionSet, RewardMode, StateVec};

/// Per-action classifier scores, one per action id, each in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return invalid("score vector must be nonempty");
        }
        if let Some(bad) = scores.iter().find(|&&c| !(c > 0.0 && c < 1.0)) {
            return invalid(format!("score {bad} outside (0, 1)"));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn check(&self, a: usize) -> Result<()> {
        if a >= self.0.len() {
            return invalid(format!("action {a} out of range for {} scores", self.0.len()));
        }
        Ok(())
    }
}

/// Scores the transition each action would cause from the stacked state `s`.
///
/// `frame_dim` is the width of one raw frame; the oracle is queried with the
/// most recent frame and its answer is pushed onto the stack.
pub fn score_all_actions(
    p: &ModelParams,
    oracle: &impl TransitionOracle,
    s: &StateVec,
    frame_dim: usize,
    acts: &ActionSet,
) -> Result<ScoreVector> {
    if frame_dim == 0 || !s.len().is_multiple_of(frame_dim) {
        return invalid(format!("state of width {} is not a stack of {frame_dim}-frames", s.len()));
    }
    let current = StateVec(s.last_frame(frame_dim).to_vec());
    let candidates = acts
        .iter()
        .map(|a| Ok(s.advance(&oracle.peek(&current, a)?)))
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(p.classify_candidates(s, &candidates)?)
}

/// The chosen action's raw classification score.
pub fn basic_reward(c: &ScoreVector, a: usize) -> Result<f64> {
    c.check(a)?;
    Ok(c.0[a])
}

/// Fraction of actions whose score does not exceed the chosen action's.
pub fn pref_reward(c: &ScoreVector, a: usize) -> Result<f64> {
    c.check(a)?;
    let mine = c.0[a];
    let at_most = c.0.iter().filter(|&&x| x <= mine).count();
    Ok(at_most as f64 / c.0.len() as f64)
}

/// Softmax weight of the chosen action's score.
pub fn soft_pref_reward(c: &ScoreVector, a: usize) -> Result<f64> {
    c.check(a)?;
    let m = c.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = c.0.iter().map(|x| (x - m).exp()).sum();
    Ok((c.0[a] - m).exp() / total)
}

pub fn reward(mode: RewardMode, c: &ScoreVector, a: usize) -> Result<f64> {
    match mode {
        RewardMode::Basic => basic_reward(c, a),
        RewardMode::Preferential => pref_reward(c, a),
        RewardMode::SoftPreferential => soft_pref_reward(c, a),
    }
}
