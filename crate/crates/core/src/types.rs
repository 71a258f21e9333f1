//! Domain types shared across the crate: observations, actions, transitions,
//! demonstrations and run configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// A real-valued observation, possibly a stack of the last `k` raw frames.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(pub Vec<f64>);

impl StateVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("state entry {i} is not finite"));
        }
        Ok(Self(values))
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

    /// The most recent raw frame of a stacked observation.
    pub fn last_frame(&self, frame_dim: usize) -> &[f64] {
        &self.0[self.0.len() - frame_dim..]
    }

    /// Drops the oldest frame and appends `next`, keeping the stack depth.
    pub fn advance(&self, next: &StateVec) -> StateVec {
        let d = next.len();
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.0[d..]);
        out.extend_from_slice(&next.0);
        StateVec(out)
    }
}

impl From<Vec<f64>> for StateVec {
    fn from(v: Vec<f64>) -> Self {
        StateVec(v)
    }
}

/// Concatenates the last `k` observations of `history`, left-padding with the
/// earliest observation when fewer than `k` are available.
pub fn stack_states(history: &[StateVec], k: usize) -> Result<StateVec> {
    let Some(first) = history.first() else {
        return invalid("history must be nonempty");
    };
    if k == 0 {
        return invalid("stack depth must be positive");
    }
    let dim = first.len();
    if let Some(bad) = history.iter().find(|s| s.len() != dim) {
        return invalid(format!(
            "history entries disagree on dimension ({} vs {dim})",
            bad.len()
        ));
    }
    let mut out = Vec::with_capacity(dim * k);
    let pad = k.saturating_sub(history.len());
    for _ in 0..pad {
        out.extend_from_slice(&first.0);
    }
    for s in &history[history.len() - (k - pad)..] {
        out.extend_from_slice(&s.0);
    }
    Ok(StateVec(out))
}

/// One executable action of an agent's vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpec {
    Primitive { id: usize },
    /// A skill: primitives executed atomically, in order.
    Macro { id: usize, steps: Vec<usize> },
    /// A discretized continuous action.
    Centroid { id: usize, vector: Vec<f64> },
}

impl ActionSpec {
    pub fn id(&self) -> usize {
        match self {
            ActionSpec::Primitive { id } | ActionSpec::Macro { id, .. } | ActionSpec::Centroid { id, .. } => *id,
        }
    }

    fn kind(&self) -> ActionKind {
        match self {
            ActionSpec::Primitive { .. } => ActionKind::Primitive,
            ActionSpec::Macro { .. } => ActionKind::Macro,
            ActionSpec::Centroid { .. } => ActionKind::Centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Primitive,
    Macro,
    Centroid,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Primitive => "primitive",
            ActionKind::Macro => "macro",
            ActionKind::Centroid => "centroid",
        })
    }
}

/// A nonempty, homogeneous action vocabulary with ids `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    actions: Vec<ActionSpec>,
}

impl ActionSet {
    pub fn new(actions: Vec<ActionSpec>) -> Result<Self> {
        let Some(first) = actions.first() else {
            return invalid("action set must be nonempty");
        };
        let kind = first.kind();
        for (i, a) in actions.iter().enumerate() {
            if a.id() != i {
                return invalid(format!("action at position {i} has id {}", a.id()));
            }
            if a.kind() != kind {
                return invalid(format!("mixed action kinds: {} and {}", kind, a.kind()));
            }
            match a {
                ActionSpec::Macro { steps, .. } if steps.is_empty() => {
                    return invalid(format!("macro {i} has no steps"));
                }
                ActionSpec::Centroid { vector, .. } => {
                    if let ActionSpec::Centroid { vector: v0, .. } = first {
                        if v0.len() != vector.len() {
                            return invalid("centroid vectors disagree on dimension");
                        }
                    }
                    if vector.iter().any(|x| !x.is_finite()) {
                        return invalid(format!("centroid {i} is not finite"));
                    }
                }
                _ => {}
            }
        }
        Ok(Self { actions })
    }

    pub fn primitives(n: usize) -> Result<Self> {
        Self::new((0..n).map(|id| ActionSpec::Primitive { id }).collect())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn kind(&self) -> ActionKind {
        self.actions[0].kind()
    }

    pub fn get(&self, id: usize) -> Result<&ActionSpec> {
        self.actions
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown action id {id} (|A| = {})", self.len())))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ActionSpec> {
        self.actions.iter()
    }
}

/// A state transition `s -> s_next`, the classifier's unit of input.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: StateVec,
    pub s_next: StateVec,
}

impl Transition {
    pub fn new(s: StateVec, s_next: StateVec) -> Result<Self> {
        if s.len() != s_next.len() {
            return invalid(format!(
                "transition endpoints differ in dimension ({} vs {})",
                s.len(),
                s_next.len()
            ));
        }
        Ok(Self { s, s_next })
    }
}

/// A state-only demonstration: visited states in order, no actions, no rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertTrajectory {
    states: Vec<StateVec>,
}

impl ExpertTrajectory {
    pub fn new(states: Vec<StateVec>) -> Result<Self> {
        if states.len() < 2 {
            return invalid(format!(
                "trajectory needs at least 2 states, got {}",
                states.len()
            ));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return invalid("trajectory states disagree on dimension");
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Consecutive stacked transitions, stacking each prefix with depth `k`.
    pub fn transitions(&self, k: usize) -> Result<Vec<Transition>> {
        self.strided_transitions(k, 1)
    }

    /// Transitions `s_t -> s_{t + stride}` from every start `t`, the target
    /// clipped to the final state. Stacked frames are `stride` states apart;
    /// near the start, left padding repeats the trajectory's first frame.
    pub fn strided_transitions(&self, k: usize, stride: usize) -> Result<Vec<Transition>> {
        if k == 0 || stride == 0 {
            return invalid("stack depth and stride must be positive");
        }
        let last = self.states.len() - 1;
        (0..last)
            .map(|t| {
                let history: Vec<StateVec> = (0..k)
                    .rev()
                    .map(|j| self.states[t.saturating_sub(j * stride)].clone())
                    .collect();
                let s = stack_states(&history, k)?;
                let s_next = s.advance(&self.states[(t + stride).min(last)]);
                Ok(Transition { s, s_next })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardMode {
    Basic,
    #[default]
    Preferential,
    SoftPreferential,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Basic => "basic",
            RewardMode::Preferential => "pref",
            RewardMode::SoftPreferential => "soft",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(RewardMode::Basic),
            "pref" | "preferential" => Ok(RewardMode::Preferential),
            "soft" | "soft-pref" | "softpreferential" => Ok(RewardMode::SoftPreferential),
            other => invalid(format!("unknown reward mode '{other}' (basic|pref|soft)")),
        }
    }
}

/// Run configuration for both training loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub rollout_len: usize,
    pub stack_k: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub reward_mode: RewardMode,
    pub shared_trunk: bool,
    pub max_steps: u64,
    pub seed: u64,
    pub n_demos: usize,
    pub hidden: Vec<usize>,
    /// Global gradient-norm cap applied before each update; 0 disables it.
    pub max_grad_norm: f64,
    /// Evaluate every this many steps when an evaluator is attached; 0 disables it.
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            rollout_len: 20,
            stack_k: 1,
            learning_rate: 7e-4,
            entropy_coef: 0.01,
            reward_mode: RewardMode::Preferential,
            shared_trunk: true,
            max_steps: 100_000,
            seed: 0,
            n_demos: 10,
            hidden: vec![64, 64],
            max_grad_norm: 0.0,
            eval_every: 0,
            eval_episodes: 1,
        }
    }
}

impl TrainConfig {
    /// Task-reward training that converges within the default step budget on
    /// the built-in environments.
    pub fn expert(continuous: bool) -> Self {
        if continuous {
            Self {
                gamma: 0.95,
                learning_rate: 0.05,
                entropy_coef: 0.0,
                max_steps: 200_000,
                ..Self::default()
            }
        } else {
            Self {
                gamma: 0.9,
                learning_rate: 0.3,
                entropy_coef: 0.001,
                max_steps: 100_000,
                ..Self::default()
            }
        }
    }

    /// Learning from demonstrations. Classifier rewards are positive on every
    /// step while reaching the goal ends the episode, so any discount that
    /// values the future makes lingering worth more than finishing; a zero
    /// discount ranks actions by the immediate reward alone.
    pub fn inspiration() -> Self {
        Self {
            gamma: 0.0,
            learning_rate: 0.1,
            max_steps: 200_000,
            eval_every: 10_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return invalid(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.rollout_len == 0 {
            return invalid("rollout_len must be at least 1");
        }
        if self.stack_k == 0 {
            return invalid("stack_k must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return invalid("entropy_coef must be nonnegative");
        }
        if self.max_grad_norm.is_nan() || self.max_grad_norm < 0.0 {
            return invalid("max_grad_norm must be nonnegative");
        }
        if self.max_steps == 0 {
            return invalid("max_steps must be positive");
        }
        if self.n_demos == 0 {
            return invalid("n_demos must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return invalid("hidden widths must be nonempty and positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVec {
        StateVec(v.to_vec())
    }

    #[test]
    fn stack_identity_for_k1() {
        let x = sv(&[0.25, -1.0]);
        assert_eq!(stack_states(std::slice::from_ref(&x), 1).unwrap(), x);
    }

    #[test]
    fn stack_pads_with_first_frame() {
        let x0 = sv(&[1.0, 2.0]);
        let s = stack_states(&[x0], 3).unwrap();
        assert_eq!(s.0, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn stack_four_frames() {
        let hist: Vec<_> = (0..6).map(|i| sv(&[i as f64])).collect();
        let s = stack_states(&hist, 4).unwrap();
        assert_eq!(s.0, vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn stack_rejects_ragged_history() {
        let err = stack_states(&[sv(&[1.0]), sv(&[1.0, 2.0])], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(stack_states(&[], 2).is_err());
    }

    #[test]
    fn advance_matches_restacking() {
        let hist: Vec<_> = (0..2).map(|i| sv(&[i as f64, -(i as f64)])).collect();
        let s = stack_states(&hist, 3).unwrap();
        let next = sv(&[7.0, -7.0]);
        let mut longer = hist.clone();
        longer.push(next.clone());
        assert_eq!(s.advance(&next), stack_states(&longer, 3).unwrap());
    }

    #[test]
    fn action_set_invariants() {
        assert!(ActionSet::new(vec![]).is_err());
        assert!(ActionSet::new(vec![ActionSpec::Primitive { id: 1 }]).is_err());
        assert!(ActionSet::new(vec![
            ActionSpec::Primitive { id: 0 },
            ActionSpec::Macro { id: 1, steps: vec![0] }
        ])
        .is_err());
        assert!(ActionSet::new(vec![ActionSpec::Macro { id: 0, steps: vec![] }]).is_err());
        assert!(ActionSet::new(vec![
            ActionSpec::Centroid { id: 0, vector: vec![0.0, 1.0] },
            ActionSpec::Centroid { id: 1, vector: vec![0.0] },
        ])
        .is_err());
        let set = ActionSet::primitives(4).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.get(4).is_err());
    }

    #[test]
    fn trajectory_needs_two_states() {
        assert!(ExpertTrajectory::new(vec![sv(&[0.0])]).is_err());
        assert!(ExpertTrajectory::new(vec![sv(&[0.0]), sv(&[0.0, 1.0])]).is_err());
        let t = ExpertTrajectory::new(vec![sv(&[0.0]), sv(&[1.0]), sv(&[2.0])]).unwrap();
        let tr = t.transitions(2).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[0].s.0, vec![0.0, 0.0]);
        assert_eq!(tr[0].s_next.0, vec![0.0, 1.0]);
        assert_eq!(tr[1].s_next.0, vec![1.0, 2.0]);
    }

    #[test]
    fn strided_transitions_skip_ahead() {
        let t = ExpertTrajectory::new((0..6).map(|i| sv(&[i as f64])).collect()).unwrap();
        assert_eq!(t.strided_transitions(1, 1).unwrap(), t.transitions(1).unwrap());
        assert_eq!(t.strided_transitions(3, 1).unwrap(), t.transitions(3).unwrap());
        let tr = t.strided_transitions(1, 2).unwrap();
        let pairs: Vec<(f64, f64)> = tr.iter().map(|x| (x.s.0[0], x.s_next.0[0])).collect();
        assert_eq!(pairs, vec![(0.0, 2.0), (1.0, 3.0), (2.0, 4.0), (3.0, 5.0), (4.0, 5.0)]);
        let tr = t.strided_transitions(2, 2).unwrap();
        assert_eq!(tr[3].s.0, vec![1.0, 3.0]);
        assert_eq!(tr[3].s_next.0, vec![3.0, 5.0]);
        assert_eq!(tr[0].s.0, vec![0.0, 0.0]);
        assert!(t.strided_transitions(1, 0).is_err());
    }

    #[test]
    fn presets_are_valid() {
        for c in [TrainConfig::expert(true), TrainConfig::expert(false), TrainConfig::inspiration()] {
            assert!(c.validate().is_ok());
        }
        assert_eq!(TrainConfig::inspiration().gamma, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { gamma: 1.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { rollout_len: 0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn stack_length_and_tail(len in 1usize..10, k in 1usize..6, dim in 1usize..4) {
            let hist: Vec<StateVec> = (0..len)
                .map(|i| StateVec((0..dim).map(|j| (i * 10 + j) as f64).collect()))
                .collect();
            let s = stack_states(&hist, k).unwrap();
            prop_assert_eq!(s.len(), dim * k);
            prop_assert_eq!(s.last_frame(dim), hist.last().unwrap().as_slice());
        }
    }
}
