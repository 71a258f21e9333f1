//! Deterministic desk-scale environments and the transition oracle (`peek`)
//! used to score actions the agent did not take.

use std::collections::BTreeSet;

use crate::error::{invalid, Result};
use crate::types::{ActionKind, ActionSet, ActionSpec, StateVec};

/// Primitive moves of the grid: up, down, left, right.
pub const GRID_MOVES: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// One primitive unit of control.
#[derive(Debug, Clone, Copy)]
pub enum Control<'a> {
    Primitive(usize),
    Continuous(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub width: i64,
    pub height: i64,
    pub start: (i64, i64),
    pub goal: (i64, i64),
    pub walls: BTreeSet<(i64, i64)>,
    pub max_episode_steps: usize,
    /// Skills offered to macro-action agents, as primitive id sequences.
    pub macros: Vec<Vec<usize>>,
}

impl GridWorld {
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 {
            return invalid("grid dimensions must be positive");
        }
        for (name, c) in [("start", self.start), ("goal", self.goal)] {
            if !self.in_bounds(c) {
                return invalid(format!("{name} {c:?} outside the grid"));
            }
            if self.walls.contains(&c) {
                return invalid(format!("{name} {c:?} is a wall"));
            }
        }
        if self.start == self.goal {
            return invalid("start and goal must differ");
        }
        if self.max_episode_steps == 0 {
            return invalid("max_episode_steps must be positive");
        }
        for m in &self.macros {
            if m.is_empty() || m.iter().any(|&p| p >= GRID_MOVES.len()) {
                return invalid(format!("invalid macro {m:?}"));
            }
        }
        Ok(())
    }

    fn in_bounds(&self, (x, y): (i64, i64)) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    fn scale(&self) -> (f64, f64) {
        (((self.width - 1).max(1)) as f64, ((self.height - 1).max(1)) as f64)
    }

    pub fn encode(&self, (x, y): (i64, i64)) -> StateVec {
        let (sx, sy) = self.scale();
        StateVec(vec![x as f64 / sx, y as f64 / sy])
    }

    pub fn decode(&self, s: &[f64]) -> Result<(i64, i64)> {
        if s.len() != 2 {
            return invalid(format!("grid state needs 2 entries, got {}", s.len()));
        }
        let (sx, sy) = self.scale();
        let fx = s[0] * sx;
        let fy = s[1] * sy;
        let cell = (fx.round() as i64, fy.round() as i64);
        if (fx - cell.0 as f64).abs() > 1e-9 || (fy - cell.1 as f64).abs() > 1e-9 {
            return invalid(format!("{s:?} is not a grid cell"));
        }
        if !self.in_bounds(cell) || self.walls.contains(&cell) {
            return invalid(format!("{cell:?} is not a free cell"));
        }
        Ok(cell)
    }

    pub fn free_cells(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.walls.contains(&(x, y)) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    fn move_from(&self, (x, y): (i64, i64), primitive: usize) -> (i64, i64) {
        let (dx, dy) = GRID_MOVES[primitive];
        let next = (x + dx, y + dy);
        if self.in_bounds(next) && !self.walls.contains(&next) {
            next
        } else {
            (x, y)
        }
    }
}

/// A point mass accelerated in the plane toward a circular goal region.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub start: [f64; 2],
    pub dt: f64,
    pub drag: f64,
    /// Arena is the square `[-arena, arena]^2`.
    pub arena: f64,
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    /// Accelerations are clamped componentwise to `[-action_bound, action_bound]`.
    pub action_bound: f64,
    pub action_penalty: f64,
    pub max_episode_steps: usize,
}

impl PointMass {
    pub fn validate(&self) -> Result<()> {
        if self.dt.is_nan() || self.dt <= 0.0 || !(0.0..1.0).contains(&self.drag) {
            return invalid("point mass needs dt > 0 and drag in [0, 1)");
        }
        if !(self.arena > 0.0 && self.goal_radius > 0.0 && self.action_bound > 0.0) {
            return invalid("arena, goal radius and action bound must be positive");
        }
        if self.max_episode_steps == 0 {
            return invalid("max_episode_steps must be positive");
        }
        if self.in_goal(self.start) {
            return invalid("start lies inside the goal region");
        }
        Ok(())
    }

    pub fn in_goal(&self, pos: [f64; 2]) -> bool {
        let dx = pos[0] - self.goal_center[0];
        let dy = pos[1] - self.goal_center[1];
        dx * dx + dy * dy <= self.goal_radius * self.goal_radius
    }

    /// One integration step: position advances with the old velocity, the
    /// velocity decays and is accelerated, then the position is clamped to
    /// the arena (zeroing the velocity component that hit the wall).
    pub fn integrate(&self, s: [f64; 4], accel: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..2 {
            let a = accel[i].clamp(-self.action_bound, self.action_bound);
            let mut pos = s[i] + self.dt * s[2 + i];
            let mut vel = (1.0 - self.drag) * s[2 + i] + self.dt * a;
            if pos > self.arena {
                pos = self.arena;
                vel = 0.0;
            } else if pos < -self.arena {
                pos = -self.arena;
                vel = 0.0;
            }
            out[i] = pos;
            out[2 + i] = vel;
        }
        out
    }

    fn decode(&self, s: &[f64]) -> Result<[f64; 4]> {
        if s.len() != 4 {
            return invalid(format!("point-mass state needs 4 entries, got {}", s.len()));
        }
        if s.iter().any(|v| !v.is_finite()) || s[0].abs() > self.arena || s[1].abs() > self.arena {
            return invalid(format!("{s:?} is not a point-mass state"));
        }
        Ok([s[0], s[1], s[2], s[3]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Grid(GridWorld),
    Point(PointMass),
}

/// Result of one primitive control applied to an encoded state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    pub next: StateVec,
    pub at_goal: bool,
    pub reward: f64,
}

impl Env {
    /// Built-in environments: `grid7`, `grid4`, `point`.
    pub fn preset(name: &str) -> Result<Env> {
        let env = match name {
            "grid7" => Env::Grid(GridWorld {
                width: 7,
                height: 7,
                start: (0, 0),
                goal: (6, 6),
                walls: [(0, 3), (1, 3), (2, 3), (3, 3), (4, 3)].into_iter().collect(),
                max_episode_steps: 50,
                macros: default_grid_macros(),
            }),
            "grid4" => Env::Grid(GridWorld {
                width: 4,
                height: 4,
                start: (0, 0),
                goal: (3, 3),
                walls: [(1, 1), (2, 2), (1, 3)].into_iter().collect(),
                max_episode_steps: 20,
                macros: default_grid_macros(),
            }),
            "point" => Env::Point(PointMass {
                start: [-0.5, -0.5],
                dt: 0.1,
                drag: 0.1,
                arena: 1.0,
                goal_center: [0.5, 0.5],
                goal_radius: 0.2,
                action_bound: 1.0,
                action_penalty: 0.01,
                max_episode_steps: 100,
            }),
            other => return invalid(format!("unknown environment preset '{other}' (grid7|grid4|point)")),
        };
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Env::Grid(g) => g.validate(),
            Env::Point(p) => p.validate(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Env::Grid(_) => 2,
            Env::Point(_) => 4,
        }
    }

    pub fn max_episode_steps(&self) -> usize {
        match self {
            Env::Grid(g) => g.max_episode_steps,
            Env::Point(p) => p.max_episode_steps,
        }
    }

    pub fn initial_state(&self) -> StateVec {
        match self {
            Env::Grid(g) => g.encode(g.start),
            Env::Point(p) => StateVec(vec![p.start[0], p.start[1], 0.0, 0.0]),
        }
    }

    /// Dimension of continuous controls, or `None` for discrete environments.
    pub fn continuous_dim(&self) -> Option<usize> {
        match self {
            Env::Grid(_) => None,
            Env::Point(_) => Some(2),
        }
    }

    pub fn is_goal(&self, s: &StateVec) -> Result<bool> {
        match self {
            Env::Grid(g) => Ok(g.decode(s.as_slice())? == g.goal),
            Env::Point(p) => {
                let st = p.decode(s.as_slice())?;
                Ok(p.in_goal([st[0], st[1]]))
            }
        }
    }

    /// Applies one primitive control to `s` without touching any episode state.
    pub fn apply(&self, s: &StateVec, c: Control<'_>) -> Result<ControlOutcome> {
        match (self, c) {
            (Env::Grid(g), Control::Primitive(id)) => {
                if id >= GRID_MOVES.len() {
                    return invalid(format!("unknown grid primitive {id}"));
                }
                let next = g.move_from(g.decode(s.as_slice())?, id);
                let at_goal = next == g.goal;
                Ok(ControlOutcome {
                    next: g.encode(next),
                    at_goal,
                    reward: if at_goal { 1.0 } else { 0.0 },
                })
            }
            (Env::Point(p), Control::Continuous(a)) => {
                if a.len() != 2 || a.iter().any(|x| !x.is_finite()) {
                    return invalid("point-mass control must be 2 finite reals");
                }
                let next = p.integrate(p.decode(s.as_slice())?, a);
                let at_goal = p.in_goal([next[0], next[1]]);
                let reward = if at_goal {
                    1.0
                } else {
                    let clamped: f64 = a.iter().map(|x| x.clamp(-p.action_bound, p.action_bound).powi(2)).sum();
                    -p.action_penalty * clamped
                };
                Ok(ControlOutcome {
                    next: StateVec(next.to_vec()),
                    at_goal,
                    reward,
                })
            }
            (Env::Grid(_), Control::Continuous(_)) => invalid("grid world takes discrete primitives"),
            (Env::Point(_), Control::Primitive(_)) => invalid("point mass takes continuous controls"),
        }
    }

    /// Expands an action into the primitive controls it executes.
    pub fn controls<'a>(&self, a: &'a ActionSpec) -> Result<Vec<Control<'a>>> {
        match (self, a) {
            (Env::Grid(_), ActionSpec::Primitive { id }) => Ok(vec![Control::Primitive(*id)]),
            (Env::Grid(_), ActionSpec::Macro { steps, .. }) => {
                if steps.is_empty() {
                    return invalid("macro has no steps");
                }
                Ok(steps.iter().map(|&p| Control::Primitive(p)).collect())
            }
            (Env::Point(_), ActionSpec::Centroid { vector, .. }) => Ok(vec![Control::Continuous(vector)]),
            _ => invalid(format!("action {a:?} is not executable in this environment")),
        }
    }

    /// The state reached from `s` under `a`, stopping early at the goal.
    /// Episode-length caps are not applied.
    pub fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        let mut cur = s.clone();
        for c in self.controls(a)? {
            let out = self.apply(&cur, c)?;
            cur = out.next;
            if out.at_goal {
                break;
            }
        }
        Ok(cur)
    }

    /// Checks every action of `acts` is executable here.
    pub fn check_actions(&self, acts: &ActionSet) -> Result<()> {
        let s = self.initial_state();
        for a in acts.iter() {
            for c in self.controls(a)? {
                self.apply(&s, c)?;
            }
        }
        Ok(())
    }

    /// The grid's primitive action set.
    pub fn primitive_actions(&self) -> Result<ActionSet> {
        match self {
            Env::Grid(_) => ActionSet::primitives(GRID_MOVES.len()),
            Env::Point(_) => invalid("point mass has no primitive actions"),
        }
    }

    /// The grid's configured skill set as macro actions.
    pub fn macro_actions(&self) -> Result<ActionSet> {
        match self {
            Env::Grid(g) => make_macro_actionset(&self.primitive_actions()?, &g.macros),
            Env::Point(_) => invalid("point mass has no macro actions"),
        }
    }
}

/// Straight two-step skills plus the two mixed diagonals toward the far corner.
pub fn default_grid_macros() -> Vec<Vec<usize>> {
    vec![
        vec![UP, UP],
        vec![DOWN, DOWN],
        vec![LEFT, LEFT],
        vec![RIGHT, RIGHT],
        vec![RIGHT, DOWN],
        vec![DOWN, RIGHT],
    ]
}

/// Builds skills from primitive ids of `base`.
pub fn make_macro_actionset(base: &ActionSet, macros: &[Vec<usize>]) -> Result<ActionSet> {
    if base.kind() != ActionKind::Primitive {
        return invalid("macro skills must be built from a primitive action set");
    }
    let mut out = Vec::with_capacity(macros.len());
    for (id, steps) in macros.iter().enumerate() {
        if steps.is_empty() {
            return invalid(format!("macro {id} is empty"));
        }
        for &p in steps {
            base.get(p)?;
        }
        out.push(ActionSpec::Macro { id, steps: steps.clone() });
    }
    ActionSet::new(out)
}

/// Discrete actions that execute the given continuous vectors.
pub fn make_centroid_actionset(centroids: &[Vec<f64>]) -> Result<ActionSet> {
    let Some(first) = centroids.first() else {
        return invalid("at least one centroid is required");
    };
    if centroids.iter().any(|c| c.len() != first.len()) {
        return invalid("centroids disagree on dimension");
    }
    ActionSet::new(
        centroids
            .iter()
            .enumerate()
            .map(|(id, v)| ActionSpec::Centroid { id, vector: v.clone() })
            .collect(),
    )
}

/// Side-effect-free next-state queries.
pub trait TransitionOracle {
    fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec>;
}

impl TransitionOracle for Env {
    fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        Env::peek(self, s, a)
    }
}

impl TransitionOracle for EnvHandle {
    fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        self.env.peek(s, a)
    }
}

impl TransitionOracle for ObservationView<'_> {
    fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        self.handle.peek(s, a)
    }
}

/// What one environment step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: StateVec,
    pub done: bool,
    pub task_reward: f64,
    /// Every state passed through, ending with `next`; longer than one for macros.
    pub visited: Vec<StateVec>,
    /// True when the episode ended at the goal rather than the step cap.
    pub reached_goal: bool,
}

/// An environment instance with its current state and step counter.
#[derive(Debug, Clone)]
pub struct EnvHandle {
    env: Env,
    state: StateVec,
    steps: usize,
    done: bool,
}

impl EnvHandle {
    pub fn new(env: Env) -> Result<Self> {
        env.validate()?;
        let state = env.initial_state();
        Ok(Self {
            env,
            state,
            steps: 0,
            done: false,
        })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn state(&self) -> &StateVec {
        &self.state
    }

    /// True once the episode has reached the goal or the step cap.
    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn obs_dim(&self) -> usize {
        self.env.obs_dim()
    }

    /// Starts a new episode. Dynamics are deterministic, so the seed does not
    /// change the initial state.
    pub fn reset(&mut self, _seed: u64) -> StateVec {
        self.state = self.env.initial_state();
        self.steps = 0;
        self.done = false;
        self.state.clone()
    }

    /// Places the episode at an arbitrary valid state with a fresh step counter.
    pub fn restore(&mut self, s: &StateVec) -> Result<()> {
        self.env.is_goal(s)?;
        self.state = s.clone();
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    pub fn step(&mut self, a: &ActionSpec) -> Result<StepResult> {
        let controls = self.env.controls(a)?;
        self.run(&controls)
    }

    /// Executes a raw continuous control (point mass only).
    pub fn step_continuous(&mut self, a: &[f64]) -> Result<StepResult> {
        self.run(&[Control::Continuous(a)])
    }

    fn run(&mut self, controls: &[Control<'_>]) -> Result<StepResult> {
        if self.done {
            return invalid("episode has ended; reset first");
        }
        let mut visited = Vec::with_capacity(controls.len());
        let mut task_reward = 0.0;
        let mut reached_goal = false;
        let mut state = self.state.clone();
        let mut steps = self.steps;
        for c in controls {
            let out = self.env.apply(&state, *c)?;
            state = out.next;
            task_reward += out.reward;
            steps += 1;
            visited.push(state.clone());
            if out.at_goal {
                reached_goal = true;
                break;
            }
            if steps >= self.env.max_episode_steps() {
                break;
            }
        }
        // commit only once the whole sequence has executed
        self.state = state;
        self.steps = steps;
        self.done = reached_goal || steps >= self.env.max_episode_steps();
        Ok(StepResult {
            next: self.state.clone(),
            done: self.done,
            task_reward,
            visited,
            reached_goal,
        })
    }

    pub fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        self.env.peek(s, a)
    }
}

/// What the inspiration learner sees of a step: states and termination only.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub next: StateVec,
    pub done: bool,
    pub visited: Vec<StateVec>,
}

/// A view of an environment without its reward channel.
pub struct ObservationView<'a> {
    handle: &'a mut EnvHandle,
}

impl<'a> ObservationView<'a> {
    pub fn new(handle: &'a mut EnvHandle) -> Self {
        Self { handle }
    }

    pub fn obs_dim(&self) -> usize {
        self.handle.obs_dim()
    }

    pub fn reset(&mut self, seed: u64) -> StateVec {
        self.handle.reset(seed)
    }

    pub fn step(&mut self, a: &ActionSpec) -> Result<Observed> {
        let StepResult { next, done, visited, .. } = self.handle.step(a)?;
        Ok(Observed { next, done, visited })
    }

    pub fn peek(&self, s: &StateVec, a: &ActionSpec) -> Result<StateVec> {
        self.handle.peek(s, a)
    }

    pub fn check_actions(&self, acts: &ActionSet) -> Result<()> {
        self.handle.env().check_actions(acts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashSet, VecDeque};

    fn open_grid(w: i64, h: i64) -> Env {
        Env::Grid(GridWorld {
            width: w,
            height: h,
            start: (0, 0),
            goal: (w - 1, h - 1),
            walls: BTreeSet::new(),
            max_episode_steps: 100,
            macros: default_grid_macros(),
        })
    }

    #[test]
    fn grid_reset_is_normalized_start() {
        let mut h = EnvHandle::new(Env::preset("grid7").unwrap()).unwrap();
        assert_eq!(h.reset(0).0, vec![0.0, 0.0]);
        let a = h.reset(5);
        assert_eq!(a, h.reset(5));
    }

    #[test]
    fn point_reset_has_zero_velocity() {
        let mut h = EnvHandle::new(Env::preset("point").unwrap()).unwrap();
        assert_eq!(h.reset(1).0, vec![-0.5, -0.5, 0.0, 0.0]);
    }

    #[test]
    fn wall_blocks_move() {
        let mut h = EnvHandle::new(Env::preset("grid7").unwrap()).unwrap();
        let Env::Grid(g) = h.env().clone() else { unreachable!() };
        h.restore(&g.encode((0, 2))).unwrap();
        let r = h.step(&ActionSpec::Primitive { id: DOWN }).unwrap();
        assert_eq!(r.next, g.encode((0, 2)));
        assert!(!r.done);
        assert_eq!(r.task_reward, 0.0);
    }

    #[test]
    fn macro_composes_primitives() {
        let env = open_grid(5, 5);
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let mut h = EnvHandle::new(env).unwrap();
        let r = h.step(&ActionSpec::Macro { id: 0, steps: vec![RIGHT, RIGHT] }).unwrap();
        assert_eq!(r.next, g.encode((2, 0)));
        assert_eq!(r.visited, vec![g.encode((1, 0)), g.encode((2, 0))]);
        assert_eq!(h.steps(), 2);
    }

    #[test]
    fn macro_truncates_at_goal() {
        let env = open_grid(3, 1);
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let mut h = EnvHandle::new(env).unwrap();
        h.restore(&g.encode((1, 0))).unwrap();
        let r = h.step(&ActionSpec::Macro { id: 0, steps: vec![RIGHT, LEFT, LEFT] }).unwrap();
        assert!(r.done && r.reached_goal);
        assert_eq!(r.next, g.encode((2, 0)));
        assert_eq!(r.visited.len(), 1);
        assert_eq!(r.task_reward, 1.0);
        assert!(h.step(&ActionSpec::Primitive { id: LEFT }).is_err());
    }

    #[test]
    fn episode_cap_ends_episode() {
        let mut env = open_grid(4, 4);
        if let Env::Grid(g) = &mut env {
            g.max_episode_steps = 3;
        }
        let mut h = EnvHandle::new(env).unwrap();
        for i in 0..3 {
            let r = h.step(&ActionSpec::Primitive { id: UP }).unwrap();
            assert_eq!(r.done, i == 2);
            assert!(!r.reached_goal);
        }
        assert!(h.step(&ActionSpec::Primitive { id: UP }).is_err());
    }

    #[test]
    fn unknown_action_is_rejected() {
        let mut h = EnvHandle::new(Env::preset("grid4").unwrap()).unwrap();
        assert!(h.step(&ActionSpec::Primitive { id: 4 }).is_err());
        assert!(h.step(&ActionSpec::Centroid { id: 0, vector: vec![0.0, 1.0] }).is_err());
        assert_eq!(h.steps(), 0);
        let mut p = EnvHandle::new(Env::preset("point").unwrap()).unwrap();
        assert!(p.step(&ActionSpec::Primitive { id: 0 }).is_err());
        assert!(p.step_continuous(&[1.0]).is_err());
    }

    #[test]
    fn point_mass_matches_closed_form() {
        let env = Env::preset("point").unwrap();
        let Env::Point(pm) = env.clone() else { unreachable!() };
        let mut h = EnvHandle::new(env).unwrap();
        let a = [0.3, 0.7];
        let (dt, d) = (pm.dt, pm.drag);
        for n in 1..=15usize {
            let r = h.step_continuous(&a).unwrap();
            // v_n = dt a (1 - (1-d)^n) / d ; p_n = p_0 + dt * sum_{j<n} v_j
            for i in 0..2 {
                let v = dt * a[i] * (1.0 - (1.0 - d).powi(n as i32)) / d;
                let travelled: f64 = (0..n).map(|j| dt * a[i] * (1.0 - (1.0 - d).powi(j as i32)) / d).sum();
                let p = pm.start[i] + dt * travelled;
                assert!((r.next.0[2 + i] - v).abs() < 1e-12, "velocity at step {n}");
                assert!((r.next.0[i] - p).abs() < 1e-12, "position at step {n}");
            }
            assert!(!r.done);
        }
    }

    #[test]
    fn point_mass_clamps_to_arena() {
        let env = Env::preset("point").unwrap();
        let mut h = EnvHandle::new(env).unwrap();
        h.restore(&StateVec(vec![0.99, 0.0, 0.5, 0.0])).unwrap();
        let r = h.step_continuous(&[5.0, 0.0]).unwrap();
        assert_eq!(r.next.0[0], 1.0);
        assert_eq!(r.next.0[2], 0.0);
    }

    #[test]
    fn point_mass_goal_and_penalty() {
        let env = Env::preset("point").unwrap();
        let mut h = EnvHandle::new(env).unwrap();
        let r = h.step_continuous(&[2.0, 0.0]).unwrap();
        assert!((r.task_reward + 0.01).abs() < 1e-15, "penalty uses the clamped action");
        h.restore(&StateVec(vec![0.45, 0.5, 0.5, 0.0])).unwrap();
        let r = h.step_continuous(&[0.0, 0.0]).unwrap();
        assert!(r.done && r.reached_goal);
        assert_eq!(r.task_reward, 1.0);
    }

    #[test]
    fn peek_matches_step_exhaustively() {
        let env = Env::preset("grid4").unwrap();
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let sets = [env.primitive_actions().unwrap(), env.macro_actions().unwrap()];
        let mut h = EnvHandle::new(env).unwrap();
        for cell in g.free_cells() {
            let s = g.encode(cell);
            for acts in &sets {
                for a in acts.iter() {
                    let before = s.clone();
                    let p1 = h.peek(&s, a).unwrap();
                    let p2 = h.peek(&s, a).unwrap();
                    assert_eq!(p1, p2);
                    assert_eq!(s, before);
                    h.restore(&s).unwrap();
                    let stepped = h.step(a).unwrap().next;
                    assert_eq!(p1, stepped, "cell {cell:?} action {a:?}");
                }
            }
        }
    }

    #[test]
    fn peek_leaves_episode_untouched() {
        let mut h = EnvHandle::new(Env::preset("grid7").unwrap()).unwrap();
        h.step(&ActionSpec::Primitive { id: RIGHT }).unwrap();
        let state = h.state().clone();
        let steps = h.steps();
        h.peek(&state, &ActionSpec::Primitive { id: RIGHT }).unwrap();
        assert_eq!(h.state(), &state);
        assert_eq!(h.steps(), steps);
    }

    #[test]
    fn peek_rejects_undecodable_state() {
        let h = EnvHandle::new(Env::preset("grid7").unwrap()).unwrap();
        let a = ActionSpec::Primitive { id: 0 };
        assert!(h.peek(&StateVec(vec![0.1234, 0.0]), &a).is_err());
        assert!(h.peek(&StateVec(vec![0.0, 0.5]), &a).is_err(), "wall cell");
        assert!(h.peek(&StateVec(vec![0.0]), &a).is_err());
    }

    #[test]
    fn centroid_peek_executes_its_vector() {
        let env = Env::preset("point").unwrap();
        let acts = make_centroid_actionset(&[vec![0.5, -0.25], vec![-1.0, 1.0]]).unwrap();
        let mut h = EnvHandle::new(env).unwrap();
        let s = StateVec(vec![0.1, -0.2, 0.3, 0.05]);
        for (i, a) in acts.iter().enumerate() {
            let p = h.peek(&s, a).unwrap();
            h.restore(&s).unwrap();
            let ActionSpec::Centroid { vector, .. } = a else { unreachable!() };
            assert_eq!(p, h.step_continuous(vector).unwrap().next, "centroid {i}");
            h.restore(&s).unwrap();
            assert_eq!(p, h.step(a).unwrap().next);
        }
    }

    #[test]
    fn centroid_sets() {
        let seven: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 7.0, 0.0]).collect();
        assert_eq!(make_centroid_actionset(&seven).unwrap().len(), 7);
        assert_eq!(make_centroid_actionset(&[vec![0.0, 0.0]]).unwrap().len(), 1);
        assert!(make_centroid_actionset(&[vec![0.0], vec![0.0, 1.0]]).is_err());
        assert!(make_centroid_actionset(&[]).is_err());
    }

    #[test]
    fn macro_set_validation() {
        let base = ActionSet::primitives(4).unwrap();
        assert!(make_macro_actionset(&base, &[vec![]]).is_err());
        assert!(make_macro_actionset(&base, &[vec![0, 9]]).is_err());
        let cents = make_centroid_actionset(&[vec![0.0]]).unwrap();
        assert!(make_macro_actionset(&cents, &[vec![0]]).is_err());
    }

    #[test]
    fn unit_macros_behave_like_primitives() {
        let env = Env::preset("grid7").unwrap();
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let base = ActionSet::primitives(4).unwrap();
        let unit = make_macro_actionset(&base, &[vec![0], vec![1], vec![2], vec![3]]).unwrap();
        for cell in g.free_cells() {
            let s = g.encode(cell);
            for (m, p) in unit.iter().zip(base.iter()) {
                assert_eq!(env.peek(&s, m).unwrap(), env.peek(&s, p).unwrap());
            }
        }
    }

    #[test]
    fn double_up_covers_two_cells() {
        let env = open_grid(5, 5);
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let up2 = ActionSpec::Macro { id: 0, steps: vec![UP, UP] };
        assert_eq!(env.peek(&g.encode((2, 4)), &up2).unwrap(), g.encode((2, 2)));
    }

    /// Reachability by BFS where macro edges are composed by hand from cell
    /// arithmetic, compared with BFS over `peek` on macro actions.
    #[test]
    fn macro_reachability_matches_bruteforce() {
        let env = Env::preset("grid7").unwrap();
        let Env::Grid(g) = env.clone() else { unreachable!() };
        let macros = g.macros.clone();
        let acts = env.macro_actions().unwrap();

        let free = |c: (i64, i64)| (0..g.width).contains(&c.0) && (0..g.height).contains(&c.1) && !g.walls.contains(&c);
        let brute_next = |mut c: (i64, i64), m: &[usize]| {
            for &p in m {
                if c == g.goal {
                    break;
                }
                let (dx, dy) = GRID_MOVES[p];
                let n = (c.0 + dx, c.1 + dy);
                if free(n) {
                    c = n;
                }
            }
            c
        };
        let bfs = |next: &dyn Fn((i64, i64)) -> Vec<(i64, i64)>| {
            let mut seen = HashSet::new();
            let mut q = VecDeque::from([g.start]);
            seen.insert(g.start);
            while let Some(c) = q.pop_front() {
                for n in next(c) {
                    if seen.insert(n) {
                        q.push_back(n);
                    }
                }
            }
            seen
        };
        let oracle = bfs(&|c| macros.iter().map(|m| brute_next(c, m)).collect());
        let via_peek = bfs(&|c| {
            acts.iter()
                .map(|a| g.decode(env.peek(&g.encode(c), a).unwrap().as_slice()).unwrap())
                .collect()
        });
        assert_eq!(oracle, via_peek);
        assert!(oracle.contains(&g.goal));
    }

    #[test]
    fn view_hides_reward() {
        let mut h = EnvHandle::new(Env::preset("grid7").unwrap()).unwrap();
        let mut view = ObservationView::new(&mut h);
        view.reset(0);
        // exhaustive destructuring: adding a field to Observed breaks this test
        let Observed { next, done, visited } = view.step(&ActionSpec::Primitive { id: RIGHT }).unwrap();
        assert!(!done);
        assert_eq!(visited, vec![next]);
    }
}
