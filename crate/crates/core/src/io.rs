//! Line-oriented text formats for demonstrations, parameters, action logs,
//! metrics, run configs and environment configs.
//!
//! Reals are written with 17 significant digits so every finite double
//! survives a round trip exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::envs::{Env, GridWorld, PointMass};
use crate::error::{invalid, parse_err, Error, Result};
use crate::model::{ModelLayout, ModelParams, PolicyHead};
use crate::trainer::{ActionSpace, MetricsRow};
use crate::types::{ActionSet, ActionSpec, ExpertTrajectory, RewardMode, StateVec, TrainConfig};

const DEMO_FORMAT: &str = "inspiration-demos/1";
const PARAMS_FORMAT: &str = "inspiration-params/1";
const SEPARATOR: &str = "---";

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_reals(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(sep)
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    match tok.trim().parse::<f64>() {
        Ok(v) => Ok(v),
        Err(_) => parse_err(line, format!("'{tok}' is not a number")),
    }
}

fn parse_finite(tok: &str, line: usize) -> Result<f64> {
    let v = parse_real(tok, line)?;
    if !v.is_finite() {
        return parse_err(line, format!("'{tok}' is not finite"));
    }
    Ok(v)
}

fn parse_reals(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split_whitespace().map(|t| parse_finite(t, line)).collect()
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    match tok.trim().parse::<usize>() {
        Ok(v) => Ok(v),
        Err(_) => parse_err(line, format!("'{tok}' is not a nonnegative integer")),
    }
}

fn parse_bool(tok: &str, line: usize) -> Result<bool> {
    match tok.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => parse_err(line, format!("'{other}' is not true/false")),
    }
}

fn parse_list<T>(text: &str, sep: char, line: usize, item: impl Fn(&str, usize) -> Result<T>) -> Result<Vec<T>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(sep).map(|t| item(t.trim(), line)).collect()
}

fn file_err(path: &Path, source: std::io::Error) -> Error {
    Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| file_err(path, e))
}

/// Writes `contents` to `path`, naming the path in any error.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| file_err(path, e))?);
    w.write_all(contents.as_bytes()).and_then(|_| w.flush()).map_err(|e| file_err(path, e))
}

/// `key=value` header lines up to the separator. Returns the fields with
/// their line numbers and the index of the first body line.
struct Header {
    fields: BTreeMap<String, (String, usize)>,
    body_start: usize,
}

impl Header {
    fn parse(lines: &[&str], format: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for (i, raw) in lines.iter().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line == SEPARATOR {
                let h = Header { fields, body_start: i + 1 };
                let (found, at) = h.get("format")?;
                if found != format {
                    return parse_err(at, format!("expected format {format}, found {found}"));
                }
                return Ok(h);
            }
            let Some((k, v)) = line.split_once('=') else {
                return parse_err(n, format!("expected key=value, found '{line}'"));
            };
            if fields.insert(k.trim().to_string(), (v.trim().to_string(), n)).is_some() {
                return parse_err(n, format!("duplicate key '{}'", k.trim()));
            }
        }
        parse_err(lines.len().max(1), "header is not terminated by '---'")
    }

    fn get(&self, key: &str) -> Result<(&str, usize)> {
        match self.fields.get(key) {
            Some((v, n)) => Ok((v.as_str(), *n)),
            None => parse_err(self.body_start.max(1), format!("header lacks '{key}'")),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let (v, n) = self.get(key)?;
        parse_usize(v, n)
    }
}

// ---------------------------------------------------------------- demos

/// A demonstration file: raw frames from one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoFile {
    /// Preset name or environment config path.
    pub env: String,
    pub obs_dim: usize,
    /// Stack depth of the stored states; `record` writes raw frames (1).
    pub stack_k: usize,
    pub trajectories: Vec<ExpertTrajectory>,
}

pub fn render_demos(d: &DemoFile) -> String {
    let mut out = format!(
        "format={DEMO_FORMAT}\nenv={}\nobs_dim={}\nstack_k={}\ntrajectories={}\n{SEPARATOR}\n",
        d.env,
        d.obs_dim,
        d.stack_k,
        d.trajectories.len()
    );
    for (i, t) in d.trajectories.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for s in t.states() {
            out.push_str(&fmt_reals(s.as_slice(), " "));
            out.push('\n');
        }
    }
    out
}

pub fn parse_demos(text: &str) -> Result<DemoFile> {
    let lines: Vec<&str> = text.lines().collect();
    let h = Header::parse(&lines, DEMO_FORMAT)?;
    let (env, _) = h.get("env")?;
    let obs_dim = h.usize("obs_dim")?;
    let stack_k = h.usize("stack_k")?;
    let count = h.usize("trajectories")?;
    if obs_dim == 0 || stack_k == 0 {
        return parse_err(h.get("obs_dim")?.1, "obs_dim and stack_k must be positive");
    }
    let width = obs_dim * stack_k;
    let mut trajectories = Vec::new();
    let mut current: Vec<StateVec> = Vec::new();
    let mut start_line = h.body_start + 1;
    let finish = |states: Vec<StateVec>, at: usize, out: &mut Vec<ExpertTrajectory>| -> Result<()> {
        match ExpertTrajectory::new(states) {
            Ok(t) => {
                out.push(t);
                Ok(())
            }
            Err(e) => parse_err(at, e.to_string()),
        }
    };
    for (i, raw) in lines.iter().enumerate().skip(h.body_start) {
        let n = i + 1;
        if raw.trim().is_empty() {
            if !current.is_empty() {
                finish(std::mem::take(&mut current), start_line, &mut trajectories)?;
            }
            continue;
        }
        if current.is_empty() {
            start_line = n;
        }
        let values = parse_reals(raw, n)?;
        if values.len() != width {
            return parse_err(n, format!("expected {width} values, found {}", values.len()));
        }
        current.push(StateVec(values));
    }
    if !current.is_empty() {
        finish(current, start_line, &mut trajectories)?;
    }
    if trajectories.len() != count {
        return parse_err(
            lines.len().max(1),
            format!("header announces {count} trajectories, body has {}", trajectories.len()),
        );
    }
    if count == 0 {
        return parse_err(lines.len().max(1), "no trajectories");
    }
    Ok(DemoFile {
        env: env.to_string(),
        obs_dim,
        stack_k,
        trajectories,
    })
}

pub fn save_demos(path: impl AsRef<Path>, d: &DemoFile) -> Result<()> {
    write_file(path.as_ref(), &render_demos(d))
}

pub fn load_demos(path: impl AsRef<Path>) -> Result<DemoFile> {
    parse_demos(&read_text(path)?)
}

// ----------------------------------------------------------- vector lists

/// One vector per line, entries separated by spaces.
pub fn render_vectors(xs: &[Vec<f64>]) -> String {
    xs.iter().map(|x| fmt_reals(x, " ") + "\n").collect()
}

pub fn parse_vectors(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = parse_reals(line, i + 1)?;
        if let Some(first) = out.first().map(|f: &Vec<f64>| f.len()) {
            if v.len() != first {
                return parse_err(i + 1, format!("expected {first} values, found {}", v.len()));
            }
        }
        out.push(v);
    }
    Ok(out)
}

pub fn save_vectors(path: impl AsRef<Path>, xs: &[Vec<f64>]) -> Result<()> {
    write_file(path.as_ref(), &render_vectors(xs))
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    parse_vectors(&read_text(path)?)
}

// --------------------------------------------------------------- params

/// Trained parameters with everything needed to run them again.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsFile {
    pub env: String,
    pub space: ActionSpace,
    pub params: ModelParams,
}

fn render_space(space: &ActionSpace) -> String {
    match space {
        ActionSpace::Continuous { dim } => format!("continuous:{dim}"),
        ActionSpace::Discrete(acts) => {
            let items: Vec<String> = acts
                .iter()
                .map(|a| match a {
                    ActionSpec::Primitive { id } => id.to_string(),
                    ActionSpec::Macro { steps, .. } => steps.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
                    ActionSpec::Centroid { vector, .. } => fmt_reals(vector, ","),
                })
                .collect();
            format!("{}:{}", acts.kind(), items.join(";"))
        }
    }
}

fn parse_space(text: &str, line: usize) -> Result<ActionSpace> {
    let Some((kind, rest)) = text.split_once(':') else {
        return parse_err(line, format!("malformed action space '{text}'"));
    };
    let wrap = |r: Result<ActionSet>| r.map(ActionSpace::Discrete).or_else(|e| parse_err(line, e.to_string()));
    match kind {
        "continuous" => Ok(ActionSpace::Continuous {
            dim: parse_usize(rest, line)?,
        }),
        "primitive" => {
            let ids = parse_list(rest, ';', line, parse_usize)?;
            if ids.iter().enumerate().any(|(i, &id)| i != id) {
                return parse_err(line, "primitive ids must be 0..n in order");
            }
            wrap(ActionSet::primitives(ids.len()))
        }
        "macro" => {
            let macros = parse_list(rest, ';', line, |t, n| parse_list(t, ',', n, parse_usize))?;
            wrap(ActionSet::new(
                macros.into_iter().enumerate().map(|(id, steps)| ActionSpec::Macro { id, steps }).collect(),
            ))
        }
        "centroid" => {
            let vs = parse_list(rest, ';', line, |t, n| parse_list(t, ',', n, parse_finite))?;
            wrap(ActionSet::new(
                vs.into_iter().enumerate().map(|(id, vector)| ActionSpec::Centroid { id, vector }).collect(),
            ))
        }
        other => parse_err(line, format!("unknown action kind '{other}'")),
    }
}

fn render_policy(p: PolicyHead) -> String {
    match p {
        PolicyHead::Categorical { n_actions } => format!("categorical:{n_actions}"),
        PolicyHead::Gaussian { action_dim } => format!("gaussian:{action_dim}"),
    }
}

fn parse_policy(text: &str, line: usize) -> Result<PolicyHead> {
    match text.split_once(':') {
        Some(("categorical", n)) => Ok(PolicyHead::Categorical {
            n_actions: parse_usize(n, line)?,
        }),
        Some(("gaussian", n)) => Ok(PolicyHead::Gaussian {
            action_dim: parse_usize(n, line)?,
        }),
        _ => parse_err(line, format!("malformed policy head '{text}'")),
    }
}

pub fn render_params(f: &ParamsFile) -> String {
    let l = f.params.layout();
    let hidden: Vec<String> = l.hidden.iter().map(|h| h.to_string()).collect();
    let mut out = format!(
        "format={PARAMS_FORMAT}\nenv={}\nactions={}\nobs_dim={}\nhidden={}\npolicy={}\nshared={}\ncount={}\n{SEPARATOR}\n",
        f.env,
        render_space(&f.space),
        l.obs_dim,
        hidden.join(","),
        render_policy(l.policy),
        l.shared,
        f.params.values().len()
    );
    for &v in f.params.values() {
        out.push_str(&fmt_real(v));
        out.push('\n');
    }
    out
}

pub fn parse_params(text: &str) -> Result<ParamsFile> {
    let lines: Vec<&str> = text.lines().collect();
    let h = Header::parse(&lines, PARAMS_FORMAT)?;
    let (env, _) = h.get("env")?;
    let (actions, actions_line) = h.get("actions")?;
    let space = parse_space(actions, actions_line)?;
    let obs_dim = h.usize("obs_dim")?;
    let (hidden, hidden_line) = h.get("hidden")?;
    let hidden = parse_list(hidden, ',', hidden_line, parse_usize)?;
    let (policy, policy_line) = h.get("policy")?;
    let policy = parse_policy(policy, policy_line)?;
    let (shared, shared_line) = h.get("shared")?;
    let shared = parse_bool(shared, shared_line)?;
    let count = h.usize("count")?;
    let layout = ModelLayout::new(obs_dim, hidden, policy, shared).or_else(|e| parse_err(policy_line, e.to_string()))?;
    if layout.param_count() != count {
        return parse_err(
            h.get("count")?.1,
            format!("layout needs {} values, header says {count}", layout.param_count()),
        );
    }
    let expected_policy = match &space {
        ActionSpace::Discrete(a) => PolicyHead::Categorical { n_actions: a.len() },
        ActionSpace::Continuous { dim } => PolicyHead::Gaussian { action_dim: *dim },
    };
    if expected_policy != policy {
        return parse_err(policy_line, "policy head does not match the action space");
    }
    let mut values = Vec::with_capacity(count);
    for (i, raw) in lines.iter().enumerate().skip(h.body_start) {
        if raw.trim().is_empty() {
            continue;
        }
        values.push(parse_finite(raw, i + 1)?);
    }
    if values.len() != count {
        return parse_err(lines.len().max(1), format!("expected {count} values, found {}", values.len()));
    }
    let params = ModelParams::from_values(layout, values).or_else(|e| parse_err(lines.len(), e.to_string()))?;
    Ok(ParamsFile {
        env: env.to_string(),
        space,
        params,
    })
}

pub fn save_params(path: impl AsRef<Path>, f: &ParamsFile) -> Result<()> {
    write_file(path.as_ref(), &render_params(f))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamsFile> {
    parse_params(&read_text(path)?)
}

// -------------------------------------------------------------- metrics

pub fn metrics_header() -> String {
    MetricsRow::HEADER.join(",")
}

pub fn render_metrics_row(r: &MetricsRow) -> String {
    let reals = [
        r.episode_return,
        r.policy_loss,
        r.value_loss,
        r.classifier_loss,
        r.mean_reward,
        r.reward_variance,
        r.success_rate,
    ];
    format!("{},{}", r.total_steps, fmt_reals(&reals, ","))
}

/// Appends one row, writing the header first when the file is new or empty.
/// The row is flushed before returning.
pub fn append_metrics(path: impl AsRef<Path>, row: &MetricsRow) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| file_err(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(&metrics_header());
        text.push('\n');
    }
    text.push_str(&render_metrics_row(row));
    text.push('\n');
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == metrics_header() => {}
        _ => return parse_err(1, "missing metrics header"),
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let n = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != MetricsRow::HEADER.len() {
            return parse_err(n, format!("expected {} columns, found {}", MetricsRow::HEADER.len(), cols.len()));
        }
        let total_steps = match cols[0].trim().parse::<u64>() {
            Ok(v) => v,
            Err(_) => return parse_err(n, format!("'{}' is not a step count", cols[0])),
        };
        let v: Vec<f64> = cols[1..].iter().map(|c| parse_real(c, n)).collect::<Result<_>>()?;
        rows.push(MetricsRow {
            total_steps,
            episode_return: v[0],
            policy_loss: v[1],
            value_loss: v[2],
            classifier_loss: v[3],
            mean_reward: v[4],
            reward_variance: v[5],
            success_rate: v[6],
        });
    }
    Ok(rows)
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    parse_metrics(&read_text(path)?)
}

// --------------------------------------------------------- key = value

/// Non-empty `key = value` lines with `#` comments stripped, with line numbers.
fn key_values(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return parse_err(n, format!("expected key = value, found '{line}'"));
        };
        let k = k.trim().to_string();
        if !seen.insert(k.clone()) {
            return parse_err(n, format!("duplicate key '{k}'"));
        }
        out.push((k, v.trim().to_string(), n));
    }
    Ok(out)
}

/// Overrides fields of `base` from a `key = value` config whose keys are
/// [`TrainConfig`] field names.
pub fn parse_train_config(text: &str, base: TrainConfig) -> Result<TrainConfig> {
    let mut c = base;
    for (k, v, n) in key_values(text)? {
        match k.as_str() {
            "gamma" => c.gamma = parse_finite(&v, n)?,
            "rollout_len" => c.rollout_len = parse_usize(&v, n)?,
            "stack_k" => c.stack_k = parse_usize(&v, n)?,
            "learning_rate" => c.learning_rate = parse_finite(&v, n)?,
            "entropy_coef" => c.entropy_coef = parse_finite(&v, n)?,
            "reward_mode" => c.reward_mode = v.parse::<RewardMode>().or_else(|e| parse_err(n, e.to_string()))?,
            "shared_trunk" => c.shared_trunk = parse_bool(&v, n)?,
            "max_steps" => c.max_steps = parse_usize(&v, n)? as u64,
            "seed" => c.seed = parse_usize(&v, n)? as u64,
            "n_demos" => c.n_demos = parse_usize(&v, n)?,
            "hidden" => c.hidden = parse_list(&v, ',', n, parse_usize)?,
            "max_grad_norm" => c.max_grad_norm = parse_finite(&v, n)?,
            "eval_every" => c.eval_every = parse_usize(&v, n)? as u64,
            "eval_episodes" => c.eval_episodes = parse_usize(&v, n)?,
            other => return parse_err(n, format!("unknown config key '{other}'")),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn load_train_config(path: impl AsRef<Path>, base: TrainConfig) -> Result<TrainConfig> {
    parse_train_config(&read_text(path)?, base)
}

/// The config as `key = value` lines, parseable by [`parse_train_config`].
pub fn render_train_config(c: &TrainConfig) -> String {
    let hidden: Vec<String> = c.hidden.iter().map(|h| h.to_string()).collect();
    format!(
        "gamma = {}\nrollout_len = {}\nstack_k = {}\nlearning_rate = {}\nentropy_coef = {}\nreward_mode = {}\n\
         shared_trunk = {}\nmax_steps = {}\nseed = {}\nn_demos = {}\nhidden = {}\nmax_grad_norm = {}\n\
         eval_every = {}\neval_episodes = {}\n",
        c.gamma,
        c.rollout_len,
        c.stack_k,
        c.learning_rate,
        c.entropy_coef,
        c.reward_mode,
        c.shared_trunk,
        c.max_steps,
        c.seed,
        c.n_demos,
        hidden.join(","),
        c.max_grad_norm,
        c.eval_every,
        c.eval_episodes
    )
}

// ---------------------------------------------------------- environments

fn parse_pair<T>(v: &str, n: usize, item: impl Fn(&str, usize) -> Result<T> + Copy) -> Result<(T, T)> {
    let mut xs = parse_list(v, ',', n, item)?;
    if xs.len() != 2 {
        return parse_err(n, format!("expected two comma-separated values, found '{v}'"));
    }
    let b = xs.pop().expect("two items");
    let a = xs.pop().expect("two items");
    Ok((a, b))
}

fn parse_int(tok: &str, n: usize) -> Result<i64> {
    tok.trim().parse::<i64>().or_else(|_| parse_err(n, format!("'{tok}' is not an integer")))
}

/// Parses an environment description:
///
/// ```text
/// kind = grid            # or point
/// width = 7              # grid: width, height, start, goal, walls, macros
/// start = 0,0
/// walls = 0,3; 1,3
/// macros = 0,0; 1,1      # primitive id sequences
/// max_episode_steps = 50
/// ```
///
/// Point-mass keys: `start`, `dt`, `drag`, `arena`, `goal_center`,
/// `goal_radius`, `action_bound`, `action_penalty`, `max_episode_steps`.
/// Omitted keys fall back to the `grid7` / `point` presets.
pub fn parse_env_config(text: &str) -> Result<Env> {
    let kvs = key_values(text)?;
    let kind = match kvs.iter().find(|(k, _, _)| k == "kind") {
        Some((_, v, _)) => v.as_str(),
        None => return parse_err(1, "environment config lacks 'kind'"),
    };
    let env = match kind {
        "grid" => {
            let Env::Grid(mut g) = Env::preset("grid7")? else { unreachable!() };
            for (k, v, n) in &kvs {
                let n = *n;
                match k.as_str() {
                    "kind" => {}
                    "width" => g.width = parse_int(v, n)?,
                    "height" => g.height = parse_int(v, n)?,
                    "start" => g.start = parse_pair(v, n, parse_int)?,
                    "goal" => g.goal = parse_pair(v, n, parse_int)?,
                    "walls" => g.walls = parse_list(v, ';', n, |t, n| parse_pair(t, n, parse_int))?.into_iter().collect(),
                    "macros" => g.macros = parse_list(v, ';', n, |t, n| parse_list(t, ',', n, parse_usize))?,
                    "max_episode_steps" => g.max_episode_steps = parse_usize(v, n)?,
                    other => return parse_err(n, format!("unknown grid key '{other}'")),
                }
            }
            Env::Grid(g)
        }
        "point" => {
            let Env::Point(mut p) = Env::preset("point")? else { unreachable!() };
            for (k, v, n) in &kvs {
                let n = *n;
                let pair = |v: &str| parse_pair(v, n, parse_finite).map(|(a, b)| [a, b]);
                match k.as_str() {
                    "kind" => {}
                    "start" => p.start = pair(v)?,
                    "dt" => p.dt = parse_finite(v, n)?,
                    "drag" => p.drag = parse_finite(v, n)?,
                    "arena" => p.arena = parse_finite(v, n)?,
                    "goal_center" => p.goal_center = pair(v)?,
                    "goal_radius" => p.goal_radius = parse_finite(v, n)?,
                    "action_bound" => p.action_bound = parse_finite(v, n)?,
                    "action_penalty" => p.action_penalty = parse_finite(v, n)?,
                    "max_episode_steps" => p.max_episode_steps = parse_usize(v, n)?,
                    other => return parse_err(n, format!("unknown point-mass key '{other}'")),
                }
            }
            Env::Point(p)
        }
        other => return parse_err(1, format!("unknown environment kind '{other}' (grid|point)")),
    };
    env.validate().or_else(|e| parse_err(1, e.to_string()))?;
    Ok(env)
}

pub fn render_env_config(env: &Env) -> String {
    match env {
        Env::Grid(GridWorld {
            width,
            height,
            start,
            goal,
            walls,
            max_episode_steps,
            macros,
        }) => {
            let walls: Vec<String> = walls.iter().map(|(x, y)| format!("{x},{y}")).collect();
            let macros: Vec<String> = macros
                .iter()
                .map(|m| m.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
                .collect();
            format!(
                "kind = grid\nwidth = {width}\nheight = {height}\nstart = {},{}\ngoal = {},{}\nwalls = {}\n\
                 macros = {}\nmax_episode_steps = {max_episode_steps}\n",
                start.0,
                start.1,
                goal.0,
                goal.1,
                walls.join("; "),
                macros.join("; ")
            )
        }
        Env::Point(PointMass {
            start,
            dt,
            drag,
            arena,
            goal_center,
            goal_radius,
            action_bound,
            action_penalty,
            max_episode_steps,
        }) => format!(
            "kind = point\nstart = {},{}\ndt = {}\ndrag = {}\narena = {}\ngoal_center = {},{}\ngoal_radius = {}\n\
             action_bound = {}\naction_penalty = {}\nmax_episode_steps = {max_episode_steps}\n",
            fmt_real(start[0]),
            fmt_real(start[1]),
            fmt_real(*dt),
            fmt_real(*drag),
            fmt_real(*arena),
            fmt_real(goal_center[0]),
            fmt_real(goal_center[1]),
            fmt_real(*goal_radius),
            fmt_real(*action_bound),
            fmt_real(*action_penalty)
        ),
    }
}

/// A preset name (`grid7`, `grid4`, `point`) or the path of an environment config.
pub fn resolve_env(spec: &str) -> Result<Env> {
    match Env::preset(spec) {
        Ok(env) => Ok(env),
        Err(_) if Path::new(spec).is_file() => parse_env_config(&read_text(spec)?),
        Err(_) => invalid(format!("'{spec}' is neither a preset (grid7|grid4|point) nor an environment config file")),
    }
}
