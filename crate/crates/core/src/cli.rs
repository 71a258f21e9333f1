//! Command-line interface. Every stage of the pipeline is a subcommand; all
//! file formats are those of [`crate::io`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::envs::{make_centroid_actionset, Env, EnvHandle, ObservationView};
use crate::error::Error;
use crate::io::{self, DemoFile, ParamsFile};
use crate::model::grad_check;
use crate::trainer::{
    evaluate, kmeans_actions, record_demos, train_expert, train_inspiration_with, ActionSpace, EnvEvaluator, EvalMode,
};
use crate::types::{ActionSet, RewardMode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "inspiration", version, about = "Imitation across action spaces from state-only demonstrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an expert with actor-critic on the task reward.
    TrainExpert(TrainExpertArgs),
    /// Roll out a trained expert greedily and save its states.
    Record(RecordArgs),
    /// Cluster logged continuous expert actions into a discrete set.
    ClusterActions(ClusterArgs),
    /// Train an agent from state-only demonstrations.
    TrainAgent(TrainAgentArgs),
    /// Evaluate saved parameters on the task.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Merge metrics files into one plot-ready CSV.
    ExportPlotdata(ExportArgs),
}

/// Overrides for [`TrainConfig`] fields, applied after `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// `key = value` file with TrainConfig field names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rollout_len: Option<usize>,
    #[arg(long)]
    pub stack_k: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub entropy_coef: Option<f64>,
    /// basic | pref | soft
    #[arg(long, alias = "reward-mode")]
    pub reward: Option<RewardMode>,
    #[arg(long)]
    pub shared_trunk: Option<bool>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_demos: Option<usize>,
    /// Comma-separated hidden widths, e.g. 64,64.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
}

impl ConfigFlags {
    fn resolve(&self, base: TrainConfig) -> Result<TrainConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => io::load_train_config(path, base).map_err(CliError::Usage)?,
            None => base,
        };
        macro_rules! set {
            ($($f:ident => $g:ident),*) => {$(if let Some(v) = self.$f.clone() { c.$g = v; })*};
        }
        set!(gamma => gamma, rollout_len => rollout_len, stack_k => stack_k, learning_rate => learning_rate,
             entropy_coef => entropy_coef, reward => reward_mode, shared_trunk => shared_trunk,
             max_steps => max_steps, seed => seed, n_demos => n_demos, hidden => hidden,
             max_grad_norm => max_grad_norm, eval_every => eval_every, eval_episodes => eval_episodes);
        c.validate().map_err(CliError::Usage)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActionKindArg {
    Primitive,
    Macro,
    Centroid,
    Continuous,
}

#[derive(Debug, Args)]
pub struct TrainExpertArgs {
    /// Preset (grid7, grid4, point) or environment config file.
    #[arg(long)]
    pub env: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to primitive on grids and continuous on the point mass.
    #[arg(long, value_enum)]
    pub actions: Option<ActionKindArg>,
    /// CSV file receiving one row per update.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the expert's primitive controls, one per line.
    #[arg(long)]
    pub actions_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Action log written by `record --actions-out`.
    #[arg(long)]
    pub demos_actions: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainAgentArgs {
    #[arg(long)]
    pub demos: PathBuf,
    #[arg(long, value_enum, default_value = "primitive")]
    pub actions: ActionKindArg,
    /// Centroid file from `cluster-actions`, for `--actions centroid`.
    #[arg(long)]
    pub centroids: Option<PathBuf>,
    /// Overrides the environment named in the demonstration header.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalModeArg {
    Greedy,
    Sampled,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    pub mode: EvalModeArg,
    /// Overrides the environment named in the parameter header.
    #[arg(long)]
    pub env: Option<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to check.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Metrics CSV files; repeat the flag for several runs.
    #[arg(long, required = true)]
    pub metrics: Vec<PathBuf>,
    /// Trailing window of the moving average of mean_reward.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Columns of `export-plotdata` output, in order.
pub const PLOT_COLUMNS: [&str; 9] = [
    "run",
    "total_steps",
    "mean_reward",
    "mean_reward_smooth",
    "reward_variance",
    "classifier_loss",
    "policy_loss",
    "success_rate",
    "episode_return",
];

#[derive(Debug)]
enum CliError {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(Error::InvalidInput(msg.into()))
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::TrainExpert(a) => cmd_train_expert(a, out),
        Command::Record(a) => cmd_record(a, out),
        Command::ClusterActions(a) => cmd_cluster(a, out),
        Command::TrainAgent(a) => cmd_train_agent(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::ExportPlotdata(a) => cmd_export(a, out),
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    out.write_all(text.as_ref().as_bytes()).map_err(|e| CliError::Runtime(e.into()))
}

fn print_config(out: &mut dyn Write, settings: &[(&str, String)], cfg: Option<&TrainConfig>) -> Result<(), CliError> {
    let mut text = String::from("# resolved configuration\n");
    for (k, v) in settings {
        text.push_str(&format!("{k} = {v}\n"));
    }
    if let Some(c) = cfg {
        text.push_str(&io::render_train_config(c));
    }
    text.push_str("# end configuration\n");
    say(out, text)
}

fn resolve_env(spec: &str) -> Result<Env, CliError> {
    io::resolve_env(spec).map_err(CliError::Usage)
}

fn discrete_actions(env: &Env, kind: ActionKindArg, centroids: Option<&Path>) -> Result<ActionSet, CliError> {
    match kind {
        ActionKindArg::Primitive => env.primitive_actions().map_err(CliError::Usage),
        ActionKindArg::Macro => env.macro_actions().map_err(CliError::Usage),
        ActionKindArg::Centroid => {
            let path = centroids.ok_or_else(|| usage("--actions centroid needs --centroids FILE"))?;
            let set = make_centroid_actionset(&io::load_vectors(path)?).map_err(CliError::Usage)?;
            env.check_actions(&set).map_err(CliError::Usage)?;
            Ok(set)
        }
        ActionKindArg::Continuous => Err(usage("continuous actions are only available to experts")),
    }
}

/// Starts a fresh metrics file so reruns do not append to old output.
fn reset_metrics(path: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = path {
        io::write_file(p, "")?;
    }
    Ok(())
}

fn space_name(space: &ActionSpace) -> String {
    match space {
        ActionSpace::Discrete(a) => a.kind().to_string(),
        ActionSpace::Continuous { dim } => format!("continuous:{dim}"),
    }
}

fn cmd_train_expert(a: TrainExpertArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let env = resolve_env(&a.env)?;
    let continuous = env.continuous_dim().is_some();
    let kind = a.actions.unwrap_or(if continuous { ActionKindArg::Continuous } else { ActionKindArg::Primitive });
    let space = match (kind, env.continuous_dim()) {
        (ActionKindArg::Continuous, Some(dim)) => ActionSpace::Continuous { dim },
        (ActionKindArg::Continuous, None) => return Err(usage("this environment has no continuous controls")),
        (ActionKindArg::Centroid, _) => return Err(usage("experts use primitive, macro or continuous actions")),
        (k, _) => ActionSpace::Discrete(discrete_actions(&env, k, None)?),
    };
    let cfg = a.cfg.resolve(TrainConfig::expert(continuous))?;
    print_config(
        out,
        &[
            ("command", "train-expert".into()),
            ("env", a.env.clone()),
            ("actions", space_name(&space)),
            ("out", a.out.display().to_string()),
        ],
        Some(&cfg),
    )?;
    let (params, rows) = train_expert(&env, &space, &cfg)?;
    reset_metrics(a.metrics.as_deref())?;
    if let Some(m) = &a.metrics {
        for r in &rows {
            io::append_metrics(m, r)?;
        }
    }
    let eval = evaluate(&params, &env, &space, 1, cfg.seed, EvalMode::Greedy)?;
    io::save_params(
        &a.out,
        &ParamsFile {
            env: a.env,
            space,
            params,
        },
    )?;
    say(out, format!("greedy success {:.3} return {:.6}\n", eval.success_rate, eval.mean_return))
}

fn cmd_record(a: RecordArgs, out: &mut dyn Write) -> Result<(), CliError> {
    print_config(
        out,
        &[
            ("command", "record".into()),
            ("params", a.params.display().to_string()),
            ("n", a.n.to_string()),
            ("seed", a.seed.to_string()),
            ("out", a.out.display().to_string()),
        ],
        None,
    )?;
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let pf = io::load_params(&a.params)?;
    let env = resolve_env(&pf.env)?;
    let demos = record_demos(&pf.params, &env, &pf.space, a.n, a.seed)?;
    io::save_demos(
        &a.out,
        &DemoFile {
            env: pf.env.clone(),
            obs_dim: env.obs_dim(),
            stack_k: 1,
            trajectories: demos.trajectories.clone(),
        },
    )?;
    if let Some(p) = &a.actions_out {
        io::save_vectors(p, &demos.flat_actions())?;
    }
    let lens: Vec<String> = demos.trajectories.iter().map(|t| t.states().len().to_string()).collect();
    say(out, format!("recorded {} trajectories, lengths {}\n", demos.trajectories.len(), lens.join(",")))
}

fn cmd_cluster(a: ClusterArgs, out: &mut dyn Write) -> Result<(), CliError> {
    print_config(
        out,
        &[
            ("command", "cluster-actions".into()),
            ("demos_actions", a.demos_actions.display().to_string()),
            ("k", a.k.to_string()),
            ("seed", a.seed.to_string()),
        ],
        None,
    )?;
    let actions = io::load_vectors(&a.demos_actions)?;
    let centroids = kmeans_actions(&actions, a.k, a.seed).map_err(CliError::Usage)?;
    if let Some(p) = &a.out {
        io::save_vectors(p, &centroids)?;
    }
    say(out, io::render_vectors(&centroids))
}

fn cmd_train_agent(a: TrainAgentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let demos = io::load_demos(&a.demos)?;
    if demos.stack_k != 1 {
        return Err(usage("demonstrations must hold raw frames (stack_k = 1); stacking is done during training"));
    }
    let env_name = a.env.clone().unwrap_or_else(|| demos.env.clone());
    let env = resolve_env(&env_name)?;
    let acts = discrete_actions(&env, a.actions, a.centroids.as_deref())?;
    let mut cfg = a.cfg.resolve(TrainConfig::inspiration())?;
    let available = demos.trajectories.len();
    if a.cfg.n_demos.is_none() && a.cfg.config.is_none() {
        cfg.n_demos = cfg.n_demos.min(available);
    }
    if cfg.n_demos > available {
        return Err(usage(format!("asked for {} demonstrations, file has {available}", cfg.n_demos)));
    }
    print_config(
        out,
        &[
            ("command", "train-agent".into()),
            ("env", env_name.clone()),
            ("demos", a.demos.display().to_string()),
            ("actions", acts.kind().to_string()),
            ("out", a.out.display().to_string()),
        ],
        Some(&cfg),
    )?;
    let mut handle = EnvHandle::new(env.clone())?;
    let mut view = ObservationView::new(&mut handle);
    let mut monitor = EnvEvaluator::new(env.clone(), acts.clone(), cfg.eval_episodes, cfg.seed);
    let params = train_inspiration_with(&mut view, &acts, &demos.trajectories[..cfg.n_demos], &cfg, &mut monitor)?;
    reset_metrics(a.metrics.as_deref())?;
    if let Some(m) = &a.metrics {
        for r in &monitor.rows {
            io::append_metrics(m, r)?;
        }
    }
    let space = ActionSpace::Discrete(acts);
    let eval = evaluate(&params, &env, &space, 1, cfg.seed, EvalMode::Greedy)?;
    io::save_params(
        &a.out,
        &ParamsFile {
            env: env_name,
            space,
            params,
        },
    )?;
    say(out, format!("greedy success {:.3} return {:.6}\n", eval.success_rate, eval.mean_return))
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mode = match a.mode {
        EvalModeArg::Greedy => EvalMode::Greedy,
        EvalModeArg::Sampled => EvalMode::Sampled,
    };
    let pf = io::load_params(&a.params)?;
    let env_name = a.env.clone().unwrap_or_else(|| pf.env.clone());
    print_config(
        out,
        &[
            ("command", "eval".into()),
            ("params", a.params.display().to_string()),
            ("env", env_name.clone()),
            ("episodes", a.episodes.to_string()),
            ("seed", a.seed.to_string()),
            ("mode", format!("{:?}", a.mode).to_lowercase()),
        ],
        None,
    )?;
    if a.episodes == 0 {
        return Err(usage("--episodes must be positive"));
    }
    let env = resolve_env(&env_name)?;
    let e = evaluate(&pf.params, &env, &pf.space, a.episodes, a.seed, mode).map_err(CliError::Usage)?;
    say(out, format!("success_rate {:.6}\nmean_return {:.6}\n", e.success_rate, e.mean_return))
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    print_config(
        out,
        &[
            ("command", "gradcheck".into()),
            ("seed", a.seed.to_string()),
            ("seeds", a.seeds.to_string()),
            ("epsilon", a.epsilon.to_string()),
        ],
        None,
    )?;
    if a.seeds == 0 || a.epsilon.is_nan() || a.epsilon <= 0.0 {
        return Err(usage("--seeds and --epsilon must be positive"));
    }
    let worst = (a.seed..a.seed + a.seeds).map(|s| grad_check(s, a.epsilon)).fold(0.0, f64::max);
    say(out, format!("max relative error {worst:.3e}\n"))?;
    if worst < 1e-4 {
        Ok(())
    } else {
        Err(CliError::Runtime(Error::InvalidInput(format!("gradient check failed: {worst:.3e} >= 1e-4"))))
    }
}

fn cmd_export(a: ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    print_config(
        out,
        &[
            ("command", "export-plotdata".into()),
            ("window", a.window.to_string()),
            ("out", a.out.display().to_string()),
        ],
        None,
    )?;
    if a.window == 0 {
        return Err(usage("--window must be positive"));
    }
    let mut text = PLOT_COLUMNS.join(",") + "\n";
    for path in &a.metrics {
        let run = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if run.contains(',') {
            return Err(usage(format!("run name '{run}' contains a comma")));
        }
        let rows = io::load_metrics(path)?;
        for (i, r) in rows.iter().enumerate() {
            let lo = (i + 1).saturating_sub(a.window);
            let smooth = rows[lo..=i].iter().map(|x| x.mean_reward).sum::<f64>() / (i + 1 - lo) as f64;
            let reals = [
                r.mean_reward,
                smooth,
                r.reward_variance,
                r.classifier_loss,
                r.policy_loss,
                r.success_rate,
                r.episode_return,
            ];
            let cols: Vec<String> = reals.iter().map(|&x| io::fmt_real(x)).collect();
            text.push_str(&format!("{run},{},{}\n", r.total_steps, cols.join(",")));
        }
    }
    io::write_file(&a.out, &text)?;
    say(out, format!("wrote {} rows\n", text.lines().count() - 1))
}
