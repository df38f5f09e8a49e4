//! Experiment configuration: flat key-value text with section headers.
//!
//! Every key has an embedded default; `print` emits the full merged config
//! in the same format the parser accepts, so a printed config is always a
//! valid input file. Command-line overrides use `section.key=value`.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::agent::AgentConfig;
use crate::env::ObjectSpec;
use crate::error::{Error, Result};
use crate::rewards::ViceConfig;

/// How the run is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Scratch,
    BufferInit,
    Finetune,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Scratch => "scratch",
            Mode::BufferInit => "buffer_init",
            Mode::Finetune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(Mode::Scratch),
            "buffer_init" => Ok(Mode::BufferInit),
            "finetune" => Ok(Mode::Finetune),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// One prior buffer file with its relabeling rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorFileSpec {
    pub path: PathBuf,
    /// Frozen: rewards labeled once by `classifier` at load time and never
    /// rewritten (data from another object). Live otherwise.
    pub frozen: bool,
    pub classifier: Option<PathBuf>,
}

impl PriorFileSpec {
    fn parse(value: &str) -> Result<Self> {
        let mut path = None;
        let mut frozen = false;
        let mut classifier = None;
        for (i, field) in value.split(',').enumerate() {
            let field = field.trim();
            if i == 0 {
                path = Some(PathBuf::from(field));
                continue;
            }
            match field.split_once('=') {
                Some(("frozen", v)) => frozen = parse_bool(v)?,
                Some(("classifier", v)) => classifier = Some(PathBuf::from(v)),
                _ => {
                    return Err(Error::Config(format!(
                        "bad prior buffer field '{field}' (expected frozen=<bool> or classifier=<path>)"
                    )))
                }
            }
        }
        let path = path.ok_or_else(|| Error::Config("empty prior buffer entry".into()))?;
        Ok(Self {
            path,
            frozen,
            classifier,
        })
    }

    fn print(&self) -> String {
        let mut s = self.path.display().to_string();
        s.push_str(&format!(",frozen={}", self.frozen));
        if let Some(c) = &self.classifier {
            s.push_str(&format!(",classifier={}", c.display()));
        }
        s
    }
}

/// `[env]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSection {
    pub object: String,
    pub symmetry: usize,
    pub rotation_gain: f64,
    pub drop_threshold: f64,
    pub horizon: usize,
    pub noise: bool,
    pub goal_degrees: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let spec = ObjectSpec::prong();
        Self {
            object: spec.name.clone(),
            symmetry: spec.symmetry_order,
            rotation_gain: spec.rotation_gain,
            drop_threshold: spec.drop_threshold,
            horizon: 50,
            noise: true,
            goal_degrees: 0.0,
        }
    }
}

impl EnvSection {
    /// Section defaults for one of the named objects.
    pub fn for_object(name: &str) -> Result<Self> {
        let spec = ObjectSpec::by_name(name)?;
        Ok(Self {
            object: spec.name.clone(),
            symmetry: spec.symmetry_order,
            rotation_gain: spec.rotation_gain,
            drop_threshold: spec.drop_threshold,
            ..Self::default()
        })
    }

    pub fn object_spec(&self) -> Result<ObjectSpec> {
        ObjectSpec::new(
            self.object.clone(),
            self.symmetry,
            self.rotation_gain,
            self.drop_threshold,
        )
    }

    pub fn goal_radians(&self) -> f64 {
        self.goal_degrees.to_radians()
    }
}

/// `[bc]` section: demo counts, reset-policy training, reset execution.
#[derive(Debug, Clone, PartialEq)]
pub struct BcSection {
    /// Demo episodes for the first (primary) object.
    pub demo_primary: usize,
    /// Additional demo episodes per further object.
    pub demo_extra: usize,
    pub hidden: Vec<usize>,
    pub train_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Demos and BC training draw from this fixed seed so every run shares
    /// one reset pair per object set.
    pub seed: u64,
    pub reset_max_steps: usize,
    pub reset_max_attempts: usize,
    /// Load instead of train when set.
    pub multi_checkpoint: Option<PathBuf>,
    pub single_checkpoint: Option<PathBuf>,
}

impl Default for BcSection {
    fn default() -> Self {
        Self {
            demo_primary: 160,
            demo_extra: 30,
            hidden: vec![256, 256],
            train_steps: 2000,
            batch_size: 256,
            lr: 3e-4,
            seed: 42,
            reset_max_steps: 100,
            reset_max_attempts: 5,
            multi_checkpoint: None,
            single_checkpoint: None,
        }
    }
}

/// `[vice]` section: classifier head plus regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct ViceSection {
    pub hidden: Vec<usize>,
    pub goal_count: usize,
    pub cfg: ViceConfig,
}

impl Default for ViceSection {
    fn default() -> Self {
        Self {
            hidden: vec![256],
            goal_count: 400,
            cfg: ViceConfig::default(),
        }
    }
}

/// Full configuration of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task_id: String,
    pub seed: u64,
    pub mode: Mode,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Uniform-random exploration before the policy takes over.
    pub random_steps: u64,
    pub out_dir: PathBuf,
    pub agent_checkpoint: Option<PathBuf>,
    pub prior: Vec<PriorFileSpec>,
    pub prior_budget: usize,
    pub env: EnvSection,
    pub agent: AgentConfig,
    pub vice: ViceSection,
    pub bc: BcSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task_id: "prong_pose_a".into(),
            seed: 0,
            mode: Mode::Scratch,
            total_steps: 100_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            random_steps: 1_000,
            out_dir: PathBuf::from("runs"),
            agent_checkpoint: None,
            prior: Vec::new(),
            prior_budget: 60_000,
            env: EnvSection::default(),
            agent: AgentConfig::default(),
            vice: ViceSection::default(),
            bc: BcSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.env.object_spec()?;
        if self.task_id.is_empty() {
            return Err(Error::Config("task_id must be nonempty".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be >= 1".into()));
        }
        match self.mode {
            Mode::Finetune => {
                if self.agent_checkpoint.is_none() {
                    return Err(Error::Config(
                        "finetune mode requires experiment.agent_checkpoint".into(),
                    ));
                }
            }
            Mode::BufferInit => {
                if self.prior.is_empty() {
                    return Err(Error::Config(
                        "buffer_init mode requires at least one prior buffer".into(),
                    ));
                }
            }
            Mode::Scratch => {
                if !self.prior.is_empty() {
                    return Err(Error::Config(
                        "scratch mode must not list prior buffers".into(),
                    ));
                }
            }
        }
        for p in &self.prior {
            if p.frozen && p.classifier.is_none() {
                return Err(Error::Config(format!(
                    "frozen prior buffer {} needs a classifier file",
                    p.path.display()
                )));
            }
        }
        Ok(())
    }

    /// Directory holding this run's artifacts.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.task_id).join(self.seed.to_string())
    }

    /// Emit the full merged config in parseable form.
    pub fn print(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "task_id = {}", self.task_id);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "total_steps = {}", self.total_steps);
        let _ = writeln!(s, "eval_interval = {}", self.eval_interval);
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(s, "random_steps = {}", self.random_steps);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        if let Some(p) = &self.agent_checkpoint {
            let _ = writeln!(s, "agent_checkpoint = {}", p.display());
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[env]");
        let _ = writeln!(s, "object = {}", self.env.object);
        let _ = writeln!(s, "symmetry = {}", self.env.symmetry);
        let _ = writeln!(s, "rotation_gain = {}", self.env.rotation_gain);
        let _ = writeln!(s, "drop_threshold = {}", self.env.drop_threshold);
        let _ = writeln!(s, "horizon = {}", self.env.horizon);
        let _ = writeln!(s, "noise = {}", if self.env.noise { "on" } else { "off" });
        let _ = writeln!(s, "goal_degrees = {}", self.env.goal_degrees);
        let _ = writeln!(s);
        let _ = writeln!(s, "[agent]");
        let _ = writeln!(s, "discount = {}", self.agent.discount);
        let _ = writeln!(s, "utd = {}", self.agent.utd);
        let _ = writeln!(s, "batch_size = {}", self.agent.batch_size);
        let _ = writeln!(s, "ensemble_size = {}", self.agent.ensemble_size);
        let _ = writeln!(s, "target_subset_size = {}", self.agent.target_subset_size);
        let _ = writeln!(s, "tau = {}", self.agent.tau);
        let _ = writeln!(s, "lr = {}", self.agent.lr);
        let _ = writeln!(s, "actor_hidden = {}", print_dims(&self.agent.actor_hidden));
        let _ = writeln!(s, "critic_hidden = {}", print_dims(&self.agent.critic_hidden));
        match self.agent.target_entropy {
            Some(v) => {
                let _ = writeln!(s, "target_entropy = {v}");
            }
            None => {
                let _ = writeln!(s, "target_entropy = auto");
            }
        }
        let _ = writeln!(s, "actor_loss_min = {}", self.agent.actor_loss_min);
        let _ = writeln!(s, "stratified_prior = {}", self.agent.stratified_prior);
        let _ = writeln!(s);
        let _ = writeln!(s, "[vice]");
        let _ = writeln!(s, "hidden = {}", print_dims(&self.vice.hidden));
        let _ = writeln!(s, "goal_count = {}", self.vice.goal_count);
        let _ = writeln!(s, "mixup_alpha = {}", self.vice.cfg.mixup_alpha);
        let _ = writeln!(s, "label_smoothing = {}", self.vice.cfg.label_smoothing);
        let _ = writeln!(s, "gp_weight = {}", self.vice.cfg.gp_weight);
        let _ = writeln!(s, "per_batch_lambda = {}", self.vice.cfg.per_batch_lambda);
        let _ = writeln!(s, "dropout = {}", print_f64s(&self.vice.cfg.dropout_rates));
        let _ = writeln!(s, "lr = {}", self.vice.cfg.lr);
        let _ = writeln!(s, "batch_size = {}", self.vice.cfg.batch_size);
        let _ = writeln!(s);
        let _ = writeln!(s, "[bc]");
        let _ = writeln!(s, "demo_primary = {}", self.bc.demo_primary);
        let _ = writeln!(s, "demo_extra = {}", self.bc.demo_extra);
        let _ = writeln!(s, "hidden = {}", print_dims(&self.bc.hidden));
        let _ = writeln!(s, "train_steps = {}", self.bc.train_steps);
        let _ = writeln!(s, "batch_size = {}", self.bc.batch_size);
        let _ = writeln!(s, "lr = {}", self.bc.lr);
        let _ = writeln!(s, "seed = {}", self.bc.seed);
        let _ = writeln!(s, "reset_max_steps = {}", self.bc.reset_max_steps);
        let _ = writeln!(s, "reset_max_attempts = {}", self.bc.reset_max_attempts);
        if let Some(p) = &self.bc.multi_checkpoint {
            let _ = writeln!(s, "multi_checkpoint = {}", p.display());
        }
        if let Some(p) = &self.bc.single_checkpoint {
            let _ = writeln!(s, "single_checkpoint = {}", p.display());
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[prior]");
        let _ = writeln!(s, "budget = {}", self.prior_budget);
        for p in &self.prior {
            let _ = writeln!(s, "buffer = {}", p.print());
        }
        s
    }

    /// Parse a config file's contents over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: bad section", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(&section, key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply one `section.key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (key_path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' missing '='")))?;
        let (section, key) = key_path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key '{key_path}' needs section.key")))?;
        self.set(section, key, value.trim())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::Config(format!("unknown key '{section}.{key}'"));
        match section {
            "experiment" => match key {
                "task_id" => self.task_id = value.to_string(),
                "seed" => self.seed = parse_num(value)?,
                "mode" => self.mode = Mode::parse(value)?,
                "total_steps" => self.total_steps = parse_num(value)?,
                "eval_interval" => self.eval_interval = parse_num(value)?,
                "eval_episodes" => self.eval_episodes = parse_num(value)?,
                "random_steps" => self.random_steps = parse_num(value)?,
                "out_dir" => self.out_dir = PathBuf::from(value),
                "agent_checkpoint" => self.agent_checkpoint = Some(PathBuf::from(value)),
                _ => return Err(unknown()),
            },
            "env" => match key {
                "object" => {
                    // named objects reset the physical defaults
                    if let Ok(sec) = EnvSection::for_object(value) {
                        let keep = (self.env.horizon, self.env.noise, self.env.goal_degrees);
                        self.env = sec;
                        self.env.horizon = keep.0;
                        self.env.noise = keep.1;
                        self.env.goal_degrees = keep.2;
                    } else {
                        self.env.object = value.to_string();
                    }
                }
                "symmetry" => self.env.symmetry = parse_num(value)?,
                "rotation_gain" => self.env.rotation_gain = parse_num(value)?,
                "drop_threshold" => self.env.drop_threshold = parse_num(value)?,
                "horizon" => self.env.horizon = parse_num(value)?,
                "noise" => self.env.noise = parse_bool(value)?,
                "goal_degrees" => self.env.goal_degrees = parse_num(value)?,
                _ => return Err(unknown()),
            },
            "agent" => match key {
                "discount" => self.agent.discount = parse_num(value)?,
                "utd" => self.agent.utd = parse_num(value)?,
                "batch_size" => self.agent.batch_size = parse_num(value)?,
                "ensemble_size" => self.agent.ensemble_size = parse_num(value)?,
                "target_subset_size" => self.agent.target_subset_size = parse_num(value)?,
                "tau" => self.agent.tau = parse_num(value)?,
                "lr" => self.agent.lr = parse_num(value)?,
                "actor_hidden" => self.agent.actor_hidden = parse_dims(value)?,
                "critic_hidden" => self.agent.critic_hidden = parse_dims(value)?,
                "target_entropy" => {
                    self.agent.target_entropy = if value == "auto" {
                        None
                    } else {
                        Some(parse_num(value)?)
                    }
                }
                "actor_loss_min" => self.agent.actor_loss_min = parse_bool(value)?,
                "stratified_prior" => self.agent.stratified_prior = parse_bool(value)?,
                _ => return Err(unknown()),
            },
            "vice" => match key {
                "hidden" => self.vice.hidden = parse_dims(value)?,
                "goal_count" => self.vice.goal_count = parse_num(value)?,
                "mixup_alpha" => self.vice.cfg.mixup_alpha = parse_num(value)?,
                "label_smoothing" => self.vice.cfg.label_smoothing = parse_num(value)?,
                "gp_weight" => self.vice.cfg.gp_weight = parse_num(value)?,
                "per_batch_lambda" => self.vice.cfg.per_batch_lambda = parse_bool(value)?,
                "dropout" => self.vice.cfg.dropout_rates = parse_f64s(value)?,
                "lr" => self.vice.cfg.lr = parse_num(value)?,
                "batch_size" => self.vice.cfg.batch_size = parse_num(value)?,
                _ => return Err(unknown()),
            },
            "bc" => match key {
                "demo_primary" => self.bc.demo_primary = parse_num(value)?,
                "demo_extra" => self.bc.demo_extra = parse_num(value)?,
                "hidden" => self.bc.hidden = parse_dims(value)?,
                "train_steps" => self.bc.train_steps = parse_num(value)?,
                "batch_size" => self.bc.batch_size = parse_num(value)?,
                "lr" => self.bc.lr = parse_num(value)?,
                "seed" => self.bc.seed = parse_num(value)?,
                "reset_max_steps" => self.bc.reset_max_steps = parse_num(value)?,
                "reset_max_attempts" => self.bc.reset_max_attempts = parse_num(value)?,
                "multi_checkpoint" => self.bc.multi_checkpoint = Some(PathBuf::from(value)),
                "single_checkpoint" => self.bc.single_checkpoint = Some(PathBuf::from(value)),
                _ => return Err(unknown()),
            },
            "prior" => match key {
                "budget" => self.prior_budget = parse_num(value)?,
                "buffer" => self.prior.push(PriorFileSpec::parse(value)?),
                _ => return Err(unknown()),
            },
            _ => return Err(Error::Config(format!("unknown section '[{section}]'"))),
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("bad boolean '{other}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad numeric value '{s}'")))
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_num(p.trim())).collect()
}

fn parse_f64s(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_num(p.trim())).collect()
}

fn print_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn print_f64s(vals: &[f64]) -> String {
    vals.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
