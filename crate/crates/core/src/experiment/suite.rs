//! Comparison suites: donor tasks, scratch baselines, and bootstrapped arms.
//!
//! A suite is a set of training runs over shared seeds plus an aggregation
//! step. Completed runs are cached on disk (matched by their printed
//! config), so suites that share arms reuse each other's work, and the two
//! reset policies are trained once per object and loaded by every run.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::MlpParams;

use super::config::{ExperimentConfig, Mode, PriorFileSpec};
use super::runlog::{emit_curves, median, RunLog};
use super::training::{prepare_reset_pair, run_training};
use crate::bc::ResetPolicy;

/// The built-in comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Same object, new goal pose, bootstrapped from the first pose's data.
    TaskTransfer,
    /// New objects bootstrapped from other objects' data.
    ObjectTransfer,
    /// 60k vs 30k prior transitions.
    AblationBufferSize,
    /// Which donor task's data helps most.
    AblationOrdering,
    /// Policy fine-tuning vs buffer initialization.
    AblationFinetune,
    /// Stability when training far past convergence.
    LongTraining,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "task_transfer" => Ok(Suite::TaskTransfer),
            "object_transfer" => Ok(Suite::ObjectTransfer),
            "ablation_buffer_size" => Ok(Suite::AblationBufferSize),
            "ablation_ordering" => Ok(Suite::AblationOrdering),
            "ablation_finetune" => Ok(Suite::AblationFinetune),
            "long_training" => Ok(Suite::LongTraining),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::TaskTransfer => "task_transfer",
            Suite::ObjectTransfer => "object_transfer",
            Suite::AblationBufferSize => "ablation_buffer_size",
            Suite::AblationOrdering => "ablation_ordering",
            Suite::AblationFinetune => "ablation_finetune",
            Suite::LongTraining => "long_training",
        }
    }
}

/// Steps-to-threshold operating point per object.
pub fn threshold_for_object(object: &str) -> f64 {
    match object {
        "tpipe" => 0.6,
        "football" => 0.3,
        _ => 0.8,
    }
}

/// Budgets and the base (desk-scale) run configuration for suites.
#[derive(Debug, Clone)]
pub struct SuiteParams {
    /// First-pose donor run length; must cover the largest prior budget.
    pub donor_steps: u64,
    /// Donor run length for the other objects.
    pub donor_small_steps: u64,
    /// Budget for scratch baselines and fixed-budget comparison arms.
    pub scratch_steps: u64,
    pub prior_budget_large: usize,
    pub prior_budget_small: usize,
    pub base: ExperimentConfig,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            donor_steps: 70_000,
            donor_small_steps: 35_000,
            scratch_steps: 24_000,
            prior_budget_large: 60_000,
            prior_budget_small: 30_000,
            base: desk_config(),
        }
    }
}

/// Desk-scale run configuration: paper-faithful training structure with
/// network and batch sizes chosen so a full suite runs in minutes-to-hours
/// on a desktop CPU.
pub fn desk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.eval_interval = 1_000;
    cfg.eval_episodes = 20;
    cfg.random_steps = 1_000;
    cfg.agent.actor_hidden = vec![32, 32];
    cfg.agent.critic_hidden = vec![32, 32];
    cfg.agent.batch_size = 64;
    cfg.vice.hidden = vec![64];
    cfg.bc.hidden = vec![64, 64];
    cfg.bc.train_steps = 2_000;
    cfg.bc.batch_size = 128;
    cfg.bc.lr = 1e-3;
    cfg
}

/// Disk-backed registry of completed runs.
pub struct RunStore {
    base: PathBuf,
}

impl RunStore {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    pub fn run_dir(&self, task_id: &str, seed: u64) -> PathBuf {
        self.base.join(task_id).join(seed.to_string())
    }

    pub fn artifact(&self, task_id: &str, seed: u64, name: &str) -> PathBuf {
        self.run_dir(task_id, seed).join(name)
    }

    /// Run the experiment unless an identical completed run already exists.
    pub fn ensure_run(&self, cfg: &ExperimentConfig) -> Result<RunLog> {
        let mut cfg = cfg.clone();
        cfg.out_dir = self.base.clone();
        let dir = cfg.run_dir();
        if dir.join("done").exists() {
            let prev = std::fs::read_to_string(dir.join("config.txt")).unwrap_or_default();
            if prev == cfg.print() {
                if let Ok(log) = RunLog::load_csv(&dir.join("runlog.csv")) {
                    return Ok(log);
                }
            }
        }
        run_training(&cfg)
    }

    /// Train the reset pair for an object once and reuse it everywhere.
    pub fn ensure_reset_pair(&self, cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf)> {
        let dir = self.base.join("bc").join(&cfg.env.object);
        let multi = dir.join("reset_multi.ckpt");
        let single = dir.join("reset_single.ckpt");
        if !(multi.exists() && single.exists()) {
            std::fs::create_dir_all(&dir)?;
            let mut cfg = cfg.clone();
            cfg.bc.multi_checkpoint = None;
            cfg.bc.single_checkpoint = None;
            let pair = prepare_reset_pair(&cfg)?;
            if let (ResetPolicy::Cloned(m), ResetPolicy::Cloned(s)) =
                (&pair.multi_object, &pair.single_object)
            {
                std::fs::write(&multi, m.to_bytes())?;
                std::fs::write(&single, s.to_bytes())?;
            }
        }
        // sanity: loadable checkpoints
        MlpParams::from_bytes(&std::fs::read(&multi)?)?;
        MlpParams::from_bytes(&std::fs::read(&single)?)?;
        Ok((multi, single))
    }
}

/// One arm's runs and aggregate statistics.
#[derive(Debug, Clone)]
pub struct ArmSummary {
    pub name: String,
    pub threshold: f64,
    pub logs: Vec<RunLog>,
    pub per_seed_threshold: Vec<Option<u64>>,
    /// Median over seeds of steps-to-threshold; None when the median seed
    /// never crossed.
    pub median_threshold_steps: Option<f64>,
}

impl ArmSummary {
    fn new(name: impl Into<String>, threshold: f64, logs: Vec<RunLog>) -> Self {
        let per_seed_threshold: Vec<Option<u64>> =
            logs.iter().map(|l| l.steps_to_threshold(threshold)).collect();
        let median_threshold_steps = median_of_crossings(&per_seed_threshold);
        Self {
            name: name.into(),
            threshold,
            logs,
            per_seed_threshold,
            median_threshold_steps,
        }
    }

    /// Median success over seeds at an exact eval step.
    pub fn median_success_at(&self, steps: u64) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.logs.len());
        for log in &self.logs {
            let row = log
                .rows
                .iter()
                .find(|r| r.steps == steps)
                .ok_or_else(|| Error::Config(format!("no eval row at step {steps}")))?;
            vals.push(row.success_rate);
        }
        Ok(median(&vals))
    }

    /// Median success curve over seeds (requires a shared eval grid).
    pub fn median_curve(&self) -> Result<Vec<(u64, f64)>> {
        let grid: Vec<u64> = self.logs[0].rows.iter().map(|r| r.steps).collect();
        for log in &self.logs {
            if log.rows.len() != grid.len()
                || log.rows.iter().zip(&grid).any(|(r, &g)| r.steps != g)
            {
                return Err(Error::Config("arm logs have mismatched grids".into()));
            }
        }
        Ok(grid
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let vals: Vec<f64> = self.logs.iter().map(|l| l.rows[i].success_rate).collect();
                (s, median(&vals))
            })
            .collect())
    }
}

/// Median treating non-crossings as +infinity; None when the median itself
/// is a non-crossing.
fn median_of_crossings(crossings: &[Option<u64>]) -> Option<f64> {
    let mut vals: Vec<f64> = crossings
        .iter()
        .map(|c| c.map(|v| v as f64).unwrap_or(f64::INFINITY))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    let m = if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    };
    m.is_finite().then_some(m)
}

/// Aggregated suite outcome plus the emitted files.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub arms: Vec<ArmSummary>,
    pub metrics: Vec<(String, f64)>,
    pub lines: Vec<String>,
}

impl SuiteReport {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }
}

struct SuiteCtx<'a> {
    store: &'a RunStore,
    params: &'a SuiteParams,
    seeds: &'a [u64],
}

impl<'a> SuiteCtx<'a> {
    fn arm_config(&self, task_id: &str, object: &str, goal_deg: f64, seed: u64) -> ExperimentConfig {
        let mut cfg = self.params.base.clone();
        cfg.task_id = task_id.to_string();
        cfg.seed = seed;
        cfg.mode = Mode::Scratch;
        cfg.env = super::config::EnvSection::for_object(object)
            .expect("standard object")
            .clone();
        cfg.env.horizon = self.params.base.env.horizon;
        cfg.env.noise = self.params.base.env.noise;
        cfg.env.goal_degrees = goal_deg;
        cfg.out_dir = self.store.base().to_path_buf();
        cfg.prior = Vec::new();
        cfg.agent_checkpoint = None;
        cfg
    }

    fn with_reset_cache(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        let (multi, single) = self.store.ensure_reset_pair(&cfg)?;
        cfg.bc.multi_checkpoint = Some(multi);
        cfg.bc.single_checkpoint = Some(single);
        Ok(cfg)
    }

    /// Run one arm across all seeds (in parallel) and summarize it.
    fn run_arm(&self, configs: Vec<ExperimentConfig>, name: &str, threshold: f64) -> Result<ArmSummary> {
        let logs: Result<Vec<RunLog>> = configs
            .par_iter()
            .map(|cfg| self.store.ensure_run(cfg))
            .collect();
        Ok(ArmSummary::new(name, threshold, logs?))
    }

    fn donor_pose_a(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.arm_config("prong_pose_a", "prong", 0.0, 0);
        cfg.total_steps = self.params.donor_steps;
        self.with_reset_cache(cfg)
    }

    fn donor_other(&self, object: &str) -> Result<ExperimentConfig> {
        let mut cfg = self.arm_config(&format!("{object}_donor"), object, 0.0, 0);
        cfg.total_steps = self.params.donor_small_steps;
        self.with_reset_cache(cfg)
    }

    fn pose_b_scratch(&self, seed: u64) -> Result<ExperimentConfig> {
        let mut cfg = self.arm_config("prong_pose_b_scratch", "prong", 60.0, seed);
        cfg.total_steps = self.params.scratch_steps;
        self.with_reset_cache(cfg)
    }

    /// Pose-B arm bootstrapped from given donors at a given budget.
    fn pose_b_init(
        &self,
        name: &str,
        seed: u64,
        donors: &[(&str, bool)],
        budget: usize,
        total_steps: u64,
    ) -> Result<ExperimentConfig> {
        let mut cfg = self.arm_config(name, "prong", 60.0, seed);
        cfg.mode = Mode::BufferInit;
        cfg.prior_budget = budget;
        cfg.total_steps = total_steps;
        for &(task, frozen) in donors {
            cfg.prior.push(PriorFileSpec {
                path: self.store.artifact(task, 0, &format!("{task}.rbuf")),
                frozen,
                classifier: frozen
                    .then(|| self.store.artifact(task, 0, &format!("{task}.vice"))),
            });
        }
        self.with_reset_cache(cfg)
    }
}

/// Execute a comparison suite over the given seeds, writing aggregated
/// curves and a report under the store.
pub fn run_suite(
    suite: Suite,
    seeds: &[u64],
    store: &RunStore,
    params: &SuiteParams,
) -> Result<SuiteReport> {
    if seeds.is_empty() {
        return Err(Error::Empty("suite seeds"));
    }
    let ctx = SuiteCtx {
        store,
        params,
        seeds,
    };
    let mut report = match suite {
        Suite::TaskTransfer => task_transfer(&ctx)?,
        Suite::ObjectTransfer => object_transfer(&ctx)?,
        Suite::AblationBufferSize => ablation_buffer_size(&ctx)?,
        Suite::AblationOrdering => ablation_ordering(&ctx)?,
        Suite::AblationFinetune => ablation_finetune(&ctx)?,
        Suite::LongTraining => long_training(&ctx)?,
    };
    write_outputs(store, &mut report)?;
    Ok(report)
}

fn task_transfer(ctx: &SuiteCtx) -> Result<SuiteReport> {
    let thr = threshold_for_object("prong");
    ctx.store.ensure_run(&ctx.donor_pose_a()?)?;

    let scratch_cfgs: Result<Vec<_>> = ctx.seeds.iter().map(|&s| ctx.pose_b_scratch(s)).collect();
    let scratch = ctx.run_arm(scratch_cfgs?, "pose_b_scratch", thr)?;

    let init_cfgs: Result<Vec<_>> = ctx
        .seeds
        .iter()
        .map(|&s| {
            ctx.pose_b_init(
                "prong_pose_b_init60",
                s,
                &[("prong_pose_a", false)],
                ctx.params.prior_budget_large,
                ctx.params.scratch_steps,
            )
        })
        .collect();
    let init = ctx.run_arm(init_cfgs?, "pose_b_init60", thr)?;

    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    if let (Some(ts), Some(ti)) = (init.median_threshold_steps, scratch.median_threshold_steps) {
        // note: ts is the init median, ti the scratch median
        let ratio = ts / ti;
        metrics.push(("speedup_ratio".into(), ratio));
        lines.push(format!(
            "steps-to-{thr:.0e}: init {ts:.0} vs scratch {ti:.0} (ratio {ratio:.3})"
        ));
    } else {
        lines.push("one arm never crossed the threshold".into());
    }
    Ok(SuiteReport {
        suite: Suite::TaskTransfer,
        arms: vec![scratch, init],
        metrics,
        lines,
    })
}

fn object_transfer(ctx: &SuiteCtx) -> Result<SuiteReport> {
    ctx.store.ensure_run(&ctx.donor_pose_a()?)?;
    ctx.store.ensure_run(&ctx.donor_other("tpipe")?)?;

    let mut arms = Vec::new();
    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    for object in ["tpipe", "football"] {
        let thr = threshold_for_object(object);
        let scratch_cfgs: Result<Vec<_>> = ctx
            .seeds
            .iter()
            .map(|&s| {
                let mut cfg = ctx.arm_config(&format!("{object}_scratch"), object, 60.0, s);
                cfg.total_steps = ctx.params.scratch_steps;
                ctx.with_reset_cache(cfg)
            })
            .collect();
        let scratch = ctx.run_arm(scratch_cfgs?, &format!("{object}_scratch"), thr)?;

        let donors: Vec<(&str, bool)> = if object == "tpipe" {
            vec![("prong_pose_a", true)]
        } else {
            vec![("prong_pose_a", true), ("tpipe_donor", true)]
        };
        let init_cfgs: Result<Vec<_>> = ctx
            .seeds
            .iter()
            .map(|&s| {
                let mut cfg = ctx.arm_config(&format!("{object}_init"), object, 60.0, s);
                cfg.mode = Mode::BufferInit;
                cfg.prior_budget = ctx.params.prior_budget_large;
                cfg.total_steps = ctx.params.scratch_steps;
                for &(task, frozen) in &donors {
                    cfg.prior.push(PriorFileSpec {
                        path: ctx.store.artifact(task, 0, &format!("{task}.rbuf")),
                        frozen,
                        classifier: frozen
                            .then(|| ctx.store.artifact(task, 0, &format!("{task}.vice"))),
                    });
                }
                ctx.with_reset_cache(cfg)
            })
            .collect();
        let init = ctx.run_arm(init_cfgs?, &format!("{object}_init"), thr)?;

        if let (Some(ti), Some(ts)) = (init.median_threshold_steps, scratch.median_threshold_steps)
        {
            metrics.push((format!("{object}_speedup_ratio"), ti / ts));
            lines.push(format!(
                "{object}: init {ti:.0} vs scratch {ts:.0} steps to {thr}"
            ));
        } else {
            lines.push(format!("{object}: an arm never crossed {thr}"));
        }
        arms.push(scratch);
        arms.push(init);
    }
    Ok(SuiteReport {
        suite: Suite::ObjectTransfer,
        arms,
        metrics,
        lines,
    })
}

fn ablation_buffer_size(ctx: &SuiteCtx) -> Result<SuiteReport> {
    let thr = threshold_for_object("prong");
    ctx.store.ensure_run(&ctx.donor_pose_a()?)?;

    let mut arms = Vec::new();
    for (name, budget) in [
        ("pose_b_init60", ctx.params.prior_budget_large),
        ("pose_b_init30", ctx.params.prior_budget_small),
    ] {
        let cfgs: Result<Vec<_>> = ctx
            .seeds
            .iter()
            .map(|&s| {
                ctx.pose_b_init(
                    &format!("prong_{name}"),
                    s,
                    &[("prong_pose_a", false)],
                    budget,
                    ctx.params.scratch_steps,
                )
            })
            .collect();
        arms.push(ctx.run_arm(cfgs?, name, thr)?);
    }

    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    match (arms[0].median_threshold_steps, arms[1].median_threshold_steps) {
        (Some(t60), Some(t30)) => {
            metrics.push(("steps_60k".into(), t60));
            metrics.push(("steps_30k".into(), t30));
            lines.push(format!("60k crossed at {t60:.0}, 30k at {t30:.0}"));
        }
        (t60, t30) => {
            lines.push(format!("crossings: 60k {t60:?}, 30k {t30:?}"));
        }
    }
    Ok(SuiteReport {
        suite: Suite::AblationBufferSize,
        arms,
        metrics,
        lines,
    })
}

fn ablation_ordering(ctx: &SuiteCtx) -> Result<SuiteReport> {
    let thr = threshold_for_object("prong");
    ctx.store.ensure_run(&ctx.donor_pose_a()?)?;
    ctx.store.ensure_run(&ctx.donor_other("tpipe")?)?;
    ctx.store.ensure_run(&ctx.donor_other("football")?)?;

    let scratch_cfgs: Result<Vec<_>> = ctx.seeds.iter().map(|&s| ctx.pose_b_scratch(s)).collect();
    let scratch = ctx.run_arm(scratch_cfgs?, "pose_b_scratch", thr)?;

    let budget = ctx.params.prior_budget_small;
    let arms_spec: [(&str, &str, Vec<(&str, bool)>); 3] = [
        (
            "init_same_object",
            "prong_pose_b_init30",
            vec![("prong_pose_a", false)],
        ),
        (
            "init_from_tpipe",
            "prong_pose_b_init_tpipe",
            vec![("tpipe_donor", true)],
        ),
        (
            "init_from_football",
            "prong_pose_b_init_football",
            vec![("football_donor", true)],
        ),
    ];
    let mut arms = vec![scratch];
    for (arm_name, task_id, donors) in arms_spec {
        let cfgs: Result<Vec<_>> = ctx
            .seeds
            .iter()
            .map(|&s| ctx.pose_b_init(task_id, s, &donors, budget, ctx.params.scratch_steps))
            .collect();
        arms.push(ctx.run_arm(cfgs?, arm_name, thr)?);
    }

    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    if let Some(budget_steps) = arms[0].median_threshold_steps {
        let at = budget_steps as u64;
        for arm in &arms {
            let v = arm.median_success_at(at)?;
            metrics.push((format!("success_at_budget_{}", arm.name), v));
            lines.push(format!("{}: median success {v:.2} at step {at}", arm.name));
        }
    } else {
        lines.push("scratch never crossed; no fixed budget defined".into());
    }
    Ok(SuiteReport {
        suite: Suite::AblationOrdering,
        arms,
        metrics,
        lines,
    })
}

fn ablation_finetune(ctx: &SuiteCtx) -> Result<SuiteReport> {
    let thr = threshold_for_object("prong");
    let donor = ctx.donor_pose_a()?;
    ctx.store.ensure_run(&donor)?;

    let init_cfgs: Result<Vec<_>> = ctx
        .seeds
        .iter()
        .map(|&s| {
            ctx.pose_b_init(
                "prong_pose_b_init60",
                s,
                &[("prong_pose_a", false)],
                ctx.params.prior_budget_large,
                ctx.params.scratch_steps,
            )
        })
        .collect();
    let init = ctx.run_arm(init_cfgs?, "pose_b_init60", thr)?;

    let ft_cfgs: Result<Vec<_>> = ctx
        .seeds
        .iter()
        .map(|&s| {
            let mut cfg = ctx.arm_config("prong_pose_b_finetune", "prong", 60.0, s);
            cfg.mode = Mode::Finetune;
            cfg.total_steps = ctx.params.scratch_steps;
            cfg.agent_checkpoint =
                Some(ctx.store.artifact("prong_pose_a", 0, "prong_pose_a.agent"));
            ctx.with_reset_cache(cfg)
        })
        .collect();
    let finetune = ctx.run_arm(ft_cfgs?, "pose_b_finetune", thr)?;

    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    if let Some(t_init) = init.median_threshold_steps {
        let at = t_init as u64;
        let vi = init.median_success_at(at)?;
        let vf = finetune.median_success_at(at)?;
        metrics.push(("init_success_at_budget".into(), vi));
        metrics.push(("finetune_success_at_budget".into(), vf));
        lines.push(format!(
            "at step {at}: buffer init {vi:.2} vs finetune {vf:.2}"
        ));
    } else {
        lines.push("buffer-init arm never crossed the threshold".into());
    }
    Ok(SuiteReport {
        suite: Suite::AblationFinetune,
        arms: vec![init, finetune],
        metrics,
        lines,
    })
}

fn long_training(ctx: &SuiteCtx) -> Result<SuiteReport> {
    let thr = threshold_for_object("prong");
    ctx.store.ensure_run(&ctx.donor_pose_a()?)?;

    let init_cfgs: Result<Vec<_>> = ctx
        .seeds
        .iter()
        .map(|&s| {
            ctx.pose_b_init(
                "prong_pose_b_init60",
                s,
                &[("prong_pose_a", false)],
                ctx.params.prior_budget_large,
                ctx.params.scratch_steps,
            )
        })
        .collect();
    let init = ctx.run_arm(init_cfgs?, "pose_b_init60", thr)?;
    let t_star = init.median_threshold_steps.ok_or_else(|| {
        Error::Config("buffer-init arm never converged; no long-training budget".into())
    })?;
    // continue to 3x convergence, rounded up to the eval grid
    let interval = ctx.params.base.eval_interval;
    let long_total = ((3.0 * t_star) as u64).div_ceil(interval) * interval;

    let long_cfgs: Result<Vec<_>> = ctx
        .seeds
        .iter()
        .map(|&s| {
            ctx.pose_b_init(
                "prong_pose_b_long",
                s,
                &[("prong_pose_a", false)],
                ctx.params.prior_budget_large,
                long_total,
            )
        })
        .collect();
    let long = ctx.run_arm(long_cfgs?, "pose_b_long", thr)?;

    // EMA-smoothed median curve: the end must stay near the peak
    let curve = long.median_curve()?;
    let mut ema = Vec::with_capacity(curve.len());
    let mut acc = curve[0].1;
    for &(_, v) in &curve {
        acc = 0.9 * acc + 0.1 * v;
        ema.push(acc);
    }
    let peak = ema.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let final_v = *ema.last().unwrap();
    let metrics = vec![
        ("convergence_steps".into(), t_star),
        ("long_total_steps".into(), long_total as f64),
        ("ema_peak".into(), peak),
        ("ema_final".into(), final_v),
    ];
    let lines = vec![format!(
        "long run to {long_total}: smoothed success peak {peak:.2}, final {final_v:.2}"
    )];
    Ok(SuiteReport {
        suite: Suite::LongTraining,
        arms: vec![init, long],
        metrics,
        lines,
    })
}

/// Per-arm curve CSVs, a combined gnuplot-compatible table, and the report.
fn write_outputs(store: &RunStore, report: &mut SuiteReport) -> Result<()> {
    let dir = store.base().join("suites").join(report.suite.as_str());
    std::fs::create_dir_all(&dir)?;
    for arm in &report.arms {
        emit_curves(&arm.logs, &dir.join(format!("{}.csv", arm.name)))?;
    }

    // combined table over the shared grid prefix
    let min_rows = report
        .arms
        .iter()
        .map(|a| a.logs.iter().map(|l| l.rows.len()).min().unwrap_or(0))
        .min()
        .unwrap_or(0);
    let mut dat = String::from("# steps");
    for arm in &report.arms {
        dat.push_str(&format!(" {0}_median {0}_min {0}_max", arm.name));
    }
    dat.push('\n');
    for i in 0..min_rows {
        let steps = report.arms[0].logs[0].rows[i].steps;
        dat.push_str(&steps.to_string());
        for arm in &report.arms {
            let vals: Vec<f64> = arm.logs.iter().map(|l| l.rows[i].success_rate).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            dat.push_str(&format!(" {} {} {}", median(&vals), lo, hi));
        }
        dat.push('\n');
    }
    std::fs::write(dir.join("curves.dat"), dat)?;

    let mut text = format!("suite: {}\n", report.suite.as_str());
    for (k, v) in &report.metrics {
        text.push_str(&format!("{k} = {v}\n"));
    }
    for l in &report.lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(dir.join("report.txt"), &text)?;
    Ok(())
}
