//! Experiment command line.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags, bad
//! config files, bad file headers), 3 when training aborts on a non-finite
//! loss or gradient, 1 for anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rbt_core::agent::ActorCritic;
use rbt_core::bc;
use rbt_core::env::{self, ObjectSpec};
use rbt_core::error::Error;
use rbt_core::experiment::{
    run_eval, run_suite, run_training, ExperimentConfig, RunStore, Suite, SuiteParams,
};
use rbt_core::replay::TaskBuffer;
use rbt_core::rewards::GoalSet;

#[derive(Parser)]
#[command(
    name = "rbt",
    about = "Replay-bootstrapped training on a toy in-hand reorientation task",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set agent.utd=1 (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg.set_override(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment and write its artifacts.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a saved agent checkpoint.
    Eval {
        /// Agent checkpoint (.agent).
        #[arg(long)]
        agent: PathBuf,
        /// Evaluation episodes.
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Classifier export (.vice) for the mean-reward diagnostic.
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a comparison suite over several seeds.
    Suite {
        /// One of: task_transfer, object_transfer, ablation_buffer_size,
        /// ablation_ordering, ablation_finetune, long_training.
        #[arg(long)]
        name: String,
        /// Comma-separated seeds, e.g. 0,1,2,3.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Artifact directory shared by all runs of the suite.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Donor run length (first pose).
        #[arg(long)]
        donor_steps: Option<u64>,
        /// Donor run length (other objects).
        #[arg(long)]
        donor_small_steps: Option<u64>,
        /// Budget for scratch baselines and comparison arms.
        #[arg(long)]
        scratch_steps: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Roll the scripted expert and save successful pickups as demos.
    CollectDemos {
        #[arg(long)]
        object: String,
        #[arg(long, default_value_t = 160)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (defaults to <object>.demos).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate goal examples for a task and save them.
    CollectGoals {
        #[arg(long)]
        object: String,
        #[arg(long, default_value_t = 0.0)]
        goal_degrees: f64,
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (defaults to <object>.goals).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print count, dims, and frozen fraction of a buffer file.
    BufferInfo {
        #[arg(long)]
        file: PathBuf,
    },
    /// Print the merged configuration (defaults plus file plus overrides).
    PrintConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) => 3,
        Error::Config(_)
        | Error::BadMagic { .. }
        | Error::VersionMismatch { .. }
        | Error::Truncated { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config } => {
            let cfg = config.build()?;
            let log = run_training(&cfg)?;
            let last = log.rows.last().expect("at least the initial eval row");
            println!(
                "task {} seed {}: {} steps, final success {:.2}, artifacts in {}",
                cfg.task_id,
                cfg.seed,
                last.steps,
                last.success_rate,
                cfg.run_dir().display()
            );
            Ok(())
        }
        Command::Eval {
            agent,
            episodes,
            classifier,
            seed,
            config,
        } => {
            let cfg = config.build()?;
            let agent = ActorCritic::load(&agent)?;
            let cls = classifier
                .map(|p| rbt_core::rewards::ViceClassifier::load(&p))
                .transpose()?;
            let object = cfg.env.object_spec()?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let stats = run_eval(
                &agent,
                &object,
                cfg.env.goal_radians(),
                cfg.env.horizon,
                cfg.env.noise,
                episodes,
                cls.as_ref(),
                &mut rng,
            )?;
            println!(
                "success rate {:.3} over {} episodes (drop rate {:.3}, mean length {:.1})",
                stats.success_rate, episodes, stats.drop_rate, stats.mean_length
            );
            Ok(())
        }
        Command::Suite {
            name,
            seeds,
            out,
            donor_steps,
            donor_small_steps,
            scratch_steps,
            config,
        } => {
            let suite = Suite::parse(&name)?;
            let mut params = SuiteParams::default();
            if config.config.is_some() || !config.overrides.is_empty() {
                params.base = config.build()?;
            }
            if let Some(v) = donor_steps {
                params.donor_steps = v;
            }
            if let Some(v) = donor_small_steps {
                params.donor_small_steps = v;
            }
            if let Some(v) = scratch_steps {
                params.scratch_steps = v;
            }
            let store = RunStore::new(out);
            let report = run_suite(suite, &seeds, &store, &params)?;
            println!("suite {}:", report.suite.as_str());
            for (k, v) in &report.metrics {
                println!("  {k} = {v}");
            }
            for line in &report.lines {
                println!("  {line}");
            }
            println!(
                "  outputs in {}",
                store
                    .base()
                    .join("suites")
                    .join(report.suite.as_str())
                    .display()
            );
            Ok(())
        }
        Command::CollectDemos {
            object,
            episodes,
            seed,
            out,
        } => {
            let spec = ObjectSpec::by_name(&object)?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let demos = bc::collect_demos(&spec, episodes, 100, &mut rng)?;
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{object}.demos")));
            demos.save(&path)?;
            println!(
                "{} successful pickups ({} pairs) -> {}",
                demos.episodes.len(),
                demos.len_pairs(),
                path.display()
            );
            Ok(())
        }
        Command::CollectGoals {
            object,
            goal_degrees,
            count,
            seed,
            out,
        } => {
            let spec = ObjectSpec::by_name(&object)?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let obs = env::collect_goal_examples(&spec, goal_degrees.to_radians(), count, &mut rng)?;
            let goals = GoalSet::new(object.clone(), obs)?;
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{object}.goals")));
            goals.save(&path)?;
            println!("{count} goal examples -> {}", path.display());
            Ok(())
        }
        Command::BufferInfo { file } => {
            let buf = TaskBuffer::load(&file)?;
            println!("task_id: {}", buf.task_id());
            println!("count: {}", buf.len());
            println!(
                "obs_dim: {}  act_dim: {}",
                buf.obs_dim().map_or("-".into(), |d| d.to_string()),
                buf.act_dim().map_or("-".into(), |d| d.to_string()),
            );
            println!("frozen fraction: {:.4}", buf.frozen_fraction());
            Ok(())
        }
        Command::PrintConfig { config } => {
            let cfg = config.build()?;
            print!("{}", cfg.print());
            Ok(())
        }
    }
}
