//! The autonomous training loop and policy evaluation.
//!
//! One run: train (or load) the behavior-cloned reset pair, load and
//! subsample prior buffers, then alternate resets with forward episodes.
//! The agent updates once per environment step, the classifier once per
//! completed episode; the frozen policy is evaluated on a fixed interval
//! with scripted-expert resets so the curves measure the in-hand skill
//! only. All randomness flows through per-component streams of the run
//! seed, so identical configs reproduce identical logs.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::ActorCritic;
use crate::bc::{self, ResetPolicy, ResetPolicyPair};
use crate::env::{
    collect_goal_examples, forward_observation, step_forward, HandState, ObjectSpec,
    FORWARD_ACT_DIM, FORWARD_OBS_DIM,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, MlpParams, MlpSpec, OutputActivation};
use crate::replay::{PriorDataset, TaskBuffer, Transition, DEFAULT_CAPACITY};
use crate::rewards::{vice_update, GoalSet, ViceClassifier};

use super::config::{ExperimentConfig, Mode};
use super::runlog::{EpisodeDiag, EvalRow, RunLog};

/// RNG streams of the run seed. Evaluation gets a fresh stream per eval
/// index so the training tape is independent of the eval schedule.
mod stream {
    pub const ENV: u64 = 1;
    pub const AGENT: u64 = 2;
    pub const VICE: u64 = 3;
    pub const GOALS: u64 = 4;
    pub const EVAL_BASE: u64 = 1000;
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Aggregate results of one evaluation block.
#[derive(Debug, Clone, Copy)]
pub struct EvalStats {
    pub success_rate: f64,
    pub drop_rate: f64,
    pub mean_vice_reward: f64,
    pub mean_length: f64,
}

/// Evaluate the policy: fresh scripted-expert resets, deterministic
/// actions, ground-truth success at episode end.
pub fn run_eval(
    agent: &ActorCritic,
    object: &ObjectSpec,
    goal: f64,
    horizon: usize,
    noise: bool,
    episodes: usize,
    classifier: Option<&ViceClassifier>,
    rng: &mut impl Rng,
) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(Error::Config("eval episodes must be >= 1".into()));
    }
    let expert_pair = ResetPolicyPair::scripted();
    let mut successes = 0usize;
    let mut drops = 0usize;
    let mut total_len = 0usize;
    let mut vice_sum = 0.0;
    let mut vice_count = 0usize;
    for _ in 0..episodes {
        let mut state = HandState::new_reset(rng);
        bc::execute_reset(&expert_pair, &mut state, 100, 5, rng)?;
        let mut obs = forward_observation(&state);
        let mut len = 0;
        for _ in 0..horizon {
            let action = agent.act(&obs, true, rng)?;
            obs = step_forward(&mut state, &action, object, noise, rng)?;
            len += 1;
            if let Some(c) = classifier {
                vice_sum += c.vice_reward(&obs)?;
                vice_count += 1;
            }
            if !state.holding {
                drops += 1;
                break;
            }
        }
        total_len += len;
        if crate::env::evaluate_success(&state, goal, object) {
            successes += 1;
        }
    }
    Ok(EvalStats {
        success_rate: successes as f64 / episodes as f64,
        drop_rate: drops as f64 / episodes as f64,
        mean_vice_reward: if vice_count > 0 {
            vice_sum / vice_count as f64
        } else {
            0.0
        },
        mean_length: total_len as f64 / episodes as f64,
    })
}

fn reset_policy_spec(hidden: &[usize]) -> MlpSpec {
    MlpSpec::new(
        crate::env::RESET_OBS_DIM,
        hidden.to_vec(),
        crate::env::RESET_ACT_DIM,
    )
    .with_activations(Activation::Relu, OutputActivation::Tanh)
}

/// Demo episode count for one object: the first object gets the full set,
/// later objects a smaller top-up.
fn demo_episodes_for(object: &str, cfg: &ExperimentConfig) -> usize {
    if object == "prong" {
        cfg.bc.demo_primary
    } else {
        cfg.bc.demo_extra
    }
}

/// Train (or load) the two reset policies: multi-object from demos across
/// the standard objects, single-object from the current object's demos.
pub fn prepare_reset_pair(cfg: &ExperimentConfig) -> Result<ResetPolicyPair> {
    if let (Some(multi), Some(single)) = (&cfg.bc.multi_checkpoint, &cfg.bc.single_checkpoint) {
        let multi = MlpParams::from_bytes(&std::fs::read(multi)?)?;
        let single = MlpParams::from_bytes(&std::fs::read(single)?)?;
        return Ok(ResetPolicyPair::new(
            ResetPolicy::Cloned(multi),
            ResetPolicy::Cloned(single),
        ));
    }
    let spec = reset_policy_spec(&cfg.bc.hidden);
    let standard = ["prong", "tpipe", "football"];
    let mut multi_demos = bc::DemoSet::default();
    let mut single_demos = bc::DemoSet::default();
    if standard.contains(&cfg.env.object.as_str()) {
        for (i, name) in standard.iter().enumerate() {
            let object = ObjectSpec::by_name(name)?;
            let mut rng = rng_stream(cfg.bc.seed, 10 + i as u64);
            let demos = bc::collect_demos(
                &object,
                demo_episodes_for(name, cfg),
                cfg.bc.reset_max_steps,
                &mut rng,
            )?;
            if *name == cfg.env.object {
                single_demos = demos.clone();
            }
            multi_demos.extend(demos);
        }
    } else {
        let object = cfg.env.object_spec()?;
        let mut rng = rng_stream(cfg.bc.seed, 10);
        let demos = bc::collect_demos(
            &object,
            cfg.bc.demo_primary,
            cfg.bc.reset_max_steps,
            &mut rng,
        )?;
        single_demos = demos.clone();
        multi_demos = demos;
    }
    let multi = bc::bc_train(
        &multi_demos,
        &spec,
        cfg.bc.train_steps,
        cfg.bc.batch_size,
        cfg.bc.lr,
        cfg.bc.seed,
    )?;
    let single = bc::bc_train(
        &single_demos,
        &spec,
        cfg.bc.train_steps,
        cfg.bc.batch_size,
        cfg.bc.lr,
        cfg.bc.seed.wrapping_add(1),
    )?;
    Ok(ResetPolicyPair::new(
        ResetPolicy::Cloned(multi),
        ResetPolicy::Cloned(single),
    ))
}

/// Load, subsample, and relabel the prior buffers. The budget is split
/// evenly across files; frozen files are labeled once by their exported
/// classifier and marked immutable.
pub(crate) fn load_prior(cfg: &ExperimentConfig) -> Result<PriorDataset> {
    if cfg.prior.is_empty() {
        return Ok(PriorDataset::empty());
    }
    let n_files = cfg.prior.len();
    let base_share = cfg.prior_budget / n_files;
    let remainder = cfg.prior_budget % n_files;
    let mut buffers = Vec::with_capacity(n_files);
    for (i, p) in cfg.prior.iter().enumerate() {
        let buf = TaskBuffer::load(&p.path)?;
        let share = base_share + usize::from(i < remainder);
        let take = share.min(buf.len());
        let mut buf = buf.subsample(take, cfg.seed.wrapping_add(7700 + i as u64))?;
        if p.frozen {
            let cls_path = p
                .classifier
                .as_ref()
                .expect("validated: frozen buffer has classifier");
            let cls = ViceClassifier::load(cls_path)?;
            buf.set_all_frozen(false);
            buf.relabel_with(&|obs: &[f32]| cls.vice_reward(obs))?;
            buf.set_all_frozen(true);
        } else {
            buf.set_all_frozen(false);
        }
        buffers.push(buf);
    }
    Ok(PriorDataset::new(buffers))
}

/// Run one full training experiment and write its artifacts under
/// `out_dir/task_id/seed/`.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunLog> {
    cfg.validate()?;
    let object = cfg.env.object_spec()?;
    let goal = cfg.env.goal_radians();
    let run_dir = cfg.run_dir();
    std::fs::create_dir_all(&run_dir)?;

    let start = Instant::now();
    let mut rng_env = rng_stream(cfg.seed, stream::ENV);
    let mut rng_agent = rng_stream(cfg.seed, stream::AGENT);
    let mut rng_vice = rng_stream(cfg.seed, stream::VICE);
    let mut rng_goals = rng_stream(cfg.seed, stream::GOALS);

    // 1. reset policies
    let reset_pair = prepare_reset_pair(cfg)?;
    if let (ResetPolicy::Cloned(m), ResetPolicy::Cloned(s)) =
        (&reset_pair.multi_object, &reset_pair.single_object)
    {
        std::fs::write(run_dir.join("reset_multi.ckpt"), m.to_bytes())?;
        std::fs::write(run_dir.join("reset_single.ckpt"), s.to_bytes())?;
    }

    // 2. prior data
    let prior = load_prior(cfg)?;

    // 3. goal examples and classifier
    let goal_obs = collect_goal_examples(&object, goal, cfg.vice.goal_count, &mut rng_goals)?;
    let goals = GoalSet::new(cfg.task_id.clone(), goal_obs)?;
    let mut classifier = ViceClassifier::new(
        FORWARD_OBS_DIM,
        cfg.vice.hidden.clone(),
        cfg.vice.cfg.clone(),
        cfg.seed ^ 0x5eed,
    )?;

    // 4. agent
    let mut agent = ActorCritic::new(
        FORWARD_OBS_DIM,
        FORWARD_ACT_DIM,
        cfg.agent.clone(),
        cfg.seed ^ 0xa6e57,
    )?;
    if cfg.mode == Mode::Finetune {
        let ckpt = ActorCritic::load(cfg.agent_checkpoint.as_ref().expect("validated"))?;
        agent.adopt_network_params(&ckpt)?;
    }

    let mut online = TaskBuffer::new(cfg.task_id.clone(), DEFAULT_CAPACITY);
    let mut state = HandState::new_reset(&mut rng_env);
    let mut log = RunLog::new(cfg.task_id.clone(), cfg.seed);

    let mut steps: u64 = 0;
    let mut eval_index: u64 = 0;
    let mut attempts_since_eval: u64 = 0;
    let mut resets_since_eval: u64 = 0;

    let do_eval = |agent: &ActorCritic,
                       classifier: &ViceClassifier,
                       steps: u64,
                       eval_index: &mut u64,
                       attempts: &mut u64,
                       resets: &mut u64,
                       log: &mut RunLog|
     -> Result<()> {
        let mut rng_eval = rng_stream(cfg.seed, stream::EVAL_BASE + *eval_index);
        *eval_index += 1;
        let stats = run_eval(
            agent,
            &object,
            goal,
            cfg.env.horizon,
            cfg.env.noise,
            cfg.eval_episodes,
            Some(classifier),
            &mut rng_eval,
        )?;
        let mean_attempts = if *resets > 0 {
            *attempts as f64 / *resets as f64
        } else {
            0.0
        };
        *attempts = 0;
        *resets = 0;
        log.push_row(EvalRow {
            steps,
            wall_clock_s: start.elapsed().as_secs_f64(),
            success_rate: stats.success_rate,
            mean_vice_reward: stats.mean_vice_reward,
            drop_rate: stats.drop_rate,
            mean_reset_attempts: mean_attempts,
        })
    };

    do_eval(
        &agent,
        &classifier,
        0,
        &mut eval_index,
        &mut attempts_since_eval,
        &mut resets_since_eval,
        &mut log,
    )?;

    'outer: while steps < cfg.total_steps {
        if !state.holding {
            let outcome = bc::execute_reset(
                &reset_pair,
                &mut state,
                cfg.bc.reset_max_steps,
                cfg.bc.reset_max_attempts,
                &mut rng_env,
            )?;
            attempts_since_eval += outcome.attempts as u64;
            resets_since_eval += 1;
        }
        let mut obs = forward_observation(&state);
        let mut ep_len = 0usize;
        let mut completed = false;
        let mut dropped = false;
        for _ in 0..cfg.env.horizon {
            let action: Vec<f64> = if steps < cfg.random_steps {
                (0..FORWARD_ACT_DIM)
                    .map(|_| rng_agent.random_range(-1.0..1.0))
                    .collect()
            } else {
                agent.act(&obs, false, &mut rng_agent)?
            };
            let next_obs = step_forward(&mut state, &action, &object, cfg.env.noise, &mut rng_env)?;
            online.push(Transition {
                obs: obs.clone(),
                action: action.iter().map(|&a| a as f32).collect(),
                reward: 0.0,
                next_obs: next_obs.clone(),
                not_done: 1.0,
                task_id: cfg.task_id.clone(),
                reward_frozen: false,
            })?;
            obs = next_obs;
            steps += 1;
            ep_len += 1;

            agent.update(&online, &prior, Some(&classifier), &mut rng_agent)?;

            if steps % cfg.eval_interval == 0 || steps == cfg.total_steps {
                do_eval(
                    &agent,
                    &classifier,
                    steps,
                    &mut eval_index,
                    &mut attempts_since_eval,
                    &mut resets_since_eval,
                    &mut log,
                )?;
            }
            if !state.holding {
                completed = true;
                dropped = true;
                break;
            }
            if steps == cfg.total_steps {
                completed = ep_len == cfg.env.horizon;
                break;
            }
        }
        if ep_len == cfg.env.horizon {
            completed = true;
        }
        if completed {
            vice_update(&mut classifier, &goals, &online, &mut rng_vice)?;
            log.vice_updates += 1;
            log.episodes.push(EpisodeDiag {
                end_step: steps,
                length: ep_len,
                dropped,
            });
        }
        if state.holding {
            state.release(&mut rng_env);
        }
        if steps >= cfg.total_steps {
            break 'outer;
        }
    }

    // 5. artifacts
    agent.save(&run_dir.join(format!("{}.agent", cfg.task_id)))?;
    let mut export = classifier.clone();
    export.freeze();
    export.save(&run_dir.join(format!("{}.vice", cfg.task_id)))?;
    online.save(&run_dir.join(format!("{}.rbuf", cfg.task_id)))?;
    log.save_csv(&run_dir.join("runlog.csv"))?;
    std::fs::write(run_dir.join("config.txt"), cfg.print())?;
    std::fs::write(run_dir.join("done"), b"ok\n")?;
    Ok(log)
}
