// temporary calibration probes; removed before release
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbt_core::agent::{ActorCritic, AgentConfig};
use rbt_core::bc::{execute_reset, ResetPolicyPair};
use rbt_core::env::*;
use rbt_core::replay::{PriorDataset, TaskBuffer, Transition};
use rbt_core::rewards::*;

fn desk_agent_cfg() -> AgentConfig {
    let te: f64 = std::env::var("RBT_TE").ok().and_then(|s| s.parse().ok()).unwrap_or(-4.0);
    AgentConfig {
        actor_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        batch_size: 64,
        target_entropy: Some(te),
        ..AgentConfig::default()
    }
}

// Scratch training loop with a pluggable reward fn and optional live VICE.
#[allow(clippy::too_many_arguments)]
fn train_probe(
    name: &str,
    total: u64,
    object: &ObjectSpec,
    goal: f64,
    reward: &dyn Fn(&ViceClassifier, &[f32]) -> f64,
    live_vice: bool,
    vice_cfg: ViceConfig,
    vice_hidden: Vec<usize>,
    seed: u64,
) {
    let mut rng_env = ChaCha8Rng::seed_from_u64(seed);
    let mut rng_agent = {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(2);
        r
    };
    let mut rng_vice = {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(3);
        r
    };
    let goal_obs = collect_goal_examples(object, goal, 400, &mut rng_env).unwrap();
    let goals = GoalSet::new("probe", goal_obs).unwrap();
    let mut classifier = ViceClassifier::new(11, vice_hidden, vice_cfg, seed ^ 1).unwrap();
    let mut agent = ActorCritic::new(11, 8, desk_agent_cfg(), seed ^ 2).unwrap();
    let mut online = TaskBuffer::new("probe", 300_000);
    let prior = PriorDataset::empty();
    let pair = ResetPolicyPair::scripted();
    let mut state = HandState::new_reset(&mut rng_env);
    let mut steps = 0u64;
    println!("== probe {name}");
    while steps < total {
        if !state.holding {
            execute_reset(&pair, &mut state, 100, 5, &mut rng_env).unwrap();
        }
        let mut obs = forward_observation(&state);
        let mut len = 0;
        for _ in 0..50 {
            let action = if steps < 1000 {
                (0..8).map(|_| rng_agent.random_range(-1.0..1.0)).collect()
            } else {
                agent.act(&obs, false, &mut rng_agent).unwrap()
            };
            let next = step_forward(&mut state, &action, object, true, &mut rng_env).unwrap();
            // reward written directly (frozen) so probes control it exactly
            online
                .push(Transition {
                    obs: obs.clone(),
                    action: action.iter().map(|&a| a as f32).collect(),
                    reward: reward(&classifier, &next) as f32,
                    next_obs: next.clone(),
                    not_done: 1.0,
                    task_id: "probe".into(),
                    reward_frozen: true,
                })
                .unwrap();
            obs = next;
            steps += 1;
            len += 1;
            agent.update(&online, &prior, None, &mut rng_agent).unwrap();
            if !state.holding || steps == total {
                break;
            }
        }
        if live_vice && (len == 50 || !state.holding) {
            vice_update(&mut classifier, &goals, &online, &mut rng_vice).unwrap();
        }
        if state.holding {
            state.release(&mut rng_env);
        }
        if steps % 2000 == 0 || steps == total {
            // eval
            let mut rng_eval = ChaCha8Rng::seed_from_u64(999 + steps);
            let mut ok = 0;
            let mut vsum = 0.0;
            for _ in 0..20 {
                let mut s = HandState::new_reset(&mut rng_eval);
                execute_reset(&pair, &mut s, 100, 5, &mut rng_eval).unwrap();
                let mut o = forward_observation(&s);
                for _ in 0..50 {
                    let a = agent.act(&o, true, &mut rng_eval).unwrap();
                    o = step_forward(&mut s, &a, object, true, &mut rng_eval).unwrap();
                    vsum += reward(&classifier, &o);
                    if !s.holding {
                        break;
                    }
                }
                if evaluate_success(&s, goal, object) {
                    ok += 1;
                }
            }
            println!(
                "{name} step {steps}: success {:.2} mean_r {:.3}",
                ok as f64 / 20.0,
                vsum / (20.0 * 50.0)
            );
        }
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    let object = ObjectSpec::prong();
    let goal = 0.0f64;
    match which.as_str() {
        // probe 1: oracle shaped reward; checks the RL side alone
        "oracle" => {
            let r = |_: &ViceClassifier, obs: &[f32]| -> f64 {
                let theta = (obs[9] as f64).atan2(obs[8] as f64);
                -angular_error(theta, 0.0, &ObjectSpec::prong())
            };
            train_probe("oracle", 10_000, &object, goal, &r, false, ViceConfig::default(), vec![64], 0);
        }
        // probe 2: frozen pre-trained classifier (positives vs uniform states)
        "frozen" => {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let goal_obs = collect_goal_examples(&object, goal, 400, &mut rng).unwrap();
            let goals = GoalSet::new("probe", goal_obs).unwrap();
            let mut neg = TaskBuffer::new("probe", 20_000);
            for _ in 0..20_000 {
                let mut q = [0.0f64; 8];
                for v in &mut q {
                    *v = rng.random_range(-1.0..1.0);
                }
                let th = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let s = HandState::held(th, q);
                let o = forward_observation(&s);
                neg.push(Transition {
                    obs: o.clone(),
                    action: vec![0.0; 8],
                    reward: 0.0,
                    next_obs: o,
                    not_done: 1.0,
                    task_id: "probe".into(),
                    reward_frozen: false,
                })
                .unwrap();
            }
            let gp: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(10.0);
            let clr: f64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(3e-4);
            let alpha: f64 = std::env::var("RBT_ALPHA").ok().and_then(|s| s.parse().ok()).unwrap_or(1.0);
            let cfg = ViceConfig { dropout_rates: vec![0.0, 0.0], gp_weight: gp, lr: clr, mixup_alpha: alpha, ..ViceConfig::default() };
            let mut cls = ViceClassifier::new(11, vec![64], cfg.clone(), 9).unwrap();
            for _ in 0..2000 {
                vice_update(&mut cls, &goals, &neg, &mut rng).unwrap();
            }
            // report the trained classifier's angle selectivity
            let mut rng2 = ChaCha8Rng::seed_from_u64(7);
            for deg in [0, 20, 40, 60] {
                let mut s = 0.0;
                for _ in 0..200 {
                    let mut q = [0.0f64; 8];
                    for v in &mut q {
                        *v = rng2.random_range(-1.0..1.0);
                    }
                    let st = HandState::held((deg as f64).to_radians(), q);
                    s += cls.vice_reward(&forward_observation(&st)).unwrap();
                }
                println!("frozen classifier: mean reward at {deg}deg = {:.3}", s / 200.0);
            }
            let r = move |_: &ViceClassifier, obs: &[f32]| -> f64 { cls.vice_reward(obs).unwrap() };
            train_probe("frozen", 10_000, &object, goal, &r, false, ViceConfig::default(), vec![64], 0);
        }
        // probe 3: live adversarial VICE, desk dropout choices
        "live" => {
            let drop = std::env::args().nth(2).unwrap_or("0.5,0.1".into());
            let rates: Vec<f64> = drop.split(',').map(|s| s.parse().unwrap()).collect();
            let lr: f64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(3e-4);
            let gp: f64 = std::env::args().nth(4).map(|s| s.parse().unwrap()).unwrap_or(10.0);
            let cfg = ViceConfig { dropout_rates: rates.clone(), lr, gp_weight: gp, ..ViceConfig::default() };
            let r = |c: &ViceClassifier, obs: &[f32]| -> f64 { c.vice_reward(obs).unwrap() };
            train_probe(
                &format!("live d={drop} lr={lr} gp={gp}"),
                14_000, &object, goal, &r, true, cfg, vec![64], 0,
            );
        }
        _ => eprintln!("usage: calibrate oracle|frozen|live [dropout] [lr]"),
    }
}
