// temporary scratch: what feature does the policy exploit?
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbt_core::agent::{ActorCritic, AgentConfig};
use rbt_core::bc::{execute_reset, ResetPolicyPair};
use rbt_core::env::*;
use rbt_core::replay::{PriorDataset, TaskBuffer, Transition};
use rbt_core::rewards::*;

fn main() {
    let object = ObjectSpec::prong();
    let goal = 0.0f64;
    let seed = 0u64;
    let mut rng_env = ChaCha8Rng::seed_from_u64(seed);
    let mut rng_agent = { let mut r = ChaCha8Rng::seed_from_u64(seed); r.set_stream(2); r };
    let mut rng_vice = { let mut r = ChaCha8Rng::seed_from_u64(seed); r.set_stream(3); r };
    let goal_obs = collect_goal_examples(&object, goal, 400, &mut rng_env).unwrap();
    let goals = GoalSet::new("probe", goal_obs).unwrap();
    let cfg = ViceConfig { dropout_rates: vec![0.1, 0.05], lr: 1e-3, gp_weight: 0.1, ..ViceConfig::default() };
    let mut classifier = ViceClassifier::new(11, vec![64], cfg, seed ^ 1).unwrap();
    let acfg = AgentConfig { actor_hidden: vec![32,32], critic_hidden: vec![32,32], batch_size: 64, ..AgentConfig::default() };
    let mut agent = ActorCritic::new(11, 8, acfg, seed ^ 2).unwrap();
    let mut online = TaskBuffer::new("probe", 300_000);
    let prior = PriorDataset::empty();
    let pair = ResetPolicyPair::scripted();
    let mut state = HandState::new_reset(&mut rng_env);
    let mut steps = 0u64;
    let total = 12_000u64;
    while steps < total {
        if !state.holding { execute_reset(&pair, &mut state, 100, 5, &mut rng_env).unwrap(); }
        let mut obs = forward_observation(&state);
        let mut len = 0;
        for _ in 0..50 {
            let action = if steps < 1000 {
                (0..8).map(|_| rng_agent.random_range(-1.0..1.0)).collect()
            } else { agent.act(&obs, false, &mut rng_agent).unwrap() };
            let next = step_forward(&mut state, &action, &object, true, &mut rng_env).unwrap();
            online.push(Transition { obs: obs.clone(), action: action.iter().map(|&a| a as f32).collect(),
                reward: 0.0, next_obs: next.clone(), not_done: 1.0, task_id: "probe".into(), reward_frozen: false }).unwrap();
            obs = next; steps += 1; len += 1;
            agent.update(&online, &prior, Some(&classifier), &mut rng_agent).unwrap();
            if !state.holding || steps == total { break; }
        }
        if len == 50 || !state.holding {
            vice_update(&mut classifier, &goals, &online, &mut rng_vice).unwrap();
        }
        if state.holding { state.release(&mut rng_env); }

        if steps % 3000 == 0 || steps == total {
            // diagnose: roll 10 eval episodes, collect final states
            let mut rng_eval = ChaCha8Rng::seed_from_u64(4242 + steps);
            let mut angerr = Vec::new();
            let mut grip = Vec::new();
            let mut final_obs = Vec::new();
            for _ in 0..10 {
                let mut s = HandState::new_reset(&mut rng_eval);
                execute_reset(&pair, &mut s, 100, 5, &mut rng_eval).unwrap();
                let mut o = forward_observation(&s);
                for _ in 0..50 {
                    let a = agent.act(&o, true, &mut rng_eval).unwrap();
                    o = step_forward(&mut s, &a, &object, true, &mut rng_eval).unwrap();
                    if !s.holding { break; }
                }
                angerr.push(angular_error(s.angle, goal, &object).to_degrees());
                grip.push(s.grip());
                final_obs.push(o);
            }
            // classifier theta-profile at the policy's final q (swap theta)
            let mut sel_on = 0.0; let mut sel_off = 0.0;
            for o in &final_obs {
                let mut on = o.clone(); on[8] = 1.0; on[9] = 0.0;   // theta = 0 (goal branch)
                let off_t = 1.047f64; // 60 deg
                let mut off = o.clone(); off[8] = off_t.cos() as f32; off[9] = off_t.sin() as f32;
                sel_on += classifier.vice_reward(&on).unwrap() / final_obs.len() as f64;
                sel_off += classifier.vice_reward(&off).unwrap() / final_obs.len() as f64;
            }
            let r_actual: f64 = final_obs.iter().map(|o| classifier.vice_reward(o).unwrap()).sum::<f64>() / final_obs.len() as f64;
            let mean_err = angerr.iter().sum::<f64>() / angerr.len() as f64;
            let mean_grip = grip.iter().sum::<f64>() / grip.len() as f64;
            println!("step {steps}: ang_err_deg {mean_err:.1} grip {mean_grip:.2} | r(actual) {r_actual:.3} r(goal_theta|policy_q) {sel_on:.3} r(60deg|policy_q) {sel_off:.3}");
        }
    }
}
