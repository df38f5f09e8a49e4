//! Shared fixtures for the benchmark suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbt_core::agent::{ActorCritic, AgentConfig};
use rbt_core::env::{FORWARD_ACT_DIM, FORWARD_OBS_DIM};
use rbt_core::replay::{TaskBuffer, Transition};
use rbt_core::rewards::{ViceBatch, ViceClassifier, ViceConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A buffer of random forward-task transitions.
pub fn random_buffer(task: &str, n: usize, seed: u64) -> TaskBuffer {
    let mut rng = rng(seed);
    let mut buf = TaskBuffer::new(task, n.max(1));
    for _ in 0..n {
        let obs: Vec<f32> = (0..FORWARD_OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let next_obs: Vec<f32> =
            (0..FORWARD_OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action: Vec<f32> =
            (0..FORWARD_ACT_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        buf.push(Transition {
            obs,
            action,
            reward: rng.random_range(-2.0..0.0),
            next_obs,
            not_done: 1.0,
            task_id: task.to_string(),
            reward_frozen: false,
        })
        .unwrap();
    }
    buf
}

/// Desk-scale agent over the forward task dims.
pub fn desk_agent(seed: u64) -> ActorCritic {
    let cfg = AgentConfig {
        actor_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        batch_size: 64,
        ..AgentConfig::default()
    };
    ActorCritic::new(FORWARD_OBS_DIM, FORWARD_ACT_DIM, cfg, seed).unwrap()
}

/// Classifier and a full-size training batch for it.
pub fn vice_fixture(seed: u64) -> (ViceClassifier, ViceBatch) {
    let mut r = rng(seed);
    let cfg = ViceConfig {
        dropout_rates: vec![0.5, 0.1],
        ..ViceConfig::default()
    };
    let classifier = ViceClassifier::new(FORWARD_OBS_DIM, vec![64], cfg, seed).unwrap();
    let half = 256;
    let sample = |r: &mut ChaCha8Rng| -> Vec<f64> {
        (0..FORWARD_OBS_DIM).map(|_| r.random_range(-1.0..1.0)).collect()
    };
    let positives: Vec<Vec<f64>> = (0..half).map(|_| sample(&mut r)).collect();
    let negatives: Vec<Vec<f64>> = (0..half).map(|_| sample(&mut r)).collect();
    (classifier, ViceBatch::new(positives, negatives).unwrap())
}
