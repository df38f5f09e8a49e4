//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers. The comparison criteria share a disk-backed set of
//! training runs under `target/acceptance_runs`, built once on first use
//! and reused by later test invocations.

use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbt_core::agent::{ActorCritic, AgentConfig};
use rbt_core::bc::{self, ResetPolicy, ResetPolicyPair};
use rbt_core::env::{HandState, ObjectSpec, FORWARD_OBS_DIM};
use rbt_core::experiment::{
    run_suite, RunStore, Suite, SuiteParams,
};
use rbt_core::nn::{
    mlp_backward, mlp_forward, mlp_init, Activation, MlpParams, MlpSpec, OutputActivation,
};
use rbt_core::replay::{sample_mixed, PriorDataset, TaskBuffer, Transition};
use rbt_core::rewards::{
    gradient_penalty, mixup, vice_loss_with_plan, GoalSet, LossPlan, ViceBatch, ViceClassifier,
    ViceConfig,
};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// ---------------------------------------------------------------------
// Criterion 1: gradient correctness over 20 seeds in under a minute
// ---------------------------------------------------------------------

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let h = 1e-5;
    let tol = 1e-4;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1);
        // network gradients: params and inputs vs central differences
        let acts = [Activation::Relu, Activation::Tanh, Activation::LeakyRelu];
        let spec = MlpSpec::new(5, vec![8, 8], 1)
            .with_activations(acts[seed as usize % 3], OutputActivation::Identity);
        let p = mlp_init(&spec, seed).unwrap();
        let x = random_vec(&mut rng, 5);
        let cot = vec![rng.random_range(-1.0..1.0)];
        let (_, tape) = mlp_forward(&p, &x).unwrap();
        let (g, gx) = mlp_backward(&p, &tape, &cot).unwrap();
        let eval = |p: &MlpParams, x: &[f64]| -> f64 {
            mlp_forward(p, x).unwrap().0[0] * cot[0]
        };
        for l in 0..p.n_layers() {
            for idx in 0..p.weights()[l].len() {
                let mut pp = p.clone();
                pp.weights_mut()[l][idx] += h;
                let mut pm = p.clone();
                pm.weights_mut()[l][idx] -= h;
                let fd = (eval(&pp, &x) - eval(&pm, &x)) / (2.0 * h);
                assert!(
                    rel_err(fd, g.weights()[l][idx]) < tol,
                    "seed {seed} w[{l}][{idx}]"
                );
            }
            for idx in 0..p.biases()[l].len() {
                let mut pp = p.clone();
                pp.biases_mut()[l][idx] += h;
                let mut pm = p.clone();
                pm.biases_mut()[l][idx] -= h;
                let fd = (eval(&pp, &x) - eval(&pm, &x)) / (2.0 * h);
                assert!(rel_err(fd, g.biases()[l][idx]) < tol, "seed {seed} b[{l}]");
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (eval(&p, &xp) - eval(&p, &xm)) / (2.0 * h);
            assert!(rel_err(fd, gx[i]) < tol, "seed {seed} x[{i}]");
        }

        // full classifier loss gradients (smoothing, mixup, penalty)
        let cls_params = mlp_init(
            &MlpSpec::new(6, vec![8], 1)
                .with_activations(Activation::LeakyRelu, OutputActivation::Identity),
            seed ^ 0x77,
        )
        .unwrap();
        let classifier = ViceClassifier::from_params(
            cls_params,
            ViceConfig {
                dropout_rates: vec![0.0, 0.0],
                ..ViceConfig::default()
            },
        );
        let pos: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 6)).collect();
        let neg: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 6)).collect();
        let batch = ViceBatch::new(pos, neg).unwrap();
        let plan = LossPlan::draw(
            classifier.params().spec(),
            classifier.cfg(),
            batch.len(),
            false,
            &mut rng,
        )
        .unwrap();
        let (_, grads) = vice_loss_with_plan(&classifier, &batch, &plan).unwrap();
        let perturbed = |l: usize, idx: usize, weight: bool, delta: f64| -> ViceClassifier {
            let mut p = classifier.params().clone();
            if weight {
                p.weights_mut()[l][idx] += delta;
            } else {
                p.biases_mut()[l][idx] += delta;
            }
            ViceClassifier::from_params(p, classifier.cfg().clone())
        };
        for l in 0..classifier.params().n_layers() {
            for idx in 0..classifier.params().weights()[l].len() {
                let fp =
                    rbt_core::rewards::vice_loss_value(&perturbed(l, idx, true, h), &batch, &plan)
                        .unwrap();
                let fm =
                    rbt_core::rewards::vice_loss_value(&perturbed(l, idx, true, -h), &batch, &plan)
                        .unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    rel_err(fd, grads.weights()[l][idx]) < tol,
                    "seed {seed} vice w[{l}][{idx}]"
                );
            }
            for idx in 0..classifier.params().biases()[l].len() {
                let fp =
                    rbt_core::rewards::vice_loss_value(&perturbed(l, idx, false, h), &batch, &plan)
                        .unwrap();
                let fm = rbt_core::rewards::vice_loss_value(
                    &perturbed(l, idx, false, -h),
                    &batch,
                    &plan,
                )
                .unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(rel_err(fd, grads.biases()[l][idx]) < tol, "seed {seed} vice b");
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "gradient checks took {elapsed:?}");
    println!(
        "criterion 01 gradient correctness: PASS (20 seeds, {:.1}s)",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// Criterion 2: analytic regularizer cases
// ---------------------------------------------------------------------

#[test]
fn criterion_02_analytic_loss_cases() {
    // gradient penalty on linear discriminators is exactly a(|w|-1)^2
    for (w, weight) in [(vec![3.0, 0.0], 10.0), (vec![0.6, 0.8], 10.0), (vec![-2.0], 5.0)] {
        let spec = MlpSpec::new(w.len(), vec![], 1);
        let mut params = MlpParams::zeros(&spec);
        params.weights_mut()[0].copy_from_slice(&w);
        let classifier = ViceClassifier::from_params(
            params,
            ViceConfig {
                gp_weight: weight,
                ..ViceConfig::default()
            },
        );
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expected = weight * (norm - 1.0) * (norm - 1.0);
        let inputs: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 * 0.3; w.len()]).collect();
        let gp = gradient_penalty(&classifier, &inputs).unwrap();
        assert!(
            (gp - expected).abs() < 1e-10,
            "gp {gp} vs analytic {expected}"
        );
    }

    // zero-logit BCE equals ln 2
    let spec = MlpSpec::new(3, vec![], 1);
    let classifier = ViceClassifier::from_params(
        MlpParams::zeros(&spec),
        ViceConfig {
            label_smoothing: 0.0,
            gp_weight: 0.0,
            dropout_rates: vec![0.0],
            ..ViceConfig::default()
        },
    );
    let batch = ViceBatch::new(
        vec![vec![0.5, 0.1, -0.2], vec![1.0, 1.0, 1.0]],
        vec![vec![0.0, 0.0, 0.0], vec![-1.0, 0.3, 0.9]],
    )
    .unwrap();
    let (loss, _) =
        vice_loss_with_plan(&classifier, &batch, &LossPlan::identity(batch.len())).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-10, "loss {loss}");

    // mixup endpoint is the identity
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = ViceBatch::new(
        vec![random_vec(&mut rng, 4), random_vec(&mut rng, 4)],
        vec![random_vec(&mut rng, 4), random_vec(&mut rng, 4)],
    )
    .unwrap();
    let out = rbt_core::rewards::apply_mixup(&batch, &LossPlan::identity(batch.len()));
    assert_eq!(out.inputs, batch.inputs);
    assert_eq!(out.soft_labels, batch.labels);

    println!("criterion 02 analytic loss cases: PASS");
}

// ---------------------------------------------------------------------
// Criterion 3: sampler contract (exact split + pooled uniformity)
// ---------------------------------------------------------------------

#[test]
fn criterion_03_sampler_contract() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mut online = TaskBuffer::new("on", 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        online.push(transition("on", i as f32)).unwrap();
    }
    let mut p1 = TaskBuffer::new("p1", 2000);
    for i in 0..100 {
        p1.push(transition("p1", 10_000.0 + i as f32)).unwrap();
    }
    let mut p2 = TaskBuffer::new("p2", 2000);
    for i in 0..300 {
        p2.push(transition("p2", 20_000.0 + i as f32)).unwrap();
    }
    let prior = PriorDataset::new(vec![p1, p2]);

    let batches = 10_000;
    let mut counts = std::collections::HashMap::<i64, usize>::new();
    for _ in 0..batches {
        let b = sample_mixed(&online, &prior, 256, &mut rng).unwrap();
        assert_eq!(b.n_online, 128);
        assert_eq!(b.n_prior, 128);
        let prior_entries = b
            .transitions
            .iter()
            .filter(|t| t.task_id != "on")
            .count();
        assert_eq!(prior_entries, 128, "every batch is exactly half prior");
        for t in &b.transitions[b.n_online..] {
            *counts.entry(t.obs[0] as i64).or_default() += 1;
        }
    }
    // chi-square over the 400 pooled prior transitions
    let total = (batches * 128) as f64;
    let expected = total / 400.0;
    let stat: f64 = counts
        .values()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    assert_eq!(counts.len(), 400);
    let p = 1.0 - ChiSquared::new(399.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square p = {p}");
    println!("criterion 03 sampler contract: PASS (chi-square p = {p:.3})");
}

fn transition(task: &str, v: f32) -> Transition {
    Transition {
        obs: vec![v, v * 0.5],
        action: vec![0.1],
        reward: -1.0,
        next_obs: vec![v + 1.0, v * 0.5],
        not_done: 1.0,
        task_id: task.to_string(),
        reward_frozen: false,
    }
}

// ---------------------------------------------------------------------
// Criterion 4: persistence round-trips, property-tested
// ---------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn criterion_04a_buffer_round_trip(
        seed in 0u64..1_000_000,
        n in 0usize..200,
        obs_dim in 1usize..6,
        act_dim in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = TaskBuffer::new(format!("t{seed}"), 1000);
        for _ in 0..n {
            let obs: Vec<f32> = (0..obs_dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            let next_obs: Vec<f32> = (0..obs_dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            buf.push(Transition {
                obs,
                action: (0..act_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                reward: rng.random_range(-10.0..0.0),
                next_obs,
                not_done: if rng.random::<f64>() < 0.1 { 0.0 } else { 1.0 },
                task_id: format!("t{seed}"),
                reward_frozen: rng.random::<f64>() < 0.5,
            }).unwrap();
        }
        let bytes = buf.to_bytes();
        let loaded = TaskBuffer::from_bytes(&bytes).unwrap();
        prop_assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn criterion_04b_classifier_round_trip(seed in 0u64..1_000_000, frozen in proptest::bool::ANY) {
        let mut c = ViceClassifier::new(4, vec![6], ViceConfig::default(), seed).unwrap();
        if frozen {
            c.freeze();
        }
        let bytes = c.to_bytes();
        let loaded = ViceClassifier::from_bytes(&bytes).unwrap();
        prop_assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn criterion_04c_agent_round_trip(seed in 0u64..1_000_000) {
        let cfg = AgentConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ensemble_size: 3,
            target_subset_size: 2,
            batch_size: 8,
            ..AgentConfig::default()
        };
        let mut agent = ActorCritic::new(3, 2, cfg, seed).unwrap();
        // one update so optimizer state is nontrivial
        let mut online = TaskBuffer::new("t", 64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            online.push(Transition {
                obs: vec![0.1, 0.2, 0.3],
                action: vec![0.0, 0.5],
                reward: -1.0,
                next_obs: vec![0.2, 0.1, 0.0],
                not_done: 1.0,
                task_id: "t".into(),
                reward_frozen: true,
            }).unwrap();
        }
        agent.update(&online, &PriorDataset::empty(), None, &mut rng).unwrap();
        let bytes = agent.to_bytes();
        let loaded = ActorCritic::from_bytes(&bytes).unwrap();
        prop_assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn criterion_04d_demo_round_trip(seed in 0u64..1_000_000, episodes in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut demos = bc::DemoSet::default();
        for e in 0..episodes {
            let pairs: Vec<(Vec<f32>, Vec<f32>)> = (0..rng.random_range(1..20))
                .map(|_| {
                    (
                        (0..rbt_core::env::RESET_OBS_DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
                        (0..rbt_core::env::RESET_ACT_DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
                    )
                })
                .collect();
            demos.episodes.push(bc::DemoEpisode { object: format!("o{e}"), pairs });
        }
        let bytes = demos.to_bytes();
        let loaded = bc::DemoSet::from_bytes(&bytes).unwrap();
        prop_assert_eq!(bytes, loaded.to_bytes());
    }
}

#[test]
fn criterion_04_persistence_summary() {
    // the four property tests above are the substance; this prints the line
    println!("criterion 04 persistence round-trips: PASS (proptest, 16 cases each)");
}

// ---------------------------------------------------------------------
// Criterion 5: frozen-reward immutability and relabel idempotence
// ---------------------------------------------------------------------

#[test]
fn criterion_05_frozen_rewards_and_idempotence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let classifier = ViceClassifier::new(2, vec![8], ViceConfig::default(), 0).unwrap();

    let mut buf = TaskBuffer::new("t", 100);
    for i in 0..40 {
        let mut t = transition("t", i as f32);
        t.obs = vec![i as f32 * 0.1, -0.2];
        t.next_obs = vec![i as f32 * 0.1 + 0.05, 0.3];
        t.reward = rng.random_range(-5.0..0.0);
        t.reward_frozen = i % 2 == 0;
        buf.push(t).unwrap();
    }
    let mut prior = PriorDataset::new(vec![buf]);

    // frozen entries byte-identical across relabels
    let frozen_before: Vec<[u8; 4]> = prior.buffers()[0]
        .iter()
        .filter(|t| t.reward_frozen)
        .map(|t| t.reward.to_le_bytes())
        .collect();
    rbt_core::rewards::relabel(&mut prior, &classifier).unwrap();
    let after_first = prior.buffers()[0].to_bytes();
    let frozen_after: Vec<[u8; 4]> = prior.buffers()[0]
        .iter()
        .filter(|t| t.reward_frozen)
        .map(|t| t.reward.to_le_bytes())
        .collect();
    assert_eq!(frozen_before, frozen_after);

    // second pass with the same classifier is a bitwise no-op
    rbt_core::rewards::relabel(&mut prior, &classifier).unwrap();
    assert_eq!(after_first, prior.buffers()[0].to_bytes());
    println!("criterion 05 frozen rewards + relabel idempotence: PASS");
}

// ---------------------------------------------------------------------
// Criterion 11: behavior-cloned reset adequacy and the 80/20 rule
// ---------------------------------------------------------------------

#[test]
fn criterion_11_reset_policy_adequacy() {
    // desk-scale reset pair for the prong object
    let cfg = {
        let mut c = rbt_core::experiment::ExperimentConfig::default();
        let desk = SuiteParams::default();
        c.bc = desk.base.bc.clone();
        c
    };
    let pair = rbt_core::experiment::prepare_reset_pair(&cfg).unwrap();

    let measure = |pair: &ResetPolicyPair, seed: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ok = 0;
        let resets = 120;
        for _ in 0..resets {
            let mut state = HandState::new_reset(&mut rng);
            if bc::execute_reset(pair, &mut state, 100, 5, &mut rng).is_ok() {
                ok += 1;
            }
        }
        ok as f64 / resets as f64
    };
    let expert_rate = measure(&ResetPolicyPair::scripted(), 11);
    let cloned_rate = measure(&pair, 11);
    assert!(
        cloned_rate >= 0.9 * expert_rate,
        "cloned {cloned_rate} vs expert {expert_rate}"
    );

    // 80/20 selection frequency
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 10_000;
    let multi = (0..draws).filter(|_| pair.draw_multi(&mut rng)).count();
    let frac = multi as f64 / draws as f64;
    assert!((frac - 0.8).abs() <= 0.01, "multi fraction {frac}");
    println!(
        "criterion 11 reset adequacy: PASS (cloned {cloned_rate:.2} vs expert {expert_rate:.2}, multi {frac:.3})"
    );
}

// ---------------------------------------------------------------------
// Criterion 12: classifier sanity (separable AUC, bounded rewards)
// ---------------------------------------------------------------------

#[test]
fn criterion_12_vice_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut online = TaskBuffer::new("t", 1000);
    for _ in 0..300 {
        let x = [
            -1.0 + rng.random_range(-0.3..0.3f32),
            -1.0 + rng.random_range(-0.3..0.3f32),
        ];
        online
            .push(Transition {
                obs: x.to_vec(),
                action: vec![0.0],
                reward: 0.0,
                next_obs: x.to_vec(),
                not_done: 1.0,
                task_id: "t".into(),
                reward_frozen: false,
            })
            .unwrap();
    }
    let goals = GoalSet::new(
        "g",
        (0..300)
            .map(|_| {
                vec![
                    1.0 + rng.random_range(-0.3..0.3f32),
                    1.0 + rng.random_range(-0.3..0.3f32),
                ]
            })
            .collect(),
    )
    .unwrap();
    let cfg = ViceConfig {
        batch_size: 64,
        dropout_rates: vec![0.1, 0.05],
        ..ViceConfig::default()
    };
    let mut classifier = ViceClassifier::new(2, vec![16], cfg, 1).unwrap();
    for _ in 0..500 {
        rbt_core::rewards::vice_update(&mut classifier, &goals, &online, &mut rng).unwrap();
    }
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for g in goals.observations() {
        let x: Vec<f64> = g.iter().map(|&v| v as f64).collect();
        scored.push((classifier.logit(&x).unwrap(), true));
    }
    for t in online.iter() {
        let x: Vec<f64> = t.obs.iter().map(|&v| v as f64).collect();
        scored.push((classifier.logit(&x).unwrap(), false));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n_pos = scored.iter().filter(|s| s.1).count() as f64;
    let n_neg = scored.len() as f64 - n_pos;
    let rank_sum: f64 = scored
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1)
        .map(|(r, _)| (r + 1) as f64)
        .sum();
    let auc = (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
    assert!(auc > 0.95, "AUC {auc}");
    println!("criterion 12 vice sanity: PASS (AUC {auc:.3})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criterion_12b_reward_bounded(
        seed in 0u64..1_000_000,
        obs in proptest::collection::vec(-1000.0f32..1000.0, 3),
    ) {
        let classifier = ViceClassifier::new(3, vec![8], ViceConfig::default(), seed).unwrap();
        let r = classifier.vice_reward(&obs).unwrap();
        prop_assert!((-10.0..=0.0).contains(&r), "reward {} out of bounds", r);
    }
}

// ---------------------------------------------------------------------
// Criteria 6-10: the comparison suites (shared heavy artifacts)
// ---------------------------------------------------------------------

struct Heavy {
    task_transfer: rbt_core::experiment::SuiteReport,
    ordering: rbt_core::experiment::SuiteReport,
    buffer_size: rbt_core::experiment::SuiteReport,
    finetune: rbt_core::experiment::SuiteReport,
    long: rbt_core::experiment::SuiteReport,
}

static HEAVY: OnceLock<Heavy> = OnceLock::new();

fn heavy() -> &'static Heavy {
    HEAVY.get_or_init(|| {
        let dir = std::env::var("RBT_ACCEPTANCE_DIR").unwrap_or_else(|_| {
            format!(
                "{}/../../target/acceptance_runs",
                env!("CARGO_MANIFEST_DIR")
            )
        });
        let store = RunStore::new(dir);
        let params = SuiteParams::default();
        let seeds = [0u64, 1, 2, 3];
        let task_transfer = run_suite(Suite::TaskTransfer, &seeds, &store, &params).unwrap();
        let buffer_size = run_suite(Suite::AblationBufferSize, &seeds, &store, &params).unwrap();
        let ordering = run_suite(Suite::AblationOrdering, &seeds, &store, &params).unwrap();
        let finetune = run_suite(Suite::AblationFinetune, &seeds, &store, &params).unwrap();
        let long = run_suite(Suite::LongTraining, &seeds, &store, &params).unwrap();
        Heavy {
            task_transfer,
            ordering,
            buffer_size,
            finetune,
            long,
        }
    })
}

#[test]
fn criterion_06_bootstrap_speedup() {
    let report = &heavy().task_transfer;
    let scratch = report.arm("pose_b_scratch").unwrap();
    let init = report.arm("pose_b_init60").unwrap();
    let t_scratch = scratch
        .median_threshold_steps
        .expect("scratch arm must cross the threshold");
    let t_init = init
        .median_threshold_steps
        .expect("bootstrapped arm must cross the threshold");
    let ratio = t_init / t_scratch;
    assert!(
        ratio <= 0.75,
        "steps-to-threshold ratio {ratio:.3} (init {t_init:.0} vs scratch {t_scratch:.0})"
    );
    println!(
        "criterion 06 bootstrap speedup: PASS (init {t_init:.0} vs scratch {t_scratch:.0}, ratio {ratio:.3})"
    );
}

#[test]
fn criterion_07_ordering_ablation() {
    let report = &heavy().ordering;
    let scratch = report.arm("pose_b_scratch").unwrap();
    let budget = scratch
        .median_threshold_steps
        .expect("scratch arm must cross the threshold") as u64;
    let s_scratch = scratch.median_success_at(budget).unwrap();
    let s_same = report
        .arm("init_same_object")
        .unwrap()
        .median_success_at(budget)
        .unwrap();
    let s_tpipe = report
        .arm("init_from_tpipe")
        .unwrap()
        .median_success_at(budget)
        .unwrap();
    let s_football = report
        .arm("init_from_football")
        .unwrap()
        .median_success_at(budget)
        .unwrap();
    let tie = 0.05;
    assert!(
        s_same >= s_tpipe - tie && s_same >= s_football - tie,
        "same-object {s_same} vs tpipe {s_tpipe}, football {s_football}"
    );
    assert!(
        s_tpipe >= s_scratch - tie && s_football >= s_scratch - tie,
        "other-object ({s_tpipe}, {s_football}) vs scratch {s_scratch}"
    );
    println!(
        "criterion 07 ordering: PASS at step {budget} (same {s_same:.2} >= tpipe {s_tpipe:.2}/football {s_football:.2} >= scratch {s_scratch:.2})"
    );
}

#[test]
fn criterion_08_buffer_size_ablation() {
    let report = &heavy().buffer_size;
    let t60 = report.arm("pose_b_init60").unwrap().median_threshold_steps;
    let t30 = report.arm("pose_b_init30").unwrap().median_threshold_steps;
    match (t60, t30) {
        (Some(t60), Some(t30)) => {
            assert!(
                t60 <= t30 * 1.1,
                "60k crossed at {t60:.0}, 30k at {t30:.0}"
            );
            println!(
                "criterion 08 buffer size: PASS (60k {t60:.0} <= 30k {t30:.0} within 10%)"
            );
        }
        (Some(t60), None) => {
            println!(
                "criterion 08 buffer size: PASS (60k crossed at {t60:.0}, 30k never crossed)"
            );
        }
        (t60, t30) => panic!("60k arm must cross: 60k {t60:?}, 30k {t30:?}"),
    }
}

#[test]
fn criterion_09_finetune_ablation() {
    let report = &heavy().finetune;
    let init = report.arm("pose_b_init60").unwrap();
    let ft = report.arm("pose_b_finetune").unwrap();
    let budget = init
        .median_threshold_steps
        .expect("bootstrapped arm must cross the threshold") as u64;
    let s_init = init.median_success_at(budget).unwrap();
    let s_ft = ft.median_success_at(budget).unwrap();
    assert!(
        s_init >= s_ft,
        "at step {budget}: init {s_init} vs finetune {s_ft}"
    );
    println!(
        "criterion 09 finetune ablation: PASS (at step {budget}: init {s_init:.2} >= finetune {s_ft:.2})"
    );
}

#[test]
fn criterion_10_long_training_stability() {
    let report = &heavy().long;
    let long = report.arm("pose_b_long").unwrap();
    // EMA-smoothed median curve must stay within 10 points of its peak once
    // it has peaked
    let curve = long.median_curve().unwrap();
    let mut ema = Vec::with_capacity(curve.len());
    let mut acc = curve[0].1;
    for &(_, v) in &curve {
        acc = 0.9 * acc + 0.1 * v;
        ema.push(acc);
    }
    let (peak_idx, peak) = ema
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let min_after = ema[peak_idx..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(
        min_after >= peak - 0.10,
        "smoothed success fell from peak {peak:.2} to {min_after:.2}"
    );
    println!(
        "criterion 10 long-training stability: PASS (peak {peak:.2}, min after peak {min_after:.2}, total {} steps)",
        curve.last().unwrap().0
    );
}
