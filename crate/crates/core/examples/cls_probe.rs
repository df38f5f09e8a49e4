// temporary scratch: classifier training dynamics on goals-vs-uniform
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbt_core::env::*;
use rbt_core::nn::{adam_step, AdamState};
use rbt_core::replay::{TaskBuffer, Transition};
use rbt_core::rewards::*;

fn main() {
    let object = ObjectSpec::prong();
    let goal = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let goal_obs = collect_goal_examples(&object, goal, 400, &mut rng).unwrap();
    let goals = GoalSet::new("p", goal_obs).unwrap();
    let mut neg = TaskBuffer::new("p", 20_000);
    for _ in 0..20_000 {
        let mut q = [0.0f64; 8];
        for v in &mut q { *v = rng.random_range(-1.0..1.0); }
        let th = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let o = forward_observation(&HandState::held(th, q));
        neg.push(Transition { obs: o.clone(), action: vec![0.0; 8], reward: 0.0,
            next_obs: o, not_done: 1.0, task_id: "p".into(), reward_frozen: false }).unwrap();
    }

    let args: Vec<String> = std::env::args().collect();
    let gp: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let alpha: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let smooth: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let lr: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3e-4);
    let mixup_on = alpha > 0.0;

    let cfg = ViceConfig { gp_weight: gp, label_smoothing: smooth,
        mixup_alpha: if mixup_on { alpha } else { 1.0 },
        dropout_rates: vec![0.0, 0.0], lr, ..ViceConfig::default() };
    let mut cls = ViceClassifier::new(11, vec![64], cfg.clone(), 9).unwrap();
    let mut adam = AdamState::new(cls.params().spec(), cfg.lr);

    let probe = |cls: &ViceClassifier, rng: &mut ChaCha8Rng| -> (f64, f64) {
        let mut on = 0.0; let mut off = 0.0;
        for _ in 0..200 {
            let mut q = [0.0f64; 8];
            for v in &mut q { *v = rng.random_range(-1.0..1.0); }
            let s_on = HandState::held(rng.random_range(-0.05..0.05), q);
            let s_off = HandState::held(1.047 + rng.random_range(-0.05..0.05), q); // 60 deg
            let xo: Vec<f64> = forward_observation(&s_on).iter().map(|&v| v as f64).collect();
            let xf: Vec<f64> = forward_observation(&s_off).iter().map(|&v| v as f64).collect();
            on += cls.logit(&xo).unwrap() / 200.0;
            off += cls.logit(&xf).unwrap() / 200.0;
        }
        (on, off)
    };

    for step in 1..=2000 {
        // manual vice_update so we can force lambda when mixup is "off"
        let half = cfg.batch_size / 2;
        let mut pos = Vec::with_capacity(half);
        for _ in 0..half {
            let g = goals.get(rng.random_range(0..goals.len()));
            pos.push(g.iter().map(|&v| v as f64).collect());
        }
        let mut negs = Vec::with_capacity(half);
        for _ in 0..half {
            let t = neg.get(rng.random_range(0..neg.len()));
            negs.push(t.obs.iter().map(|&v| v as f64).collect());
        }
        let batch = ViceBatch::new(pos, negs).unwrap();
        let plan = if mixup_on {
            LossPlan::draw(cls.params().spec(), &cfg, batch.len(), false, &mut rng).unwrap()
        } else {
            LossPlan::identity(batch.len())
        };
        let (loss, grads) = vice_loss_with_plan(&cls, &batch, &plan).unwrap();
        let mut p = cls.params().clone();
        adam_step(&mut adam, &mut p, &grads).unwrap();
        cls = ViceClassifier::from_params(p, cfg.clone());
        if step % 400 == 0 {
            let (on, off) = probe(&cls, &mut rng);
            println!("step {step}: loss {loss:.4} logit(goal) {on:.3} logit(60deg) {off:.3}");
        }
    }
}
