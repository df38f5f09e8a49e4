//! Behavior-cloned reset (pickup) policies.
//!
//! The scripted expert stands in for human demonstrations: it is rolled out
//! from uniform object positions, successful pickups are stored as
//! (observation, action) pairs, and a deterministic tanh-head network is
//! regressed onto them with MSE. Training runs two policies, one cloned
//! from demos across objects and one from the current object only; each
//! reset attempt draws the multi-object policy with probability 0.8. A
//! reset that keeps failing re-seats the object at a fresh position, with a
//! hard cap of 25 attempts in total.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Reader, Writer};
use crate::env::{
    reset_observation, scripted_pickup_expert, step_reset, HandState, ObjectSpec, RESET_ACT_DIM,
    RESET_OBS_DIM,
};
use crate::error::{Error, Result};
use crate::nn::{adam_step, mlp_backward, mlp_forward, mlp_init, AdamState, MlpParams, MlpSpec};

pub const DEMO_MAGIC: &[u8; 4] = b"RBDM";
pub const DEMO_VERSION: u32 = 1;

/// Probability of picking the multi-object policy per reset attempt.
pub const MULTI_POLICY_PROB: f64 = 0.8;

/// Hard cap on reset attempts before giving up.
pub const MAX_TOTAL_ATTEMPTS: usize = 25;

/// One successful pickup demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoEpisode {
    pub object: String,
    pub pairs: Vec<(Vec<f32>, Vec<f32>)>,
}

/// Demonstrations grouped by episode, tagged with the object they came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemoSet {
    pub episodes: Vec<DemoEpisode>,
}

impl DemoSet {
    pub fn len_pairs(&self) -> usize {
        self.episodes.iter().map(|e| e.pairs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Merge another demo set in (multi-object training data).
    pub fn extend(&mut self, other: DemoSet) {
        self.episodes.extend(other.episodes);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(DEMO_MAGIC);
        w.u32(DEMO_VERSION);
        w.u32(RESET_OBS_DIM as u32);
        w.u32(RESET_ACT_DIM as u32);
        w.u64(self.episodes.len() as u64);
        for e in &self.episodes {
            w.str(&e.object);
            w.u64(e.pairs.len() as u64);
            for (obs, act) in &e.pairs {
                w.f32_slice(obs);
                w.f32_slice(act);
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(DEMO_MAGIC)?;
        r.version(DEMO_VERSION)?;
        let obs_dim = r.u32()? as usize;
        let act_dim = r.u32()? as usize;
        let n_episodes = r.u64()? as usize;
        let mut episodes = Vec::with_capacity(n_episodes);
        for _ in 0..n_episodes {
            let object = r.str()?;
            let n = r.u64()? as usize;
            let mut pairs = Vec::with_capacity(n);
            for _ in 0..n {
                let obs = r.f32_vec(obs_dim)?;
                let act = r.f32_vec(act_dim)?;
                pairs.push((obs, act));
            }
            episodes.push(DemoEpisode { object, pairs });
        }
        if r.remaining() != 0 {
            return Err(Error::Config("trailing bytes after demo set".into()));
        }
        Ok(Self { episodes })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Roll the scripted expert from uniform object positions and keep the
/// successful pickups. Fails if the expert cannot pick up at least half the
/// time, which signals a broken environment configuration.
pub fn collect_demos(
    object: &ObjectSpec,
    episodes: usize,
    max_steps: usize,
    rng: &mut impl Rng,
) -> Result<DemoSet> {
    if episodes == 0 {
        return Err(Error::Empty("demo episodes"));
    }
    let mut out = DemoSet::default();
    let mut successes = 0;
    for _ in 0..episodes {
        let mut state = HandState::new_reset(rng);
        let mut pairs = Vec::new();
        let mut picked = false;
        for _ in 0..max_steps {
            let action = scripted_pickup_expert(&state);
            let obs = reset_observation(&state);
            step_reset(&mut state, &action, rng)?;
            pairs.push((obs, action.iter().map(|&a| a as f32).collect()));
            if state.holding {
                picked = true;
                break;
            }
        }
        if picked {
            successes += 1;
            out.episodes.push(DemoEpisode {
                object: object.name.clone(),
                pairs,
            });
        }
    }
    let rate = successes as f64 / episodes as f64;
    if rate < 0.5 {
        return Err(Error::ExpertFailure { rate, episodes });
    }
    Ok(out)
}

/// Regress a deterministic tanh-head policy onto demo pairs with MSE.
/// Deterministic per seed.
pub fn bc_train(
    demos: &DemoSet,
    spec: &MlpSpec,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<MlpParams> {
    if demos.is_empty() {
        return Err(Error::Empty("demo set"));
    }
    let pairs: Vec<&(Vec<f32>, Vec<f32>)> =
        demos.episodes.iter().flat_map(|e| e.pairs.iter()).collect();
    let (obs0, act0) = pairs[0];
    if spec.input_dim != obs0.len() || spec.output_dim != act0.len() {
        return Err(Error::DimMismatch {
            context: "bc_train spec",
            expected: obs0.len(),
            got: spec.input_dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = mlp_init(spec, rng.random())?;
    let mut adam = AdamState::new(spec, lr);
    let n = batch_size.min(pairs.len());
    for _ in 0..steps {
        let mut grads = MlpParams::zeros(spec);
        for _ in 0..n {
            let (obs, act) = pairs[rng.random_range(0..pairs.len())];
            let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
            let (y, tape) = mlp_forward(&params, &x)?;
            let cot: Vec<f64> = y
                .iter()
                .zip(act)
                .map(|(&p, &a)| 2.0 * (p - a as f64) / n as f64)
                .collect();
            let (g, _) = mlp_backward(&params, &tape, &cot)?;
            grads.scaled_add(&g, 1.0)?;
        }
        adam_step(&mut adam, &mut params, &grads)?;
    }
    Ok(params)
}

/// Mean squared error of a policy on a pair slice (held-out evaluation).
pub fn bc_loss(params: &MlpParams, pairs: &[(Vec<f32>, Vec<f32>)]) -> Result<f64> {
    let mut total = 0.0;
    for (obs, act) in pairs {
        let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
        let (y, _) = mlp_forward(params, &x)?;
        total += y
            .iter()
            .zip(act)
            .map(|(&p, &a)| (p - a as f64) * (p - a as f64))
            .sum::<f64>();
    }
    Ok(total / pairs.len() as f64)
}

/// A reset controller: either a cloned network or the scripted expert.
#[derive(Debug, Clone)]
pub enum ResetPolicy {
    Cloned(MlpParams),
    Scripted,
}

impl ResetPolicy {
    pub fn act(&self, state: &HandState) -> Result<Vec<f64>> {
        match self {
            ResetPolicy::Scripted => Ok(scripted_pickup_expert(state)),
            ResetPolicy::Cloned(params) => {
                let obs = reset_observation(state);
                let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
                let (y, _) = mlp_forward(params, &x)?;
                Ok(y)
            }
        }
    }
}

/// The two reset policies and their selection rule.
#[derive(Debug, Clone)]
pub struct ResetPolicyPair {
    pub multi_object: ResetPolicy,
    pub single_object: ResetPolicy,
    /// Selection probability for the multi-object policy.
    pub multi_prob: f64,
}

impl ResetPolicyPair {
    pub fn new(multi_object: ResetPolicy, single_object: ResetPolicy) -> Self {
        Self {
            multi_object,
            single_object,
            multi_prob: MULTI_POLICY_PROB,
        }
    }

    pub fn scripted() -> Self {
        Self::new(ResetPolicy::Scripted, ResetPolicy::Scripted)
    }

    /// Draw which policy runs the next attempt. True = multi-object.
    pub fn draw_multi(&self, rng: &mut impl Rng) -> bool {
        rng.random::<f64>() < self.multi_prob
    }
}

/// Outcome of a successful reset.
#[derive(Debug, Clone, Copy)]
pub struct ResetOutcome {
    pub attempts: usize,
    /// Object positions consumed (re-seats after runs of failed attempts).
    pub reseats: usize,
}

/// Run reset attempts until the object is picked up. Each attempt draws a
/// policy (0.8 multi / 0.2 single) and rolls it for up to `max_steps`. After
/// `max_attempts` consecutive failures the object is re-seated at a fresh
/// uniform position. More than [`MAX_TOTAL_ATTEMPTS`] attempts is fatal.
pub fn execute_reset(
    pair: &ResetPolicyPair,
    state: &mut HandState,
    max_steps: usize,
    max_attempts: usize,
    rng: &mut impl Rng,
) -> Result<ResetOutcome> {
    if state.holding {
        return Err(Error::Phase("reset requested while holding"));
    }
    let mut attempts = 0;
    let mut reseats = 0;
    loop {
        for _ in 0..max_attempts {
            attempts += 1;
            if attempts > MAX_TOTAL_ATTEMPTS {
                return Err(Error::ResetFailure(MAX_TOTAL_ATTEMPTS));
            }
            let policy = if pair.draw_multi(rng) {
                &pair.multi_object
            } else {
                &pair.single_object
            };
            for _ in 0..max_steps {
                let action = policy.act(state)?;
                step_reset(state, &action, rng)?;
                if state.holding {
                    return Ok(ResetOutcome { attempts, reseats });
                }
            }
        }
        state.release(rng);
        reseats += 1;
    }
}
