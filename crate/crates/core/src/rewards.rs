//! Adversarially learned rewards from goal examples.
//!
//! A discriminator is trained to separate user-provided goal observations
//! (positives) from replay observations (negatives). Its loss combines
//! label smoothing, mixup between random batch pairs, and a penalty pushing
//! the input-gradient norm toward 1:
//!
//! `L = λ·BCE(D(x̃), y_i) + (1−λ)·BCE(D(x̃), y_j) + α·(‖∇_x D(x̃)‖₂ − 1)²`
//!
//! with `x̃ = λ·x_i + (1−λ)·x_j` and `λ ~ Beta(a, a)` per pair. The clamped
//! log-probability `max(log σ(D(o)), −10)` is the reward signal. A frozen
//! classifier rejects updates and is used to relabel prior data from other
//! tasks once, before training starts.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, draw_dropout_masks, mlp_backward, mlp_double_backward, mlp_forward,
    mlp_forward_masked, mlp_init, Activation, AdamState, MlpParams, MlpSpec, OutputActivation,
};
use crate::replay::{PriorDataset, TaskBuffer};

/// Reward floor; an unbounded negative reward destabilizes critics.
pub const REWARD_FLOOR: f64 = -10.0;

pub const GOALS_MAGIC: &[u8; 4] = b"RBGL";
pub const GOALS_VERSION: u32 = 1;

/// Goal observations defining one task.
#[derive(Debug, Clone)]
pub struct GoalSet {
    pub task_id: String,
    observations: Vec<Vec<f32>>,
}

impl GoalSet {
    pub fn new(task_id: impl Into<String>, observations: Vec<Vec<f32>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Empty("goal set"));
        }
        let dim = observations[0].len();
        if observations.iter().any(|o| o.len() != dim) {
            return Err(Error::DimMismatch {
                context: "goal set",
                expected: dim,
                got: observations.iter().find(|o| o.len() != dim).unwrap().len(),
            });
        }
        Ok(Self {
            task_id: task_id.into(),
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn get(&self, i: usize) -> &[f32] {
        &self.observations[i]
    }

    pub fn observations(&self) -> &[Vec<f32>] {
        &self.observations
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(GOALS_MAGIC);
        w.u32(GOALS_VERSION);
        w.u32(self.dim() as u32);
        w.u64(self.observations.len() as u64);
        w.str(&self.task_id);
        for o in &self.observations {
            w.f32_slice(o);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(GOALS_MAGIC)?;
        r.version(GOALS_VERSION)?;
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let task_id = r.str()?;
        let mut observations = Vec::with_capacity(count);
        for _ in 0..count {
            observations.push(r.f32_vec(dim)?);
        }
        if r.remaining() != 0 {
            return Err(Error::Config("trailing bytes after goal set".into()));
        }
        Self::new(task_id, observations)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Regularization and head configuration for the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ViceConfig {
    pub mixup_alpha: f64,
    pub label_smoothing: f64,
    pub gp_weight: f64,
    /// One λ per batch instead of per pair.
    pub per_batch_lambda: bool,
    /// Dropout rate per network site (input, then each hidden output).
    pub dropout_rates: Vec<f64>,
    pub lr: f64,
    /// Goal + replay samples per update, combined.
    pub batch_size: usize,
}

impl Default for ViceConfig {
    fn default() -> Self {
        Self {
            mixup_alpha: 1.0,
            label_smoothing: 0.2,
            gp_weight: 10.0,
            per_batch_lambda: false,
            dropout_rates: vec![0.5, 0.1],
            lr: 3e-4,
            batch_size: 512,
        }
    }
}

/// Discriminator with scalar logit output plus its regularization setup.
#[derive(Debug, Clone)]
pub struct ViceClassifier {
    params: MlpParams,
    adam: AdamState,
    cfg: ViceConfig,
    frozen: bool,
    updates: u64,
}

impl ViceClassifier {
    /// Build a fresh classifier: `obs_dim -> hidden (leaky relu) -> 1`.
    pub fn new(obs_dim: usize, hidden: Vec<usize>, cfg: ViceConfig, seed: u64) -> Result<Self> {
        if cfg.gp_weight < 0.0 {
            return Err(Error::Config("gp_weight must be >= 0".into()));
        }
        if cfg.mixup_alpha <= 0.0 {
            return Err(Error::Config("mixup_alpha must be > 0".into()));
        }
        let n_sites = hidden.len() + 1;
        if cfg.dropout_rates.len() != n_sites {
            return Err(Error::Config(format!(
                "expected {n_sites} dropout rates, got {}",
                cfg.dropout_rates.len()
            )));
        }
        let spec = MlpSpec::new(obs_dim, hidden, 1)
            .with_activations(Activation::LeakyRelu, OutputActivation::Identity);
        let params = mlp_init(&spec, seed)?;
        let adam = AdamState::new(&spec, cfg.lr);
        Ok(Self {
            params,
            adam,
            cfg,
            frozen: false,
            updates: 0,
        })
    }

    /// Wrap existing parameters (test fixtures).
    pub fn from_params(params: MlpParams, cfg: ViceConfig) -> Self {
        let adam = AdamState::new(params.spec(), cfg.lr);
        Self {
            params,
            adam,
            cfg,
            frozen: false,
            updates: 0,
        }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn cfg(&self) -> &ViceConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.params.spec().input_dim
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Raw logit with dropout disabled.
    pub fn logit(&self, obs: &[f64]) -> Result<f64> {
        let (y, _) = mlp_forward(&self.params, obs)?;
        Ok(y[0])
    }

    /// Reward `max(log σ(logit), −10)`; deterministic (dropout off).
    pub fn vice_reward(&self, obs: &[f32]) -> Result<f64> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimMismatch {
                context: "vice_reward",
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
        let z = self.logit(&x)?;
        Ok(log_sigmoid(z).max(REWARD_FLOOR))
    }

    /// Export: network checkpoint followed by a config block.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.params.write(&mut w);
        w.f64(self.cfg.mixup_alpha);
        w.f64(self.cfg.label_smoothing);
        w.f64(self.cfg.gp_weight);
        w.u8(self.cfg.per_batch_lambda as u8);
        w.u32(self.cfg.dropout_rates.len() as u32);
        for &r in &self.cfg.dropout_rates {
            w.f64(r);
        }
        w.f64(self.cfg.lr);
        w.u32(self.cfg.batch_size as u32);
        w.u8(self.frozen as u8);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let params = MlpParams::read(&mut r)?;
        let mixup_alpha = r.f64()?;
        let label_smoothing = r.f64()?;
        let gp_weight = r.f64()?;
        let per_batch_lambda = r.u8()? != 0;
        let n_rates = r.u32()? as usize;
        let mut dropout_rates = Vec::with_capacity(n_rates);
        for _ in 0..n_rates {
            dropout_rates.push(r.f64()?);
        }
        let lr = r.f64()?;
        let batch_size = r.u32()? as usize;
        let frozen = r.u8()? != 0;
        if r.remaining() != 0 {
            return Err(Error::Config("trailing bytes after classifier".into()));
        }
        let cfg = ViceConfig {
            mixup_alpha,
            label_smoothing,
            gp_weight,
            per_batch_lambda,
            dropout_rates,
            lr,
            batch_size,
        };
        let adam = AdamState::new(params.spec(), lr);
        Ok(Self {
            params,
            adam,
            cfg,
            frozen,
            updates: 0,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn log_sigmoid(z: f64) -> f64 {
    // log σ(z) = -softplus(-z)
    if z < -30.0 {
        z
    } else {
        -(-z).exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Binary cross entropy of a logit against a (possibly soft) target.
fn bce(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

/// Half goal observations (label 1), half replay observations (label 0).
#[derive(Debug, Clone)]
pub struct ViceBatch {
    pub inputs: Vec<Vec<f64>>,
    /// Raw labels before smoothing: 1.0 positives, 0.0 negatives.
    pub labels: Vec<f64>,
}

impl ViceBatch {
    pub fn new(positives: Vec<Vec<f64>>, negatives: Vec<Vec<f64>>) -> Result<Self> {
        if positives.len() != negatives.len() {
            return Err(Error::Config(format!(
                "vice batch halves differ: {} positives vs {} negatives",
                positives.len(),
                negatives.len()
            )));
        }
        if positives.is_empty() {
            return Err(Error::Empty("vice batch"));
        }
        let mut inputs = positives;
        let n = inputs.len();
        inputs.extend(negatives);
        let mut labels = vec![1.0; n];
        labels.extend(vec![0.0; n]);
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// All randomness one loss evaluation needs, drawn up front so the same
/// evaluation can be replayed at perturbed parameters.
#[derive(Debug, Clone)]
pub struct LossPlan {
    /// Mixup partner index per sample.
    pub partner: Vec<usize>,
    /// Mixing weight per sample.
    pub lambda: Vec<f64>,
    /// Dropout masks per sample, or none for mask-free evaluation.
    pub masks: Option<Vec<Vec<Vec<f64>>>>,
}

impl LossPlan {
    /// Deterministic plan: λ forced to 1 (mixup identity), no dropout.
    pub fn identity(n: usize) -> Self {
        Self {
            partner: (0..n).collect(),
            lambda: vec![1.0; n],
            masks: None,
        }
    }

    pub fn draw(
        spec: &MlpSpec,
        cfg: &ViceConfig,
        n: usize,
        train_dropout: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let beta = Beta::new(cfg.mixup_alpha, cfg.mixup_alpha)
            .map_err(|e| Error::Config(format!("invalid mixup alpha: {e}")))?;
        let mut partner: Vec<usize> = (0..n).collect();
        // Fisher-Yates permutation for partner assignment
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            partner.swap(i, j);
        }
        let lambda = if cfg.per_batch_lambda {
            vec![beta.sample(rng); n]
        } else {
            (0..n).map(|_| beta.sample(rng)).collect()
        };
        let masks = if train_dropout && cfg.dropout_rates.iter().any(|&r| r > 0.0) {
            let mut all = Vec::with_capacity(n);
            for _ in 0..n {
                all.push(draw_dropout_masks(spec, &cfg.dropout_rates, rng)?);
            }
            Some(all)
        } else {
            None
        };
        Ok(Self {
            partner,
            lambda,
            masks,
        })
    }
}

/// Mixed inputs and soft labels with the mixing weight per pair.
#[derive(Debug, Clone)]
pub struct MixupOutput {
    pub inputs: Vec<Vec<f64>>,
    pub soft_labels: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub partner: Vec<usize>,
}

/// Convex combinations of random batch pairs: `x̃ = λ·x_i + (1−λ)·x_j`,
/// `ỹ = λ·y_i + (1−λ)·y_j`, `λ ~ Beta(α, α)` per pair.
pub fn mixup(batch: &ViceBatch, alpha: f64, rng: &mut impl Rng) -> Result<MixupOutput> {
    if batch.len() % 2 != 0 {
        return Err(Error::Config("mixup needs an even batch".into()));
    }
    let cfg = ViceConfig {
        mixup_alpha: alpha,
        ..ViceConfig::default()
    };
    // dims of the plan's mask spec are irrelevant here; draw without masks
    let spec = MlpSpec::new(batch.inputs[0].len(), vec![], 1);
    let plan = LossPlan::draw(&spec, &cfg, batch.len(), false, rng)?;
    Ok(apply_mixup(batch, &plan))
}

/// Apply a fixed plan's pairing and mixing weights to a batch.
pub fn apply_mixup(batch: &ViceBatch, plan: &LossPlan) -> MixupOutput {
    let n = batch.len();
    let mut inputs = Vec::with_capacity(n);
    let mut soft_labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = plan.lambda[i];
        let j = plan.partner[i];
        let xi = &batch.inputs[i];
        let xj = &batch.inputs[j];
        inputs.push(
            xi.iter()
                .zip(xj)
                .map(|(&a, &b)| l * a + (1.0 - l) * b)
                .collect(),
        );
        soft_labels.push(l * batch.labels[i] + (1.0 - l) * batch.labels[j]);
    }
    MixupOutput {
        inputs,
        soft_labels,
        lambdas: plan.lambda.clone(),
        partner: plan.partner.clone(),
    }
}

/// Mean of `α·(‖∇_x D(x)‖₂ − 1)²` over the batch, dropout off.
pub fn gradient_penalty(classifier: &ViceClassifier, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Empty("gradient penalty batch"));
    }
    let mut total = 0.0;
    for x in inputs {
        let (_, tape) = mlp_forward(&classifier.params, x)?;
        let (_, gx) = mlp_backward(&classifier.params, &tape, &[1.0])?;
        let norm = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("input gradient"));
        }
        let d = norm - 1.0;
        total += classifier.cfg.gp_weight * d * d;
    }
    Ok(total / inputs.len() as f64)
}

/// Loss and parameter gradients over a batch under a fixed plan.
///
/// Smoothing is applied to the raw labels first, then mixup; each mixed
/// sample is scored with BCE against both partners weighted `λ` and `1−λ`;
/// the gradient penalty is evaluated at the mixed inputs with the same
/// dropout masks.
pub fn vice_loss_with_plan(
    classifier: &ViceClassifier,
    batch: &ViceBatch,
    plan: &LossPlan,
) -> Result<(f64, MlpParams)> {
    let n = batch.len();
    if n == 0 || n % 2 != 0 {
        return Err(Error::Config("vice loss needs an even, nonempty batch".into()));
    }
    let params = &classifier.params;
    let cfg = &classifier.cfg;
    let s = cfg.label_smoothing;
    let smoothed: Vec<f64> = batch.labels.iter().map(|&y| y * (1.0 - s) + s / 2.0).collect();

    let mut loss = 0.0;
    let mut grads = MlpParams::zeros(params.spec());
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let l = plan.lambda[i];
        let j = plan.partner[i];
        let x: Vec<f64> = batch.inputs[i]
            .iter()
            .zip(&batch.inputs[j])
            .map(|(&a, &b)| l * a + (1.0 - l) * b)
            .collect();
        let masks = plan.masks.as_ref().map(|m| m[i].as_slice());
        let (out, tape) = mlp_forward_masked(params, &x, masks)?;
        let z = out[0];
        loss += inv_n * (l * bce(z, smoothed[i]) + (1.0 - l) * bce(z, smoothed[j]));

        // one unit-cotangent backward yields both the param-gradient basis
        // (backward is linear in the cotangent) and the input gradient
        let (unit_grads, gx) = mlp_backward(params, &tape, &[1.0])?;
        let y_mix = l * smoothed[i] + (1.0 - l) * smoothed[j];
        let dz = sigmoid(z) - y_mix;
        grads.scaled_add(&unit_grads, inv_n * dz)?;

        if cfg.gp_weight > 0.0 {
            let norm = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFinite("input gradient"));
            }
            let d = norm - 1.0;
            loss += inv_n * cfg.gp_weight * d * d;
            if norm > 1e-12 {
                let scale = 2.0 * cfg.gp_weight * d / (norm * n as f64);
                let dir: Vec<f64> = gx.iter().map(|&g| scale * g).collect();
                let gp_grads = mlp_double_backward(params, &tape, &[1.0], &dir)?;
                grads.scaled_add(&gp_grads, 1.0)?;
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("vice loss"));
    }
    Ok((loss, grads))
}

/// Loss only (no gradients), used by finite-difference oracles.
pub fn vice_loss_value(
    classifier: &ViceClassifier,
    batch: &ViceBatch,
    plan: &LossPlan,
) -> Result<f64> {
    let n = batch.len();
    let params = &classifier.params;
    let cfg = &classifier.cfg;
    let s = cfg.label_smoothing;
    let smoothed: Vec<f64> = batch.labels.iter().map(|&y| y * (1.0 - s) + s / 2.0).collect();
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let l = plan.lambda[i];
        let j = plan.partner[i];
        let x: Vec<f64> = batch.inputs[i]
            .iter()
            .zip(&batch.inputs[j])
            .map(|(&a, &b)| l * a + (1.0 - l) * b)
            .collect();
        let masks = plan.masks.as_ref().map(|m| m[i].as_slice());
        let (out, tape) = mlp_forward_masked(params, &x, masks)?;
        let z = out[0];
        loss += inv_n * (l * bce(z, smoothed[i]) + (1.0 - l) * bce(z, smoothed[j]));
        if cfg.gp_weight > 0.0 {
            let (_, gx) = mlp_backward(params, &tape, &[1.0])?;
            let d = gx.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0;
            loss += inv_n * cfg.gp_weight * d * d;
        }
    }
    Ok(loss)
}

/// Regularized discriminator loss with freshly drawn mixup pairs, mixing
/// weights, and dropout masks.
pub fn vice_loss(
    classifier: &ViceClassifier,
    batch: &ViceBatch,
    rng: &mut impl Rng,
) -> Result<(f64, MlpParams)> {
    if classifier.frozen {
        return Err(Error::Frozen);
    }
    let plan = LossPlan::draw(
        classifier.params.spec(),
        &classifier.cfg,
        batch.len(),
        true,
        rng,
    )?;
    vice_loss_with_plan(classifier, batch, &plan)
}

/// One Adam step on `vice_loss` over a fresh batch: goals sampled uniformly
/// with replacement, negatives from the online buffer only.
pub fn vice_update(
    classifier: &mut ViceClassifier,
    goals: &GoalSet,
    online: &TaskBuffer,
    rng: &mut impl Rng,
) -> Result<f64> {
    if classifier.frozen {
        return Err(Error::Frozen);
    }
    if online.is_empty() {
        return Err(Error::Empty("online buffer"));
    }
    if goals.dim() != classifier.obs_dim() {
        return Err(Error::DimMismatch {
            context: "vice_update goals",
            expected: classifier.obs_dim(),
            got: goals.dim(),
        });
    }
    let half = classifier.cfg.batch_size / 2;
    let mut positives = Vec::with_capacity(half);
    for _ in 0..half {
        let g = goals.get(rng.random_range(0..goals.len()));
        positives.push(g.iter().map(|&v| v as f64).collect());
    }
    let mut negatives = Vec::with_capacity(half);
    for _ in 0..half {
        let t = online.get(online.sample_index(rng));
        negatives.push(t.obs.iter().map(|&v| v as f64).collect());
    }
    let batch = ViceBatch::new(positives, negatives)?;
    let (loss, grads) = vice_loss(classifier, &batch, rng)?;
    adam_step(&mut classifier.adam, &mut classifier.params, &grads)?;
    classifier.updates += 1;
    Ok(loss)
}

/// Rewrite non-frozen rewards across a prior dataset from this classifier.
pub fn relabel(prior: &mut PriorDataset, classifier: &ViceClassifier) -> Result<usize> {
    prior.relabel_with(&|obs: &[f32]| classifier.vice_reward(obs))
}
