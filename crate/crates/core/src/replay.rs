//! Per-task transition storage and the 50/50 prior/online batch composition.
//!
//! Prior data from earlier tasks is held as a set of read-only buffers; each
//! training batch takes half its entries from the online buffer and half
//! uniformly from the pooled prior buffers. Rewards in prior transitions are
//! either frozen (labeled once by the classifier of the task that produced
//! them) or live (rewritten by the current task's classifier).

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const BUFFER_MAGIC: &[u8; 4] = b"RBRB";
pub const BUFFER_VERSION: u32 = 1;

/// Default online-buffer capacity; never hit at desk scale.
pub const DEFAULT_CAPACITY: usize = 300_000;

/// One environment step record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    /// Reward slot; may be rewritten while `reward_frozen` is false.
    pub reward: f32,
    pub next_obs: Vec<f32>,
    /// 1.0 while the value bootstrap continues, 0.0 at a true terminal.
    pub not_done: f32,
    pub task_id: String,
    pub reward_frozen: bool,
}

/// Append-only FIFO store for one task's transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBuffer {
    task_id: String,
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
}

impl TaskBuffer {
    pub fn new(task_id: impl Into<String>, capacity: usize) -> Self {
        Self {
            task_id: task_id.into(),
            capacity: capacity.max(1),
            items: VecDeque::new(),
            inserted: 0,
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of transitions ever pushed (monotone).
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn obs_dim(&self) -> Option<usize> {
        self.items.front().map(|t| t.obs.len())
    }

    pub fn act_dim(&self) -> Option<usize> {
        self.items.front().map(|t| t.action.len())
    }

    pub fn frozen_fraction(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        let n = self.items.iter().filter(|t| t.reward_frozen).count();
        n as f64 / self.items.len() as f64
    }

    /// Append one transition; evicts FIFO at capacity.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != t.next_obs.len() {
            return Err(Error::DimMismatch {
                context: "transition next_obs",
                expected: t.obs.len(),
                got: t.next_obs.len(),
            });
        }
        if let Some(first) = self.items.front() {
            if t.obs.len() != first.obs.len() {
                return Err(Error::DimMismatch {
                    context: "push obs",
                    expected: first.obs.len(),
                    got: t.obs.len(),
                });
            }
            if t.action.len() != first.action.len() {
                return Err(Error::DimMismatch {
                    context: "push action",
                    expected: first.action.len(),
                    got: t.action.len(),
                });
            }
        }
        if t.task_id != self.task_id {
            return Err(Error::Config(format!(
                "transition task '{}' pushed into buffer '{}'",
                t.task_id, self.task_id
            )));
        }
        debug_assert!(t.not_done == 0.0 || t.not_done == 1.0);
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
        Ok(())
    }

    /// Uniform random index; caller samples with replacement.
    pub fn sample_index(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(0..self.items.len())
    }

    /// Mark every stored transition's reward as frozen (or live).
    pub fn set_all_frozen(&mut self, frozen: bool) {
        for t in &mut self.items {
            t.reward_frozen = frozen;
        }
    }

    /// Rewrite the reward slot of every non-frozen transition from
    /// `reward_fn(next_obs)`. Frozen transitions are never touched; a second
    /// pass with the same function is a bitwise no-op.
    pub fn relabel_with(&mut self, reward_fn: &dyn Fn(&[f32]) -> Result<f64>) -> Result<usize> {
        let mut rewritten = 0;
        for t in &mut self.items {
            if t.reward_frozen {
                continue;
            }
            t.reward = reward_fn(&t.next_obs)? as f32;
            rewritten += 1;
        }
        Ok(rewritten)
    }

    /// Uniform subsample without replacement, preserving insertion order
    /// among kept items. Deterministic per seed.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<TaskBuffer> {
        if n > self.items.len() {
            return Err(Error::OutOfRange {
                requested: n,
                available: self.items.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        // partial Fisher-Yates: the first n entries are the chosen set
        for i in 0..n {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        let mut keep: Vec<usize> = idx[..n].to_vec();
        keep.sort_unstable();
        let mut out = TaskBuffer::new(self.task_id.clone(), self.capacity);
        for i in keep {
            out.items.push_back(self.items[i].clone());
        }
        out.inserted = n as u64;
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.magic(BUFFER_MAGIC);
        w.u32(BUFFER_VERSION);
        w.u32(self.obs_dim().unwrap_or(0) as u32);
        w.u32(self.act_dim().unwrap_or(0) as u32);
        w.u64(self.items.len() as u64);
        w.str(&self.task_id);
        for t in &self.items {
            w.f32_slice(&t.obs);
            w.f32_slice(&t.action);
            w.f32(t.reward);
            w.f32_slice(&t.next_obs);
            w.f32(t.not_done);
            w.u8(t.reward_frozen as u8);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(BUFFER_MAGIC)?;
        r.version(BUFFER_VERSION)?;
        let obs_dim = r.u32()? as usize;
        let act_dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let task_id = r.str()?;
        let mut items = VecDeque::with_capacity(count);
        for _ in 0..count {
            let obs = r.f32_vec(obs_dim)?;
            let action = r.f32_vec(act_dim)?;
            let reward = r.f32()?;
            let next_obs = r.f32_vec(obs_dim)?;
            let not_done = r.f32()?;
            let reward_frozen = r.u8()? != 0;
            items.push_back(Transition {
                obs,
                action,
                reward,
                next_obs,
                not_done,
                task_id: task_id.clone(),
                reward_frozen,
            });
        }
        if r.remaining() != 0 {
            return Err(Error::Config("trailing bytes after buffer".into()));
        }
        Ok(Self {
            task_id,
            capacity: DEFAULT_CAPACITY.max(count),
            items,
            inserted: count as u64,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Buffers from previously trained tasks.
#[derive(Debug, Clone, Default)]
pub struct PriorDataset {
    buffers: Vec<TaskBuffer>,
}

impl PriorDataset {
    pub fn new(buffers: Vec<TaskBuffer>) -> Self {
        Self { buffers }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn buffers(&self) -> &[TaskBuffer] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [TaskBuffer] {
        &mut self.buffers
    }

    pub fn total_len(&self) -> usize {
        self.buffers.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_len() == 0
    }

    /// Relabel non-frozen rewards in every buffer.
    pub fn relabel_with(&mut self, reward_fn: &dyn Fn(&[f32]) -> Result<f64>) -> Result<usize> {
        let mut n = 0;
        for b in &mut self.buffers {
            n += b.relabel_with(reward_fn)?;
        }
        Ok(n)
    }

    /// Uniform draw over the union of all buffers.
    fn sample_pooled(&self, rng: &mut impl Rng) -> &Transition {
        let total = self.total_len();
        debug_assert!(total > 0);
        let mut k = rng.random_range(0..total);
        for b in &self.buffers {
            if k < b.len() {
                return b.get(k);
            }
            k -= b.len();
        }
        unreachable!("index within total")
    }

    /// Buffer chosen uniformly, then a transition uniformly within it.
    fn sample_stratified(&self, rng: &mut impl Rng) -> &Transition {
        let nonempty: Vec<&TaskBuffer> = self.buffers.iter().filter(|b| !b.is_empty()).collect();
        debug_assert!(!nonempty.is_empty());
        let b = nonempty[rng.random_range(0..nonempty.len())];
        b.get(b.sample_index(rng))
    }
}

/// A training batch: half prior, half online when prior data exists.
#[derive(Debug, Clone)]
pub struct MixedBatch {
    /// Online entries first, then prior entries.
    pub transitions: Vec<Transition>,
    pub n_online: usize,
    pub n_prior: usize,
}

/// Compose a batch of `batch_size` transitions: exactly `⌈B/2⌉` online and
/// `⌊B/2⌋` prior entries when prior data is nonempty, 100% online otherwise.
/// Sampling is with replacement; the prior half is uniform over the pooled
/// prior buffers.
pub fn sample_mixed(
    online: &TaskBuffer,
    prior: &PriorDataset,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<MixedBatch> {
    sample_mixed_with(online, prior, batch_size, false, rng)
}

/// `sample_mixed` with a stratified-per-buffer option for the prior half.
pub fn sample_mixed_with(
    online: &TaskBuffer,
    prior: &PriorDataset,
    batch_size: usize,
    stratified: bool,
    rng: &mut impl Rng,
) -> Result<MixedBatch> {
    if online.is_empty() {
        return Err(Error::Empty("online buffer"));
    }
    if batch_size < 2 {
        return Err(Error::Config(format!("batch_size {batch_size} < 2")));
    }
    let n_prior = if prior.is_empty() { 0 } else { batch_size / 2 };
    let n_online = batch_size - n_prior;
    let mut transitions = Vec::with_capacity(batch_size);
    for _ in 0..n_online {
        transitions.push(online.get(online.sample_index(rng)).clone());
    }
    for _ in 0..n_prior {
        let t = if stratified {
            prior.sample_stratified(rng)
        } else {
            prior.sample_pooled(rng)
        };
        transitions.push(t.clone());
    }
    Ok(MixedBatch {
        transitions,
        n_online,
        n_prior,
    })
}
