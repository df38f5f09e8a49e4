//! Minimal dense-network engine.
//!
//! Networks are plain fully connected stacks over `f64`. The engine provides
//! reverse-mode gradients with respect to both parameters and inputs (input
//! gradients feed the classifier's gradient penalty), a second pass that
//! differentiates the input gradient itself with respect to the parameters,
//! an Adam optimizer, Polyak averaging, inverted-scaling dropout, and a
//! bit-exact binary checkpoint format.
//!
//! Everything here is a pure function over value-semantic records; nothing
//! holds hidden state, so calls are safe from multiple threads on distinct
//! data and deterministic given (seed, inputs).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RBNN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Slope of the negative branch of leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
        }
    }

    fn d(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }

    /// Second derivative; zero almost everywhere for the piecewise-linear ones.
    fn dd(self, x: f64) -> f64 {
        match self {
            Activation::Relu | Activation::LeakyRelu => 0.0,
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::LeakyRelu => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::LeakyRelu),
            _ => Err(Error::Config(format!("unknown activation tag {t}"))),
        }
    }
}

/// Output-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

impl OutputActivation {
    fn apply(self, x: f64) -> f64 {
        match self {
            OutputActivation::Identity => x,
            OutputActivation::Tanh => x.tanh(),
        }
    }

    fn d(self, x: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    fn dd(self, x: f64) -> f64 {
        match self {
            OutputActivation::Identity => 0.0,
            OutputActivation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }

    fn tag(self) -> u8 {
        match self {
            OutputActivation::Identity => 0,
            OutputActivation::Tanh => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(OutputActivation::Identity),
            1 => Ok(OutputActivation::Tanh),
            _ => Err(Error::Config(format!("unknown output activation tag {t}"))),
        }
    }
}

/// Network shape and activation choice. Immutable once a network is built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation: Activation::Relu,
            output_activation: OutputActivation::Identity,
        }
    }

    pub fn with_activations(mut self, hidden: Activation, output: OutputActivation) -> Self {
        self.hidden_activation = hidden;
        self.output_activation = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("all network dims must be >= 1".into()));
        }
        Ok(())
    }

    /// (fan_in, fan_out) per layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }

    fn write(&self, w: &mut Writer) {
        w.u32(self.input_dim as u32);
        w.u32(self.hidden_dims.len() as u32);
        for &h in &self.hidden_dims {
            w.u32(h as u32);
        }
        w.u32(self.output_dim as u32);
        w.u8(self.hidden_activation.tag());
        w.u8(self.output_activation.tag());
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let input_dim = r.u32()? as usize;
        let n_hidden = r.u32()? as usize;
        let mut hidden_dims = Vec::with_capacity(n_hidden);
        for _ in 0..n_hidden {
            hidden_dims.push(r.u32()? as usize);
        }
        let output_dim = r.u32()? as usize;
        let hidden_activation = Activation::from_tag(r.u8()?)?;
        let output_activation = OutputActivation::from_tag(r.u8()?)?;
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Dense-network parameters; weight matrices are row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let weights = spec
            .layer_dims()
            .iter()
            .map(|&(i, o)| vec![0.0; i * o])
            .collect();
        let biases = spec.layer_dims().iter().map(|&(_, o)| vec![0.0; o]).collect();
        Self {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Mutable access for hand-built test fixtures.
    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.spec == other.spec
    }

    pub fn all_finite(&self) -> bool {
        self.iter_flat().all(|v| v.is_finite())
    }

    /// Flat iteration order: per layer, weights then biases.
    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .copied()
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for v in w.iter_mut().chain(b.iter_mut()) {
                f(v);
            }
        }
    }

    /// Elementwise combine with a same-shaped record.
    pub fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimMismatch {
                context: "param zip",
                expected: self.param_count(),
                got: other.param_count(),
            });
        }
        for l in 0..self.weights.len() {
            for (a, &b) in self.weights[l].iter_mut().zip(&other.weights[l]) {
                f(a, b);
            }
            for (a, &b) in self.biases[l].iter_mut().zip(&other.biases[l]) {
                f(a, b);
            }
        }
        Ok(())
    }

    pub fn scaled_add(&mut self, other: &Self, scale: f64) -> Result<()> {
        self.zip_mut(other, |a, b| *a += scale * b)
    }

    pub fn write(&self, w: &mut Writer) {
        w.magic(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        self.spec.write(w);
        for (wl, bl) in self.weights.iter().zip(&self.biases) {
            w.f64_slice(wl);
            w.f64_slice(bl);
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        r.magic(CHECKPOINT_MAGIC)?;
        r.version(CHECKPOINT_VERSION)?;
        let spec = MlpSpec::read(r)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, o) in spec.layer_dims() {
            weights.push(r.f64_vec(i * o)?);
            biases.push(r.f64_vec(o)?);
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r)?;
        if r.remaining() != 0 {
            return Err(Error::Config("trailing bytes after checkpoint".into()));
        }
        Ok(p)
    }
}

/// Fan-in-scaled uniform init; biases zero; deterministic for a fixed seed.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> Result<MlpParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::zeros(spec);
    for (l, (fan_in, _)) in spec.layer_dims().into_iter().enumerate() {
        let limit = 1.0 / (fan_in as f64).sqrt();
        for w in params.weights[l].iter_mut() {
            *w = rng.random_range(-limit..limit);
        }
    }
    Ok(params)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[r] = dot(w_row_r, x) + b[r]`
fn matvec(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(&w[r * n..(r + 1) * n], x) + b[r];
    }
}

/// `out += wᵀ dz` accumulated row by row.
fn matvec_t(w: &[f64], dz: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[r * n..(r + 1) * n];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += d * wv;
        }
    }
}

/// `gw += dz ⊗ a` (row-major accumulation).
fn outer_acc(gw: &mut [f64], dz: &[f64], a: &[f64]) {
    let n = a.len();
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut gw[r * n..(r + 1) * n];
        for (g, &av) in row.iter_mut().zip(a) {
            *g += d * av;
        }
    }
}

/// Inverted-scaling dropout masks, one per site.
///
/// Site 0 scales the network input, site `l` (1-based) scales the output of
/// hidden layer `l`. Entries are `0` with probability `rate` and
/// `1/(1-rate)` otherwise, so inference needs no rescaling.
pub fn draw_dropout_masks(spec: &MlpSpec, rates: &[f64], rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let n_sites = spec.hidden_dims.len() + 1;
    if rates.len() != n_sites {
        return Err(Error::DimMismatch {
            context: "dropout rates",
            expected: n_sites,
            got: rates.len(),
        });
    }
    let mut site_dims = Vec::with_capacity(n_sites);
    site_dims.push(spec.input_dim);
    site_dims.extend(spec.hidden_dims.iter().copied());
    let mut masks = Vec::with_capacity(n_sites);
    for (&rate, &dim) in rates.iter().zip(&site_dims) {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0,1)")));
        }
        let keep = 1.0 - rate;
        let mask = (0..dim)
            .map(|_| {
                if rate == 0.0 || rng.random::<f64>() >= rate {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        masks.push(mask);
    }
    Ok(masks)
}

/// Activations retained by a forward pass, consumed by the backward passes.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    /// Input after the site-0 dropout mask (the raw input when no dropout).
    post_input: Vec<f64>,
    /// Pre-activations z_l, one per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation (and post-dropout) outputs a_l, one per layer.
    post: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
}

impl ForwardTape {
    fn matches(&self, params: &MlpParams) -> bool {
        let dims = params.spec.layer_dims();
        self.post_input.len() == params.spec.input_dim
            && self.pre.len() == dims.len()
            && self
                .pre
                .iter()
                .zip(&dims)
                .all(|(z, &(_, o))| z.len() == o)
    }

    fn mask(&self, site: usize) -> Option<&[f64]> {
        self.masks.as_ref().map(|m| m[site].as_slice())
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().expect("tape has at least one layer")
    }
}

/// Forward pass retaining activations. No dropout.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
    mlp_forward_masked(params, input, None)
}

/// Forward pass with optional pre-drawn dropout masks (training mode).
pub fn mlp_forward_masked(
    params: &MlpParams,
    input: &[f64],
    masks: Option<&[Vec<f64>]>,
) -> Result<(Vec<f64>, ForwardTape)> {
    let spec = &params.spec;
    if input.len() != spec.input_dim {
        return Err(Error::DimMismatch {
            context: "mlp_forward input",
            expected: spec.input_dim,
            got: input.len(),
        });
    }
    let n_layers = params.weights.len();
    let mut post_input = input.to_vec();
    if let Some(m) = masks {
        for (v, &mv) in post_input.iter_mut().zip(&m[0]) {
            *v *= mv;
        }
    }
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut a_prev = post_input.clone();
    for l in 0..n_layers {
        let out_dim = params.biases[l].len();
        let mut z = vec![0.0; out_dim];
        matvec(&params.weights[l], &params.biases[l], &a_prev, &mut z);
        let last = l == n_layers - 1;
        let mut a: Vec<f64> = if last {
            z.iter().map(|&v| spec.output_activation.apply(v)).collect()
        } else {
            z.iter().map(|&v| spec.hidden_activation.apply(v)).collect()
        };
        if !last {
            if let Some(m) = masks {
                for (v, &mv) in a.iter_mut().zip(&m[l + 1]) {
                    *v *= mv;
                }
            }
        }
        pre.push(z);
        a_prev = a.clone();
        post.push(a);
    }
    let output = post.last().unwrap().clone();
    Ok((
        output,
        ForwardTape {
            post_input,
            pre,
            post,
            masks: masks.map(|m| m.to_vec()),
        },
    ))
}

/// Reverse-mode gradients of `<cotangent, output>` with respect to the
/// parameters and the input.
pub fn mlp_backward(
    params: &MlpParams,
    tape: &ForwardTape,
    cotangent: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    let spec = &params.spec;
    if !tape.matches(params) {
        return Err(Error::StaleTape);
    }
    if cotangent.len() != spec.output_dim {
        return Err(Error::DimMismatch {
            context: "mlp_backward cotangent",
            expected: spec.output_dim,
            got: cotangent.len(),
        });
    }
    let n_layers = params.weights.len();
    let mut grads = MlpParams::zeros(spec);

    // dz for the output layer includes the output activation derivative.
    let mut dz: Vec<f64> = cotangent
        .iter()
        .zip(&tape.pre[n_layers - 1])
        .map(|(&c, &z)| c * spec.output_activation.d(z))
        .collect();

    for l in (0..n_layers).rev() {
        let a_prev: &[f64] = if l == 0 {
            &tape.post_input
        } else {
            &tape.post[l - 1]
        };
        outer_acc(&mut grads.weights[l], &dz, a_prev);
        for (g, &d) in grads.biases[l].iter_mut().zip(&dz) {
            *g = d;
        }
        let mut da = vec![0.0; a_prev.len()];
        matvec_t(&params.weights[l], &dz, &mut da);
        if l == 0 {
            if let Some(m) = tape.mask(0) {
                for (v, &mv) in da.iter_mut().zip(m) {
                    *v *= mv;
                }
            }
            return Ok((grads, da));
        }
        if let Some(m) = tape.mask(l) {
            for (v, &mv) in da.iter_mut().zip(m) {
                *v *= mv;
            }
        }
        dz = da
            .iter()
            .zip(&tape.pre[l - 1])
            .map(|(&d, &z)| d * spec.hidden_activation.d(z))
            .collect();
    }
    unreachable!("layer loop always returns at l == 0")
}

/// Parameter gradient of the directional input derivative
/// `F(θ) = <dir, ∇_input <cotangent, output>>`.
///
/// This is the second-order pass behind the gradient penalty: it runs a
/// forward tangent sweep along `dir` and then reverse-propagates through
/// both the primal and tangent chains. `dir` and `cotangent` are treated
/// as constants.
pub fn mlp_double_backward(
    params: &MlpParams,
    tape: &ForwardTape,
    cotangent: &[f64],
    dir: &[f64],
) -> Result<MlpParams> {
    let spec = &params.spec;
    if !tape.matches(params) {
        return Err(Error::StaleTape);
    }
    if cotangent.len() != spec.output_dim {
        return Err(Error::DimMismatch {
            context: "double backward cotangent",
            expected: spec.output_dim,
            got: cotangent.len(),
        });
    }
    if dir.len() != spec.input_dim {
        return Err(Error::DimMismatch {
            context: "double backward direction",
            expected: spec.input_dim,
            got: dir.len(),
        });
    }
    let n_layers = params.weights.len();

    // Forward tangent sweep along `dir`, retaining tz_l and ta_l.
    let mut ta_prev: Vec<f64> = dir.to_vec();
    if let Some(m) = tape.mask(0) {
        for (v, &mv) in ta_prev.iter_mut().zip(m) {
            *v *= mv;
        }
    }
    let ta_input = ta_prev.clone();
    let mut tz_all = Vec::with_capacity(n_layers);
    let mut ta_all = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let out_dim = params.biases[l].len();
        let mut tz = vec![0.0; out_dim];
        // tangent of z_l has no bias contribution
        for (r, o) in tz.iter_mut().enumerate() {
            *o = dot(
                &params.weights[l][r * ta_prev.len()..(r + 1) * ta_prev.len()],
                &ta_prev,
            );
        }
        let last = l == n_layers - 1;
        let mut ta: Vec<f64> = tz
            .iter()
            .zip(&tape.pre[l])
            .map(|(&t, &z)| {
                t * if last {
                    spec.output_activation.d(z)
                } else {
                    spec.hidden_activation.d(z)
                }
            })
            .collect();
        if !last {
            if let Some(m) = tape.mask(l + 1) {
                for (v, &mv) in ta.iter_mut().zip(m) {
                    *v *= mv;
                }
            }
        }
        ta_prev = ta.clone();
        tz_all.push(tz);
        ta_all.push(ta);
    }

    // Reverse sweep. `r*` are adjoints of the primal chain, `s*` of the
    // tangent chain.
    let mut grads = MlpParams::zeros(spec);
    let mut sa: Vec<f64> = cotangent.to_vec();
    let mut ra: Vec<f64> = vec![0.0; spec.output_dim];
    for l in (0..n_layers).rev() {
        let last = l == n_layers - 1;
        let (mut sh, mut rh) = (sa, ra);
        if !last {
            if let Some(m) = tape.mask(l + 1) {
                for (v, &mv) in sh.iter_mut().zip(m) {
                    *v *= mv;
                }
                for (v, &mv) in rh.iter_mut().zip(m) {
                    *v *= mv;
                }
            }
        }
        let z = &tape.pre[l];
        let tz = &tz_all[l];
        let (d, dd): (Vec<f64>, Vec<f64>) = if last {
            (
                z.iter().map(|&v| spec.output_activation.d(v)).collect(),
                z.iter().map(|&v| spec.output_activation.dd(v)).collect(),
            )
        } else {
            (
                z.iter().map(|&v| spec.hidden_activation.d(v)).collect(),
                z.iter().map(|&v| spec.hidden_activation.dd(v)).collect(),
            )
        };
        let sz: Vec<f64> = sh.iter().zip(&d).map(|(&s, &dv)| s * dv).collect();
        let rz: Vec<f64> = rh
            .iter()
            .zip(&d)
            .zip(sh.iter().zip(tz).zip(&dd))
            .map(|((&r, &dv), ((&s, &t), &ddv))| r * dv + s * t * ddv)
            .collect();

        let a_prev: &[f64] = if l == 0 {
            &tape.post_input
        } else {
            &tape.post[l - 1]
        };
        let ta_prev: &[f64] = if l == 0 { &ta_input } else { &ta_all[l - 1] };
        outer_acc(&mut grads.weights[l], &rz, a_prev);
        outer_acc(&mut grads.weights[l], &sz, ta_prev);
        for (g, &r) in grads.biases[l].iter_mut().zip(&rz) {
            *g = r;
        }
        if l == 0 {
            break;
        }
        let mut ra_next = vec![0.0; a_prev.len()];
        let mut sa_next = vec![0.0; a_prev.len()];
        matvec_t(&params.weights[l], &rz, &mut ra_next);
        matvec_t(&params.weights[l], &sz, &mut sa_next);
        ra = ra_next;
        sa = sa_next;
    }
    Ok(grads)
}

/// Adam optimizer state; moments mirror the parameter shape.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: MlpParams,
    v: MlpParams,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: MlpParams::zeros(spec),
            v: MlpParams::zeros(spec),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.step);
        w.f64(self.lr);
        w.f64(self.beta1);
        w.f64(self.beta2);
        w.f64(self.epsilon);
        self.m.write(w);
        self.v.write(w);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let step = r.u64()?;
        let lr = r.f64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let epsilon = r.f64()?;
        let m = MlpParams::read(r)?;
        let v = MlpParams::read(r)?;
        Ok(Self {
            step,
            lr,
            beta1,
            beta2,
            epsilon,
            m,
            v,
        })
    }
}

/// One bias-corrected Adam update. Non-finite gradients reject the update
/// and leave both parameters and state untouched.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
    if !params.same_shape(grads) || !state.m.same_shape(params) {
        return Err(Error::DimMismatch {
            context: "adam_step",
            expected: params.param_count(),
            got: grads.param_count(),
        });
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.epsilon);
    for l in 0..params.weights.len() {
        for ((p, &g), (m, v)) in params.weights[l]
            .iter_mut()
            .zip(&grads.weights[l])
            .zip(state.m.weights[l].iter_mut().zip(&mut state.v.weights[l]))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
        for ((p, &g), (m, v)) in params.biases[l]
            .iter_mut()
            .zip(&grads.biases[l])
            .zip(state.m.biases[l].iter_mut().zip(&mut state.v.biases[l]))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
    }
    Ok(())
}

/// `target ← (1−tau)·target + tau·online`, elementwise.
pub fn polyak_update(target: &mut MlpParams, online: &MlpParams, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) || tau == 0.0 {
        return Err(Error::Config(format!("tau {tau} outside (0,1]")));
    }
    target.zip_mut(online, |t, o| *t = (1.0 - tau) * *t + tau * o)
}

/// Scalar Adam, used for the learned entropy temperature.
#[derive(Debug, Clone, Copy)]
pub struct ScalarAdam {
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn update(&mut self, param: &mut f64, grad: f64) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFinite("scalar gradient"));
        }
        self.step += 1;
        let t = self.step as f64;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad;
        let mhat = self.m / (1.0 - self.beta1.powf(t));
        let vhat = self.v / (1.0 - self.beta2.powf(t));
        *param -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
        Ok(())
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.step);
        w.f64(self.lr);
        w.f64(self.beta1);
        w.f64(self.beta2);
        w.f64(self.epsilon);
        w.f64(self.m);
        w.f64(self.v);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            step: r.u64()?,
            lr: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
            m: r.f64()?,
            v: r.f64()?,
        })
    }
}

// ---------------------------------------------------------------------------
// Tanh-squashed Gaussian policy head
// ---------------------------------------------------------------------------

/// One sampled action from a squashed-Gaussian head.
#[derive(Debug, Clone)]
pub struct GaussianPolicyOutput {
    pub mean: Vec<f64>,
    /// Clamped to [LOG_STD_MIN, LOG_STD_MAX].
    pub log_std: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    /// Components strictly inside (-1, 1).
    pub action: Vec<f64>,
    pub log_prob: f64,
}

const ACTION_BOUND: f64 = 1.0 - 1e-9;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - tanh²(x))` evaluated stably.
fn log_one_minus_tanh_sq(x: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x))
}

/// Log density of the squashed sample with the tanh change-of-variables
/// correction, as a function of the pre-squash value.
pub fn tanh_gaussian_log_prob(mean: &[f64], log_std: &[f64], pre_tanh: &[f64]) -> f64 {
    let mut lp = 0.0;
    for ((&m, &ls), &p) in mean.iter().zip(log_std).zip(pre_tanh) {
        let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let std = ls.exp();
        let eps = (p - m) / std;
        lp += -0.5 * eps * eps - ls - 0.5 * (2.0 * std::f64::consts::PI).ln();
        lp -= log_one_minus_tanh_sq(p);
    }
    lp
}

/// Sample an action from a raw head output laid out as `[mean ‖ log_std]`.
pub fn sample_tanh_gaussian(head: &[f64], rng: &mut impl Rng) -> GaussianPolicyOutput {
    let d = head.len() / 2;
    debug_assert_eq!(head.len(), 2 * d);
    let mean = head[..d].to_vec();
    let log_std: Vec<f64> = head[d..]
        .iter()
        .map(|&v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
        .collect();
    let mut pre_tanh = Vec::with_capacity(d);
    for i in 0..d {
        let eps: f64 = StandardNormal.sample(rng);
        pre_tanh.push(mean[i] + log_std[i].exp() * eps);
    }
    let action: Vec<f64> = pre_tanh
        .iter()
        .map(|&p| p.tanh().clamp(-ACTION_BOUND, ACTION_BOUND))
        .collect();
    let log_prob = tanh_gaussian_log_prob(&mean, &log_std, &pre_tanh);
    GaussianPolicyOutput {
        mean,
        log_std,
        pre_tanh,
        action,
        log_prob,
    }
}

/// Evaluation-time action: `tanh(mean)`.
pub fn deterministic_action(head: &[f64]) -> Vec<f64> {
    let d = head.len() / 2;
    head[..d]
        .iter()
        .map(|&m| m.tanh().clamp(-ACTION_BOUND, ACTION_BOUND))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(i: usize, h: Vec<usize>, o: usize) -> MlpSpec {
        MlpSpec::new(i, h, o)
    }

    /// Relative-error comparison with a floor for near-zero components.
    pub(crate) fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
    }

    #[test]
    fn init_smallest_net_and_determinism() {
        let s = spec(1, vec![], 1);
        let p = mlp_init(&s, 42).unwrap();
        assert_eq!(p.weights()[0].len(), 1);
        assert_eq!(p.biases()[0], vec![0.0]);

        let p2 = mlp_init(&s, 42).unwrap();
        assert_eq!(p, p2);
        let p3 = mlp_init(&s, 43).unwrap();
        assert_ne!(p, p3);
    }

    #[test]
    fn param_count_shape_arithmetic() {
        assert_eq!(spec(3, vec![4], 2).param_count(), 26);
    }

    #[test]
    fn forward_identity_single_weight() {
        let s = spec(1, vec![], 1);
        let mut p = MlpParams::zeros(&s);
        p.weights_mut()[0][0] = 1.0;
        let (y, _) = mlp_forward(&p, &[0.5]).unwrap();
        assert_eq!(y, vec![0.5]);
    }

    #[test]
    fn forward_relu_kills_negative_preactivations() {
        let s = spec(2, vec![3], 1);
        let mut p = MlpParams::zeros(&s);
        for w in p.weights_mut()[0].iter_mut() {
            *w = -1.0;
        }
        for w in p.weights_mut()[1].iter_mut() {
            *w = 1.0;
        }
        let (y, tape) = mlp_forward(&p, &[1.0, 2.0]).unwrap();
        assert!(tape.post[0].iter().all(|&h| h == 0.0));
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn forward_matches_hand_computed_chain() {
        // 3 -> 4 -> 2 relu net with fixed params; expectation computed by
        // hand below, independent of the forward implementation.
        let s = spec(3, vec![4], 2);
        let mut p = MlpParams::zeros(&s);
        let w1 = [
            [0.2, -0.1, 0.4],
            [-0.3, 0.5, 0.1],
            [0.0, 0.2, -0.2],
            [0.7, -0.6, 0.3],
        ];
        let b1 = [0.1, -0.2, 0.05, 0.0];
        for r in 0..4 {
            for c in 0..3 {
                p.weights_mut()[0][r * 3 + c] = w1[r][c];
            }
            p.biases_mut()[0][r] = b1[r];
        }
        let w2 = [[1.0, -1.0, 0.5, 0.25], [-0.5, 0.5, 2.0, -1.0]];
        for r in 0..2 {
            for c in 0..4 {
                p.weights_mut()[1][r * 4 + c] = w2[r][c];
            }
        }
        let x = [1.0, -2.0, 0.5];

        // Hand evaluation:
        // z1[0] = 0.2*1 + (-0.1)*(-2) + 0.4*0.5 + 0.1  = 0.2+0.2+0.2+0.1 = 0.70
        // z1[1] = -0.3*1 + 0.5*(-2) + 0.1*0.5 - 0.2    = -0.3-1.0+0.05-0.2 = -1.45 -> relu 0
        // z1[2] = 0.0 + 0.2*(-2) + (-0.2)*0.5 + 0.05   = -0.4-0.1+0.05 = -0.45 -> relu 0
        // z1[3] = 0.7*1 + (-0.6)*(-2) + 0.3*0.5 + 0.0  = 0.7+1.2+0.15 = 2.05
        // h = [0.7, 0, 0, 2.05]
        // y[0] = 1.0*0.7 + 0.25*2.05 = 0.7 + 0.5125 = 1.2125
        // y[1] = -0.5*0.7 + (-1.0)*2.05 = -0.35 - 2.05 = -2.40
        let (y, _) = mlp_forward(&p, &x).unwrap();
        assert!((y[0] - 1.2125).abs() < 1e-12);
        assert!((y[1] - (-2.40)).abs() < 1e-12);
    }

    #[test]
    fn backward_linear_case() {
        let s = spec(3, vec![], 1);
        let mut p = MlpParams::zeros(&s);
        p.weights_mut()[0].copy_from_slice(&[0.5, -1.5, 2.0]);
        let x = [1.0, 2.0, 3.0];
        let (_, tape) = mlp_forward(&p, &x).unwrap();
        let (g, gx) = mlp_backward(&p, &tape, &[1.0]).unwrap();
        assert_eq!(gx, vec![0.5, -1.5, 2.0]);
        assert_eq!(g.weights()[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(g.biases()[0], vec![1.0]);
    }

    #[test]
    fn backward_zero_cotangent() {
        let s = spec(4, vec![5], 2).with_activations(Activation::Tanh, OutputActivation::Identity);
        let p = mlp_init(&s, 7).unwrap();
        let (_, tape) = mlp_forward(&p, &[0.1, -0.2, 0.3, 0.4]).unwrap();
        let (g, gx) = mlp_backward(&p, &tape, &[0.0, 0.0]).unwrap();
        assert!(g.iter_flat().all(|v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    /// Central finite differences of <cot, f(x)> w.r.t. every parameter and
    /// input component, compared against mlp_backward.
    pub(crate) fn fd_check_backward(s: &MlpSpec, seed: u64, tol: f64) {
        let p = mlp_init(s, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let x: Vec<f64> = (0..s.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cot: Vec<f64> = (0..s.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (_, tape) = mlp_forward(&p, &x).unwrap();
        let (g, gx) = mlp_backward(&p, &tape, &cot).unwrap();

        let h = 1e-5;
        let eval = |p: &MlpParams, x: &[f64]| -> f64 {
            let (y, _) = mlp_forward(p, x).unwrap();
            y.iter().zip(&cot).map(|(&a, &b)| a * b).sum()
        };

        // parameter gradients
        for l in 0..p.n_layers() {
            for idx in 0..p.weights()[l].len() {
                let mut pp = p.clone();
                pp.weights_mut()[l][idx] += h;
                let mut pm = p.clone();
                pm.weights_mut()[l][idx] -= h;
                let fd = (eval(&pp, &x) - eval(&pm, &x)) / (2.0 * h);
                assert!(
                    rel_err(fd, g.weights()[l][idx]) < tol,
                    "w[{l}][{idx}]: fd {fd} vs {v}",
                    v = g.weights()[l][idx]
                );
            }
            for idx in 0..p.biases()[l].len() {
                let mut pp = p.clone();
                pp.biases_mut()[l][idx] += h;
                let mut pm = p.clone();
                pm.biases_mut()[l][idx] -= h;
                let fd = (eval(&pp, &x) - eval(&pm, &x)) / (2.0 * h);
                assert!(rel_err(fd, g.biases()[l][idx]) < tol);
            }
        }
        // input gradients
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (eval(&p, &xp) - eval(&p, &xm)) / (2.0 * h);
            assert!(rel_err(fd, gx[i]) < tol, "x[{i}]: fd {fd} vs {v}", v = gx[i]);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        fd_check_backward(&spec(5, vec![8, 8], 1), 1, 1e-4);
        fd_check_backward(
            &spec(4, vec![6], 3).with_activations(Activation::Tanh, OutputActivation::Tanh),
            2,
            1e-4,
        );
        fd_check_backward(
            &spec(3, vec![5, 4], 2).with_activations(Activation::LeakyRelu, OutputActivation::Identity),
            3,
            1e-4,
        );
    }

    #[test]
    fn double_backward_matches_finite_differences() {
        for (s, seed) in [
            (
                spec(4, vec![6], 1).with_activations(Activation::Tanh, OutputActivation::Identity),
                11u64,
            ),
            (
                spec(3, vec![5, 4], 1)
                    .with_activations(Activation::LeakyRelu, OutputActivation::Identity),
                12,
            ),
            (
                spec(2, vec![4], 2).with_activations(Activation::Tanh, OutputActivation::Tanh),
                13,
            ),
        ] {
            let p = mlp_init(&s, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..s.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cot: Vec<f64> = (0..s.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dir: Vec<f64> = (0..s.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();

            let (_, tape) = mlp_forward(&p, &x).unwrap();
            let g2 = mlp_double_backward(&p, &tape, &cot, &dir).unwrap();

            // F(θ) = <dir, input_grad(θ)> evaluated with a fresh backward pass
            let f_of = |p: &MlpParams| -> f64 {
                let (_, tape) = mlp_forward(p, &x).unwrap();
                let (_, gx) = mlp_backward(p, &tape, &cot).unwrap();
                gx.iter().zip(&dir).map(|(&a, &b)| a * b).sum()
            };
            let h = 1e-5;
            for l in 0..p.n_layers() {
                for idx in 0..p.weights()[l].len() {
                    let mut pp = p.clone();
                    pp.weights_mut()[l][idx] += h;
                    let mut pm = p.clone();
                    pm.weights_mut()[l][idx] -= h;
                    let fd = (f_of(&pp) - f_of(&pm)) / (2.0 * h);
                    assert!(
                        rel_err(fd, g2.weights()[l][idx]) < 1e-4,
                        "w[{l}][{idx}]: fd {fd} vs {v}",
                        v = g2.weights()[l][idx]
                    );
                }
                for idx in 0..p.biases()[l].len() {
                    let mut pp = p.clone();
                    pp.biases_mut()[l][idx] += h;
                    let mut pm = p.clone();
                    pm.biases_mut()[l][idx] -= h;
                    let fd = (f_of(&pp) - f_of(&pm)) / (2.0 * h);
                    assert!(rel_err(fd, g2.biases()[l][idx]) < 1e-4);
                }
            }
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let s = spec(2, vec![3], 1);
        let mut p = mlp_init(&s, 5).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&s, 3e-4);
        adam_step(&mut st, &mut p, &MlpParams::zeros(&s)).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let s = spec(1, vec![], 1);
        let mut p = MlpParams::zeros(&s);
        let mut g = MlpParams::zeros(&s);
        g.weights_mut()[0][0] = 1.0;
        let mut st = AdamState::new(&s, 3e-4);
        adam_step(&mut st, &mut p, &g).unwrap();
        // bias-corrected first step is -lr * g/|g| up to epsilon
        assert!((p.weights()[0][0] + 3e-4).abs() < 1e-8);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(w) = w^2, grad 2w, from w=1: strictly decreasing toward 0
        let s = spec(1, vec![], 1);
        let mut p = MlpParams::zeros(&s);
        p.weights_mut()[0][0] = 1.0;
        let mut st = AdamState::new(&s, 0.05);
        let mut last = 1.0;
        for _ in 0..10 {
            let mut g = MlpParams::zeros(&s);
            g.weights_mut()[0][0] = 2.0 * p.weights()[0][0];
            adam_step(&mut st, &mut p, &g).unwrap();
            let w = p.weights()[0][0];
            assert!(w < last && w >= 0.0 - 0.05, "w={w} last={last}");
            last = w;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let s = spec(1, vec![], 1);
        let mut p = MlpParams::zeros(&s);
        p.weights_mut()[0][0] = 0.7;
        let mut g = MlpParams::zeros(&s);
        g.weights_mut()[0][0] = f64::NAN;
        let mut st = AdamState::new(&s, 3e-4);
        assert!(matches!(
            adam_step(&mut st, &mut p, &g),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(p.weights()[0][0], 0.7);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn polyak_endpoints_and_geometric_convergence() {
        let s = spec(1, vec![], 1);
        let mut target = MlpParams::zeros(&s);
        let mut online = MlpParams::zeros(&s);
        online.weights_mut()[0][0] = 1.0;

        let mut t1 = target.clone();
        polyak_update(&mut t1, &online, 1.0).unwrap();
        assert_eq!(t1.weights()[0][0], 1.0);

        polyak_update(&mut target, &online, 0.005).unwrap();
        assert!((target.weights()[0][0] - 0.005).abs() < 1e-15);

        // closed form: after n updates from 0 toward 1, value = 1-(1-tau)^n
        let mut t = MlpParams::zeros(&s);
        let tau = 0.1;
        for n in 1..=50 {
            polyak_update(&mut t, &online, tau).unwrap();
            let expect = 1.0 - (1.0 - tau).powi(n);
            assert!((t.weights()[0][0] - expect).abs() < 1e-12);
        }
        online.weights_mut()[0][0] = 1.0;
        assert!((t.weights()[0][0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn dropout_masks_scale_and_determinism() {
        let s = spec(4, vec![8], 1);
        let rates = [0.5, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m1 = draw_dropout_masks(&s, &rates, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m2 = draw_dropout_masks(&s, &rates, &mut rng).unwrap();
        assert_eq!(m1, m2);
        for v in &m1[0] {
            assert!(*v == 0.0 || (*v - 2.0).abs() < 1e-12);
        }
        for v in &m1[1] {
            assert!(*v == 0.0 || (*v - 1.0 / 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_backward_matches_finite_differences() {
        let s = spec(5, vec![6], 1).with_activations(Activation::LeakyRelu, OutputActivation::Identity);
        let p = mlp_init(&s, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let masks = draw_dropout_masks(&s, &[0.5, 0.1], &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (_, tape) = mlp_forward_masked(&p, &x, Some(&masks)).unwrap();
        let (g, gx) = mlp_backward(&p, &tape, &[1.0]).unwrap();

        let eval = |p: &MlpParams, x: &[f64]| -> f64 {
            mlp_forward_masked(p, x, Some(&masks)).unwrap().0[0]
        };
        let h = 1e-5;
        for l in 0..p.n_layers() {
            for idx in 0..p.weights()[l].len() {
                let mut pp = p.clone();
                pp.weights_mut()[l][idx] += h;
                let mut pm = p.clone();
                pm.weights_mut()[l][idx] -= h;
                let fd = (eval(&pp, &x) - eval(&pm, &x)) / (2.0 * h);
                assert!(rel_err(fd, g.weights()[l][idx]) < 1e-4);
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (eval(&p, &xp) - eval(&p, &xm)) / (2.0 * h);
            assert!(rel_err(fd, gx[i]) < 1e-4);
        }
    }

    #[test]
    fn checkpoint_round_trip_bit_exact() {
        let s = spec(7, vec![16, 8], 3).with_activations(Activation::Tanh, OutputActivation::Tanh);
        let p = mlp_init(&s, 123).unwrap();
        let bytes = p.to_bytes();
        let q = MlpParams::from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(bytes, q.to_bytes());
    }

    #[test]
    fn checkpoint_error_paths() {
        let s = spec(2, vec![2], 1);
        let p = mlp_init(&s, 0).unwrap();
        let mut bytes = p.to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            MlpParams::from_bytes(&bad),
            Err(Error::BadMagic { .. })
        ));

        let mut badver = bytes.clone();
        badver[4] = 9;
        assert!(matches!(
            MlpParams::from_bytes(&badver),
            Err(Error::VersionMismatch { .. })
        ));

        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            MlpParams::from_bytes(&bytes),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn stale_tape_detected() {
        let s1 = spec(3, vec![4], 1);
        let s2 = spec(3, vec![5], 1);
        let p1 = mlp_init(&s1, 1).unwrap();
        let p2 = mlp_init(&s2, 1).unwrap();
        let (_, tape) = mlp_forward(&p1, &[0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            mlp_backward(&p2, &tape, &[1.0]),
            Err(Error::StaleTape)
        ));
    }

    #[test]
    fn tanh_gaussian_density_integrates_to_one() {
        // trapezoid over the action interval; change of variables to pre-tanh
        let mean = [0.3];
        let log_std = [-0.5];
        let n = 20000;
        let mut integral = 0.0;
        let lo = -1.0 + 1e-6;
        let hi = 1.0 - 1e-6;
        let step = (hi - lo) / n as f64;
        let dens = |a: f64| {
            let pre = a.atanh();
            tanh_gaussian_log_prob(&mean, &log_std, &[pre]).exp()
        };
        for i in 0..=n {
            let a = lo + i as f64 * step;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * dens(a) * step;
        }
        assert!((integral - 1.0).abs() < 1e-2, "integral {integral}");
    }

    #[test]
    fn sampled_actions_strictly_inside_unit_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let head = [5.0, -5.0, 0.0, 2.0, 2.0, 2.0]; // extreme means, wide stds
        for _ in 0..2000 {
            let out = sample_tanh_gaussian(&head, &mut rng);
            for &a in &out.action {
                assert!(a > -1.0 && a < 1.0);
            }
            assert!(out.log_prob.is_finite());
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let head = [0.1, -0.2, 0.0, -1.0];
        let a = sample_tanh_gaussian(&head, &mut ChaCha8Rng::seed_from_u64(5)).action;
        let b = sample_tanh_gaussian(&head, &mut ChaCha8Rng::seed_from_u64(5)).action;
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_action_of_zero_head_is_zero() {
        let head = [0.0, 0.0, 0.0, 0.0];
        assert_eq!(deterministic_action(&head), vec![0.0, 0.0]);
    }
}
