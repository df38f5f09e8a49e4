//! Deterministic toy stand-in for the manipulation platform.
//!
//! Two phases share one [`HandState`]:
//!
//! - forward (in-hand): 8 finger joints rotate a held object; the object
//!   angle changes by the gain-scaled alternating-sign sum of joint deltas,
//!   and too low a grip drops the object;
//! - reset (tabletop): a 2-D wrist plus the 8 fingers must reach the object
//!   and close around it for two consecutive steps to pick it up, after
//!   which the object sits in the hand at a uniformly random angle.
//!
//! Objects differ in symmetry order (success is measured modulo 2π/k) and
//! in how hard they are to hold.

use rand::Rng;

use crate::error::{Error, Result};
use crate::replay::Transition;

pub const FORWARD_OBS_DIM: usize = 11;
pub const FORWARD_ACT_DIM: usize = 8;
pub const RESET_OBS_DIM: usize = 13;
pub const RESET_ACT_DIM: usize = 10;

/// Angular success tolerance: 5 degrees.
pub const SUCCESS_TOL: f64 = std::f64::consts::PI / 36.0;

const JOINT_STEP: f64 = 0.2;
const WRIST_STEP: f64 = 0.1;
const ANGLE_NOISE: f64 = 0.01;
const PICKUP_DIST: f64 = 0.1;
const PICKUP_GRIP: f64 = 0.5;

/// One manipulable object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    /// Number of indistinguishable orientations (k-fold symmetry).
    pub symmetry_order: usize,
    pub rotation_gain: f64,
    /// Grip level below which the object is dropped.
    pub drop_threshold: f64,
}

impl ObjectSpec {
    pub fn new(name: impl Into<String>, k: usize, gain: f64, drop: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("symmetry order must be >= 1".into()));
        }
        if gain <= 0.0 {
            return Err(Error::Config("rotation gain must be > 0".into()));
        }
        if !(0.0..1.0).contains(&drop) {
            return Err(Error::Config("drop threshold must be in (0,1)".into()));
        }
        Ok(Self {
            name: name.into(),
            symmetry_order: k,
            rotation_gain: gain,
            drop_threshold: drop,
        })
    }

    /// Three-pronged object: 3-fold symmetric, easiest to hold.
    pub fn prong() -> Self {
        Self::new("prong", 3, 0.5, 0.1).unwrap()
    }

    /// T-shaped pipe: no symmetry.
    pub fn tpipe() -> Self {
        Self::new("tpipe", 1, 0.5, 0.15).unwrap()
    }

    /// Toy football: 2-fold symmetric, hardest to hold.
    pub fn football() -> Self {
        Self::new("football", 2, 0.5, 0.25).unwrap()
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "prong" => Ok(Self::prong()),
            "tpipe" => Ok(Self::tpipe()),
            "football" => Ok(Self::football()),
            other => Err(Error::Config(format!("unknown object '{other}'"))),
        }
    }
}

/// Full simulator state across both phases.
#[derive(Debug, Clone, PartialEq)]
pub struct HandState {
    /// Finger joints, clipped to [-1, 1] every step.
    pub joints: [f64; 8],
    /// Object angle, wrapped to [-pi, pi).
    pub angle: f64,
    pub holding: bool,
    /// Object position on the table (reset phase).
    pub table_pos: [f64; 2],
    pub wrist: [f64; 2],
    /// Consecutive steps the pickup condition has held.
    grasp_streak: u8,
}

impl HandState {
    /// Fresh tabletop state: object and wrist at uniform positions.
    pub fn new_reset(rng: &mut impl Rng) -> Self {
        Self {
            joints: [0.0; 8],
            angle: 0.0,
            holding: false,
            table_pos: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            wrist: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            grasp_streak: 0,
        }
    }

    /// Object already in hand at the given angle and joint configuration.
    pub fn held(angle: f64, joints: [f64; 8]) -> Self {
        Self {
            joints,
            angle: wrap_angle(angle),
            holding: true,
            table_pos: [0.0, 0.0],
            wrist: [0.0, 0.0],
            grasp_streak: 0,
        }
    }

    pub fn grip(&self) -> f64 {
        self.joints.iter().map(|&q| q.max(0.0)).sum::<f64>() / 8.0
    }

    /// Drop the object at a fresh uniform table position.
    pub fn release(&mut self, rng: &mut impl Rng) {
        self.holding = false;
        self.grasp_streak = 0;
        self.table_pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    }
}

/// Wrap to [-pi, pi). Values already in range pass through unchanged.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-std::f64::consts::PI..std::f64::consts::PI).contains(&theta) {
        return theta;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// Forward-phase observation: `[q (8), cos θ, sin θ, 1]`.
pub fn forward_observation(state: &HandState) -> Vec<f32> {
    let mut obs = Vec::with_capacity(FORWARD_OBS_DIM);
    obs.extend(state.joints.iter().map(|&q| q as f32));
    obs.push(state.angle.cos() as f32);
    obs.push(state.angle.sin() as f32);
    obs.push(1.0);
    obs
}

/// Reset-phase observation: `[w (2), p (2), q (8), 0]`.
pub fn reset_observation(state: &HandState) -> Vec<f32> {
    let mut obs = Vec::with_capacity(RESET_OBS_DIM);
    obs.extend(state.wrist.iter().map(|&w| w as f32));
    obs.extend(state.table_pos.iter().map(|&p| p as f32));
    obs.extend(state.joints.iter().map(|&q| q as f32));
    obs.push(0.0);
    obs
}

/// One in-hand step. Joints move by `0.2·a`; the object angle changes by the
/// gain-scaled alternating-sign sum of joint deltas plus uniform noise; a
/// grip below the object's threshold drops it and ends the episode.
pub fn step_forward(
    state: &mut HandState,
    action: &[f64],
    spec: &ObjectSpec,
    noise: bool,
    rng: &mut impl Rng,
) -> Result<Vec<f32>> {
    if !state.holding {
        return Err(Error::Phase("forward step while not holding"));
    }
    if action.len() != FORWARD_ACT_DIM {
        return Err(Error::DimMismatch {
            context: "forward action",
            expected: FORWARD_ACT_DIM,
            got: action.len(),
        });
    }
    let old = state.joints;
    for (q, &a) in state.joints.iter_mut().zip(action) {
        *q = (*q + JOINT_STEP * a).clamp(-1.0, 1.0);
    }
    if state.grip() < spec.drop_threshold {
        state.holding = false;
        state.grasp_streak = 0;
        // the object lands somewhere new on the table
        state.table_pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    } else {
        let mut delta = 0.0;
        for (i, (&q_new, &q_old)) in state.joints.iter().zip(&old).enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            delta += sign * (q_new - q_old);
        }
        let eps = if noise {
            rng.random_range(-ANGLE_NOISE..ANGLE_NOISE)
        } else {
            0.0
        };
        state.angle = wrap_angle(state.angle + spec.rotation_gain * delta + eps);
    }
    Ok(forward_observation(state))
}

/// Variant used by goal collection: identical joint/angle dynamics but the
/// object is held in place, so no drop can occur.
fn perturb_held(state: &mut HandState, action: &[f64], spec: &ObjectSpec, rng: &mut impl Rng) {
    let old = state.joints;
    for (q, &a) in state.joints.iter_mut().zip(action) {
        *q = (*q + JOINT_STEP * a).clamp(-1.0, 1.0);
    }
    let mut delta = 0.0;
    for (i, (&q_new, &q_old)) in state.joints.iter().zip(&old).enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        delta += sign * (q_new - q_old);
    }
    let eps = rng.random_range(-ANGLE_NOISE..ANGLE_NOISE);
    state.angle = wrap_angle(state.angle + spec.rotation_gain * delta + eps);
}

/// One tabletop step. The wrist moves by `0.1·a[0..2]`, fingers by
/// `0.2·a[2..10]`; holding the wrist near the object with high grip for two
/// consecutive steps picks it up in a uniformly random pose.
pub fn step_reset(state: &mut HandState, action: &[f64], rng: &mut impl Rng) -> Result<Vec<f32>> {
    if state.holding {
        return Err(Error::Phase("reset step while holding"));
    }
    if action.len() != RESET_ACT_DIM {
        return Err(Error::DimMismatch {
            context: "reset action",
            expected: RESET_ACT_DIM,
            got: action.len(),
        });
    }
    for (w, &a) in state.wrist.iter_mut().zip(&action[..2]) {
        *w = (*w + WRIST_STEP * a).clamp(-1.0, 1.0);
    }
    for (q, &a) in state.joints.iter_mut().zip(&action[2..]) {
        *q = (*q + JOINT_STEP * a).clamp(-1.0, 1.0);
    }
    let dist = ((state.wrist[0] - state.table_pos[0]).powi(2)
        + (state.wrist[1] - state.table_pos[1]).powi(2))
    .sqrt();
    if dist < PICKUP_DIST && state.grip() > PICKUP_GRIP {
        state.grasp_streak += 1;
    } else {
        state.grasp_streak = 0;
    }
    if state.grasp_streak >= 2 {
        state.holding = true;
        state.grasp_streak = 0;
        // pickup pose is arbitrary
        state.angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    }
    Ok(reset_observation(state))
}

/// Proportional pickup controller standing in for human demonstrations:
/// drive the wrist toward the object (gain 5, clipped), keep the fingers
/// open until within reach, then close fully.
pub fn scripted_pickup_expert(state: &HandState) -> Vec<f64> {
    let mut action = Vec::with_capacity(RESET_ACT_DIM);
    let dist = ((state.wrist[0] - state.table_pos[0]).powi(2)
        + (state.wrist[1] - state.table_pos[1]).powi(2))
    .sqrt();
    for i in 0..2 {
        let err = state.table_pos[i] - state.wrist[i];
        action.push((5.0 * err).clamp(-1.0, 1.0));
    }
    let finger = if dist >= PICKUP_DIST { -1.0 } else { 1.0 };
    action.extend(std::iter::repeat(finger).take(8));
    action
}

/// Ground-truth success: some symmetry branch of the object angle within
/// 5 degrees of the goal, object still held.
pub fn evaluate_success(state: &HandState, goal: f64, spec: &ObjectSpec) -> bool {
    evaluate_success_with_tol(state, goal, spec, SUCCESS_TOL)
}

pub fn evaluate_success_with_tol(
    state: &HandState,
    goal: f64,
    spec: &ObjectSpec,
    tol: f64,
) -> bool {
    if !state.holding {
        return false;
    }
    angular_error(state.angle, goal, spec) <= tol
}

/// Smallest angular distance to the goal over all symmetry branches.
pub fn angular_error(angle: f64, goal: f64, spec: &ObjectSpec) -> f64 {
    let branch = 2.0 * std::f64::consts::PI / spec.symmetry_order as f64;
    let d = (angle - goal).rem_euclid(branch);
    d.min(branch - d)
}

/// Generate goal observations: place the object at a symmetry-equivalent
/// branch of the goal pose with uniform joints, perturb it with three small
/// random actions, and record the resulting observation; 25 per iteration.
pub fn collect_goal_examples(
    spec: &ObjectSpec,
    goal: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f32>>> {
    if count == 0 || count % 25 != 0 {
        return Err(Error::Config(format!(
            "goal count {count} must be a positive multiple of 25"
        )));
    }
    let branch = 2.0 * std::f64::consts::PI / spec.symmetry_order as f64;
    let mut out = Vec::with_capacity(count);
    for _iter in 0..count / 25 {
        for _ in 0..25 {
            let j = rng.random_range(0..spec.symmetry_order);
            let mut joints = [0.0; 8];
            for q in &mut joints {
                *q = rng.random_range(-1.0..1.0);
            }
            let mut state = HandState::held(goal + j as f64 * branch, joints);
            for _ in 0..3 {
                let action: Vec<f64> = (0..8).map(|_| 0.2 * rng.random_range(-1.0..1.0)).collect();
                perturb_held(&mut state, &action, spec, rng);
            }
            out.push(forward_observation(&state));
        }
    }
    Ok(out)
}

/// Why a forward episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    Drop,
}

/// One forward episode's transitions plus its ground-truth outcome.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub transitions: Vec<Transition>,
    pub terminated_by: Termination,
    pub success: bool,
}

/// Roll one forward episode from the current (holding) state. Transitions
/// carry an empty reward slot; the value bootstrap continues through both
/// drops and the horizon, since training is one continuing process.
pub fn run_forward_episode(
    state: &mut HandState,
    mut policy: impl FnMut(&[f32]) -> Vec<f64>,
    spec: &ObjectSpec,
    horizon: usize,
    noise: bool,
    goal: f64,
    task_id: &str,
    rng: &mut impl Rng,
) -> Result<EpisodeResult> {
    if !state.holding {
        return Err(Error::Phase("forward episode requires a held object"));
    }
    let mut transitions = Vec::with_capacity(horizon);
    let mut obs = forward_observation(state);
    let mut terminated_by = Termination::Horizon;
    for _ in 0..horizon {
        let action = policy(&obs);
        let next_obs = step_forward(state, &action, spec, noise, rng)?;
        transitions.push(Transition {
            obs: obs.clone(),
            action: action.iter().map(|&a| a as f32).collect(),
            reward: 0.0,
            next_obs: next_obs.clone(),
            not_done: 1.0,
            task_id: task_id.to_string(),
            reward_frozen: false,
        });
        obs = next_obs;
        if !state.holding {
            terminated_by = Termination::Drop;
            break;
        }
    }
    let success = evaluate_success(state, goal, spec);
    Ok(EpisodeResult {
        transitions,
        terminated_by,
        success,
    })
}
