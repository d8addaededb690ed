//! Proximal policy optimization for the actor-critic explorer.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{states_matrix, ActorCritic, NetShape};
use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Direction, FeatureVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoParams {
    pub adam_step_size: f64,
    pub discount_gamma: f64,
    pub gae_lambda: f64,
    pub num_epochs: usize,
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub episodes_per_iteration: usize,
    pub max_episode_steps: usize,
    pub minibatch_size: usize,
    pub hidden_dim: usize,
    pub head_hidden_dim: usize,
}

impl Default for PpoParams {
    fn default() -> Self {
        Self {
            adam_step_size: 1e-3,
            discount_gamma: 0.9,
            gae_lambda: 0.99,
            num_epochs: 3,
            clip_epsilon: 0.3,
            value_coef: 1.0,
            entropy_coef: 0.1,
            episodes_per_iteration: 128,
            max_episode_steps: 500,
            minibatch_size: 256,
            hidden_dim: 128,
            head_hidden_dim: 64,
        }
    }
}

impl PpoParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.adam_step_size > 0.0)
            || !unit(self.discount_gamma)
            || !unit(self.gae_lambda)
            || !unit(self.clip_epsilon)
            || self.value_coef < 0.0
            || self.entropy_coef < 0.0
        {
            return Err(Error::InvalidParams("ppo: coefficient out of range".into()));
        }
        if self.num_epochs == 0
            || self.episodes_per_iteration == 0
            || self.max_episode_steps == 0
            || self.minibatch_size == 0
            || self.hidden_dim == 0
            || self.head_hidden_dim == 0
        {
            return Err(Error::InvalidParams("ppo: counts must be positive".into()));
        }
        Ok(())
    }

    pub fn net_shape(&self, num_knobs: usize) -> NetShape {
        NetShape {
            num_knobs,
            hidden_dim: self.hidden_dim,
            head_hidden_dim: self.head_hidden_dim,
        }
    }
}

/// Generalized advantage estimation.
///
/// `delta_t = r_t + gamma * v_{t+1} - v_t` with `v_T = terminal_value`,
/// `A_t = delta_t + gamma * lambda * A_{t+1}` and `return_t = A_t + v_t`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminal_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::InvalidParams(format!(
            "gae: {} rewards but {} values",
            rewards.len(),
            values.len()
        )));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = terminal_value;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Step records of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<FeatureVector>,
    pub actions: Vec<Vec<Direction>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Empty until [`Trajectory::compute_advantages`].
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// True if the episode ended on its own rather than hitting the step cap.
    pub terminated: bool,
    /// Value estimate of the state after the last step (bootstrap for truncation).
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let terminal = if self.terminated {
            0.0
        } else {
            self.bootstrap_value
        };
        let (adv, ret) = compute_gae(&self.rewards, &self.values, terminal, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Flattened training data for one gradient step.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub states: Array2<f64>,
    /// Action slot (0 = decrement, 1 = stay, 2 = increment) per sample and knob.
    pub actions: Vec<Vec<usize>>,
    pub old_log_probs: Array1<f64>,
    pub advantages: Array1<f64>,
    pub returns: Array1<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
}

pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl From<&PpoParams> for LossCoefficients {
    fn from(p: &PpoParams) -> Self {
        Self {
            clip_epsilon: p.clip_epsilon,
            value_coef: p.value_coef,
            entropy_coef: p.entropy_coef,
        }
    }
}

/// Minimized objective:
/// `-mean(min(rho A, clip(rho) A)) + c_v mean((V - R)^2) - c_e mean(H)`.
pub fn ppo_loss(net: &ActorCritic, batch: &Minibatch, coef: &LossCoefficients) -> Result<LossParts> {
    loss_impl(net, batch, coef, false).map(|(parts, _)| parts)
}

/// Loss together with its gradient with respect to every network parameter.
pub fn ppo_loss_and_grad(
    net: &ActorCritic,
    batch: &Minibatch,
    coef: &LossCoefficients,
) -> Result<(LossParts, ActorCritic)> {
    loss_impl(net, batch, coef, true).map(|(p, g)| (p, g.expect("gradient requested")))
}

fn loss_impl(
    net: &ActorCritic,
    batch: &Minibatch,
    coef: &LossCoefficients,
    want_grad: bool,
) -> Result<(LossParts, Option<ActorCritic>)> {
    let fwd = net.forward(batch.states.view())?;
    let b = fwd.batch_len();
    if b == 0 {
        return Err(Error::Empty("minibatch"));
    }
    let n = net.shape().num_knobs;
    let inv_b = 1.0 / b as f64;
    let eps = coef.clip_epsilon;
    let mut parts = LossParts::default();
    let mut d_logits = Array2::zeros((b, 3 * n));
    let mut d_values = Array1::zeros(b);
    let mut clipped = 0usize;

    for i in 0..b {
        let lp = fwd.log_probs.row(i);
        let logp: f64 = batch.actions[i]
            .iter()
            .enumerate()
            .map(|(k, &a)| lp[3 * k + a])
            .sum();
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let surrogate = unclipped.min(clipped_term);
        // The clipped branch is flat in rho.
        let d_sur_d_ratio = if unclipped <= clipped_term { adv } else { 0.0 };
        if unclipped > clipped_term {
            clipped += 1;
        }
        let v = fwd.values[i];
        let err = v - batch.returns[i];
        parts.policy_loss -= surrogate * inv_b;
        parts.value_loss += err * err * inv_b;

        let d_logp = -inv_b * d_sur_d_ratio * ratio;
        for k in 0..n {
            let lpk = [lp[3 * k], lp[3 * k + 1], lp[3 * k + 2]];
            let pk = lpk.map(f64::exp);
            let h: f64 = -(0..3).map(|j| pk[j] * lpk[j]).sum::<f64>();
            parts.entropy += h * inv_b;
            if want_grad {
                for j in 0..3 {
                    let onehot = if batch.actions[i][k] == j { 1.0 } else { 0.0 };
                    let d_entropy = -pk[j] * (lpk[j] + h);
                    d_logits[[i, 3 * k + j]] =
                        d_logp * (onehot - pk[j]) - coef.entropy_coef * inv_b * d_entropy;
                }
            }
        }
        d_values[i] = 2.0 * coef.value_coef * err * inv_b;
    }
    parts.total = parts.policy_loss + coef.value_coef * parts.value_loss
        - coef.entropy_coef * parts.entropy;
    parts.clip_fraction = clipped as f64 / b as f64;
    let grad = want_grad.then(|| net.backward(&fwd, &d_logits, &d_values));
    Ok((parts, grad))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: ActorCritic,
    v: ActorCritic,
}

impl Adam {
    pub fn new(net: &ActorCritic, step_size: f64) -> Self {
        Self {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: net.zeros_like(),
            v: net.zeros_like(),
        }
    }

    pub fn step(&mut self, net: &mut ActorCritic, grad: &ActorCritic) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.step_size;
        let eps = self.epsilon;
        let grads = grad.tensors();
        let params = net.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Network plus optimizer state; persists across iterations of one run.
#[derive(Debug, Clone)]
pub struct Agent {
    pub net: ActorCritic,
    pub optimizer: Adam,
}

impl Agent {
    pub fn new(num_knobs: usize, params: &PpoParams, seed: u64) -> Result<Self> {
        let net = ActorCritic::new(params.net_shape(num_knobs), seed)?;
        let optimizer = Adam::new(&net, params.adam_step_size);
        Ok(Self { net, optimizer })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub samples: usize,
    pub gradient_steps: usize,
}

/// Flattens trajectories into one batch with per-batch normalized advantages.
pub fn flatten_trajectories(trajectories: &[Trajectory], num_knobs: usize) -> Result<Minibatch> {
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut old = Vec::new();
    let mut adv = Vec::new();
    let mut ret = Vec::new();
    for t in trajectories {
        if t.advantages.len() != t.len() || t.returns.len() != t.len() {
            return Err(Error::InvalidParams(
                "trajectory advantages not computed".into(),
            ));
        }
        states.extend(t.states.iter().cloned());
        actions.extend(
            t.actions
                .iter()
                .map(|a| a.iter().map(|d| d.slot()).collect::<Vec<_>>()),
        );
        old.extend_from_slice(&t.log_probs);
        adv.extend_from_slice(&t.advantages);
        ret.extend_from_slice(&t.returns);
    }
    if states.is_empty() {
        return Err(Error::Empty("trajectory batch"));
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in &mut adv {
        *a = if std > 1e-12 { (*a - mean) / std } else { 0.0 };
    }
    Ok(Minibatch {
        states: states_matrix(&states, num_knobs)?,
        actions,
        old_log_probs: Array1::from(old),
        advantages: Array1::from(adv),
        returns: Array1::from(ret),
    })
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Minibatch {
        Minibatch {
            states: self.states.select(ndarray::Axis(0), idx),
            actions: idx.iter().map(|&i| self.actions[i].clone()).collect(),
            old_log_probs: idx.iter().map(|&i| self.old_log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

/// Runs `num_epochs` passes of shuffled minibatch Adam steps on the clipped objective.
pub fn ppo_update(
    agent: &mut Agent,
    trajectories: &[Trajectory],
    params: &PpoParams,
    rng_seed: u64,
) -> Result<PpoStats> {
    let data = flatten_trajectories(trajectories, agent.net.shape().num_knobs)?;
    let coef = LossCoefficients::from(params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut r = rng::rng_from(rng_seed);
    let mut stats = PpoStats {
        samples: data.len(),
        ..Default::default()
    };
    for _ in 0..params.num_epochs {
        order.shuffle(&mut r);
        for chunk in order.chunks(params.minibatch_size) {
            let mb = data.select(chunk);
            let (parts, grad) = ppo_loss_and_grad(&agent.net, &mb, &coef)?;
            agent.optimizer.step(&mut agent.net, &grad);
            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.clip_fraction += parts.clip_fraction;
            stats.gradient_steps += 1;
        }
    }
    let k = stats.gradient_steps as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    Ok(stats)
}
