//! Actor-critic bitrate allocation: the policy and value networks, their
//! analytic gradients, the one-step advantage estimate, and asynchronous
//! multi-worker training against a shared parameter store.
//!
//! Workers run episodes on private environments, compute gradients on a
//! private parameter snapshot, and submit them to the store, which applies
//! each submission atomically. The actor ascends
//! `Σ_t ∇ log π(s_t, a_t) · A_t + β ∇H(π(·|s_t))`; the critic descends the
//! squared one-step TD error with the bootstrap target held fixed. The
//! entropy weight β anneals linearly over the configured episodes, and
//! gradients are clipped to a configurable norm before submission.

mod net;

pub use net::{entropy, NetworkConfig, Observation};

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::ParamContainer;
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "a3c-policy";

/// Actor parameters θ_a and critic parameters θ_c over a shared topology.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub net: NetworkConfig,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl PolicyParameters {
    pub fn zeros(net: NetworkConfig) -> Result<Self> {
        net.validate()?;
        let actor = vec![0.0; net.param_len(net.actions)];
        let critic = vec![0.0; net.param_len(1)];
        Ok(PolicyParameters { net, actor, critic })
    }

    /// Seeded uniform initialization in [−0.05, 0.05].
    pub fn init(net: NetworkConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(net)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in p.actor.iter_mut().chain(p.critic.iter_mut()) {
            *v = rng.gen_range(-0.05..0.05);
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.actor
            .iter()
            .chain(self.critic.iter())
            .all(|v| v.is_finite())
    }

    pub fn to_container(&self) -> ParamContainer {
        let mut c = ParamContainer::new(CHECKPOINT_KIND);
        net::export_params(&mut c, "actor", &self.net, self.net.actions, &self.actor);
        net::export_params(&mut c, "critic", &self.net, 1, &self.critic);
        c
    }

    pub fn from_container(c: &ParamContainer, net: NetworkConfig) -> Result<Self> {
        c.expect_kind(CHECKPOINT_KIND)?;
        net.validate()?;
        let actor = net::import_params(c, "actor", &net, net.actions)?;
        let critic = net::import_params(c, "critic", &net, 1)?;
        Ok(PolicyParameters { net, actor, critic })
    }
}

/// One environment step: state, action, reward, next state, terminal flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

/// Action distribution π_θ(s, ·): strictly positive, sums to 1.
pub fn policy_forward(params: &PolicyParameters, obs: &Observation) -> Result<Vec<f64>> {
    let trace = net::forward(&params.net, params.net.actions, &params.actor, obs)?;
    Ok(net::softmax(&trace.head))
}

/// Critic value estimate V(s).
pub fn value_forward(params: &PolicyParameters, obs: &Observation) -> Result<f64> {
    let trace = net::forward(&params.net, 1, &params.critic, obs)?;
    Ok(trace.head[0])
}

/// One-step TD advantage estimate: r + γ·V(s′) − V(s), with V(s′) = 0 on
/// terminal transitions.
pub fn advantage(params: &PolicyParameters, tr: &Transition, discount: f64) -> Result<f64> {
    let v_next = if tr.done {
        0.0
    } else {
        value_forward(params, &tr.next_state)?
    };
    Ok(tr.reward + discount * v_next - value_forward(params, &tr.state)?)
}

/// Ascent gradient of the actor objective
/// `Σ_t log π(s_t, a_t)·A_t + β·H(π(·|s_t))` over a batch with fixed
/// advantages.
pub fn actor_gradient(
    params: &PolicyParameters,
    batch: &[(Transition, f64)],
    entropy_weight: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty gradient batch".into()));
    }
    let actions = params.net.actions;
    let mut grad = vec![0.0; params.actor.len()];
    for (tr, adv) in batch {
        if tr.action >= actions {
            return Err(Error::InvalidInput(format!(
                "action {} out of range {actions}",
                tr.action
            )));
        }
        let trace = net::forward(&params.net, actions, &params.actor, &tr.state)?;
        let probs = net::softmax(&trace.head);
        let h = net::entropy(&probs);
        let mut d_logits = vec![0.0; actions];
        for (k, d) in d_logits.iter_mut().enumerate() {
            let indicator = if k == tr.action { 1.0 } else { 0.0 };
            // ∂/∂z_k [log π(a)] = 1{k=a} − π_k
            // ∂/∂z_k [H(π)] = −π_k (ln π_k + H)
            *d = adv * (indicator - probs[k])
                - entropy_weight * probs[k] * (probs[k].ln() + h);
        }
        net::backward(
            &params.net,
            actions,
            &params.actor,
            &tr.state,
            &trace,
            &d_logits,
            &mut grad,
        );
    }
    Ok(grad)
}

/// Descent gradient of the critic loss `Σ_t (r + γV(s′) − V(s))²`, with the
/// bootstrap target treated as a constant (semi-gradient).
pub fn critic_gradient(
    params: &PolicyParameters,
    batch: &[Transition],
    discount: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty gradient batch".into()));
    }
    let mut grad = vec![0.0; params.critic.len()];
    for tr in batch {
        let v_next = if tr.done {
            0.0
        } else {
            value_forward(params, &tr.next_state)?
        };
        let target = tr.reward + discount * v_next;
        let trace = net::forward(&params.net, 1, &params.critic, &tr.state)?;
        let v = trace.head[0];
        // d/dV (target − V)² = 2(V − target)
        let d_head = [2.0 * (v - target)];
        net::backward(
            &params.net,
            1,
            &params.critic,
            &tr.state,
            &trace,
            &d_head,
            &mut grad,
        );
    }
    Ok(grad)
}

/// Action selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from π_θ(s, ·) with the caller's generator.
    Sample,
    /// Argmax with lowest-index tie-break; ignores the generator.
    Greedy,
}

pub fn act(
    params: &PolicyParameters,
    obs: &Observation,
    mode: ActionMode,
    rng: &mut impl Rng,
) -> Result<usize> {
    let probs = policy_forward(params, obs)?;
    Ok(match mode {
        ActionMode::Greedy => {
            let mut best = 0;
            for (k, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = k;
                }
            }
            best
        }
        ActionMode::Sample => {
            let u: f64 = rng.gen_range(0.0..1.0);
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (k, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            chosen
        }
    })
}

/// An episodic environment the trainer can drive.
pub trait Env {
    fn reset(&mut self) -> Result<Observation>;
    /// Returns (next observation, reward, done).
    fn step(&mut self, action: usize) -> Result<(Observation, f64, bool)>;
}

/// Training hyperparameters. Defaults follow the evaluation setup:
/// γ = 0.99, actor rate 1e-4, critic rate 1e-3, entropy weight annealed
/// linearly from 1 to 0.1 over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub workers: usize,
    pub episodes: u64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            discount: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            entropy_start: 1.0,
            entropy_end: 0.1,
            workers: 1,
            episodes: 1000,
            grad_clip: 40.0,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("discount must be in (0, 1]".into()));
        }
        if !(self.actor_lr >= 0.0) || !(self.critic_lr >= 0.0) {
            return Err(Error::Config("learning rates must be ≥ 0".into()));
        }
        if self.entropy_end > self.entropy_start {
            return Err(Error::Config("entropy weight must not increase".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("gradient clip must be positive".into()));
        }
        Ok(())
    }

    /// Entropy weight for an episode index, linear from start to end.
    pub fn entropy_weight(&self, episode: u64) -> f64 {
        if self.episodes <= 1 {
            return self.entropy_start;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.entropy_start + (self.entropy_end - self.entropy_start) * t.min(1.0)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    pub ret: f64,
    pub entropy_weight: f64,
    pub mean_td_error: f64,
}

fn clip_norm(grad: &mut [f64], max_norm: f64) -> bool {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        true
    } else {
        false
    }
}

/// Trains the policy with `workers` asynchronous workers. `env_factory`
/// builds the environment for a given episode index (e.g. rotating over
/// bandwidth traces); it is called from worker threads.
///
/// With one worker the run is fully deterministic for a fixed seed. The
/// returned log is sorted by episode index.
pub fn train<E, F>(
    cfg: &TrainingConfig,
    init: PolicyParameters,
    env_factory: F,
) -> Result<(PolicyParameters, Vec<EpisodeLog>)>
where
    E: Env,
    F: Fn(u64) -> Result<E> + Sync,
{
    cfg.validate()?;
    if cfg.episodes == 0 {
        return Ok((init, Vec::new()));
    }
    let store = Mutex::new(init);
    let counter = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let logs: Mutex<Vec<EpisodeLog>> = Mutex::new(Vec::with_capacity(cfg.episodes as usize));

    let worker = |worker_id: usize| -> Result<()> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(worker_id as u64 * 0x9E37_79B9));
        loop {
            if abort.load(Ordering::Relaxed) {
                return Ok(());
            }
            let episode = counter.fetch_add(1, Ordering::SeqCst);
            if episode >= cfg.episodes {
                return Ok(());
            }
            let snapshot = store.lock().unwrap().clone();
            let beta = cfg.entropy_weight(episode);

            let mut env = env_factory(episode)?;
            let mut obs = env.reset()?;
            let mut transitions = Vec::new();
            let mut ret = 0.0;
            loop {
                let action = act(&snapshot, &obs, ActionMode::Sample, &mut rng)?;
                let (next, reward, done) = env.step(action)?;
                ret += reward;
                transitions.push(Transition {
                    state: obs,
                    action,
                    reward,
                    next_state: next.clone(),
                    done,
                });
                obs = next;
                if done {
                    break;
                }
            }

            let mut batch = Vec::with_capacity(transitions.len());
            let mut td_sum = 0.0;
            for tr in &transitions {
                let a = advantage(&snapshot, tr, cfg.discount)?;
                td_sum += a.abs();
                batch.push((tr.clone(), a));
            }
            let mean_td_error = td_sum / transitions.len() as f64;

            let mut g_actor = actor_gradient(&snapshot, &batch, beta)?;
            let mut g_critic = critic_gradient(&snapshot, &transitions, cfg.discount)?;
            if g_actor.iter().chain(g_critic.iter()).any(|g| !g.is_finite()) {
                abort.store(true, Ordering::Relaxed);
                return Err(Error::InvalidInput(format!(
                    "worker {worker_id}: non-finite gradient at episode {episode}"
                )));
            }
            if clip_norm(&mut g_actor, cfg.grad_clip) {
                log::debug!("worker {worker_id}: actor gradient clipped at episode {episode}");
            }
            if clip_norm(&mut g_critic, cfg.grad_clip) {
                log::debug!("worker {worker_id}: critic gradient clipped at episode {episode}");
            }

            {
                let mut shared = store.lock().unwrap();
                for (p, g) in shared.actor.iter_mut().zip(&g_actor) {
                    *p += cfg.actor_lr * g;
                }
                for (p, g) in shared.critic.iter_mut().zip(&g_critic) {
                    *p -= cfg.critic_lr * g;
                }
                if !shared.is_finite() {
                    abort.store(true, Ordering::Relaxed);
                    return Err(Error::InvalidInput(format!(
                        "worker {worker_id}: parameters became non-finite at episode {episode}"
                    )));
                }
            }
            logs.lock().unwrap().push(EpisodeLog {
                episode,
                ret,
                entropy_weight: beta,
                mean_td_error,
            });
        }
    };

    let result: Result<()> = if cfg.workers == 1 {
        worker(0)
    } else {
        let worker = &worker;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.workers)
                .map(|id| scope.spawn(move || worker(id)))
                .collect();
            let mut first_err = None;
            for h in handles {
                if let Err(e) = h.join().expect("worker panicked") {
                    first_err.get_or_insert(e);
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(()),
            }
        })
    };
    result?;

    let params = store.into_inner().unwrap();
    let mut log_rows = logs.into_inner().unwrap();
    log_rows.sort_by_key(|l| l.episode);
    Ok((params, log_rows))
}

#[cfg(test)]
mod tests;
