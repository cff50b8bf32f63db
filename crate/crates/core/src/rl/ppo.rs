//! Clipped-surrogate PPO update with masked log-probabilities, clipped value
//! loss, entropy bonus, global gradient-norm clipping and Adam.

use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::net::{log_softmax, PolicyNet};
use crate::engine::GameRng;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Samples per gradient work unit. Fixed so that the reduction order, and
/// therefore the result, does not depend on the thread count.
pub const GRAD_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub anneal_lr: bool,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_coef: f64,
    pub clip_value_loss: bool,
    pub normalize_advantages: bool,
    pub update_epochs: usize,
    pub num_minibatches: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    /// Rollout length per environment.
    pub num_steps: usize,
    pub num_envs: usize,
    /// Learner decisions to train for.
    pub total_steps: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 2.5e-4,
            anneal_lr: true,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_coef: 0.2,
            clip_value_loss: true,
            normalize_advantages: true,
            update_epochs: 4,
            num_minibatches: 4,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            num_steps: 128,
            num_envs: 8,
            total_steps: 1_000_000,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.num_steps * self.num_envs
    }

    pub fn minibatch_size(&self) -> usize {
        self.batch_size() / self.num_minibatches
    }

    /// Enough updates to take at least `total_steps` learner steps.
    pub fn num_updates(&self) -> u64 {
        self.total_steps.div_ceil(self.batch_size() as u64).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.clip_coef.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("clip_coef must be positive");
        }
        if self.num_envs == 0 || self.num_steps == 0 || self.update_epochs == 0 {
            return bad("num_envs, num_steps and update_epochs must be at least 1");
        }
        if self.num_minibatches == 0 || !self.batch_size().is_multiple_of(self.num_minibatches) {
            return bad("num_minibatches must divide num_steps * num_envs");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0 {
            return bad("learning_rate and max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Loss weights in the working precision.
#[derive(Clone, Copy, Debug)]
pub struct LossCoefs<F> {
    pub clip: F,
    pub ent: F,
    pub vf: F,
    pub clip_value_loss: bool,
}

impl<F: Float> LossCoefs<F> {
    pub fn from_config(cfg: &PpoConfig) -> Self {
        LossCoefs {
            clip: F::from(cfg.clip_coef).expect("finite"),
            ent: F::from(cfg.ent_coef).expect("finite"),
            vf: F::from(cfg.vf_coef).expect("finite"),
            clip_value_loss: cfg.clip_value_loss,
        }
    }
}

/// One training sample with its (already normalised) advantage.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a, F> {
    pub obs: &'a [F],
    pub legal: &'a [usize],
    pub action: usize,
    pub old_log_prob: F,
    pub old_value: F,
    pub advantage: F,
    pub ret: F,
}

/// Sums over samples of the per-sample loss terms and diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSums {
    pub count: usize,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clipped: f64,
    pub max_ratio_dev: f64,
}

impl LossSums {
    fn merge(&mut self, o: &LossSums) {
        self.count += o.count;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.approx_kl += o.approx_kl;
        self.clipped += o.clipped;
        self.max_ratio_dev = self.max_ratio_dev.max(o.max_ratio_dev);
    }

    /// Mean total loss `policy - ent * entropy + vf * value`.
    pub fn total(&self, ent: f64, vf: f64) -> f64 {
        let n = self.count.max(1) as f64;
        (self.policy - ent * self.entropy + vf * self.value) / n
    }
}

/// Adds `scale` times the gradient of the summed per-sample losses to
/// `grad` and returns the loss sums. With `scale = 1 / minibatch_size` this
/// is the gradient of the minibatch mean loss.
pub fn accumulate<F: Float + Send + Sync>(
    net: &PolicyNet<F>,
    samples: &[Sample<'_, F>],
    coefs: &LossCoefs<F>,
    scale: F,
    grad: &mut [F],
) -> Result<LossSums> {
    let mut ws = net.workspace();
    let mut logits = Vec::new();
    let mut dlogits = Vec::new();
    let mut sums = LossSums::default();
    let one = F::one();
    let f64_of = |x: F| x.to_f64().unwrap_or(f64::NAN);
    for s in samples {
        net.forward(s.obs, &mut ws)?;
        net.logits_for(&ws, s.legal, &mut logits);
        let logp = log_softmax(&logits);
        let pos = s
            .legal
            .binary_search(&s.action)
            .map_err(|_| Error::IllegalAction {
                action: s.action,
                legal: s.legal.to_vec(),
            })?;
        let probs: Vec<F> = logp.iter().map(|&l| l.exp()).collect();
        let entropy = probs.iter().zip(&logp).fold(F::zero(), |acc, (&p, &l)| acc - p * l);

        let log_ratio = logp[pos] - s.old_log_prob;
        let ratio = log_ratio.exp();
        let clipped_ratio = ratio.max(one - coefs.clip).min(one + coefs.clip);
        let pg1 = -s.advantage * ratio;
        let pg2 = -s.advantage * clipped_ratio;
        let pg = pg1.max(pg2);
        let dlogp = if pg1 >= pg2 { -s.advantage * ratio } else { F::zero() };

        dlogits.clear();
        dlogits.extend(probs.iter().zip(&logp).enumerate().map(|(k, (&p, &l))| {
            let onehot = if k == pos { one } else { F::zero() };
            scale * (dlogp * (onehot - p) + coefs.ent * p * (l + entropy))
        }));

        let v = ws.value();
        let err = v - s.ret;
        let (vloss, dv) = if coefs.clip_value_loss {
            let delta = v - s.old_value;
            let vc = s.old_value + delta.max(-coefs.clip).min(coefs.clip);
            let errc = vc - s.ret;
            if err * err >= errc * errc {
                (err * err, err)
            } else {
                let pass = if delta.abs() < coefs.clip { one } else { F::zero() };
                (errc * errc, errc * pass)
            }
        } else {
            (err * err, err)
        };
        let half = F::from(0.5).expect("half");
        net.backward(&mut ws, s.legal, &dlogits, scale * coefs.vf * dv, grad);

        sums.count += 1;
        sums.policy += f64_of(pg);
        sums.value += f64_of(half * vloss);
        sums.entropy += f64_of(entropy);
        sums.approx_kl += f64_of((ratio - one) - log_ratio);
        sums.clipped += f64::from(u8::from((ratio - one).abs() > coefs.clip));
        sums.max_ratio_dev = sums.max_ratio_dev.max(f64_of((ratio - one).abs()));
    }
    Ok(sums)
}

/// Mean loss and its gradient over `samples`, computed in one pass.
pub fn loss_and_grad<F: Float + Send + Sync>(
    net: &PolicyNet<F>,
    samples: &[Sample<'_, F>],
    coefs: &LossCoefs<F>,
) -> Result<(f64, Vec<F>, LossSums)> {
    let mut grad = vec![F::zero(); net.params().len()];
    let scale = F::one() / F::from(samples.len()).expect("count");
    let sums = accumulate(net, samples, coefs, scale, &mut grad)?;
    let ent = coefs.ent.to_f64().unwrap_or(f64::NAN);
    let vf = coefs.vf.to_f64().unwrap_or(f64::NAN);
    Ok((sums.total(ent, vf), grad, sums))
}

/// Chunked [`loss_and_grad`]: chunks may run in parallel and are reduced in
/// chunk order, so the result is identical in both execution modes.
pub fn minibatch_grad(
    net: &PolicyNet<f32>,
    samples: &[Sample<'_, f32>],
    coefs: &LossCoefs<f32>,
    exec: Execution,
) -> Result<(Vec<f32>, LossSums)> {
    let scale = 1.0 / samples.len() as f32;
    let chunks: Vec<&[Sample<'_, f32>]> = samples.chunks(GRAD_CHUNK).collect();
    let parts = exec::map(exec, &chunks, |chunk| {
        let mut grad = vec![0.0f32; net.params().len()];
        accumulate(net, chunk, coefs, scale, &mut grad).map(|s| (grad, s))
    });
    let mut total = vec![0.0f32; net.params().len()];
    let mut sums = LossSums::default();
    for part in parts {
        let (g, s) = part?;
        total.iter_mut().zip(&g).for_each(|(t, x)| *t += x);
        sums.merge(&s);
    }
    Ok((total, sums))
}

/// Scales `grad` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_grad_norm(grad: &mut [f32], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = (max_norm / (norm + 1e-6)) as f32;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
        }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = (lr / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let eps = self.eps as f32;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() / bc2_sqrt + eps);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` in the first minibatch of the first epoch.
    pub first_ratio_dev: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
}

/// Normalises to zero mean and unit (sample) standard deviation.
pub fn normalize(values: &mut [f32]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let denom = var.sqrt() + 1e-8;
    values.iter_mut().for_each(|v| *v = ((*v as f64 - mean) / denom) as f32);
}

/// Runs `update_epochs` passes of shuffled minibatch steps over `buf`.
/// Statistics are means over all minibatches of the update.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    net: &mut PolicyNet<f32>,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    advantages: &[f32],
    returns: &[f32],
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut GameRng,
    exec: Execution,
) -> Result<UpdateStats> {
    let n = buf.len();
    if advantages.len() != n || returns.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: advantages.len().min(returns.len()),
        });
    }
    let coefs = LossCoefs::<f32>::from_config(cfg);
    let mb = (n / cfg.num_minibatches).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats {
        learning_rate: lr,
        ..UpdateStats::default()
    };
    let mut batches = 0usize;
    let mut adv = vec![0.0f32; mb];
    for epoch in 0..cfg.update_epochs {
        order.shuffle(rng);
        for (k, idx) in order.chunks(mb).enumerate() {
            adv.resize(idx.len(), 0.0);
            for (a, &i) in adv.iter_mut().zip(idx) {
                *a = advantages[i];
            }
            if cfg.normalize_advantages {
                normalize(&mut adv);
            }
            let samples: Vec<Sample<'_, f32>> = idx
                .iter()
                .zip(&adv)
                .map(|(&i, &a)| Sample {
                    obs: buf.obs_at(i),
                    legal: &buf.legal[i],
                    action: buf.actions[i],
                    old_log_prob: buf.log_probs[i],
                    old_value: buf.values[i],
                    advantage: a,
                    ret: returns[i],
                })
                .collect();
            let (mut grad, sums) = minibatch_grad(net, &samples, &coefs, exec)?;
            let c = sums.count.max(1) as f64;
            let (pl, vl, ent) = (sums.policy / c, sums.value / c, sums.entropy / c);
            if !(pl.is_finite() && vl.is_finite() && ent.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    minibatch: k,
                    policy_loss: pl,
                    value_loss: vl,
                    entropy: ent,
                });
            }
            if epoch == 0 && k == 0 {
                stats.first_ratio_dev = sums.max_ratio_dev;
            }
            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.entropy += ent;
            stats.approx_kl += sums.approx_kl / c;
            stats.clip_fraction += sums.clipped / c;
            stats.grad_norm += clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(net.params_mut(), &grad, lr);
            batches += 1;
        }
    }
    let b = batches.max(1) as f64;
    stats.policy_loss /= b;
    stats.value_loss /= b;
    stats.entropy /= b;
    stats.approx_kl /= b;
    stats.clip_fraction /= b;
    stats.grad_norm /= b;
    Ok(stats)
}
