use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use tabletop_core::rl::net::{log_softmax, NetSpec, PolicyNet};
use tabletop_core::rl::ppo::{loss_and_grad, LossCoefs, Sample};
use tabletop_core::GameRng;

/// Advantage straight from its definition: the discounted sum of TD errors
/// up to the end of the episode or of the rollout.
pub fn gae_oracle(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    next_values: &[f64],
    n: usize,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let steps = rewards.len() / n;
    let value_after = |t: usize, e: usize| if t + 1 == steps { next_values[e] } else { values[(t + 1) * n + e] };
    let delta = |t: usize, e: usize| {
        let i = t * n + e;
        let boot = if dones[i] { 0.0 } else { gamma * value_after(t, e) };
        rewards[i] + boot - values[i]
    };
    let mut out = vec![0.0; rewards.len()];
    for e in 0..n {
        for t in 0..steps {
            let mut total = 0.0;
            for k in t..steps {
                total += (gamma * lambda).powi((k - t) as i32) * delta(k, e);
                if dones[k * n + e] {
                    break;
                }
            }
            out[t * n + e] = total;
        }
    }
    out
}

pub struct Batch {
    obs: Vec<Vec<f64>>,
    legal: Vec<Vec<usize>>,
    actions: Vec<usize>,
    old_logp: Vec<f64>,
    old_values: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
}

pub fn random_net(spec: NetSpec, rng: &mut GameRng) -> PolicyNet<f64> {
    let mut net = PolicyNet::<f64>::new(spec, 1).unwrap();
    for p in net.params_mut() {
        *p = 0.4 * rng.sample::<f64, _>(StandardNormal);
    }
    net
}

/// Old log-probabilities are the current ones shifted by noise, so ratios
/// land on both sides of the clip range.
pub fn random_batch(net: &PolicyNet<f64>, size: usize, rng: &mut GameRng) -> Batch {
    let spec = net.spec().clone();
    let mut ws = net.workspace();
    let mut b = Batch {
        obs: Vec::new(),
        legal: Vec::new(),
        actions: Vec::new(),
        old_logp: Vec::new(),
        old_values: Vec::new(),
        adv: Vec::new(),
        ret: Vec::new(),
    };
    for _ in 0..size {
        let obs: Vec<f64> = (0..spec.obs_len)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.sample(StandardNormal) })
            .collect();
        let mut legal: Vec<usize> = (0..spec.n_actions).filter(|_| rng.random_bool(0.6)).collect();
        if legal.is_empty() {
            legal.push(rng.random_range(0..spec.n_actions));
        }
        let action = legal[rng.random_range(0..legal.len())];
        net.forward(&obs, &mut ws).unwrap();
        let mut logits = Vec::new();
        net.logits_for(&ws, &legal, &mut logits);
        let logp = log_softmax(&logits)[legal.binary_search(&action).unwrap()];
        b.old_logp.push(logp + 0.3 * rng.sample::<f64, _>(StandardNormal));
        b.old_values.push(ws.value() + 0.3 * rng.sample::<f64, _>(StandardNormal));
        b.adv.push(rng.sample(StandardNormal));
        b.ret.push(rng.sample(StandardNormal));
        b.obs.push(obs);
        b.legal.push(legal);
        b.actions.push(action);
    }
    b
}

pub fn samples(b: &Batch) -> Vec<Sample<'_, f64>> {
    (0..b.obs.len())
        .map(|i| Sample {
            obs: &b.obs[i],
            legal: &b.legal[i],
            action: b.actions[i],
            old_log_prob: b.old_logp[i],
            old_value: b.old_values[i],
            advantage: b.adv[i],
            ret: b.ret[i],
        })
        .collect()
}

/// Largest relative error between the analytic gradient and central
/// differences over all parameters.
pub fn gradient_error(spec: NetSpec, seed: u64, clip_value_loss: bool) -> f64 {
    let mut rng = GameRng::seed_from_u64(seed);
    let mut net = random_net(spec, &mut rng);
    let batch = random_batch(&net, 12, &mut rng);
    let s = samples(&batch);
    let coefs = LossCoefs {
        clip: 0.2,
        ent: 0.01,
        vf: 0.5,
        clip_value_loss,
    };
    let (_, grad, _) = loss_and_grad(&net, &s, &coefs).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..grad.len() {
        let orig = net.params()[k];
        net.params_mut()[k] = orig + h;
        let up = loss_and_grad(&net, &s, &coefs).unwrap().0;
        net.params_mut()[k] = orig - h;
        let down = loss_and_grad(&net, &s, &coefs).unwrap().0;
        net.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = grad[k].abs().max(numeric.abs());
        let err = if scale < 1e-7 { 0.0 } else { (grad[k] - numeric).abs() / scale };
        worst = worst.max(err);
    }
    worst
}

