//! Generalized advantage estimation over a `T x N` rollout stored step-major
//! (`index = t * n_envs + env`).

use num_traits::Float;

/// Returns `(advantages, returns)`.
///
/// `dones[i]` marks that the action taken at `i` ended its episode, so the
/// value of the following observation (the next episode's first) is not
/// bootstrapped. `next_values` are the critic's estimates for the
/// observations after the last step, one per env.
pub fn compute_gae<F: Float>(
    rewards: &[F],
    values: &[F],
    dones: &[bool],
    next_values: &[F],
    n_envs: usize,
    gamma: F,
    lambda: F,
) -> (Vec<F>, Vec<F>) {
    let len = rewards.len();
    assert!(n_envs > 0 && len.is_multiple_of(n_envs), "rollout is not T x N");
    assert_eq!(values.len(), len);
    assert_eq!(dones.len(), len);
    assert_eq!(next_values.len(), n_envs);
    let steps = len / n_envs;
    let mut adv = vec![F::zero(); len];
    for e in 0..n_envs {
        let mut running = F::zero();
        for t in (0..steps).rev() {
            let i = t * n_envs + e;
            let next_value = if t + 1 == steps { next_values[e] } else { values[i + n_envs] };
            let live = if dones[i] { F::zero() } else { F::one() };
            let delta = rewards[i] + gamma * next_value * live - values[i];
            running = delta + gamma * lambda * live * running;
            adv[i] = running;
        }
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, returns)
}
