//! Rollout storage for `T` steps of `N` environments, step-major.

#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub obs_len: usize,
    pub obs: Vec<f32>,
    /// Legal leaves at collection time, ascending.
    pub legal: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f32>,
    pub values: Vec<f32>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, obs_len: usize, steps: usize) -> Self {
        let cap = n_envs * steps;
        RolloutBuffer {
            n_envs,
            obs_len,
            obs: Vec::with_capacity(cap * obs_len),
            legal: Vec::with_capacity(cap),
            actions: Vec::with_capacity(cap),
            log_probs: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
        }
    }

    pub fn clear(&mut self) {
        self.obs.clear();
        self.legal.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.values.clear();
        self.rewards.clear();
        self.dones.clear();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f32],
        legal: Vec<usize>,
        action: usize,
        log_prob: f32,
        value: f32,
        reward: f32,
        done: bool,
    ) {
        debug_assert_eq!(obs.len(), self.obs_len);
        self.obs.extend_from_slice(obs);
        self.legal.push(legal);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    pub fn obs_at(&self, i: usize) -> &[f32] {
        &self.obs[i * self.obs_len..(i + 1) * self.obs_len]
    }
}
