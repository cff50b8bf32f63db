//! Collect, estimate advantages, update: the PPO training loop.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::checkpoint::{self, CheckpointHeader};
use super::gae::compute_gae;
use super::net::{NetSpec, PolicyNet, Workspace};
use super::ppo::{ppo_update, Adam, PpoConfig, UpdateStats};
use crate::agents::sample_policy;
use crate::engine::{derive_seed, GameRng, Seed};
use crate::env::{EnvConfig, EpisodeInfo, EpisodeMetrics, VecEnv, DEFAULT_WINDOW};
use crate::error::Result;
use crate::exec::{self, Execution};

const INIT_STREAM: u64 = 0x696e_6974;
const SHUFFLE_STREAM: u64 = 0x7368_7566;
const SAMPLER_STREAM: u64 = 0x7361_6d70;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub execution: Execution,
    /// Episodes in the running metrics window.
    pub window: usize,
    /// Save a checkpoint every this many updates (needs `checkpoint_dir`).
    pub checkpoint_every: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(env: EnvConfig, ppo: PpoConfig) -> Self {
        TrainConfig {
            env,
            ppo,
            execution: Execution::default(),
            window: DEFAULT_WINDOW,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub step: u64,
    pub episodes: u64,
    pub win_rate: f64,
    pub win_rate_se: f64,
    pub episode_return: f64,
    pub episode_length: f64,
    pub fps: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub learning_rate: f64,
}

pub const METRICS_CSV_HEADER: &str = "update,step,episodes,win_rate,win_rate_se,return,ep_length,fps,policy_loss,value_loss,entropy,approx_kl,clip_fraction,learning_rate";

impl MetricsRow {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.4},{:.1},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3e}",
            self.update,
            self.step,
            self.episodes,
            self.win_rate,
            self.win_rate_se,
            self.episode_return,
            self.episode_length,
            self.fps,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
            self.learning_rate
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.win_rate,
            self.win_rate_se,
            self.episode_return,
            self.episode_length,
            self.fps,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
            self.learning_rate,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

pub struct TrainReport {
    pub net: PolicyNet<f32>,
    pub header: CheckpointHeader,
    pub rows: Vec<MetricsRow>,
    pub episodes: Vec<EpisodeInfo>,
    /// Window metrics at the end of training.
    pub metrics: EpisodeMetrics,
    pub steps: u64,
    pub illegal_actions: u64,
    pub first_update: UpdateStats,
    pub seconds: f64,
}

struct Sampler {
    rng: GameRng,
    ws: Workspace<f32>,
    obs: Vec<f32>,
    legal: Vec<usize>,
}

fn header(cfg: &TrainConfig, net: &PolicyNet<f32>, steps: u64) -> CheckpointHeader {
    CheckpointHeader {
        game: cfg.env.game,
        n_players: cfg.env.n_players,
        net: net.spec().clone(),
        param_count: net.params().len(),
        learner_steps: steps,
        seed: cfg.env.seed,
        extra: serde_json::to_value(cfg).unwrap_or_default(),
    }
}

/// Trains a fresh policy. `on_row` sees every metrics row as it is produced.
pub fn train(cfg: &TrainConfig, mut on_row: impl FnMut(&MetricsRow)) -> Result<TrainReport> {
    cfg.ppo.validate()?;
    cfg.env.validate()?;
    let seed: Seed = cfg.env.seed;
    let p = &cfg.ppo;
    let exec = cfg.execution;
    let spec = NetSpec::for_game(cfg.env.game, cfg.env.n_players)?;
    let mut net = PolicyNet::<f32>::new(spec, derive_seed(seed, INIT_STREAM))?;
    let mut opt = Adam::new(net.params().len());
    let mut shuffle_rng = GameRng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM));
    let mut venv = VecEnv::new(&cfg.env, p.num_envs, exec)?;
    let mut samplers = Vec::with_capacity(p.num_envs);
    for (i, first) in venv.reset().into_iter().enumerate() {
        let first = first?;
        samplers.push(Sampler {
            rng: GameRng::seed_from_u64(derive_seed(seed, SAMPLER_STREAM + i as u64)),
            ws: net.workspace(),
            legal: first.mask.legal_actions(),
            obs: first.obs,
        });
    }

    let obs_len = net.spec().obs_len;
    let mut buf = RolloutBuffer::new(p.num_envs, obs_len, p.num_steps);
    let mut episodes: Vec<EpisodeInfo> = Vec::new();
    let mut rows = Vec::new();
    let mut first_update = UpdateStats::default();
    let mut illegal = 0u64;
    let mut step = 0u64;
    let started = Instant::now();
    let updates = p.num_updates();

    for update in 1..=updates {
        let lr = if p.anneal_lr {
            p.learning_rate * (1.0 - (update - 1) as f64 / updates as f64)
        } else {
            p.learning_rate
        };
        buf.clear();
        for _ in 0..p.num_steps {
            let picks = exec::map_mut(exec, &mut samplers, |_, s| {
                sample_policy(&net, &mut s.ws, &s.obs, &s.legal, &mut s.rng)
            });
            let picks = picks.into_iter().collect::<Result<Vec<_>>>()?;
            let actions: Vec<usize> = picks.iter().map(|p| p.0).collect();
            illegal += samplers
                .iter()
                .zip(&actions)
                .filter(|(s, a)| s.legal.binary_search(a).is_err())
                .count() as u64;
            let results = venv.step(&actions)?;
            step += p.num_envs as u64;
            for ((s, (action, logp, value)), res) in samplers.iter_mut().zip(picks).zip(results) {
                let res = res?;
                let legal = std::mem::replace(&mut s.legal, res.mask.legal_actions());
                buf.push(&s.obs, legal, action, logp, value, res.reward, res.done);
                s.obs = res.obs;
                if let Some(info) = res.info {
                    episodes.push(info);
                }
            }
        }

        let next_values: Vec<f32> = exec::map_mut(exec, &mut samplers, |_, s| {
            net.forward(&s.obs, &mut s.ws).map(|_| s.ws.value())
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let (adv, ret) = compute_gae(
            &buf.rewards,
            &buf.values,
            &buf.dones,
            &next_values,
            p.num_envs,
            p.gamma as f32,
            p.gae_lambda as f32,
        );
        let stats = ppo_update(&mut net, &mut opt, &buf, &adv, &ret, p, lr, &mut shuffle_rng, exec)?;
        if update == 1 {
            first_update = stats;
        }

        let fps = step as f64 / started.elapsed().as_secs_f64().max(1e-9);
        let m = EpisodeMetrics::from_episodes(&episodes, Some(cfg.window), fps);
        let row = MetricsRow {
            update,
            step,
            episodes: episodes.len() as u64,
            win_rate: m.wins.mean,
            win_rate_se: m.wins.se,
            episode_return: m.returns.mean,
            episode_length: m.lengths.mean,
            fps,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            learning_rate: lr,
        };
        on_row(&row);
        rows.push(row);

        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if every > 0 && update % every == 0 {
                let path = dir.join(format!("step_{step:09}.ckpt"));
                checkpoint::save(&path, &net, &header(cfg, &net, step))?;
            }
        }
    }

    let seconds = started.elapsed().as_secs_f64();
    let fps = step as f64 / seconds.max(1e-9);
    Ok(TrainReport {
        header: header(cfg, &net, step),
        metrics: EpisodeMetrics::from_episodes(&episodes, Some(cfg.window), fps),
        net,
        rows,
        episodes,
        steps: step,
        illegal_actions: illegal,
        first_update,
        seconds,
    })
}
