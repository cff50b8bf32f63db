//! Learner-perspective environments. Opponents act inside [`Env::step`];
//! the learner sees its own observation and mask and a terminal-only
//! reward. [`VecEnv`] steps several environments synchronously with
//! auto-reset, and [`evaluate`] plays a fixed matchup for metrics.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::action_space::{ActionMask, ActionTree};
use crate::agents::{Agent, AgentKind, AgentSpec};
use crate::engine::{derive_seed, GameId, GameState, PlayerResult, Seed};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::replay::GameLog;

const OPPONENT_STREAM: u64 = 0x6f70_7000;
const LEARNER_STREAM: u64 = 0x6c72_6e00;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeatPolicy {
    /// The learner always plays this seat.
    Fixed(usize),
    /// Episode `k` puts the learner in seat `k % n_players`.
    Rotate,
}

impl Default for SeatPolicy {
    fn default() -> Self {
        SeatPolicy::Fixed(0)
    }
}

impl SeatPolicy {
    pub fn seat(self, episode: u64, n_players: usize) -> usize {
        match self {
            SeatPolicy::Fixed(s) => s,
            SeatPolicy::Rotate => (episode % n_players as u64) as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub game: GameId,
    pub n_players: usize,
    pub learner_seat: SeatPolicy,
    /// One per non-learner seat, assigned in seat order.
    pub opponents: Vec<AgentKind>,
    pub seed: Seed,
    /// Overrides the game's decision cap.
    pub max_decisions: Option<u32>,
}

impl EnvConfig {
    /// Learner in seat 0 against `n_players - 1` copies of `opponent`.
    pub fn new(game: GameId, n_players: usize, opponent: AgentKind, seed: Seed) -> Self {
        EnvConfig {
            game,
            n_players,
            learner_seat: SeatPolicy::Fixed(0),
            opponents: vec![opponent; n_players.saturating_sub(1)],
            seed,
            max_decisions: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.check_players(self.n_players)?;
        if self.opponents.len() + 1 != self.n_players {
            return Err(Error::Config(format!(
                "{} players need {} opponents, got {}",
                self.n_players,
                self.n_players - 1,
                self.opponents.len()
            )));
        }
        if let SeatPolicy::Fixed(s) = self.learner_seat {
            if s >= self.n_players {
                return Err(Error::PlayerOutOfRange {
                    player: s,
                    n_players: self.n_players,
                });
            }
        }
        Ok(())
    }

    /// Seed of the game in episode `episode`.
    pub fn episode_seed(&self, episode: u64) -> Seed {
        derive_seed(self.seed, episode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub episode: u64,
    pub result: PlayerResult,
    #[serde(rename = "return")]
    pub ret: f32,
    /// Learner decisions in the episode.
    pub length: u32,
    pub seat: usize,
    pub seed: Seed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f32>,
    pub mask: ActionMask,
    pub reward: f32,
    pub done: bool,
    /// Set when an episode ended on this step.
    pub info: Option<EpisodeInfo>,
}

/// One game seen from the learner's seat.
pub struct Env {
    config: EnvConfig,
    tree: Arc<ActionTree>,
    opponents: Vec<Box<dyn Agent>>,
    state: GameState,
    learner: usize,
    episode: u64,
    next_episode: u64,
    episode_seed: Seed,
    episode_steps: u32,
    steps: u64,
    done: bool,
    history: Vec<usize>,
    scratch: Vec<usize>,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Env> {
        config.validate()?;
        let specs = config
            .opponents
            .iter()
            .map(|k| AgentSpec::resolve(k, config.game, config.n_players))
            .collect::<Result<Vec<_>>>()?;
        Env::with_agents(config, &specs)
    }

    /// Like [`Env::new`] with already resolved opponents.
    pub fn with_agents(config: EnvConfig, opponents: &[AgentSpec]) -> Result<Env> {
        config.validate()?;
        let tree = Arc::new(ActionTree::build(config.game, config.n_players)?);
        let opponents = opponents.iter().map(|s| s.build(0)).collect();
        let state = GameState::reset(config.game, config.n_players, config.episode_seed(0))?;
        let mut env = Env {
            config,
            tree,
            opponents,
            state,
            learner: 0,
            episode: 0,
            next_episode: 0,
            episode_seed: 0,
            episode_steps: 0,
            steps: 0,
            done: true,
            history: Vec::new(),
            scratch: Vec::new(),
        };
        env.start_episode(0)?;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn tree(&self) -> &ActionTree {
        &self.tree
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn learner_seat(&self) -> usize {
        self.learner
    }

    /// Index of the current (or just finished) episode.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Learner decisions over the environment's lifetime.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Every action applied in the current episode, by all players.
    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// Seed the current episode's game was dealt with.
    pub fn episode_seed(&self) -> Seed {
        self.episode_seed
    }

    fn context(&self, source: Error) -> Error {
        Error::Env {
            game: self.config.game,
            seed: self.episode_seed,
            step: self.steps,
            source: Box::new(source),
        }
    }

    /// Starts episode `episode`. Everything random in it (deal, opponents'
    /// choices) is derived from the config seed and the episode index.
    fn start_episode(&mut self, episode: u64) -> Result<()> {
        let cfg = &self.config;
        self.episode = episode;
        self.episode_seed = cfg.episode_seed(episode);
        self.learner = cfg.learner_seat.seat(episode, cfg.n_players);
        self.state = GameState::reset(cfg.game, cfg.n_players, self.episode_seed)?;
        if let Some(cap) = cfg.max_decisions {
            self.state.set_decision_cap(cap);
        }
        for (k, agent) in self.opponents.iter_mut().enumerate() {
            agent.reseed(derive_seed(self.episode_seed, OPPONENT_STREAM + k as u64));
        }
        self.episode_steps = 0;
        self.history.clear();
        self.done = false;
        self.advance_opponents()
    }

    /// Seed for a learner-side agent in the current episode.
    pub fn learner_seed(&self) -> Seed {
        derive_seed(self.episode_seed, LEARNER_STREAM)
    }

    fn advance_opponents(&mut self) -> Result<()> {
        while self.state.is_running() {
            let p = self.state.current_player()?;
            if p == self.learner {
                break;
            }
            let k = if p < self.learner { p } else { p - 1 };
            let action = self.opponents[k].act(&self.state).map_err(|e| self.context(e))?;
            self.state.apply(action).map_err(|e| self.context(e))?;
            self.history.push(action);
        }
        Ok(())
    }

    fn observe(&mut self) -> Result<(Vec<f32>, ActionMask)> {
        let obs = self.state.vectorize(self.learner)?;
        let mut mask = ActionMask::none(self.tree.leaf_count());
        if self.state.is_running() {
            self.tree.compute_mask_into(&self.state, &mut mask, &mut self.scratch)?;
        }
        Ok((obs, mask))
    }

    /// Starts the next episode (episode 0 on a fresh env) and returns the
    /// learner's first observation.
    pub fn reset(&mut self) -> Result<StepResult> {
        self.reset_to(self.next_episode)
    }

    /// Starts episode `episode` directly.
    pub fn reset_to(&mut self, episode: u64) -> Result<StepResult> {
        let mut episode = episode;
        self.start_episode(episode)?;
        // Opponents may finish a game before the learner ever acts; such
        // episodes are skipped.
        while !self.state.is_running() {
            episode += 1;
            self.start_episode(episode)?;
        }
        self.next_episode = episode + 1;
        let (obs, mask) = self.observe()?;
        Ok(StepResult {
            obs,
            mask,
            reward: 0.0,
            done: false,
            info: None,
        })
    }

    /// Applies the learner's action and lets the opponents reply. An
    /// illegal action is rejected and leaves the environment unchanged.
    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::TerminalState);
        }
        self.state.apply(action)?;
        self.history.push(action);
        self.steps += 1;
        self.episode_steps += 1;
        self.advance_opponents()?;
        let (obs, mask) = self.observe()?;
        if self.state.is_running() {
            return Ok(StepResult {
                obs,
                mask,
                reward: 0.0,
                done: false,
                info: None,
            });
        }
        self.done = true;
        let result = self.state.status().result(self.learner).expect("finished game has results");
        let reward = result.reward();
        Ok(StepResult {
            obs,
            mask,
            reward,
            done: true,
            info: Some(EpisodeInfo {
                episode: self.episode,
                result,
                ret: reward,
                length: self.episode_steps,
                seat: self.learner,
                seed: self.episode_seed,
            }),
        })
    }

    /// [`Env::step`], then on episode end a reset whose first observation
    /// replaces the terminal one.
    pub fn step_auto_reset(&mut self, action: usize) -> Result<StepResult> {
        let mut out = self.step(action)?;
        if out.done {
            let fresh = self.reset()?;
            out.obs = fresh.obs;
            out.mask = fresh.mask;
        }
        Ok(out)
    }
}

/// `N` environments with seeds `derive_seed(seed, i)`, stepped together.
pub struct VecEnv {
    envs: Vec<Env>,
    exec: Execution,
}

impl VecEnv {
    pub fn new(config: &EnvConfig, n_envs: usize, exec: Execution) -> Result<VecEnv> {
        if n_envs == 0 {
            return Err(Error::Config("at least one environment is required".into()));
        }
        config.validate()?;
        let specs = config
            .opponents
            .iter()
            .map(|k| AgentSpec::resolve(k, config.game, config.n_players))
            .collect::<Result<Vec<_>>>()?;
        let envs = (0..n_envs)
            .map(|i| {
                let cfg = EnvConfig {
                    seed: derive_seed(config.seed, i as u64),
                    ..config.clone()
                };
                Env::with_agents(cfg, &specs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VecEnv { envs, exec })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    pub fn envs_mut(&mut self) -> &mut [Env] {
        &mut self.envs
    }

    pub fn reset(&mut self) -> Vec<Result<StepResult>> {
        exec::map_mut(self.exec, &mut self.envs, |_, env| env.reset())
    }

    /// Steps every env with its action. Finished envs auto-reset; errors are
    /// reported per slot.
    pub fn step(&mut self, actions: &[usize]) -> Result<Vec<Result<StepResult>>> {
        if actions.len() != self.envs.len() {
            return Err(Error::Shape {
                expected: self.envs.len(),
                got: actions.len(),
            });
        }
        Ok(exec::map_mut(self.exec, &mut self.envs, |i, env| env.step_auto_reset(actions[i])))
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }
}

/// Mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, se }
    }
}

pub const DEFAULT_WINDOW: usize = 100;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Episodes in the window.
    pub episodes: usize,
    pub wins: Stat,
    pub ties: Stat,
    pub losses: Stat,
    pub returns: Stat,
    pub lengths: Stat,
    /// Learner steps per wall-clock second over the whole run.
    pub fps: f64,
}

impl EpisodeMetrics {
    /// Aggregates the last `window` episodes (all when `None`).
    pub fn from_episodes(episodes: &[EpisodeInfo], window: Option<usize>, fps: f64) -> Self {
        let start = window.map_or(0, |w| episodes.len().saturating_sub(w));
        let win = &episodes[start..];
        let rate = |r: PlayerResult| Stat::of(win.iter().map(|e| f64::from(u8::from(e.result == r))));
        EpisodeMetrics {
            episodes: win.len(),
            wins: rate(PlayerResult::Win),
            ties: rate(PlayerResult::Tie),
            losses: rate(PlayerResult::Loss),
            returns: Stat::of(win.iter().map(|e| e.ret as f64)),
            lengths: Stat::of(win.iter().map(|e| e.length as f64)),
            fps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: EpisodeMetrics,
    pub episodes: Vec<EpisodeInfo>,
}

/// Plays `episodes` games of `learner` against the configured opponents
/// without learning. Episode `k` is fully determined by the config seed and
/// `k`, so the result does not depend on the execution mode.
pub fn evaluate(
    learner: &AgentSpec,
    config: &EnvConfig,
    episodes: usize,
    window: Option<usize>,
    exec: Execution,
) -> Result<Evaluation> {
    let started = Instant::now();
    let all: Vec<EpisodeInfo> = run_episodes(learner, config, episodes, false, exec)?
        .into_iter()
        .map(|(info, _)| info)
        .collect();
    let steps: u64 = all.iter().map(|e| e.length as u64).sum();
    let fps = steps as f64 / started.elapsed().as_secs_f64().max(1e-9);
    Ok(Evaluation {
        metrics: EpisodeMetrics::from_episodes(&all, window, fps),
        episodes: all,
    })
}

/// [`evaluate`] that also records every game for replay.
pub fn play_recorded(
    learner: &AgentSpec,
    config: &EnvConfig,
    episodes: usize,
    exec: Execution,
) -> Result<Vec<(EpisodeInfo, GameLog)>> {
    run_episodes(learner, config, episodes, true, exec).map(|v| {
        v.into_iter()
            .map(|(info, log)| (info, log.expect("recorded")))
            .collect()
    })
}

fn run_episodes(
    learner: &AgentSpec,
    config: &EnvConfig,
    episodes: usize,
    record: bool,
    exec: Execution,
) -> Result<Vec<(EpisodeInfo, Option<GameLog>)>> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    config.validate()?;
    let opponents = config
        .opponents
        .iter()
        .map(|k| AgentSpec::resolve(k, config.game, config.n_players))
        .collect::<Result<Vec<_>>>()?;
    let workers = if exec.is_parallel() { rayon_threads() } else { 1 };
    let per = episodes.div_ceil(workers);
    let blocks = exec::map_range(exec, workers, |w| -> Result<Vec<(EpisodeInfo, Option<GameLog>)>> {
        let lo = (w * per).min(episodes);
        let hi = ((w + 1) * per).min(episodes);
        let mut env = Env::with_agents(config.clone(), &opponents)?;
        let mut agent = learner.build(0);
        let mut out = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            env.reset_to(k as u64)?;
            agent.reseed(env.learner_seed());
            loop {
                let action = agent.act(env.state())?;
                let step = env.step(action)?;
                if let Some(info) = step.info {
                    let log = record.then(|| GameLog::record(env.state(), env.episode_seed(), env.history()));
                    out.push((info, log));
                    break;
                }
            }
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(episodes);
    for b in blocks {
        all.extend(b?);
    }
    Ok(all)
}

fn rayon_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads().max(1)
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

pub const EPISODE_CSV_HEADER: &str = "episode,result,return,length,seat,seed";

pub fn write_episode_csv<W: Write>(out: &mut W, episodes: &[EpisodeInfo]) -> Result<()> {
    writeln!(out, "{EPISODE_CSV_HEADER}")?;
    for e in episodes {
        let result = match e.result {
            PlayerResult::Win => "win",
            PlayerResult::Tie => "tie",
            PlayerResult::Loss => "loss",
        };
        writeln!(out, "{},{},{},{},{},{}", e.episode, result, e.ret, e.length, e.seat, e.seed)?;
    }
    Ok(())
}

/// Parses what [`write_episode_csv`] wrote.
pub fn read_episode_csv(text: &str) -> Result<Vec<EpisodeInfo>> {
    let bad = |line: &str| Error::Config(format!("malformed episode row `{line}`"));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(line));
            }
            let result = match f[1] {
                "win" => PlayerResult::Win,
                "tie" => PlayerResult::Tie,
                "loss" => PlayerResult::Loss,
                _ => return Err(bad(line)),
            };
            Ok(EpisodeInfo {
                episode: f[0].parse().map_err(|_| bad(line))?,
                result,
                ret: f[2].parse().map_err(|_| bad(line))?,
                length: f[3].parse().map_err(|_| bad(line))?,
                seat: f[4].parse().map_err(|_| bad(line))?,
                seed: f[5].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}
