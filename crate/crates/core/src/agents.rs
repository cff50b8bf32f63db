//! Baseline agents (uniform random, one-step look-ahead) and the agent
//! wrapper around a trained policy.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::engine::{GameId, GameRng, GameState, Seed};
use crate::error::{Error, Result};
use crate::rl::checkpoint;
use crate::rl::net::{log_softmax, PolicyNet, Workspace};

/// Agent selector as written on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Random,
    Osla,
    /// Policy loaded from a checkpoint file.
    Ppo(PathBuf),
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(AgentKind::Random),
            "osla" => Ok(AgentKind::Osla),
            p if p.starts_with("ppo:") && p.len() > 4 => Ok(AgentKind::Ppo(PathBuf::from(&p[4..]))),
            other => Err(Error::Config(format!(
                "unknown agent `{other}` (expected random, osla or ppo:<checkpoint>)"
            ))),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Random => f.write_str("random"),
            AgentKind::Osla => f.write_str("osla"),
            AgentKind::Ppo(p) => write!(f, "ppo:{}", p.display()),
        }
    }
}

impl serde::Serialize for AgentKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for AgentKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub trait Agent: Send {
    /// Picks a legal action for the player to move.
    fn act(&mut self, state: &GameState) -> Result<usize>;

    /// Restarts the agent's generator.
    fn reseed(&mut self, seed: Seed);
}

/// Uniform over the legal actions.
pub fn random_act(state: &GameState, rng: &mut GameRng) -> Result<usize> {
    let legal = state.legal_actions()?;
    Ok(legal[rng.random_range(0..legal.len())])
}

/// Value of `state` for `player`: the terminal reward once finished,
/// otherwise the game heuristic.
pub fn osla_score(state: &GameState, player: usize) -> f64 {
    if state.is_running() {
        state.heuristic(player)
    } else {
        state.terminal_reward(player) as f64
    }
}

/// Tries every legal action once on a copy of the state and returns a best
/// scoring one, ties broken uniformly. Each copy first resamples what the
/// mover cannot see and gets a fresh chance generator, so the look-ahead
/// never peeks at hidden cards or future draws.
pub fn osla_act(state: &GameState, rng: &mut GameRng) -> Result<usize> {
    let me = state.current_player()?;
    let legal = state.legal_actions()?;
    if legal.len() == 1 {
        return Ok(legal[0]);
    }
    let mut best = f64::NEG_INFINITY;
    let mut ties = Vec::new();
    for &a in &legal {
        let mut sim = state.copy_state();
        sim.redeterminize(me, rng);
        sim.reseed(rng.random());
        sim.apply(a)?;
        let score = osla_score(&sim, me);
        if score > best {
            best = score;
            ties.clear();
        }
        if score == best {
            ties.push(a);
        }
    }
    Ok(ties[rng.random_range(0..ties.len())])
}

/// Samples an action from the masked policy. Returns the leaf, its
/// log-probability and the critic value.
pub fn sample_policy(
    net: &PolicyNet<f32>,
    ws: &mut Workspace<f32>,
    obs: &[f32],
    legal: &[usize],
    rng: &mut GameRng,
) -> Result<(usize, f32, f32)> {
    if legal.is_empty() {
        return Err(Error::EmptyMask);
    }
    net.forward(obs, ws)?;
    let mut logits = Vec::with_capacity(legal.len());
    net.logits_for(ws, legal, &mut logits);
    let logp = log_softmax(&logits);
    let u: f64 = rng.random();
    let mut acc = 0.0f64;
    let mut pick = legal.len() - 1;
    for (k, &l) in logp.iter().enumerate() {
        acc += (l as f64).exp();
        if u < acc {
            pick = k;
            break;
        }
    }
    Ok((legal[pick], logp[pick], ws.value()))
}

pub struct RandomAgent {
    rng: GameRng,
}

impl RandomAgent {
    pub fn new(seed: Seed) -> Self {
        RandomAgent {
            rng: GameRng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, state: &GameState) -> Result<usize> {
        random_act(state, &mut self.rng)
    }

    fn reseed(&mut self, seed: Seed) {
        self.rng = GameRng::seed_from_u64(seed);
    }
}

pub struct OslaAgent {
    rng: GameRng,
}

impl OslaAgent {
    pub fn new(seed: Seed) -> Self {
        OslaAgent {
            rng: GameRng::seed_from_u64(seed),
        }
    }
}

impl Agent for OslaAgent {
    fn act(&mut self, state: &GameState) -> Result<usize> {
        osla_act(state, &mut self.rng)
    }

    fn reseed(&mut self, seed: Seed) {
        self.rng = GameRng::seed_from_u64(seed);
    }
}

pub struct PolicyAgent {
    net: Arc<PolicyNet<f32>>,
    ws: Workspace<f32>,
    obs: Vec<f32>,
    legal: Vec<usize>,
    rng: GameRng,
}

impl PolicyAgent {
    pub fn new(net: Arc<PolicyNet<f32>>, seed: Seed) -> Self {
        PolicyAgent {
            ws: net.workspace(),
            obs: vec![0.0; net.spec().obs_len],
            legal: Vec::new(),
            net,
            rng: GameRng::seed_from_u64(seed),
        }
    }
}

impl Agent for PolicyAgent {
    fn act(&mut self, state: &GameState) -> Result<usize> {
        let me = state.current_player()?;
        state.vectorize_into(me, &mut self.obs)?;
        state.legal_actions_into(&mut self.legal)?;
        sample_policy(&self.net, &mut self.ws, &self.obs, &self.legal, &mut self.rng).map(|(a, _, _)| a)
    }

    fn reseed(&mut self, seed: Seed) {
        self.rng = GameRng::seed_from_u64(seed);
    }
}

/// An [`AgentKind`] with its checkpoint loaded, cheap to instantiate.
#[derive(Clone, Debug)]
pub enum AgentSpec {
    Random,
    Osla,
    Policy(Arc<PolicyNet<f32>>),
}

impl AgentSpec {
    /// Loads checkpoints and checks that they fit the game configuration.
    pub fn resolve(kind: &AgentKind, game: GameId, n_players: usize) -> Result<AgentSpec> {
        match kind {
            AgentKind::Random => Ok(AgentSpec::Random),
            AgentKind::Osla => Ok(AgentSpec::Osla),
            AgentKind::Ppo(path) => {
                let (net, header) = checkpoint::load(path)?;
                if header.game != game || header.n_players != n_players {
                    return Err(Error::Config(format!(
                        "checkpoint {} was trained on {} with {} players, not {} with {}",
                        path.display(),
                        header.game,
                        header.n_players,
                        game,
                        n_players
                    )));
                }
                Ok(AgentSpec::Policy(Arc::new(net)))
            }
        }
    }

    pub fn build(&self, seed: Seed) -> Box<dyn Agent> {
        match self {
            AgentSpec::Random => Box::new(RandomAgent::new(seed)),
            AgentSpec::Osla => Box::new(OslaAgent::new(seed)),
            AgentSpec::Policy(net) => Box::new(PolicyAgent::new(Arc::clone(net), seed)),
        }
    }
}
