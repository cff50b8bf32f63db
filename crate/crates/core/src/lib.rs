//! Tabletop game engines with action trees, masked observations, baseline
//! agents, a learner-perspective environment runner and a masked PPO
//! trainer.
//!
//! The `parallel` feature (on by default) runs vectorised environments,
//! evaluation episodes and gradient chunks on rayon; without it everything
//! runs sequentially with identical results.

pub mod action_space;
pub mod agents;
pub mod bench;
pub mod engine;
pub mod env;
pub mod error;
pub mod exec;
pub mod games;
pub mod observation;
pub mod replay;
pub mod rl;

pub use action_space::{ActionMask, ActionTree};
pub use agents::{AgentKind, AgentSpec};
pub use engine::{derive_seed, AnyGame, GameId, GameRng, GameState, GameStatus, PlayerResult, Rules, Seed};
pub use env::{Env, EnvConfig, EpisodeInfo, EpisodeMetrics, SeatPolicy, StepResult, VecEnv};
pub use error::{Error, Result};
pub use exec::Execution;
pub use games::ObservationShape;
pub use replay::GameLog;
