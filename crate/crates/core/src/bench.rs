//! Engine throughput: random learner against random opponents through the
//! full environment path (observation and mask included).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::engine::{GameId, GameRng, Seed};
use crate::env::{Env, EnvConfig};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub game: GameId,
    pub n_players: usize,
    pub steps: u64,
    pub episodes: u64,
    pub seconds: f64,
    pub steps_per_sec: f64,
}

/// Runs until `budget` elapses or `max_steps` learner steps are taken.
pub fn random_playout(
    game: GameId,
    n_players: usize,
    budget: Duration,
    max_steps: Option<u64>,
    seed: Seed,
) -> Result<BenchReport> {
    let mut env = Env::new(EnvConfig::new(game, n_players, AgentKind::Random, seed))?;
    let mut rng = GameRng::seed_from_u64(seed);
    let mut current = env.reset()?;
    let mut legal = current.mask.legal_actions();
    let (mut steps, mut episodes) = (0u64, 0u64);
    let started = Instant::now();
    loop {
        let action = legal[rng.random_range(0..legal.len())];
        current = env.step_auto_reset(action)?;
        legal.clear();
        legal.extend((0..current.mask.len()).filter(|&a| current.mask.is_legal(a)));
        steps += 1;
        episodes += u64::from(current.done);
        if max_steps.is_some_and(|m| steps >= m) || (steps % 256 == 0 && started.elapsed() >= budget) {
            break;
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    Ok(BenchReport {
        game,
        n_players,
        steps,
        episodes,
        seconds,
        steps_per_sec: steps as f64 / seconds.max(1e-9),
    })
}
