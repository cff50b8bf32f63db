//! Recorded games: the seed and the action sequence, plus the terminal
//! state hash they must reproduce.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{GameId, GameState, PlayerResult, Seed};
use crate::error::{Error, Result};

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub format_version: u32,
    pub game: GameId,
    pub n_players: usize,
    pub seed: Seed,
    /// Decision cap the game ran under.
    pub max_decisions: u32,
    pub actions: Vec<usize>,
    /// Per-seat results, empty if the game was still running.
    pub results: Vec<PlayerResult>,
    /// Canonical hash of the final state.
    pub hash: String,
}

impl GameLog {
    /// Records `state`, reached from `GameState::reset(.., seed)` by `actions`.
    pub fn record(state: &GameState, seed: Seed, actions: &[usize]) -> GameLog {
        GameLog {
            format_version: LOG_FORMAT_VERSION,
            game: state.game_id(),
            n_players: state.n_players(),
            seed,
            max_decisions: state.decision_cap(),
            actions: actions.to_vec(),
            results: match state.status() {
                crate::GameStatus::Finished(r) => r.clone(),
                crate::GameStatus::Running => Vec::new(),
            },
            hash: state.canonical_hash(),
        }
    }

    /// Re-executes the log from its seed.
    pub fn replay(&self) -> Result<GameState> {
        if self.format_version != LOG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported game log version {} (expected {LOG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut state = GameState::reset(self.game, self.n_players, self.seed)?;
        state.set_decision_cap(self.max_decisions);
        for &a in &self.actions {
            state.apply(a)?;
        }
        Ok(state)
    }

    /// Replays and compares the final hash. Returns the recomputed hash.
    pub fn verify(&self) -> Result<(bool, String)> {
        let hash = self.replay()?.canonical_hash();
        Ok((hash == self.hash, hash))
    }
}

/// One JSON document per line.
pub fn write_jsonl<W: Write>(out: &mut W, logs: &[GameLog]) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut *out, log)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<GameLog>> {
    let mut logs = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            logs.push(serde_json::from_str(&line)?);
        }
    }
    Ok(logs)
}
