//! Observation encoding for the acting player.

use serde_json::Value;

use crate::engine::GameState;
use crate::error::Result;
pub use crate::games::{observation_shape, ObservationShape};

/// Fixed-shape numeric view of `state` from `player`'s seat.
pub fn vectorize(state: &GameState, player: usize) -> Result<Vec<f32>> {
    state.vectorize(player)
}

/// Structured view carrying the same information as [`vectorize`].
pub fn to_json(state: &GameState, player: usize) -> Result<Value> {
    state.to_json(player)
}
