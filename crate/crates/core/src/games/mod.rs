//! Rules of the supported games.

pub mod diamant;
pub mod exploding_kittens;
pub mod love_letter;
pub mod stratego;
pub mod tictactoe;

pub use diamant::Diamant;
pub use exploding_kittens::ExplodingKittens;
pub use love_letter::LoveLetter;
pub use stratego::Stratego;
pub use tictactoe::TicTacToe;

use serde::Serialize;

use crate::action_space::ActionTree;
use crate::engine::{observation_len, GameId};

pub(crate) fn build_action_tree(game: GameId, n_players: usize) -> ActionTree {
    match game {
        GameId::TicTacToe => TicTacToe::action_tree(n_players),
        GameId::Diamant => Diamant::action_tree(n_players),
        GameId::ExplodingKittens => ExplodingKittens::action_tree(n_players),
        GameId::LoveLetter => LoveLetter::action_tree(n_players),
        GameId::Stratego => Stratego::action_tree(n_players),
    }
}

/// Layout of an observation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObservationShape {
    Flat { len: usize },
    /// Channel-first planes, flattened as `[c][h][w]`.
    Planes { channels: usize, height: usize, width: usize },
}

impl ObservationShape {
    pub fn len(self) -> usize {
        match self {
            ObservationShape::Flat { len } => len,
            ObservationShape::Planes { channels, height, width } => channels * height * width,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            ObservationShape::Flat { len } => vec![len],
            ObservationShape::Planes { channels, height, width } => vec![channels, height, width],
        }
    }
}

pub fn observation_shape(game: GameId, n_players: usize) -> ObservationShape {
    match game {
        GameId::Stratego => ObservationShape::Planes {
            channels: stratego::PLANES,
            height: stratego::SIZE,
            width: stratego::SIZE,
        },
        _ => ObservationShape::Flat {
            len: observation_len(game, n_players),
        },
    }
}
