use thiserror::Error;

use crate::engine::GameId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{game} supports {min}..={max} players, got {got}")]
    UnsupportedPlayers {
        game: GameId,
        min: usize,
        max: usize,
        got: usize,
    },

    #[error("unknown game `{0}` (supported: tictactoe, diamant, explodingkittens, loveletter, stratego)")]
    UnknownGame(String),

    #[error("illegal action {action}; legal actions are {legal:?}")]
    IllegalAction { action: usize, legal: Vec<usize> },

    #[error("the game is finished")]
    TerminalState,

    #[error("action tree for {tree} ({tree_players} players) cannot be used with a {state} state ({state_players} players)")]
    TreeMismatch {
        tree: GameId,
        tree_players: usize,
        state: GameId,
        state_players: usize,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("action mask has no legal action")]
    EmptyMask,

    #[error("player {player} out of range for a {n_players}-player game")]
    PlayerOutOfRange { player: usize, n_players: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, minibatch {minibatch}: policy {policy_loss}, value {value_loss}, entropy {entropy}")]
    NonFiniteLoss {
        epoch: usize,
        minibatch: usize,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
    },

    #[error("environment error in {game} (seed {seed}, learner step {step}): {source}")]
    Env {
        game: GameId,
        seed: u64,
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
