//! Game-agnostic forward model.
//!
//! Every game implements [`Rules`]; [`GameState`] wraps a concrete game with
//! the shared bookkeeping (decision counter, episode cap, random generator)
//! and is the only type the rest of the crate talks to.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::games::{Diamant, ExplodingKittens, LoveLetter, Stratego, TicTacToe};

/// Generator used for every stochastic rule: PCG-64 with a 128-bit
/// multiplicative congruential state (`Pcg64Mcg`), seeded through
/// `SeedableRng::seed_from_u64`.
pub type GameRng = rand_pcg::Pcg64Mcg;

pub type Seed = u64;

/// Decision cap for games whose rules do not bound their length.
pub const CARD_GAME_DECISION_CAP: u32 = 1_000;
/// Stratego ends in a draw once this many decisions have been taken.
pub const STRATEGO_DECISION_CAP: u32 = 800;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameId {
    TicTacToe,
    Diamant,
    ExplodingKittens,
    LoveLetter,
    Stratego,
}

impl GameId {
    pub const ALL: [GameId; 5] = [
        GameId::TicTacToe,
        GameId::Diamant,
        GameId::ExplodingKittens,
        GameId::LoveLetter,
        GameId::Stratego,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GameId::TicTacToe => "TicTacToe",
            GameId::Diamant => "Diamant",
            GameId::ExplodingKittens => "ExplodingKittens",
            GameId::LoveLetter => "LoveLetter",
            GameId::Stratego => "Stratego",
        }
    }

    /// Inclusive range of supported player counts.
    pub fn player_range(self) -> (usize, usize) {
        match self {
            GameId::TicTacToe | GameId::Stratego => (2, 2),
            GameId::Diamant | GameId::ExplodingKittens | GameId::LoveLetter => (2, 4),
        }
    }

    pub fn check_players(self, n_players: usize) -> Result<()> {
        let (min, max) = self.player_range();
        if n_players < min || n_players > max {
            return Err(Error::UnsupportedPlayers {
                game: self,
                min,
                max,
                got: n_players,
            });
        }
        Ok(())
    }

    pub fn decision_cap(self) -> u32 {
        match self {
            GameId::Stratego => STRATEGO_DECISION_CAP,
            _ => CARD_GAME_DECISION_CAP,
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "tictactoe" => Ok(GameId::TicTacToe),
            "diamant" => Ok(GameId::Diamant),
            "explodingkittens" => Ok(GameId::ExplodingKittens),
            "loveletter" => Ok(GameId::LoveLetter),
            "stratego" => Ok(GameId::Stratego),
            _ => Err(Error::UnknownGame(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlayerResult {
    Win,
    Tie,
    Loss,
}

impl PlayerResult {
    pub fn reward(self) -> f32 {
        match self {
            PlayerResult::Win => 1.0,
            PlayerResult::Tie => 0.0,
            PlayerResult::Loss => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameStatus {
    Running,
    Finished(Vec<PlayerResult>),
}

impl GameStatus {
    pub fn is_running(&self) -> bool {
        matches!(self, GameStatus::Running)
    }

    pub fn result(&self, player: usize) -> Option<PlayerResult> {
        match self {
            GameStatus::Running => None,
            GameStatus::Finished(results) => results.get(player).copied(),
        }
    }

    /// Results where the unique top scorer wins, co-leaders tie and everyone
    /// else loses.
    pub fn from_scores<T: PartialOrd + Copy>(scores: &[T]) -> GameStatus {
        let best = scores
            .iter()
            .copied()
            .fold(None, |acc: Option<T>, s| match acc {
                Some(b) if b >= s => Some(b),
                _ => Some(s),
            });
        let Some(best) = best else {
            return GameStatus::Finished(Vec::new());
        };
        let leaders = scores.iter().filter(|&&s| s == best).count();
        GameStatus::Finished(
            scores
                .iter()
                .map(|&s| match (s == best, leaders) {
                    (true, 1) => PlayerResult::Win,
                    (true, _) => PlayerResult::Tie,
                    (false, _) => PlayerResult::Loss,
                })
                .collect(),
        )
    }
}

/// Rules of one concrete game.
///
/// Implementations never see the decision counter: [`GameState`] owns it and
/// calls [`Rules::truncate`] when the cap is hit.
pub trait Rules: Clone + fmt::Debug + Send + Sync + 'static {
    const ID: GameId;

    fn setup(n_players: usize, rng: &mut GameRng) -> Self;

    fn n_players(&self) -> usize;

    fn current_player(&self) -> usize;

    fn status(&self) -> &GameStatus;

    /// Appends the legal leaf ids in ascending order.
    fn legal_actions(&self, out: &mut Vec<usize>);

    fn is_legal(&self, action: usize) -> bool {
        let mut legal = Vec::new();
        self.legal_actions(&mut legal);
        legal.binary_search(&action).is_ok()
    }

    /// Applies a legal action. Callers guarantee legality.
    fn apply(&mut self, action: usize, rng: &mut GameRng);

    /// Ends a game that ran into the decision cap.
    fn truncate(&mut self);

    fn observation_len(n_players: usize) -> usize;

    /// Writes `player`'s view into `out` (length `observation_len`).
    fn observe(&self, player: usize, out: &mut [f32]);

    fn observation_json(&self, player: usize) -> Value;

    /// Full state, hidden information included. Keys are sorted on output.
    fn canonical_json(&self) -> Value;

    /// Progress estimate in (-1, 1) used by one-step look-ahead.
    fn heuristic(&self, player: usize) -> f64;

    /// Resamples information hidden from `observer` consistently with what
    /// they can see.
    fn redeterminize(&mut self, observer: usize, rng: &mut GameRng);
}

#[derive(Clone, Debug)]
pub enum AnyGame {
    TicTacToe(TicTacToe),
    Diamant(Diamant),
    ExplodingKittens(ExplodingKittens),
    LoveLetter(LoveLetter),
    Stratego(Stratego),
}

macro_rules! dispatch {
    ($value:expr, $g:ident => $body:expr) => {
        match $value {
            AnyGame::TicTacToe($g) => $body,
            AnyGame::Diamant($g) => $body,
            AnyGame::ExplodingKittens($g) => $body,
            AnyGame::LoveLetter($g) => $body,
            AnyGame::Stratego($g) => $body,
        }
    };
}

/// Observation length (or flattened tensor length) of a configuration.
pub fn observation_len(game: GameId, n_players: usize) -> usize {
    match game {
        GameId::TicTacToe => TicTacToe::observation_len(n_players),
        GameId::Diamant => Diamant::observation_len(n_players),
        GameId::ExplodingKittens => ExplodingKittens::observation_len(n_players),
        GameId::LoveLetter => LoveLetter::observation_len(n_players),
        GameId::Stratego => Stratego::observation_len(n_players),
    }
}

/// Authoritative state of one game instance.
#[derive(Clone, Debug)]
pub struct GameState {
    game: AnyGame,
    turn: u32,
    cap: u32,
    rng: GameRng,
}

impl GameState {
    /// Starts a new game. All setup randomness is drawn from `seed`; player 0
    /// acts first.
    pub fn reset(game: GameId, n_players: usize, seed: Seed) -> Result<GameState> {
        game.check_players(n_players)?;
        let mut rng = GameRng::seed_from_u64(seed);
        let cap = game.decision_cap();
        let game = match game {
            GameId::TicTacToe => AnyGame::TicTacToe(TicTacToe::setup(n_players, &mut rng)),
            GameId::Diamant => AnyGame::Diamant(Diamant::setup(n_players, &mut rng)),
            GameId::ExplodingKittens => {
                AnyGame::ExplodingKittens(ExplodingKittens::setup(n_players, &mut rng))
            }
            GameId::LoveLetter => AnyGame::LoveLetter(LoveLetter::setup(n_players, &mut rng)),
            GameId::Stratego => AnyGame::Stratego(Stratego::setup(n_players, &mut rng)),
        };
        Ok(GameState {
            game,
            turn: 0,
            cap,
            rng,
        })
    }

    /// Total decisions after which a running game is truncated.
    pub fn decision_cap(&self) -> u32 {
        self.cap
    }

    pub fn set_decision_cap(&mut self, cap: u32) {
        self.cap = cap.max(1);
    }

    pub fn game_id(&self) -> GameId {
        match &self.game {
            AnyGame::TicTacToe(_) => GameId::TicTacToe,
            AnyGame::Diamant(_) => GameId::Diamant,
            AnyGame::ExplodingKittens(_) => GameId::ExplodingKittens,
            AnyGame::LoveLetter(_) => GameId::LoveLetter,
            AnyGame::Stratego(_) => GameId::Stratego,
        }
    }

    pub fn n_players(&self) -> usize {
        dispatch!(&self.game, g => g.n_players())
    }

    /// Decisions taken so far, by any player.
    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn status(&self) -> &GameStatus {
        dispatch!(&self.game, g => g.status())
    }

    pub fn is_running(&self) -> bool {
        self.status().is_running()
    }

    pub fn current_player(&self) -> Result<usize> {
        if !self.is_running() {
            return Err(Error::TerminalState);
        }
        Ok(dispatch!(&self.game, g => g.current_player()))
    }

    pub fn legal_actions(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.legal_actions_into(&mut out)?;
        Ok(out)
    }

    /// Like [`GameState::legal_actions`] but reuses `out`.
    pub fn legal_actions_into(&self, out: &mut Vec<usize>) -> Result<()> {
        if !self.is_running() {
            return Err(Error::TerminalState);
        }
        out.clear();
        dispatch!(&self.game, g => g.legal_actions(out));
        Ok(())
    }

    pub fn is_legal(&self, action: usize) -> bool {
        self.is_running() && dispatch!(&self.game, g => g.is_legal(action))
    }

    /// Advances the game by one decision of the current player. On error the
    /// state is left untouched.
    pub fn apply(&mut self, action: usize) -> Result<()> {
        if !self.is_running() {
            return Err(Error::TerminalState);
        }
        if !self.is_legal(action) {
            return Err(Error::IllegalAction {
                action,
                legal: self.legal_actions()?,
            });
        }
        let rng = &mut self.rng;
        dispatch!(&mut self.game, g => g.apply(action, rng));
        self.turn += 1;
        if self.is_running() && self.turn >= self.cap {
            dispatch!(&mut self.game, g => g.truncate());
        }
        Ok(())
    }

    /// Functional form of [`GameState::apply`].
    pub fn successor(&self, action: usize) -> Result<GameState> {
        let mut next = self.clone();
        next.apply(action)?;
        Ok(next)
    }

    /// Deep, independent copy (generator included).
    pub fn copy_state(&self) -> GameState {
        self.clone()
    }

    /// +1/0/-1 once finished, 0 while running.
    pub fn terminal_reward(&self, player: usize) -> f32 {
        self.status().result(player).map_or(0.0, PlayerResult::reward)
    }

    pub fn observation_len(&self) -> usize {
        observation_len(self.game_id(), self.n_players())
    }

    pub fn vectorize(&self, player: usize) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.observation_len()];
        self.vectorize_into(player, &mut out)?;
        Ok(out)
    }

    pub fn vectorize_into(&self, player: usize, out: &mut [f32]) -> Result<()> {
        self.check_player(player)?;
        if out.len() != self.observation_len() {
            return Err(Error::Shape {
                expected: self.observation_len(),
                got: out.len(),
            });
        }
        out.fill(0.0);
        dispatch!(&self.game, g => g.observe(player, out));
        Ok(())
    }

    pub fn to_json(&self, player: usize) -> Result<Value> {
        self.check_player(player)?;
        Ok(dispatch!(&self.game, g => g.observation_json(player)))
    }

    /// Full state document used for hashing and debugging: game, player
    /// count, decision counter, generator state and the game payload.
    pub fn canonical_json(&self) -> Value {
        json!({
            "game": self.game_id().name(),
            "n_players": self.n_players(),
            "turn": self.turn,
            "rng": serde_json::to_string(&self.rng).expect("generator state serializes"),
            "state": dispatch!(&self.game, g => g.canonical_json()),
        })
    }

    /// SHA-256 of the canonical JSON (sorted keys, compact), hex encoded.
    pub fn canonical_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical_json()).expect("canonical state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn heuristic(&self, player: usize) -> f64 {
        dispatch!(&self.game, g => g.heuristic(player))
    }

    /// Replaces the generator so that future chance events differ from the
    /// ones this state would otherwise produce.
    pub fn reseed(&mut self, seed: Seed) {
        self.rng = GameRng::seed_from_u64(seed);
    }

    pub fn redeterminize(&mut self, observer: usize, rng: &mut GameRng) {
        dispatch!(&mut self.game, g => g.redeterminize(observer, rng));
    }

    pub fn inner(&self) -> &AnyGame {
        &self.game
    }

    /// Mutable access for state surgery in tests and tools. Changing the
    /// payload can break rule invariants; the engine does not re-validate.
    pub fn inner_mut(&mut self) -> &mut AnyGame {
        &mut self.game
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.n_players() {
            return Err(Error::PlayerOutOfRange {
                player,
                n_players: self.n_players(),
            });
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; derives independent child seeds from a base seed.
pub fn derive_seed(base: Seed, stream: u64) -> Seed {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_game_names_loosely() {
        assert_eq!("Tic-Tac-Toe".parse::<GameId>().unwrap(), GameId::TicTacToe);
        assert_eq!("exploding_kittens".parse::<GameId>().unwrap(), GameId::ExplodingKittens);
        assert!("chess".parse::<GameId>().is_err());
    }

    #[test]
    fn unsupported_player_count_names_game_and_range() {
        let err = GameState::reset(GameId::Stratego, 3, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Stratego") && msg.contains("2..=2"), "{msg}");
        assert!(GameState::reset(GameId::LoveLetter, 5, 1).is_err());
        assert!(GameState::reset(GameId::Diamant, 1, 1).is_err());
    }

    #[test]
    fn scores_to_results() {
        use PlayerResult::*;
        assert_eq!(GameStatus::from_scores(&[3, 5, 1]), GameStatus::Finished(vec![Loss, Win, Loss]));
        assert_eq!(GameStatus::from_scores(&[5, 5, 1]), GameStatus::Finished(vec![Tie, Tie, Loss]));
    }

    #[test]
    fn terminal_state_rejects_queries() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        for a in [0, 3, 1, 4, 2] {
            s.apply(a).unwrap();
        }
        assert!(!s.is_running());
        assert!(matches!(s.legal_actions(), Err(Error::TerminalState)));
        assert!(matches!(s.current_player(), Err(Error::TerminalState)));
        assert!(matches!(s.apply(5), Err(Error::TerminalState)));
        assert_eq!(s.terminal_reward(0), 1.0);
        assert_eq!(s.terminal_reward(1), -1.0);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, derive_seed(7, 0));
    }
}
