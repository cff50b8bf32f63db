#![allow(dead_code)]

pub mod numeric;
pub mod tictactoe;

use rand::{Rng, SeedableRng};
use tabletop_core::{GameId, GameRng, GameState};

pub const ALL_CONFIGS: [(GameId, usize); 5] = [
    (GameId::TicTacToe, 2),
    (GameId::Diamant, 3),
    (GameId::ExplodingKittens, 4),
    (GameId::LoveLetter, 4),
    (GameId::Stratego, 2),
];

/// Visits every state of uniformly random playouts until `count` states
/// have been seen, starting a new game (with a new seed) whenever one ends.
pub fn for_random_states(game: GameId, n: usize, count: usize, seed: u64, mut f: impl FnMut(&GameState)) {
    let mut rng = GameRng::seed_from_u64(seed);
    let mut seen = 0;
    let mut episode = 0u64;
    while seen < count {
        let mut s = GameState::reset(game, n, seed.wrapping_mul(1_000_003).wrapping_add(episode)).unwrap();
        episode += 1;
        while s.is_running() && seen < count {
            f(&s);
            seen += 1;
            let legal = s.legal_actions().unwrap();
            s.apply(legal[rng.random_range(0..legal.len())]).unwrap();
        }
        if seen < count {
            f(&s);
            seen += 1;
        }
    }
}

/// Plays one uniformly random game and returns its action list.
pub fn random_game(game: GameId, n: usize, seed: u64) -> (GameState, Vec<usize>) {
    let mut rng = GameRng::seed_from_u64(seed ^ 0xABCD);
    let mut s = GameState::reset(game, n, seed).unwrap();
    let mut actions = Vec::new();
    while s.is_running() {
        let legal = s.legal_actions().unwrap();
        let a = legal[rng.random_range(0..legal.len())];
        s.apply(a).unwrap();
        actions.push(a);
    }
    (s, actions)
}
