//! Exhaustive comparison of the Tic Tac Toe engine with a separately written
//! brute-force reference.

mod common;

use std::collections::HashMap;

use tabletop_core::{GameId, GameState, GameStatus, PlayerResult};

use common::tictactoe::{reachable, Board};

#[test]
fn reference_counts_match_known_totals() {
    let all = reachable();
    assert_eq!(all.len(), 5478);
    assert_eq!(all.keys().filter(|b| b.terminal()).count(), 958);
    assert_eq!(Board::empty().value(&mut HashMap::new()), 0);
}

#[test]
fn engine_agrees_on_every_reachable_position() {
    let all = reachable();
    for (board, path) in &all {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        for &m in path {
            s.apply(m).unwrap();
        }
        assert_eq!(!s.is_running(), board.terminal(), "{board:?}");
        match board.winner() {
            Some(w) => {
                let winner = usize::from(w == b'O');
                assert_eq!(s.status().result(winner), Some(PlayerResult::Win), "{board:?}");
                assert_eq!(s.status().result(1 - winner), Some(PlayerResult::Loss), "{board:?}");
            }
            None if board.terminal() => {
                assert_eq!(s.status(), &GameStatus::Finished(vec![PlayerResult::Tie; 2]));
            }
            None => {
                assert_eq!(s.legal_actions().unwrap(), board.moves(), "{board:?}");
                assert_eq!(s.current_player().unwrap(), usize::from(board.to_move() == b'O'));
            }
        }
    }
}

#[test]
fn engine_observation_matches_reference_board() {
    for (board, path) in reachable() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        for &m in &path {
            s.apply(m).unwrap();
        }
        let x_view = s.vectorize(0).unwrap();
        for i in 0..9 {
            let expected = match board.0[i] {
                b'X' => 1.0,
                b'O' => -1.0,
                _ => 0.0,
            };
            assert_eq!(x_view[i], expected);
        }
    }
}
