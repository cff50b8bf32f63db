//! Tic Tac Toe on a 3x3 grid. Player 0 places X and moves first.
//!
//! Action `i` marks cell `i` (row-major). The observation is the board from
//! the observer's side: +1 own mark, -1 opponent mark, 0 empty.

use serde_json::{json, Value};

use crate::action_space::{ActionTree, TreeBuilder};
use crate::engine::{GameId, GameRng, GameStatus, PlayerResult, Rules};

pub const CELLS: usize = 9;

pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TicTacToe {
    /// 0 empty, 1 player 0, 2 player 1.
    cells: [u8; CELLS],
    to_move: usize,
    status: GameStatus,
}

impl TicTacToe {
    pub fn cells(&self) -> &[u8; CELLS] {
        &self.cells
    }

    /// Builds a position directly; the side to move is inferred from the
    /// mark counts. Intended for tests and analysis tools.
    pub fn from_cells(cells: [u8; CELLS]) -> TicTacToe {
        let placed = cells.iter().filter(|&&c| c != 0).count();
        let mut game = TicTacToe {
            cells,
            to_move: placed % 2,
            status: GameStatus::Running,
        };
        game.update_status();
        game
    }

    fn winner(&self) -> Option<u8> {
        LINES.iter().find_map(|l| {
            let c = self.cells[l[0]];
            (c != 0 && c == self.cells[l[1]] && c == self.cells[l[2]]).then_some(c)
        })
    }

    fn update_status(&mut self) {
        if let Some(mark) = self.winner() {
            let winner = (mark - 1) as usize;
            self.status = GameStatus::Finished(
                (0..2)
                    .map(|p| if p == winner { PlayerResult::Win } else { PlayerResult::Loss })
                    .collect(),
            );
        } else if self.cells.iter().all(|&c| c != 0) {
            self.status = GameStatus::Finished(vec![PlayerResult::Tie; 2]);
        }
    }

    /// Lines where `mark` has two cells and the third is empty.
    fn open_twos(&self, mark: u8) -> usize {
        LINES
            .iter()
            .filter(|l| {
                let own = l.iter().filter(|&&i| self.cells[i] == mark).count();
                let empty = l.iter().filter(|&&i| self.cells[i] == 0).count();
                own == 2 && empty == 1
            })
            .count()
    }

    pub fn action_tree(n_players: usize) -> ActionTree {
        let mut b = TreeBuilder::new("TicTacToe");
        for row in 0..3 {
            b.category(format!("row {row}"), |b| {
                for col in 0..3 {
                    b.leaf(format!("col {col}"));
                }
            });
        }
        b.finish(GameId::TicTacToe, n_players)
    }
}

impl Rules for TicTacToe {
    const ID: GameId = GameId::TicTacToe;

    fn setup(_n_players: usize, _rng: &mut GameRng) -> Self {
        TicTacToe {
            cells: [0; CELLS],
            to_move: 0,
            status: GameStatus::Running,
        }
    }

    fn n_players(&self) -> usize {
        2
    }

    fn current_player(&self) -> usize {
        self.to_move
    }

    fn status(&self) -> &GameStatus {
        &self.status
    }

    fn legal_actions(&self, out: &mut Vec<usize>) {
        out.extend((0..CELLS).filter(|&i| self.cells[i] == 0));
    }

    fn is_legal(&self, action: usize) -> bool {
        action < CELLS && self.cells[action] == 0
    }

    fn apply(&mut self, action: usize, _rng: &mut GameRng) {
        self.cells[action] = self.to_move as u8 + 1;
        self.to_move = 1 - self.to_move;
        self.update_status();
    }

    fn truncate(&mut self) {
        self.status = GameStatus::Finished(vec![PlayerResult::Tie; 2]);
    }

    fn observation_len(_n_players: usize) -> usize {
        CELLS
    }

    fn observe(&self, player: usize, out: &mut [f32]) {
        let own = player as u8 + 1;
        for (o, &c) in out.iter_mut().zip(&self.cells) {
            *o = match c {
                0 => 0.0,
                c if c == own => 1.0,
                _ => -1.0,
            };
        }
    }

    fn observation_json(&self, player: usize) -> Value {
        let board: Vec<Value> = self
            .cells
            .iter()
            .map(|&c| match c {
                0 => Value::Null,
                c => json!(c - 1),
            })
            .collect();
        json!({ "player": player, "board": board, "to_move": self.to_move })
    }

    fn canonical_json(&self) -> Value {
        json!({ "cells": self.cells, "to_move": self.to_move, "status": self.status })
    }

    /// Called on the position after `player` moved: penalise leaving the
    /// opponent an immediate win, reward own open lines otherwise.
    fn heuristic(&self, player: usize) -> f64 {
        let own = player as u8 + 1;
        let other = 3 - own;
        if self.to_move != player && self.open_twos(other) > 0 {
            return -0.5;
        }
        0.2 * self.open_twos(own).min(2) as f64
    }

    fn redeterminize(&mut self, _observer: usize, _rng: &mut GameRng) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::GameState;

    #[test]
    fn fresh_board_is_empty_and_player_zero_moves() {
        let s = GameState::reset(GameId::TicTacToe, 2, 3).unwrap();
        assert_eq!(s.legal_actions().unwrap(), (0..9).collect::<Vec<_>>());
        assert_eq!(s.current_player().unwrap(), 0);
        assert_eq!(s.vectorize(0).unwrap(), vec![0.0; 9]);
    }

    #[test]
    fn alternates_and_shrinks_legal_set() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 3).unwrap();
        s.apply(4).unwrap();
        assert_eq!(s.current_player().unwrap(), 1);
        assert_eq!(s.legal_actions().unwrap().len(), 8);
        assert!(matches!(s.apply(4), Err(crate::Error::IllegalAction { action: 4, .. })));
        let obs = s.vectorize(1).unwrap();
        assert_eq!(obs[4], -1.0);
        assert_eq!(s.vectorize(0).unwrap()[4], 1.0);
    }

    #[test]
    fn full_board_without_line_is_a_tie() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        // X O X / X O O / O X X
        for a in [0, 1, 2, 4, 3, 5, 7, 6, 8] {
            s.apply(a).unwrap();
        }
        assert_eq!(s.status(), &GameStatus::Finished(vec![PlayerResult::Tie; 2]));
        assert_eq!(s.terminal_reward(0) + s.terminal_reward(1), 0.0);
    }

    #[test]
    fn completing_a_line_wins() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        for a in [3, 0, 4, 1, 5] {
            s.apply(a).unwrap();
        }
        assert_eq!(
            s.status(),
            &GameStatus::Finished(vec![PlayerResult::Win, PlayerResult::Loss])
        );
    }

    #[test]
    fn json_has_board_and_mover() {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        s.apply(2).unwrap();
        let doc = s.to_json(0).unwrap();
        assert_eq!(doc["board"].as_array().unwrap().len(), 9);
        assert_eq!(doc["board"][2], json!(0));
        assert_eq!(doc["to_move"], json!(1));
    }

    #[test]
    fn heuristic_flags_unblocked_threats() {
        // O threatens 0-1-2; X to move.
        let g = TicTacToe::from_cells([2, 2, 0, 1, 0, 0, 0, 0, 1]);
        let mut blocked = g.clone();
        blocked.apply(2, &mut rand::SeedableRng::seed_from_u64(0));
        let mut ignored = g.clone();
        ignored.apply(4, &mut rand::SeedableRng::seed_from_u64(0));
        assert!(blocked.heuristic(0) > ignored.heuristic(0));
    }
}
