//! Stratego on the classic 10x10 board with two 40-piece armies.
//!
//! Player 0 deploys on rows 6..=9 and player 1 on rows 0..=3; the lakes sit
//! on rows 4 and 5. Each army uses one of three fixed deployments, possibly
//! mirrored, picked from the game seed. Ranks are only revealed by combat.
//!
//! Action `cell * 36 + dir * 9 + (distance - 1)` moves the piece on `cell`
//! in direction `dir` (up, right, down, left in board coordinates) by
//! `distance` squares. Only Scouts move further than one square.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::action_space::{ActionTree, TreeBuilder};
use crate::engine::{GameId, GameRng, GameStatus, PlayerResult, Rules};

pub const SIZE: usize = 10;
pub const CELLS: usize = SIZE * SIZE;
pub const DIRECTIONS: usize = 4;
pub const MAX_DISTANCE: usize = 9;
pub const ACTIONS_PER_CELL: usize = DIRECTIONS * MAX_DISTANCE;
pub const ACTION_COUNT: usize = CELLS * ACTIONS_PER_CELL;
pub const PLANES: usize = 27;
pub const RANKS: usize = 12;

pub const FLAG: u8 = 0;
pub const SPY: u8 = 1;
pub const SCOUT: u8 = 2;
pub const MINER: u8 = 3;
pub const MARSHAL: u8 = 10;
pub const BOMB: u8 = 11;

pub const RANK_NAMES: [&str; RANKS] = [
    "Flag", "Spy", "Scout", "Miner", "Sergeant", "Lieutenant", "Captain", "Major", "Colonel",
    "General", "Marshal", "Bomb",
];
pub const ARMY: [u8; RANKS] = [1, 1, 8, 5, 4, 4, 4, 3, 2, 1, 1, 6];
pub const ARMY_SIZE: usize = 40;

const DIR_NAMES: [&str; DIRECTIONS] = ["up", "right", "down", "left"];
const DELTAS: [(isize, isize); DIRECTIONS] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Deployments, back row first. `Y` is the Spy, `M` the Marshal and digits
/// are ranks 2..=9.
pub const DEPLOYMENTS: [[&str; 4]; 3] = [
    ["FB3B445523", "B36655244B", "27736682B3", "292MBY7822"],
    ["BFB32543B2", "3B46526345", "627829B674", "2M527Y8B23"],
    ["34BFB43255", "263B67B542", "72869236B5", "2YM2783B24"],
];

pub fn is_lake(cell: usize) -> bool {
    let (r, c) = (cell / SIZE, cell % SIZE);
    (r == 4 || r == 5) && matches!(c, 2 | 3 | 6 | 7)
}

fn rank_of(symbol: char) -> u8 {
    match symbol {
        'F' => FLAG,
        'Y' => SPY,
        'M' => MARSHAL,
        'B' => BOMB,
        d => d.to_digit(10).expect("deployment symbol") as u8,
    }
}

pub fn deployment(index: usize) -> [[u8; SIZE]; 4] {
    let mut rows = [[0; SIZE]; 4];
    for (row, text) in rows.iter_mut().zip(DEPLOYMENTS[index]) {
        let ranks: Vec<u8> = text.chars().map(rank_of).collect();
        row.copy_from_slice(&ranks);
    }
    rows
}

pub fn encode(cell: usize, dir: usize, distance: usize) -> usize {
    cell * ACTIONS_PER_CELL + dir * MAX_DISTANCE + distance - 1
}

pub fn decode(action: usize) -> (usize, usize, usize) {
    let cell = action / ACTIONS_PER_CELL;
    let rest = action % ACTIONS_PER_CELL;
    (cell, rest / MAX_DISTANCE, rest % MAX_DISTANCE + 1)
}

fn step(cell: usize, dir: usize, distance: usize) -> Option<usize> {
    let (dr, dc) = DELTAS[dir];
    let r = (cell / SIZE) as isize + dr * distance as isize;
    let c = (cell % SIZE) as isize + dc * distance as isize;
    ((0..SIZE as isize).contains(&r) && (0..SIZE as isize).contains(&c))
        .then(|| r as usize * SIZE + c as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Piece {
    pub owner: u8,
    pub rank: u8,
    pub revealed: bool,
}

impl Piece {
    fn movable(self) -> bool {
        self.rank != FLAG && self.rank != BOMB
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combat {
    AttackerWins,
    DefenderWins,
    BothLost,
}

pub fn combat(attacker: u8, defender: u8) -> Combat {
    match (attacker, defender) {
        (_, FLAG) => Combat::AttackerWins,
        (MINER, BOMB) => Combat::AttackerWins,
        (_, BOMB) => Combat::DefenderWins,
        (SPY, MARSHAL) => Combat::AttackerWins,
        (a, d) if a > d => Combat::AttackerWins,
        (a, d) if a < d => Combat::DefenderWins,
        _ => Combat::BothLost,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratego {
    board: Vec<Option<Piece>>,
    to_move: usize,
    captures: [u32; 2],
    status: GameStatus,
}

impl Stratego {
    pub fn board(&self) -> &[Option<Piece>] {
        &self.board
    }

    pub fn piece(&self, cell: usize) -> Option<Piece> {
        self.board[cell]
    }

    /// Builds a position from an explicit board; intended for tests.
    pub fn from_board(board: Vec<Option<Piece>>, to_move: usize) -> Stratego {
        assert_eq!(board.len(), CELLS);
        let mut game = Stratego {
            board,
            to_move,
            captures: [0; 2],
            status: GameStatus::Running,
        };
        game.check_immobile();
        game
    }

    pub fn action_tree(n_players: usize) -> ActionTree {
        let mut b = TreeBuilder::new("Stratego");
        for cell in 0..CELLS {
            b.category(format!("r{}c{}", cell / SIZE, cell % SIZE), |b| {
                for dir in DIR_NAMES {
                    b.category(dir, |b| {
                        for d in 1..=MAX_DISTANCE {
                            b.leaf(format!("{d}"));
                        }
                    });
                }
            });
        }
        b.finish(GameId::Stratego, n_players)
    }

    fn deploy(&mut self, player: u8, rng: &mut GameRng) {
        let rows = deployment(rng.random_range(0..DEPLOYMENTS.len()));
        let mirror = rng.random_bool(0.5);
        for (depth, row) in rows.iter().enumerate() {
            let r = if player == 0 { SIZE - 1 - depth } else { depth };
            for (c, &rank) in row.iter().enumerate() {
                let c = if mirror { SIZE - 1 - c } else { c };
                self.board[r * SIZE + c] = Some(Piece {
                    owner: player,
                    rank,
                    revealed: false,
                });
            }
        }
    }

    fn moves(&self, player: usize, out: &mut Vec<usize>) {
        for cell in 0..CELLS {
            let Some(piece) = self.board[cell] else { continue };
            if piece.owner as usize != player || !piece.movable() {
                continue;
            }
            let reach = if piece.rank == SCOUT { MAX_DISTANCE } else { 1 };
            for dir in 0..DIRECTIONS {
                for d in 1..=reach {
                    let Some(to) = step(cell, dir, d) else { break };
                    if is_lake(to) {
                        break;
                    }
                    match self.board[to] {
                        Some(p) if p.owner as usize == player => break,
                        Some(_) => {
                            out.push(encode(cell, dir, d));
                            break;
                        }
                        None => out.push(encode(cell, dir, d)),
                    }
                }
            }
        }
    }

    fn has_moves(&self, player: usize) -> bool {
        let mut buf = Vec::new();
        self.moves(player, &mut buf);
        !buf.is_empty()
    }

    fn win_for(&mut self, winner: usize) {
        self.status = GameStatus::Finished(
            (0..2)
                .map(|p| if p == winner { PlayerResult::Win } else { PlayerResult::Loss })
                .collect(),
        );
    }

    fn check_immobile(&mut self) {
        if self.status.is_running() && !self.has_moves(self.to_move) {
            self.win_for(1 - self.to_move);
        }
    }

    fn material(&self, player: usize) -> usize {
        self.board.iter().flatten().filter(|p| p.owner as usize == player).count()
    }
}

impl Rules for Stratego {
    const ID: GameId = GameId::Stratego;

    fn setup(_n_players: usize, rng: &mut GameRng) -> Self {
        let mut game = Stratego {
            board: vec![None; CELLS],
            to_move: 0,
            captures: [0; 2],
            status: GameStatus::Running,
        };
        game.deploy(0, rng);
        game.deploy(1, rng);
        game
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
        self.moves(self.to_move, out);
    }

    fn apply(&mut self, action: usize, _rng: &mut GameRng) {
        let (from, dir, d) = decode(action);
        let to = step(from, dir, d).expect("legal move stays on board");
        let mut mover = self.board[from].take().expect("legal move has a piece");
        match self.board[to] {
            None => self.board[to] = Some(mover),
            Some(mut defender) => {
                self.captures[mover.owner as usize] += 1;
                mover.revealed = true;
                defender.revealed = true;
                match combat(mover.rank, defender.rank) {
                    Combat::AttackerWins => {
                        self.board[to] = Some(mover);
                        if defender.rank == FLAG {
                            self.win_for(mover.owner as usize);
                            return;
                        }
                    }
                    Combat::DefenderWins => self.board[to] = Some(defender),
                    Combat::BothLost => self.board[to] = None,
                }
            }
        }
        self.to_move = 1 - self.to_move;
        self.check_immobile();
    }

    fn truncate(&mut self) {
        self.status = GameStatus::Finished(vec![PlayerResult::Tie; 2]);
    }

    fn observation_len(_n_players: usize) -> usize {
        PLANES * CELLS
    }

    fn observe(&self, player: usize, out: &mut [f32]) {
        let plane = |p: usize, cell: usize| p * CELLS + cell;
        for cell in 0..CELLS {
            if is_lake(cell) {
                out[plane(26, cell)] = 1.0;
            }
            let Some(piece) = self.board[cell] else { continue };
            if piece.owner as usize == player {
                out[plane(piece.rank as usize, cell)] = 1.0;
                if piece.revealed {
                    out[plane(12, cell)] = 1.0;
                }
            } else if piece.revealed {
                out[plane(13 + piece.rank as usize, cell)] = 1.0;
            } else {
                out[plane(25, cell)] = 1.0;
            }
        }
    }

    fn observation_json(&self, player: usize) -> Value {
        let board: Vec<Value> = (0..CELLS)
            .map(|cell| match self.board[cell] {
                _ if is_lake(cell) => json!("lake"),
                None => Value::Null,
                Some(p) if p.owner as usize == player || p.revealed => json!({
                    "owner": p.owner,
                    "rank": RANK_NAMES[p.rank as usize],
                    "revealed": p.revealed,
                }),
                Some(p) => json!({ "owner": p.owner, "rank": Value::Null, "revealed": false }),
            })
            .collect();
        json!({
            "player": player,
            "to_move": self.to_move,
            "board": board,
            "captures": self.captures,
        })
    }

    fn canonical_json(&self) -> Value {
        let board: Vec<Value> = self
            .board
            .iter()
            .map(|p| match p {
                None => Value::Null,
                Some(p) => json!([p.owner, p.rank, p.revealed]),
            })
            .collect();
        json!({
            "board": board,
            "to_move": self.to_move,
            "captures": self.captures,
            "status": self.status,
        })
    }

    fn heuristic(&self, player: usize) -> f64 {
        let own = self.material(player) as f64;
        let other = self.material(1 - player) as f64;
        0.9 * (own - other) / ARMY_SIZE as f64
    }

    /// Shuffles the ranks of the opponent's unrevealed pieces.
    fn redeterminize(&mut self, observer: usize, rng: &mut GameRng) {
        let hidden: Vec<usize> = (0..CELLS)
            .filter(|&c| matches!(self.board[c], Some(p) if p.owner as usize != observer && !p.revealed))
            .collect();
        let mut ranks: Vec<u8> = hidden.iter().map(|&c| self.board[c].unwrap().rank).collect();
        ranks.shuffle(rng);
        for (&cell, rank) in hidden.iter().zip(ranks) {
            if let Some(p) = self.board[cell].as_mut() {
                p.rank = rank;
            }
        }
    }
}
