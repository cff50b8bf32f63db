//! Diamant, a push-your-luck cave exploration game.
//!
//! Five caves are explored in sequence. Each round every player commits a
//! decision in seat order (continue, return to camp, or the camp-only wait
//! action), then returners bank their gems and a new tile is revealed for
//! those still inside. The second hazard of a kind traps everyone left in
//! the cave, who lose their unbanked gems; one copy of that hazard leaves
//! the game. Highest banked total after the last cave wins.

use rand::Rng;
use serde_json::{json, Value};

use crate::action_space::{ActionTree, TreeBuilder};
use crate::engine::{GameId, GameRng, GameStatus, Rules};

pub const TREASURES: [u8; 15] = [1, 2, 3, 4, 5, 5, 7, 7, 9, 11, 11, 13, 14, 15, 17];
pub const TOTAL_GEMS: u32 = 124;
pub const HAZARD_KINDS: usize = 5;
pub const HAZARD_COPIES: u8 = 3;
pub const CAVES: usize = 5;

pub const CONTINUE: usize = 0;
pub const RETURN: usize = 1;
pub const WAIT: usize = 2;

pub const HAZARD_NAMES: [&str; HAZARD_KINDS] = ["snakes", "spiders", "lava", "boulders", "rams"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diamant {
    n: usize,
    cave: usize,
    treasure_deck: Vec<u8>,
    hazard_deck: [u8; HAZARD_KINDS],
    removed_hazards: [u8; HAZARD_KINDS],
    path_hazards: [u8; HAZARD_KINDS],
    path_treasures: u8,
    path_gems: u32,
    current_tile_gems: u32,
    in_cave: Vec<bool>,
    holding: Vec<u32>,
    banked: Vec<u32>,
    returning: Vec<bool>,
    decider: usize,
    status: GameStatus,
}

impl Diamant {
    pub fn cave(&self) -> usize {
        self.cave
    }

    pub fn in_cave(&self, player: usize) -> bool {
        self.in_cave[player]
    }

    pub fn holding(&self, player: usize) -> u32 {
        self.holding[player]
    }

    pub fn banked(&self, player: usize) -> u32 {
        self.banked[player]
    }

    /// Overwrites a committed-but-unrevealed decision. Test hook for
    /// hidden-information checks.
    pub fn set_committed_return(&mut self, player: usize, returning: bool) {
        self.returning[player] = returning;
    }

    pub fn action_tree(n_players: usize) -> ActionTree {
        let mut b = TreeBuilder::new("Diamant");
        b.category("cave", |b| {
            b.leaf("continue");
            b.leaf("return to camp");
        });
        b.category("camp", |b| {
            b.leaf("wait");
        });
        b.finish(GameId::Diamant, n_players)
    }

    fn start_cave(&mut self, rng: &mut GameRng) {
        self.treasure_deck = TREASURES.to_vec();
        for k in 0..HAZARD_KINDS {
            self.hazard_deck[k] = HAZARD_COPIES - self.removed_hazards[k];
        }
        self.path_hazards = [0; HAZARD_KINDS];
        self.path_treasures = 0;
        self.path_gems = 0;
        self.current_tile_gems = 0;
        self.in_cave.iter_mut().for_each(|c| *c = true);
        self.holding.iter_mut().for_each(|h| *h = 0);
        let trapped = self.reveal(rng);
        debug_assert!(!trapped, "first tile of a cave cannot trap");
    }

    /// Reveals one tile; returns true when it springs a trap.
    fn reveal(&mut self, rng: &mut GameRng) -> bool {
        let hazards: usize = self.hazard_deck.iter().map(|&h| h as usize).sum();
        let total = self.treasure_deck.len() + hazards;
        debug_assert!(total > 0);
        let mut pick = rng.random_range(0..total);
        if pick < self.treasure_deck.len() {
            let value = self.treasure_deck.remove(pick) as u32;
            let explorers = self.in_cave.iter().filter(|&&c| c).count() as u32;
            let share = value / explorers;
            for p in 0..self.n {
                if self.in_cave[p] {
                    self.holding[p] += share;
                }
            }
            self.path_treasures += 1;
            self.current_tile_gems = value % explorers;
            self.path_gems += self.current_tile_gems;
            return false;
        }
        pick -= self.treasure_deck.len();
        let mut kind = 0;
        while pick >= self.hazard_deck[kind] as usize {
            pick -= self.hazard_deck[kind] as usize;
            kind += 1;
        }
        self.hazard_deck[kind] -= 1;
        self.current_tile_gems = 0;
        if self.path_hazards[kind] > 0 {
            self.removed_hazards[kind] += 1;
            for p in 0..self.n {
                if self.in_cave[p] {
                    self.holding[p] = 0;
                    self.in_cave[p] = false;
                }
            }
            return true;
        }
        self.path_hazards[kind] += 1;
        false
    }

    fn resolve_round(&mut self, rng: &mut GameRng) {
        let leavers: Vec<usize> = (0..self.n)
            .filter(|&p| self.in_cave[p] && self.returning[p])
            .collect();
        if !leavers.is_empty() {
            let share = self.path_gems / leavers.len() as u32;
            self.path_gems %= leavers.len() as u32;
            self.current_tile_gems = self.current_tile_gems.min(self.path_gems);
            for &p in &leavers {
                self.banked[p] += self.holding[p] + share;
                self.holding[p] = 0;
                self.in_cave[p] = false;
            }
        }
        self.returning.iter_mut().for_each(|r| *r = false);
        let explorers = self.in_cave.iter().any(|&c| c);
        if !explorers || self.reveal(rng) {
            self.end_cave(rng);
        }
    }

    fn end_cave(&mut self, rng: &mut GameRng) {
        self.cave += 1;
        if self.cave == CAVES {
            self.status = GameStatus::from_scores(&self.banked);
        } else {
            self.start_cave(rng);
        }
    }

    fn rel(&self, observer: usize, offset: usize) -> usize {
        (observer + offset) % self.n
    }
}

impl Rules for Diamant {
    const ID: GameId = GameId::Diamant;

    fn setup(n_players: usize, rng: &mut GameRng) -> Self {
        let mut game = Diamant {
            n: n_players,
            cave: 0,
            treasure_deck: Vec::new(),
            hazard_deck: [0; HAZARD_KINDS],
            removed_hazards: [0; HAZARD_KINDS],
            path_hazards: [0; HAZARD_KINDS],
            path_treasures: 0,
            path_gems: 0,
            current_tile_gems: 0,
            in_cave: vec![true; n_players],
            holding: vec![0; n_players],
            banked: vec![0; n_players],
            returning: vec![false; n_players],
            decider: 0,
            status: GameStatus::Running,
        };
        game.start_cave(rng);
        game
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn current_player(&self) -> usize {
        self.decider
    }

    fn status(&self) -> &GameStatus {
        &self.status
    }

    fn legal_actions(&self, out: &mut Vec<usize>) {
        if self.in_cave[self.decider] {
            out.extend([CONTINUE, RETURN]);
        } else {
            out.push(WAIT);
        }
    }

    fn is_legal(&self, action: usize) -> bool {
        match action {
            CONTINUE | RETURN => self.in_cave[self.decider],
            WAIT => !self.in_cave[self.decider],
            _ => false,
        }
    }

    fn apply(&mut self, action: usize, rng: &mut GameRng) {
        if action == RETURN {
            self.returning[self.decider] = true;
        }
        self.decider += 1;
        if self.decider == self.n {
            self.decider = 0;
            self.resolve_round(rng);
        }
    }

    fn truncate(&mut self) {
        self.status = GameStatus::from_scores(&self.banked);
    }

    fn observation_len(n_players: usize) -> usize {
        19 + 3 * n_players
    }

    fn observe(&self, player: usize, out: &mut [f32]) {
        let n = self.n;
        let gems = TOTAL_GEMS as f32;
        for k in 0..HAZARD_KINDS {
            out[k] = self.path_hazards[k] as f32;
            out[5 + k] = self.removed_hazards[k] as f32 / HAZARD_COPIES as f32;
        }
        out[10] = self.path_treasures as f32 / TREASURES.len() as f32;
        out[11] = self.path_gems as f32 / gems;
        out[12] = self.current_tile_gems as f32 / 17.0;
        for off in 0..n {
            let p = self.rel(player, off);
            out[13 + off] = self.in_cave[p] as u8 as f32;
            out[13 + n + off] = self.holding[p] as f32 / gems;
            out[13 + 2 * n + off] = self.banked[p] as f32 / gems;
        }
        out[13 + 3 * n] = self.in_cave.iter().filter(|&&c| c).count() as f32 / n as f32;
        out[14 + 3 * n + self.cave.min(CAVES - 1)] = 1.0;
    }

    fn observation_json(&self, player: usize) -> Value {
        let players: Vec<Value> = (0..self.n)
            .map(|p| {
                json!({
                    "seat": p,
                    "in_cave": self.in_cave[p],
                    "holding": self.holding[p],
                    "banked": self.banked[p],
                })
            })
            .collect();
        json!({
            "player": player,
            "cave": self.cave,
            "to_move": self.decider,
            "path": {
                "hazards": self.path_hazards,
                "treasures": self.path_treasures,
                "gems": self.path_gems,
                "current_tile_gems": self.current_tile_gems,
            },
            "removed_hazards": self.removed_hazards,
            "players": players,
        })
    }

    fn canonical_json(&self) -> Value {
        json!({
            "cave": self.cave,
            "treasure_deck": self.treasure_deck,
            "hazard_deck": self.hazard_deck,
            "removed_hazards": self.removed_hazards,
            "path_hazards": self.path_hazards,
            "path_treasures": self.path_treasures,
            "path_gems": self.path_gems,
            "current_tile_gems": self.current_tile_gems,
            "in_cave": self.in_cave,
            "holding": self.holding,
            "banked": self.banked,
            "returning": self.returning,
            "decider": self.decider,
            "status": self.status,
        })
    }

    /// Banked gems plus, for gems still in the cave, the expectation over
    /// one more reveal: returning secures the holding and a share of the path,
    /// staying keeps the holding unless a repeated hazard turns up and adds a
    /// share of the next treasure.
    fn heuristic(&self, player: usize) -> f64 {
        let mut value = self.banked[player] as f64;
        if self.in_cave[player] {
            let explorers = self.in_cave.iter().filter(|&&c| c).count().max(1) as f64;
            let held = self.holding[player] as f64;
            if self.returning[player] {
                value += held + self.path_gems as f64 / explorers;
            } else {
                let hazards: u32 = self.hazard_deck.iter().map(|&h| h as u32).sum();
                let total = (self.treasure_deck.len() as u32 + hazards).max(1) as f64;
                let deadly: u32 = (0..HAZARD_KINDS)
                    .filter(|&k| self.path_hazards[k] > 0)
                    .map(|k| self.hazard_deck[k] as u32)
                    .sum();
                let treasure: u32 = self.treasure_deck.iter().map(|&t| t as u32).sum();
                value += (1.0 - deadly as f64 / total) * held + treasure as f64 / total / explorers;
            }
        }
        0.9 * value / TOTAL_GEMS as f64
    }

    /// Tiles are drawn from the generator at reveal time, so the only hidden
    /// information is what earlier deciders committed this round.
    fn redeterminize(&mut self, observer: usize, rng: &mut GameRng) {
        for p in 0..self.decider {
            if p != observer && self.in_cave[p] {
                self.returning[p] = rng.random_bool(0.5);
            }
        }
    }
}
