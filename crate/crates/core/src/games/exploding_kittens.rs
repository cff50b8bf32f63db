//! Exploding Kittens (base deck, 2-4 players).
//!
//! A turn is any number of plays followed by a draw. Every played card opens
//! a Nope window: each other live player holding a Nope gets one reactive
//! decision in seat order, and a Nope reopens the window for everyone else,
//! so chains resolve by parity. Players without a Nope are never asked.
//! Favor hands the decision to its target, who picks the card to give.
//! Drawing a kitten with a Defuse in hand moves to a placement decision;
//! without one the player is eliminated. Last player alive wins.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::action_space::{ActionTree, TreeBuilder};
use crate::engine::{GameId, GameRng, GameStatus, PlayerResult, Rules};

pub const CARD_TYPES: usize = 13;
pub const KITTEN: u8 = 0;
pub const DEFUSE: u8 = 1;
pub const NOPE: u8 = 2;
pub const ATTACK: u8 = 3;
pub const SKIP: u8 = 4;
pub const FAVOR: u8 = 5;
pub const SHUFFLE: u8 = 6;
pub const SEE_THE_FUTURE: u8 = 7;
pub const FIRST_CAT: u8 = 8;
pub const CATS: usize = 5;

pub const CARD_NAMES: [&str; CARD_TYPES] = [
    "Exploding Kitten",
    "Defuse",
    "Nope",
    "Attack",
    "Skip",
    "Favor",
    "Shuffle",
    "See the Future",
    "Taco Cat",
    "Cattermelon",
    "Hairy Potato Cat",
    "Beard Cat",
    "Rainbow Ralphing Cat",
];

/// Copies of each card in the full box.
pub const DECK_COUNTS: [u8; CARD_TYPES] = [4, 6, 5, 4, 4, 4, 4, 5, 4, 4, 4, 4, 4];
pub const TOTAL_CARDS: usize = 56;
pub const STARTING_HAND: usize = 7;
/// Defuses shuffled into the draw pile on top of one per player.
pub const SPARE_DEFUSES: u8 = 2;
pub const FUTURE_CARDS: usize = 3;
/// Insert depths offered when defusing, plus one "bottom" leaf.
pub const INSERT_DEPTHS: usize = 5;

const HAND_SCALE: f32 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Effect {
    Attack,
    Skip,
    Favor { target: usize },
    Shuffle,
    SeeTheFuture,
    CatPair { cat: u8, target: usize },
}

impl Effect {
    fn kind(self) -> usize {
        match self {
            Effect::Attack => 0,
            Effect::Skip => 1,
            Effect::Favor { .. } => 2,
            Effect::Shuffle => 3,
            Effect::SeeTheFuture => 4,
            Effect::CatPair { .. } => 5,
        }
    }

    fn target(self) -> Option<usize> {
        match self {
            Effect::Favor { target } | Effect::CatPair { target, .. } => Some(target),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Pending {
    pub actor: usize,
    pub effect: Effect,
    pub nopes: u8,
    /// Players still to be asked, front first.
    pub responders: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Phase {
    Main,
    Nope,
    FavorGive { requester: usize, giver: usize },
    Defuse,
}

impl Phase {
    fn index(self) -> usize {
        match self {
            Phase::Main => 0,
            Phase::Nope => 1,
            Phase::FavorGive { .. } => 2,
            Phase::Defuse => 3,
        }
    }
}

/// Flat action layout for `n` players (`m = n - 1` opponents).
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    m: usize,
}

impl Layout {
    pub const DRAW: usize = 0;
    pub const ATTACK: usize = 1;
    pub const SKIP: usize = 2;
    pub const SHUFFLE: usize = 3;
    pub const SEE_THE_FUTURE: usize = 4;
    const FAVOR: usize = 5;

    pub fn new(n_players: usize) -> Self {
        Layout { m: n_players - 1 }
    }

    pub fn favor(self, offset: usize) -> usize {
        Self::FAVOR + offset - 1
    }

    fn cat_base(self) -> usize {
        Self::FAVOR + self.m
    }

    pub fn cat_pair(self, cat: usize, offset: usize) -> usize {
        self.cat_base() + cat * self.m + offset - 1
    }

    pub fn nope(self) -> usize {
        self.cat_base() + CATS * self.m
    }

    pub fn pass(self) -> usize {
        self.nope() + 1
    }

    /// `card` in 1..13.
    pub fn give(self, card: u8) -> usize {
        self.pass() + card as usize
    }

    pub fn insert(self, depth: usize) -> usize {
        self.give(CARD_TYPES as u8 - 1) + 1 + depth
    }

    pub fn bottom(self) -> usize {
        self.insert(INSERT_DEPTHS)
    }

    pub fn len(self) -> usize {
        self.bottom() + 1
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplodingKittens {
    n: usize,
    hands: Vec<[u8; CARD_TYPES]>,
    /// Top of the pile is the last element.
    pile: Vec<u8>,
    discard: [u8; CARD_TYPES],
    alive: Vec<bool>,
    turn_player: usize,
    turns_left: u8,
    phase: Phase,
    pending: Option<Pending>,
    /// Cards each player has seen on top of the pile, top first.
    known_top: Vec<Vec<u8>>,
    status: GameStatus,
}

impl ExplodingKittens {
    pub fn hand(&self, player: usize) -> &[u8; CARD_TYPES] {
        &self.hands[player]
    }

    pub fn pile(&self) -> &[u8] {
        &self.pile
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn alive(&self, player: usize) -> bool {
        self.alive[player]
    }

    pub fn kittens_in_pile(&self) -> usize {
        self.pile.iter().filter(|&&c| c == KITTEN).count()
    }

    /// Test hook: replaces hands and pile wholesale.
    pub fn set_cards(&mut self, hands: Vec<[u8; CARD_TYPES]>, pile: Vec<u8>) {
        self.hands = hands;
        self.pile = pile;
        self.known_top.iter_mut().for_each(Vec::clear);
    }

    pub fn action_tree(n_players: usize) -> ActionTree {
        let m = n_players - 1;
        let mut b = TreeBuilder::new("ExplodingKittens");
        b.leaf("draw");
        b.category("play", |b| {
            b.leaf("Attack");
            b.leaf("Skip");
            b.leaf("Shuffle");
            b.leaf("See the Future");
            b.category("Favor", |b| {
                for o in 1..=m {
                    b.leaf(format!("opponent+{o}"));
                }
            });
            for cat in 0..CATS {
                b.category(format!("pair {}", CARD_NAMES[FIRST_CAT as usize + cat]), |b| {
                    for o in 1..=m {
                        b.leaf(format!("opponent+{o}"));
                    }
                });
            }
        });
        b.category("react", |b| {
            b.leaf("Nope");
            b.leaf("pass");
        });
        b.category("give", |b| {
            for card in 1..CARD_TYPES {
                b.leaf(CARD_NAMES[card]);
            }
        });
        b.category("place kitten", |b| {
            for d in 0..INSERT_DEPTHS {
                b.leaf(format!("depth {d}"));
            }
            b.leaf("bottom");
        });
        b.finish(GameId::ExplodingKittens, n_players)
    }

    fn layout(&self) -> Layout {
        Layout::new(self.n)
    }

    fn target(&self, actor: usize, offset: usize) -> usize {
        (actor + offset) % self.n
    }

    fn next_alive(&self, from: usize) -> usize {
        (1..=self.n)
            .map(|o| (from + o) % self.n)
            .find(|&p| self.alive[p])
            .expect("a live player remains")
    }

    fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    fn responders_after(&self, from: usize) -> Vec<usize> {
        (1..self.n)
            .map(|o| (from + o) % self.n)
            .filter(|&p| self.alive[p] && self.hands[p][NOPE as usize] > 0)
            .collect()
    }

    fn end_one_turn(&mut self) {
        self.turns_left = self.turns_left.saturating_sub(1);
        if self.turns_left == 0 || !self.alive[self.turn_player] {
            self.turn_player = self.next_alive(self.turn_player);
            self.turns_left = 1;
        }
    }

    fn discard_card(&mut self, player: usize, card: u8) {
        self.hands[player][card as usize] -= 1;
        self.discard[card as usize] += 1;
    }

    fn draw(&mut self) {
        let p = self.turn_player;
        let card = self.pile.pop().expect("pile holds a kitten per extra player");
        for known in &mut self.known_top {
            if !known.is_empty() {
                known.remove(0);
            }
        }
        if card != KITTEN {
            self.hands[p][card as usize] += 1;
            self.end_one_turn();
        } else if self.hands[p][DEFUSE as usize] > 0 {
            self.discard_card(p, DEFUSE);
            self.phase = Phase::Defuse;
        } else {
            self.alive[p] = false;
            for c in 0..CARD_TYPES {
                self.discard[c] += self.hands[p][c];
            }
            self.hands[p] = [0; CARD_TYPES];
            self.discard[KITTEN as usize] += 1;
            if self.alive_count() == 1 {
                self.status = GameStatus::Finished(
                    self.alive
                        .iter()
                        .map(|&a| if a { PlayerResult::Win } else { PlayerResult::Loss })
                        .collect(),
                );
            } else {
                self.end_one_turn();
            }
        }
    }

    fn place_kitten(&mut self, depth: usize) {
        let at = self.pile.len() - depth;
        self.pile.insert(at, KITTEN);
        for known in &mut self.known_top {
            known.truncate(depth);
        }
        let me = &mut self.known_top[self.turn_player];
        if me.len() == depth && depth < FUTURE_CARDS {
            me.push(KITTEN);
        }
        self.phase = Phase::Main;
        self.end_one_turn();
    }


    fn play(&mut self, effect: Effect, rng: &mut GameRng) {
        let actor = self.turn_player;
        match effect {
            Effect::Attack => self.discard_card(actor, ATTACK),
            Effect::Skip => self.discard_card(actor, SKIP),
            Effect::Favor { .. } => self.discard_card(actor, FAVOR),
            Effect::Shuffle => self.discard_card(actor, SHUFFLE),
            Effect::SeeTheFuture => self.discard_card(actor, SEE_THE_FUTURE),
            Effect::CatPair { cat, .. } => {
                self.discard_card(actor, cat);
                self.discard_card(actor, cat);
            }
        }
        let responders = self.responders_after(actor);
        self.pending = Some(Pending {
            actor,
            effect,
            nopes: 0,
            responders,
        });
        self.phase = Phase::Nope;
        self.resolve_if_settled(rng);
    }

    fn resolve_if_settled(&mut self, rng: &mut GameRng) {
        let settled = self
            .pending
            .as_ref()
            .is_some_and(|p| p.responders.is_empty());
        if !settled {
            return;
        }
        let pending = self.pending.take().expect("pending play");
        self.phase = Phase::Main;
        if pending.nopes % 2 == 1 {
            return;
        }
        let actor = pending.actor;
        match pending.effect {
            Effect::Attack => {
                self.turn_player = self.next_alive(actor);
                self.turns_left = 2;
            }
            Effect::Skip => self.end_one_turn(),
            Effect::Favor { target } => {
                if self.hands[target].iter().any(|&c| c > 0) {
                    self.phase = Phase::FavorGive {
                        requester: actor,
                        giver: target,
                    };
                }
            }
            Effect::Shuffle => {
                self.pile.shuffle(rng);
                self.known_top.iter_mut().for_each(Vec::clear);
            }
            Effect::SeeTheFuture => {
                self.known_top[actor] = self.pile.iter().rev().take(FUTURE_CARDS).copied().collect();
            }
            Effect::CatPair { target, .. } => {
                let total: usize = self.hands[target].iter().map(|&c| c as usize).sum();
                if total > 0 {
                    let mut pick = rng.random_range(0..total);
                    let mut card = 0;
                    while pick >= self.hands[target][card] as usize {
                        pick -= self.hands[target][card] as usize;
                        card += 1;
                    }
                    self.hands[target][card] -= 1;
                    self.hands[actor][card] += 1;
                }
            }
        }
    }

    fn hand_size(&self, player: usize) -> usize {
        self.hands[player].iter().map(|&c| c as usize).sum()
    }
}

impl Rules for ExplodingKittens {
    const ID: GameId = GameId::ExplodingKittens;

    fn setup(n_players: usize, rng: &mut GameRng) -> Self {
        let mut pool: Vec<u8> = (NOPE..CARD_TYPES as u8)
            .flat_map(|c| std::iter::repeat_n(c, DECK_COUNTS[c as usize] as usize))
            .collect();
        pool.shuffle(rng);
        let mut hands = vec![[0u8; CARD_TYPES]; n_players];
        for hand in &mut hands {
            for card in pool.drain(pool.len() - STARTING_HAND..) {
                hand[card as usize] += 1;
            }
            hand[DEFUSE as usize] += 1;
        }
        pool.extend(std::iter::repeat_n(KITTEN, n_players - 1));
        pool.extend(std::iter::repeat_n(DEFUSE, SPARE_DEFUSES as usize));
        pool.shuffle(rng);
        ExplodingKittens {
            n: n_players,
            hands,
            pile: pool,
            discard: [0; CARD_TYPES],
            alive: vec![true; n_players],
            turn_player: 0,
            turns_left: 1,
            phase: Phase::Main,
            pending: None,
            known_top: vec![Vec::new(); n_players],
            status: GameStatus::Running,
        }
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn current_player(&self) -> usize {
        match self.phase {
            Phase::Main | Phase::Defuse => self.turn_player,
            Phase::Nope => self.pending.as_ref().expect("pending play").responders[0],
            Phase::FavorGive { giver, .. } => giver,
        }
    }

    fn status(&self) -> &GameStatus {
        &self.status
    }

    fn legal_actions(&self, out: &mut Vec<usize>) {
        let l = self.layout();
        let p = self.current_player();
        let hand = &self.hands[p];
        match self.phase {
            Phase::Main => {
                out.push(Layout::DRAW);
                for (card, action) in [
                    (ATTACK, Layout::ATTACK),
                    (SKIP, Layout::SKIP),
                    (SHUFFLE, Layout::SHUFFLE),
                    (SEE_THE_FUTURE, Layout::SEE_THE_FUTURE),
                ] {
                    if hand[card as usize] > 0 {
                        out.push(action);
                    }
                }
                let live_offsets: Vec<usize> = (1..self.n)
                    .filter(|&o| self.alive[self.target(p, o)])
                    .collect();
                if hand[FAVOR as usize] > 0 {
                    out.extend(live_offsets.iter().map(|&o| l.favor(o)));
                }
                for cat in 0..CATS {
                    if hand[FIRST_CAT as usize + cat] >= 2 {
                        out.extend(live_offsets.iter().map(|&o| l.cat_pair(cat, o)));
                    }
                }
            }
            Phase::Nope => out.extend([l.nope(), l.pass()]),
            Phase::FavorGive { .. } => {
                out.extend((1..CARD_TYPES as u8).filter(|&c| hand[c as usize] > 0).map(|c| l.give(c)));
            }
            Phase::Defuse => {
                out.extend((0..INSERT_DEPTHS.min(self.pile.len())).map(|d| l.insert(d)));
                out.push(l.bottom());
            }
        }
    }

    fn apply(&mut self, action: usize, rng: &mut GameRng) {
        let l = self.layout();
        let p = self.current_player();
        match self.phase {
            Phase::Main => match action {
                Layout::DRAW => self.draw(),
                Layout::ATTACK => self.play(Effect::Attack, rng),
                Layout::SKIP => self.play(Effect::Skip, rng),
                Layout::SHUFFLE => self.play(Effect::Shuffle, rng),
                Layout::SEE_THE_FUTURE => self.play(Effect::SeeTheFuture, rng),
                a if a < l.cat_base() => {
                    let target = self.target(p, a - l.favor(1) + 1);
                    self.play(Effect::Favor { target }, rng)
                }
                a => {
                    let rel = a - l.cat_base();
                    let cat = FIRST_CAT + (rel / l.m) as u8;
                    let target = self.target(p, rel % l.m + 1);
                    self.play(Effect::CatPair { cat, target }, rng)
                }
            },
            Phase::Nope => {
                if action == l.nope() {
                    self.discard_card(p, NOPE);
                    let responders = self.responders_after(p);
                    let pending = self.pending.as_mut().expect("pending play");
                    pending.nopes += 1;
                    pending.responders = responders;
                } else {
                    self.pending.as_mut().expect("pending play").responders.remove(0);
                }
                self.resolve_if_settled(rng);
            }
            Phase::FavorGive { requester, giver } => {
                let card = (action - l.pass()) as u8;
                self.hands[giver][card as usize] -= 1;
                self.hands[requester][card as usize] += 1;
                self.phase = Phase::Main;
            }
            Phase::Defuse if action == l.bottom() => self.place_kitten(self.pile.len()),
            Phase::Defuse => self.place_kitten(action - l.insert(0)),
        }
    }

    fn truncate(&mut self) {
        self.status = GameStatus::Finished(
            self.alive
                .iter()
                .map(|&a| if a { PlayerResult::Tie } else { PlayerResult::Loss })
                .collect(),
        );
    }

    fn observation_len(n_players: usize) -> usize {
        67 + 2 * (n_players - 1)
    }

    fn observe(&self, player: usize, out: &mut [f32]) {
        let m = self.n - 1;
        for c in 1..CARD_TYPES {
            out[c - 1] = self.hands[player][c] as f32 / DECK_COUNTS[c] as f32;
        }
        for o in 1..self.n {
            let q = self.target(player, o);
            out[11 + o] = (self.hand_size(q) as f32 / HAND_SCALE).min(1.0);
            out[11 + m + o] = self.alive[q] as u8 as f32;
        }
        let b = 12 + 2 * m;
        out[b] = self.pile.len() as f32 / TOTAL_CARDS as f32;
        out[b + 1] = self.kittens_in_pile() as f32 / 3.0;
        out[b + 2 + self.phase.index()] = 1.0;
        if let Some(pending) = &self.pending {
            out[b + 6 + pending.effect.kind()] = 1.0;
            out[b + 12] = (pending.nopes % 2) as f32;
            out[b + 13] = (pending.actor == player) as u8 as f32;
            out[b + 14] = (pending.effect.target() == Some(player)) as u8 as f32;
        }
        if let Phase::FavorGive { giver, .. } = self.phase {
            out[b + 14] = (giver == player) as u8 as f32;
        }
        out[b + 15] = self.turns_left as f32 / 2.0;
        for (i, &card) in self.known_top[player].iter().enumerate() {
            out[b + 16 + i * CARD_TYPES + card as usize] = 1.0;
        }
    }

    fn observation_json(&self, player: usize) -> Value {
        let opponents: Vec<Value> = (1..self.n)
            .map(|o| {
                let q = self.target(player, o);
                json!({ "seat": q, "alive": self.alive[q], "hand_count": self.hand_size(q) })
            })
            .collect();
        let pending = self.pending.as_ref().map(|p| {
            json!({
                "actor": p.actor,
                "effect": p.effect,
                "nopes": p.nopes,
            })
        });
        json!({
            "player": player,
            "to_move": self.current_player(),
            "phase": self.phase,
            "hand": self.hands[player],
            "opponents": opponents,
            "draw_pile": self.pile.len(),
            "kittens_in_pile": self.kittens_in_pile(),
            "discard": self.discard,
            "turn_player": self.turn_player,
            "turns_left": self.turns_left,
            "pending": pending,
            "known_top": self.known_top[player],
        })
    }

    fn canonical_json(&self) -> Value {
        json!({
            "hands": self.hands,
            "pile": self.pile,
            "discard": self.discard,
            "alive": self.alive,
            "turn_player": self.turn_player,
            "turns_left": self.turns_left,
            "phase": self.phase,
            "pending": self.pending,
            "known_top": self.known_top,
            "status": self.status,
        })
    }

    fn heuristic(&self, player: usize) -> f64 {
        if !self.alive[player] {
            return -0.9;
        }
        let defuse = (self.hands[player][DEFUSE as usize] > 0) as u8 as f64;
        let size = self.hand_size(player).min(10) as f64 / 10.0;
        let rivals = (1..self.n).filter(|&o| self.alive[self.target(player, o)]).count() as f64;
        0.2 + 0.3 * defuse + 0.2 * size - 0.2 * rivals / (self.n - 1) as f64
    }

    /// Reshuffles opponents' hands together with the part of the pile the
    /// observer has not seen; kittens stay in the pile.
    fn redeterminize(&mut self, observer: usize, rng: &mut GameRng) {
        let known = self.known_top[observer].len().min(self.pile.len());
        let split = self.pile.len() - known;
        let unseen: Vec<u8> = self.pile.drain(..split).collect();
        let kittens = unseen.iter().filter(|&&c| c == KITTEN).count();
        let mut pool: Vec<u8> = unseen.into_iter().filter(|&c| c != KITTEN).collect();
        let mut sizes = vec![0; self.n];
        for p in (0..self.n).filter(|&p| p != observer) {
            sizes[p] = self.hand_size(p);
            for c in 0..CARD_TYPES {
                pool.extend(std::iter::repeat_n(c as u8, self.hands[p][c] as usize));
            }
            self.hands[p] = [0; CARD_TYPES];
        }
        pool.shuffle(rng);
        for p in (0..self.n).filter(|&p| p != observer) {
            for card in pool.drain(pool.len() - sizes[p]..) {
                self.hands[p][card as usize] += 1;
            }
        }
        pool.extend(std::iter::repeat_n(KITTEN, kittens));
        pool.shuffle(rng);
        pool.append(&mut self.pile);
        self.pile = pool;
        for p in (0..self.n).filter(|&p| p != observer) {
            self.known_top[p].clear();
        }
    }
}
