//! Love Letter (classic 16-card deck).
//!
//! Players hold one card and draw a second at the start of their turn, then
//! play one of the two. A round ends when one player is left or the deck is
//! empty (highest card wins, discard total breaks ties). Round winners earn a
//! favour token; the first to 7/5/4 tokens (2/3/4 players) wins the match.
//!
//! Every card type is a top-level action category. Under each category the
//! leaves are the target seat offsets (0 = self) plus a "no target" leaf;
//! Guard targets are further split by the guessed card type. This gives
//! `15n + 8` leaves: 68 with four players.

use rand::seq::SliceRandom;
use serde_json::{json, Value};

use crate::action_space::{ActionTree, TreeBuilder};
use crate::engine::{GameId, GameRng, GameStatus, Rules};

pub const CARD_TYPES: usize = 8;
pub const GUARD: u8 = 0;
pub const PRIEST: u8 = 1;
pub const BARON: u8 = 2;
pub const HANDMAID: u8 = 3;
pub const PRINCE: u8 = 4;
pub const KING: u8 = 5;
pub const COUNTESS: u8 = 6;
pub const PRINCESS: u8 = 7;

pub const CARD_NAMES: [&str; CARD_TYPES] = [
    "Guard", "Priest", "Baron", "Handmaid", "Prince", "King", "Countess", "Princess",
];
pub const CARD_COUNTS: [u8; CARD_TYPES] = [5, 2, 2, 2, 2, 1, 1, 1];
pub const DECK_SIZE: usize = 16;

pub fn tokens_to_win(n_players: usize) -> u8 {
    match n_players {
        2 => 7,
        3 => 5,
        _ => 4,
    }
}

fn value(card: u8) -> u8 {
    card + 1
}

/// Decoded leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Play {
    pub card: u8,
    /// Seat offset from the player, `None` for the no-target leaf.
    pub offset: Option<usize>,
    /// Guessed card type, Guard only.
    pub guess: Option<u8>,
}

#[derive(Clone, Copy, Debug)]
pub struct Layout {
    n: usize,
}

impl Layout {
    pub fn new(n_players: usize) -> Self {
        Layout { n: n_players }
    }

    pub fn guard(self, offset: usize, guess: u8) -> usize {
        offset * CARD_TYPES + guess as usize
    }

    fn base(self, card: u8) -> usize {
        debug_assert!(card != GUARD);
        CARD_TYPES * self.n + 1 + (card as usize - 1) * (self.n + 1)
    }

    pub fn targeted(self, card: u8, offset: usize) -> usize {
        if card == GUARD {
            panic!("guard leaves need a guess");
        }
        self.base(card) + offset
    }

    pub fn untargeted(self, card: u8) -> usize {
        if card == GUARD {
            CARD_TYPES * self.n
        } else {
            self.base(card) + self.n
        }
    }

    pub fn len(self) -> usize {
        15 * self.n + 8
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn decode(self, action: usize) -> Play {
        let guard_leaves = CARD_TYPES * self.n;
        if action < guard_leaves {
            return Play {
                card: GUARD,
                offset: Some(action / CARD_TYPES),
                guess: Some((action % CARD_TYPES) as u8),
            };
        }
        if action == guard_leaves {
            return Play {
                card: GUARD,
                offset: None,
                guess: None,
            };
        }
        let rel = action - guard_leaves - 1;
        let card = 1 + (rel / (self.n + 1)) as u8;
        let k = rel % (self.n + 1);
        Play {
            card,
            offset: (k < self.n).then_some(k),
            guess: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoveLetter {
    n: usize,
    target_tokens: u8,
    tokens: Vec<u8>,
    /// Top of the deck is the last element.
    deck: Vec<u8>,
    set_aside: Option<u8>,
    face_up: Vec<u8>,
    hands: Vec<Vec<u8>>,
    alive: Vec<bool>,
    protected: Vec<bool>,
    discards: Vec<Vec<u8>>,
    current: usize,
    round: u32,
    status: GameStatus,
}

impl LoveLetter {
    pub fn hand(&self, player: usize) -> &[u8] {
        &self.hands[player]
    }

    pub fn tokens(&self) -> &[u8] {
        &self.tokens
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn alive(&self, player: usize) -> bool {
        self.alive[player]
    }

    /// Test hook: replaces hands and deck, clearing protection.
    pub fn set_cards(&mut self, hands: Vec<Vec<u8>>, deck: Vec<u8>) {
        self.hands = hands;
        self.deck = deck;
        self.protected.iter_mut().for_each(|p| *p = false);
    }

    pub fn action_tree(n_players: usize) -> ActionTree {
        let n = n_players;
        let seat = |o: usize| if o == 0 { "self".to_string() } else { format!("opponent+{o}") };
        let mut b = TreeBuilder::new("LoveLetter");
        for card in 0..CARD_TYPES as u8 {
            b.category(CARD_NAMES[card as usize], |b| {
                for o in 0..n {
                    if card == GUARD {
                        b.category(seat(o), |b| {
                            for g in 0..CARD_TYPES {
                                b.leaf(format!("guess {}", CARD_NAMES[g]));
                            }
                        });
                    } else {
                        b.leaf(seat(o));
                    }
                }
                b.leaf("no target");
            });
        }
        b.finish(GameId::LoveLetter, n_players)
    }

    fn seat(&self, player: usize, offset: usize) -> usize {
        (player + offset) % self.n
    }

    fn start_round(&mut self, starter: usize, rng: &mut GameRng) {
        let mut deck: Vec<u8> = (0..CARD_TYPES as u8)
            .flat_map(|c| std::iter::repeat_n(c, CARD_COUNTS[c as usize] as usize))
            .collect();
        deck.shuffle(rng);
        self.set_aside = deck.pop();
        self.face_up.clear();
        if self.n == 2 {
            for _ in 0..3 {
                self.face_up.push(deck.pop().expect("deck"));
            }
            self.face_up.sort_unstable();
        }
        for o in 0..self.n {
            let p = (starter + o) % self.n;
            self.hands[p] = vec![deck.pop().expect("deck")];
        }
        self.deck = deck;
        self.alive.iter_mut().for_each(|a| *a = true);
        self.protected.iter_mut().for_each(|p| *p = false);
        self.discards.iter_mut().for_each(Vec::clear);
        self.current = starter;
        let card = self.deck.pop().expect("deck");
        self.hands[starter].push(card);
        self.round += 1;
    }

    fn valid_targets(&self, player: usize) -> impl Iterator<Item = usize> + '_ {
        (1..self.n).filter(move |&o| {
            let t = self.seat(player, o);
            self.alive[t] && !self.protected[t]
        })
    }

    fn eliminate(&mut self, player: usize) {
        self.alive[player] = false;
        let hand = std::mem::take(&mut self.hands[player]);
        self.discards[player].extend(hand);
    }

    fn end_turn(&mut self, rng: &mut GameRng) {
        let alive: Vec<usize> = (0..self.n).filter(|&p| self.alive[p]).collect();
        if alive.len() == 1 {
            return self.finish_round(alive, rng);
        }
        if self.deck.is_empty() {
            let key = |p: usize| {
                let card = self.hands[p].first().map_or(0, |&c| value(c));
                let discarded: u32 = self.discards[p].iter().map(|&c| value(c) as u32).sum();
                (card, discarded)
            };
            let best = alive.iter().map(|&p| key(p)).max().expect("live player");
            let winners = alive.into_iter().filter(|&p| key(p) == best).collect();
            return self.finish_round(winners, rng);
        }
        let next = (1..=self.n)
            .map(|o| self.seat(self.current, o))
            .find(|&p| self.alive[p])
            .expect("live player");
        self.current = next;
        self.protected[next] = false;
        let card = self.deck.pop().expect("non-empty deck");
        self.hands[next].push(card);
    }

    fn finish_round(&mut self, winners: Vec<usize>, rng: &mut GameRng) {
        for &w in &winners {
            self.tokens[w] += 1;
        }
        if self.tokens.iter().any(|&t| t >= self.target_tokens) {
            self.status = GameStatus::from_scores(&self.tokens);
        } else {
            self.start_round(winners[0], rng);
        }
    }

    fn hand_value(&self, player: usize) -> u8 {
        self.hands[player].first().map_or(0, |&c| value(c))
    }
}

impl Rules for LoveLetter {
    const ID: GameId = GameId::LoveLetter;

    fn setup(n_players: usize, rng: &mut GameRng) -> Self {
        let mut game = LoveLetter {
            n: n_players,
            target_tokens: tokens_to_win(n_players),
            tokens: vec![0; n_players],
            deck: Vec::new(),
            set_aside: None,
            face_up: Vec::new(),
            hands: vec![Vec::new(); n_players],
            alive: vec![true; n_players],
            protected: vec![false; n_players],
            discards: vec![Vec::new(); n_players],
            current: 0,
            round: 0,
            status: GameStatus::Running,
        };
        game.start_round(0, rng);
        game
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn current_player(&self) -> usize {
        self.current
    }

    fn status(&self) -> &GameStatus {
        &self.status
    }

    fn legal_actions(&self, out: &mut Vec<usize>) {
        let l = Layout::new(self.n);
        let p = self.current;
        let hand = &self.hands[p];
        let holds = |c: u8| hand.contains(&c);
        let forced_countess = holds(COUNTESS) && (holds(KING) || holds(PRINCE));
        let targets: Vec<usize> = self.valid_targets(p).collect();
        for card in 0..CARD_TYPES as u8 {
            if !holds(card) || (forced_countess && card != COUNTESS) {
                continue;
            }
            match card {
                GUARD if targets.is_empty() => out.push(l.untargeted(GUARD)),
                GUARD => {
                    for &o in &targets {
                        out.extend((1..CARD_TYPES as u8).map(|g| l.guard(o, g)));
                    }
                }
                PRIEST | BARON | KING if targets.is_empty() => out.push(l.untargeted(card)),
                PRIEST | BARON | KING => out.extend(targets.iter().map(|&o| l.targeted(card, o))),
                PRINCE => {
                    out.push(l.targeted(PRINCE, 0));
                    out.extend(targets.iter().map(|&o| l.targeted(PRINCE, o)));
                }
                _ => out.push(l.untargeted(card)),
            }
        }
    }

    fn apply(&mut self, action: usize, rng: &mut GameRng) {
        let play = Layout::new(self.n).decode(action);
        let p = self.current;
        let at = self.hands[p]
            .iter()
            .position(|&c| c == play.card)
            .expect("legal play holds the card");
        self.hands[p].remove(at);
        self.discards[p].push(play.card);
        let target = play.offset.map(|o| self.seat(p, o));
        match (play.card, target) {
            (GUARD, Some(t)) => {
                if Some(self.hands[t][0]) == play.guess {
                    self.eliminate(t);
                }
            }
            (BARON, Some(t)) => {
                let (mine, theirs) = (self.hands[p][0], self.hands[t][0]);
                if mine < theirs {
                    self.eliminate(p);
                } else if theirs < mine {
                    self.eliminate(t);
                }
            }
            (HANDMAID, _) => self.protected[p] = true,
            (PRINCE, Some(t)) => {
                if let Some(card) = self.hands[t].pop() {
                    self.discards[t].push(card);
                    if card == PRINCESS {
                        self.alive[t] = false;
                    } else if let Some(fresh) = self.deck.pop().or_else(|| self.set_aside.take()) {
                        self.hands[t].push(fresh);
                    }
                }
            }
            (KING, Some(t)) => self.hands.swap(p, t),
            (PRINCESS, _) => self.eliminate(p),
            // Priest only reveals a card, Countess has no effect, and
            // targetless plays are discarded without effect.
            _ => {}
        }
        self.end_turn(rng);
    }

    fn truncate(&mut self) {
        self.status = GameStatus::from_scores(&self.tokens);
    }

    fn observation_len(n_players: usize) -> usize {
        25 + 3 * n_players
    }

    fn observe(&self, player: usize, out: &mut [f32]) {
        let n = self.n;
        for &c in &self.hands[player] {
            out[c as usize] = 1.0;
        }
        for pile in &self.discards {
            for &c in pile {
                out[8 + c as usize] += 1.0 / CARD_COUNTS[c as usize] as f32;
            }
        }
        for &c in &self.face_up {
            out[16 + c as usize] += 1.0 / CARD_COUNTS[c as usize] as f32;
        }
        for o in 0..n {
            let q = self.seat(player, o);
            out[24 + o] = self.tokens[q] as f32 / self.target_tokens as f32;
            out[24 + n + o] = self.alive[q] as u8 as f32;
            out[24 + 2 * n + o] = self.protected[q] as u8 as f32;
        }
        out[24 + 3 * n] = self.deck.len() as f32 / DECK_SIZE as f32;
    }

    fn observation_json(&self, player: usize) -> Value {
        json!({
            "player": player,
            "to_move": self.current,
            "round": self.round,
            "target_tokens": self.target_tokens,
            "hand": self.hands[player],
            "discards": self.discards,
            "face_up": self.face_up,
            "tokens": self.tokens,
            "alive": self.alive,
            "protected": self.protected,
            "deck_size": self.deck.len(),
        })
    }

    fn canonical_json(&self) -> Value {
        json!({
            "target_tokens": self.target_tokens,
            "tokens": self.tokens,
            "deck": self.deck,
            "set_aside": self.set_aside,
            "face_up": self.face_up,
            "hands": self.hands,
            "alive": self.alive,
            "protected": self.protected,
            "discards": self.discards,
            "current": self.current,
            "round": self.round,
            "status": self.status,
        })
    }

    fn heuristic(&self, player: usize) -> f64 {
        let tokens = self.tokens[player] as f64 / self.target_tokens as f64;
        let alive = self.alive[player] as u8 as f64;
        0.5 * tokens + 0.3 * alive + 0.1 * alive * self.hand_value(player) as f64 / 8.0
    }

    /// Deals the observer's unseen cards (deck, set-aside card, opponents'
    /// hands) again at random.
    fn redeterminize(&mut self, observer: usize, rng: &mut GameRng) {
        let had_set_aside = self.set_aside.is_some();
        let mut pool: Vec<u8> = self.deck.drain(..).collect();
        pool.extend(self.set_aside.take());
        let mut sizes = vec![0; self.n];
        for p in (0..self.n).filter(|&p| p != observer) {
            sizes[p] = self.hands[p].len();
            pool.append(&mut self.hands[p]);
        }
        pool.shuffle(rng);
        for p in (0..self.n).filter(|&p| p != observer) {
            let at = pool.len() - sizes[p];
            self.hands[p] = pool.split_off(at);
        }
        if had_set_aside {
            self.set_aside = pool.pop();
        }
        self.deck = pool;
    }
}
