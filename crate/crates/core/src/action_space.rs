//! Fixed-shape action trees, per-state legality masks and the two masking
//! rules used at action selection time.

use num_traits::Float;
use serde::Serialize;

use crate::engine::{GameId, GameState};
use crate::error::{Error, Result};
use crate::games;

/// Value written over masked-out logits before the softmax.
pub const LOGIT_SENTINEL: f64 = -1e9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionNode {
    pub label: String,
    /// Flat index for leaves, `None` for categories.
    pub leaf: Option<usize>,
    pub children: Vec<ActionNode>,
}

impl ActionNode {
    fn leaf_count(&self) -> usize {
        match self.leaf {
            Some(_) => 1,
            None => self.children.iter().map(ActionNode::leaf_count).sum(),
        }
    }
}

/// Builds a tree depth first; leaves are numbered in the order they are added.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    stack: Vec<ActionNode>,
    next_leaf: usize,
}

impl TreeBuilder {
    pub fn new(root_label: &str) -> Self {
        TreeBuilder {
            stack: vec![ActionNode {
                label: root_label.to_string(),
                leaf: None,
                children: Vec::new(),
            }],
            next_leaf: 0,
        }
    }

    pub fn leaf(&mut self, label: impl Into<String>) -> usize {
        let id = self.next_leaf;
        self.next_leaf += 1;
        self.top().children.push(ActionNode {
            label: label.into(),
            leaf: Some(id),
            children: Vec::new(),
        });
        id
    }

    pub fn category(&mut self, label: impl Into<String>, body: impl FnOnce(&mut TreeBuilder)) {
        self.stack.push(ActionNode {
            label: label.into(),
            leaf: None,
            children: Vec::new(),
        });
        body(self);
        let node = self.stack.pop().expect("category node");
        self.top().children.push(node);
    }

    pub fn finish(mut self, game: GameId, n_players: usize) -> ActionTree {
        assert_eq!(self.stack.len(), 1, "unbalanced categories");
        let root = self.stack.pop().expect("root");
        let mut labels = vec![String::new(); self.next_leaf];
        collect_labels(&root, &mut Vec::new(), &mut labels);
        ActionTree {
            game,
            n_players,
            root,
            labels,
        }
    }

    fn top(&mut self) -> &mut ActionNode {
        self.stack.last_mut().expect("builder stack")
    }
}

fn collect_labels(node: &ActionNode, path: &mut Vec<String>, out: &mut [String]) {
    match node.leaf {
        Some(id) => {
            path.push(node.label.clone());
            out[id] = path[1..].join("/");
            path.pop();
        }
        None => {
            path.push(node.label.clone());
            for child in &node.children {
                collect_labels(child, path, out);
            }
            path.pop();
        }
    }
}

/// Complete action space of one game configuration. Immutable once built.
#[derive(Clone, Debug, Serialize)]
pub struct ActionTree {
    game: GameId,
    n_players: usize,
    root: ActionNode,
    labels: Vec<String>,
}

impl ActionTree {
    pub fn build(game: GameId, n_players: usize) -> Result<ActionTree> {
        game.check_players(n_players)?;
        let tree = games::build_action_tree(game, n_players);
        debug_assert_eq!(tree.root.leaf_count(), tree.labels.len());
        Ok(tree)
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn root(&self) -> &ActionNode {
        &self.root
    }

    /// Top-level action categories.
    pub fn categories(&self) -> impl Iterator<Item = &ActionNode> {
        self.root.children.iter()
    }

    /// Slash-separated path of a leaf, e.g. `Guard/opponent+1/guess Priest`.
    pub fn label(&self, leaf: usize) -> Option<&str> {
        self.labels.get(leaf).map(String::as_str)
    }

    /// One `index<TAB>label` line per leaf.
    pub fn atlas(&self) -> String {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{i}\t{l}\n"))
            .collect()
    }

    pub fn compute_mask(&self, state: &GameState) -> Result<ActionMask> {
        let mut mask = ActionMask::none(self.leaf_count());
        self.compute_mask_into(state, &mut mask, &mut Vec::new())?;
        Ok(mask)
    }

    /// Allocation-free variant; `scratch` holds the legal list.
    pub fn compute_mask_into(
        &self,
        state: &GameState,
        mask: &mut ActionMask,
        scratch: &mut Vec<usize>,
    ) -> Result<()> {
        if state.game_id() != self.game || state.n_players() != self.n_players {
            return Err(Error::TreeMismatch {
                tree: self.game,
                tree_players: self.n_players,
                state: state.game_id(),
                state_players: state.n_players(),
            });
        }
        state.legal_actions_into(scratch)?;
        mask.bits.clear();
        mask.bits.resize(self.leaf_count(), false);
        for &a in scratch.iter() {
            mask.bits[a] = true;
        }
        Ok(())
    }
}

/// Boolean legality vector over the flattened leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionMask {
    bits: Vec<bool>,
}

impl ActionMask {
    pub fn none(len: usize) -> Self {
        ActionMask {
            bits: vec![false; len],
        }
    }

    pub fn all(len: usize) -> Self {
        ActionMask {
            bits: vec![true; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        ActionMask { bits }
    }

    pub fn from_legal(len: usize, legal: &[usize]) -> Self {
        let mut mask = ActionMask::none(len);
        for &a in legal {
            mask.bits[a] = true;
        }
        mask
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_legal(&self, action: usize) -> bool {
        self.bits.get(action).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn legal_actions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    fn check<F>(&self, values: &[F]) -> Result<()> {
        if values.len() != self.bits.len() {
            return Err(Error::Shape {
                expected: self.bits.len(),
                got: values.len(),
            });
        }
        if !self.bits.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        Ok(())
    }
}

/// Replaces masked-out logits by [`LOGIT_SENTINEL`]; their softmax
/// probability underflows to exactly zero.
pub fn mask_logits<F: Float>(logits: &[F], mask: &ActionMask) -> Result<Vec<F>> {
    mask.check(logits)?;
    let sentinel = F::from(LOGIT_SENTINEL).expect("sentinel fits");
    Ok(logits
        .iter()
        .zip(&mask.bits)
        .map(|(&x, &legal)| if legal { x } else { sentinel })
        .collect())
}

/// Replaces masked-out Q-values by half the most negative finite value, so
/// an argmax never selects them whatever the sign of the legal values.
pub fn mask_q_values<F: Float>(q: &[F], mask: &ActionMask) -> Result<Vec<F>> {
    mask.check(q)?;
    let sentinel = F::min_value() / F::from(2.0).expect("two");
    Ok(q
        .iter()
        .zip(&mask.bits)
        .map(|(&x, &legal)| if legal { x } else { sentinel })
        .collect())
}

/// Index of the first maximum.
pub fn argmax<F: Float>(values: &[F]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Numerically stable softmax.
pub fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}
