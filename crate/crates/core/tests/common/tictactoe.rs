use std::collections::HashMap;

/// Reference board: 'X' moves first, '.' is empty.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Board(pub [u8; 9]);

impl Board {
    pub fn empty() -> Board {
        Board([b'.'; 9])
    }

    pub fn lines() -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for i in 0..3 {
            out.push([3 * i, 3 * i + 1, 3 * i + 2]);
            out.push([i, i + 3, i + 6]);
        }
        out.push([0, 4, 8]);
        out.push([2, 4, 6]);
        out
    }

    pub fn winner(&self) -> Option<u8> {
        Board::lines()
            .into_iter()
            .map(|l| l.map(|i| self.0[i]))
            .find(|c| c[0] != b'.' && c[0] == c[1] && c[1] == c[2])
            .map(|c| c[0])
    }

    pub fn to_move(&self) -> u8 {
        let xs = self.0.iter().filter(|&&c| c == b'X').count();
        let os = self.0.iter().filter(|&&c| c == b'O').count();
        if xs == os { b'X' } else { b'O' }
    }

    pub fn terminal(&self) -> bool {
        self.winner().is_some() || !self.0.contains(&b'.')
    }

    pub fn moves(&self) -> Vec<usize> {
        if self.terminal() {
            return Vec::new();
        }
        (0..9).filter(|&i| self.0[i] == b'.').collect()
    }

    pub fn play(&self, cell: usize) -> Board {
        let mut b = *self;
        b.0[cell] = self.to_move();
        b
    }

    /// Negamax value for the side to move: 1 win, 0 draw, -1 loss.
    pub fn value(&self, memo: &mut HashMap<Board, i32>) -> i32 {
        if let Some(&v) = memo.get(self) {
            return v;
        }
        let v = if self.winner().is_some() {
            -1
        } else if self.terminal() {
            0
        } else {
            self.moves().into_iter().map(|m| -self.play(m).value(memo)).max().unwrap()
        };
        memo.insert(*self, v);
        v
    }
}

/// Every reachable position with one move sequence leading to it.
pub fn reachable() -> HashMap<Board, Vec<usize>> {
    let mut seen = HashMap::new();
    let mut stack = vec![(Board::empty(), Vec::new())];
    while let Some((b, path)) = stack.pop() {
        if seen.contains_key(&b) {
            continue;
        }
        for m in b.moves() {
            let mut p = path.clone();
            p.push(m);
            stack.push((b.play(m), p));
        }
        seen.insert(b, path);
    }
    seen
}
