//! Actor-critic network: optional 3x3 convolution stem, two tanh dense
//! layers, a policy head with one logit per action leaf and a scalar value
//! head. Forward and backward passes are written out by hand.
//!
//! All parameters live in one flat vector. Dense weights are stored
//! `[in][out]`, convolution weights `[ky][kx][in_channel][out_channel]`, and
//! the convolution output is channel-last (`[y][x][channel]`).

use num_traits::Float;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action_space::ActionTree;
use crate::engine::{GameId, GameRng, Seed};
use crate::error::{Error, Result};
use crate::games::{observation_shape, ObservationShape};

pub const HIDDEN: usize = 64;
pub const CONV_CHANNELS: usize = 32;
const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn out_len(&self) -> usize {
        self.height * self.width * self.out_channels
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub obs_len: usize,
    pub conv: Option<ConvSpec>,
    pub hidden: usize,
    pub n_actions: usize,
}

impl NetSpec {
    /// Default architecture for a game configuration: a convolution stem for
    /// planar observations, plain MLP otherwise.
    pub fn for_game(game: GameId, n_players: usize) -> Result<NetSpec> {
        let tree = ActionTree::build(game, n_players)?;
        let shape = observation_shape(game, n_players);
        let conv = match shape {
            ObservationShape::Planes { channels, height, width } => Some(ConvSpec {
                in_channels: channels,
                height,
                width,
                out_channels: CONV_CHANNELS,
            }),
            ObservationShape::Flat { .. } => None,
        };
        Ok(NetSpec {
            obs_len: shape.len(),
            conv,
            hidden: HIDDEN,
            n_actions: tree.leaf_count(),
        })
    }

    fn trunk_in(&self) -> usize {
        self.conv.map_or(self.obs_len, |c| c.out_len())
    }

    pub fn param_count(&self) -> usize {
        Offsets::new(self).total
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.n_actions == 0 || self.obs_len == 0 {
            return Err(Error::Config(format!("degenerate network {self:?}")));
        }
        if let Some(c) = self.conv {
            if c.in_channels * c.height * c.width != self.obs_len {
                return Err(Error::Config(format!(
                    "conv input {}x{}x{} does not match observation length {}",
                    c.in_channels, c.height, c.width, self.obs_len
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Offsets {
    conv_w: usize,
    conv_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    total: usize,
}

impl Offsets {
    fn new(spec: &NetSpec) -> Offsets {
        let (n_in, h, a) = (spec.trunk_in(), spec.hidden, spec.n_actions);
        let conv_w = 0;
        let conv_b = conv_w + spec.conv.map_or(0, |c| KERNEL * KERNEL * c.in_channels * c.out_channels);
        let w1 = conv_b + spec.conv.map_or(0, |c| c.out_channels);
        let b1 = w1 + n_in * h;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let wp = b2 + h;
        let bp = wp + h * a;
        let wv = bp + a;
        let bv = wv + h;
        Offsets {
            conv_w,
            conv_b,
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            wv,
            bv,
            total: bv + 1,
        }
    }
}

/// Per-thread activations kept between forward and backward.
#[derive(Clone, Debug, Default)]
pub struct Workspace<F> {
    input_nz: Vec<(usize, F)>,
    x: Vec<F>,
    x_nz: Vec<usize>,
    h1: Vec<F>,
    h2: Vec<F>,
    value: F,
    dx: Vec<F>,
    dh1: Vec<F>,
    dh2: Vec<F>,
}

impl<F: Float> Workspace<F> {
    pub fn value(&self) -> F {
        self.value
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet<F> {
    spec: NetSpec,
    offs: Offsets,
    params: Vec<F>,
}

fn cast<F: Float>(x: f64) -> F {
    F::from(x).expect("representable constant")
}

/// Fills a `rows x cols` row-major block with a scaled (semi-)orthogonal
/// matrix built by Gram-Schmidt on Gaussian vectors.
fn orthogonal<F: Float>(rows: usize, cols: usize, gain: f64, rng: &mut GameRng, out: &mut [F]) {
    let (long, short) = (rows.max(cols), rows.min(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let x = if rows >= cols { basis[c][r] } else { basis[r][c] };
            out[r * cols + c] = cast(gain * x);
        }
    }
}

impl<F: Float + Send + Sync> PolicyNet<F> {
    /// Orthogonal init with gain sqrt(2) in the stem and trunk, gain 1 on the
    /// value head and a zero policy head, so the initial policy is uniform
    /// over the legal actions. Biases start at zero.
    pub fn new(spec: NetSpec, seed: Seed) -> Result<Self> {
        spec.validate()?;
        let offs = Offsets::new(&spec);
        let mut params = vec![F::zero(); offs.total];
        let mut rng = GameRng::seed_from_u64(seed);
        let (n_in, h) = (spec.trunk_in(), spec.hidden);
        let root2 = 2f64.sqrt();
        if let Some(c) = spec.conv {
            let fan_in = KERNEL * KERNEL * c.in_channels;
            orthogonal(fan_in, c.out_channels, root2, &mut rng, &mut params[offs.conv_w..offs.conv_b]);
        }
        orthogonal(n_in, h, root2, &mut rng, &mut params[offs.w1..offs.b1]);
        orthogonal(h, h, root2, &mut rng, &mut params[offs.w2..offs.b2]);
        orthogonal(h, 1, 1.0, &mut rng, &mut params[offs.wv..offs.bv]);
        Ok(PolicyNet { spec, offs, params })
    }

    pub fn from_params(spec: NetSpec, params: Vec<F>) -> Result<Self> {
        spec.validate()?;
        let offs = Offsets::new(&spec);
        if params.len() != offs.total {
            return Err(Error::Shape {
                expected: offs.total,
                got: params.len(),
            });
        }
        Ok(PolicyNet { spec, offs, params })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn n_actions(&self) -> usize {
        self.spec.n_actions
    }

    pub fn workspace(&self) -> Workspace<F> {
        let n_in = self.spec.trunk_in();
        let h = self.spec.hidden;
        Workspace {
            input_nz: Vec::new(),
            x: vec![F::zero(); n_in],
            x_nz: Vec::with_capacity(n_in),
            h1: vec![F::zero(); h],
            h2: vec![F::zero(); h],
            value: F::zero(),
            dx: vec![F::zero(); n_in],
            dh1: vec![F::zero(); h],
            dh2: vec![F::zero(); h],
        }
    }

    /// Runs the trunk and value head; logits are computed on demand.
    pub fn forward(&self, obs: &[F], ws: &mut Workspace<F>) -> Result<()> {
        if obs.len() != self.spec.obs_len {
            return Err(Error::Shape {
                expected: self.spec.obs_len,
                got: obs.len(),
            });
        }
        let p = &self.params;
        let o = self.offs;
        let h = self.spec.hidden;
        match self.spec.conv {
            Some(c) => self.conv_forward(c, obs, ws),
            None => ws.x.copy_from_slice(obs),
        }
        ws.x_nz.clear();
        ws.x_nz.extend((0..ws.x.len()).filter(|&i| ws.x[i] != F::zero()));

        ws.h1.copy_from_slice(&p[o.b1..o.b1 + h]);
        for &i in &ws.x_nz {
            axpy(ws.x[i], &p[o.w1 + i * h..o.w1 + (i + 1) * h], &mut ws.h1);
        }
        ws.h1.iter_mut().for_each(|v| *v = v.tanh());

        ws.h2.copy_from_slice(&p[o.b2..o.b2 + h]);
        for i in 0..h {
            axpy(ws.h1[i], &p[o.w2 + i * h..o.w2 + (i + 1) * h], &mut ws.h2);
        }
        ws.h2.iter_mut().for_each(|v| *v = v.tanh());

        ws.value = p[o.bv] + dot(&ws.h2, &p[o.wv..o.wv + h]);
        Ok(())
    }

    fn conv_forward(&self, c: ConvSpec, obs: &[F], ws: &mut Workspace<F>) {
        let p = &self.params;
        let o = self.offs;
        let (hh, ww, oc) = (c.height, c.width, c.out_channels);
        let bias = &p[o.conv_b..o.conv_b + oc];
        for cell in ws.x.chunks_exact_mut(oc) {
            cell.copy_from_slice(bias);
        }
        ws.input_nz.clear();
        ws.input_nz.extend(obs.iter().enumerate().filter(|(_, v)| **v != F::zero()).map(|(i, &v)| (i, v)));
        for &(idx, v) in &ws.input_nz {
            let ic = idx / (hh * ww);
            let (iy, ix) = ((idx / ww) % hh, idx % ww);
            for ky in 0..KERNEL {
                let Some(oy) = (iy + 1).checked_sub(ky).filter(|&y| y < hh) else { continue };
                for kx in 0..KERNEL {
                    let Some(ox) = (ix + 1).checked_sub(kx).filter(|&x| x < ww) else { continue };
                    let w = o.conv_w + ((ky * KERNEL + kx) * c.in_channels + ic) * oc;
                    let out = (oy * ww + ox) * oc;
                    axpy(v, &p[w..w + oc], &mut ws.x[out..out + oc]);
                }
            }
        }
        ws.x.iter_mut().for_each(|v| *v = v.max(F::zero()));
    }

    /// Logits of the listed leaves, from the last forward pass.
    pub fn logits_for(&self, ws: &Workspace<F>, actions: &[usize], out: &mut Vec<F>) {
        let p = &self.params;
        let o = self.offs;
        let a = self.spec.n_actions;
        out.clear();
        out.extend(actions.iter().map(|&k| {
            let mut z = p[o.bp + k];
            for (i, &hv) in ws.h2.iter().enumerate() {
                z = z + hv * p[o.wp + i * a + k];
            }
            z
        }));
    }

    /// Logits of every leaf, from the last forward pass.
    pub fn all_logits(&self, ws: &Workspace<F>) -> Vec<F> {
        let p = &self.params;
        let o = self.offs;
        let a = self.spec.n_actions;
        let mut out = p[o.bp..o.bp + a].to_vec();
        for (i, &hv) in ws.h2.iter().enumerate() {
            axpy(hv, &p[o.wp + i * a..o.wp + (i + 1) * a], &mut out);
        }
        out
    }

    /// Accumulates into `grad` the gradient of a loss whose derivatives are
    /// `dlogits` (for the listed leaves) and `dvalue`, at the activations of
    /// the last forward pass.
    pub fn backward(&self, ws: &mut Workspace<F>, actions: &[usize], dlogits: &[F], dvalue: F, grad: &mut [F]) {
        debug_assert_eq!(actions.len(), dlogits.len());
        debug_assert_eq!(grad.len(), self.params.len());
        let p = &self.params;
        let o = self.offs;
        let h = self.spec.hidden;
        let a = self.spec.n_actions;

        for i in 0..h {
            let hv = ws.h2[i];
            let mut d = p[o.wv + i] * dvalue;
            grad[o.wv + i] = grad[o.wv + i] + hv * dvalue;
            for (&k, &dl) in actions.iter().zip(dlogits) {
                d = d + p[o.wp + i * a + k] * dl;
                grad[o.wp + i * a + k] = grad[o.wp + i * a + k] + hv * dl;
            }
            ws.dh2[i] = d * (F::one() - hv * hv);
        }
        grad[o.bv] = grad[o.bv] + dvalue;
        for (&k, &dl) in actions.iter().zip(dlogits) {
            grad[o.bp + k] = grad[o.bp + k] + dl;
        }

        for (g, &d) in grad[o.b2..o.b2 + h].iter_mut().zip(&ws.dh2) {
            *g = *g + d;
        }
        for i in 0..h {
            let row = o.w2 + i * h..o.w2 + (i + 1) * h;
            axpy(ws.h1[i], &ws.dh2, &mut grad[row.clone()]);
            let d = dot(&p[row], &ws.dh2);
            ws.dh1[i] = d * (F::one() - ws.h1[i] * ws.h1[i]);
        }

        for (g, &d) in grad[o.b1..o.b1 + h].iter_mut().zip(&ws.dh1) {
            *g = *g + d;
        }
        let conv = self.spec.conv;
        for &i in &ws.x_nz {
            let row = o.w1 + i * h..o.w1 + (i + 1) * h;
            axpy(ws.x[i], &ws.dh1, &mut grad[row.clone()]);
            if conv.is_some() {
                ws.dx[i] = dot(&p[row], &ws.dh1);
            }
        }
        if let Some(c) = conv {
            self.conv_backward(c, ws, grad);
        }
    }

    fn conv_backward(&self, c: ConvSpec, ws: &mut Workspace<F>, grad: &mut [F]) {
        let o = self.offs;
        let (hh, ww, oc) = (c.height, c.width, c.out_channels);
        // Only positive outputs pass the ReLU; zero the rest of dx.
        let mut k = 0;
        for i in 0..ws.dx.len() {
            if k < ws.x_nz.len() && ws.x_nz[k] == i {
                k += 1;
            } else {
                ws.dx[i] = F::zero();
            }
        }
        for pos in 0..hh * ww {
            let d = &ws.dx[pos * oc..(pos + 1) * oc];
            for (g, &v) in grad[o.conv_b..o.conv_b + oc].iter_mut().zip(d) {
                *g = *g + v;
            }
        }
        for &(idx, v) in &ws.input_nz {
            let ic = idx / (hh * ww);
            let (iy, ix) = ((idx / ww) % hh, idx % ww);
            for ky in 0..KERNEL {
                let Some(oy) = (iy + 1).checked_sub(ky).filter(|&y| y < hh) else { continue };
                for kx in 0..KERNEL {
                    let Some(ox) = (ix + 1).checked_sub(kx).filter(|&x| x < ww) else { continue };
                    let w = o.conv_w + ((ky * KERNEL + kx) * c.in_channels + ic) * oc;
                    let out = (oy * ww + ox) * oc;
                    axpy(v, &ws.dx[out..out + oc], &mut grad[w..w + oc]);
                }
            }
        }
    }

    pub fn cast<G: Float + Send + Sync>(&self) -> PolicyNet<G> {
        PolicyNet {
            spec: self.spec.clone(),
            offs: self.offs,
            params: self.params.iter().map(|&x| G::from(x).expect("finite parameter")).collect(),
        }
    }
}

#[inline]
fn axpy<F: Float>(a: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

#[inline]
fn dot<F: Float>(x: &[F], y: &[F]) -> F {
    x.iter().zip(y).fold(F::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Masked log-softmax over the logits of the legal leaves.
pub fn log_softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = logits.iter().fold(F::zero(), |acc, &z| acc + (z - max).exp()).ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(conv: bool) -> NetSpec {
        match conv {
            false => NetSpec {
                obs_len: 3,
                conv: None,
                hidden: 4,
                n_actions: 5,
            },
            true => NetSpec {
                obs_len: 2 * 3 * 4,
                conv: Some(ConvSpec {
                    in_channels: 2,
                    height: 3,
                    width: 4,
                    out_channels: 3,
                }),
                hidden: 4,
                n_actions: 5,
            },
        }
    }

    #[test]
    fn game_specs_have_expected_sizes() {
        let ttt = NetSpec::for_game(GameId::TicTacToe, 2).unwrap();
        assert_eq!((ttt.obs_len, ttt.n_actions), (9, 9));
        let s = NetSpec::for_game(GameId::Stratego, 2).unwrap();
        assert_eq!(s.conv.unwrap().out_len(), 3200);
        assert_eq!(s.n_actions, 3600);
    }

    #[test]
    fn fresh_net_is_uniform() {
        let net = PolicyNet::<f64>::new(NetSpec::for_game(GameId::TicTacToe, 2).unwrap(), 1).unwrap();
        let mut ws = net.workspace();
        net.forward(&[0.0; 9], &mut ws).unwrap();
        assert!(net.all_logits(&ws).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn orthogonal_columns() {
        let mut m = vec![0.0f64; 6 * 3];
        orthogonal(6, 3, 1.0, &mut GameRng::seed_from_u64(2), &mut m);
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = (0..6).map(|r| m[r * 3 + a] * m[r * 3 + b]).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subset_logits_match_full_logits() {
        for conv in [false, true] {
            let spec = toy(conv);
            let mut net = PolicyNet::<f64>::new(spec.clone(), 3).unwrap();
            let mut rng = GameRng::seed_from_u64(4);
            for p in net.params_mut() {
                *p = StandardNormal.sample(&mut rng);
            }
            let obs: Vec<f64> = (0..spec.obs_len).map(|i| if i % 3 == 0 { 0.0 } else { i as f64 * 0.1 }).collect();
            let mut ws = net.workspace();
            net.forward(&obs, &mut ws).unwrap();
            let full = net.all_logits(&ws);
            let mut part = Vec::new();
            net.logits_for(&ws, &[1, 4], &mut part);
            assert!((part[0] - full[1]).abs() < 1e-12);
            assert!((part[1] - full[4]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_observation_length_is_a_shape_error() {
        let net = PolicyNet::<f32>::new(toy(false), 0).unwrap();
        let mut ws = net.workspace();
        assert!(matches!(net.forward(&[0.0; 4], &mut ws), Err(Error::Shape { expected: 3, got: 4 })));
    }
}
