//! Small layers composed from graph ops.

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::params::{Group, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

/// `y = W x + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, group: Group, input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Ok(Linear {
            w: store.add_xavier(&format!("{name}.w"), group, output, input, rng)?,
            b: store.add_zeros(&format!("{name}.b"), group, &[output])?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.w)?;
        let b = g.param(store, self.b)?;
        let y = g.matmul(w, x)?;
        g.add(y, b)
    }
}

/// Two-layer head mapping a vector to a scalar: `v · tanh(W x + b)`.
/// Its outputs only ever enter a softmax, so there is no output bias.
#[derive(Debug, Clone, Copy)]
pub struct ScalarHead {
    pub hidden: Linear,
    pub v: ParamId,
}

impl ScalarHead {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, group: Group, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let layer = Linear::new(store, &format!("{name}.hidden"), group, input, hidden, rng)?;
        let bound = (6.0 / (hidden + 1) as f64).sqrt();
        let v_init = (0..hidden).map(|_| rng.random_range(-bound..bound)).collect();
        let v = store.add(format!("{name}.v"), group, Tensor::vector(v_init))?;
        Ok(ScalarHead { hidden: layer, v })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let h = self.hidden.forward(g, store, x)?;
        let h = g.tanh(h)?;
        let v = g.param(store, self.v)?;
        g.matmul(v, h)
    }
}

/// Gated recurrent unit cell.
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub hidden: usize,
    wz: ParamId,
    uz: ParamId,
    bz: ParamId,
    wr: ParamId,
    ur: ParamId,
    br: ParamId,
    wn: ParamId,
    un: ParamId,
    bn: ParamId,
}

impl Gru {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, group: Group, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut w = |gate: &str| store.add_xavier(&format!("{name}.w{gate}"), group, hidden, input, rng);
        let (wz, wr, wn) = (w("z")?, w("r")?, w("n")?);
        let mut u = |gate: &str| store.add_xavier(&format!("{name}.u{gate}"), group, hidden, hidden, rng);
        let (uz, ur, un) = (u("z")?, u("r")?, u("n")?);
        let mut b = |gate: &str| store.add_zeros(&format!("{name}.b{gate}"), group, &[hidden]);
        let (bz, br, bn) = (b("z")?, b("r")?, b("n")?);
        Ok(Gru {
            hidden,
            wz,
            uz,
            bz,
            wr,
            ur,
            br,
            wn,
            un,
            bn,
        })
    }

    pub fn zero_state(&self, g: &mut Graph) -> Result<NodeId> {
        g.constant(Tensor::zeros(&[self.hidden]))
    }

    #[allow(clippy::too_many_arguments)]
    fn gate(&self, g: &mut Graph, store: &ParamStore, w: ParamId, u: ParamId, b: ParamId, x: NodeId, h: NodeId) -> Result<NodeId> {
        let (wn, un, bn) = (g.param(store, w)?, g.param(store, u)?, g.param(store, b)?);
        let wx = g.matmul(wn, x)?;
        let uh = g.matmul(un, h)?;
        let s = g.add(wx, uh)?;
        g.add(s, bn)
    }

    /// `h' = n + z ⊙ (h − n)`.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: NodeId, h: NodeId) -> Result<NodeId> {
        let z = self.gate(g, store, self.wz, self.uz, self.bz, x, h)?;
        let z = g.sigmoid(z)?;
        let r = self.gate(g, store, self.wr, self.ur, self.br, x, h)?;
        let r = g.sigmoid(r)?;
        let rh = g.mul(r, h)?;
        let n = self.gate(g, store, self.wn, self.un, self.bn, x, rh)?;
        let n = g.tanh(n)?;
        let d = g.sub(h, n)?;
        let zd = g.mul(z, d)?;
        g.add(n, zd)
    }

    /// Runs over `inputs` from `h0`, returning every hidden state.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, inputs: &[NodeId], h0: NodeId) -> Result<Vec<NodeId>> {
        let mut h = h0;
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = self.step(g, store, x, h)?;
            states.push(h);
        }
        Ok(states)
    }
}
