use rand::Rng;

use super::{NnError, ParamId, ParamStore, Tape, Tensor, Var};

/// Affine map `x · W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: store.add_uniform(format!("{name}.weight"), fan_in, fan_out, rng),
            b: store.add(format!("{name}.bias"), Tensor::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, NnError> {
        let w = tape.param(store, self.w)?;
        let b = tape.param(store, self.b)?;
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(1, width, 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(1, width)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, NnError> {
        let g = tape.param(store, self.gamma)?;
        let b = tape.param(store, self.beta)?;
        tape.layer_norm(x, g, b)
    }
}

/// Scaled dot-product attention with `heads` heads over a shared width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
    pub width: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, rng: &mut impl Rng) -> Result<Self, NnError> {
        if heads == 0 || width % heads != 0 {
            return Err(NnError::ShapeMismatch(format!(
                "width {width} not divisible by {heads} heads"
            )));
        }
        Ok(MultiHeadAttention {
            q: Linear::new(store, &format!("{name}.q"), width, width, rng),
            k: Linear::new(store, &format!("{name}.k"), width, width, rng),
            v: Linear::new(store, &format!("{name}.v"), width, width, rng),
            out: Linear::new(store, &format!("{name}.out"), width, width, rng),
            heads,
            width,
        })
    }

    /// Returns the output and each head's attention weights
    /// (`q rows × kv rows`). `allowed[i * kv_rows + j]` gates query `i` → key `j`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        q_in: Var,
        kv_in: Var,
        allowed: Option<&[bool]>,
    ) -> Result<(Var, Vec<Var>), NnError> {
        for v in [q_in, kv_in] {
            if tape.value(v).cols() != self.width {
                return Err(NnError::ShapeMismatch(format!(
                    "attention input width {} for model width {}",
                    tape.value(v).cols(),
                    self.width
                )));
            }
        }
        let q = self.q.forward(tape, store, q_in)?;
        let k = self.k.forward(tape, store, kv_in)?;
        let v = self.v.forward(tape, store, kv_in)?;
        let dh = self.width / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale)?;
            let a = tape.softmax_rows(scores, allowed)?;
            outs.push(tape.matmul(a, vh)?);
            weights.push(a);
        }
        let cat = tape.concat_cols(&outs)?;
        Ok((self.out.forward(tape, store, cat)?, weights))
    }
}

/// Constant matrices describing one graph for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphOperators {
    /// `I + A`, `m × m`.
    pub self_and_neighbors: Tensor,
    /// Atom-bond incidence, `m × |E|`.
    pub incidence: Tensor,
}

impl GraphOperators {
    pub fn new(atoms: usize, bonds: &[(usize, usize)]) -> Self {
        let mut sn = Tensor::zeros(atoms, atoms);
        let mut inc = Tensor::zeros(atoms, bonds.len());
        for i in 0..atoms {
            sn.set(i, i, 1.0);
        }
        for (e, &(a, b)) in bonds.iter().enumerate() {
            sn.set(a, b, 1.0);
            sn.set(b, a, 1.0);
            inc.set(a, e, 1.0);
            inc.set(b, e, 1.0);
        }
        GraphOperators {
            self_and_neighbors: sn,
            incidence: inc,
        }
    }
}

/// Residual message passing:
/// `h' = LN(h + ReLU(W · (h_i + Σ_j (h_j + P e_ij)) + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayer {
    pub update: Linear,
    pub edge: Linear,
    pub norm: LayerNorm,
}

impl GcnLayer {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, bond_width: usize, rng: &mut impl Rng) -> Self {
        GcnLayer {
            update: Linear::new(store, &format!("{name}.update"), width, width, rng),
            edge: Linear::new(store, &format!("{name}.edge"), bond_width, width, rng),
            norm: LayerNorm::new(store, &format!("{name}.norm"), width),
        }
    }

    /// `ops` and `bonds` are constants (`m × m`, `m × |E|`, `|E| × bond_width`).
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        self_and_neighbors: Var,
        incidence: Var,
        bonds: Var,
    ) -> Result<Var, NnError> {
        let mut agg = tape.matmul(self_and_neighbors, h)?;
        if tape.value(bonds).rows() > 0 {
            let e = self.edge.forward(tape, store, bonds)?;
            let msg = tape.matmul(incidence, e)?;
            agg = tape.add(agg, msg)?;
        }
        let u = self.update.forward(tape, store, agg)?;
        let u = tape.relu(u)?;
        let r = tape.add(h, u)?;
        self.norm.forward(tape, store, r)
    }
}
