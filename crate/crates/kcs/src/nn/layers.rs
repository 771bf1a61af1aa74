//! Named parameter registry and transformer building blocks.
//!
//! Parameters live in a [`ParamSet`] in registration order; layers hold
//! [`ParamId`]s and build forward graphs on a [`Graph`], which lazily turns
//! each parameter into a tape leaf the first time it is touched.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::tape::{NodeId, Tape};

pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), values: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.values.iter())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Flatten all parameters into one vector, registration order,
    /// row-major within each parameter.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_scalars());
        for v in &self.values {
            out.extend(v.iter().copied());
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat); shapes must already match.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), String> {
        if flat.len() != self.n_scalars() {
            return Err(format!(
                "parameter count mismatch: checkpoint has {}, model has {}",
                flat.len(),
                self.n_scalars()
            ));
        }
        let mut offset = 0;
        for v in &mut self.values {
            let n = v.len();
            for (slot, &x) in v.iter_mut().zip(&flat[offset..offset + n]) {
                *slot = x;
            }
            offset += n;
        }
        Ok(())
    }

    /// `(name, rows, cols)` for every parameter, registration order. Used to
    /// verify checkpoint/model layout compatibility.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| (n.clone(), v.nrows(), v.ncols()))
            .collect()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Xavier-uniform init for a weight matrix.
pub fn xavier(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 * limit - limit)
}

/// Small-scale normal init (embedding tables, position vectors).
pub fn normal_init(rng: &mut ChaCha12Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    // Box-Muller from uniform draws keeps us on the plain `Rng` surface.
    Array2::from_shape_fn((rows, cols), |_| {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * std
    })
}

/// One forward pass: a tape plus lazy leaves for the parameters it reads.
pub struct Graph<'p> {
    pub tape: Tape,
    params: &'p ParamSet,
    nodes: Vec<Option<NodeId>>,
    dropout: Option<(f64, ChaCha12Rng)>,
}

impl<'p> Graph<'p> {
    /// Recording graph for training.
    pub fn new(params: &'p ParamSet) -> Self {
        Graph { tape: Tape::new(), params, nodes: vec![None; params.len()], dropout: None }
    }

    /// Non-recording graph for inference and finite-difference probes.
    pub fn eval(params: &'p ParamSet) -> Self {
        Graph {
            tape: Tape::eval_only(),
            params,
            nodes: vec![None; params.len()],
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, rate: f64, rng: ChaCha12Rng) -> Self {
        if rate > 0.0 {
            self.dropout = Some((rate, rng));
        }
        self
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let ParamId(i) = id;
        if let Some(n) = self.nodes[i] {
            return n;
        }
        let n = self.tape.leaf(self.params.value(id).clone());
        self.nodes[i] = Some(n);
        n
    }

    /// Apply dropout if this graph was built with a rate, else identity.
    pub fn maybe_dropout(&mut self, a: NodeId) -> NodeId {
        match &mut self.dropout {
            Some((rate, rng)) => {
                let rate = *rate;
                self.tape.dropout(a, rate, rng)
            }
            None => a,
        }
    }

    /// Run backward from a scalar root and collect one gradient per
    /// parameter (zeros for parameters the root never touched).
    pub fn param_grads(&self, root: NodeId) -> Vec<Array2<f64>> {
        let grads = self.tape.backward(root);
        self.params
            .ids()
            .enumerate()
            .map(|(i, id)| match self.nodes[i].and_then(|n| grads[n].clone()) {
                Some(g) => g,
                None => Array2::zeros(self.params.value(id).raw_dim()),
            })
            .collect()
    }
}

pub struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let w = ps.add(format!("{name}.w"), xavier(rng, d_in, d_out));
        let b = bias.then(|| ps.add(format!("{name}.b"), Array2::zeros((1, d_out))));
        Linear { w, b }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(self.w);
        let y = g.tape.matmul(x, w);
        match self.b {
            Some(b) => {
                let b = g.param(b);
                g.tape.add_row(y, b)
            }
            None => y,
        }
    }
}

pub struct LayerNorm {
    gamma: ParamId,
    beta: ParamId,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamSet, name: &str, d: usize) -> Self {
        let gamma = ps.add(format!("{name}.gamma"), Array2::from_elem((1, d), 1.0));
        let beta = ps.add(format!("{name}.beta"), Array2::zeros((1, d)));
        LayerNorm { gamma, beta }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.tape.layer_norm(x, gamma, beta, LN_EPS)
    }
}

pub struct MultiHeadAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    n_heads: usize,
    d_model: usize,
}

impl MultiHeadAttention {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        d_model: usize,
        n_heads: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        assert!(d_model % n_heads == 0, "d_model must divide by n_heads");
        MultiHeadAttention {
            q: Linear::new(ps, &format!("{name}.q"), d_model, d_model, true, rng),
            k: Linear::new(ps, &format!("{name}.k"), d_model, d_model, true, rng),
            v: Linear::new(ps, &format!("{name}.v"), d_model, d_model, true, rng),
            o: Linear::new(ps, &format!("{name}.o"), d_model, d_model, true, rng),
            n_heads,
            d_model,
        }
    }

    /// Attend from `q_in` (Mq x d) over keys/values (Mk x d). `allowed`
    /// (Mq x Mk) marks which key positions each query may see; rows with
    /// no allowed key produce zero context.
    pub fn forward(
        &self,
        g: &mut Graph,
        q_in: NodeId,
        k_in: NodeId,
        v_in: NodeId,
        allowed: &Array2<bool>,
    ) -> NodeId {
        let dk = self.d_model / self.n_heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let q = self.q.forward(g, q_in);
        let k = self.k.forward(g, k_in);
        let v = self.v.forward(g, v_in);
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let (lo, hi) = (h * dk, (h + 1) * dk);
            let qh = g.tape.slice_cols(q, lo, hi);
            let kh = g.tape.slice_cols(k, lo, hi);
            let vh = g.tape.slice_cols(v, lo, hi);
            let kt = g.tape.transpose(kh);
            let scores = g.tape.matmul(qh, kt);
            let scores = g.tape.scale(scores, scale);
            let weights = g.tape.softmax_rows_masked(scores, allowed);
            heads.push(g.tape.matmul(weights, vh));
        }
        let cat = g.tape.concat_cols(&heads);
        self.o.forward(g, cat)
    }
}

pub struct FeedForward {
    lin1: Linear,
    lin2: Linear,
}

impl FeedForward {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        d_model: usize,
        d_hidden: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        FeedForward {
            lin1: Linear::new(ps, &format!("{name}.ffn1"), d_model, d_hidden, true, rng),
            lin2: Linear::new(ps, &format!("{name}.ffn2"), d_hidden, d_model, true, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let h = self.lin1.forward(g, x);
        let h = g.tape.gelu(h);
        self.lin2.forward(g, h)
    }
}

/// Post-norm transformer encoder layer: self-attention and feed-forward,
/// each wrapped in residual + layer norm.
pub struct EncoderLayer {
    attn: MultiHeadAttention,
    ln1: LayerNorm,
    ffn: FeedForward,
    ln2: LayerNorm,
}

impl EncoderLayer {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        d_model: usize,
        n_heads: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        EncoderLayer {
            attn: MultiHeadAttention::new(ps, &format!("{name}.attn"), d_model, n_heads, rng),
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), d_model),
            ffn: FeedForward::new(ps, name, d_model, 4 * d_model, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), d_model),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId, allowed: &Array2<bool>) -> NodeId {
        let a = self.attn.forward(g, x, x, x, allowed);
        let a = g.maybe_dropout(a);
        let x = g.tape.add(x, a);
        let x = self.ln1.forward(g, x);
        let f = self.ffn.forward(g, x);
        let f = g.maybe_dropout(f);
        let x = g.tape.add(x, f);
        self.ln2.forward(g, x)
    }
}

/// Post-norm transformer decoder layer: causal self-attention, then
/// cross-attention over externally supplied keys/values, then feed-forward.
pub struct DecoderLayer {
    self_attn: MultiHeadAttention,
    ln1: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln2: LayerNorm,
    ffn: FeedForward,
    ln3: LayerNorm,
}

impl DecoderLayer {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        d_model: usize,
        n_heads: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        DecoderLayer {
            self_attn: MultiHeadAttention::new(ps, &format!("{name}.self"), d_model, n_heads, rng),
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), d_model),
            cross_attn: MultiHeadAttention::new(
                ps,
                &format!("{name}.cross"),
                d_model,
                n_heads,
                rng,
            ),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), d_model),
            ffn: FeedForward::new(ps, name, d_model, 4 * d_model, rng),
            ln3: LayerNorm::new(ps, &format!("{name}.ln3"), d_model),
        }
    }

    /// Cross-attention keys and values are passed separately so callers can
    /// infuse extra signal into keys while leaving values untouched.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: NodeId,
        enc_keys: NodeId,
        enc_values: NodeId,
        self_allowed: &Array2<bool>,
        cross_allowed: &Array2<bool>,
    ) -> NodeId {
        let a = self.self_attn.forward(g, x, x, x, self_allowed);
        let a = g.maybe_dropout(a);
        let x = g.tape.add(x, a);
        let x = self.ln1.forward(g, x);
        let c = self.cross_attn.forward(g, x, enc_keys, enc_values, cross_allowed);
        let c = g.maybe_dropout(c);
        let x = g.tape.add(x, c);
        let x = self.ln2.forward(g, x);
        let f = self.ffn.forward(g, x);
        let f = g.maybe_dropout(f);
        let x = g.tape.add(x, f);
        self.ln3.forward(g, x)
    }
}

/// Lower-triangular causal mask (row i may see columns 0..=i).
pub fn causal_mask(n: usize) -> Array2<bool> {
    Array2::from_shape_fn((n, n), |(i, j)| j <= i)
}
