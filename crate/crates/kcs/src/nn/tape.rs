//! Reverse-mode autodiff over `f64` matrices. Every value is an
//! `Array2<f64>`; vectors travel as 1 x d rows and scalars as 1 x 1.
//!
//! Ops record backward closures onto a tape; [`Tape::backward`] walks the
//! tape in reverse and accumulates gradients. An eval-only mode skips
//! closure recording, which keeps finite-difference sweeps cheap.

use ndarray::{s, Array2, Axis};
use rand::Rng;

pub type NodeId = usize;

type BackFn = Box<dyn Fn(&Array2<f64>) -> Array2<f64>>;

struct Edge {
    parent: NodeId,
    back: BackFn,
}

struct Node {
    value: Array2<f64>,
    edges: Vec<Edge>,
}

pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), recording: true }
    }

    /// Values only; backward closures are dropped. Used by finite-difference
    /// oracles and inference.
    pub fn eval_only() -> Self {
        Tape { nodes: Vec::new(), recording: false }
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Vec::new())
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.dim(), (1, 1));
        self.nodes[id].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, edges: Vec<Edge>) -> NodeId {
        let edges = if self.recording { edges } else { Vec::new() };
        self.nodes.push(Node { value, edges });
        self.nodes.len() - 1
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.nodes[a].value.clone();
        let vb = self.nodes[b].value.clone();
        let out = va.dot(&vb);
        let vb2 = vb.clone();
        let va2 = va.clone();
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(move |g| g.dot(&vb2.t())) },
                Edge { parent: b, back: Box::new(move |g| va2.t().dot(g)) },
            ],
        )
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.t().to_owned();
        self.push(
            out,
            vec![Edge { parent: a, back: Box::new(|g| g.t().to_owned()) }],
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = &self.nodes[a].value + &self.nodes[b].value;
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(|g| g.clone()) },
                Edge { parent: b, back: Box::new(|g| g.clone()) },
            ],
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = &self.nodes[a].value - &self.nodes[b].value;
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(|g| g.clone()) },
                Edge { parent: b, back: Box::new(|g| -g) },
            ],
        )
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.nodes[a].value.clone();
        let vb = self.nodes[b].value.clone();
        let out = &va * &vb;
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(move |g| g * &vb) },
                Edge { parent: b, back: Box::new(move |g| g * &va) },
            ],
        )
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = &self.nodes[a].value * c;
        self.push(
            out,
            vec![Edge { parent: a, back: Box::new(move |g| g * c) }],
        )
    }

    /// `a + c * b`, same shapes.
    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, c: f64) -> NodeId {
        let out = &self.nodes[a].value + &(&self.nodes[b].value * c);
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(|g| g.clone()) },
                Edge { parent: b, back: Box::new(move |g| g * c) },
            ],
        )
    }

    /// Broadcast-add a 1 x d row onto every row of an M x d matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let vr = &self.nodes[row].value;
        debug_assert_eq!(vr.nrows(), 1);
        let out = va + &vr.broadcast(va.raw_dim()).unwrap();
        self.push(
            out,
            vec![
                Edge { parent: a, back: Box::new(|g| g.clone()) },
                Edge {
                    parent: row,
                    back: Box::new(|g| g.sum_axis(Axis(0)).insert_axis(Axis(0))),
                },
            ],
        )
    }

    /// Repeat a 1 x d row M times.
    pub fn broadcast_row(&mut self, row: NodeId, m: usize) -> NodeId {
        let vr = &self.nodes[row].value;
        debug_assert_eq!(vr.nrows(), 1);
        let out = vr.broadcast((m, vr.ncols())).unwrap().to_owned();
        self.push(
            out,
            vec![Edge {
                parent: row,
                back: Box::new(|g| g.sum_axis(Axis(0)).insert_axis(Axis(0))),
            }],
        )
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.nodes[parts[0]].value.ncols();
        let total: usize = parts.iter().map(|&p| self.nodes[p].value.nrows()).sum();
        let mut out = Array2::zeros((total, cols));
        let mut edges = Vec::with_capacity(parts.len());
        let mut offset = 0usize;
        for &p in parts {
            let v = &self.nodes[p].value;
            let n = v.nrows();
            out.slice_mut(s![offset..offset + n, ..]).assign(v);
            let (start, len) = (offset, n);
            edges.push(Edge {
                parent: p,
                back: Box::new(move |g| g.slice(s![start..start + len, ..]).to_owned()),
            });
            offset += n;
        }
        self.push(out, edges)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.nodes[parts[0]].value.nrows();
        let total: usize = parts.iter().map(|&p| self.nodes[p].value.ncols()).sum();
        let mut out = Array2::zeros((rows, total));
        let mut edges = Vec::with_capacity(parts.len());
        let mut offset = 0usize;
        for &p in parts {
            let v = &self.nodes[p].value;
            let n = v.ncols();
            out.slice_mut(s![.., offset..offset + n]).assign(v);
            let (start, len) = (offset, n);
            edges.push(Edge {
                parent: p,
                back: Box::new(move |g| g.slice(s![.., start..start + len]).to_owned()),
            });
            offset += n;
        }
        self.push(out, edges)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = &self.nodes[a].value;
        let (rows, cols) = v.dim();
        let out = v.slice(s![.., start..end]).to_owned();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros((rows, cols));
                    da.slice_mut(s![.., start..end]).assign(g);
                    da
                }),
            }],
        )
    }

    /// Gather rows by index; duplicate indices accumulate in backward.
    pub fn gather_rows(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let v = &self.nodes[a].value;
        let (rows, cols) = v.dim();
        let mut out = Array2::zeros((idx.len(), cols));
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).assign(&v.row(i));
        }
        let idx = idx.to_vec();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros((rows, cols));
                    for (k, &i) in idx.iter().enumerate() {
                        let mut row = da.row_mut(i);
                        row += &g.row(k);
                    }
                    da
                }),
            }],
        )
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a].value;
        let m = v.nrows() as f64;
        let out = (v.sum_axis(Axis(0)) / m).insert_axis(Axis(0));
        let rows = v.nrows();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    g.broadcast((rows, g.ncols())).unwrap().to_owned() / m
                }),
            }],
        )
    }

    /// GELU, tanh approximation. Smooth, so finite-difference checks stay
    /// well behaved.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        const C: f64 = 0.7978845608028654; // sqrt(2/pi)
        const A3: f64 = 0.044715;
        let x = self.nodes[a].value.clone();
        let out = x.mapv(|v| {
            let u = C * (v + A3 * v * v * v);
            0.5 * v * (1.0 + u.tanh())
        });
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let dydx = x.mapv(|v| {
                        let u = C * (v + A3 * v * v * v);
                        let t = u.tanh();
                        0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * C * (1.0 + 3.0 * A3 * v * v)
                    });
                    g * &dydx
                }),
            }],
        )
    }

    /// Row-wise layer normalization with per-feature gain/bias (1 x d each).
    pub fn layer_norm(&mut self, a: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
        let x = self.nodes[a].value.clone();
        let g_ = self.nodes[gamma].value.clone();
        let b_ = self.nodes[beta].value.clone();
        let d = x.ncols() as f64;

        let mut xhat = Array2::zeros(x.raw_dim());
        let mut sigma = Vec::with_capacity(x.nrows());
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            let mu = row.sum() / d;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / d;
            let sd = (var + eps).sqrt();
            sigma.push(sd);
            for (j, &v) in row.iter().enumerate() {
                xhat[[i, j]] = (v - mu) / sd;
            }
        }
        let out = &xhat * &g_.broadcast(x.raw_dim()).unwrap() + &b_.broadcast(x.raw_dim()).unwrap();

        let xhat_a = xhat.clone();
        let g_a = g_.clone();
        let sigma_a = sigma.clone();
        let xhat_g = xhat;
        self.push(
            out,
            vec![
                Edge {
                    parent: a,
                    back: Box::new(move |g| {
                        let mut da = Array2::zeros(g.raw_dim());
                        for i in 0..g.nrows() {
                            let ghat: Vec<f64> =
                                (0..g.ncols()).map(|j| g[[i, j]] * g_a[[0, j]]).collect();
                            let mean_g = ghat.iter().sum::<f64>() / d;
                            let mean_gx = ghat
                                .iter()
                                .enumerate()
                                .map(|(j, &v)| v * xhat_a[[i, j]])
                                .sum::<f64>()
                                / d;
                            for j in 0..g.ncols() {
                                da[[i, j]] = (ghat[j] - mean_g - xhat_a[[i, j]] * mean_gx)
                                    / sigma_a[i];
                            }
                        }
                        da
                    }),
                },
                Edge {
                    parent: gamma,
                    back: Box::new(move |g| {
                        (g * &xhat_g).sum_axis(Axis(0)).insert_axis(Axis(0))
                    }),
                },
                Edge {
                    parent: beta,
                    back: Box::new(|g| g.sum_axis(Axis(0)).insert_axis(Axis(0))),
                },
            ],
        )
    }

    /// Row-wise softmax restricted to `allowed` positions; disallowed
    /// entries are exactly 0. Rows with no allowed entry come out all-zero.
    pub fn softmax_rows_masked(&mut self, a: NodeId, allowed: &Array2<bool>) -> NodeId {
        let x = &self.nodes[a].value;
        debug_assert_eq!(x.raw_dim(), allowed.raw_dim());
        let mut out = Array2::zeros(x.raw_dim());
        for i in 0..x.nrows() {
            let mut max = f64::NEG_INFINITY;
            for j in 0..x.ncols() {
                if allowed[[i, j]] && x[[i, j]] > max {
                    max = x[[i, j]];
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut denom = 0.0;
            for j in 0..x.ncols() {
                if allowed[[i, j]] {
                    let e = (x[[i, j]] - max).exp();
                    out[[i, j]] = e;
                    denom += e;
                }
            }
            for j in 0..x.ncols() {
                out[[i, j]] /= denom;
            }
        }
        let y = out.clone();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros(g.raw_dim());
                    for i in 0..g.nrows() {
                        let dot: f64 =
                            (0..g.ncols()).map(|j| g[[i, j]] * y[[i, j]]).sum();
                        for j in 0..g.ncols() {
                            da[[i, j]] = y[[i, j]] * (g[[i, j]] - dot);
                        }
                    }
                    da
                }),
            }],
        )
    }

    /// L2-normalize each row; rows with norm below `eps` divide by `eps`.
    pub fn normalize_rows(&mut self, a: NodeId, eps: f64) -> NodeId {
        let x = &self.nodes[a].value;
        let mut out = Array2::zeros(x.raw_dim());
        let mut norms = Vec::with_capacity(x.nrows());
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            let n = row.iter().map(|&v| v * v).sum::<f64>().sqrt().max(eps);
            norms.push(n);
            for (j, &v) in row.iter().enumerate() {
                out[[i, j]] = v / n;
            }
        }
        let y = out.clone();
        let x_ = self.nodes[a].value.clone();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros(g.raw_dim());
                    for i in 0..g.nrows() {
                        let n = norms[i];
                        let xnorm =
                            x_.row(i).iter().map(|&v| v * v).sum::<f64>().sqrt();
                        if xnorm < n {
                            // Clamped: y = x / eps, constant denominator.
                            for j in 0..g.ncols() {
                                da[[i, j]] = g[[i, j]] / n;
                            }
                        } else {
                            let dot: f64 =
                                (0..g.ncols()).map(|j| g[[i, j]] * y[[i, j]]).sum();
                            for j in 0..g.ncols() {
                                da[[i, j]] = (g[[i, j]] - y[[i, j]] * dot) / n;
                            }
                        }
                    }
                    da
                }),
            }],
        )
    }

    /// Extract one element as a 1 x 1 node.
    pub fn pick(&mut self, a: NodeId, i: usize, j: usize) -> NodeId {
        let (rows, cols) = self.nodes[a].value.dim();
        let out = Array2::from_elem((1, 1), self.nodes[a].value[[i, j]]);
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros((rows, cols));
                    da[[i, j]] = g[[0, 0]];
                    da
                }),
            }],
        )
    }

    /// log-sum-exp over the allowed entries of row `row`, as a 1 x 1 node.
    pub fn log_sum_exp_row(&mut self, a: NodeId, row: usize, allowed: &[bool]) -> NodeId {
        let x = &self.nodes[a].value;
        debug_assert_eq!(allowed.len(), x.ncols());
        let (rows, cols) = x.dim();
        let mut max = f64::NEG_INFINITY;
        for j in 0..cols {
            if allowed[j] && x[[row, j]] > max {
                max = x[[row, j]];
            }
        }
        assert!(max > f64::NEG_INFINITY, "log_sum_exp over empty set");
        let mut denom = 0.0;
        for j in 0..cols {
            if allowed[j] {
                denom += (x[[row, j]] - max).exp();
            }
        }
        let out = Array2::from_elem((1, 1), max + denom.ln());
        let softmax: Vec<f64> = (0..cols)
            .map(|j| {
                if allowed[j] {
                    (x[[row, j]] - max).exp() / denom
                } else {
                    0.0
                }
            })
            .collect();
        self.push(
            out,
            vec![Edge {
                parent: a,
                back: Box::new(move |g| {
                    let mut da = Array2::zeros((rows, cols));
                    for (j, &p) in softmax.iter().enumerate() {
                        da[[row, j]] = g[[0, 0]] * p;
                    }
                    da
                }),
            }],
        )
    }

    /// Arithmetic mean of 1 x 1 nodes.
    pub fn mean_scalars(&mut self, parts: &[NodeId]) -> NodeId {
        let n = parts.len() as f64;
        let total: f64 = parts.iter().map(|&p| self.nodes[p].value[[0, 0]]).sum();
        let out = Array2::from_elem((1, 1), total / n);
        let edges = parts
            .iter()
            .map(|&p| Edge {
                parent: p,
                back: Box::new(move |g: &Array2<f64>| g / n) as BackFn,
            })
            .collect();
        self.push(out, edges)
    }

    /// Inverted dropout with an externally provided RNG.
    pub fn dropout(&mut self, a: NodeId, rate: f64, rng: &mut impl Rng) -> NodeId {
        if rate <= 0.0 {
            return a;
        }
        let keep = 1.0 - rate;
        let v = &self.nodes[a].value;
        let mask = Array2::from_shape_fn(v.raw_dim(), |_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let out = v * &mask;
        self.push(
            out,
            vec![Edge { parent: a, back: Box::new(move |g| g * &mask) }],
        )
    }

    /// Gradients of a scalar root with respect to every node. Nodes the
    /// root does not depend on get `None`.
    pub fn backward(&self, root: NodeId) -> Vec<Option<Array2<f64>>> {
        assert_eq!(self.nodes[root].value.dim(), (1, 1), "backward root must be scalar");
        assert!(self.recording, "backward on an eval-only tape");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Array2::from_elem((1, 1), 1.0));
        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            for edge in &self.nodes[id].edges {
                let contrib = (edge.back)(&g);
                match &mut grads[edge.parent] {
                    Some(acc) => *acc += &contrib,
                    slot => *slot = Some(contrib),
                }
            }
            grads[id] = Some(g);
        }
        grads
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}
