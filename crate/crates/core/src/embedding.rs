//! Graph autoencoder: two-layer GCN encoder, inner-product decoder.
//!
//! `Z = Ã·ReLU(Ã·X·W0)·W1`, `Â = σ(Z·Zᵀ)`, trained full-batch with Adam on a
//! positively reweighted binary cross-entropy against `A + I`. Gradients are
//! derived by hand.

use ndarray::{Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

pub const FEATURE_DIM: usize = 4;
const PROB_CLIP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaeHyper {
    pub hidden: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GaeHyper {
    fn default() -> Self {
        GaeHyper {
            hidden: 32,
            embed_dim: 16,
            epochs: 300,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Node features: scaled degree, closeness within the node's component,
/// community size fraction, and the fraction of the node's edges that stay
/// inside its community. All lie in [0, 1].
pub fn build_features(g: &Graph, p: &Partition) -> Result<Array2<f64>> {
    p.check_covers(g)?;
    let n = g.node_count();
    let dmax = g.max_degree() as f64;
    let mut x = Array2::zeros((n, FEATURE_DIM));
    for v in 0..n {
        let deg = g.degree(v);
        x[[v, 0]] = if dmax > 0.0 { deg as f64 / dmax } else { 0.0 };
        let (reached, total) = g
            .bfs_distances(v)
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(c, s), &d| (c + 1, s + d));
        x[[v, 1]] = if total > 0 {
            (reached - 1) as f64 / total as f64
        } else {
            0.0
        };
        let c = p.community_of(v);
        x[[v, 2]] = p.communities()[c].len() as f64 / n as f64;
        let intra = g
            .neighbors(v)
            .iter()
            .filter(|&&u| p.community_of(u) == c)
            .count();
        x[[v, 3]] = if deg > 0 {
            intra as f64 / deg as f64
        } else {
            0.0
        };
    }
    Ok(x)
}

/// `D^{-1/2}(A + I)D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut a = Array2::zeros((n, n));
    for v in 0..n {
        a[[v, v]] = inv_sqrt[v] * inv_sqrt[v];
        for &u in g.neighbors(v) {
            a[[v, u]] = inv_sqrt[v] * inv_sqrt[u];
        }
    }
    a
}

/// Binary reconstruction target `A + I`.
pub fn target_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.node_count();
    let mut a = Array2::eye(n);
    for e in g.edges() {
        a[[e.0, e.1]] = 1.0;
        a[[e.1, e.0]] = 1.0;
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl GcnParams {
    /// Uniform in ±1/√fan_in.
    pub fn init(feature_dim: usize, hidden: usize, embed_dim: usize, rng: &mut impl Rng) -> Self {
        let mut fill = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
        };
        let w0 = fill(feature_dim, hidden);
        let w1 = fill(hidden, embed_dim);
        GcnParams { w0, w1 }
    }

    pub fn zeros_like(&self) -> Self {
        GcnParams {
            w0: Array2::zeros(self.w0.raw_dim()),
            w1: Array2::zeros(self.w1.raw_dim()),
        }
    }

    /// Text format: a `gcn-params v1` line, then per matrix a
    /// `<name> <rows> <cols>` line followed by one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("gcn-params v1\n");
        for (name, m) in [("w0", &self.w0), ("w1", &self.w1)] {
            s.push_str(&matrix_to_text(name, m));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("gcn-params v1") {
            return Err(Error::Shape("missing `gcn-params v1` header".into()));
        }
        let w0 = matrix_from_lines("w0", &mut lines)?;
        let w1 = matrix_from_lines("w1", &mut lines)?;
        if w0.ncols() != w1.nrows() {
            return Err(Error::Shape("w0 columns must match w1 rows".into()));
        }
        Ok(GcnParams { w0, w1 })
    }
}

pub(crate) fn matrix_to_text(name: &str, m: &Array2<f64>) -> String {
    let mut s = format!("{name} {} {}\n", m.nrows(), m.ncols());
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

pub(crate) fn matrix_from_lines<'a>(
    name: &str,
    lines: &mut impl Iterator<Item = &'a str>,
) -> Result<Array2<f64>> {
    let bad = |msg: String| Error::Shape(format!("{name}: {msg}"));
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != name {
        return Err(bad(format!("bad header `{header}`")));
    }
    let rows: usize = parts[1].parse().map_err(|_| bad("bad row count".into()))?;
    let cols: usize = parts[2]
        .parse()
        .map_err(|_| bad("bad column count".into()))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines.next().ok_or_else(|| bad("truncated".into()))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("bad value `{tok}`")))?,
            );
        }
        if data.len() - before != cols {
            return Err(bad("wrong number of columns".into()));
        }
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| bad(e.to_string()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_shapes(params: &GcnParams, x: &Array2<f64>, a_norm: &Array2<f64>) -> Result<()> {
    let n = a_norm.nrows();
    if a_norm.ncols() != n || x.nrows() != n {
        return Err(Error::Shape(format!(
            "adjacency is {}x{}, features have {} rows",
            a_norm.nrows(),
            a_norm.ncols(),
            x.nrows()
        )));
    }
    if params.w0.nrows() != x.ncols() || params.w1.nrows() != params.w0.ncols() {
        return Err(Error::Shape(format!(
            "features {} -> w0 {}x{} -> w1 {}x{}",
            x.ncols(),
            params.w0.nrows(),
            params.w0.ncols(),
            params.w1.nrows(),
            params.w1.ncols()
        )));
    }
    Ok(())
}

struct Forward {
    ax: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
    z: Array2<f64>,
    logits: Array2<f64>,
}

fn forward(params: &GcnParams, x: &Array2<f64>, a_norm: &Array2<f64>) -> Forward {
    let ax = a_norm.dot(x);
    let pre = ax.dot(&params.w0);
    let relu = pre.mapv(|v| v.max(0.0));
    let hidden = a_norm.dot(&relu);
    let z = hidden.dot(&params.w1);
    let logits = z.dot(&z.t());
    Forward {
        ax,
        pre,
        hidden,
        z,
        logits,
    }
}

/// Encoder output `Z` and reconstruction `Â`.
pub fn gae_forward(
    params: &GcnParams,
    x: &Array2<f64>,
    a_norm: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_shapes(params, x, a_norm)?;
    let f = forward(params, x, a_norm);
    let a_hat = f.logits.mapv(sigmoid);
    Ok((f.z, a_hat))
}

fn positive_weight(target: &Array2<f64>) -> f64 {
    let total = target.len() as f64;
    let pos = target.iter().filter(|&&y| y > 0.5).count() as f64;
    if pos == 0.0 {
        1.0
    } else {
        (total - pos) / pos
    }
}

/// Mean weighted BCE over all N² entries; positives carry weight
/// `(N² − |pos|)/|pos|`. Probabilities are clipped to [1e-7, 1 − 1e-7].
pub fn reconstruction_loss(a_hat: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if a_hat.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "{:?} vs {:?}",
            a_hat.dim(),
            target.dim()
        )));
    }
    let w = positive_weight(target);
    let mut sum = 0.0;
    Zip::from(a_hat).and(target).for_each(|&p, &y| {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        sum -= w * y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    });
    Ok(sum / a_hat.len() as f64)
}

/// Same loss evaluated from logits; matches [`reconstruction_loss`] wherever
/// clipping is inactive and has exact gradients.
fn logit_loss(logits: &Array2<f64>, target: &Array2<f64>, w: f64) -> f64 {
    let mut sum = 0.0;
    Zip::from(logits).and(target).for_each(|&l, &y| {
        sum += w * y * softplus(-l) + (1.0 - y) * softplus(l);
    });
    sum / logits.len() as f64
}

/// Loss and gradients with respect to both weight matrices.
pub fn loss_and_gradients(
    params: &GcnParams,
    x: &Array2<f64>,
    a_norm: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<(f64, GcnParams)> {
    check_shapes(params, x, a_norm)?;
    if target.dim() != a_norm.dim() {
        return Err(Error::Shape("target must match adjacency".into()));
    }
    let f = forward(params, x, a_norm);
    let w = positive_weight(target);
    let loss = logit_loss(&f.logits, target, w);
    let scale = 1.0 / f.logits.len() as f64;
    let mut g_logits = Array2::zeros(f.logits.raw_dim());
    Zip::from(&mut g_logits)
        .and(&f.logits)
        .and(target)
        .for_each(|g, &l, &y| {
            let s = sigmoid(l);
            *g = scale * (w * y * (s - 1.0) + (1.0 - y) * s);
        });
    // logits = Z Zᵀ with a symmetric upstream gradient
    let g_z = (&g_logits + &g_logits.t()).dot(&f.z);
    let g_w1 = f.hidden.t().dot(&g_z);
    let g_hidden = g_z.dot(&params.w1.t());
    let mut g_pre = a_norm.t().dot(&g_hidden);
    Zip::from(&mut g_pre).and(&f.pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    let g_w0 = f.ax.t().dot(&g_pre);
    Ok((loss, GcnParams { w0: g_w0, w1: g_w1 }))
}

pub(crate) struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub(crate) fn new(lr: f64, shapes: &[&Array2<f64>]) -> Self {
        Adam {
            lr,
            t: 0,
            m: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
            v: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
        }
    }

    pub(crate) fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[&Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            Zip::from(&mut **p)
                .and(&mut self.m[k])
                .and(&mut self.v[k])
                .and(*g)
                .for_each(|p, m, v, &g| {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                });
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedGae {
    pub params: GcnParams,
    pub embeddings: Array2<f64>,
    /// Loss before each update, then the final loss.
    pub losses: Vec<f64>,
}

pub fn train_gae(g: &Graph, p: &Partition, hyper: &GaeHyper) -> Result<TrainedGae> {
    if g.node_count() == 0 {
        return Err(Error::Shape("cannot embed an empty graph".into()));
    }
    let x = build_features(g, p)?;
    let a_norm = normalized_adjacency(g);
    let target = target_adjacency(g);
    let mut rng = rng::substream(hyper.seed, "gae", &[]);
    let mut params = GcnParams::init(FEATURE_DIM, hyper.hidden, hyper.embed_dim, &mut rng);
    let mut adam = Adam::new(hyper.learning_rate, &[&params.w0, &params.w1]);
    let mut losses = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..hyper.epochs {
        let (loss, grads) = loss_and_gradients(&params, &x, &a_norm, &target)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
        adam.step(
            &mut [&mut params.w0, &mut params.w1],
            &[&grads.w0, &grads.w1],
        );
    }
    let f = forward(&params, &x, &a_norm);
    let final_loss = logit_loss(&f.logits, &target, positive_weight(&target));
    if !final_loss.is_finite() || f.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            epoch: hyper.epochs,
            loss: final_loss,
        });
    }
    losses.push(final_loss);
    Ok(TrainedGae {
        params,
        embeddings: f.z,
        losses,
    })
}

/// Row-wise Euclidean distance between two embedding rows.
pub(crate) fn row_distance_sq(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    a.index_axis(Axis(0), i)
        .iter()
        .zip(b.index_axis(Axis(0), j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
