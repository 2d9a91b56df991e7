//! Two-layer graph convolution with in/out-degree node features.
//!
//! Propagation uses the symmetric-normalized undirected adjacency with
//! self-loops; direction information survives in the degree features.
//! The stack (conv layers + mean pooling) is shared: the substitute
//! model puts a linear readout on top, the GCN detector a two-layer
//! dense head. All gradients are explicit backpropagation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use fcg_core::FunctionCallGraph;

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: &'static str },

    #[error("training diverged: loss is non-finite")]
    Diverged,

    #[error("insertion endpoint {0} is not a node of the graph")]
    UnknownNode(u32),
}

/// Sparse symmetric-normalized adjacency (with self-loops) of the
/// undirected, count-weighted graph plus any inserted edges.
#[derive(Debug, Clone)]
pub struct NormAdj {
    pub n: usize,
    /// (row, col, weight) triples, both directions present.
    triples: Vec<(u32, u32, f64)>,
}

impl NormAdj {
    /// y = Â x for row-major x of width `k`.
    pub fn matmul(&self, x: &[f64], k: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n * k);
        out.fill(0.0);
        for &(i, j, w) in &self.triples {
            let (i, j) = (i as usize, j as usize);
            let src = &x[j * k..j * k + k];
            let dst = &mut out[i * k..i * k + k];
            for c in 0..k {
                dst[c] += w * src[c];
            }
        }
    }
}

/// Maps node ids to dense indices 0..n following the sorted node order.
fn node_positions(g: &FunctionCallGraph) -> BTreeMap<u32, usize> {
    g.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect()
}

/// Builds Â = D^{-1/2} (A_und + I) D^{-1/2} for `g` with `insertions`
/// applied, where A_und sums call counts in both directions.
pub fn norm_adjacency(
    g: &FunctionCallGraph,
    insertions: &[(u32, u32)],
) -> Result<NormAdj, GcnError> {
    let pos = node_positions(g);
    let n = g.nodes.len();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut add = |u: u32, v: u32, c: f64| -> Result<(), GcnError> {
        let (&i, &j) = (
            pos.get(&u).ok_or(GcnError::UnknownNode(u))?,
            pos.get(&v).ok_or(GcnError::UnknownNode(v))?,
        );
        *weights.entry((i, j)).or_insert(0.0) += c;
        if i != j {
            *weights.entry((j, i)).or_insert(0.0) += c;
        }
        Ok(())
    };
    for (&(u, v), &c) in &g.edges {
        add(u, v, c as f64)?;
    }
    for &(u, v) in insertions {
        add(u, v, 1.0)?;
    }
    for i in 0..n {
        *weights.entry((i, i)).or_insert(0.0) += 1.0; // self-loop
    }
    let mut degree = vec![0.0f64; n];
    for (&(i, _), &w) in &weights {
        degree[i] += w;
    }
    let triples = weights
        .into_iter()
        .map(|((i, j), w)| {
            let norm = w / (degree[i].sqrt() * degree[j].sqrt());
            (i as u32, j as u32, norm)
        })
        .collect();
    Ok(NormAdj { n, triples })
}

/// Per-node (out-degree, in-degree) counting multiplicities, scaled
/// column-wise by 1/(1 + max) so every entry stays below 1.
pub fn degree_features(g: &FunctionCallGraph) -> Vec<f64> {
    degree_features_with(g, &[]).expect("no insertions, no unknown nodes")
}

/// Degree features of `g` with `insertions` applied.
pub fn degree_features_with(
    g: &FunctionCallGraph,
    insertions: &[(u32, u32)],
) -> Result<Vec<f64>, GcnError> {
    let pos = node_positions(g);
    let n = g.nodes.len();
    let mut raw = vec![0.0f64; n * 2];
    for (&(u, v), &c) in &g.edges {
        raw[pos[&u] * 2] += c as f64;
        raw[pos[&v] * 2 + 1] += c as f64;
    }
    for &(u, v) in insertions {
        let i = *pos.get(&u).ok_or(GcnError::UnknownNode(u))?;
        let j = *pos.get(&v).ok_or(GcnError::UnknownNode(v))?;
        raw[i * 2] += 1.0;
        raw[j * 2 + 1] += 1.0;
    }
    for col in 0..2 {
        let max = (0..n).map(|i| raw[i * 2 + col]).fold(0.0f64, f64::max);
        let scale = 1.0 / (1.0 + max);
        for i in 0..n {
            raw[i * 2 + col] *= scale;
        }
    }
    Ok(raw)
}

/// The two convolution layers and mean pooling, without a head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcnStack {
    pub hidden: usize,
    /// 2 x hidden, row-major
    pub w1: Vec<f64>,
    /// hidden x hidden, row-major
    pub w2: Vec<f64>,
}

/// Forward activations kept for backprop.
pub struct StackCache {
    n: usize,
    ah0: Vec<f64>,   // n x 2, Â H0
    z1: Vec<f64>,    // n x h
    ah1: Vec<f64>,   // n x h, Â H1
    z2: Vec<f64>,    // n x h
    pub pooled: Vec<f64>, // h
}

/// Gradients of the stack parameters.
#[derive(Debug, Clone)]
pub struct StackGrads {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl StackGrads {
    pub fn zeros(hidden: usize) -> Self {
        StackGrads {
            w1: vec![0.0; 2 * hidden],
            w2: vec![0.0; hidden * hidden],
        }
    }
}

impl GcnStack {
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        // He-style scaling per fan-in
        let mut draw = |fan_in: usize, len: usize| {
            let std = (2.0 / fan_in as f64).sqrt();
            (0..len)
                .map(|_| standard_normal(rng) * std)
                .collect::<Vec<f64>>()
        };
        GcnStack {
            hidden,
            w1: draw(2, 2 * hidden),
            w2: draw(hidden, hidden * hidden),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        GcnStack {
            hidden,
            w1: vec![0.0; 2 * hidden],
            w2: vec![0.0; hidden * hidden],
        }
    }

    /// H0 -> relu(Â H0 W1) -> relu(Â H1 W2) -> column mean.
    pub fn forward(&self, adj: &NormAdj, feats: &[f64]) -> Result<StackCache, GcnError> {
        let (n, h) = (adj.n, self.hidden);
        let mut ah0 = vec![0.0; n * 2];
        adj.matmul(feats, 2, &mut ah0);
        let z1 = dense(&ah0, n, 2, &self.w1, h);
        check_finite(&z1, "conv1")?;
        let h1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
        let mut ah1 = vec![0.0; n * h];
        adj.matmul(&h1, h, &mut ah1);
        let z2 = dense(&ah1, n, h, &self.w2, h);
        check_finite(&z2, "conv2")?;
        let h2: Vec<f64> = z2.iter().map(|&v| v.max(0.0)).collect();
        let mut pooled = vec![0.0; h];
        for row in 0..n {
            for c in 0..h {
                pooled[c] += h2[row * h + c];
            }
        }
        for v in &mut pooled {
            *v /= n as f64;
        }
        check_finite(&pooled, "pool")?;
        Ok(StackCache {
            n,
            ah0,
            z1,
            ah1,
            z2,
            pooled,
        })
    }

    /// Accumulates parameter gradients for d(loss)/d(pooled) into `grads`.
    pub fn backward(
        &self,
        adj: &NormAdj,
        cache: &StackCache,
        dpooled: &[f64],
        grads: &mut StackGrads,
    ) {
        let (n, h) = (cache.n, self.hidden);
        // mean pool: dH2[r][c] = dpooled[c] / n, masked by relu'(z2)
        let mut dz2 = vec![0.0; n * h];
        for row in 0..n {
            for c in 0..h {
                if cache.z2[row * h + c] > 0.0 {
                    dz2[row * h + c] = dpooled[c] / n as f64;
                }
            }
        }
        // z2 = (Â H1) W2
        acc_dense_weight_grad(&cache.ah1, n, h, &dz2, h, &mut grads.w2);
        let dah1 = dense_transposed(&dz2, n, h, &self.w2, h);
        // Â is symmetric, so d(H1) = Â d(Â H1)
        let mut dh1 = vec![0.0; n * h];
        adj.matmul(&dah1, h, &mut dh1);
        let mut dz1 = dh1;
        for (i, v) in dz1.iter_mut().enumerate() {
            if cache.z1[i] <= 0.0 {
                *v = 0.0;
            }
        }
        acc_dense_weight_grad(&cache.ah0, n, 2, &dz1, h, &mut grads.w1);
    }

    pub fn apply_grads(&mut self, grads: &StackGrads, lr: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grads.w1) {
            *w -= lr * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grads.w2) {
            *w -= lr * g;
        }
    }
}

/// out (n x k) = x (n x m) . w (m x k)
fn dense(x: &[f64], n: usize, m: usize, w: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    for row in 0..n {
        for mid in 0..m {
            let xv = x[row * m + mid];
            if xv == 0.0 {
                continue;
            }
            let wrow = &w[mid * k..mid * k + k];
            let orow = &mut out[row * k..row * k + k];
            for c in 0..k {
                orow[c] += xv * wrow[c];
            }
        }
    }
    out
}

/// out (n x m) = dy (n x k) . w^T (k x m)
fn dense_transposed(dy: &[f64], n: usize, k: usize, w: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for row in 0..n {
        for c in 0..k {
            let dv = dy[row * k + c];
            if dv == 0.0 {
                continue;
            }
            for mid in 0..m {
                out[row * m + mid] += dv * w[mid * k + c];
            }
        }
    }
    out
}

/// dw (m x k) += x^T (m x n) . dy (n x k)
fn acc_dense_weight_grad(x: &[f64], n: usize, m: usize, dy: &[f64], k: usize, dw: &mut [f64]) {
    for row in 0..n {
        for mid in 0..m {
            let xv = x[row * m + mid];
            if xv == 0.0 {
                continue;
            }
            let dyrow = &dy[row * k..row * k + k];
            let dwrow = &mut dw[mid * k..mid * k + k];
            for c in 0..k {
                dwrow[c] += xv * dyrow[c];
            }
        }
    }
}

fn check_finite(values: &[f64], layer: &'static str) -> Result<(), GcnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GcnError::NonFinite { layer })
    }
}

/// Box-Muller standard normal draw; keeps rand_distr out of the
/// dependency set for this crate.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.random();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// The substitute network: conv stack plus a linear logistic readout.
/// Scores are probabilities of the malicious class in (0, 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcnModel {
    pub stack: GcnStack,
    /// hidden-long readout weights
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl GcnModel {
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let stack = GcnStack::init(hidden, rng);
        let std = (1.0 / hidden as f64).sqrt();
        let w_out = (0..hidden).map(|_| standard_normal(rng) * std).collect();
        GcnModel {
            stack,
            w_out,
            b_out: 0.0,
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        GcnModel {
            stack: GcnStack::zeros(hidden),
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    /// Probability that the perturbed graph is malicious.
    pub fn score(&self, g: &FunctionCallGraph, insertions: &[(u32, u32)]) -> Result<f64, GcnError> {
        let adj = norm_adjacency(g, insertions)?;
        let feats = degree_features_with(g, insertions)?;
        let cache = self.stack.forward(&adj, &feats)?;
        Ok(self.score_pooled(&cache.pooled))
    }

    /// Smallest |pre-activation| across both conv layers. Finite
    /// difference gradient checks are only valid when no rectifier
    /// input sits within the probe step of its kink; callers use this
    /// to reject such configurations.
    pub fn min_kink_margin(
        &self,
        g: &FunctionCallGraph,
        insertions: &[(u32, u32)],
    ) -> Result<f64, GcnError> {
        let adj = norm_adjacency(g, insertions)?;
        let feats = degree_features_with(g, insertions)?;
        let cache = self.stack.forward(&adj, &feats)?;
        let margin = cache
            .z1
            .iter()
            .chain(cache.z2.iter())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()));
        Ok(margin)
    }

    fn score_pooled(&self, pooled: &[f64]) -> f64 {
        let z: f64 = pooled
            .iter()
            .zip(&self.w_out)
            .map(|(p, w)| p * w)
            .sum::<f64>()
            + self.b_out;
        sigmoid(z)
    }

    /// Mean binary cross-entropy of the batch without touching
    /// parameters.
    pub fn batch_loss(
        &self,
        batch: &[(&FunctionCallGraph, &[(u32, u32)], bool)],
    ) -> Result<f64, GcnError> {
        assert!(!batch.is_empty(), "batch must be non-empty");
        let mut loss_sum = 0.0;
        for &(g, insertions, malicious) in batch {
            let p = self.score(g, insertions)?;
            loss_sum += bce(p, malicious);
        }
        Ok(loss_sum / batch.len() as f64)
    }

    /// Mean loss and full-batch gradients of every parameter.
    pub fn batch_grads(
        &self,
        batch: &[(&FunctionCallGraph, &[(u32, u32)], bool)],
    ) -> Result<(f64, GcnGrads), GcnError> {
        assert!(!batch.is_empty(), "batch must be non-empty");
        let h = self.stack.hidden;
        let mut grads = GcnGrads {
            stack: StackGrads::zeros(h),
            w_out: vec![0.0; h],
            b_out: 0.0,
        };
        let mut loss_sum = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &(g, insertions, malicious) in batch {
            let adj = norm_adjacency(g, insertions)?;
            let feats = degree_features_with(g, insertions)?;
            let cache = self.stack.forward(&adj, &feats)?;
            let p = self.score_pooled(&cache.pooled);
            loss_sum += bce(p, malicious);
            // d(loss)/d(logit) = p - y
            let y = if malicious { 1.0 } else { 0.0 };
            let dz = (p - y) * scale;
            grads.b_out += dz;
            let mut dpooled = vec![0.0; h];
            for c in 0..h {
                grads.w_out[c] += dz * cache.pooled[c];
                dpooled[c] = dz * self.w_out[c];
            }
            self.stack.backward(&adj, &cache, &dpooled, &mut grads.stack);
        }
        Ok((loss_sum * scale, grads))
    }

    /// One full-batch gradient step of binary cross-entropy; returns
    /// the mean loss over the batch before the step.
    pub fn train_epoch(
        &mut self,
        batch: &[(&FunctionCallGraph, &[(u32, u32)], bool)],
        lr: f64,
    ) -> Result<f64, GcnError> {
        let (mean_loss, grads) = self.batch_grads(batch)?;
        if !mean_loss.is_finite() {
            return Err(GcnError::Diverged);
        }
        self.stack.apply_grads(&grads.stack, lr);
        for (w, g) in self.w_out.iter_mut().zip(&grads.w_out) {
            *w -= lr * g;
        }
        self.b_out -= lr * grads.b_out;
        Ok(mean_loss)
    }
}

/// Gradients of every substitute-model parameter.
#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub stack: StackGrads,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

fn bce(p: f64, malicious: bool) -> f64 {
    let y = if malicious { 1.0 } else { 0.0 };
    let pc = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use fcg_core::{AppLabel, FunctionNode};

    fn two_node_graph() -> FunctionCallGraph {
        let node = |id: u32| FunctionNode {
            id,
            package: "app.a".into(),
            class_name: format!("C{id}"),
            method: "m".into(),
            user_defined: id == 0,
            is_public: true,
            simple_params: true,
        };
        FunctionCallGraph::new(
            "t",
            AppLabel::Unknown,
            2020,
            0,
            vec![node(0), node(1)],
            vec![(0, 1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_score_half() {
        let g = two_node_graph();
        let model = GcnModel::zeros(4);
        assert_eq!(model.score(&g, &[]).unwrap(), 0.5);
    }

    #[test]
    fn hand_computed_forward_two_nodes() {
        // H0: degrees (out,in) = (1,0),(0,1) scaled by 1/(1+1) = 0.5
        //   -> [[0.5, 0], [0, 0.5]]
        // A_und + I = [[1,1],[1,1]], D = (2,2), so every entry of the
        // normalized adjacency is 1/2 and ÂH0 = [[0.25,0.25],...]
        // With all-ones W1 (2x1): Z1 = [[0.5],[0.5]] = H1
        // ÂH1 = [[0.5],[0.5]]; all-ones W2 (1x1): H2 = [[0.5],[0.5]]
        // pooled = 0.5; all-ones readout w=1, b=1: logit = 1.5
        let g = two_node_graph();
        let model = GcnModel {
            stack: GcnStack {
                hidden: 1,
                w1: vec![1.0, 1.0],
                w2: vec![1.0],
            },
            w_out: vec![1.0],
            b_out: 1.0,
        };
        let expected = 1.0 / (1.0 + (-1.5f64).exp());
        let got = model.score(&g, &[]).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, want {expected}");
    }

    #[test]
    fn self_call_counts_twice_in_raw_degrees() {
        let node = |id: u32| FunctionNode {
            id,
            package: "app.a".into(),
            class_name: format!("C{id}"),
            method: "m".into(),
            user_defined: true,
            is_public: true,
            simple_params: true,
        };
        let g = FunctionCallGraph::new(
            "t",
            AppLabel::Unknown,
            2020,
            0,
            vec![node(0), node(1)],
            vec![(0, 0, 2), (0, 1, 1)],
        )
        .unwrap();
        // raw degrees: node0 out=3 in=2, node1 out=0 in=1;
        // columns scaled by 1/(1+3) and 1/(1+2)
        let f = degree_features(&g);
        assert_eq!(f[0], 3.0 / 4.0);
        assert_eq!(f[1], 2.0 / 3.0);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 1.0 / 3.0);
    }

    #[test]
    fn isolated_node_has_zero_row() {
        let node = |id: u32| FunctionNode {
            id,
            package: "app.a".into(),
            class_name: format!("C{id}"),
            method: "m".into(),
            user_defined: true,
            is_public: true,
            simple_params: true,
        };
        let g = FunctionCallGraph::new(
            "t",
            AppLabel::Unknown,
            2020,
            0,
            vec![node(0), node(1), node(2)],
            vec![(0, 1, 1)],
        )
        .unwrap();
        let f = degree_features(&g);
        assert_eq!(&f[4..6], &[0.0, 0.0]);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let g = two_node_graph();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut model = GcnModel::init(4, &mut rng);
        let before = model.clone();
        let insertions: &[(u32, u32)] = &[];
        let loss = model
            .train_epoch(&[(&g, insertions, true)], 0.0)
            .unwrap();
        assert_eq!(model.stack.w1, before.stack.w1);
        assert_eq!(model.stack.w2, before.stack.w2);
        assert_eq!(model.w_out, before.w_out);
        assert_eq!(model.b_out, before.b_out);
        // loss equals the forward BCE of the untouched model
        let p = before.score(&g, &[]).unwrap();
        assert!((loss + p.ln()).abs() < 1e-12);
    }

    use rand::SeedableRng;
}
