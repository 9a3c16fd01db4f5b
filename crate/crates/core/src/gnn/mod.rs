//! Scene-graph translation model: edge latents, two attention-weighted
//! aggregation rounds and a per-edge output MLP, with its training loop.

mod network;
mod params;
mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use params::{ModelParams, Weights};
pub(crate) use params::TENSOR_NAMES;
pub use train::{train, train_with_log, TrainingLog, TrainingPair};

use crate::error::{Error, Result};
use crate::scene::{posterior, ProbGraph, SceneGraph, STEP_MINUTES};
use crate::timecode::{encode, TimeEncodingConfig};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    /// Feed predicted probabilities back as fractional edge existence.
    #[default]
    Soft,
    /// Feed back the most likely in-tree.
    Hard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub latent_edge_dim: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    pub attention_enabled: bool,
    pub time_encoding: TimeEncodingConfig,
    pub rollout: RolloutMode,
}

pub const DEFAULT_EPOCHS: usize = 3;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 20,
            latent_edge_dim: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            attention_enabled: true,
            time_encoding: TimeEncodingConfig::default(),
            rollout: RolloutMode::Soft,
        }
    }
}

impl ModelConfig {
    pub fn check(&self) -> Result<()> {
        if self.hidden_size == 0 || self.latent_edge_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("invalid Adam hyper-parameters".into()));
        }
        self.time_encoding.check()
    }
}

fn check_params(params: &ModelParams, g_t: &SceneGraph) -> Result<()> {
    if g_t.len() != params.n_nodes {
        return Err(Error::CatalogMismatch);
    }
    g_t.ensure_valid()
}

fn check_time(g_t: &SceneGraph, t_out: u32) -> Result<()> {
    let expected = g_t.minute() + STEP_MINUTES;
    if t_out != expected {
        return Err(Error::TimestampMismatch {
            expected,
            actual: t_out,
        });
    }
    Ok(())
}

/// N x N logits for the graph one step after `g_t`; entry `(i, j)` scores
/// `j` as the parent of `i`.
pub fn forward(params: &ModelParams, g_t: &SceneGraph, t_out: u32) -> Result<Array2<f64>> {
    check_params(params, g_t)?;
    check_time(g_t, t_out)?;
    let time = encode(t_out as f64, &params.config.time_encoding)?;
    Ok(network::forward(params, &g_t.adjacency(), &time, None).logits)
}

/// Row-wise softmax over candidate parents. The diagonal is excluded and the
/// root row is all zero.
pub fn softmax_rows(logits: &Array2<f64>, root: usize) -> Array2<f64> {
    let n = logits.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        if i == root {
            continue;
        }
        let row = logits.row(i);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for j in 0..n {
            if j != i {
                let v = (row[j] - max).exp();
                out[[i, j]] = v;
                total += v;
            }
        }
        out.row_mut(i).mapv_inplace(|v| v / total);
    }
    out
}

pub fn predict_step(params: &ModelParams, g_t: &SceneGraph, t_out: u32) -> Result<ProbGraph> {
    let logits = forward(params, g_t, t_out)?;
    let catalog = g_t.catalog().clone();
    let probs = softmax_rows(&logits, catalog.root().index());
    Ok(ProbGraph::new_unchecked(catalog, probs, t_out))
}

/// `delta_steps` successive predictions starting from `g_t`.
pub fn rollout(params: &ModelParams, g_t: &SceneGraph, delta_steps: usize, mode: RolloutMode) -> Result<Vec<ProbGraph>> {
    check_params(params, g_t)?;
    let catalog = g_t.catalog().clone();
    let root = catalog.root().index();
    let mut adj = g_t.adjacency();
    let mut minute = g_t.minute();
    let mut out = Vec::with_capacity(delta_steps);
    let mut tape = network::Tape::new(params.n_nodes, &params.config);
    for _ in 0..delta_steps {
        minute += STEP_MINUTES;
        let time = encode(minute as f64, &params.config.time_encoding)?;
        network::forward_into(&mut tape, params, &adj, &time, None);
        let probs = softmax_rows(&tape.logits, root);
        let p = ProbGraph::new_unchecked(catalog.clone(), probs, minute);
        adj = match mode {
            RolloutMode::Soft => p.probs().clone(),
            RolloutMode::Hard => posterior(&p).adjacency(),
        };
        out.push(p);
    }
    Ok(out)
}

/// Mean cross-entropy of each non-root row against the target parent.
pub fn loss(logits: &Array2<f64>, target: &SceneGraph) -> f64 {
    loss_and_grad(logits, target).0
}

pub(crate) fn loss_and_grad(logits: &Array2<f64>, target: &SceneGraph) -> (f64, Array2<f64>) {
    let root = target.catalog().root().index();
    let probs = softmax_rows(logits, root);
    let rows: Vec<(usize, usize)> = target
        .parents()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.filter(|_| i != root).map(|p| (i, p.index())))
        .collect();
    let mut grad = Array2::zeros(logits.raw_dim());
    if rows.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / rows.len() as f64;
    let mut total = 0.0;
    for &(i, p) in &rows {
        let row = logits.row(i);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| (v - max).exp())
                .sum::<f64>()
                .ln();
        total += lse - row[p];
        for j in 0..logits.ncols() {
            if j != i {
                grad[[i, j]] = probs[[i, j]] * scale;
            }
        }
        grad[[i, p]] -= scale;
    }
    (total * scale, grad)
}

/// Loss of one transition and the gradient of every weight.
pub fn loss_gradient(params: &ModelParams, g_t: &SceneGraph, target: &SceneGraph) -> Result<(f64, Weights)> {
    check_params(params, g_t)?;
    check_time(g_t, target.minute())?;
    let time = encode(target.minute() as f64, &params.config.time_encoding)?;
    let tape = network::forward(params, &g_t.adjacency(), &time, None);
    let (value, dlogits) = loss_and_grad(&tape.logits, target);
    Ok((value, network::backward(params, &tape, &dlogits)))
}

/// Intermediate activations of one forward pass, for inspection.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Per-edge latents, row `i * N + j`.
    pub latents: Array2<f64>,
    /// Round-one sums per node: over out-edges and over in-edges.
    pub out_sums: Array2<f64>,
    pub in_sums: Array2<f64>,
    /// One attention weight per candidate edge, row-major.
    pub attention: Vec<f64>,
    pub weighted_out_sums: Array2<f64>,
    pub weighted_in_sums: Array2<f64>,
    pub logits: Array2<f64>,
}

impl Trace {
    /// The four round-one category sums of edge `(i, j)`, in the order
    /// sharing origin, sharing destination, leaving destination, entering origin.
    pub fn round_one(&self, i: usize, j: usize) -> [Vec<f64>; 4] {
        category_sums(&self.out_sums, &self.in_sums, i, j)
    }

    pub fn round_two(&self, i: usize, j: usize) -> [Vec<f64>; 4] {
        category_sums(&self.weighted_out_sums, &self.weighted_in_sums, i, j)
    }
}

fn category_sums(out: &Array2<f64>, inn: &Array2<f64>, i: usize, j: usize) -> [Vec<f64>; 4] {
    [
        out.row(i).to_vec(),
        inn.row(j).to_vec(),
        out.row(j).to_vec(),
        inn.row(i).to_vec(),
    ]
}

/// Runs the network and returns its intermediate activations. With
/// `attention_override`, every off-diagonal attention weight is pinned.
pub fn trace(params: &ModelParams, g_t: &SceneGraph, t_out: u32, attention_override: Option<f64>) -> Result<Trace> {
    check_params(params, g_t)?;
    check_time(g_t, t_out)?;
    let time = encode(t_out as f64, &params.config.time_encoding)?;
    let tape = network::forward(params, &g_t.adjacency(), &time, attention_override);
    Ok(Trace {
        latents: tape.lat,
        out_sums: tape.out1,
        in_sums: tape.in1,
        attention: tape.att.to_vec(),
        weighted_out_sums: tape.out2,
        weighted_in_sums: tape.in2,
        logits: tape.logits,
    })
}
