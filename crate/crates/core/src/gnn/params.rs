use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

pub(crate) const TENSOR_NAMES: [&str; 12] = [
    "edge_w1", "edge_b1", "edge_w2", "edge_b2", "att_w1", "att_b1", "att_w2", "att_b2", "out_w1", "out_b1",
    "out_w2", "out_b2",
];

/// Every trainable tensor of the network. Biases are `1 x k` rows.
///
/// Input rows of the first-layer matrices are laid out block by block:
///
/// * `edge_w1`: origin one-hot (N), destination one-hot (N), edge existence (1)
/// * `att_w1`: edge latent, then the round-one sums over edges sharing the
///   origin, sharing the destination, leaving the destination, entering the
///   origin (D each), then time (T)
/// * `out_w1`: the `att_w1` layout, followed by the four round-two sums in
///   the same category order
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub edge_w1: Array2<f64>,
    pub edge_b1: Array2<f64>,
    pub edge_w2: Array2<f64>,
    pub edge_b2: Array2<f64>,
    pub att_w1: Array2<f64>,
    pub att_b1: Array2<f64>,
    pub att_w2: Array2<f64>,
    pub att_b2: Array2<f64>,
    pub out_w1: Array2<f64>,
    pub out_b1: Array2<f64>,
    pub out_w2: Array2<f64>,
    pub out_b2: Array2<f64>,
}

impl Weights {
    pub(crate) fn shapes(n_nodes: usize, cfg: &ModelConfig) -> [(usize, usize); 12] {
        let h = cfg.hidden_size;
        let d = cfg.latent_edge_dim;
        let t = cfg.time_encoding.width();
        let round_one = 5 * d + t;
        [
            (2 * n_nodes + 1, h),
            (1, h),
            (h, d),
            (1, d),
            (round_one, h),
            (1, h),
            (h, 1),
            (1, 1),
            (round_one + 4 * d, h),
            (1, h),
            (h, 1),
            (1, 1),
        ]
    }

    pub fn zeros(n_nodes: usize, cfg: &ModelConfig) -> Self {
        let tensors = Self::shapes(n_nodes, cfg).map(Array2::zeros);
        Self::from_array(tensors)
    }

    pub(crate) fn from_array(t: [Array2<f64>; 12]) -> Self {
        let [edge_w1, edge_b1, edge_w2, edge_b2, att_w1, att_b1, att_w2, att_b2, out_w1, out_b1, out_w2, out_b2] = t;
        Weights {
            edge_w1,
            edge_b1,
            edge_w2,
            edge_b2,
            att_w1,
            att_b1,
            att_w2,
            att_b2,
            out_w1,
            out_b1,
            out_w2,
            out_b2,
        }
    }

    pub fn tensors(&self) -> [&Array2<f64>; 12] {
        [
            &self.edge_w1,
            &self.edge_b1,
            &self.edge_w2,
            &self.edge_b2,
            &self.att_w1,
            &self.att_b1,
            &self.att_w2,
            &self.att_b2,
            &self.out_w1,
            &self.out_b1,
            &self.out_w2,
            &self.out_b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 12] {
        [
            &mut self.edge_w1,
            &mut self.edge_b1,
            &mut self.edge_w2,
            &mut self.edge_b2,
            &mut self.att_w1,
            &mut self.att_b1,
            &mut self.att_w2,
            &mut self.att_b2,
            &mut self.out_w1,
            &mut self.out_b1,
            &mut self.out_w2,
            &mut self.out_b2,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Array2<f64>)> {
        TENSOR_NAMES.into_iter().zip(self.tensors())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Network weights plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub n_nodes: usize,
    pub weights: Weights,
    pub adam_m: Weights,
    pub adam_v: Weights,
    pub adam_step: u64,
}

impl ModelParams {
    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, where a
    /// bias shares the fan-in of its layer's weight matrix.
    pub fn init(config: &ModelConfig, n_nodes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shapes = Weights::shapes(n_nodes, config);
        let mut tensors = shapes.map(Array2::zeros);
        for layer in 0..6 {
            let fan_in = shapes[2 * layer].0 as f64;
            let bound = 1.0 / fan_in.sqrt();
            for idx in [2 * layer, 2 * layer + 1] {
                tensors[idx].mapv_inplace(|_| rng.random_range(-bound..=bound));
            }
        }
        ModelParams {
            config: config.clone(),
            n_nodes,
            weights: Weights::from_array(tensors),
            adam_m: Weights::zeros(n_nodes, config),
            adam_v: Weights::zeros(n_nodes, config),
            adam_step: 0,
        }
    }

    /// One Adam update with bias correction.
    pub fn adam_update(&mut self, grads: &Weights) {
        self.adam_step += 1;
        let cfg = &self.config;
        let (b1, b2, eps, lr) = (cfg.beta1, cfg.beta2, cfg.epsilon, cfg.learning_rate);
        let step = self.adam_step as i32;
        let c1 = 1.0 - b1.powi(step);
        let c2 = 1.0 - b2.powi(step);
        let params = self.weights.tensors_mut();
        let ms = self.adam_m.tensors_mut();
        let vs = self.adam_v.tensors_mut();
        for (((w, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}
