//! Parameterizations of the relaxed assignment `X` (and the color-usage head
//! `y` for coloring problems).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hypergraph::Hypergraph;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// A free `|V| x k` logit table plus a shared `1 x k` bias, i.e. one
    /// fully connected layer over one-hot vertex identities.
    #[default]
    Direct,
    /// Mean-aggregation message passing over fixed random vertex features.
    MessagePassing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub backend: Backend,
    /// Message-passing layers.
    pub layers: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    /// Fully connected layers after message passing; the last maps to `k`.
    pub fc_layers: usize,
    /// Standard deviation of the initial logits for the direct backend.
    pub init_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            backend: Backend::Direct,
            layers: 2,
            hidden_dim: 64,
            feature_dim: 64,
            fc_layers: 1,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncoderError {
    #[error("{0} must be at least 1")]
    ZeroSize(&'static str),
    #[error("init_scale must be finite and >= 0, got {0}")]
    BadScale(f64),
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.backend == Backend::MessagePassing {
            for (name, v) in [
                ("layers", self.layers),
                ("hidden_dim", self.hidden_dim),
                ("feature_dim", self.feature_dim),
                ("fc_layers", self.fc_layers),
            ] {
                if v == 0 {
                    return Err(EncoderError::ZeroSize(name));
                }
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(EncoderError::BadScale(self.init_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Direct,
    MessagePassing {
        features: Tensor,
        adjacency: Tensor,
        layers: usize,
        fc_layers: usize,
    },
}

/// Trainable parameters plus whatever fixed inputs the backend needs.
#[derive(Debug, Clone)]
pub struct Encoder {
    kind: Kind,
    params: Vec<Tensor>,
    head: bool,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Row-normalized adjacency of the clique expansion: row `i` averages over
/// the neighbors of `i` (all zeros for isolated vertices).
pub fn mean_adjacency(instance: &Hypergraph) -> Tensor {
    let g = instance.clique_expansion();
    let n = g.num_vertices();
    let mut a = Tensor::zeros(n, n);
    for (i, nbrs) in g.adjacency_lists().iter().enumerate() {
        let w = 1.0 / nbrs.len().max(1) as f64;
        for &j in nbrs {
            a.set(i, j, w);
        }
    }
    a
}

impl Encoder {
    pub fn new(
        config: &EncoderConfig,
        instance: &Hypergraph,
        k: usize,
        head: bool,
        seed: u64,
    ) -> Result<Self, EncoderError> {
        config.validate()?;
        let n = instance.num_vertices();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let kind = match config.backend {
            Backend::Direct => {
                let normal =
                    Normal::new(0.0, config.init_scale).map_err(|_| EncoderError::BadScale(config.init_scale))?;
                params.push(Tensor::from_fn(n, k, |_, _| normal.sample(&mut rng)));
                params.push(Tensor::zeros(1, k));
                if head {
                    params.push(Tensor::zeros(1, k));
                }
                Kind::Direct
            }
            Backend::MessagePassing => {
                let features = Tensor::from_fn(n, config.feature_dim, |_, _| StandardNormal.sample(&mut rng));
                let d = config.hidden_dim;
                let mut width = config.feature_dim;
                for _ in 0..config.layers {
                    params.push(xavier(&mut rng, width, d));
                    params.push(xavier(&mut rng, width, d));
                    width = d;
                }
                for i in 0..config.fc_layers {
                    let out = if i + 1 == config.fc_layers { k } else { d };
                    params.push(xavier(&mut rng, width, out));
                    params.push(Tensor::zeros(1, out));
                    width = out;
                }
                if head {
                    params.push(xavier(&mut rng, d, k));
                }
                Kind::MessagePassing {
                    features,
                    adjacency: mean_adjacency(instance),
                    layers: config.layers,
                    fc_layers: config.fc_layers,
                }
            }
        };
        Ok(Encoder { kind, params, head })
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn has_head(&self) -> bool {
        self.head
    }

    /// Records every parameter as a trainable leaf on `tape`.
    pub fn leaves<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// `X = softmax(...)` and, when the head is enabled, `y = sigmoid(...)`.
    pub fn forward<'t>(&self, tape: &'t Tape, leaves: &[Var<'t>]) -> Result<(Var<'t>, Option<Var<'t>>), TensorError> {
        match &self.kind {
            Kind::Direct => {
                let x = leaves[0].add(leaves[1])?.row_softmax()?;
                let y = if self.head { Some(leaves[2].sigmoid()?) } else { None };
                Ok((x, y))
            }
            Kind::MessagePassing {
                features,
                adjacency,
                layers,
                fc_layers,
            } => {
                let a = tape.constant(adjacency.clone());
                let mut h = tape.constant(features.clone());
                let mut next = leaves.iter();
                for _ in 0..*layers {
                    let (w_self, w_neigh) = (next.next().unwrap(), next.next().unwrap());
                    let own = h.matmul(*w_self)?;
                    let neigh = a.matmul(h)?.matmul(*w_neigh)?;
                    h = own.add(neigh)?.relu()?;
                }
                let embedding = h;
                let mut z = h;
                for i in 0..*fc_layers {
                    let (w, b) = (next.next().unwrap(), next.next().unwrap());
                    z = z.matmul(*w)?.add(*b)?;
                    if i + 1 < *fc_layers {
                        z = z.relu()?;
                    }
                }
                let x = z.row_softmax()?;
                let y = match next.next() {
                    Some(w_y) => Some(embedding.column_max()?.matmul(*w_y)?.sigmoid()?),
                    None => None,
                };
                Ok((x, y))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{toy_hypergraph, Graph};
    use crate::tensor::gradcheck::{central_difference, max_relative_error};

    fn mp_config() -> EncoderConfig {
        EncoderConfig {
            backend: Backend::MessagePassing,
            layers: 2,
            hidden_dim: 5,
            feature_dim: 4,
            fc_layers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn direct_zero_logits_are_uniform() {
        let config = EncoderConfig {
            init_scale: 0.0,
            ..Default::default()
        };
        let enc = Encoder::new(&config, &Graph::path(3), 4, false, 0).unwrap();
        let tape = Tape::new();
        let (x, y) = enc.forward(&tape, &enc.leaves(&tape)).unwrap();
        assert!(x.value().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(y.is_none());
    }

    #[test]
    fn identical_features_give_identical_rows_on_a_cycle() {
        let g = Graph::cycle(6);
        let mut enc = Encoder::new(&mp_config(), &g, 3, true, 1).unwrap();
        if let Kind::MessagePassing { features, .. } = &mut enc.kind {
            let row = features.row(0).to_vec();
            for r in 0..features.rows() {
                features.row_mut(r).copy_from_slice(&row);
            }
        }
        let tape = Tape::new();
        let (x, y) = enc.forward(&tape, &enc.leaves(&tape)).unwrap();
        let x = x.value();
        for r in 1..6 {
            for c in 0..3 {
                assert!((x.get(r, c) - x.get(0, c)).abs() < 1e-12);
            }
        }
        assert_eq!(y.unwrap().shape(), (1, 3));
    }

    #[test]
    fn mean_adjacency_rows() {
        let a = mean_adjacency(&toy_hypergraph());
        for r in 0..4 {
            let total: f64 = a.row(r).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let isolated = mean_adjacency(&Graph::new(3, [(0, 1)]).unwrap());
        assert!(isolated.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn message_passing_gradients() {
        let h = toy_hypergraph();
        let enc = Encoder::new(&mp_config(), &h, 3, true, 9).unwrap();
        let target = Tensor::from_fn(4, 3, |r, c| ((r * 3 + c) as f64).sin());
        fn objective<'t>(enc: &Encoder, target: &Tensor, tape: &'t Tape, leaves: &[Var<'t>]) -> Var<'t> {
            let (x, y) = enc.forward(tape, leaves).unwrap();
            let t = tape.constant(target.clone());
            x.mul(t).unwrap().sum().unwrap().add(y.unwrap().sum().unwrap()).unwrap()
        }
        let numeric = central_difference(
            |p: &[Tensor]| {
                let tape = Tape::new();
                let leaves: Vec<_> = p.iter().map(|t| tape.leaf(t.clone())).collect();
                objective(&enc, &target, &tape, &leaves).item()
            },
            enc.params(),
            1e-5,
        );
        let tape = Tape::new();
        let leaves = enc.leaves(&tape);
        let grads = tape.backward(objective(&enc, &target, &tape, &leaves)).unwrap();
        for (leaf, num) in leaves.iter().zip(&numeric) {
            assert!(max_relative_error(&grads.wrt(*leaf), num, 1e-6) < 1e-4);
        }
    }

    #[test]
    fn validation() {
        let bad = EncoderConfig {
            layers: 0,
            ..mp_config()
        };
        assert_eq!(
            Encoder::new(&bad, &Graph::path(2), 2, false, 0).unwrap_err(),
            EncoderError::ZeroSize("layers")
        );
        let scale = EncoderConfig {
            init_scale: -1.0,
            ..Default::default()
        };
        assert!(Encoder::new(&scale, &Graph::path(2), 2, false, 0).is_err());
    }
}
