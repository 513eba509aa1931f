use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dp::{Example, LayerRole, LayerSpec, Model, PartitionLayout};
use crate::error::{Error, Result};
use crate::rmt::DenoiseConfig;

use super::task::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    SoftmaxRegression { input_dim: usize, num_classes: usize },
    #[serde(rename = "mlp-2layer")]
    Mlp2Layer { input_dim: usize, hidden_dim: usize, num_classes: usize },
}

impl ModelSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            ModelSpec::SoftmaxRegression { input_dim, .. } | ModelSpec::Mlp2Layer { input_dim, .. } => {
                input_dim
            }
        }
    }

    pub fn num_classes(&self) -> usize {
        match *self {
            ModelSpec::SoftmaxRegression { num_classes, .. } | ModelSpec::Mlp2Layer { num_classes, .. } => {
                num_classes
            }
        }
    }
}

/// Softmax regression or a one-hidden-layer tanh MLP, both trained with
/// cross-entropy. Weight matrices are stored `outputs x inputs`, row-major.
#[derive(Clone, Debug)]
pub struct ToyModel {
    spec: ModelSpec,
    layout: PartitionLayout,
}

impl ToyModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let layers = match spec {
            ModelSpec::SoftmaxRegression { input_dim, num_classes } => {
                vec![LayerSpec::matrix("w", num_classes, input_dim), LayerSpec::vector("b", num_classes)]
            }
            ModelSpec::Mlp2Layer { input_dim, hidden_dim, num_classes } => vec![
                LayerSpec::matrix("w1", hidden_dim, input_dim),
                LayerSpec::vector("b1", hidden_dim),
                LayerSpec::matrix("w2", num_classes, hidden_dim),
                LayerSpec::vector("b2", num_classes),
            ],
        };
        if spec.num_classes() < 2 {
            return Err(Error::invalid("num_classes", "need at least two classes"));
        }
        let min = DenoiseConfig::DEFAULT_MIN_DIM;
        let denoisable = layers
            .iter()
            .any(|l| l.role == LayerRole::Matrix && l.rows >= min && l.cols >= min);
        if !denoisable {
            return Err(Error::invalid(
                "model",
                format!("needs a weight matrix with both dimensions >= {min}"),
            ));
        }
        Ok(Self { spec, layout: PartitionLayout::new(layers)? })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Gaussian weights with variance `1 / fan_in`, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.layout.total_dim());
        for layer in self.layout.layers() {
            match layer.role {
                LayerRole::Matrix => {
                    let normal = Normal::new(0.0, 1.0 / (layer.cols as f64).sqrt()).unwrap();
                    params.extend((0..layer.size()).map(|_| normal.sample(rng)));
                }
                LayerRole::Vector => params.extend(std::iter::repeat_n(0.0, layer.size())),
            }
        }
        params
    }

    pub fn accuracy(&self, params: &[f64], data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = (0..data.len())
            .filter(|&i| {
                let ex = data.example(i);
                self.predict(params, ex.features) == ex.label
            })
            .count();
        correct as f64 / data.len() as f64
    }

    fn logits(&self, params: &[f64], x: &[f64], hidden: Option<&mut Vec<f64>>) -> Vec<f64> {
        match self.spec {
            ModelSpec::SoftmaxRegression { input_dim, num_classes } => {
                let (w, b) = params.split_at(num_classes * input_dim);
                affine(w, b, x, num_classes)
            }
            ModelSpec::Mlp2Layer { input_dim, hidden_dim, num_classes } => {
                let (w1, rest) = params.split_at(hidden_dim * input_dim);
                let (b1, rest) = rest.split_at(hidden_dim);
                let (w2, b2) = rest.split_at(num_classes * hidden_dim);
                let h: Vec<f64> = affine(w1, b1, x, hidden_dim).into_iter().map(f64::tanh).collect();
                let out = affine(w2, b2, &h, num_classes);
                if let Some(slot) = hidden {
                    *slot = h;
                }
                out
            }
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], outputs: usize) -> Vec<f64> {
    let n = x.len();
    (0..outputs)
        .map(|o| b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// Softmax probabilities and `-log p[label]`.
fn softmax_xent(logits: &[f64], label: usize) -> (Vec<f64>, f64) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() - (logits[label] - max);
    (exps.into_iter().map(|e| e / total).collect(), loss)
}

/// Accumulates `delta x^T` into a row-major block.
fn outer_into(out: &mut [f64], delta: &[f64], x: &[f64]) {
    let n = x.len();
    for (o, d) in delta.iter().enumerate() {
        for (g, xi) in out[o * n..(o + 1) * n].iter_mut().zip(x) {
            *g = d * xi;
        }
    }
}

impl Model for ToyModel {
    fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    fn loss_and_gradient(&self, params: &[f64], example: Example<'_>) -> (f64, Vec<f64>) {
        let x = example.features;
        let mut grad = vec![0.0; self.layout.total_dim()];
        let mut hidden = Vec::new();
        let logits = self.logits(params, x, Some(&mut hidden));
        let (probs, loss) = softmax_xent(&logits, example.label);
        let mut dlogits = probs;
        dlogits[example.label] -= 1.0;

        match self.spec {
            ModelSpec::SoftmaxRegression { input_dim, num_classes } => {
                let (gw, gb) = grad.split_at_mut(num_classes * input_dim);
                outer_into(gw, &dlogits, x);
                gb.copy_from_slice(&dlogits);
            }
            ModelSpec::Mlp2Layer { input_dim, hidden_dim, num_classes } => {
                let w2 = &params[hidden_dim * input_dim + hidden_dim..][..num_classes * hidden_dim];
                let (gw1, rest) = grad.split_at_mut(hidden_dim * input_dim);
                let (gb1, rest) = rest.split_at_mut(hidden_dim);
                let (gw2, gb2) = rest.split_at_mut(num_classes * hidden_dim);
                outer_into(gw2, &dlogits, &hidden);
                gb2.copy_from_slice(&dlogits);
                // back through W2 and tanh
                let dz: Vec<f64> = (0..hidden_dim)
                    .map(|j| {
                        let back: f64 = (0..num_classes).map(|k| w2[k * hidden_dim + j] * dlogits[k]).sum();
                        back * (1.0 - hidden[j] * hidden[j])
                    })
                    .collect();
                outer_into(gw1, &dz, x);
                gb1.copy_from_slice(&dz);
            }
        }
        (loss, grad)
    }

    fn predict(&self, params: &[f64], features: &[f64]) -> usize {
        let logits = self.logits(params, features, None);
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_gradient(spec: ModelSpec) {
        let model = ToyModel::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = model.init_params(&mut rng);
        // nonzero biases so every block is exercised
        for p in params.iter_mut() {
            *p += 0.05 * rng.random::<f64>();
        }
        let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let ex = Example { features: &x, label: 1 };
        let (_, grad) = model.loss_and_gradient(&params, ex);
        let h = 1e-6;
        for i in (0..params.len()).step_by(7) {
            let mut up = params.clone();
            up[i] += h;
            let mut down = params.clone();
            down[i] -= h;
            let fd = (model.loss_and_gradient(&up, ex).0 - model.loss_and_gradient(&down, ex).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        check_gradient(ModelSpec::SoftmaxRegression { input_dim: 20, num_classes: 16 });
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        check_gradient(ModelSpec::Mlp2Layer { input_dim: 24, hidden_dim: 17, num_classes: 5 });
    }

    #[test]
    fn rejects_models_without_a_denoisable_layer() {
        assert!(ToyModel::new(ModelSpec::SoftmaxRegression { input_dim: 64, num_classes: 10 }).is_err());
        assert!(ToyModel::new(ModelSpec::Mlp2Layer { input_dim: 64, hidden_dim: 32, num_classes: 10 }).is_ok());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let spec = ModelSpec::Mlp2Layer { input_dim: 64, hidden_dim: 32, num_classes: 10 };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""kind":"mlp-2layer""#), "{json}");
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }
}
