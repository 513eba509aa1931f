use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dp::Example;
use crate::error::{Error, Result};
use crate::rng::{SeedStreams, DATA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Isotropic Gaussian inputs labelled by a random linear teacher.
    PlantedClassifier,
    /// Inputs confined near a random `latent_dim`-dimensional subspace, so
    /// first-layer gradients are close to low rank.
    PlantedLowrankGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    pub dataset_size: usize,
    pub validation_size: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    pub latent_dim: usize,
    /// Fraction of labels replaced by a uniformly random class.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticTask {
    pub fn validate(&self) -> Result<()> {
        if self.dataset_size == 0 || self.validation_size == 0 {
            return Err(Error::invalid("dataset_size", "train and validation splits must be non-empty"));
        }
        if self.input_dim == 0 || self.num_classes < 2 {
            return Err(Error::invalid("input_dim", "need input_dim >= 1 and num_classes >= 2"));
        }
        if self.kind == TaskKind::PlantedLowrankGradient && self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::invalid("label_noise", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Training and validation splits, regenerated bit-identically from `seed`.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let mut rng = SeedStreams::new(self.seed).stream(DATA);
        let d = self.input_dim;
        let k = self.num_classes;
        let total = self.dataset_size + self.validation_size;

        let latent = match self.kind {
            TaskKind::PlantedClassifier => d,
            TaskKind::PlantedLowrankGradient => self.latent_dim,
        };
        let gaussian = |rng: &mut _, len: usize| -> Vec<f64> {
            (0..len).map(|_| StandardNormal.sample(rng)).collect()
        };
        let teacher = gaussian(&mut rng, k * latent);
        let embedding = match self.kind {
            TaskKind::PlantedClassifier => None,
            TaskKind::PlantedLowrankGradient => Some(gaussian(&mut rng, d * latent)),
        };
        let ambient = Normal::new(0.0, 0.1).unwrap();

        let mut features = Vec::with_capacity(total * d);
        let mut labels = Vec::with_capacity(total);
        for _ in 0..total {
            let z = gaussian(&mut rng, latent);
            match &embedding {
                None => features.extend_from_slice(&z),
                Some(a) => {
                    let scale = 1.0 / (latent as f64).sqrt();
                    for row in a.chunks(latent) {
                        let x: f64 = row.iter().zip(&z).map(|(p, q)| p * q).sum::<f64>() * scale;
                        features.push(x + ambient.sample(&mut rng));
                    }
                }
            }
            let scores = teacher.chunks(latent).map(|w| w.iter().zip(&z).map(|(p, q)| p * q).sum::<f64>());
            let mut label = scores
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .unwrap();
            let flip: f64 = rng.random();
            let replacement = rng.random_range(0..k);
            if flip < self.label_noise {
                label = replacement;
            }
            labels.push(label);
        }

        let split = self.dataset_size * d;
        let valid_features = features.split_off(split);
        let valid_labels = labels.split_off(self.dataset_size);
        Ok((
            Dataset { input_dim: d, features, labels },
            Dataset { input_dim: d, features: valid_features, labels: valid_labels },
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(input_dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != input_dim * labels.len() {
            return Err(Error::DimensionMismatch { expected: input_dim * labels.len(), found: features.len() });
        }
        Ok(Self { input_dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn example(&self, i: usize) -> Example<'_> {
        Example { features: &self.features[i * self.input_dim..(i + 1) * self.input_dim], label: self.labels[i] }
    }

    pub fn batch(&self, indices: &[usize]) -> Vec<Example<'_>> {
        indices.iter().map(|&i| self.example(i)).collect()
    }

    /// Little-endian serialization of features and labels, for equality checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (self.features.len() + self.labels.len()));
        for x in &self.features {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for &y in &self.labels {
            out.extend_from_slice(&(y as u64).to_le_bytes());
        }
        out
    }
}
