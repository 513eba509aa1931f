use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmt::{denoise_gated, DenoiseConfig, DenoiseReport, DenseMatrix, NoiseSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerRole {
    Matrix,
    Vector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: String,
    pub rows: usize,
    /// 1 for vector-role layers.
    pub cols: usize,
    pub role: LayerRole,
}

impl LayerSpec {
    pub fn matrix(id: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self { id: id.into(), rows, cols, role: LayerRole::Matrix }
    }

    pub fn vector(id: impl Into<String>, len: usize) -> Self {
        Self { id: id.into(), rows: len, cols: 1, role: LayerRole::Vector }
    }

    pub fn size(&self) -> usize {
        self.rows * self.cols
    }
}

/// Fixed ordering of parameter blocks inside a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionLayout {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
}

impl PartitionLayout {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "at least one layer is required"));
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        offsets.push(0);
        for layer in &layers {
            if layer.size() == 0 {
                return Err(Error::invalid("layers", format!("layer `{}` is empty", layer.id)));
            }
            offsets.push(offsets.last().unwrap() + layer.size());
        }
        Ok(Self { layers, offsets })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn partition(&self, values: Vec<f64>) -> Result<GradientPartition> {
        if values.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), found: values.len() });
        }
        Ok(GradientPartition { layout: self.clone(), values })
    }
}

/// A flat gradient viewed through its layer layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPartition {
    layout: PartitionLayout,
    values: Vec<f64>,
}

impl GradientPartition {
    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    pub fn layer(&self, index: usize) -> &[f64] {
        &self.values[self.layout.range(index)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn flatten(self) -> Vec<f64> {
        self.values
    }
}

/// Denoising outcome for one matrix-role layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDenoise {
    pub layer: String,
    pub rows: usize,
    pub cols: usize,
    pub report: DenoiseReport,
}

/// Applies [`denoise_gated`] to every matrix-role layer; vector-role layers
/// are copied. Layers smaller than `config.min_dim` pass through inside the
/// gated denoiser and still get a report.
pub fn denoise_partition(
    noisy: &GradientPartition,
    noise: NoiseSpec,
    config: &DenoiseConfig,
) -> Result<(GradientPartition, Vec<LayerDenoise>)> {
    let mut values = noisy.values.clone();
    let mut reports = Vec::new();
    for (i, spec) in noisy.layout.layers.iter().enumerate() {
        if spec.role != LayerRole::Matrix {
            continue;
        }
        let wrap = |e: Error| Error::Layer { layer: spec.id.clone(), source: Box::new(e) };
        let matrix = DenseMatrix::new(spec.rows, spec.cols, noisy.layer(i).to_vec()).map_err(wrap)?;
        let (out, report) = denoise_gated(&matrix, noise, config).map_err(wrap)?;
        if report.applied {
            values[noisy.layout.range(i)].copy_from_slice(out.as_slice());
        }
        reports.push(LayerDenoise { layer: spec.id.clone(), rows: spec.rows, cols: spec.cols, report });
    }
    Ok((GradientPartition { layout: noisy.layout.clone(), values }, reports))
}
