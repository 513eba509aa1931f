use serde::{Deserialize, Serialize};

use super::partition::{GradientPartition, LayerDenoise};

/// `a.b / (|a| |b|)`, or `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "cosine of vectors with different lengths");
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerImprovement {
    pub layer: String,
    pub rows: usize,
    pub cols: usize,
    /// Zero for layers the denoiser left unchanged; `None` if the clipped
    /// layer gradient vanished.
    pub improvement: Option<f64>,
    pub gate_ratio: f64,
    pub applied: bool,
}

/// Cosine alignment with the clipped gradient before and after denoising.
///
/// Uses the un-noised clipped gradient, so it is instrumentation only and
/// must not be released alongside private outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRecord {
    pub step: usize,
    pub cos_noisy: f64,
    pub cos_denoised: f64,
    pub improvement: f64,
    pub per_layer: Vec<LayerImprovement>,
}

/// Returns `None` when the clipped (or noisy/denoised) gradient has zero norm,
/// which leaves the step's metric undefined.
pub fn improvement_metric(
    step: usize,
    denoised: &GradientPartition,
    noisy: &GradientPartition,
    clipped: &GradientPartition,
    reports: &[LayerDenoise],
) -> Option<ImprovementRecord> {
    let cos_noisy = cosine(noisy.as_slice(), clipped.as_slice())?;
    let cos_denoised = cosine(denoised.as_slice(), clipped.as_slice())?;

    let layout = clipped.layout();
    let per_layer = reports
        .iter()
        .filter_map(|r| {
            let index = layout.layers().iter().position(|l| l.id == r.layer)?;
            let (d, n, c) = (denoised.layer(index), noisy.layer(index), clipped.layer(index));
            let improvement = if d == n {
                Some(0.0)
            } else {
                cosine(d, c).zip(cosine(n, c)).map(|(a, b)| a - b)
            };
            Some(LayerImprovement {
                layer: r.layer.clone(),
                rows: r.rows,
                cols: r.cols,
                improvement,
                gate_ratio: r.report.gate_ratio,
                applied: r.report.applied,
            })
        })
        .collect();

    Some(ImprovementRecord {
        step,
        cos_noisy,
        cos_denoised,
        improvement: cos_denoised - cos_noisy,
        per_layer,
    })
}
