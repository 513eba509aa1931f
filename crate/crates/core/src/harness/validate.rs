//! Monte-Carlo validation suites for the spectral predictions and the
//! block-cosine lemma behind norm correction.
//!
//! Every trial draws from its own substream (`SeedStreams::indexed(trial)`),
//! so suites give identical statistics sequentially and in parallel.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dp::cosine;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rmt::{
    alignment_left, alignment_right, bbp_threshold, bulk_edge, denoise_optimal, forward_map, hard_truncate,
    singular_values, svd, NoiseSpec,
};
use crate::rng::SeedStreams;

use super::planted::make_planted_matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    BulkEdge,
    Bbp,
    Alignment,
    ShrinkerMse,
    Lemma,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::BulkEdge, Suite::Bbp, Suite::Alignment, Suite::ShrinkerMse, Suite::Lemma];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::BulkEdge => "bulk-edge",
            Suite::Bbp => "bbp",
            Suite::Alignment => "alignment",
            Suite::ShrinkerMse => "shrinker-mse",
            Suite::Lemma => "lemma",
        }
    }

    pub fn default_trials(&self) -> usize {
        match self {
            Suite::BulkEdge => 50,
            Suite::Bbp | Suite::Alignment => 30,
            Suite::ShrinkerMse => 20,
            Suite::Lemma => 1000,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::invalid("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub statistic: f64,
    pub requirement: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub gates: Vec<Gate>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Ensembles used by the suites.
pub mod params {
    pub const BULK_EDGE_SHAPE: (usize, usize) = (300, 500);
    pub const BULK_EDGE_SIGMA: f64 = 0.05;
    pub const BULK_EDGE_TOLERANCE: f64 = 0.02;

    pub const SPIKE_SHAPE: (usize, usize) = (200, 400);
    pub const SPIKE_SIGMA: f64 = 0.1;
    pub const SPIKE_STRENGTH: f64 = 3.0;
    pub const BBP_TOLERANCE: f64 = 0.03;
    pub const ALIGNMENT_TOLERANCE: f64 = 0.05;
    /// Subcritical spike as a fraction of the detection threshold.
    pub const SUBCRITICAL_FRACTION: f64 = 0.5;
    pub const SUBCRITICAL_MAX_OVERLAP: f64 = 0.1;

    pub const MSE_SHAPE: (usize, usize) = (200, 300);
    pub const MSE_SIGMA: f64 = 0.1;
    pub const MSE_SPIKES: [f64; 5] = [6.0, 5.0, 4.0, 3.5, 3.0];
    pub const MSE_BEATS_HARD_FRACTION: f64 = 0.95;
    pub const MSE_RANK_RECOVERY_FRACTION: f64 = 0.9;
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count.max(1) as f64
}

fn column(rows: &[Vec<f64>], index: usize) -> impl Iterator<Item = f64> + '_ {
    rows.iter().map(move |r| r[index])
}

fn fraction(rows: &[Vec<f64>], pred: impl Fn(&[f64]) -> bool) -> f64 {
    rows.iter().filter(|r| pred(r)).count() as f64 / rows.len().max(1) as f64
}

fn gate(name: &str, statistic: f64, requirement: String, passed: bool) -> Gate {
    Gate { name: name.to_string(), statistic, requirement, passed }
}

fn squared_overlap(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot * dot
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let streams = SeedStreams::new(seed);
    let results: Vec<Result<Vec<f64>>> = exec.map_indexed(trials, |t| {
        let mut rng = streams.indexed(t as u64);
        let row = match suite {
            Suite::BulkEdge => bulk_edge_trial(&mut rng)?,
            Suite::Bbp => bbp_trial(&mut rng)?,
            Suite::Alignment => alignment_trial(&mut rng)?,
            Suite::ShrinkerMse => shrinker_trial(&mut rng)?,
            Suite::Lemma => lemma_trial(&mut rng),
        };
        Ok(std::iter::once(t as f64).chain(row).collect())
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let (columns, gates) = match suite {
        Suite::BulkEdge => bulk_edge_gates(&rows),
        Suite::Bbp => bbp_gates(&rows),
        Suite::Alignment => alignment_gates(&rows),
        Suite::ShrinkerMse => shrinker_gates(&rows),
        Suite::Lemma => lemma_gates(&rows),
    };
    Ok(SuiteReport { suite, trials, seed, columns, rows, gates })
}

fn bulk_edge_trial<R: Rng>(rng: &mut R) -> Result<Vec<f64>> {
    let (m, n) = params::BULK_EDGE_SHAPE;
    let noise = NoiseSpec::new(params::BULK_EDGE_SIGMA)?;
    let p = make_planted_matrix(m, n, &[], noise, rng)?;
    let top = singular_values(&p.noisy)?[0];
    let edge = bulk_edge(noise, m, n);
    Ok(vec![top, edge, top / edge])
}

fn bulk_edge_gates(rows: &[Vec<f64>]) -> (Vec<&'static str>, Vec<Gate>) {
    let ratio = mean(column(rows, 3));
    let tol = params::BULK_EDGE_TOLERANCE;
    (
        vec!["trial", "top_singular_value", "bulk_edge", "ratio"],
        vec![gate("mean_top_over_edge", ratio, format!("within {tol} of 1"), (ratio - 1.0).abs() <= tol)],
    )
}

fn spike_noise() -> NoiseSpec {
    NoiseSpec::new(params::SPIKE_SIGMA).unwrap()
}

fn bbp_trial<R: Rng>(rng: &mut R) -> Result<Vec<f64>> {
    let (m, n) = params::SPIKE_SHAPE;
    let noise = spike_noise();
    let p = make_planted_matrix(m, n, &[params::SPIKE_STRENGTH], noise, rng)?;
    let top = singular_values(&p.noisy)?[0];
    Ok(vec![top, forward_map(params::SPIKE_STRENGTH, noise, m, n)?])
}

fn bbp_gates(rows: &[Vec<f64>]) -> (Vec<&'static str>, Vec<Gate>) {
    let empirical = mean(column(rows, 1));
    let predicted = rows.first().map(|r| r[2]).unwrap_or(f64::NAN);
    let rel = (empirical / predicted - 1.0).abs();
    let tol = params::BBP_TOLERANCE;
    (
        vec!["trial", "top_singular_value", "predicted"],
        vec![gate("relative_error_of_mean_top", rel, format!("<= {tol}"), rel <= tol)],
    )
}

fn top_overlaps(planted: &super::planted::PlantedMatrix) -> Result<(f64, f64)> {
    let f = svd(&planted.noisy)?;
    let u = planted.left.as_ref().unwrap().column(0);
    let v = planted.right.as_ref().unwrap().column(0);
    Ok((squared_overlap(&u, &f.left_vector(0)), squared_overlap(&v, &f.right_vector(0))))
}

fn alignment_trial<R: Rng>(rng: &mut R) -> Result<Vec<f64>> {
    let (m, n) = params::SPIKE_SHAPE;
    let noise = spike_noise();
    let sup = make_planted_matrix(m, n, &[params::SPIKE_STRENGTH], noise, rng)?;
    let (left, right) = top_overlaps(&sup)?;
    let weak = params::SUBCRITICAL_FRACTION * bbp_threshold(noise, m, n);
    let sub = make_planted_matrix(m, n, &[weak], noise, rng)?;
    let (left_sub, right_sub) = top_overlaps(&sub)?;
    Ok(vec![
        left,
        right,
        alignment_left(params::SPIKE_STRENGTH, noise, m, n),
        alignment_right(params::SPIKE_STRENGTH, noise, m, n),
        left_sub,
        right_sub,
    ])
}

fn alignment_gates(rows: &[Vec<f64>]) -> (Vec<&'static str>, Vec<Gate>) {
    let tol = params::ALIGNMENT_TOLERANCE;
    let cap = params::SUBCRITICAL_MAX_OVERLAP;
    let (left, right) = (mean(column(rows, 1)), mean(column(rows, 2)));
    let (pred_left, pred_right) = (rows[0][3], rows[0][4]);
    let (left_sub, right_sub) = (mean(column(rows, 5)), mean(column(rows, 6)));
    (
        vec!["trial", "left_overlap", "right_overlap", "predicted_left", "predicted_right", "left_overlap_subcritical", "right_overlap_subcritical"],
        vec![
            gate("left_overlap_error", (left - pred_left).abs(), format!("<= {tol}"), (left - pred_left).abs() <= tol),
            gate("right_overlap_error", (right - pred_right).abs(), format!("<= {tol}"), (right - pred_right).abs() <= tol),
            gate("left_overlap_subcritical", left_sub, format!("< {cap}"), left_sub < cap),
            gate("right_overlap_subcritical", right_sub, format!("< {cap}"), right_sub < cap),
        ],
    )
}

fn shrinker_trial<R: Rng>(rng: &mut R) -> Result<Vec<f64>> {
    let (m, n) = params::MSE_SHAPE;
    let noise = NoiseSpec::new(params::MSE_SIGMA)?;
    let spikes = params::MSE_SPIKES;
    let p = make_planted_matrix(m, n, &spikes, noise, rng)?;
    let optimal = denoise_optimal(&p.noisy, noise)?;
    let hard = hard_truncate(&p.noisy, spikes.len())?;
    let edge = bulk_edge(noise, m, n);
    let retained = singular_values(&p.noisy)?.iter().filter(|&&s| s > edge).count();
    Ok(vec![
        p.noisy.frobenius_distance(&p.signal),
        optimal.frobenius_distance(&p.signal),
        hard.frobenius_distance(&p.signal),
        retained as f64,
    ])
}

fn shrinker_gates(rows: &[Vec<f64>]) -> (Vec<&'static str>, Vec<Gate>) {
    let beats_noisy = fraction(rows, |r| r[2] <= r[1]);
    let beats_hard = fraction(rows, |r| r[2] <= r[3]);
    let rank = fraction(rows, |r| r[4] == params::MSE_SPIKES.len() as f64);
    let (hard_req, rank_req) = (params::MSE_BEATS_HARD_FRACTION, params::MSE_RANK_RECOVERY_FRACTION);
    (
        vec!["trial", "noisy_error", "optimal_error", "hard_truncation_error", "retained_rank"],
        vec![
            gate("optimal_beats_noisy", beats_noisy, "== 1".into(), beats_noisy == 1.0),
            gate("optimal_beats_oracle_rank_truncation", beats_hard, format!(">= {hard_req}"), beats_hard >= hard_req),
            gate("retained_rank_exact", rank, format!(">= {rank_req}"), rank >= rank_req),
        ],
    )
}

fn gaussian<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn join(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

/// Outcome of one random block-modification instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaInstance {
    pub block_gain: f64,
    pub global_gain: f64,
    /// Global gain for a shrunk copy of the improved block (unequal norms).
    pub shrunk_global_gain: f64,
}

/// Draws `a = (a1, a2)`, `b = (b1, b2)` and an improved block `a2'` of equal
/// norm obtained by tilting `a2` towards `b2`.
pub fn lemma_instance<R: Rng>(rng: &mut R) -> LemmaInstance {
    let d1 = rng.random_range(1..=20);
    let d2 = rng.random_range(1..=20);
    let (a1, a2, b1, b2) = (gaussian(rng, d1), gaussian(rng, d2), gaussian(rng, d1), gaussian(rng, d2));
    let tilt = rng.random_range(0.05..2.0);
    let (na2, nb2) = (norm(&a2), norm(&b2));
    let mut improved: Vec<f64> = a2.iter().zip(&b2).map(|(x, y)| x / na2 + tilt * y / nb2).collect();
    let scale = na2 / norm(&improved);
    improved.iter_mut().for_each(|x| *x *= scale);
    let shrink = rng.random_range(0.0..0.5);
    let shrunk: Vec<f64> = improved.iter().map(|x| x * shrink).collect();

    let b = join(&b1, &b2);
    let before = cosine(&join(&a1, &a2), &b).unwrap();
    let block_gain = cosine(&improved, &b2).unwrap() - cosine(&a2, &b2).unwrap();
    let global_gain = cosine(&join(&a1, &improved), &b).unwrap() - before;
    let shrunk_global_gain = cosine(&join(&a1, &shrunk), &b).map(|c| c - before).unwrap_or(0.0);
    LemmaInstance { block_gain, global_gain, shrunk_global_gain }
}

/// Fixed instance where shrinking an improved block lowers the global cosine:
/// `a = (1; 1, 1)`, `b = (1; 1, 0)`, `a2' = (0.01, 0)`.
pub fn lemma_counterexample() -> (f64, f64) {
    let (a1, a2, b1, b2) = ([1.0], [1.0, 1.0], [1.0], [1.0, 0.0]);
    let improved = [0.01, 0.0];
    let b = join(&b1, &b2);
    let block_gain = cosine(&improved, &b2).unwrap() - cosine(&a2, &b2).unwrap();
    let global_gain = cosine(&join(&a1, &improved), &b).unwrap() - cosine(&join(&a1, &a2), &b).unwrap();
    (block_gain, global_gain)
}

fn lemma_trial<R: Rng>(rng: &mut R) -> Vec<f64> {
    let inst = lemma_instance(rng);
    vec![inst.block_gain, inst.global_gain, inst.shrunk_global_gain]
}

fn lemma_gates(rows: &[Vec<f64>]) -> (Vec<&'static str>, Vec<Gate>) {
    let eligible: Vec<&Vec<f64>> = rows.iter().filter(|r| r[1] > 0.0).collect();
    let violations = eligible.iter().filter(|r| !(r[2] > 0.0)).count();
    let (block, global) = lemma_counterexample();
    let constructed = usize::from(block > 0.0 && global < 0.0);
    let found = rows.iter().filter(|r| r[1] > 0.0 && r[3] < 0.0).count() + constructed;
    (
        vec!["trial", "block_gain", "global_gain_equal_norm", "global_gain_shrunk"],
        vec![
            gate("equal_norm_violations", violations as f64, "== 0".into(), violations == 0),
            gate("improving_instances", eligible.len() as f64, ">= 1".into(), !eligible.is_empty()),
            gate("unequal_norm_counterexamples", found as f64, ">= 1".into(), found >= 1),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_rejected() {
        assert!(run_suite(Suite::Lemma, 0, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn counterexample_is_genuine() {
        let (block, global) = lemma_counterexample();
        assert!(block > 0.0);
        assert!(global < 0.0);
    }

    #[test]
    fn lemma_suite_is_execution_independent() {
        let a = run_suite(Suite::Lemma, 200, 3, Execution::Sequential).unwrap();
        let b = run_suite(Suite::Lemma, 200, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.passed());
    }
}
