//! CSV encoders for experiment outputs. Floats are written with `{:?}` so
//! they parse back to the same bits.

use std::fmt::Write;

use crate::dp::ImprovementRecord;

use super::race::{KappaRow, RacePair, RaceResult};
use super::scatter::ScatterRow;
use super::spectra::SpectrumSnapshot;
use super::validate::SuiteReport;

fn opt<T: std::fmt::Debug>(value: Option<T>) -> String {
    value.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn race_results(pair: &RacePair) -> impl Iterator<Item = &RaceResult> {
    [Some(&pair.noiseless), Some(&pair.baseline), pair.denoised.as_ref()].into_iter().flatten()
}

/// Accuracy curves: `method,seed,step,accuracy`.
pub fn races_csv(pairs: &[RacePair]) -> String {
    let mut out = String::from("method,seed,step,accuracy\n");
    for pair in pairs {
        for result in race_results(pair) {
            for (step, acc) in &result.trace {
                writeln!(out, "{},{},{},{:?}", result.method.as_str(), result.seed, step, acc).unwrap();
            }
        }
    }
    out
}

/// Steps needed to reach each threshold fraction of the noiseless reference.
pub fn steps_csv(pairs: &[RacePair]) -> String {
    let mut out = String::from("method,seed,fraction,target_accuracy,steps_to,final_accuracy,failure\n");
    for pair in pairs {
        for result in race_results(pair) {
            for hit in &result.hits {
                writeln!(
                    out,
                    "{},{},{:?},{:?},{},{:?},{}",
                    result.method.as_str(),
                    result.seed,
                    hit.fraction,
                    hit.target_accuracy,
                    opt(hit.steps_to),
                    result.final_accuracy,
                    result.failure.as_deref().unwrap_or("").replace([',', '\n'], ";"),
                )
                .unwrap();
            }
        }
    }
    out
}

/// `step,layer,rank_index,clipped_sv,noisy_sv,bulk_edge`.
pub fn spectra_csv(snapshots: &[SpectrumSnapshot]) -> String {
    let mut out = String::from("step,layer,rank_index,clipped_sv,noisy_sv,bulk_edge\n");
    for s in snapshots {
        for (i, (c, n)) in s.clipped.iter().zip(&s.noisy).enumerate() {
            writeln!(out, "{},{},{},{:?},{:?},{:?}", s.step, s.layer, i, c, n, s.bulk_edge).unwrap();
        }
    }
    out
}

/// `step,layer,m,n,gate_ratio,improvement`.
pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("step,layer,m,n,gate_ratio,improvement\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{:?},{:?}", r.step, r.layer, r.rows, r.cols, r.gate_ratio, r.improvement).unwrap();
    }
    out
}

/// Global cosines per step, followed by per-layer improvement, gate ratio
/// and applied flag for every matrix layer.
pub fn improvement_csv(records: &[ImprovementRecord]) -> String {
    let mut out = String::from("step,cos_noisy,cos_denoised,improvement");
    if let Some(first) = records.first() {
        for l in &first.per_layer {
            write!(out, ",{0}_improvement,{0}_gate_ratio,{0}_applied", l.layer).unwrap();
        }
    }
    out.push('\n');
    for r in records {
        write!(out, "{},{:?},{:?},{:?}", r.step, r.cos_noisy, r.cos_denoised, r.improvement).unwrap();
        for l in &r.per_layer {
            write!(out, ",{},{:?},{}", opt(l.improvement), l.gate_ratio, l.applied).unwrap();
        }
        out.push('\n');
    }
    out
}

/// One row per candidate, with per-seed step counts (empty when missed).
pub fn kappa_csv(rows: &[KappaRow], seeds: &[u64]) -> String {
    let mut out = String::from("kappa,mean_steps_to,baseline_mean_steps_to,mean_improvement");
    for s in seeds {
        write!(out, ",seed_{s}").unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{:?},{:?},{:?},{}", r.kappa, r.mean_steps_to, r.baseline_mean_steps_to, opt(r.mean_improvement))
            .unwrap();
        for s in &r.per_seed {
            write!(out, ",{}", opt(*s)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Per-trial statistics of a validation suite.
pub fn suite_csv(report: &SuiteReport) -> String {
    let mut out = report.columns.join(",");
    out.push('\n');
    for row in &report.rows {
        let cells: Vec<String> =
            row.iter().enumerate().map(|(i, v)| if i == 0 { format!("{}", *v as usize) } else { format!("{v:?}") }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Gate summary of a validation suite.
pub fn gates_csv(report: &SuiteReport) -> String {
    let mut out = String::from("suite,gate,statistic,requirement,passed\n");
    for g in &report.gates {
        writeln!(out, "{},{},{:?},{},{}", report.suite, g.name, g.statistic, g.requirement, g.passed).unwrap();
    }
    out
}
