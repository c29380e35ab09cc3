use serde::{Deserialize, Serialize};

use crate::numerics::derive_seed;

use super::methods::{run_method, Method, MethodContext, MethodOutput};
use super::{evaluate_repeated, EvalError, EvaluationReport};

/// Seed for the run at split `i`, derived from the master seed.
pub fn sweep_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, i as u64)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub i: usize,
    pub report: Option<EvaluationReport>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mu_r: MeanStd,
    pub rec_at: Vec<(f64, MeanStd)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub method: String,
    pub rows: Vec<SweepRow>,
    /// Over the rows that ran; `None` when every row was skipped.
    pub summary: Option<SweepSummary>,
}

impl SweepTable {
    pub fn from_rows(method: &str, rows: Vec<SweepRow>) -> Self {
        let reports: Vec<&EvaluationReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
        let mu: Vec<f64> = reports.iter().map(|r| r.mu_r).collect();
        let summary = MeanStd::of(&mu).map(|mu_r| {
            let ks: Vec<f64> = reports[0].rec_at.iter().map(|(k, _)| *k).collect();
            let rec_at = ks
                .iter()
                .enumerate()
                .map(|(j, &k)| {
                    let v: Vec<f64> = reports.iter().map(|r| r.rec_at[j].1).collect();
                    (k, MeanStd::of(&v).expect("non-empty"))
                })
                .collect();
            SweepSummary { mu_r, rec_at }
        });
        Self {
            method: method.to_string(),
            rows,
            summary,
        }
    }
}

/// Runs `method` at every `i` and evaluates it against `gold`; inapplicable
/// values of `i` become skipped rows.
pub fn sweep_over_i<S: AsRef<str>>(
    ctx: &MethodContext<'_>,
    method: &Method,
    i_values: &[usize],
    gold: &[S],
    ks: &[f64],
    master_seed: u64,
) -> Result<SweepTable, EvalError> {
    let mut rows = Vec::with_capacity(i_values.len());
    for &i in i_values {
        if let Some(reason) = method.skip_reason(i, ctx.emb.num_timesteps()) {
            rows.push(SweepRow {
                i,
                report: None,
                skipped: Some(reason),
            });
            continue;
        }
        let out = run_method(ctx, method, i, sweep_seed(master_seed, i))?;
        let report = match &out {
            MethodOutput::Single(r) => super::evaluate(r, gold, ks)?,
            MethodOutput::Repeated(v) => evaluate_repeated(v, gold, ks)?,
        };
        rows.push(SweepRow {
            i,
            report: Some(report),
            skipped: None,
        });
    }
    Ok(SweepTable::from_rows(&method.name(), rows))
}
