use crate::error::Result;

use super::{run_trials, sp1, success_rate, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// The swept value as given.
    pub value: String,
    pub success_rate: f64,
    pub sp1: Option<f64>,
}

/// Runs a full trial set of `base` with `param` set to each of `values`.
pub fn sweep(base: &RunConfig, param: &str, values: &[String], jobs: usize) -> Result<Vec<SweepRow>> {
    // validate every value before spending compute on any of them
    let cfgs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(param, v)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    values
        .iter()
        .zip(&cfgs)
        .map(|(v, cfg)| {
            let records = run_trials(cfg, jobs)?;
            let row = SweepRow {
                value: v.clone(),
                success_rate: success_rate(&records),
                sp1: sp1(&records),
            };
            log::info!("{param}={v}: success_rate={} sp1={:?}", row.success_rate, row.sp1);
            Ok(row)
        })
        .collect()
}
