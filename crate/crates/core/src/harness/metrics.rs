//! Aggregate statistics over trial records.

use super::TrialRecord;

pub fn success_rate(records: &[TrialRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.success).count() as f64 / records.len() as f64
}

/// Mean evaluations of successful trials divided by the success rate;
/// `None` when no trial succeeded.
pub fn sp1(records: &[TrialRecord]) -> Option<f64> {
    let hits: Vec<u64> = records.iter().filter_map(|r| r.evaluations_to_target).collect();
    if hits.is_empty() {
        return None;
    }
    let mean = hits.iter().map(|&e| e as f64).sum::<f64>() / hits.len() as f64;
    Some(mean / success_rate(records))
}

/// `n` targets spaced geometrically from `1e6` down to `1e-3`.
pub fn ecdf_targets(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1e6];
    }
    (0..n)
        .map(|i| 10f64.powf(6.0 - 9.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// 101 log-spaced evaluation counts from `1e2` to `budget`.
pub fn ecdf_grid(budget: u64) -> Vec<f64> {
    let lo = 2.0;
    let hi = (budget.max(100) as f64).log10();
    (0..=100)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / 100.0))
        .collect()
}

/// Fraction of (trial, target) pairs reached within each grid budget.
pub fn ecdf_curve(records: &[TrialRecord], n_targets: usize, grid: &[f64]) -> Vec<f64> {
    let total = records.len() * n_targets;
    grid.iter()
        .map(|&b| {
            if total == 0 {
                return 0.0;
            }
            let hit = records
                .iter()
                .flat_map(|r| r.target_hits.iter().take(n_targets))
                .filter(|h| matches!(h, Some(e) if (*e as f64) <= b))
                .count();
            hit as f64 / total as f64
        })
        .collect()
}
