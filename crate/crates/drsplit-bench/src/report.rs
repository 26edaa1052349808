//! Run records, accuracy tables, and performance-profile data.

use std::collections::BTreeMap;

use drsplit::drs::fmt_float;

use crate::config::Method;

/// Summary of one benchmark run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub method: Method,
    pub n_measurements: usize,
    pub dim: usize,
    pub start: usize,
    /// Relaxation value; absent for the single-stepsize baselines.
    pub lambda: Option<f64>,
    pub gamma: f64,
    /// Best `|objective - 0|` seen along the iterations.
    pub best_accuracy: f64,
    pub iterations: usize,
    /// Informational only: excluded from the deterministic outputs.
    pub wall_time_s: f64,
    // Deterministic sort keys.
    pub(crate) size_idx: usize,
    pub(crate) lambda_idx: usize,
    pub(crate) gamma_idx: usize,
}

impl RunRecord {
    pub(crate) fn sort_key(&self) -> (usize, Method, usize, usize, usize) {
        (
            self.size_idx,
            self.method,
            self.start,
            self.lambda_idx,
            self.gamma_idx,
        )
    }
}

/// Accuracy thresholds used by the reference tables.
pub const TABLE_THRESHOLDS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// For each threshold, the percentage of runs whose best accuracy is
/// strictly below it.
pub fn accuracy_table(records: &[RunRecord], thresholds: &[f64]) -> Vec<(f64, f64)> {
    assert!(!records.is_empty(), "accuracy table needs at least one run");
    let total = records.len() as f64;
    thresholds
        .iter()
        .map(|&tau| {
            let solved = records.iter().filter(|r| r.best_accuracy < tau).count();
            (tau, 100.0 * solved as f64 / total)
        })
        .collect()
}

/// Default threshold grid for profiles: four points per decade from 1 down
/// to 1e-8.
pub fn profile_thresholds() -> Vec<f64> {
    (0..=32).map(|k| 10f64.powf(-(k as f64) / 4.0)).collect()
}

/// One profile curve per method: the fraction of that method's runs with
/// best accuracy at or below each threshold. Fractions are nondecreasing as
/// the threshold loosens and always in `[0, 1]`.
pub fn performance_profile(
    records: &[RunRecord],
    thresholds: &[f64],
) -> BTreeMap<Method, Vec<f64>> {
    let mut by_method: BTreeMap<Method, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, runs)| {
            let total = runs.len() as f64;
            let curve = thresholds
                .iter()
                .map(|&tau| runs.iter().filter(|r| r.best_accuracy <= tau).count() as f64 / total)
                .collect();
            (method, curve)
        })
        .collect()
}

/// `runs.csv`: fixed column order, floats at 17 significant digits, no
/// wall-clock column (so reruns are byte identical).
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("method,N,n,start,lambda,gamma,best_accuracy,iterations\n");
    for r in records {
        let lambda = r.lambda.map(fmt_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.n_measurements,
            r.dim,
            r.start,
            lambda,
            fmt_float(r.gamma),
            fmt_float(r.best_accuracy),
            r.iterations
        ));
    }
    out
}

/// `timings.csv`: the informational wall-clock sidecar (not deterministic).
pub fn timings_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("method,N,n,start,lambda,gamma,wall_time_s\n");
    for r in records {
        let lambda = r.lambda.map(fmt_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            r.method, r.n_measurements, r.dim, r.start, lambda, fmt_float(r.gamma), r.wall_time_s
        ));
    }
    out
}

/// `tables.csv`: per-method accuracy tables at the reference thresholds,
/// percentages to three decimals.
pub fn tables_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("method,threshold,percent_solved\n");
    for method in Method::ALL {
        let runs: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.method == method)
            .cloned()
            .collect();
        if runs.is_empty() {
            continue;
        }
        for (tau, percent) in accuracy_table(&runs, &TABLE_THRESHOLDS) {
            out.push_str(&format!("{},{},{:.3}\n", method, fmt_float(tau), percent));
        }
    }
    out
}

/// `profile.csv`: one threshold column plus one fraction column per method
/// present, suitable for external plotting.
pub fn profile_csv(records: &[RunRecord], thresholds: &[f64]) -> String {
    let curves = performance_profile(records, thresholds);
    let mut header = String::from("threshold");
    for method in curves.keys() {
        header.push(',');
        header.push_str(method.name());
    }
    let mut out = header;
    out.push('\n');
    for (i, &tau) in thresholds.iter().enumerate() {
        out.push_str(&fmt_float(tau));
        for curve in curves.values() {
            out.push(',');
            out.push_str(&fmt_float(curve[i]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, acc: f64) -> RunRecord {
        RunRecord {
            method,
            n_measurements: 30,
            dim: 10,
            start: 0,
            lambda: None,
            gamma: 0.1,
            best_accuracy: acc,
            iterations: 10,
            wall_time_s: 0.0,
            size_idx: 0,
            lambda_idx: 0,
            gamma_idx: 0,
        }
    }

    #[test]
    fn table_percentages_are_nonincreasing_with_tighter_thresholds() {
        let records: Vec<RunRecord> = [1e-2, 1e-3, 1e-5, 0.5]
            .iter()
            .map(|&a| record(Method::Dr, a))
            .collect();
        let table = accuracy_table(&records, &TABLE_THRESHOLDS);
        for w in table.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        // 3 of 4 runs are below 1e-1.
        assert!((table[0].1 - 75.0).abs() < 1e-12);
    }

    #[test]
    fn all_failing_runs_give_zero_everywhere() {
        let records: Vec<RunRecord> =
            (0..3).map(|_| record(Method::Spl, f64::INFINITY)).collect();
        for (_, percent) in accuracy_table(&records, &TABLE_THRESHOLDS) {
            assert_eq!(percent, 0.0);
        }
    }

    #[test]
    fn single_run_profile_is_a_step_curve() {
        let records = vec![record(Method::Dr, 1e-4)];
        let thresholds = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
        let curves = performance_profile(&records, &thresholds);
        let curve = &curves[&Method::Dr];
        assert_eq!(curve[..2], [0.0, 0.0]);
        // The jump lands exactly at the achieved accuracy.
        assert_eq!(curve[2..], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn profiles_are_monotone_and_bounded() {
        let records: Vec<RunRecord> = [1e-1, 2e-3, 5e-6, 0.9, 1.5e-4]
            .iter()
            .map(|&a| record(Method::Pd, a))
            .collect();
        let thresholds = profile_thresholds();
        // Thresholds tighten along the grid, so fractions must not increase.
        let curves = performance_profile(&records, &thresholds);
        for curve in curves.values() {
            for w in curve.windows(2) {
                assert!(w[1] <= w[0]);
            }
            for &v in curve {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn empty_threshold_grid_is_allowed() {
        let records = vec![record(Method::Dr, 1e-3)];
        let text = profile_csv(&records, &[]);
        assert_eq!(text.lines().count(), 1); // header only
    }

    #[test]
    fn runs_csv_leaves_lambda_blank_for_baselines() {
        let mut with_lambda = record(Method::Dr, 1e-3);
        with_lambda.lambda = Some(1.0);
        let without = record(Method::Spl, 1e-2);
        let text = runs_csv(&[with_lambda, without]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains(",1.0000000000000000e0,"));
        assert!(lines[2].contains(",,"));
    }
}
