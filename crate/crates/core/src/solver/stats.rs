use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::SolveError;

/// Error thresholds of the percentage rows, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BucketEdges {
    pub lt_small: f64,
    pub lt_medium: f64,
    pub gt_large: f64,
}

impl Default for BucketEdges {
    fn default() -> Self {
        Self {
            lt_small: 15.0,
            lt_medium: 30.0,
            gt_large: 40.0,
        }
    }
}

/// Aggregate 3D error statistics of one method over a run.
///
/// Percentages are over solved epochs; `availability` is solved over total.
/// With no solved epoch, mean and std are NaN (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_error: f64,
    pub std: f64,
    pub pct_lt_15: f64,
    pub pct_lt_30: f64,
    pub pct_gt_40: f64,
    pub availability: f64,
    pub epochs: usize,
    pub solved: usize,
}

/// Statistics from per-epoch 3D errors, `None` for epochs without a solution.
pub fn error_stats(errors: &[Option<f64>], edges: &BucketEdges) -> Result<ErrorStats, SolveError> {
    if errors.is_empty() {
        return Err(SolveError::EmptyInput);
    }
    let solved: Vec<f64> = errors.iter().flatten().copied().collect();
    let n = solved.len() as f64;
    let pct = |pred: &dyn Fn(f64) -> bool| {
        if solved.is_empty() {
            0.0
        } else {
            100.0 * solved.iter().filter(|&&e| pred(e)).count() as f64 / n
        }
    };
    let mean = solved.iter().sum::<f64>() / n;
    let var = solved.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorStats {
        mean_error: mean,
        std: var.sqrt(),
        pct_lt_15: pct(&|e| e < edges.lt_small),
        pct_lt_30: pct(&|e| e < edges.lt_medium),
        pct_gt_40: pct(&|e| e > edges.gt_large),
        availability: 100.0 * n / errors.len() as f64,
        epochs: errors.len(),
        solved: solved.len(),
    })
}

/// Aligned text table with one column per method.
pub fn format_table(columns: &[(&str, ErrorStats)], edges: &BucketEdges) -> String {
    let rows: [(String, fn(&ErrorStats) -> String); 6] = [
        ("Mean error".into(), |s| format!("{:.2}", s.mean_error)),
        ("Std".into(), |s| format!("{:.2}", s.std)),
        (format!("Percentage (<{} meters)", edges.lt_small), |s| format!("{:.2}%", s.pct_lt_15)),
        (format!("Percentage (<{} meters)", edges.lt_medium), |s| format!("{:.2}%", s.pct_lt_30)),
        (format!("Percentage (>{} meters)", edges.gt_large), |s| format!("{:.2}%", s.pct_gt_40)),
        ("Availability".into(), |s| format!("{:.2}%", s.availability)),
    ];
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("All data".len());
    let col_w = columns.iter().map(|(name, _)| name.len()).max().unwrap_or(0).max(10);
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "All data");
    for (name, _) in columns {
        let _ = write!(out, "  {name:>col_w$}");
    }
    out.push('\n');
    for (label, cell) in &rows {
        let _ = write!(out, "{label:<label_w$}");
        for (_, stats) in columns {
            let _ = write!(out, "  {:>col_w$}", cell(stats));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_errors() {
        let s = error_stats(&[Some(10.0); 5], &BucketEdges::default()).unwrap();
        assert_eq!(s.mean_error, 10.0);
        assert_eq!(s.std, 0.0);
        assert_eq!((s.pct_lt_15, s.pct_lt_30, s.pct_gt_40), (100.0, 100.0, 0.0));
        assert_eq!(s.availability, 100.0);
    }

    #[test]
    fn two_errors() {
        let s = error_stats(&[Some(10.0), Some(50.0)], &BucketEdges::default()).unwrap();
        assert_eq!(s.mean_error, 30.0);
        assert_eq!(s.std, 20.0);
        assert_eq!((s.pct_lt_15, s.pct_gt_40), (50.0, 50.0));
    }

    #[test]
    fn availability_counts_unsolved_epochs() {
        let s = error_stats(&[Some(10.0), None, None, Some(20.0)], &BucketEdges::default()).unwrap();
        assert_eq!(s.availability, 50.0);
        assert_eq!(s.mean_error, 15.0);
        let none = error_stats(&[None], &BucketEdges::default()).unwrap();
        assert!(none.mean_error.is_nan());
        assert_eq!(none.availability, 0.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(error_stats(&[], &BucketEdges::default()), Err(SolveError::EmptyInput)));
    }

    #[test]
    fn table_has_row_labels() {
        let s = error_stats(&[Some(10.0)], &BucketEdges::default()).unwrap();
        let t = format_table(&[("LS", s), ("WLS-ESF-NE", s)], &BucketEdges::default());
        assert!(t.starts_with("All data"));
        for label in ["Mean error", "Std", "Percentage (<15 meters)", "Percentage (<30 meters)", "Percentage (>40 meters)"] {
            assert!(t.contains(label));
        }
        let widths: Vec<usize> = t.lines().map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }
}
