use std::path::Path;

use super::csv_writer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    pub corr: f64,
    /// Sign accuracy with classes `y < 0` vs `y ≥ 0` over every clip.
    pub acc2_nonneg: f64,
    /// Sign accuracy with classes `y < 0` vs `y > 0`, zero labels excluded.
    pub acc2_pos: f64,
    pub f1_nonneg: f64,
    pub f1_pos: f64,
    pub n_total: usize,
    pub n_nonzero: usize,
    /// Set when either side had zero variance and `corr` was reported as 0.
    pub corr_degenerate: bool,
}

impl MetricsReport {
    /// Per-metric arithmetic mean. Counts are taken from the first report;
    /// the degenerate flag is set if any input had it.
    pub fn average(reports: &[MetricsReport]) -> MetricsReport {
        let n = reports.len().max(1) as f64;
        let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        MetricsReport {
            mae: mean(|r| r.mae),
            corr: mean(|r| r.corr),
            acc2_nonneg: mean(|r| r.acc2_nonneg),
            acc2_pos: mean(|r| r.acc2_pos),
            f1_nonneg: mean(|r| r.f1_nonneg),
            f1_pos: mean(|r| r.f1_pos),
            n_total: reports.first().map_or(0, |r| r.n_total),
            n_nonzero: reports.first().map_or(0, |r| r.n_nonzero),
            corr_degenerate: reports.iter().any(|r| r.corr_degenerate),
        }
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn rows(&self) -> [(&'static str, f64); 8] {
        [
            ("mae", self.mae),
            ("corr", self.corr),
            ("acc2_nonneg", self.acc2_nonneg),
            ("acc2_pos", self.acc2_pos),
            ("f1_nonneg", self.f1_nonneg),
            ("f1_pos", self.f1_pos),
            ("n_total", self.n_total as f64),
            ("n_nonzero", self.n_nonzero as f64),
        ]
    }

    /// Writes `metric,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv_writer(path.as_ref())?;
        w.write_record(["metric", "value"])?;
        for (name, v) in self.rows() {
            w.write_record([name, &v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Accuracy and support-weighted F1 for binary labels.
#[allow(clippy::needless_range_loop)]
fn binary_scores(pairs: impl Iterator<Item = (bool, bool)>) -> (f64, f64) {
    // counts[truth][pred]
    let mut counts = [[0usize; 2]; 2];
    for (t, p) in pairs {
        counts[t as usize][p as usize] += 1;
    }
    let n: usize = counts.iter().flatten().sum();
    if n == 0 {
        return (0.0, 0.0);
    }
    let acc = (counts[0][0] + counts[1][1]) as f64 / n as f64;
    let mut f1 = 0.0;
    for c in 0..2 {
        let tp = counts[c][c] as f64;
        let support = (counts[c][0] + counts[c][1]) as f64;
        let predicted = (counts[0][c] + counts[1][c]) as f64;
        let denom = support + predicted;
        let f = if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
        f1 += f * support / n as f64;
    }
    (acc, f1)
}

pub fn compute_metrics(preds: &[f64], labels: &[f64]) -> Result<MetricsReport> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Data(format!(
            "metrics need equal nonzero lengths, got {} predictions and {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let n_total = preds.len();
    let mae = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n_total as f64;
    let corr = pearson(preds, labels);
    let (acc2_nonneg, f1_nonneg) = binary_scores(preds.iter().zip(labels).map(|(&p, &y)| (y >= 0.0, p >= 0.0)));
    let nonzero = || preds.iter().zip(labels).filter(|(_, &y)| y != 0.0);
    let (acc2_pos, f1_pos) = binary_scores(nonzero().map(|(&p, &y)| (y > 0.0, p > 0.0)));
    Ok(MetricsReport {
        mae,
        corr: corr.unwrap_or(0.0),
        acc2_nonneg,
        acc2_pos,
        f1_nonneg,
        f1_pos,
        n_total,
        n_nonzero: nonzero().count(),
        corr_degenerate: corr.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [-2.0, -0.5, 1.0, 2.5];
        let r = compute_metrics(&y, &y).unwrap();
        assert_eq!(r.mae, 0.0);
        assert!((r.corr - 1.0).abs() < 1e-12);
        for v in [r.acc2_nonneg, r.acc2_pos, r.f1_nonneg, r.f1_pos] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn half_signs_agree() {
        let r = compute_metrics(&[-1.0, 1.0, 1.0, -1.0], &[-2.0, 2.0, -2.0, 2.0]).unwrap();
        assert_eq!(r.acc2_pos, 0.5);
    }

    #[test]
    fn zero_labels_only_in_nonneg_variant() {
        let r = compute_metrics(&[0.5, -0.5, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!((r.n_total, r.n_nonzero), (3, 1));
        assert!((r.acc2_nonneg - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.acc2_pos, 1.0);
    }

    #[test]
    fn constant_predictions_flag_degenerate() {
        let r = compute_metrics(&[1.0, 1.0, 1.0], &[0.5, 1.0, -1.0]).unwrap();
        assert!(r.corr_degenerate);
        assert_eq!(r.corr, 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn average_of_one_is_identity() {
        let r = compute_metrics(&[0.3, -1.0, 2.0], &[0.5, -0.8, 1.0]).unwrap();
        assert_eq!(MetricsReport::average(&[r]), r);
    }
}
