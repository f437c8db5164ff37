use std::collections::BTreeMap;
use std::path::Path;

use super::csv_writer;
use crate::{Error, Result};

/// Total and within-video spread of predictions for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub tag: String,
    pub total_var: f64,
    /// Clip-count-weighted mean of per-video population variances.
    pub intra_var: f64,
}

fn population_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// `preds[i]` belongs to video `video_ids[i]`.
pub fn variance_report(tag: &str, preds: &[f64], video_ids: &[&str]) -> Result<VarianceReport> {
    if preds.len() != video_ids.len() || preds.is_empty() {
        return Err(Error::Data(format!(
            "variance needs one video id per prediction, got {} and {}",
            preds.len(),
            video_ids.len()
        )));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (&p, &v) in preds.iter().zip(video_ids) {
        groups.entry(v).or_default().push(p);
    }
    let n = preds.len() as f64;
    let intra = groups.values().map(|g| g.len() as f64 * population_var(g)).sum::<f64>() / n;
    Ok(VarianceReport {
        tag: tag.to_string(),
        total_var: population_var(preds),
        intra_var: intra,
    })
}

/// Writes `config,total_var,intra_var` rows.
pub fn write_variance_csv(path: impl AsRef<Path>, reports: &[VarianceReport]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["config", "total_var", "intra_var"])?;
    for r in reports {
        w.write_record([r.tag.as_str(), &r.total_var.to_string(), &r.intra_var.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}
