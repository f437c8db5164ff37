//! Metrics, gate export, variance analysis and layer sweeps.

mod gates;
mod metrics;
mod sweep;
mod variance;

use std::path::Path;

pub use gates::{write_gate_records, GateHistogram, GateRecord, GATE_BINS};
pub use metrics::{compute_metrics, pearson, MetricsReport};
pub use sweep::{argmax_layer, layer_sweep, LayerSweepResult, SweepSink};
pub use variance::{variance_report, write_variance_csv, VarianceReport};

use crate::data::Dataset;
use crate::model::{ParamStore, Uegd};
use crate::{parallel, Error, Result};

/// Evaluation-mode predictions, metrics and gates for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<f64>,
    pub gates: Vec<GateRecord>,
}

impl Evaluation {
    pub fn histogram(&self) -> GateHistogram {
        GateHistogram::from_records(&self.gates)
    }
}

/// Runs the model without dropout or masking over every clip of `data`.
pub fn evaluate(model: &Uegd, params: &ParamStore<f32>, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let outputs = parallel::map(&data.inputs, |clip| model.predict(params, clip));
    let mut predictions = Vec::with_capacity(data.len());
    let mut gates = Vec::with_capacity(data.len());
    for (out, rec) in outputs.into_iter().zip(&data.records) {
        let p = out?;
        predictions.push(p.y_hat);
        gates.push(GateRecord {
            clip_id: rec.clip_id.clone(),
            alpha: p.gates,
        });
    }
    let report = compute_metrics(&predictions, &data.labels())?;
    Ok(Evaluation {
        report,
        predictions,
        gates,
    })
}

/// Gate records and their histogram for one split.
pub fn export_gates(model: &Uegd, params: &ParamStore<f32>, data: &Dataset) -> Result<(Vec<GateRecord>, GateHistogram)> {
    let eval = evaluate(model, params, data)?;
    let hist = eval.histogram();
    Ok((eval.gates, hist))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}
