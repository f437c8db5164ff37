use std::path::Path;

use super::{csv_writer, evaluate, MetricsReport};
use crate::data::{FeatureArchive, LoadPlan};
use crate::model::{Aggregation, ModalitySet, ModelConfig, Uegd};
use crate::train::{train_one, EpochLog, SplitData, TrainConfig};
use crate::{parallel, Error, Modality, Result};

/// Per-layer unimodal results, ordered by layer (index 0 is layer 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSweepResult {
    pub modality: Modality,
    /// Validation correlation per layer, averaged over seeds.
    pub valid_corr: Vec<f64>,
    /// Test metrics per layer, averaged over seeds.
    pub test: Vec<MetricsReport>,
    /// 1-based layer with the highest validation correlation.
    pub best_layer: usize,
}

/// 1-based position of the maximum; ties go to the lowest index and NaN
/// never wins.
pub fn argmax_layer(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best + 1
}

impl LayerSweepResult {
    /// Writes `layer,valid_corr,test_mae,test_corr,test_acc2_pos,test_f1_pos`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv_writer(path.as_ref())?;
        w.write_record(["layer", "valid_corr", "test_mae", "test_corr", "test_acc2_pos", "test_f1_pos"])?;
        for (i, (c, t)) in self.valid_corr.iter().zip(&self.test).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                c.to_string(),
                t.mae.to_string(),
                t.corr.to_string(),
                t.acc2_pos.to_string(),
                t.f1_pos.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Receives `(layer, seed, epoch log)` during a sweep.
pub type SweepSink<'a> = &'a (dyn Fn(usize, u64, &EpochLog) + Sync);

/// Trains a unimodal `modality` model on each stored layer for every seed
/// in `train_cfg`, in parallel, and picks the layer with the best
/// validation correlation. `sink` receives `(layer, seed, log)`.
pub fn layer_sweep(
    archive: &FeatureArchive,
    modality: Modality,
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    sink: Option<SweepSink<'_>>,
) -> Result<LayerSweepResult> {
    train_cfg.validate()?;
    let shape = archive
        .shape(modality)
        .ok_or_else(|| Error::Data(format!("archive has no {modality} features")))?;
    let mut models = Vec::with_capacity(shape.layers);
    for k in 1..=shape.layers {
        let mut cfg = base.clone();
        cfg.modalities = ModalitySet::only(modality);
        cfg.aggregation = Aggregation::SingleLayer([k; 3]);
        cfg.input_dims[modality.index()] = shape.dim;
        cfg.num_layers[modality.index()] = shape.layers;
        models.push(Uegd::new(cfg)?);
    }
    let data = SplitData::load(archive, &LoadPlan::all(ModalitySet::only(modality)))?;
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| Error::Data("split `test` is empty".into()))?;

    let jobs: Vec<(usize, u64)> = (0..shape.layers)
        .flat_map(|k| train_cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let outcomes = parallel::with_workers(train_cfg.workers, || {
        parallel::map(&jobs, |&(k, seed)| {
            let model = &models[k];
            let job_sink = move |log: &EpochLog| {
                if let Some(sink) = sink {
                    sink(k + 1, seed, log);
                }
            };
            let run = || -> Result<(f64, MetricsReport)> {
                let trial = train_one(model, &data.train, &data.valid, train_cfg, seed, Some(&job_sink))?;
                let valid = evaluate(model, &trial.params, &data.valid)?;
                let test = evaluate(model, &trial.params, test)?;
                Ok((valid.report.corr, test.report))
            };
            run().map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!("layer {}: {msg}", k + 1)),
                other => other,
            })
        })
    });

    let per_layer = train_cfg.seeds.len();
    let mut valid_corr = Vec::with_capacity(shape.layers);
    let mut test_reports = Vec::with_capacity(shape.layers);
    let mut outcomes = outcomes.into_iter();
    for _ in 0..shape.layers {
        let mut corrs = Vec::with_capacity(per_layer);
        let mut reports = Vec::with_capacity(per_layer);
        for o in outcomes.by_ref().take(per_layer) {
            let (c, r) = o?;
            corrs.push(c);
            reports.push(r);
        }
        valid_corr.push(corrs.iter().sum::<f64>() / per_layer as f64);
        test_reports.push(MetricsReport::average(&reports));
    }
    Ok(LayerSweepResult {
        modality,
        best_layer: argmax_layer(&valid_corr),
        valid_corr,
        test: test_reports,
    })
}
