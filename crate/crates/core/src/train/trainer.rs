use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, OptimizerState};
use super::config::TrainConfig;
use super::schedule::lr_at;
use super::stopping::EarlyStopping;
use crate::data::{batch_iter, collate, stream_seed, Dataset, FeatureArchive, LoadPlan, Split};
use crate::diffgraph::Tape;
use crate::eval::{evaluate, MetricsReport};
use crate::model::{ClipInput, ParamStore, Uegd};
use crate::{parallel, Error, Result};

// Independent random streams derived from a trial seed.
const STREAM_INIT: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_MASK: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

/// One line of the per-epoch training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_l1: f64,
    pub valid_l1: f64,
    /// Rate used by the last update of the epoch.
    pub lr: f64,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch,train_l1,valid_l1,lr";
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{:e}", self.epoch, self.train_l1, self.valid_l1, self.lr)
    }
}

/// Called after every epoch of one training run.
pub type EpochSink<'a> = &'a (dyn Fn(&EpochLog) + Sync);

/// Called with the trial index after every epoch of every trial.
pub type TrialSink<'a> = &'a (dyn Fn(usize, &EpochLog) + Sync);

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    /// Parameters from the epoch with the lowest validation L1.
    pub params: ParamStore<f32>,
    pub curve: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_valid_l1: f64,
    pub stopped_epoch: usize,
}

/// Train, validation and (optionally) test splits held in memory.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Option<Dataset>,
}

impl SplitData {
    pub fn load(archive: &FeatureArchive, plan: &LoadPlan) -> Result<Self> {
        let has_test = archive.manifest().counts()[Split::Test as usize] > 0;
        Ok(SplitData {
            train: archive.load_split(Split::Train, plan)?,
            valid: archive.load_split(Split::Valid, plan)?,
            test: if has_test {
                Some(archive.load_split(Split::Test, plan)?)
            } else {
                None
            },
        })
    }
}

/// Mean evaluation-mode L1 over a split.
pub fn mean_l1(model: &Uegd, params: &ParamStore<f32>, data: &Dataset) -> Result<f64> {
    let preds = parallel::map(&data.inputs, |clip| model.predict(params, clip).map(|p| p.y_hat));
    let mut total = 0.0;
    for (p, r) in preds.into_iter().zip(&data.records) {
        total += (p? - r.label).abs();
    }
    Ok(total / data.len() as f64)
}

struct ClipGrad {
    loss: f64,
    grads: Vec<(usize, Vec<f32>)>,
}

fn clip_backward(
    model: &Uegd,
    params: &ParamStore<f32>,
    clip: &ClipInput<f32>,
    label: f32,
    weight: f32,
    dropout_seed: u64,
) -> Result<ClipGrad> {
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, params, clip, Some(&mut rng))?;
    let loss = tape.l1_loss(out.y_hat, &[label])?;
    let value = tape.value(loss)[0] as f64;
    let scaled = tape.scale(loss, weight);
    let grads = tape.backward(scaled)?;
    Ok(ClipGrad {
        loss: value,
        grads: tape.param_grads(&grads),
    })
}

/// Trains one model from `seed`. Clips of a batch are processed in parallel
/// and their gradients summed in batch order, so results do not depend on
/// the worker count.
pub fn train_one(
    model: &Uegd,
    train: &Dataset,
    valid: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
    sink: Option<EpochSink<'_>>,
) -> Result<TrialResult> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::Data("training needs nonempty train and valid splits".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_INIT));
    let mut params = ParamStore::<f32>::init(model.layout(), &mut init_rng);
    let mut opt = OptimizerState::new(cfg.betas.0, cfg.betas.1, cfg.adam_eps);
    let mut stopper = EarlyStopping::new(cfg.patience);

    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.max_epochs;
    let (order_base, mask_base, dropout_base) = (
        stream_seed(seed, STREAM_ORDER),
        stream_seed(seed, STREAM_MASK),
        stream_seed(seed, STREAM_DROPOUT),
    );

    let mut best = params.clone();
    let mut curve = Vec::new();
    let mut step = 0usize;
    let mut stopped_epoch = cfg.max_epochs;
    for epoch in 1..=cfg.max_epochs {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_base);
        mask_rng.set_stream(epoch as u64);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(dropout_base);
        dropout_rng.set_stream(epoch as u64);

        let mut epoch_loss = 0.0;
        let mut lr = 0.0;
        for (b, indices) in batch_iter(train.len(), cfg.batch_size, Some(stream_seed(order_base, epoch as u64)))?.enumerate() {
            step += 1;
            let batch = collate(train, &indices, Some((&cfg.mask, &mut mask_rng)));
            let weight = 1.0 / batch.len() as f32;
            let jobs: Vec<(usize, u64)> = (0..batch.len()).map(|i| (i, dropout_rng.random())).collect();
            let results = parallel::map(&jobs, |&(i, ds)| {
                clip_backward(model, &params, &batch.inputs[i], batch.labels[i], weight, ds)
            });

            let mut sums: Vec<Option<Vec<f32>>> = vec![None; params.len()];
            let mut batch_loss = 0.0;
            for r in results {
                let r = r?;
                batch_loss += r.loss;
                for (id, g) in r.grads {
                    match &mut sums[id] {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        slot => *slot = Some(g),
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss diverged at epoch {epoch}, step {} (global step {step})",
                    b + 1
                )));
            }
            epoch_loss += batch_loss;
            for (id, g) in sums.into_iter().enumerate() {
                if let Some(g) = g {
                    params.get_mut(id).accumulate_grad(&g)?;
                }
            }
            lr = lr_at(step, total_steps, cfg.base_lr, cfg.warmup_frac);
            adam_step(params.tensors_mut(), &mut opt, lr)?;
        }

        let log = EpochLog {
            epoch,
            train_l1: epoch_loss / train.len() as f64,
            valid_l1: mean_l1(model, &params, valid)?,
            lr,
        };
        if !log.valid_l1.is_finite() {
            return Err(Error::Training(format!("validation loss diverged at epoch {epoch}")));
        }
        if let Some(sink) = sink {
            sink(&log);
        }
        curve.push(log);
        let decision = stopper.update(epoch, log.valid_l1);
        if decision.improved {
            best = params.clone();
        }
        if decision.stop {
            stopped_epoch = epoch;
            break;
        }
    }
    Ok(TrialResult {
        seed,
        params: best,
        curve,
        best_epoch: stopper.best_epoch(),
        best_valid_l1: stopper.best(),
        stopped_epoch,
    })
}

#[derive(Debug, Clone)]
pub struct TrialsOutcome {
    pub trials: Vec<TrialResult>,
    /// Test metrics per trial, in seed order.
    pub test: Vec<MetricsReport>,
    pub average: MetricsReport,
}

/// One [`train_one`] per configured seed, in parallel, then test metrics
/// per trial and their arithmetic mean.
pub fn run_trials(model: &Uegd, data: &SplitData, cfg: &TrainConfig, sink: Option<TrialSink<'_>>) -> Result<TrialsOutcome> {
    cfg.validate()?;
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| Error::Data("split `test` is empty".into()))?;
    let jobs: Vec<(usize, u64)> = cfg.seeds.iter().copied().enumerate().collect();
    let outcomes = parallel::with_workers(cfg.workers, || {
        parallel::map(&jobs, |&(i, seed)| {
            let trial_sink = move |log: &EpochLog| {
                if let Some(sink) = sink {
                    sink(i, log);
                }
            };
            let trial = train_one(model, &data.train, &data.valid, cfg, seed, Some(&trial_sink))?;
            let eval = evaluate(model, &trial.params, test)?;
            Ok::<_, Error>((trial, eval.report))
        })
    });
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut reports = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (t, r) = o?;
        trials.push(t);
        reports.push(r);
    }
    let average = MetricsReport::average(&reports);
    Ok(TrialsOutcome {
        trials,
        test: reports,
        average,
    })
}
