use crate::data::MaskSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Fraction of all update steps spent in linear warmup.
    pub warmup_frac: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub seeds: Vec<u64>,
    pub mask: MaskSpec,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 1e-4,
            batch_size: 16,
            max_epochs: 100,
            warmup_frac: 0.1,
            patience: 10,
            betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seeds: vec![1, 2, 3, 4, 5],
            mask: MaskSpec::default(),
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.base_lr));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return bad(format!("warmup_frac must lie in (0, 1), got {}", self.warmup_frac));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("Adam betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad(format!("Adam eps must be positive, got {}", self.adam_eps));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        self.mask.validate()
    }
}
