use std::f64::consts::PI;

/// Linear warmup from 0 to `base_lr` over `warmup_frac · total_steps`, then
/// cosine decay to 0 at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, base_lr: f64, warmup_frac: f64) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    let step = step.min(total_steps) as f64;
    let total = total_steps as f64;
    let warmup = warmup_frac * total;
    if step < warmup {
        return base_lr * step / warmup;
    }
    let span = total - warmup;
    if span <= 0.0 {
        return base_lr;
    }
    let progress = (step - warmup) / span;
    base_lr * 0.5 * (1.0 + (PI * progress).cos())
}
