use std::path::Path;

use super::csv_writer;
use crate::{Error, Modality, Result};

pub const GATE_BINS: usize = 20;

/// Gate weights the model assigned to each modality of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord {
    pub clip_id: String,
    /// Indexed by [`Modality::index`].
    pub alpha: [f64; 3],
}

/// Counts per modality over 20 equal bins of [0, 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateHistogram {
    pub counts: [[usize; GATE_BINS]; 3],
}

fn bin_of(alpha: f64) -> usize {
    ((alpha * GATE_BINS as f64).floor().max(0.0) as usize).min(GATE_BINS - 1)
}

impl GateHistogram {
    pub fn from_records(records: &[GateRecord]) -> Self {
        let mut counts = [[0; GATE_BINS]; 3];
        for r in records {
            for m in 0..3 {
                counts[m][bin_of(r.alpha[m])] += 1;
            }
        }
        GateHistogram { counts }
    }

    /// Writes `modality,bin_lo,bin_hi,count` rows, every bin included.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv_writer(path.as_ref())?;
        w.write_record(["modality", "bin_lo", "bin_hi", "count"])?;
        for m in Modality::ALL {
            for (b, c) in self.counts[m.index()].iter().enumerate() {
                let lo = b as f64 / GATE_BINS as f64;
                let hi = (b + 1) as f64 / GATE_BINS as f64;
                w.write_record([m.name(), &lo.to_string(), &hi.to_string(), &c.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Writes one `clip_id,alpha_visual,alpha_acoustic,alpha_linguistic` row per clip.
pub fn write_gate_records(path: impl AsRef<Path>, records: &[GateRecord]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["clip_id", "alpha_visual", "alpha_acoustic", "alpha_linguistic"])?;
    for r in records {
        w.write_record([
            r.clip_id.as_str(),
            &r.alpha[0].to_string(),
            &r.alpha[1].to_string(),
            &r.alpha[2].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}
