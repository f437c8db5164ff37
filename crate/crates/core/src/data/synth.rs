//! Synthetic archives with a planted sentiment signal.
//!
//! For an informative modality with unit direction `v`, layer `ℓ` of every
//! frame is `(ℓ/L)·y·v + ε` where `ε ~ N(0, noise_std²)` is drawn once per
//! frame and shared by all layers, so the top layer carries the cleanest
//! signal. Uninformative modalities are unit-variance noise with no label
//! dependence. Labels are `Uniform[-3, 3]`; every four consecutive clips
//! share a video id.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::archive::{feature_path, FeatureArchive, MANIFEST_FILE};
use super::format::write_clip_features;
use super::manifest::{write_manifest, ClipRecord, Manifest, Split};
use crate::diffgraph::Tensor;
use crate::model::ModalitySet;
use crate::{Error, Modality, Result};

pub const CLIPS_PER_VIDEO: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Clip counts for (train, valid, test).
    pub clips: [usize; 3],
    /// Inclusive frame-count range, drawn per clip and modality.
    pub frames: (usize, usize),
    pub dims: [usize; 3],
    pub layers: usize,
    pub modalities: ModalitySet,
    pub informative: [bool; 3],
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            clips: [64, 16, 16],
            frames: (4, 8),
            dims: [8, 8, 8],
            layers: 4,
            modalities: ModalitySet::ALL,
            informative: [false, true, false],
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clips.iter().sum::<usize>() == 0 {
            return Err(Error::Config("synthetic archive needs at least one clip".into()));
        }
        if self.frames.0 == 0 || self.frames.0 > self.frames.1 {
            return Err(Error::Config(format!("bad frame range {:?}", self.frames)));
        }
        if self.layers == 0 || self.layers > u16::MAX as usize {
            return Err(Error::Config(format!("bad layer count {}", self.layers)));
        }
        if self.dims.contains(&0) {
            return Err(Error::Config("feature widths must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("bad noise_std {}", self.noise_std)));
        }
        for m in Modality::ALL {
            if self.informative[m.index()] && !self.modalities.contains(m) {
                return Err(Error::Config(format!("informative modality {m} is not generated")));
            }
        }
        Ok(())
    }

    /// The fixed unit direction carrying the label in modality `m`.
    pub fn direction(&self, m: Modality) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1000 + m.index() as u64);
        let d = self.dims[m.index()];
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter().map(|x| (x / norm) as f32).collect()
    }
}

/// Feature stack `[L×T×D]` for one clip and modality.
fn clip_stack(spec: &SynthSpec, m: Modality, label: f64, dir: &[f32], rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let (l, d) = (spec.layers, spec.dims[m.index()]);
    let t = rng.random_range(spec.frames.0..=spec.frames.1);
    let informative = spec.informative[m.index()];
    let std = if informative { spec.noise_std } else { 1.0 };
    let noise: Vec<f32> = if std > 0.0 {
        let dist = Normal::new(0.0, std).expect("finite std");
        (0..t * d).map(|_| dist.sample(rng) as f32).collect()
    } else {
        vec![0.0; t * d]
    };
    let mut data = Vec::with_capacity(l * t * d);
    for layer in 1..=l {
        let scale = if informative {
            (layer as f64 / l as f64 * label) as f32
        } else {
            0.0
        };
        for frame in noise.chunks(d) {
            data.extend(frame.iter().zip(dir).map(|(&e, &v)| scale * v + e));
        }
    }
    Tensor::new(vec![l, t, d], data).expect("synthetic shape")
}

/// Writes a synthetic archive under `root` and opens it.
pub fn synth_generate(spec: &SynthSpec, root: impl AsRef<Path>) -> Result<FeatureArchive> {
    spec.validate()?;
    let root = root.as_ref();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for m in spec.modalities.iter() {
        let dir = root.join(m.name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let dirs = Modality::ALL.map(|m| spec.direction(m));
    let mut label_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut feat_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    feat_rng.set_stream(1);

    let mut records = Vec::with_capacity(spec.clips.iter().sum());
    let mut index = 0usize;
    for split in Split::ALL {
        for _ in 0..spec.clips[split as usize] {
            let label = label_rng.random_range(-3.0..=3.0);
            let rec = ClipRecord {
                clip_id: format!("clip{index:05}"),
                video_id: format!("vid{:04}", index / CLIPS_PER_VIDEO),
                split,
                label,
            };
            for m in spec.modalities.iter() {
                let stack = clip_stack(spec, m, label, &dirs[m.index()], &mut feat_rng);
                write_clip_features(feature_path(root, m, &rec.clip_id), m, &stack)?;
            }
            records.push(rec);
            index += 1;
        }
    }
    write_manifest(root.join(MANIFEST_FILE), &Manifest::new(records)?)?;
    FeatureArchive::open(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LoadPlan, Split};

    fn small(noise_std: f64) -> SynthSpec {
        SynthSpec {
            clips: [10, 3, 3],
            frames: (2, 5),
            dims: [3, 4, 5],
            layers: 3,
            noise_std,
            seed: 42,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn noiseless_projection_recovers_label() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(0.0);
        let archive = synth_generate(&spec, dir.path()).unwrap();
        let data = archive
            .load_split(Split::Train, &LoadPlan::all(ModalitySet::ALL))
            .unwrap();
        let v = spec.direction(Modality::Acoustic);
        for (rec, clip) in data.records.iter().zip(&data.inputs) {
            let input = clip.modal[1].as_ref().unwrap();
            let top = input.stack.index_axis0(2).unwrap();
            let (t, d) = (top.shape()[0], top.shape()[1]);
            let mean_proj: f64 = top
                .data()
                .chunks(d)
                .map(|f| f.iter().zip(&v).map(|(&a, &b)| (a * b) as f64).sum::<f64>())
                .sum::<f64>()
                / t as f64;
            assert!((mean_proj - rec.label).abs() < 1e-5, "{mean_proj} vs {}", rec.label);
        }
    }

    #[test]
    fn layout_and_grouping() {
        let dir = tempfile::tempdir().unwrap();
        let archive = synth_generate(&small(0.5), dir.path()).unwrap();
        assert_eq!(archive.manifest().counts(), [10, 3, 3]);
        let s = archive.shape(Modality::Linguistic).unwrap();
        assert_eq!((s.layers, s.dim), (3, 5));
        let recs = &archive.manifest().records;
        assert_eq!(recs[0].video_id, recs[3].video_id);
        assert_ne!(recs[3].video_id, recs[4].video_id);
        assert!(recs.iter().all(|r| (-3.0..=3.0).contains(&r.label)));
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        synth_generate(&small(0.5), a.path()).unwrap();
        synth_generate(&small(0.5), b.path()).unwrap();
        for rel in ["manifest.csv", "visual/clip00003.msaf", "acoustic/clip00015.msaf"] {
            assert_eq!(
                std::fs::read(a.path().join(rel)).unwrap(),
                std::fs::read(b.path().join(rel)).unwrap()
            );
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small(0.5);
        s.modalities = ModalitySet::only(Modality::Visual);
        assert!(s.validate().is_err());
        let mut s = small(0.5);
        s.frames = (5, 2);
        assert!(s.validate().is_err());
        let mut s = small(-1.0);
        s.noise_std = -1.0;
        assert!(s.validate().is_err());
    }
}
