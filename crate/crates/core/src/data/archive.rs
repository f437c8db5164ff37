use std::path::{Path, PathBuf};

use super::format::{read_clip_features, read_clip_layer, read_header, FeatureHeader};
use super::manifest::{load_manifest, ClipRecord, Manifest, Split};
use crate::model::{Aggregation, ClipInput, ModalInput, ModalitySet, ModelConfig};
use crate::{Error, Modality, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const FEATURE_EXT: &str = "msaf";

/// `(layers, dim)` of one modality, constant across an archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalityShape {
    pub layers: usize,
    pub dim: usize,
}

/// On-disk archive: `<root>/manifest.csv` plus
/// `<root>/<modality>/<clip_id>.msaf` for every clip and stored modality.
#[derive(Debug, Clone)]
pub struct FeatureArchive {
    root: PathBuf,
    manifest: Manifest,
    shapes: [Option<ModalityShape>; 3],
}

pub fn feature_path(root: &Path, m: Modality, clip_id: &str) -> PathBuf {
    root.join(m.name()).join(format!("{clip_id}.{FEATURE_EXT}"))
}

impl FeatureArchive {
    /// Opens an archive and validates every feature-file header. A modality
    /// counts as stored when its directory exists; it must then hold a file
    /// for every clip with constant `L` and `D`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let manifest = load_manifest(root.join(MANIFEST_FILE))?;
        let mut shapes = [None; 3];
        for m in Modality::ALL {
            if !root.join(m.name()).is_dir() {
                continue;
            }
            let mut shape: Option<ModalityShape> = None;
            for r in &manifest.records {
                let h = read_header(feature_path(&root, m, &r.clip_id))?;
                check_header(&h, m, &r.clip_id)?;
                let s = ModalityShape {
                    layers: h.layers,
                    dim: h.dim,
                };
                match shape {
                    None => shape = Some(s),
                    Some(prev) if prev != s => {
                        return Err(Error::Data(format!(
                            "{m}: clip {} has (L, D) = ({}, {}), archive has ({}, {})",
                            r.clip_id, s.layers, s.dim, prev.layers, prev.dim
                        )))
                    }
                    _ => {}
                }
            }
            shapes[m.index()] = shape;
        }
        if shapes.iter().all(Option::is_none) {
            return Err(Error::Data(format!("{}: no modality directories", root.display())));
        }
        Ok(FeatureArchive {
            root,
            manifest,
            shapes,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn shape(&self, m: Modality) -> Option<ModalityShape> {
        self.shapes[m.index()]
    }

    /// Feature widths and layer counts for building a model config; absent
    /// modalities get placeholder width 1 and one layer.
    pub fn dims(&self) -> ([usize; 3], [usize; 3]) {
        let d = Modality::ALL.map(|m| self.shape(m).map_or(1, |s| s.dim));
        let l = Modality::ALL.map(|m| self.shape(m).map_or(1, |s| s.layers));
        (d, l)
    }

    pub fn path(&self, m: Modality, clip_id: &str) -> PathBuf {
        feature_path(&self.root, m, clip_id)
    }

    /// Loads one split into memory according to `plan`.
    pub fn load_split(&self, split: Split, plan: &LoadPlan) -> Result<Dataset> {
        let records: Vec<ClipRecord> = self.manifest.split(split).cloned().collect();
        if records.is_empty() {
            return Err(Error::Data(format!("split `{split}` is empty")));
        }
        for m in plan.modalities.iter() {
            if self.shape(m).is_none() {
                return Err(Error::Data(format!("archive has no {m} features")));
            }
        }
        let inputs = crate::parallel::map(&records, |r| self.load_clip(r, plan));
        let inputs = inputs.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Dataset { records, inputs })
    }

    fn load_clip(&self, r: &ClipRecord, plan: &LoadPlan) -> Result<ClipInput<f32>> {
        let mut modal: [Option<ModalInput<f32>>; 3] = [None, None, None];
        for m in plan.modalities.iter() {
            let path = self.path(m, &r.clip_id);
            let input = match plan.layers[m.index()] {
                LayerKeep::All => {
                    let (h, stack) = read_clip_features(&path)?;
                    check_header(&h, m, &r.clip_id)?;
                    ModalInput::full(stack)?
                }
                LayerKeep::Only(k) => {
                    let (h, x) = read_clip_layer(&path, k)?;
                    check_header(&h, m, &r.clip_id)?;
                    let mut input = ModalInput::sequence(x)?;
                    input.first_layer = k;
                    input
                }
            };
            modal[m.index()] = Some(input);
        }
        Ok(ClipInput {
            id: r.clip_id.clone(),
            modal,
        })
    }
}

fn check_header(h: &FeatureHeader, m: Modality, clip_id: &str) -> Result<()> {
    if h.modality != m {
        return Err(Error::Data(format!(
            "clip {clip_id}: file under {m} is tagged {}",
            h.modality
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKeep {
    All,
    /// 1-based layer index.
    Only(usize),
}

/// Which modalities and layers to bring into memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadPlan {
    pub modalities: ModalitySet,
    pub layers: [LayerKeep; 3],
}

impl LoadPlan {
    pub fn all(modalities: ModalitySet) -> Self {
        LoadPlan {
            modalities,
            layers: [LayerKeep::All; 3],
        }
    }

    /// Loads only what `cfg` reads: one layer for final/single aggregation,
    /// every layer for the weighted sum.
    pub fn for_model(cfg: &ModelConfig) -> Self {
        let layers = Modality::ALL.map(|m| match cfg.aggregation {
            Aggregation::FinalOutput => LayerKeep::Only(cfg.num_layers[m.index()]),
            Aggregation::SingleLayer(ks) => LayerKeep::Only(ks[m.index()]),
            Aggregation::WeightedSum => LayerKeep::All,
        });
        LoadPlan {
            modalities: cfg.modalities,
            layers,
        }
    }
}

/// One split held in memory, records and inputs in manifest order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ClipRecord>,
    pub inputs: Vec<ClipInput<f32>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.label).collect()
    }
}
