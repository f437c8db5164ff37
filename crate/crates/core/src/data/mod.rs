//! Feature archives, manifests, augmentation, batching and synthetic data.

mod archive;
mod batch;
mod format;
mod manifest;
mod masking;
mod synth;

pub use archive::{
    feature_path, Dataset, FeatureArchive, LayerKeep, LoadPlan, ModalityShape, FEATURE_EXT, MANIFEST_FILE,
};
pub use batch::{batch_iter, collate, stream_seed, Batch};
pub use format::{
    decode_clip_features, encode_clip_features, read_clip_features, read_clip_layer, read_header,
    write_clip_features, FeatureHeader, FEATURE_MAGIC, FEATURE_VERSION, HEADER_LEN,
};
pub use manifest::{load_manifest, write_manifest, ClipRecord, Manifest, Split, LABEL_MAX, LABEL_MIN};
pub use masking::{apply_blocks, apply_masking, draw_mask, MaskBlocks, MaskSpec};
pub use synth::{synth_generate, SynthSpec, CLIPS_PER_VIDEO};
