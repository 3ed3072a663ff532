//! Manifests, age binning, class weighting, augmentation and synthetic data.

mod augment;
mod binning;
mod manifest;
mod synth;

pub use augment::{augment, AugmentConfig};
pub use binning::{assign_bin, class_weights, BinAssignment, BinningScheme, ClassWeights};
pub(crate) use manifest::warn;
pub use manifest::{load_manifest, Manifest, Space, Split, SubjectRecord, MANIFEST_HEADER};
pub use synth::{
    synth_dataset, synth_features, synth_split, SynthConfig, SYNTH_CHANNELS, SYNTH_GA_RANGE,
};
