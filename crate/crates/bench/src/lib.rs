//! Fixtures shared by the benchmarks under `benches/`.

use mvga_core::geometry::{attach_features, icosphere};
use mvga_core::model::{EncoderConfig, ModelConfig};
use mvga_core::{FeatureMatrix, SubdivisionLevel, TriangleMesh, ViewStack};

/// Icosphere with four smooth feature channels.
pub fn featured_sphere(level: u32) -> TriangleMesh {
    let mesh = icosphere(SubdivisionLevel::new(level).expect("level within range"));
    let verts = mesh.vertices().to_vec();
    let feats = FeatureMatrix::from_fn(verts.len(), 4, |i| {
        let [x, y, z] = verts[i];
        vec![x, y * z, (3.0 * x).sin(), 0.5 + 0.25 * y]
    })
    .expect("finite features");
    attach_features(mesh, feats).expect("row count matches")
}

pub fn narrow_model() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            in_channels: 4,
            stage_channels: vec![8, 16, 32],
            internal_dropout_p: 0.0,
        },
        class_count: 5,
    }
}

/// Deterministic pseudo-random stack in [0, 1).
pub fn noise_stack(views: usize, channels: usize, size: usize) -> ViewStack {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let data = (0..views * channels * size * size)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 40) as f32 / (1u64 << 24) as f32
        })
        .collect();
    ViewStack::new(views, channels, size, data).expect("consistent shape")
}
