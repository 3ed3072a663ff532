//! Synthetic subjects whose label is readable from channel 0.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::manifest::{Space, Split, MANIFEST_HEADER};
use crate::error::{Error, Result};
use crate::geometry::{
    icosphere, write_features_csv, write_obj, FeatureMatrix, SubdivisionLevel, TriangleMesh,
};
use crate::rng::{stream_rng, Stream};

pub const SYNTH_GA_RANGE: (f64, f64) = (23.0, 44.0);
pub const SYNTH_CHANNELS: usize = 4;
const RIPPLE_AMPLITUDE: f64 = 0.1;
const RIPPLE_FREQUENCY: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub level: SubdivisionLevel,
    pub seed: u64,
}

/// Channel 0 is `(ga − 23) / 21` everywhere; channels 1–3 are small
/// sinusoids along x, y and z with per-subject phases.
pub fn synth_features(mesh: &TriangleMesh, ga_weeks: f64, phases: [f64; 3]) -> FeatureMatrix {
    let (lo, hi) = SYNTH_GA_RANGE;
    let level = (ga_weeks - lo) / (hi - lo);
    FeatureMatrix::from_fn(mesh.num_vertices(), SYNTH_CHANNELS, |r| {
        let p = mesh.vertices()[r];
        let mut row = vec![level];
        for k in 0..3 {
            row.push(RIPPLE_AMPLITUDE * (RIPPLE_FREQUENCY * p[k] + phases[k]).sin());
        }
        row
    })
    .expect("row width matches channel count")
}

/// Every fifth subject (index ≡ 4 mod 5) goes to validation; spaces
/// alternate native/template.
pub fn synth_split(index: usize) -> Split {
    if index % 5 == 4 {
        Split::Validation
    } else {
        Split::Train
    }
}

/// Writes `n` OBJ + feature CSV pairs and `manifest.csv` into `out_dir`.
/// Returns the manifest path.
pub fn synth_dataset(out_dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    if cfg.n_subjects < 2 {
        return Err(Error::Config(format!(
            "synthetic dataset needs at least 2 subjects, got {}",
            cfg.n_subjects
        )));
    }
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mesh = icosphere(cfg.level);
    let mut rng = stream_rng(cfg.seed, Stream::Synth, cfg.level.get() as u64, 0);
    let mut manifest = format!("{}\n", MANIFEST_HEADER.join(","));
    for i in 0..cfg.n_subjects {
        let raw: f64 = rng.gen_range(SYNTH_GA_RANGE.0..=SYNTH_GA_RANGE.1);
        let ga = (raw * 1e4).round() / 1e4;
        let phases = [0; 3].map(|_| rng.gen_range(0.0..std::f64::consts::TAU));
        let id = format!("sub-{i:03}");
        let space = if i % 2 == 0 {
            Space::Native
        } else {
            Space::Template
        };
        let obj = format!("{id}.obj");
        let csv = format!("{id}.csv");
        write_obj(&mesh, &out_dir.join(&obj))?;
        write_features_csv(&synth_features(&mesh, ga, phases), &out_dir.join(&csv))?;
        manifest.push_str(&format!(
            "{id},{space},{obj},{csv},{ga},{}\n",
            synth_split(i)
        ));
    }
    let path = out_dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}
