use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{assign_bin, BinningScheme, SubjectRecord};
use crate::error::{Error, Result};
use crate::render::{render_views, RenderConfig, ViewStack};

/// Where a subject's view stack comes from.
#[derive(Debug, Clone)]
pub enum StackSource {
    Loaded(ViewStack),
    /// Re-rendered from the mesh on every access.
    Render(RenderConfig),
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub record: SubjectRecord,
    pub class: usize,
    source: StackSource,
}

impl DatasetItem {
    pub fn stack(&self) -> Result<Cow<'_, ViewStack>> {
        match &self.source {
            StackSource::Loaded(s) => Ok(Cow::Borrowed(s)),
            StackSource::Render(cfg) => Ok(Cow::Owned(render_record(&self.record, cfg)?)),
        }
    }
}

/// A list of labelled subjects with their view stacks.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.record.ga_weeks).collect()
    }

    pub fn class_counts(&self, class_count: usize) -> Vec<usize> {
        let mut counts = vec![0; class_count];
        for item in &self.items {
            counts[item.class] += 1;
        }
        counts
    }

    /// Builds items from already rendered stacks.
    pub fn from_stacks(
        records: Vec<SubjectRecord>,
        stacks: Vec<ViewStack>,
        scheme: &BinningScheme,
    ) -> Self {
        let items = records
            .into_iter()
            .zip(stacks)
            .map(|(record, stack)| DatasetItem {
                class: assign_bin(record.ga_weeks, scheme).class,
                record,
                source: StackSource::Loaded(stack),
            })
            .collect();
        Self { items }
    }

    /// Renders every record once, reusing `.mvr` files under `cache_dir`
    /// when given. Without a cache directory, stacks are rendered on demand.
    pub fn prepare(
        records: &[&SubjectRecord],
        render: &RenderConfig,
        scheme: &BinningScheme,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        let items = records
            .par_iter()
            .map(|r| {
                let source = match cache_dir {
                    Some(dir) => StackSource::Loaded(cached_stack(r, render, dir)?),
                    None => {
                        // fail early on unreadable inputs
                        r.load_mesh()?;
                        StackSource::Render(*render)
                    }
                };
                Ok(DatasetItem {
                    record: (*r).clone(),
                    class: assign_bin(r.ga_weeks, scheme).class,
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items })
    }
}

pub fn render_record(record: &SubjectRecord, cfg: &RenderConfig) -> Result<ViewStack> {
    let mesh = record.load_mesh()?;
    render_views(&mesh, &cfg.rig()?)
}

/// Subdirectory name identifying a render configuration.
pub fn cache_subdir(cfg: &RenderConfig) -> PathBuf {
    PathBuf::from(format!(
        "r{}_fov{}_d{}",
        cfg.resolution, cfg.fov_y_deg, cfg.distance
    ))
}

fn cached_stack(record: &SubjectRecord, cfg: &RenderConfig, dir: &Path) -> Result<ViewStack> {
    let dir = dir.join(cache_subdir(cfg));
    let path = dir.join(format!("{}.mvr", record.key()));
    if path.exists() {
        if let Ok(stack) = ViewStack::read_mvr(&path) {
            return Ok(stack);
        }
    }
    let stack = render_record(record, cfg)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    stack.write_mvr(&path)?;
    Ok(stack)
}
