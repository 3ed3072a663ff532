//! Subject manifests: `subject_id,space,mesh_path,features_path,ga_weeks,split`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::binning::{assign_bin, BinningScheme};
use crate::error::{Error, Result};
use crate::geometry::{attach_features, read_features_csv, read_obj, TriangleMesh};

pub const MANIFEST_HEADER: [&str; 6] = [
    "subject_id",
    "space",
    "mesh_path",
    "features_path",
    "ga_weeks",
    "split",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Space {
    Native,
    Template,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Native => "native",
            Space::Template => "template",
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Space {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "native" => Ok(Space::Native),
            "template" => Ok(Space::Template),
            other => Err(format!(
                "unknown space {other:?} (expected native or template)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!(
                "unknown split {other:?} (expected train, validation or test)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub space: Space,
    /// Resolved against the manifest's directory.
    pub mesh_path: PathBuf,
    pub features_path: PathBuf,
    pub ga_weeks: f64,
    pub split: Split,
}

impl SubjectRecord {
    /// Reads the mesh and attaches its features.
    pub fn load_mesh(&self) -> Result<TriangleMesh> {
        let mesh = read_obj(&self.mesh_path)?;
        let features = read_features_csv(&self.features_path)?;
        attach_features(mesh, features).map_err(|e| Error::Format {
            path: self.features_path.clone(),
            message: format!("subject {} ({}): {e}", self.subject_id, self.space),
        })
    }

    /// Stable file-name stem for cached artifacts.
    pub fn key(&self) -> String {
        format!("{}_{}", self.subject_id, self.space)
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub records: Vec<SubjectRecord>,
    /// Non-fatal findings, already echoed to stderr as `WARN:` lines.
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> Vec<&SubjectRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn find(&self, subject_id: &str, space: Space) -> Option<&SubjectRecord> {
        self.records
            .iter()
            .find(|r| r.subject_id == subject_id && r.space == space)
    }
}

pub(crate) fn warn(message: &str) {
    eprintln!("WARN: {message}");
}

pub fn load_manifest(path: &Path, scheme: &BinningScheme) -> Result<Manifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec
            .map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected 6 columns, found {}", rec.len()),
            ));
        }
        let subject_id = rec[0].to_string();
        if subject_id.is_empty() {
            return Err(parse_err(line, "empty subject_id".into()));
        }
        let space: Space = rec[1].parse().map_err(|m| parse_err(line, m))?;
        if rec[2].is_empty() || rec[3].is_empty() {
            return Err(parse_err(line, "empty mesh or features path".into()));
        }
        let ga_weeks: f64 = rec[4]
            .parse()
            .map_err(|_| parse_err(line, format!("ga_weeks {:?} is not a number", &rec[4])))?;
        if !(ga_weeks.is_finite() && ga_weeks > 0.0) {
            return Err(parse_err(
                line,
                format!("ga_weeks {ga_weeks} must be finite and positive"),
            ));
        }
        let split: Split = rec[5].parse().map_err(|m| parse_err(line, m))?;
        if !seen.insert((subject_id.clone(), space)) {
            return Err(Error::DuplicateSubject {
                subject_id,
                space: space.to_string(),
            });
        }
        if assign_bin(ga_weeks, scheme).clamped {
            let (lo, hi) = scheme.range();
            let msg = format!(
                "{}:{line}: ga_weeks {ga_weeks} for {subject_id} ({space}) outside [{lo}, {hi}], clamped to edge bin",
                path.display()
            );
            warn(&msg);
            warnings.push(msg);
        }
        records.push(SubjectRecord {
            subject_id,
            space,
            mesh_path: base.join(&rec[2]),
            features_path: base.join(&rec[3]),
            ga_weeks,
            split,
        });
    }
    Ok(Manifest {
        path: path.to_path_buf(),
        records,
        warnings,
    })
}
