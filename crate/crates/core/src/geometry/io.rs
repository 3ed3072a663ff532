//! Wavefront OBJ (`v`/`f` records, 1-based) and per-vertex feature CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FeatureMatrix, TriangleMesh};
use crate::error::{Error, Result};

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(mesh.num_vertices() * 48 + mesh.num_faces() * 24);
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(line_no, "vertex needs 3 coordinates".into()));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        // `f 1/2/3 ...` forms carry texture/normal indices we ignore.
                        let head = t.split('/').next().unwrap_or(t);
                        match head.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(parse_err(line_no, format!("bad face index {t:?}"))),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(parse_err(
                        line_no,
                        format!("only triangles are supported, got {} indices", idx.len()),
                    ));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_features_csv(features: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..features.channels()).map(|c| format!("ch{c}")).collect();
    writeln!(out, "#{}", header.join(",")).unwrap();
    for r in 0..features.rows() {
        let row: Vec<String> = features.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a feature CSV: one row per vertex, an optional leading `#` header.
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut channels = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let width = *channels.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(parse_err(format!(
                "expected {width} columns, found {}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("not a number: {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    let channels = channels.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "feature file has no rows".into(),
    })?;
    FeatureMatrix::new(rows, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{icosphere, SubdivisionLevel};

    #[test]
    fn obj_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.obj");
        let mesh = icosphere(SubdivisionLevel::new(2).unwrap());
        write_obj(&mesh, &path).unwrap();
        assert_eq!(read_obj(&path).unwrap(), mesh);
    }

    #[test]
    fn obj_accepts_slash_indices_and_ignores_other_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.obj");
        fs::write(
            &path,
            "# tri\nv 0 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\nf 1/1/1 2//1 3\n",
        )
        .unwrap();
        let mesh = read_obj(&path).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_rejects_quads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert!(matches!(read_obj(&path), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let feats = FeatureMatrix::from_fn(5, 2, |r| vec![r as f64 * 0.1, 1.0 / 3.0]).unwrap();
        write_features_csv(&feats, &path).unwrap();
        assert_eq!(read_features_csv(&path).unwrap(), feats);
    }

    #[test]
    fn features_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "1,2\n3,4\n").unwrap();
        let f = read_features_csv(&path).unwrap();
        assert_eq!((f.rows(), f.channels()), (2, 2));
    }

    #[test]
    fn features_bad_value_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "#a,b\n1,2\n3,x\n").unwrap();
        match read_features_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
