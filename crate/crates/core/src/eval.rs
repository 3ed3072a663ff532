//! Prediction files and error reports: MAE and STDEV of absolute errors,
//! overall, per space and per GA bin.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{assign_bin, BinningScheme, Manifest, Space, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::{predict, Checkpoint};
use crate::render::RenderConfig;
use crate::train::render_record;

pub const PREDICTIONS_HEADER: &str = "subject_id,space,ga_pred";

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub subject_id: String,
    pub space: Space,
    pub ga_pred: f64,
}

pub fn predictions_to_csv(preds: &[Prediction]) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for p in preds {
        let _ = writeln!(out, "{},{},{}", p.subject_id, p.space, p.ga_pred);
    }
    out
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    fs::write(path, predictions_to_csv(preds))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != PREDICTIONS_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{PREDICTIONS_HEADER}`"),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        let space = row[1].parse().map_err(|e: String| parse_err(line, e))?;
        let ga_pred: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad ga_pred `{}`", &row[2])))?;
        if !ga_pred.is_finite() {
            return Err(parse_err(line, "ga_pred is not finite".into()));
        }
        out.push(Prediction {
            subject_id: row[0].to_string(),
            space,
            ga_pred,
        });
    }
    Ok(out)
}

/// Render settings recorded in a training checkpoint.
pub fn checkpoint_render_config(ck: &Checkpoint) -> Result<RenderConfig> {
    Ok(RenderConfig {
        resolution: ck.parse("render_resolution")?,
        fov_y_deg: ck.parse("render_fov_y_deg")?,
        distance: ck.parse("render_distance")?,
    })
}

/// Eval-mode predictions in record order. Records are rendered with the
/// checkpoint's render settings.
pub fn predict_records(ck: &Checkpoint, records: &[&SubjectRecord]) -> Result<Vec<Prediction>> {
    let model = ck.model_config()?;
    let render = checkpoint_render_config(ck)?;
    records
        .par_iter()
        .map(|r| {
            let stack = render_record(r, &render)?;
            if stack.channels() != model.encoder.in_channels {
                return Err(Error::Shape(format!(
                    "checkpoint expects {} input channels but subject {} ({}) has {}",
                    model.encoder.in_channels,
                    r.subject_id,
                    r.space,
                    stack.channels()
                )));
            }
            Ok(Prediction {
                subject_id: r.subject_id.clone(),
                space: r.space,
                ga_pred: predict(&ck.params, &model, &stack)?.ga_pred,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub subject_id: String,
    pub space: Space,
    pub ga_true: f64,
    pub ga_pred: f64,
    pub abs_error: f64,
    pub class: usize,
}

impl EvalRow {
    pub fn signed_error(&self) -> f64 {
        self.ga_pred - self.ga_true
    }
}

/// Count, mean and sample standard deviation (N − 1) of absolute errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub mae: f64,
    pub stdev: f64,
}

impl ErrorSummary {
    /// Empty input gives NaN statistics; a single value has STDEV 0.
    pub fn from_abs_errors(errors: &[f64]) -> Self {
        let n = errors.len();
        let mae = errors.iter().sum::<f64>() / n as f64;
        let stdev = match n {
            0 => f64::NAN,
            1 => 0.0,
            _ => (errors.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt(),
        };
        Self {
            count: n,
            mae,
            stdev,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub overall: ErrorSummary,
    /// Spaces in `native`, `template` order, only those present.
    pub per_space: Vec<(Space, ErrorSummary)>,
    /// One entry per bin, including empty ones.
    pub per_bin: Vec<ErrorSummary>,
    pub bin_edges: Vec<f64>,
}

/// Joins predictions to manifest labels. Every unmatched row is listed in
/// the error.
pub fn evaluate(
    preds: &[Prediction],
    manifest: &Manifest,
    scheme: &BinningScheme,
) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(preds.len());
    let mut missing = Vec::new();
    for p in preds {
        match manifest.find(&p.subject_id, p.space) {
            Some(r) => rows.push(EvalRow {
                subject_id: p.subject_id.clone(),
                space: p.space,
                ga_true: r.ga_weeks,
                ga_pred: p.ga_pred,
                abs_error: (p.ga_pred - r.ga_weeks).abs(),
                class: assign_bin(r.ga_weeks, scheme).class,
            }),
            None => missing.push(format!("{}/{}", p.subject_id, p.space)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnmatchedPredictions(missing));
    }
    if rows.is_empty() {
        return Err(Error::Config("no predictions to evaluate".into()));
    }
    Ok(report_from_rows(rows, scheme))
}

pub fn report_from_rows(rows: Vec<EvalRow>, scheme: &BinningScheme) -> EvalReport {
    let errors = |f: &dyn Fn(&EvalRow) -> bool| -> Vec<f64> {
        rows.iter().filter(|r| f(r)).map(|r| r.abs_error).collect()
    };
    let overall = ErrorSummary::from_abs_errors(&errors(&|_| true));
    let per_space = [Space::Native, Space::Template]
        .into_iter()
        .filter_map(|s| {
            let e = errors(&|r| r.space == s);
            (!e.is_empty()).then(|| (s, ErrorSummary::from_abs_errors(&e)))
        })
        .collect();
    let per_bin = (0..scheme.class_count())
        .map(|c| ErrorSummary::from_abs_errors(&errors(&|r| r.class == c)))
        .collect();
    EvalReport {
        overall,
        per_space,
        per_bin,
        bin_edges: scheme.edges().to_vec(),
        rows,
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

impl EvalReport {
    pub fn report_csv(&self) -> String {
        let mut out = String::from("subject_id,space,ga_true,ga_pred,abs_error,bin\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.subject_id, r.space, r.ga_true, r.ga_pred, r.abs_error, r.class
            );
        }
        out
    }

    /// Rows `all`, one per present space, then `bin{k}` for every bin.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("group,count,mae,stdev\n");
        let mut row = |name: &str, s: &ErrorSummary| {
            let _ = writeln!(
                out,
                "{name},{},{},{}",
                s.count,
                fmt_stat(s.mae),
                fmt_stat(s.stdev)
            );
        };
        row("all", &self.overall);
        for (space, s) in &self.per_space {
            row(space.as_str(), s);
        }
        for (k, s) in self.per_bin.iter().enumerate() {
            row(&format!("bin{k}"), s);
        }
        out
    }

    /// One row per subject, keyed by bin, for error-distribution plots.
    pub fn bins_csv(&self) -> String {
        let mut out = String::from("bin,bin_lo,bin_hi,subject_id,space,error,abs_error\n");
        let mut rows: Vec<&EvalRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.class);
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.class,
                self.bin_edges[r.class],
                self.bin_edges[r.class + 1],
                r.subject_id,
                r.space,
                r.signed_error(),
                r.abs_error
            );
        }
        out
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("subject_id,space,ga_true,ga_pred\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.subject_id, r.space, r.ga_true, r.ga_pred
            );
        }
        out
    }

    /// Writes `report.csv`, `summary.csv`, `bins.csv`, `scatter.csv` and,
    /// with `svg`, `scatter.svg` and `bins.svg`.
    pub fn write_all(&self, out_dir: &Path, svg: bool) -> Result<()> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
        let mut files = vec![
            ("report.csv", self.report_csv()),
            ("summary.csv", self.summary_csv()),
            ("bins.csv", self.bins_csv()),
            ("scatter.csv", self.scatter_csv()),
        ];
        if svg {
            files.push(("scatter.svg", self.scatter_svg()));
            files.push(("bins.svg", self.bins_svg()));
        }
        for (name, text) in files {
            let path = out_dir.join(name);
            fs::write(&path, text)
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    }

    pub fn scatter_svg(&self) -> String {
        let (lo, hi) = (self.bin_edges[0], self.bin_edges[self.bin_edges.len() - 1]);
        let (lo, hi) = self.rows.iter().fold((lo, hi), |(a, b), r| {
            (
                a.min(r.ga_true).min(r.ga_pred),
                b.max(r.ga_true).max(r.ga_pred),
            )
        });
        let plot = Plot::new(lo, hi);
        let mut body = plot.frame("true GA (weeks)", "predicted GA (weeks)");
        let _ = writeln!(
            body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4"/>"#,
            plot.x(lo),
            plot.y(lo),
            plot.x(hi),
            plot.y(hi)
        );
        for r in &self.rows {
            let color = match r.space {
                Space::Native => "steelblue",
                Space::Template => "darkorange",
            };
            let _ = writeln!(
                body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                plot.x(r.ga_true),
                plot.y(r.ga_pred)
            );
        }
        plot.finish(body)
    }

    /// Box summary (min, quartiles, max) of absolute error per bin.
    pub fn bins_svg(&self) -> String {
        let k = self.per_bin.len();
        let max_err = self
            .rows
            .iter()
            .map(|r| r.abs_error)
            .fold(0.0f64, f64::max)
            .max(1e-9);
        let plot = Plot::new(0.0, max_err);
        let mut body = plot.frame("GA bin", "absolute error (weeks)");
        let slot = (Plot::SIZE - 2.0 * Plot::MARGIN) / k as f64;
        for c in 0..k {
            let mut e: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| r.class == c)
                .map(|r| r.abs_error)
                .collect();
            let cx = Plot::MARGIN + slot * (c as f64 + 0.5);
            let _ = writeln!(
                body,
                r#"<text x="{cx:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}-{}</text>"#,
                Plot::SIZE - Plot::MARGIN + 14.0,
                self.bin_edges[c],
                self.bin_edges[c + 1]
            );
            if e.is_empty() {
                continue;
            }
            e.sort_by(f64::total_cmp);
            let q = |p: f64| quantile(&e, p);
            let (w, half) = (slot * 0.5, slot * 0.25);
            let _ = writeln!(
                body,
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                plot.y(q(0.0)),
                plot.y(q(1.0))
            );
            let _ = writeln!(
                body,
                r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="lightsteelblue" stroke="black"/>"#,
                cx - half,
                plot.y(q(0.75)),
                (plot.y(q(0.25)) - plot.y(q(0.75))).max(0.5)
            );
            let _ = writeln!(
                body,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                cx - half,
                plot.y(q(0.5)),
                cx + half,
                plot.y(q(0.5))
            );
        }
        plot.finish(body)
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

struct Plot {
    lo: f64,
    hi: f64,
}

impl Plot {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 40.0;

    fn new(lo: f64, hi: f64) -> Self {
        let pad = ((hi - lo) * 0.05).max(1e-9);
        Self {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn scale(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo) * (Self::SIZE - 2.0 * Self::MARGIN)
    }

    fn x(&self, v: f64) -> f64 {
        Self::MARGIN + self.scale(v)
    }

    fn y(&self, v: f64) -> f64 {
        Self::SIZE - Self::MARGIN - self.scale(v)
    }

    fn frame(&self, xlabel: &str, ylabel: &str) -> String {
        let (m, s) = (Self::MARGIN, Self::SIZE);
        format!(
            concat!(
                r#"<rect x="{m}" y="{m}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
                "\n",
                r#"<text x="{cx}" y="{b}" font-size="12" text-anchor="middle">{xlabel}</text>"#,
                "\n",
                r#"<text x="12" y="{cx}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {cx})">{ylabel}</text>"#,
                "\n",
                r#"<text x="{m}" y="{lo_y}" font-size="10">{lo:.1}</text>"#,
                "\n",
                r#"<text x="{m}" y="{hi_y}" font-size="10">{hi:.1}</text>"#,
                "\n"
            ),
            m = m,
            w = s - 2.0 * m,
            cx = s / 2.0,
            b = s - 6.0,
            xlabel = xlabel,
            ylabel = ylabel,
            lo_y = s - m - 2.0,
            hi_y = m + 10.0,
            lo = self.lo,
            hi = self.hi,
        )
    }

    fn finish(&self, body: String) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            s = Self::SIZE
        )
    }
}
