//! CSV, JSON and SVG artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;

use super::pipeline::BoundaryGrid;
use super::run::BenchReport;
use crate::error::{Error, Result};
use crate::states::DataPoint;
use crate::svm::{LabeledSet, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

/// Lossless float text (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: row {}: bad number '{f}'", path.display(), line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_dataset(path: &Path, set: &LabeledSet) -> Result<()> {
    let header = ["x1", "x2", "label"].map(String::from);
    let rows = set.points().iter().zip(set.labels()).map(|(p, y)| {
        let mut row: Vec<String> = p.coords.iter().map(|&c| fmt_float(c)).collect();
        row.push(y.to_string());
        row
    });
    write_rows(path, &header, rows)
}

pub fn read_dataset(path: &Path) -> Result<LabeledSet> {
    let (header, rows) = read_rows(path)?;
    if header.last().map(String::as_str) != Some("label") || header.len() < 2 {
        return Err(Error::Parse(format!("{}: expected columns x1,..,label", path.display())));
    }
    let mut points = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        let (label, coords) = row.split_last().expect("header has a label column");
        if coords.len() != header.len() - 1 {
            return Err(Error::Parse(format!("{}: ragged row", path.display())));
        }
        points.push(DataPoint::new(coords.to_vec()));
        labels.push(if *label > 0.0 { 1 } else { -1 });
        if label.abs() != 1.0 {
            return Err(Error::Parse(format!("{}: label {label} is not +1 or -1", path.display())));
        }
    }
    LabeledSet::new(points, labels)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("k{j}")).collect();
    let rows = (0..m.nrows()).map(|i| m.row(i).iter().map(|&v| fmt_float(v)).collect());
    write_rows(path, &header, rows)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let (header, rows) = read_rows(path)?;
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(Error::Parse(format!("{}: ragged matrix", path.display())));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), header.len(), rows.into_iter().flatten()))
}

pub fn write_grid(path: &Path, grid: &BoundaryGrid) -> Result<()> {
    let header = ["x1", "x2", "score"].map(String::from);
    let rows = (0..grid.len()).map(|k| {
        let (x1, x2) = grid.node(k % grid.side, k / grid.side);
        vec![fmt_float(x1), fmt_float(x2), fmt_float(grid.scores[k])]
    });
    write_rows(path, &header, rows)
}

pub fn read_grid(path: &Path) -> Result<BoundaryGrid> {
    let (_, rows) = read_rows(path)?;
    let side = (rows.len() as f64).sqrt().round() as usize;
    if side < 2 || side * side != rows.len() || rows.iter().any(|r| r.len() != 3) {
        return Err(Error::Parse(format!("{}: not a square x1,x2,score grid", path.display())));
    }
    Ok(BoundaryGrid {
        side,
        lo: rows[0][0],
        hi: rows[side - 1][0],
        scores: rows.iter().map(|r| r[2]).collect(),
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes the requested artifacts into `dir` and returns their paths.
pub fn emit_report(report: &BenchReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    if formats.contains(&Format::Csv) {
        write_dataset(&out("train.csv"), &report.data.train)?;
        write_dataset(&out("test.csv"), &report.data.test)?;
        write_matrix(&out("gram.csv"), report.gram.values())?;
        write_grid(&out("grid.csv"), &report.grid)?;
    }
    if formats.contains(&Format::Json) {
        write_json(&out("report.json"), &report.summary)?;
        write_json(&out("model.json"), &report.solution.model)?;
    }
    if formats.contains(&Format::Svg) {
        let p = out("boundary.svg");
        fs::write(&p, boundary_svg(&report.grid, &report.data.train, &report.data.test)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(written)
}

const SVG_SIZE: f64 = 480.0;

fn heat(score: f64, scale: f64) -> String {
    let t = (score / scale).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 { (60.0, 110.0, 200.0) } else { (210.0, 80.0, 70.0) };
    let w = t.abs() * 0.8;
    let mix = |c: f64| (255.0 + (c - 255.0) * w).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

/// Zero-level segments of the grid (marching squares, linear edge crossings).
pub fn zero_contour(grid: &BoundaryGrid) -> Vec<[(f64, f64); 2]> {
    let mut segments = Vec::new();
    let cross = |(xa, ya, fa): (f64, f64, f64), (xb, yb, fb): (f64, f64, f64)| {
        let t = fa / (fa - fb);
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    for iy in 0..grid.side - 1 {
        for ix in 0..grid.side - 1 {
            let corner = |dx: usize, dy: usize| {
                let (x, y) = grid.node(ix + dx, iy + dy);
                (x, y, grid.score(ix + dx, iy + dy))
            };
            let c = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            let mut hits = Vec::with_capacity(4);
            for k in 0..4 {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if (a.2 > 0.0) != (b.2 > 0.0) {
                    hits.push(cross(a, b));
                }
            }
            match hits.len() {
                2 => segments.push([hits[0], hits[1]]),
                4 => {
                    // saddle: pair edges according to the sign of the cell mean
                    let mean = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    if (mean > 0.0) == (c[0].2 > 0.0) {
                        segments.push([hits[0], hits[3]]);
                        segments.push([hits[1], hits[2]]);
                    } else {
                        segments.push([hits[0], hits[1]]);
                        segments.push([hits[2], hits[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Heat map of the decision function with its zero contour, training points as circles and
/// test points as triangles (filled for `+1`).
pub fn boundary_svg(grid: &BoundaryGrid, train: &LabeledSet, test: &LabeledSet) -> String {
    let span = grid.hi - grid.lo;
    let px = |x: f64| (x - grid.lo) / span * SVG_SIZE;
    let py = |y: f64| SVG_SIZE - (y - grid.lo) / span * SVG_SIZE;
    let cell = SVG_SIZE / (grid.side - 1) as f64;
    let scale = grid.scores.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    s.push_str("<g shape-rendering=\"crispEdges\">\n");
    for iy in 0..grid.side {
        for ix in 0..grid.side {
            let (x, y) = grid.node(ix, iy);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px(x) - cell / 2.0,
                py(y) - cell / 2.0,
                cell,
                cell,
                heat(grid.score(ix, iy), scale)
            );
        }
    }
    s.push_str("</g>\n<g stroke=\"#000\" stroke-width=\"2\" fill=\"none\">\n");
    for [(x0, y0), (x1, y1)] in zero_contour(grid) {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            px(x0),
            py(y0),
            px(x1),
            py(y1)
        );
    }
    s.push_str("</g>\n<g stroke=\"#222\" stroke-width=\"1.2\">\n");
    let fill = |y: i8| if y > 0 { "#3c6ec8" } else { "#d25046" };
    for (p, &y) in train.points().iter().zip(train.labels()) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}"/>"#,
            px(p.coords[0]),
            py(p.coords[1]),
            fill(y)
        );
    }
    for (p, &y) in test.points().iter().zip(test.labels()) {
        let (cx, cy) = (px(p.coords[0]), py(p.coords[1]));
        let _ = writeln!(
            s,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="{}" fill-opacity="0.35"/>"#,
            cx,
            cy - 6.0,
            cx - 5.2,
            cy + 3.0,
            cx + 5.2,
            cy + 3.0,
            fill(y)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::datasets::DatasetKind;
    use crate::bench::run::{run_benchmark, BenchSummary, BenchmarkConfig};

    #[test]
    fn artifacts_round_trip() {
        let report = run_benchmark(&BenchmarkConfig::new(DatasetKind::Moons, 2, "cosine:1")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, dir.path(), &Format::ALL).unwrap();
        assert_eq!(files.len(), 7);

        let summary = BenchSummary::load(&dir.path().join("report.json")).unwrap();
        assert_eq!(summary, report.summary);
        assert_eq!(read_model(&dir.path().join("model.json")).unwrap(), report.solution.model);
        assert_eq!(read_dataset(&dir.path().join("train.csv")).unwrap(), report.data.train);

        let gram = read_matrix(&dir.path().join("gram.csv")).unwrap();
        assert_eq!(&gram, report.gram.values());
        let text = fs::read_to_string(dir.path().join("gram.csv")).unwrap();
        assert_eq!(text.lines().count(), 41);
        assert!(text.lines().all(|l| l.split(',').count() == 40));

        assert_eq!(read_grid(&dir.path().join("grid.csv")).unwrap(), report.grid);

        let svg = fs::read_to_string(dir.path().join("boundary.svg")).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 40);
        assert!(doc.descendants().any(|n| n.has_tag_name("line")));
    }

    #[test]
    fn contour_of_a_plane() {
        let side = 5;
        let grid = BoundaryGrid {
            side,
            lo: -1.0,
            hi: 1.0,
            scores: (0..side * side).map(|k| (k % side) as f64 - 1.5).collect(),
        };
        let segs = zero_contour(&grid);
        assert_eq!(segs.len(), side - 1);
        for [(x0, _), (x1, _)] in segs {
            assert!((x0 + 0.25).abs() < 1e-12 && (x1 + 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = read_dataset(Path::new("/nonexistent/train.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/train.csv"), "{err}");
    }
}
