//! On-disk formats: trajectory CSVs with JSON sidecars, eigenfunction /
//! spectrum / score / contamination-curve CSVs, and the atomic writer they
//! all go through.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips any finite `f64` bit-for-bit, so serialize → parse is the
//! identity on every format. Fields are comma-separated and never quoted;
//! identifiers that would need quoting are rejected at validation time.
//! Files are written to a temporary sibling and renamed into place, so a
//! crash never leaves a half-written artifact under the final name.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use rfpca::{
    BreakdownCurves, CenterKind, CenterTrajectory, EigenSystem, FpcaMethod, GraphLaplacian,
    MetricSpace, ObjectTrajectorySample, Point, ScoreMatrix, SpherePoint, TimeGrid,
};

use crate::error::{io_at, CliError, CliResult};

/// Version tag stamped into every sidecar and report.
pub const FORMAT_VERSION: u32 = 1;

// ===== scalar formatting =====

/// 17-significant-digit scientific notation: round-trips every finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64_field(s: &str, what: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("{what} is not a number: {s:?}"))
}

fn parse_usize_field(s: &str, what: &str) -> Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("{what} is not a non-negative integer: {s:?}"))
}

// ===== atomic writing =====

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?
        .to_owned();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(io_at(&tmp))?;
    fs::rename(&tmp, path).map_err(io_at(path))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_at(path))
}

// ===== trajectory files =====

/// Sidecar JSON accompanying every trajectory CSV: the metric space, the
/// coordinate column count, the grid, and the format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub format_version: u32,
    pub space: MetricSpace,
    /// Coordinate columns per grid point (`coord_1..coord_m` in the CSV).
    pub coords: usize,
    pub grid: Vec<f64>,
    /// Present when the file holds a center trajectory rather than a sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_kind: Option<CenterKind>,
}

/// A center trajectory read back from disk, as loose parts.
#[derive(Debug, Clone)]
pub struct ParsedCenter {
    pub space: MetricSpace,
    pub grid: TimeGrid,
    pub points: Vec<Point>,
    pub kind: CenterKind,
}

/// The sidecar path of a trajectory CSV: the same name with `.json` appended.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Coordinate columns a point of `space` occupies: Laplacians store the
/// upper triangle including the diagonal, row-major.
pub fn point_width(space: &MetricSpace) -> usize {
    match space {
        MetricSpace::Laplacian { nodes } => nodes * (nodes + 1) / 2,
        MetricSpace::Sphere => 3,
        MetricSpace::Euclidean { dim } => *dim,
    }
}

fn push_point_fields(space: &MetricSpace, point: &Point, line: &mut String) {
    match (space, point) {
        (MetricSpace::Laplacian { nodes }, Point::Laplacian(l)) => {
            let entries = l.entries();
            for u in 0..*nodes {
                for v in u..*nodes {
                    line.push(',');
                    line.push_str(&fmt_f64(entries[(u, v)]));
                }
            }
        }
        (MetricSpace::Sphere, Point::Sphere(p)) => {
            for c in p.coords() {
                line.push(',');
                line.push_str(&fmt_f64(*c));
            }
        }
        (MetricSpace::Euclidean { .. }, Point::Euclidean(v)) => {
            for c in v.iter() {
                line.push(',');
                line.push_str(&fmt_f64(*c));
            }
        }
        _ => unreachable!("points are validated against their space on construction"),
    }
}

fn decode_point(space: &MetricSpace, coords: &[f64]) -> Result<Point, String> {
    match space {
        MetricSpace::Laplacian { nodes } => {
            let p = *nodes;
            let mut entries = Array2::zeros((p, p));
            let mut next = 0;
            for u in 0..p {
                for v in u..p {
                    entries[(u, v)] = coords[next];
                    entries[(v, u)] = coords[next];
                    next += 1;
                }
            }
            GraphLaplacian::new(entries)
                .map(Point::Laplacian)
                .map_err(|e| e.to_string())
        }
        MetricSpace::Sphere => SpherePoint::new([coords[0], coords[1], coords[2]])
            .map(Point::Sphere)
            .map_err(|e| e.to_string()),
        MetricSpace::Euclidean { .. } => Ok(Point::Euclidean(Array1::from(coords.to_vec()))),
    }
}

fn trajectory_header(m: usize) -> String {
    let mut header = String::from("subject,time");
    for k in 1..=m {
        header.push_str(&format!(",coord_{k}"));
    }
    header
}

fn render_rows(
    space: &MetricSpace,
    grid: &TimeGrid,
    rows: &[(usize, &[Point])],
    m: usize,
) -> String {
    let mut out = trajectory_header(m);
    out.push('\n');
    for (subject, points) in rows {
        for (k, t) in grid.points().iter().enumerate() {
            let mut line = format!("{subject},{}", fmt_f64(*t));
            push_point_fields(space, &points[k], &mut line);
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn write_trajectory_file(
    path: &Path,
    space: &MetricSpace,
    grid: &TimeGrid,
    rows: &[(usize, &[Point])],
    center_kind: Option<CenterKind>,
) -> CliResult<()> {
    let m = point_width(space);
    let meta = TrajectoryMeta {
        format_version: FORMAT_VERSION,
        space: *space,
        coords: m,
        grid: grid.points().to_vec(),
        center_kind,
    };
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serialization is infallible");
    write_atomic(path, render_rows(space, grid, rows, m).as_bytes())?;
    write_atomic(&sidecar_path(path), format!("{json}\n").as_bytes())
}

/// Writes a sample as long-form CSV plus its JSON sidecar.
pub fn write_trajectory_sample(path: &Path, sample: &ObjectTrajectorySample) -> CliResult<()> {
    let rows: Vec<(usize, &[Point])> = sample
        .subjects()
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row.as_slice()))
        .collect();
    write_trajectory_file(path, sample.space(), sample.grid(), &rows, None)
}

/// Writes a center trajectory in the same format, as subject 0.
pub fn write_center_trajectory(path: &Path, center: &CenterTrajectory) -> CliResult<()> {
    write_trajectory_file(
        path,
        center.space(),
        center.grid(),
        &[(0, center.centers())],
        Some(center.kind()),
    )
}

fn read_rows(path: &Path) -> CliResult<(TrajectoryMeta, TimeGrid, Vec<Vec<Point>>)> {
    let side = sidecar_path(path);
    let meta: TrajectoryMeta = serde_json::from_str(&read_file(&side)?)
        .map_err(|e| CliError::parse(&side, e.line(), e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(CliError::parse(
            &side,
            1,
            format!(
                "unsupported format version {} (this build reads {FORMAT_VERSION})",
                meta.format_version
            ),
        ));
    }
    let m = point_width(&meta.space);
    if meta.coords != m {
        return Err(CliError::parse(
            &side,
            1,
            format!(
                "coords = {} does not match the space ({} expects {m})",
                meta.coords,
                space_label(&meta.space),
            ),
        ));
    }
    let grid = TimeGrid::new(meta.grid.clone())?;

    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let expected_header = trajectory_header(m);
    match lines.next() {
        Some((_, header)) if header == expected_header => {}
        Some((_, header)) => {
            return Err(CliError::parse(
                path,
                1,
                format!("header {header:?} does not match {expected_header:?}"),
            ));
        }
        None => return Err(CliError::parse(path, 1, "empty file")),
    }

    let t_len = grid.len();
    let mut subjects: Vec<Vec<Point>> = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m + 2 {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected {} fields, got {}", m + 2, fields.len()),
            ));
        }
        let subject = parse_usize_field(fields[0], "subject")
            .map_err(|r| CliError::parse(path, line_no, r))?;
        let time =
            parse_f64_field(fields[1], "time").map_err(|r| CliError::parse(path, line_no, r))?;

        // Rows must arrive grouped by subject, subjects numbered 0..n in
        // order, each block walking the sidecar grid start to finish.
        if current.len() == t_len {
            subjects.push(std::mem::take(&mut current));
        }
        let (expect_subject, expect_k) = (subjects.len(), current.len());
        if subject != expect_subject {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected subject {expect_subject}, got {subject}"),
            ));
        }
        let expect_time = grid.points()[expect_k];
        if time != expect_time {
            return Err(CliError::parse(
                path,
                line_no,
                format!(
                    "expected grid point {} at position {expect_k}, got {}",
                    fmt_f64(expect_time),
                    fmt_f64(time)
                ),
            ));
        }
        let mut coords = Vec::with_capacity(m);
        for (c, field) in fields[2..].iter().enumerate() {
            coords.push(
                parse_f64_field(field, &format!("coord_{}", c + 1))
                    .map_err(|r| CliError::parse(path, line_no, r))?,
            );
        }
        current.push(
            decode_point(&meta.space, &coords).map_err(|r| CliError::parse(path, line_no, r))?,
        );
    }
    if current.len() == t_len {
        subjects.push(current);
    } else if !current.is_empty() {
        return Err(CliError::parse(
            path,
            text.lines().count(),
            format!(
                "last subject covers {} of {t_len} grid points",
                current.len()
            ),
        ));
    }
    Ok((meta, grid, subjects))
}

/// Parses a sample CSV (+ sidecar), re-validating every point.
pub fn read_trajectory_sample(path: &Path) -> CliResult<ObjectTrajectorySample> {
    let (meta, grid, subjects) = read_rows(path)?;
    Ok(ObjectTrajectorySample::new(meta.space, grid, subjects)?)
}

/// Parses a center-trajectory CSV (+ sidecar).
pub fn read_center_trajectory(path: &Path) -> CliResult<ParsedCenter> {
    let (meta, grid, mut subjects) = read_rows(path)?;
    let kind = meta.center_kind.ok_or_else(|| {
        CliError::parse(
            sidecar_path(path),
            1,
            "missing center_kind: not a center-trajectory file",
        )
    })?;
    if subjects.len() != 1 {
        return Err(CliError::parse(
            path,
            1,
            format!("a center file holds 1 trajectory, found {}", subjects.len()),
        ));
    }
    Ok(ParsedCenter {
        space: meta.space,
        grid,
        points: subjects.pop().expect("checked length"),
        kind,
    })
}

// ===== method names =====

/// Kebab-case name of a method, as used in CSVs, configs, and flags.
pub fn method_name(method: FpcaMethod) -> &'static str {
    match method {
        FpcaMethod::Wpu => "wpu",
        FpcaMethod::SpatialSign => "spatial-sign",
        FpcaMethod::Classical => "classical",
        FpcaMethod::Dm => "dm",
    }
}

/// Inverse of [`method_name`].
pub fn method_from_str(s: &str) -> Result<FpcaMethod, String> {
    match s {
        "wpu" => Ok(FpcaMethod::Wpu),
        "spatial-sign" => Ok(FpcaMethod::SpatialSign),
        "classical" => Ok(FpcaMethod::Classical),
        "dm" => Ok(FpcaMethod::Dm),
        other => Err(format!(
            "unknown method {other:?} (expected wpu, spatial-sign, classical, or dm)"
        )),
    }
}

// ===== eigenfunction CSV =====

/// Writes `time,phi_1..phi_J` rows over the grid.
pub fn write_eigenfunctions(path: &Path, es: &EigenSystem) -> CliResult<()> {
    let j_len = es.len();
    let mut out = String::from("time");
    for j in 1..=j_len {
        out.push_str(&format!(",phi_{j}"));
    }
    out.push('\n');
    let phi = es.eigenfunctions();
    for (k, t) in es.grid().points().iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for j in 0..j_len {
            out.push(',');
            out.push_str(&fmt_f64(phi[(j, k)]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Parses an eigenfunction CSV into the grid points and a T x J value matrix.
pub fn read_eigenfunctions(path: &Path) -> CliResult<(Vec<f64>, Array2<f64>)> {
    let (header, rows) = read_numeric_csv(path)?;
    let j_len = header.len().saturating_sub(1);
    if header.first().map(String::as_str) != Some("time")
        || !header[1..]
            .iter()
            .enumerate()
            .all(|(j, name)| name == &format!("phi_{}", j + 1))
    {
        return Err(CliError::parse(
            path,
            1,
            format!("header {header:?} is not time,phi_1..phi_{j_len}"),
        ));
    }
    let t_len = rows.len();
    let mut time = Vec::with_capacity(t_len);
    let mut values = Array2::zeros((t_len, j_len));
    for (k, row) in rows.into_iter().enumerate() {
        time.push(row[0]);
        for j in 0..j_len {
            values[(k, j)] = row[j + 1];
        }
    }
    Ok((time, values))
}

// ===== spectrum CSV =====

/// One row of a spectrum CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    /// 1-based component index.
    pub j: usize,
    pub lambda: f64,
    pub explained: f64,
    pub gap: f64,
}

/// Writes `j,lambda,explained,gap` rows, one per component.
pub fn write_spectrum(path: &Path, es: &EigenSystem) -> CliResult<()> {
    let mut out = String::from("j,lambda,explained,gap\n");
    for j in 0..es.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            j + 1,
            fmt_f64(es.eigenvalues()[j]),
            fmt_f64(es.explained()[j]),
            fmt_f64(es.gaps()[j]),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Parses a spectrum CSV.
pub fn read_spectrum(path: &Path) -> CliResult<Vec<SpectrumRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "j,lambda,explained,gap")) => {}
        other => {
            return Err(CliError::parse(
                path,
                1,
                format!("bad spectrum header: {:?}", other.map(|(_, l)| l)),
            ));
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let parse = |i: usize, what: &str| {
            parse_f64_field(fields[i], what).map_err(|r| CliError::parse(path, line_no, r))
        };
        rows.push(SpectrumRow {
            j: parse_usize_field(fields[0], "j").map_err(|r| CliError::parse(path, line_no, r))?,
            lambda: parse(1, "lambda")?,
            explained: parse(2, "explained")?,
            gap: parse(3, "gap")?,
        });
    }
    Ok(rows)
}

// ===== score CSV =====

/// Writes `subject,score_1..score_J` rows, one per subject.
pub fn write_scores(path: &Path, scores: &ScoreMatrix) -> CliResult<()> {
    let values = scores.values();
    let mut out = String::from("subject");
    for j in 1..=values.ncols() {
        out.push_str(&format!(",score_{j}"));
    }
    out.push('\n');
    for i in 0..values.nrows() {
        out.push_str(&i.to_string());
        for j in 0..values.ncols() {
            out.push(',');
            out.push_str(&fmt_f64(values[(i, j)]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Parses a score CSV into an n x J matrix.
pub fn read_scores(path: &Path) -> CliResult<Array2<f64>> {
    let (header, rows) = read_numeric_csv(path)?;
    let j_len = header.len().saturating_sub(1);
    if header.first().map(String::as_str) != Some("subject")
        || !header[1..]
            .iter()
            .enumerate()
            .all(|(j, name)| name == &format!("score_{}", j + 1))
    {
        return Err(CliError::parse(
            path,
            1,
            format!("header {header:?} is not subject,score_1..score_{j_len}"),
        ));
    }
    let mut values = Array2::zeros((rows.len(), j_len));
    for (i, row) in rows.into_iter().enumerate() {
        if row[0] != i as f64 {
            return Err(CliError::parse(
                path,
                i + 2,
                format!("expected subject {i}, got {}", row[0]),
            ));
        }
        for j in 0..j_len {
            values[(i, j)] = row[j + 1];
        }
    }
    Ok(values)
}

// ===== contamination-curve CSV =====

/// One row of a contamination-curve CSV. `mea`/`mise` are NaN and `reps` is 0
/// when every replication at that level failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub method: FpcaMethod,
    pub level: f64,
    pub mea: f64,
    pub mise: f64,
    pub reps: usize,
}

/// Writes `method,level,mea,mise,reps` rows, methods outermost.
pub fn write_curves(path: &Path, curves: &BreakdownCurves) -> CliResult<()> {
    let mut out = String::from("method,level,mea,mise,reps\n");
    for curve in &curves.curves {
        for (i, level) in curves.levels.iter().enumerate() {
            let (mea, mise, reps) = match &curve.metrics[i] {
                Some(m) => (m.mea, m.mise, m.reps),
                None => (f64::NAN, f64::NAN, 0),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                method_name(curve.method),
                fmt_f64(*level),
                fmt_f64(mea),
                fmt_f64(mise),
                reps,
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Parses a contamination-curve CSV.
pub fn read_curves(path: &Path) -> CliResult<Vec<CurveRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "method,level,mea,mise,reps")) => {}
        other => {
            return Err(CliError::parse(
                path,
                1,
                format!("bad curve header: {:?}", other.map(|(_, l)| l)),
            ));
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let parse = |i: usize, what: &str| {
            parse_f64_field(fields[i], what).map_err(|r| CliError::parse(path, line_no, r))
        };
        rows.push(CurveRow {
            method: method_from_str(fields[0]).map_err(|r| CliError::parse(path, line_no, r))?,
            level: parse(1, "level")?,
            mea: parse(2, "mea")?,
            mise: parse(3, "mise")?,
            reps: parse_usize_field(fields[4], "reps")
                .map_err(|r| CliError::parse(path, line_no, r))?,
        });
    }
    Ok(rows)
}

// ===== shared numeric-CSV reader =====

/// Reads a header line plus all-numeric rows of equal width.
fn read_numeric_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, line)) if !line.is_empty() => line.split(',').map(str::to_string).collect(),
        _ => return Err(CliError::parse(path, 1, "missing header")),
    };
    let width = header.len();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected {width} fields, got {}", fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(width);
        for (c, field) in fields.iter().enumerate() {
            row.push(
                parse_f64_field(field, &header[c])
                    .map_err(|r| CliError::parse(path, line_no, r))?,
            );
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn space_label(space: &MetricSpace) -> String {
    match space {
        MetricSpace::Laplacian { nodes } => format!("laplacian on {nodes} nodes"),
        MetricSpace::Sphere => "sphere".to_string(),
        MetricSpace::Euclidean { dim } => format!("euclidean dim {dim}"),
    }
}

// ===== tests =====
