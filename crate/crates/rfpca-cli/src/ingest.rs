//! Event records → Laplacian trajectory samples.
//!
//! Input rows are `timestamp,origin,destination` events over a fixed node
//! universe. Each day becomes one subject; each day is divided into
//! fixed-width bins; within a bin, events between two nodes (either
//! direction) are summed into an undirected weighted adjacency, and
//! `L = D − A` gives one graph Laplacian per bin. The shared grid places
//! each bin at its midpoint as a fraction of the day.
//!
//! Events naming nodes outside the universe are skipped and counted per
//! name; self-loop events and events outside an explicit date range are
//! skipped and counted too. Malformed rows are hard errors with line
//! context. Bins (and whole days) without events yield zero Laplacians.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use ndarray::Array2;

use rfpca::{GraphLaplacian, MetricSpace, ObjectTrajectorySample, Point, TimeGrid};

use crate::config::IngestSection;
use crate::error::{io_at, CliError, CliResult};

/// Timestamp format accepted in event files.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Guard against a typo'd year allocating an absurd panel.
const MAX_TOTAL_BINS: u64 = 1_000_000;

// ===== outcome =====

/// An ingested sample plus the bookkeeping the report wants.
#[derive(Debug)]
pub struct IngestOutcome {
    pub sample: ObjectTrajectorySample,
    /// Subject order: one calendar day per subject, contiguous.
    pub days: Vec<NaiveDate>,
    /// Event rows read (excluding the header).
    pub events_total: usize,
    /// Events that landed in a bin.
    pub events_used: usize,
    /// Skipped events per unknown node name (an event with two unknown
    /// endpoints counts under both names).
    pub unknown_nodes: BTreeMap<String, usize>,
    /// Events whose origin equals their destination.
    pub self_loops: usize,
    /// Events outside the explicit start/end dates.
    pub out_of_range: usize,
}

// ===== ingestion =====

/// Parses an events CSV and bins it into a Laplacian trajectory sample.
pub fn ingest_events(events_path: &Path, cfg: &IngestSection) -> CliResult<IngestOutcome> {
    if cfg.nodes.len() < 2 {
        return Err(CliError::Usage(
            "ingest needs a node universe: set `nodes` in the [ingest] section".to_string(),
        ));
    }
    let p = cfg.nodes.len();
    let node_index: HashMap<&str, usize> = cfg
        .nodes
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let bins_per_day = (24 * 60 / cfg.bin_minutes) as usize;
    let bin_seconds = u64::from(cfg.bin_minutes) * 60;

    let text = fs::read_to_string(events_path).map_err(io_at(events_path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "timestamp,origin,destination")) => {}
        other => {
            return Err(CliError::parse(
                events_path,
                1,
                format!(
                    "expected header \"timestamp,origin,destination\", got {:?}",
                    other.map(|(_, l)| l)
                ),
            ));
        }
    }

    // First pass: parse rows, resolve nodes, keep usable events.
    struct Event {
        day: NaiveDate,
        bin: usize,
        u: usize,
        v: usize,
    }
    let mut events: Vec<Event> = Vec::new();
    let mut events_total = 0;
    let mut unknown_nodes: BTreeMap<String, usize> = BTreeMap::new();
    let mut self_loops = 0;
    let mut data_min: Option<NaiveDate> = None;
    let mut data_max: Option<NaiveDate> = None;

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::parse(
                events_path,
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        events_total += 1;
        let stamp = NaiveDateTime::parse_from_str(fields[0].trim(), TIMESTAMP_FORMAT).map_err(
            |_| {
                CliError::parse(
                    events_path,
                    line_no,
                    format!(
                        "timestamp {:?} does not match {TIMESTAMP_FORMAT}",
                        fields[0]
                    ),
                )
            },
        )?;
        let origin = fields[1].trim();
        let destination = fields[2].trim();
        let u = node_index.get(origin).copied();
        let v = node_index.get(destination).copied();
        if u.is_none() || v.is_none() {
            if u.is_none() {
                *unknown_nodes.entry(origin.to_string()).or_insert(0) += 1;
            }
            if v.is_none() {
                *unknown_nodes.entry(destination.to_string()).or_insert(0) += 1;
            }
            continue;
        }
        let (u, v) = (u.expect("checked"), v.expect("checked"));
        if u == v {
            self_loops += 1;
            continue;
        }
        let day = stamp.date();
        data_min = Some(data_min.map_or(day, |d| d.min(day)));
        data_max = Some(data_max.map_or(day, |d| d.max(day)));
        let bin = (u64::from(stamp.time().num_seconds_from_midnight()) / bin_seconds) as usize;
        events.push(Event { day, bin, u, v });
    }

    // The panel covers the explicit range when given, otherwise the span of
    // the data; days inside it without events become zero trajectories.
    let start = match (cfg.start_date, data_min) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => {
            return Err(CliError::parse(
                events_path,
                1,
                "no usable events; set start-date and end-date to emit an empty panel",
            ));
        }
    };
    let end = match (cfg.end_date, data_max) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => start,
    };
    if start > end {
        return Err(CliError::Usage(format!(
            "resolved day range is empty: {start} to {end}"
        )));
    }
    let n_days = (end - start).num_days() as u64 + 1;
    if n_days * bins_per_day as u64 > MAX_TOTAL_BINS {
        return Err(CliError::Usage(format!(
            "{n_days} day(s) x {bins_per_day} bin(s) exceeds the {MAX_TOTAL_BINS}-bin limit; \
             narrow start-date/end-date"
        )));
    }
    let n_days = n_days as usize;

    // Second pass: accumulate symmetrized counts per (day, bin).
    let mut counts: Vec<Array2<f64>> = vec![Array2::zeros((p, p)); n_days * bins_per_day];
    let mut events_used = 0;
    let mut out_of_range = 0;
    for event in &events {
        if event.day < start || event.day > end {
            out_of_range += 1;
            continue;
        }
        let day_idx = (event.day - start).num_days() as usize;
        let adjacency = &mut counts[day_idx * bins_per_day + event.bin];
        adjacency[(event.u, event.v)] += 1.0;
        adjacency[(event.v, event.u)] += 1.0;
        events_used += 1;
    }

    let grid = TimeGrid::new(
        (0..bins_per_day)
            .map(|b| (b as f64 + 0.5) / bins_per_day as f64)
            .collect(),
    )?;
    let mut subjects = Vec::with_capacity(n_days);
    for day_idx in 0..n_days {
        let mut row = Vec::with_capacity(bins_per_day);
        for bin in 0..bins_per_day {
            let adjacency = &counts[day_idx * bins_per_day + bin];
            row.push(Point::Laplacian(GraphLaplacian::from_adjacency(adjacency)?));
        }
        subjects.push(row);
    }
    let sample =
        ObjectTrajectorySample::new(MetricSpace::Laplacian { nodes: p }, grid, subjects)?;
    let days = (0..n_days)
        .map(|d| start + chrono::Days::new(d as u64))
        .collect();

    Ok(IngestOutcome {
        sample,
        days,
        events_total,
        events_used,
        unknown_nodes,
        self_loops,
        out_of_range,
    })
}

// ===== tests =====

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn cfg(nodes: &[&str], bin_minutes: u32) -> IngestSection {
        IngestSection {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            bin_minutes,
            start_date: None,
            end_date: None,
        }
    }

    fn write_events(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rfpca-ingest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        fs::write(&path, format!("timestamp,origin,destination\n{body}")).unwrap();
        path
    }

    fn entry(sample: &ObjectTrajectorySample, subject: usize, k: usize, i: usize, j: usize) -> f64 {
        match &sample.subjects()[subject][k] {
            Point::Laplacian(l) => l.entries()[(i, j)],
            _ => unreachable!(),
        }
    }

    #[test]
    fn one_event_gives_unit_degrees_in_its_bin_only() {
        // 08:13 falls in bin 0 of two 12-hour bins.
        let path = write_events("one.csv", "2024-05-01T08:13:00,a,b\n");
        let out = ingest_events(&path, &cfg(&["a", "b", "c"], 720)).unwrap();
        assert_eq!(out.days.len(), 1);
        assert_eq!(out.events_used, 1);
        assert_eq!(out.sample.grid().points(), &[0.25, 0.75]);
        assert_eq!(entry(&out.sample, 0, 0, 0, 0), 1.0);
        assert_eq!(entry(&out.sample, 0, 0, 1, 1), 1.0);
        assert_eq!(entry(&out.sample, 0, 0, 0, 1), -1.0);
        assert_eq!(entry(&out.sample, 0, 0, 2, 2), 0.0);
        // The other bin stays a zero Laplacian.
        assert_eq!(entry(&out.sample, 0, 1, 0, 0), 0.0);
        assert_eq!(entry(&out.sample, 0, 1, 0, 1), 0.0);
    }

    #[test]
    fn directions_sum_into_one_undirected_count() {
        let path = write_events(
            "sym.csv",
            "2024-05-01T01:00:00,a,b\n2024-05-01T02:00:00,b,a\n",
        );
        let out = ingest_events(&path, &cfg(&["a", "b"], 720)).unwrap();
        assert_eq!(entry(&out.sample, 0, 0, 0, 1), -2.0);
        assert_eq!(entry(&out.sample, 0, 0, 0, 0), 2.0);
    }

    #[test]
    fn unknown_nodes_and_self_loops_are_skipped_with_counts() {
        let path = write_events(
            "skip.csv",
            "2024-05-01T01:00:00,a,zz\n\
             2024-05-01T02:00:00,zz,qq\n\
             2024-05-01T03:00:00,a,a\n\
             2024-05-01T04:00:00,a,b\n",
        );
        let out = ingest_events(&path, &cfg(&["a", "b"], 720)).unwrap();
        assert_eq!(out.events_total, 4);
        assert_eq!(out.events_used, 1);
        assert_eq!(out.unknown_nodes.get("zz"), Some(&2));
        assert_eq!(out.unknown_nodes.get("qq"), Some(&1));
        assert_eq!(out.self_loops, 1);
    }

    #[test]
    fn empty_file_with_explicit_range_yields_zero_panel() {
        let path = write_events("empty.csv", "");
        let mut section = cfg(&["a", "b"], 720);
        section.start_date = NaiveDate::from_ymd_opt(2024, 5, 1);
        section.end_date = NaiveDate::from_ymd_opt(2024, 5, 2);
        let out = ingest_events(&path, &section).unwrap();
        assert_eq!(out.days.len(), 2);
        for subject in 0..2 {
            for bin in 0..2 {
                assert_eq!(entry(&out.sample, subject, bin, 0, 0), 0.0);
            }
        }
    }

    #[test]
    fn empty_file_without_range_is_an_error() {
        let path = write_events("norange.csv", "");
        let err = ingest_events(&path, &cfg(&["a", "b"], 720)).unwrap_err();
        assert!(err.to_string().contains("no usable events"), "{err}");
    }

    #[test]
    fn day_gaps_become_zero_subjects_and_range_filters() {
        let path = write_events(
            "gaps.csv",
            "2024-05-01T01:00:00,a,b\n\
             2024-05-03T01:00:00,a,b\n\
             2024-04-20T01:00:00,a,b\n",
        );
        let mut section = cfg(&["a", "b"], 720);
        section.start_date = NaiveDate::from_ymd_opt(2024, 5, 1);
        let out = ingest_events(&path, &section).unwrap();
        assert_eq!(out.days.len(), 3);
        assert_eq!(out.out_of_range, 1);
        assert_eq!(entry(&out.sample, 0, 0, 0, 0), 1.0);
        assert_eq!(entry(&out.sample, 1, 0, 0, 0), 0.0);
        assert_eq!(entry(&out.sample, 2, 0, 0, 0), 1.0);
    }

    #[test]
    fn malformed_rows_are_hard_errors_with_line_context() {
        let path = write_events("bad.csv", "2024-05-01 01:00:00,a,b\n");
        let err = ingest_events(&path, &cfg(&["a", "b"], 720)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.csv:2"), "{msg}");
        assert!(msg.contains("timestamp"), "{msg}");

        let path = write_events("short.csv", "2024-05-01T01:00:00,a\n");
        let err = ingest_events(&path, &cfg(&["a", "b"], 720)).unwrap_err();
        assert!(err.to_string().contains("3 fields"), "{err}");
    }
}
