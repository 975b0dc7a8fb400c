//! Parsing, validation, filtering and time-slicing of raw trajectories.
//!
//! Input is delimited text with a header row; the canonical on-disk dataset
//! is line-delimited JSON, one document per trajectory.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Crs, Point2};

/// One positioned sample of a moving object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    /// Seconds since epoch.
    pub t: f64,
}

impl TrajectoryPoint {
    pub fn pos(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite() && self.t >= 0.0
    }
}

/// Time-ordered point sequence of one moving object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub points: Vec<TrajectoryPoint>,
}

/// The canonical in-memory dataset: all retained trajectories plus the
/// analysis window they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub crs: Crs,
    pub day_start: f64,
    pub day_end: f64,
}

impl Dataset {
    pub fn empty(crs: Crs) -> Self {
        Dataset {
            trajectories: Vec::new(),
            crs,
            day_start: 0.0,
            day_end: 0.0,
        }
    }

    /// Checks every documented invariant; used by tests and by the CLI
    /// before running later stages.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for traj in &self.trajectories {
            if !seen.insert(traj.id.as_str()) {
                return Err(Error::Invariant(format!("duplicate trajectory id {:?}", traj.id)));
            }
            if traj.points.len() < 2 {
                return Err(Error::Invariant(format!(
                    "trajectory {:?} has {} points, need at least 2",
                    traj.id,
                    traj.points.len()
                )));
            }
            for w in traj.points.windows(2) {
                if w[1].t < w[0].t {
                    return Err(Error::Invariant(format!(
                        "trajectory {:?} timestamps decrease",
                        traj.id
                    )));
                }
            }
            for p in &traj.points {
                if !p.is_valid() {
                    return Err(Error::Invariant(format!(
                        "trajectory {:?} has a non-finite or negative-time point",
                        traj.id
                    )));
                }
                if p.t < self.day_start || p.t > self.day_end {
                    return Err(Error::Invariant(format!(
                        "trajectory {:?} has a point outside [day_start, day_end]",
                        traj.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Column names mapping the delimited input onto (id, x, y, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub traj_id: String,
    pub x: String,
    pub y: String,
    pub t: String,
    /// Field delimiter as a single byte; comma by default.
    pub delimiter: u8,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            traj_id: "traj_id".into(),
            x: "x".into(),
            y: "y".into(),
            t: "t".into(),
            delimiter: b',',
        }
    }
}

/// Options for [`parse_trajectories`].
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub schema: ColumnSchema,
    pub crs: Crs,
    /// Optional fixed analysis window; rows outside it are skipped and
    /// counted. When absent the window is the data's [min t, max t].
    pub window: Option<(f64, f64)>,
}

impl ParseOptions {
    pub fn new(crs: Crs) -> Self {
        ParseOptions {
            schema: ColumnSchema::default(),
            crs,
            window: None,
        }
    }
}

/// What happened during parsing; malformed input is counted, not fatal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_malformed: u64,
    pub rows_out_of_window: u64,
    pub duplicate_points_removed: u64,
    pub trajectories_dropped_too_short: u64,
    pub trajectories_kept: u64,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub dataset: Dataset,
    pub report: IngestReport,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TimeFormat {
    EpochSeconds,
    Iso8601,
}

fn parse_time(field: &str, format: TimeFormat) -> Option<f64> {
    match format {
        TimeFormat::EpochSeconds => field.trim().parse::<f64>().ok(),
        TimeFormat::Iso8601 => parse_iso8601(field.trim()),
    }
}

fn parse_iso8601(s: &str) -> Option<f64> {
    use chrono::{DateTime, NaiveDateTime, Utc};
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            let dt = naive.and_utc();
            let _ = Utc; // naive timestamps are taken as UTC
            return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
        }
    }
    None
}

fn detect_time_format(field: &str) -> Option<TimeFormat> {
    let trimmed = field.trim();
    if trimmed.parse::<f64>().is_ok() {
        Some(TimeFormat::EpochSeconds)
    } else if parse_iso8601(trimmed).is_some() {
        Some(TimeFormat::Iso8601)
    } else {
        None
    }
}

/// Parses a delimited text stream into a [`Dataset`].
///
/// Rows may arrive unsorted; they are grouped by trajectory id (first
/// appearance order) and sorted by timestamp within each id. Timestamps are
/// epoch seconds or ISO-8601, auto-detected from the first parseable row and
/// then required to be uniform. Rows failing validation are skipped and
/// counted. Trajectories left with fewer than 2 points are dropped and
/// counted.
pub fn parse_trajectories<R: Read>(input: R, opts: &ParseOptions) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::Input(format!("cannot read header row: {e}"))),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        // Empty stream: a dataset with zero trajectories, not an error.
        return Ok(ParseOutcome {
            dataset: apply_window(BTreeMap::new(), Vec::new(), opts, &mut IngestReport::default()),
            report: IngestReport::default(),
        });
    }

    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("column {name:?} not found in header")))
    };
    let idx_id = col(&opts.schema.traj_id)?;
    let idx_x = col(&opts.schema.x)?;
    let idx_y = col(&opts.schema.y)?;
    let idx_t = col(&opts.schema.t)?;

    let mut report = IngestReport::default();
    let mut time_format: Option<TimeFormat> = None;
    let mut groups: BTreeMap<String, Vec<TrajectoryPoint>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if e.is_io_error() {
                    return Err(Error::Input(format!("unreadable input stream: {e}")));
                }
                report.rows_read += 1;
                report.rows_malformed += 1;
                continue;
            }
        };
        report.rows_read += 1;

        let fields = (
            record.get(idx_id),
            record.get(idx_x),
            record.get(idx_y),
            record.get(idx_t),
        );
        let (Some(id), Some(xs), Some(ys), Some(ts)) = fields else {
            report.rows_malformed += 1;
            continue;
        };

        let format = match time_format {
            Some(f) => f,
            None => match detect_time_format(ts) {
                Some(f) => {
                    time_format = Some(f);
                    f
                }
                None => {
                    report.rows_malformed += 1;
                    continue;
                }
            },
        };

        let (Ok(x), Ok(y)) = (xs.parse::<f64>(), ys.parse::<f64>()) else {
            report.rows_malformed += 1;
            continue;
        };
        let Some(t) = parse_time(ts, format) else {
            report.rows_malformed += 1;
            continue;
        };
        let point = TrajectoryPoint { x, y, t };
        if id.is_empty() || !point.is_valid() {
            report.rows_malformed += 1;
            continue;
        }
        if let Some((lo, hi)) = opts.window {
            if t < lo || t > hi {
                report.rows_out_of_window += 1;
                continue;
            }
        }
        if !groups.contains_key(id) {
            order.push(id.to_string());
        }
        groups.entry(id.to_string()).or_default().push(point);
    }

    let dataset = apply_window(groups, order, opts, &mut report);
    Ok(ParseOutcome { dataset, report })
}

fn apply_window(
    mut groups: BTreeMap<String, Vec<TrajectoryPoint>>,
    order: Vec<String>,
    opts: &ParseOptions,
    report: &mut IngestReport,
) -> Dataset {
    let mut trajectories = Vec::with_capacity(order.len());
    for id in order {
        let mut points = groups.remove(&id).unwrap_or_default();
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        let before = points.len() as u64;
        points.dedup_by(|b, a| a.t == b.t && a.x == b.x && a.y == b.y);
        report.duplicate_points_removed += before - points.len() as u64;
        if points.len() < 2 {
            report.trajectories_dropped_too_short += 1;
            continue;
        }
        trajectories.push(Trajectory { id, points });
    }
    report.trajectories_kept = trajectories.len() as u64;

    let (day_start, day_end) = match opts.window {
        Some(w) => w,
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for traj in &trajectories {
                for p in &traj.points {
                    lo = lo.min(p.t);
                    hi = hi.max(p.t);
                }
            }
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        }
    };
    Dataset {
        trajectories,
        crs: opts.crs,
        day_start,
        day_end,
    }
}

/// Sum of consecutive point-to-point distances in meters.
pub fn path_length(traj: &Trajectory, crs: Crs) -> f64 {
    traj.points
        .windows(2)
        .map(|w| crs.distance_m(w[0].pos(), w[1].pos()))
        .sum()
}

/// Retains exactly the trajectories with `path_length > min_length_m`,
/// preserving order.
pub fn filter_short(ds: &Dataset, min_length_m: f64) -> Dataset {
    Dataset {
        trajectories: ds
            .trajectories
            .iter()
            .filter(|traj| path_length(traj, ds.crs) > min_length_m)
            .cloned()
            .collect(),
        crs: ds.crs,
        day_start: ds.day_start,
        day_end: ds.day_end,
    }
}

/// The day's axis of `t_count` slices of fixed width `delta_t_s` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceAxis {
    pub delta_t_s: f64,
    pub t_count: usize,
    pub day_start: f64,
}

impl SliceAxis {
    /// Slice index of a timestamp inside the analysis window. A timestamp
    /// landing exactly on the window's end is clamped to the last slice.
    pub fn slice_of(&self, t: f64) -> usize {
        let idx = ((t - self.day_start) / self.delta_t_s).floor();
        if idx < 0.0 {
            return 0;
        }
        (idx as usize).min(self.t_count - 1)
    }

    pub fn slice_start(&self, slice: usize) -> f64 {
        self.day_start + slice as f64 * self.delta_t_s
    }

    pub fn duration_hours(&self, slices: usize) -> f64 {
        slices as f64 * self.delta_t_s / 3600.0
    }
}

/// Divides the dataset's window into slices of width `delta_t_s`.
pub fn build_slice_axis(ds: &Dataset, delta_t_s: f64) -> Result<SliceAxis> {
    if !(delta_t_s > 0.0) {
        return Err(Error::Config(format!(
            "slice width must be positive, got {delta_t_s}"
        )));
    }
    let span = ds.day_end - ds.day_start;
    let t_count = ((span / delta_t_s).ceil() as usize).max(1);
    Ok(SliceAxis {
        delta_t_s,
        t_count,
        day_start: ds.day_start,
    })
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    id: String,
    points: Vec<(f64, f64, f64)>,
}

/// Writes the canonical line-delimited JSON form: one document per
/// trajectory with fields `id` and `points: [[x, y, t], ...]`.
pub fn write_dataset_jsonl<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for traj in &ds.trajectories {
        let rec = TrajectoryRecord {
            id: traj.id.clone(),
            points: traj.points.iter().map(|p| (p.x, p.y, p.t)).collect(),
        };
        serde_json::to_writer(&mut out, &rec)
            .map_err(|e| Error::Input(format!("cannot serialize trajectory: {e}")))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the canonical line-delimited JSON form back into a [`Dataset`].
pub fn read_dataset_jsonl<R: Read>(input: R, crs: Crs, window: Option<(f64, f64)>) -> Result<ParseOutcome> {
    let reader = BufReader::new(input);
    let mut report = IngestReport::default();
    let mut groups: BTreeMap<String, Vec<TrajectoryPoint>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => return Err(Error::Input(format!("malformed dataset line: {e}"))),
        };
        for (x, y, t) in rec.points {
            report.rows_read += 1;
            let point = TrajectoryPoint { x, y, t };
            if !point.is_valid() {
                report.rows_malformed += 1;
                continue;
            }
            if let Some((lo, hi)) = window {
                if t < lo || t > hi {
                    report.rows_out_of_window += 1;
                    continue;
                }
            }
            if !groups.contains_key(&rec.id) {
                order.push(rec.id.clone());
            }
            groups.entry(rec.id.clone()).or_default().push(point);
        }
    }

    let opts = ParseOptions {
        schema: ColumnSchema::default(),
        crs,
        window,
    };
    let dataset = apply_window(groups, order, &opts, &mut report);
    Ok(ParseOutcome { dataset, report })
}
