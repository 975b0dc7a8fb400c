//! From trajectories and cells to a per-slice directed flow graph.
//!
//! A trajectory's points map to a region visit sequence; every ordered pair
//! of distinct visited regions yields a sub-trajectory with the distance
//! actually covered between leaving the first region and entering the
//! second. Per (origin, destination, slice) the sub-trajectories aggregate
//! into an average speed of total distance over total time, and an edge
//! rule turns the measured pairs into a binary snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Crs;
use crate::ingest::{Dataset, SliceAxis, Trajectory};
use crate::partition::{assign_region, CellSet};
use crate::rules::{EdgeRule, Method};

/// Seconds-per-meter speed to km/h.
pub const MS_TO_KMH: f64 = 3.6;

/// One stay inside a region: a maximal run of consecutive points assigned
/// to the same cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub cell_id: usize,
    pub entry_time: f64,
    pub exit_time: f64,
    /// Indexes into the trajectory's point list.
    pub entry_index: usize,
    pub exit_index: usize,
}

/// The sequence of regions visited by one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitSequence {
    pub traj_id: String,
    pub visits: Vec<Visit>,
}

/// The portion of a trajectory traveling from region `origin` to region
/// `dest`, with travel distance `d_m` and travel time `tau_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTrajectory {
    pub traj_id: String,
    pub origin: usize,
    pub dest: usize,
    pub slice: usize,
    pub d_m: f64,
    pub tau_s: f64,
}

/// Aggregated flow of one region pair in one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMeasure {
    pub origin: usize,
    pub dest: usize,
    pub slice: usize,
    pub count: usize,
    pub sum_d_m: f64,
    pub sum_tau_s: f64,
    /// Total distance over total time, in km/h.
    pub v_kmh: f64,
}

/// Binary directed adjacency structure for one time slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub slice: usize,
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl GraphSnapshot {
    pub fn empty(slice: usize, n: usize) -> Self {
        GraphSnapshot {
            slice,
            n,
            edges: BTreeSet::new(),
        }
    }
}

/// The ordered snapshots of one day under one edge rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSeries {
    pub snapshots: Vec<GraphSnapshot>,
    pub axis: SliceAxis,
    pub method: Method,
    pub v_c_kmh: Option<f64>,
}

impl GraphSeries {
    pub fn n(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.n)
    }
}

/// Counters for sub-trajectories that could not be measured.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowStats {
    pub subtrajectories: u64,
    pub dropped_zero_duration: u64,
    pub pairs_dropped_zero_total_time: u64,
}

/// Maps every point to its region and collapses maximal runs of the same
/// cell into visits. Revisits of an earlier region stay separate visits.
pub fn region_visit_sequence(traj: &Trajectory, cells: &CellSet) -> VisitSequence {
    let mut visits: Vec<Visit> = Vec::new();
    for (idx, point) in traj.points.iter().enumerate() {
        let cell_id = assign_region(point.pos(), cells);
        match visits.last_mut() {
            Some(last) if last.cell_id == cell_id => {
                last.exit_time = point.t;
                last.exit_index = idx;
            }
            _ => visits.push(Visit {
                cell_id,
                entry_time: point.t,
                exit_time: point.t,
                entry_index: idx,
                exit_index: idx,
            }),
        }
    }
    VisitSequence {
        traj_id: traj.id.clone(),
        visits,
    }
}

fn cumulative_path(traj: &Trajectory, crs: Crs) -> Vec<f64> {
    let mut cum = Vec::with_capacity(traj.points.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in traj.points.windows(2) {
        acc += crs.distance_m(w[0].pos(), w[1].pos());
        cum.push(acc);
    }
    cum
}

/// Emits one sub-trajectory per ordered pair of visit positions with
/// distinct regions: visiting A, B, C yields A->B, A->C and B->C.
///
/// Distance covers the full polyline between leaving the origin region and
/// entering the destination region. Duration is entry(b) - exit(a), falling
/// back to entry(b) - entry(a) when zero; still-zero durations are dropped
/// and counted. Each sub-trajectory lands in the slice containing its
/// departure from the origin region.
pub fn extract_subtrajectories(
    vs: &VisitSequence,
    traj: &Trajectory,
    crs: Crs,
    axis: &SliceAxis,
    stats: &mut FlowStats,
) -> Vec<SubTrajectory> {
    let cum = cumulative_path(traj, crs);
    let mut out = Vec::new();
    for a in 0..vs.visits.len() {
        for b in (a + 1)..vs.visits.len() {
            let va = &vs.visits[a];
            let vb = &vs.visits[b];
            if va.cell_id == vb.cell_id {
                continue;
            }
            let d_m = cum[vb.entry_index] - cum[va.exit_index];
            let mut tau_s = vb.entry_time - va.exit_time;
            if tau_s == 0.0 {
                tau_s = vb.entry_time - va.entry_time;
            }
            if tau_s <= 0.0 {
                stats.dropped_zero_duration += 1;
                continue;
            }
            stats.subtrajectories += 1;
            out.push(SubTrajectory {
                traj_id: vs.traj_id.clone(),
                origin: va.cell_id,
                dest: vb.cell_id,
                slice: axis.slice_of(va.exit_time),
                d_m,
                tau_s,
            });
        }
    }
    out
}

/// Aggregates a non-empty group of sub-trajectories of one (origin, dest,
/// slice) into its average speed: total distance over total time.
pub fn edie_speed(flows: &[SubTrajectory]) -> Result<FlowMeasure> {
    let first = flows
        .first()
        .ok_or_else(|| Error::Invariant("edie_speed on empty flow set".into()))?;
    let key = (first.origin, first.dest, first.slice);
    let mut sum_d = 0.0;
    let mut sum_tau = 0.0;
    for f in flows {
        if (f.origin, f.dest, f.slice) != key {
            return Err(Error::Invariant(
                "edie_speed over mixed region pairs or slices".into(),
            ));
        }
        sum_d += f.d_m;
        sum_tau += f.tau_s;
    }
    if sum_tau <= 0.0 {
        return Err(Error::Invariant("zero total travel time for region pair".into()));
    }
    Ok(FlowMeasure {
        origin: key.0,
        dest: key.1,
        slice: key.2,
        count: flows.len(),
        sum_d_m: sum_d,
        sum_tau_s: sum_tau,
        v_kmh: sum_d / sum_tau * MS_TO_KMH,
    })
}

/// All per-(slice, origin, dest) flow measures of a dataset, keyed in
/// deterministic order.
pub fn collect_measures(
    ds: &Dataset,
    cells: &CellSet,
    axis: &SliceAxis,
) -> (BTreeMap<(usize, usize, usize), FlowMeasure>, FlowStats) {
    let mut stats = FlowStats::default();
    let mut grouped: BTreeMap<(usize, usize, usize), Vec<SubTrajectory>> = BTreeMap::new();
    for traj in &ds.trajectories {
        let vs = region_visit_sequence(traj, cells);
        for sub in extract_subtrajectories(&vs, traj, ds.crs, axis, &mut stats) {
            grouped
                .entry((sub.slice, sub.origin, sub.dest))
                .or_default()
                .push(sub);
        }
    }
    let mut measures = BTreeMap::new();
    for (key, flows) in grouped {
        match edie_speed(&flows) {
            Ok(m) => {
                measures.insert(key, m);
            }
            Err(_) => {
                stats.pairs_dropped_zero_total_time += 1;
            }
        }
    }
    (measures, stats)
}

/// Applies an edge rule to the measures of one slice. Self-loops never
/// appear because sub-trajectories exclude equal region pairs.
pub fn build_snapshot<'a, I>(measures: I, slice: usize, n: usize, rule: &dyn EdgeRule) -> GraphSnapshot
where
    I: IntoIterator<Item = &'a FlowMeasure>,
{
    let mut edges = BTreeSet::new();
    for m in measures {
        debug_assert_eq!(m.slice, slice);
        if rule.admits(m.v_kmh) {
            edges.insert((m.origin, m.dest));
        }
    }
    GraphSnapshot { slice, n, edges }
}

/// Builds the full snapshot series for a dataset under one method; every
/// slice gets a snapshot, possibly edgeless.
pub fn build_series(
    ds: &Dataset,
    cells: &CellSet,
    axis: &SliceAxis,
    method: Method,
    v_c_kmh: Option<f64>,
) -> Result<GraphSeries> {
    let rule = method.build(v_c_kmh)?;
    let (measures, _) = collect_measures(ds, cells, axis);
    Ok(series_from_measures(&measures, cells.len(), axis, method, rule.as_ref()))
}

/// Snapshot series from precomputed measures.
pub fn series_from_measures(
    measures: &BTreeMap<(usize, usize, usize), FlowMeasure>,
    n: usize,
    axis: &SliceAxis,
    method: Method,
    rule: &dyn EdgeRule,
) -> GraphSeries {
    let mut snapshots = Vec::with_capacity(axis.t_count);
    for slice in 0..axis.t_count {
        let in_slice = measures
            .range((slice, 0, 0)..(slice + 1, 0, 0))
            .map(|(_, m)| m);
        snapshots.push(build_snapshot(in_slice, slice, n, rule));
    }
    GraphSeries {
        snapshots,
        axis: *axis,
        method,
        v_c_kmh: rule.threshold_kmh(),
    }
}

/// One row of the threshold sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub v_c_kmh: f64,
    pub slice: usize,
    pub edges: usize,
    /// Edge count divided by the maximum per-slice edge count within the
    /// same (method, threshold) series; 0 when the series is empty.
    pub relative_edges: f64,
}

/// Evaluates the low- and high-speed rules over a threshold list, emitting
/// absolute and relative per-slice edge counts.
pub fn edge_count_sweep(
    ds: &Dataset,
    cells: &CellSet,
    axis: &SliceAxis,
    thresholds_kmh: &[f64],
) -> Result<Vec<SweepRow>> {
    if thresholds_kmh.is_empty() {
        return Err(Error::Config("threshold sweep needs at least one value".into()));
    }
    let (measures, _) = collect_measures(ds, cells, axis);
    let mut rows = Vec::new();
    for method in [Method::LowSpeed, Method::HighSpeed] {
        for &v_c in thresholds_kmh {
            let rule = method.build(Some(v_c))?;
            let series = series_from_measures(&measures, cells.len(), axis, method, rule.as_ref());
            let max_edges = series.snapshots.iter().map(|s| s.edges.len()).max().unwrap_or(0);
            for snap in &series.snapshots {
                let relative = if max_edges == 0 {
                    0.0
                } else {
                    snap.edges.len() as f64 / max_edges as f64
                };
                rows.push(SweepRow {
                    method,
                    v_c_kmh: v_c,
                    slice: snap.slice,
                    edges: snap.edges.len(),
                    relative_edges: relative,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes the edge lists of every snapshot as `t,i,j` delimited text.
pub fn write_edge_list<W: Write>(series: &GraphSeries, mut out: W) -> Result<()> {
    writeln!(out, "t,i,j")?;
    for snap in &series.snapshots {
        for (i, j) in &snap.edges {
            writeln!(out, "{},{},{}", snap.slice, i, j)?;
        }
    }
    Ok(())
}

/// Writes one snapshot as a DOT digraph.
pub fn write_dot<W: Write>(snap: &GraphSnapshot, mut out: W) -> Result<()> {
    writeln!(out, "digraph slice_{} {{", snap.slice)?;
    for (i, j) in &snap.edges {
        writeln!(out, "  {} -> {};", i, j)?;
    }
    writeln!(out, "}}")?;
    Ok(())
}

/// Writes the flow-measure dump: `t,i,j,count,sum_d_m,sum_tau_s,v_kmh`.
pub fn write_flow_measures<W: Write>(
    measures: &BTreeMap<(usize, usize, usize), FlowMeasure>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "t,i,j,count,sum_d_m,sum_tau_s,v_kmh")?;
    for ((t, i, j), m) in measures {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t, i, j, m.count, m.sum_d_m, m.sum_tau_s, m.v_kmh
        )?;
    }
    Ok(())
}

/// Writes the sweep table: `method,v_c,t,edges,relative_edges`.
pub fn write_sweep_table<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "method,v_c,t,edges,relative_edges")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.method, row.v_c_kmh, row.slice, row.edges, row.relative_edges
        )?;
    }
    Ok(())
}
