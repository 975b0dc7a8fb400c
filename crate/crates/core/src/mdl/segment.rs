//! Segmenting a snapshot series at structural change points.
//!
//! The streaming rule keeps one segment open with its co-clustering. For
//! each new snapshot it compares the cost of absorbing it (re-optimizing the
//! shared partitioning from the current one) with the cost of closing the
//! segment and starting fresh; a strictly cheaper split declares a change
//! point. Ties absorb. A dynamic-programming oracle over all boundary sets
//! with exhaustive partition enumeration exists for desk-scale instances.

use crate::error::{Error, Result};
use crate::flowgraph::GraphSeries;

use super::cost::{block_encoding_cost, matrices_of, universal_code_len, Matrix, Partitioning};
use super::search::search_partitions;
use super::{ChangePointReport, SegmentModel};

/// Hard caps for the exhaustive oracle; beyond these the enumeration blows
/// up combinatorially.
pub const ORACLE_MAX_N: usize = 6;
pub const ORACLE_MAX_T: usize = 10;

/// Total and per-hour encoding cost of a consecutive snapshot run under a
/// shared partitioning. On top of the block encoding the segment pays the
/// universal code for its length and for the vertex count its model is
/// declared over, so that opening a segment is never free.
pub fn segment_cost(mats: &[Matrix], p: &Partitioning, delta_t_s: f64) -> Result<(f64, f64)> {
    if mats.is_empty() {
        return Err(Error::Invariant("segment cost of an empty run".into()));
    }
    let total = block_encoding_cost(mats, p)?
        + universal_code_len(mats.len())
        + universal_code_len(mats[0].n);
    let hours = mats.len() as f64 * delta_t_s / 3600.0;
    Ok((total, total / hours))
}

fn finish_segment(
    mats: &[Matrix],
    first_slice: usize,
    last_slice: usize,
    p: &Partitioning,
    delta_t_s: f64,
) -> Result<SegmentModel> {
    // Final re-optimization pass from the partitioning the segment ended
    // with.
    let run = &mats[first_slice..=last_slice];
    let refined = search_partitions(run, Some(p))?;
    let (total, per_hour) = segment_cost(run, &refined, delta_t_s)?;
    Ok(SegmentModel {
        first_slice,
        last_slice,
        partitioning: refined,
        total_cost_bits: total,
        cost_per_hour: per_hour,
    })
}

/// Greedy streaming segmentation of a graph series.
pub fn detect_change_points(series: &GraphSeries) -> Result<ChangePointReport> {
    let mats = matrices_of(series);
    if mats.is_empty() {
        return Err(Error::Invariant("cannot segment an empty series".into()));
    }
    let delta_t_s = series.axis.delta_t_s;

    let mut segments = Vec::new();
    let mut change_points = Vec::new();
    let mut start = 0usize;
    let mut current = search_partitions(&mats[0..1], None)?;

    for t in 1..mats.len() {
        let absorbed = search_partitions(&mats[start..=t], Some(&current))?;
        let (cost_absorb, _) = segment_cost(&mats[start..=t], &absorbed, delta_t_s)?;

        let fresh = search_partitions(&mats[t..=t], None)?;
        let (cost_closed, _) = segment_cost(&mats[start..t], &current, delta_t_s)?;
        let (cost_fresh, _) = segment_cost(&mats[t..=t], &fresh, delta_t_s)?;

        if cost_closed + cost_fresh < cost_absorb {
            segments.push(finish_segment(&mats, start, t - 1, &current, delta_t_s)?);
            change_points.push(t);
            start = t;
            current = fresh;
        } else {
            current = absorbed;
        }
    }
    segments.push(finish_segment(&mats, start, mats.len() - 1, &current, delta_t_s)?);

    let report = ChangePointReport {
        change_points,
        segments,
    };
    report.validate(mats.len())?;
    Ok(report)
}

/// Enumerates all partitions of `n` items as restricted-growth strings,
/// returning (assignment, group count) pairs.
pub fn set_partitions(n: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    let mut assignment = vec![0usize; n];
    fn recurse(assignment: &mut Vec<usize>, idx: usize, max_used: usize, out: &mut Vec<(Vec<usize>, usize)>) {
        if idx == assignment.len() {
            out.push((assignment.clone(), max_used + 1));
            return;
        }
        for g in 0..=max_used + 1 {
            assignment[idx] = g;
            recurse(assignment, idx + 1, max_used.max(g), out);
        }
    }
    if n == 0 {
        return out;
    }
    recurse(&mut assignment, 1, 0, &mut out);
    out
}

/// Minimum block-encoding cost of a run over every possible partitioning,
/// by exhaustive enumeration.
fn exhaustive_best(mats: &[Matrix], delta_t_s: f64) -> Result<(Partitioning, f64)> {
    let n = mats[0].n;
    let parts = set_partitions(n);
    let mut best: Option<(Partitioning, f64)> = None;
    for (cols, l) in &parts {
        // With columns fixed, per-row block profiles are shared across row
        // partitions.
        let mut profiles = vec![vec![vec![0u64; *l]; n]; mats.len()];
        for (m, mat) in mats.iter().enumerate() {
            for (r, neighbors) in mat.rows.iter().enumerate() {
                for &j in neighbors {
                    profiles[m][r][cols[j]] += 1;
                }
            }
        }
        for (rows, k) in &parts {
            let p = Partitioning {
                row_group: rows.clone(),
                col_group: cols.clone(),
                k: *k,
                l: *l,
            };
            // Cost via the shared profile sums.
            let mut ones = vec![vec![vec![0u64; *l]; *k]; mats.len()];
            for m in 0..mats.len() {
                for r in 0..n {
                    for q in 0..*l {
                        ones[m][rows[r]][q] += profiles[m][r][q];
                    }
                }
            }
            let row_sizes = p.row_sizes();
            let col_sizes = p.col_sizes();
            let mut data = 0.0;
            for per_matrix in &ones {
                for (rg, row) in per_matrix.iter().enumerate() {
                    for (cg, &n1) in row.iter().enumerate() {
                        data += super::cost::block_data_bits(row_sizes[rg] * col_sizes[cg], n1);
                    }
                }
            }
            let total = super::cost::header_cost(n, mats.len(), &p)
                + data
                + universal_code_len(mats.len())
                + universal_code_len(n);
            if best.as_ref().is_none_or(|(_, c)| total < *c) {
                best = Some((p, total));
            }
        }
    }
    let (p, total) = best.ok_or_else(|| Error::Invariant("no partitioning enumerated".into()))?;
    let hours = mats.len() as f64 * delta_t_s / 3600.0;
    let _ = hours;
    Ok((p, total))
}

/// Exact minimum-total-cost segmentation by dynamic programming over all
/// boundary sets, with exhaustive per-segment partition enumeration. This
/// is a desk-scale oracle: it refuses instances beyond the given limits
/// (which are themselves capped at n <= 6, T <= 10).
pub fn brute_force_segmentation(
    series: &GraphSeries,
    max_n: usize,
    max_t: usize,
) -> Result<ChangePointReport> {
    let mats = matrices_of(series);
    let t_count = mats.len();
    if t_count == 0 {
        return Err(Error::Invariant("cannot segment an empty series".into()));
    }
    let n = mats[0].n;
    let n_cap = max_n.min(ORACLE_MAX_N);
    let t_cap = max_t.min(ORACLE_MAX_T);
    if n > n_cap {
        return Err(Error::Limit(format!(
            "oracle limit exceeded: {n} vertices > {n_cap}"
        )));
    }
    if t_count > t_cap {
        return Err(Error::Limit(format!(
            "oracle limit exceeded: {t_count} slices > {t_cap}"
        )));
    }
    let delta_t_s = series.axis.delta_t_s;

    // seg[i][j]: best cost and partitioning of the run i..=j.
    let mut seg: Vec<Vec<Option<(Partitioning, f64)>>> = vec![vec![None; t_count]; t_count];
    for i in 0..t_count {
        for j in i..t_count {
            seg[i][j] = Some(exhaustive_best(&mats[i..=j], delta_t_s)?);
        }
    }

    // DP over the last segment start.
    let mut best_cost = vec![f64::INFINITY; t_count + 1];
    let mut best_prev = vec![0usize; t_count + 1];
    best_cost[0] = 0.0;
    for end in 1..=t_count {
        for start in 0..end {
            let (_, run_cost) = seg[start][end - 1].as_ref().unwrap();
            let candidate = best_cost[start] + run_cost;
            if candidate < best_cost[end] {
                best_cost[end] = candidate;
                best_prev[end] = start;
            }
        }
    }

    let mut boundaries = Vec::new();
    let mut at = t_count;
    while at > 0 {
        let start = best_prev[at];
        boundaries.push((start, at - 1));
        at = start;
    }
    boundaries.reverse();

    let mut segments = Vec::new();
    let mut change_points = Vec::new();
    for (idx, (start, end)) in boundaries.iter().enumerate() {
        if idx > 0 {
            change_points.push(*start);
        }
        let (p, total) = seg[*start][*end].clone().unwrap();
        let hours = (end - start + 1) as f64 * delta_t_s / 3600.0;
        segments.push(SegmentModel {
            first_slice: *start,
            last_slice: *end,
            partitioning: p,
            total_cost_bits: total,
            cost_per_hour: total / hours,
        });
    }

    let report = ChangePointReport {
        change_points,
        segments,
    };
    report.validate(t_count)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowgraph::{GraphSnapshot, GraphSeries};
    use crate::ingest::SliceAxis;
    use crate::rules::Method;
    use std::collections::BTreeSet;

    fn snapshot(slice: usize, n: usize, edges: &[(usize, usize)]) -> GraphSnapshot {
        GraphSnapshot {
            slice,
            n,
            edges: edges.iter().copied().collect::<BTreeSet<_>>(),
        }
    }

    fn series_of(n: usize, per_slice_edges: Vec<Vec<(usize, usize)>>) -> GraphSeries {
        let t_count = per_slice_edges.len();
        GraphSeries {
            snapshots: per_slice_edges
                .into_iter()
                .enumerate()
                .map(|(t, edges)| snapshot(t, n, &edges))
                .collect(),
            axis: SliceAxis { delta_t_s: 3600.0, t_count, day_start: 0.0 },
            method: Method::All,
            v_c_kmh: None,
        }
    }

    fn star_in(n: usize, hub: usize) -> Vec<(usize, usize)> {
        (0..n).filter(|&i| i != hub).map(|i| (i, hub)).collect()
    }

    fn star_out(n: usize, hub: usize) -> Vec<(usize, usize)> {
        (0..n).filter(|&j| j != hub).map(|j| (hub, j)).collect()
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        assert_eq!(set_partitions(1).len(), 1);
        assert_eq!(set_partitions(2).len(), 2);
        assert_eq!(set_partitions(3).len(), 5);
        assert_eq!(set_partitions(4).len(), 15);
        assert_eq!(set_partitions(5).len(), 52);
        assert_eq!(set_partitions(6).len(), 203);
    }

    #[test]
    fn single_edgeless_snapshot_costs_header_only() {
        let m = Matrix::from_edges(4, []);
        let p = Partitioning::unit(4);
        let (total, per_hour) = segment_cost(&[m], &p, 3600.0).unwrap();
        // ceil(log2 17) = 5 count bits plus L*(1) = 0 length bits plus
        // L*(4) = 3 dimension bits; zero data bits.
        assert_eq!(total, 8.0);
        assert_eq!(per_hour, total);
    }

    #[test]
    fn cost_per_hour_divides_by_duration() {
        let m = Matrix::from_edges(3, [(0, 1)]);
        let p = Partitioning::unit(3);
        let run = vec![m.clone(), m.clone(), m];
        let (total, per_hour) = segment_cost(&run, &p, 3600.0).unwrap();
        assert!((per_hour - total / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_no_interior_change_points() {
        let edges = star_in(5, 0);
        let series = series_of(5, vec![edges.clone(); 6]);
        let report = detect_change_points(&series).unwrap();
        assert_eq!(report.change_points, Vec::<usize>::new());
        assert_eq!(report.segments.len(), 1);
        assert_eq!(report.segments[0].first_slice, 0);
        assert_eq!(report.segments[0].last_slice, 5);
    }

    #[test]
    fn constant_empty_series_stays_single_segment() {
        let series = series_of(4, vec![Vec::new(); 8]);
        let report = detect_change_points(&series).unwrap();
        assert_eq!(report.change_points, Vec::<usize>::new());
    }

    #[test]
    fn star_flip_detected_at_regime_boundary() {
        // Slices 0..=4 star into the hub, 5..=9 star out of it.
        let n = 6;
        let mut slices = vec![star_in(n, 0); 5];
        slices.extend(vec![star_out(n, 0); 5]);
        let series = series_of(n, slices);
        let report = detect_change_points(&series).unwrap();
        assert_eq!(report.change_points, vec![5]);
        assert_eq!(report.segments.len(), 2);
    }

    #[test]
    fn empty_bracket_series_splits_at_dense_run() {
        let n = 6;
        let dense = star_in(n, 2);
        let mut slices = vec![Vec::new()];
        slices.extend(vec![dense; 4]);
        slices.push(Vec::new());
        let series = series_of(n, slices);
        let report = detect_change_points(&series).unwrap();
        assert_eq!(report.change_points, vec![1, 5]);
    }

    #[test]
    fn oracle_single_slice_single_segment() {
        let series = series_of(3, vec![vec![(0, 1)]]);
        let report = brute_force_segmentation(&series, 6, 10).unwrap();
        assert_eq!(report.change_points, Vec::<usize>::new());
        assert_eq!(report.segments.len(), 1);
    }

    #[test]
    fn oracle_prefers_single_segment_on_constant_series() {
        let edges = vec![(0, 1), (1, 2), (2, 0)];
        let series = series_of(4, vec![edges; 5]);
        let report = brute_force_segmentation(&series, 6, 10).unwrap();
        assert_eq!(report.change_points, Vec::<usize>::new());
    }

    #[test]
    fn oracle_finds_star_flip_boundary() {
        let n = 6;
        let mut slices = vec![star_in(n, 0); 5];
        slices.extend(vec![star_out(n, 0); 5]);
        let series = series_of(n, slices);
        let report = brute_force_segmentation(&series, 6, 10).unwrap();
        assert_eq!(report.change_points, vec![5]);
        // The greedy detector agrees on this clean instance.
        let greedy = detect_change_points(&series).unwrap();
        assert_eq!(greedy.change_points, report.change_points);
        assert!(greedy.total_cost_bits() >= report.total_cost_bits() - 1e-9);
    }

    #[test]
    fn oracle_refuses_oversized_instances() {
        let series = series_of(7, vec![vec![(0, 1)]; 3]);
        assert!(matches!(
            brute_force_segmentation(&series, 6, 10),
            Err(Error::Limit(_))
        ));
        let series = series_of(3, vec![vec![(0, 1)]; 11]);
        assert!(matches!(
            brute_force_segmentation(&series, 6, 10),
            Err(Error::Limit(_))
        ));
    }

    #[test]
    fn segments_tile_the_axis() {
        let n = 5;
        let mut slices = vec![star_in(n, 1); 3];
        slices.extend(vec![Vec::new(); 2]);
        slices.extend(vec![star_out(n, 3); 3]);
        let series = series_of(n, slices);
        let report = detect_change_points(&series).unwrap();
        report.validate(8).unwrap();
        assert_eq!(report.segments.len(), report.change_points.len() + 1);
    }
}
