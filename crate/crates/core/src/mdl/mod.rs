//! MDL co-clustering of snapshot adjacency matrices and change-point
//! segmentation of the snapshot series.

pub mod cost;
pub mod search;
pub mod segment;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{
    binary_entropy, block_encoding_cost, data_cost, header_cost, matrices_of, universal_code_len,
    Matrix, Partitioning,
};
pub use search::search_partitions;
pub use segment::{
    brute_force_segmentation, detect_change_points, segment_cost, set_partitions, ORACLE_MAX_N,
    ORACLE_MAX_T,
};

/// A run of consecutive slices sharing one co-clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentModel {
    pub first_slice: usize,
    pub last_slice: usize,
    pub partitioning: Partitioning,
    pub total_cost_bits: f64,
    pub cost_per_hour: f64,
}

impl SegmentModel {
    pub fn slice_count(&self) -> usize {
        self.last_slice - self.first_slice + 1
    }
}

/// Detected change points plus the segments they delimit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    /// Slice indices where a new segment starts (the first segment's start
    /// is not a change point).
    pub change_points: Vec<usize>,
    pub segments: Vec<SegmentModel>,
}

impl ChangePointReport {
    pub fn total_cost_bits(&self) -> f64 {
        self.segments.iter().map(|s| s.total_cost_bits).sum()
    }

    /// Segments must tile 0..t_count without gaps or overlaps and
    /// boundaries must coincide with the change points.
    pub fn validate(&self, t_count: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Invariant("report with no segments".into()));
        }
        if self.segments.len() != self.change_points.len() + 1 {
            return Err(Error::Invariant(
                "segment count must be change point count + 1".into(),
            ));
        }
        let mut expected_start = 0usize;
        for (idx, seg) in self.segments.iter().enumerate() {
            if seg.first_slice != expected_start {
                return Err(Error::Invariant("segments do not tile the slice axis".into()));
            }
            if seg.last_slice < seg.first_slice {
                return Err(Error::Invariant("segment range reversed".into()));
            }
            if idx > 0 && self.change_points[idx - 1] != seg.first_slice {
                return Err(Error::Invariant(
                    "change points must coincide with segment starts".into(),
                ));
            }
            expected_start = seg.last_slice + 1;
        }
        if expected_start != t_count {
            return Err(Error::Invariant("segments do not cover the slice axis".into()));
        }
        Ok(())
    }
}

/// Writes the change-point report as JSON with per-segment `first_slice`,
/// `last_slice`, `k`, `l`, `row_groups`, `col_groups`, `total_cost_bits`
/// and `cost_per_hour`.
pub fn write_report_json<W: Write>(report: &ChangePointReport, mut out: W) -> Result<()> {
    use serde_json::json;
    let segments: Vec<serde_json::Value> = report
        .segments
        .iter()
        .map(|s| {
            json!({
                "first_slice": s.first_slice,
                "last_slice": s.last_slice,
                "k": s.partitioning.k,
                "l": s.partitioning.l,
                "row_groups": s.partitioning.row_group,
                "col_groups": s.partitioning.col_group,
                "total_cost_bits": s.total_cost_bits,
                "cost_per_hour": s.cost_per_hour,
            })
        })
        .collect();
    let doc = json!({
        "change_points": report.change_points,
        "segments": segments,
    });
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Input(format!("cannot serialize report: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Dumps a segment's matrices as one text grid: rows and columns reordered
/// by group with separators, each cell showing the edge density over the
/// segment's slices ('.' never, digits 1-9 for partial, '#' always).
pub fn write_partitioned_matrix<W: Write>(
    mats: &[Matrix],
    p: &Partitioning,
    mut out: W,
) -> Result<()> {
    if mats.is_empty() {
        return Err(Error::Invariant("no matrices to dump".into()));
    }
    let n = mats[0].n;
    p.validate(n)?;

    let mut row_order: Vec<usize> = (0..n).collect();
    row_order.sort_by_key(|&r| (p.row_group[r], r));
    let mut col_order: Vec<usize> = (0..n).collect();
    col_order.sort_by_key(|&c| (p.col_group[c], c));

    let mut density = vec![vec![0u32; n]; n];
    for m in mats {
        for (i, neighbors) in m.rows.iter().enumerate() {
            for &j in neighbors {
                density[i][j] += 1;
            }
        }
    }
    let runs = mats.len() as f64;

    writeln!(out, "rows: {} groups, cols: {} groups, {} slices", p.k, p.l, mats.len())?;
    writeln!(
        out,
        "row order: {}",
        row_order.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
    )?;
    writeln!(
        out,
        "col order: {}",
        col_order.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    )?;
    for (ri, &r) in row_order.iter().enumerate() {
        if ri > 0 && p.row_group[row_order[ri - 1]] != p.row_group[r] {
            let mut sep = String::new();
            for (ci, &c) in col_order.iter().enumerate() {
                if ci > 0 && p.col_group[col_order[ci - 1]] != p.col_group[c] {
                    sep.push('+');
                }
                sep.push('-');
            }
            writeln!(out, "{sep}")?;
        }
        let mut line = String::new();
        for (ci, &c) in col_order.iter().enumerate() {
            if ci > 0 && p.col_group[col_order[ci - 1]] != p.col_group[c] {
                line.push('|');
            }
            let rho = f64::from(density[r][c]) / runs;
            line.push(if rho <= 0.0 {
                '.'
            } else if rho >= 1.0 {
                '#'
            } else {
                char::from_digit((rho * 9.0).ceil().max(1.0) as u32, 10).unwrap_or('9')
            });
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_validation_catches_gaps() {
        let seg = |first, last| SegmentModel {
            first_slice: first,
            last_slice: last,
            partitioning: Partitioning::unit(2),
            total_cost_bits: 1.0,
            cost_per_hour: 1.0,
        };
        let good = ChangePointReport {
            change_points: vec![2],
            segments: vec![seg(0, 1), seg(2, 4)],
        };
        good.validate(5).unwrap();

        let gap = ChangePointReport {
            change_points: vec![3],
            segments: vec![seg(0, 1), seg(3, 4)],
        };
        assert!(gap.validate(5).is_err());

        let wrong_cp = ChangePointReport {
            change_points: vec![1],
            segments: vec![seg(0, 1), seg(2, 4)],
        };
        assert!(wrong_cp.validate(5).is_err());
    }

    #[test]
    fn report_json_has_required_fields() {
        let report = ChangePointReport {
            change_points: vec![1],
            segments: vec![
                SegmentModel {
                    first_slice: 0,
                    last_slice: 0,
                    partitioning: Partitioning::unit(2),
                    total_cost_bits: 8.0,
                    cost_per_hour: 8.0,
                },
                SegmentModel {
                    first_slice: 1,
                    last_slice: 1,
                    partitioning: Partitioning::unit(2),
                    total_cost_bits: 9.0,
                    cost_per_hour: 9.0,
                },
            ],
        };
        let mut buf = Vec::new();
        write_report_json(&report, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["change_points"], serde_json::json!([1]));
        for key in [
            "first_slice",
            "last_slice",
            "k",
            "l",
            "row_groups",
            "col_groups",
            "total_cost_bits",
            "cost_per_hour",
        ] {
            assert!(v["segments"][0].get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn matrix_dump_groups_rows_and_cols() {
        let m = Matrix::from_edges(4, [(0, 2), (1, 2), (3, 2), (0, 0)]);
        let p = Partitioning {
            row_group: vec![0, 0, 1, 0],
            col_group: vec![0, 0, 1, 0],
            k: 2,
            l: 2,
        };
        let mut buf = Vec::new();
        write_partitioned_matrix(&[m], &p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains('|'));
        assert!(text.contains('#'));
        assert!(text.lines().any(|l| l.starts_with('-') || l.contains("-+")));
    }
}
