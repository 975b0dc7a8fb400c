//! Grouping of seed points into cells of a desired radius and
//! nearest-centroid region membership.
//!
//! The grouping is order-dependent: each seed joins the nearest existing
//! cell whose centroid lies within the radius, otherwise it founds a new
//! cell, with the joined cell's centroid re-averaged incrementally. Members
//! are then cleared and every seed is redistributed to its nearest centroid;
//! redistribution and centroid recomputation repeat until membership is
//! stable, so that every seed ends up assigned to its globally nearest
//! centroid while each centroid equals the mean of its final members.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Crs, Point2};
use crate::ingest::Dataset;

/// One spatial cell: a graph vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub centroid: Point2,
    pub member_count: usize,
}

/// The partition of the plane into cells; cell ids are dense 0..len-1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub cells: Vec<Cell>,
    pub gamma_m: f64,
    pub crs: Crs,
}

impl CellSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn centroids(&self) -> impl Iterator<Item = Point2> + '_ {
        self.cells.iter().map(|c| c.centroid)
    }
}

/// Side facts about a grouping run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionReport {
    /// Redistribution rounds until membership stabilized.
    pub rounds: usize,
    /// Cells left without members after redistribution; their centroids are
    /// retained.
    pub emptied_cells: usize,
}

/// Which trajectory points become seed points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedMode {
    #[serde(rename = "all-points")]
    AllPoints,
    #[serde(rename = "od-only")]
    OdOnly,
}

/// Extracts seed points in a deterministic order: trajectory order, then
/// point order (or origin, destination for `OdOnly`).
pub fn collect_seed_points(ds: &Dataset, mode: SeedMode) -> Vec<Point2> {
    let mut seeds = Vec::new();
    for traj in &ds.trajectories {
        match mode {
            SeedMode::AllPoints => seeds.extend(traj.points.iter().map(|p| p.pos())),
            SeedMode::OdOnly => {
                if let (Some(first), Some(last)) = (traj.points.first(), traj.points.last()) {
                    seeds.push(first.pos());
                    seeds.push(last.pos());
                }
            }
        }
    }
    seeds
}

struct CellAccum {
    sum_x: f64,
    sum_y: f64,
    count: usize,
    centroid: Point2,
}

impl CellAccum {
    fn new(p: Point2) -> Self {
        CellAccum {
            sum_x: p.x,
            sum_y: p.y,
            count: 1,
            centroid: p,
        }
    }

    fn add(&mut self, p: Point2) {
        self.sum_x += p.x;
        self.sum_y += p.y;
        self.count += 1;
        self.centroid = Point2::new(self.sum_x / self.count as f64, self.sum_y / self.count as f64);
    }
}

fn nearest_centroid(p: Point2, centroids: &[Point2], crs: Crs) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = crs.distance_m(p, *c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// Groups seed points into cells of desired radius `gamma_m`.
///
/// Results depend on the order of `seeds`; identical input order and radius
/// produce an identical [`CellSet`]. Ties between equally near centroids go
/// to the lowest cell id.
pub fn group_seed_points(
    seeds: &[Point2],
    gamma_m: f64,
    crs: Crs,
) -> Result<(CellSet, PartitionReport)> {
    if seeds.is_empty() {
        return Err(Error::Config("no seed points to group".into()));
    }
    if !(gamma_m > 0.0) {
        return Err(Error::Config(format!(
            "cell radius must be positive, got {gamma_m}"
        )));
    }
    for s in seeds {
        if !s.is_finite() {
            return Err(Error::Input("non-finite seed point".into()));
        }
    }

    // Incremental pass: join the nearest cell within gamma or found a new one.
    let mut accums: Vec<CellAccum> = Vec::new();
    let mut centroids: Vec<Point2> = Vec::new();
    for &s in seeds {
        if centroids.is_empty() {
            accums.push(CellAccum::new(s));
            centroids.push(s);
            continue;
        }
        let (idx, d) = nearest_centroid(s, &centroids, crs);
        if d <= gamma_m {
            accums[idx].add(s);
            centroids[idx] = accums[idx].centroid;
        } else {
            accums.push(CellAccum::new(s));
            centroids.push(s);
        }
    }

    // Redistribution: clear members, reassign every seed to its nearest
    // centroid, recompute centroids from final membership. Repeated until
    // stable so the nearest-centroid guarantee survives the recomputation;
    // this consistently terminates because each round's reassignment and
    // re-averaging both lower the total squared seed-to-centroid distance.
    let n_cells = centroids.len();
    let mut assignment: Vec<usize> = vec![usize::MAX; seeds.len()];
    let mut rounds = 0;
    const MAX_ROUNDS: usize = 1000;
    loop {
        rounds += 1;
        let mut changed = false;
        for (si, &s) in seeds.iter().enumerate() {
            let (idx, _) = nearest_centroid(s, &centroids, crs);
            if assignment[si] != idx {
                assignment[si] = idx;
                changed = true;
            }
        }
        if !changed || rounds > MAX_ROUNDS {
            break;
        }
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); n_cells];
        for (si, &cell) in assignment.iter().enumerate() {
            sums[cell].0 += seeds[si].x;
            sums[cell].1 += seeds[si].y;
            sums[cell].2 += 1;
        }
        for (i, (sx, sy, cnt)) in sums.into_iter().enumerate() {
            if cnt > 0 {
                centroids[i] = Point2::new(sx / cnt as f64, sy / cnt as f64);
            }
            // An emptied cell keeps its previous centroid.
        }
    }

    let mut counts = vec![0usize; n_cells];
    for &cell in &assignment {
        counts[cell] += 1;
    }
    let emptied = counts.iter().filter(|&&c| c == 0).count();

    let cells = centroids
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(id, (&centroid, &member_count))| Cell {
            id,
            centroid,
            member_count,
        })
        .collect();

    Ok((
        CellSet {
            cells,
            gamma_m,
            crs,
        },
        PartitionReport {
            rounds,
            emptied_cells: emptied,
        },
    ))
}

/// Returns the id of the cell whose centroid is nearest to `p`; ties break
/// to the lowest cell id. This is Voronoi membership without materializing
/// polygons.
pub fn assign_region(p: Point2, cells: &CellSet) -> usize {
    debug_assert!(!cells.is_empty());
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for cell in &cells.cells {
        let d = cells.crs.distance_m(p, cell.centroid);
        if d < best_d {
            best_d = d;
            best = cell.id;
        }
    }
    best
}

/// Writes the cell table as delimited text: `cell_id,cx,cy,member_count`.
pub fn write_cell_table<W: Write>(cells: &CellSet, mut out: W) -> Result<()> {
    writeln!(out, "cell_id,cx,cy,member_count")?;
    for c in &cells.cells {
        writeln!(out, "{},{},{},{}", c.id, c.centroid.x, c.centroid.y, c.member_count)?;
    }
    Ok(())
}
