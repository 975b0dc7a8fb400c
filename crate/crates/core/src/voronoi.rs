//! Voronoi polygons of cell centroids, clipped to a bounding box.
//!
//! Each polygon is carved out of the box by clipping with the perpendicular
//! bisector half-plane against every other centroid, which stays valid for
//! degenerate collinear generator sets (the regions become slabs). For
//! geographic data the construction runs on a local equirectangular
//! projection and rings are mapped back to degrees.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BBox, Crs, LocalProjection, Point2};
use crate::partition::CellSet;

/// A closed convex ring (last vertex equals the first) owned by one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPolygon {
    pub cell_id: usize,
    pub ring: Vec<Point2>,
}

/// Clips a convex ring (open representation) by the half-plane
/// `{p : n . p <= c}`, returning the open result ring.
fn clip_halfplane(ring: &[Point2], nx: f64, ny: f64, c: f64) -> Vec<Point2> {
    let mut out = Vec::with_capacity(ring.len() + 1);
    let inside = |p: Point2| nx * p.x + ny * p.y <= c;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        let ia = inside(a);
        let ib = inside(b);
        if ia {
            out.push(a);
        }
        if ia != ib {
            let fa = nx * a.x + ny * a.y - c;
            let fb = nx * b.x + ny * b.y - c;
            let t = fa / (fa - fb);
            out.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    out
}

fn dedup_ring(ring: Vec<Point2>, eps: f64) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
    for p in ring {
        if let Some(last) = out.last() {
            if (last.x - p.x).abs() <= eps && (last.y - p.y).abs() <= eps {
                continue;
            }
        }
        out.push(p);
    }
    while out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if (first.x - last.x).abs() <= eps && (first.y - last.y).abs() <= eps {
            out.pop();
        } else {
            break;
        }
    }
    out
}

/// Builds one clipped Voronoi polygon per cell. The bounding box must
/// contain every centroid and centroids must be pairwise distinct.
pub fn build_voronoi(cells: &CellSet, bbox: BBox) -> Result<Vec<VoronoiPolygon>> {
    if cells.is_empty() {
        return Err(Error::Config("cannot build Voronoi diagram of zero cells".into()));
    }

    // Work in a planar frame: identity for planar data, local projection for
    // geographic.
    let projection = match cells.crs {
        Crs::PlanarMeters => None,
        Crs::GeographicDegrees => {
            let n = cells.len() as f64;
            let mean_x = cells.centroids().map(|c| c.x).sum::<f64>() / n;
            let mean_y = cells.centroids().map(|c| c.y).sum::<f64>() / n;
            Some(LocalProjection::centered_on(mean_x, mean_y))
        }
    };
    let to_local = |p: Point2| projection.map_or(p, |proj| proj.to_local(p));
    let to_native = |p: Point2| projection.map_or(p, |proj| proj.to_geo(p));

    let generators: Vec<Point2> = cells.centroids().map(to_local).collect();
    for (i, gi) in generators.iter().enumerate() {
        for gj in generators.iter().skip(i + 1) {
            if gi == gj {
                return Err(Error::Config(
                    "duplicate cell centroids cannot generate a Voronoi diagram".into(),
                ));
            }
        }
    }
    for c in cells.centroids() {
        if !bbox.contains(c) {
            return Err(Error::Config("bounding box does not contain all centroids".into()));
        }
    }

    let corners = bbox.corners().map(to_local);
    let scale = corners
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let eps = scale * 1e-12;

    let mut polygons = Vec::with_capacity(generators.len());
    for (i, &gi) in generators.iter().enumerate() {
        let mut ring: Vec<Point2> = corners.to_vec();
        for (j, &gj) in generators.iter().enumerate() {
            if i == j {
                continue;
            }
            // Keep the side of the bisector containing the generator:
            // (gj - gi) . p <= (gj - gi) . midpoint.
            let nx = gj.x - gi.x;
            let ny = gj.y - gi.y;
            let c = nx * (gi.x + gj.x) / 2.0 + ny * (gi.y + gj.y) / 2.0;
            ring = clip_halfplane(&ring, nx, ny, c);
            if ring.len() < 3 {
                break;
            }
        }
        let mut ring = dedup_ring(ring, eps);
        if ring.len() < 3 {
            return Err(Error::Invariant(format!(
                "cell {i} produced a degenerate Voronoi polygon"
            )));
        }
        ring = ring.into_iter().map(to_native).collect();
        ring.push(ring[0]);
        polygons.push(VoronoiPolygon { cell_id: i, ring });
    }
    Ok(polygons)
}

/// Point-in-convex-polygon test against a closed counter-clockwise ring.
/// Boundary points count as inside.
pub fn ring_contains(ring: &[Point2], p: Point2) -> bool {
    if ring.len() < 4 {
        return false;
    }
    let scale = ring
        .iter()
        .map(|v| v.x.abs().max(v.y.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let eps = scale * scale * 1e-14;
    for w in ring.windows(2) {
        let cross = (w[1].x - w[0].x) * (p.y - w[0].y) - (w[1].y - w[0].y) * (p.x - w[0].x);
        if cross < -eps {
            return false;
        }
    }
    true
}

/// Writes polygons and centroids as one GeoJSON FeatureCollection; every
/// feature carries a `cell_id` property.
pub fn write_geojson<W: Write>(
    cells: &CellSet,
    polygons: &[VoronoiPolygon],
    mut out: W,
) -> Result<()> {
    use serde_json::{json, Value};
    let mut features: Vec<Value> = Vec::with_capacity(polygons.len() + cells.len());
    for poly in polygons {
        let coords: Vec<[f64; 2]> = poly.ring.iter().map(|p| [p.x, p.y]).collect();
        features.push(json!({
            "type": "Feature",
            "properties": { "cell_id": poly.cell_id, "kind": "cell_polygon" },
            "geometry": { "type": "Polygon", "coordinates": [coords] }
        }));
    }
    for cell in &cells.cells {
        features.push(json!({
            "type": "Feature",
            "properties": {
                "cell_id": cell.id,
                "kind": "cell_centroid",
                "member_count": cell.member_count
            },
            "geometry": { "type": "Point", "coordinates": [cell.centroid.x, cell.centroid.y] }
        }));
    }
    let collection = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_writer(&mut out, &collection)
        .map_err(|e| Error::Input(format!("cannot serialize GeoJSON: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Cell;

    fn cellset(centroids: &[(f64, f64)]) -> CellSet {
        CellSet {
            cells: centroids
                .iter()
                .enumerate()
                .map(|(id, &(x, y))| Cell {
                    id,
                    centroid: Point2::new(x, y),
                    member_count: 1,
                })
                .collect(),
            gamma_m: 1.0,
            crs: Crs::PlanarMeters,
        }
    }

    fn unit_bbox() -> BBox {
        BBox { min_x: 0.0, min_y: 0.0, max_x: 10.0, max_y: 10.0 }
    }

    #[test]
    fn single_generator_owns_whole_bbox() {
        let cells = cellset(&[(4.0, 4.0)]);
        let polys = build_voronoi(&cells, unit_bbox()).unwrap();
        assert_eq!(polys.len(), 1);
        let ring = &polys[0].ring;
        assert_eq!(ring.first(), ring.last());
        assert_eq!(ring.len(), 5);
        let area = ring_area(ring);
        assert!((area - 100.0).abs() < 1e-9, "area {area}");
    }

    #[test]
    fn two_generators_split_by_bisector() {
        let cells = cellset(&[(2.0, 5.0), (8.0, 5.0)]);
        let polys = build_voronoi(&cells, unit_bbox()).unwrap();
        assert_eq!(polys.len(), 2);
        // The shared edge is the vertical line x = 5.
        for poly in &polys {
            for v in &poly.ring {
                if poly.cell_id == 0 {
                    assert!(v.x <= 5.0 + 1e-9);
                } else {
                    assert!(v.x >= 5.0 - 1e-9);
                }
            }
            assert!((ring_area(&poly.ring) - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_generators_make_slabs() {
        let cells = cellset(&[(5.0, 2.0), (5.0, 5.0), (5.0, 8.0)]);
        let polys = build_voronoi(&cells, unit_bbox()).unwrap();
        assert_eq!(polys.len(), 3);
        let total: f64 = polys.iter().map(|p| ring_area(&p.ring)).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn polygons_contain_their_generators() {
        let cells = cellset(&[(1.0, 1.0), (9.0, 2.0), (4.0, 8.0), (6.0, 5.0)]);
        let polys = build_voronoi(&cells, unit_bbox()).unwrap();
        for poly in &polys {
            assert!(ring_contains(&poly.ring, cells.cells[poly.cell_id].centroid));
        }
    }

    #[test]
    fn duplicate_centroids_rejected() {
        let cells = cellset(&[(1.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(build_voronoi(&cells, unit_bbox()), Err(Error::Config(_))));
    }

    #[test]
    fn geojson_has_one_feature_per_polygon_and_centroid() {
        let cells = cellset(&[(2.0, 5.0), (8.0, 5.0)]);
        let polys = build_voronoi(&cells, unit_bbox()).unwrap();
        let mut buf = Vec::new();
        write_geojson(&cells, &polys, &mut buf).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(value["features"].as_array().unwrap().len(), 4);
    }

    fn ring_area(ring: &[Point2]) -> f64 {
        let mut acc = 0.0;
        for w in ring.windows(2) {
            acc += w[0].x * w[1].y - w[1].x * w[0].y;
        }
        acc / 2.0
    }
}
