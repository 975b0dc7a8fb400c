//! Coordinate handling shared by every distance-parameterized operation.
//!
//! Two reference systems are supported: planar meters (distances are
//! Euclidean) and geographic degrees (distances are great-circle). Voronoi
//! construction in geographic mode runs on a local equirectangular
//! projection centered on the data; see [`LocalProjection`].

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Coordinate reference system of the input data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crs {
    /// x/y are meters in some planar projection.
    #[serde(rename = "planar-meters")]
    PlanarMeters,
    /// x is longitude, y is latitude, both in degrees.
    #[serde(rename = "geographic-degrees")]
    GeographicDegrees,
}

impl Crs {
    /// Distance between two points in meters under this CRS.
    pub fn distance_m(self, a: Point2, b: Point2) -> f64 {
        match self {
            Crs::PlanarMeters => euclidean(a, b),
            Crs::GeographicDegrees => haversine_m(a, b),
        }
    }
}

pub fn euclidean(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Great-circle distance in meters; inputs are (lon, lat) in degrees.
pub fn haversine_m(a: Point2, b: Point2) -> f64 {
    let lat1 = a.y.to_radians();
    let lat2 = b.y.to_radians();
    let dlat = (b.y - a.y).to_radians();
    let dlon = (b.x - a.x).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().min(1.0).asin()
}

/// Axis-aligned bounding box in the dataset's native coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn from_points<I: IntoIterator<Item = Point2>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bbox = BBox {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in it {
            bbox.min_x = bbox.min_x.min(p.x);
            bbox.min_y = bbox.min_y.min(p.y);
            bbox.max_x = bbox.max_x.max(p.x);
            bbox.max_y = bbox.max_y.max(p.y);
        }
        Some(bbox)
    }

    pub fn expanded(self, margin: f64) -> Self {
        BBox {
            min_x: self.min_x - margin,
            min_y: self.min_y - margin,
            max_x: self.max_x + margin,
            max_y: self.max_y + margin,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.min_x, self.min_y),
            Point2::new(self.max_x, self.min_y),
            Point2::new(self.max_x, self.max_y),
            Point2::new(self.min_x, self.max_y),
        ]
    }
}

/// Equirectangular projection about a reference point, used to compute
/// Voronoi polygons for geographic data at city extent.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    lon0: f64,
    lat0: f64,
    kx: f64,
    ky: f64,
}

impl LocalProjection {
    pub fn centered_on(lon0: f64, lat0: f64) -> Self {
        let ky = EARTH_RADIUS_M.to_radians();
        LocalProjection {
            lon0,
            lat0,
            kx: ky * lat0.to_radians().cos(),
            ky,
        }
    }

    pub fn to_local(&self, p: Point2) -> Point2 {
        Point2::new((p.x - self.lon0) * self.kx, (p.y - self.lat0) * self.ky)
    }

    pub fn to_geo(&self, p: Point2) -> Point2 {
        Point2::new(p.x / self.kx + self.lon0, p.y / self.ky + self.lat0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_345() {
        let d = Crs::PlanarMeters.distance_m(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0));
        assert_eq!(d, 5.0);
    }

    #[test]
    fn haversine_equator_degree() {
        // One degree of longitude at the equator is ~111.19 km.
        let d = haversine_m(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        assert!((d - 111_195.0).abs() < 50.0, "got {d}");
    }

    #[test]
    fn projection_roundtrip() {
        let proj = LocalProjection::centered_on(153.0, -27.5);
        let p = Point2::new(153.1, -27.4);
        let q = proj.to_geo(proj.to_local(p));
        assert!((q.x - p.x).abs() < 1e-12 && (q.y - p.y).abs() < 1e-12);
    }

    #[test]
    fn bbox_expand_contains() {
        let b = BBox::from_points([Point2::new(0.0, 0.0), Point2::new(2.0, 3.0)]).unwrap();
        assert!(b.contains(Point2::new(1.0, 1.0)));
        assert!(!b.contains(Point2::new(-0.1, 0.0)));
        assert!(b.expanded(0.5).contains(Point2::new(-0.4, 3.4)));
    }
}
