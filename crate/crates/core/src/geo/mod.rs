//! WGS84 geometries and the predicates the executor needs.
//!
//! Coordinates are longitude/latitude degrees. Distances are computed on a
//! local equirectangular projection centred between the two operands, which
//! is accurate to well under 0.5% at municipal scales.

mod distance;
mod index;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::GeometryKind;

pub use distance::{
    contains, intersects, min_distance_m, point_in_polygon, EARTH_RADIUS_M,
};
pub use index::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
}

impl Point {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Point { lon, lat }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lon, self.lat].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lon, lat] = <[f64; 2]>::deserialize(d)?;
        Ok(Point { lon, lat })
    }
}

/// Outer ring plus optional holes; every ring is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<Point>>", into = "Vec<Vec<Point>>")]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Self {
        Polygon { exterior, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        core::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    /// Area-weighted centroid of the outer ring (planar, in degrees).
    pub fn centroid(&self) -> Point {
        let ring = &self.exterior;
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for w in ring.windows(2) {
            let cross = w[0].lon * w[1].lat - w[1].lon * w[0].lat;
            a += cross;
            cx += (w[0].lon + w[1].lon) * cross;
            cy += (w[0].lat + w[1].lat) * cross;
        }
        if a == 0.0 {
            return ring[0];
        }
        Point::new(cx / (3.0 * a), cy / (3.0 * a))
    }
}

impl From<Vec<Vec<Point>>> for Polygon {
    fn from(mut rings: Vec<Vec<Point>>) -> Self {
        if rings.is_empty() {
            return Polygon::new(Vec::new(), Vec::new());
        }
        let exterior = rings.remove(0);
        Polygon::new(exterior, rings)
    }
}

impl From<Polygon> for Vec<Vec<Point>> {
    fn from(p: Polygon) -> Self {
        let mut v = Vec::with_capacity(1 + p.holes.len());
        v.push(p.exterior);
        v.extend(p.holes);
        v
    }
}

/// GeoJSON-shaped geometry: `{"type": "Point", "coordinates": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
pub enum Geometry {
    Point(Point),
    #[serde(rename = "LineString")]
    Polyline(Vec<Point>),
    Polygon(Polygon),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("coordinate ({lon}, {lat}) outside WGS84 range")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("polyline needs at least 2 vertices, got {0}")]
    ShortPolyline(usize),
    #[error("polygon ring needs at least 4 vertices, got {0}")]
    ShortRing(usize),
    #[error("polygon ring is not closed")]
    OpenRing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Option<BBox> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for p in it {
            b.min.lon = b.min.lon.min(p.lon);
            b.min.lat = b.min.lat.min(p.lat);
            b.max.lon = b.max.lon.max(p.lon);
            b.max.lat = b.max.lat.max(p.lat);
        }
        Some(b)
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.min.lon + self.max.lon) / 2.0,
            (self.min.lat + self.max.lat) / 2.0,
        )
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox {
            min: Point::new(self.min.lon.min(o.min.lon), self.min.lat.min(o.min.lat)),
            max: Point::new(self.max.lon.max(o.max.lon), self.max.lat.max(o.max.lat)),
        }
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.lon >= self.min.lon && p.lon <= self.max.lon && p.lat >= self.min.lat && p.lat <= self.max.lat
    }
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Point(_) => GeometryKind::Point,
            Geometry::Polyline(_) => GeometryKind::Polyline,
            Geometry::Polygon(_) => GeometryKind::Polygon,
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Point> {
        let (single, line, poly): (Option<&Point>, &[Point], Option<&Polygon>) = match self {
            Geometry::Point(p) => (Some(p), &[], None),
            Geometry::Polyline(v) => (None, v, None),
            Geometry::Polygon(p) => (None, &[], Some(p)),
        };
        single
            .into_iter()
            .chain(line.iter())
            .chain(poly.into_iter().flat_map(|p| p.rings().flatten()))
    }

    pub fn bbox(&self) -> BBox {
        BBox::of_points(self.vertices()).expect("validated geometry has vertices")
    }

    /// A representative point: the point itself, the middle vertex of a
    /// line, or the centroid of a polygon.
    pub fn anchor_point(&self) -> Point {
        match self {
            Geometry::Point(p) => *p,
            Geometry::Polyline(v) => v[v.len() / 2],
            Geometry::Polygon(p) => p.centroid(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for p in self.vertices() {
            if !(p.lon.is_finite()
                && p.lat.is_finite()
                && (-180.0..=180.0).contains(&p.lon)
                && (-90.0..=90.0).contains(&p.lat))
            {
                return Err(GeometryError::OutOfRange {
                    lon: p.lon,
                    lat: p.lat,
                });
            }
        }
        match self {
            Geometry::Point(_) => Ok(()),
            Geometry::Polyline(v) if v.len() < 2 => Err(GeometryError::ShortPolyline(v.len())),
            Geometry::Polyline(_) => Ok(()),
            Geometry::Polygon(p) => {
                for ring in p.rings() {
                    if ring.len() < 4 {
                        return Err(GeometryError::ShortRing(ring.len()));
                    }
                    if ring.first() != ring.last() {
                        return Err(GeometryError::OpenRing);
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.lon, self.lat)
    }
}
