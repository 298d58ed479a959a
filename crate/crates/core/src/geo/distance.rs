use alloc::vec::Vec;

use super::{BBox, Geometry, Point, Polygon};

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

const DEG: f64 = core::f64::consts::PI / 180.0;
/// Collinearity slack for boundary tests, in degrees.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Projection {
    lon0: f64,
    lat0: f64,
    kx: f64,
    ky: f64,
}

type Xy = (f64, f64);

impl Projection {
    fn centered(a: &BBox, b: &BBox) -> Self {
        let (ca, cb) = (a.center(), b.center());
        let lat0 = (ca.lat + cb.lat) / 2.0;
        let lon0 = (ca.lon + cb.lon) / 2.0;
        Projection {
            lon0,
            lat0,
            kx: EARTH_RADIUS_M * DEG * libm::cos(lat0 * DEG),
            ky: EARTH_RADIUS_M * DEG,
        }
    }

    fn xy(&self, p: &Point) -> Xy {
        ((p.lon - self.lon0) * self.kx, (p.lat - self.lat0) * self.ky)
    }
}

fn hypot(dx: f64, dy: f64) -> f64 {
    libm::hypot(dx, dy)
}

fn point_segment(p: Xy, a: Xy, b: Xy) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return hypot(p.0 - a.0, p.1 - a.1);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    hypot(p.0 - (a.0 + t * dx), p.1 - (a.1 + t * dy))
}

fn orient(a: Xy, b: Xy, c: Xy) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: Xy, b: Xy, p: Xy) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_cross(p1: Xy, p2: Xy, q1: Xy, q2: Xy) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Vertices and edges of a geometry in projected meters.
struct Parts {
    points: Vec<Xy>,
    segments: Vec<(Xy, Xy)>,
}

fn parts(g: &Geometry, proj: &Projection) -> Parts {
    let mut segments = Vec::new();
    let points: Vec<Xy> = g.vertices().map(|p| proj.xy(p)).collect();
    match g {
        Geometry::Point(_) => {}
        Geometry::Polyline(v) => {
            for w in v.windows(2) {
                segments.push((proj.xy(&w[0]), proj.xy(&w[1])));
            }
        }
        Geometry::Polygon(poly) => {
            for ring in poly.rings() {
                for w in ring.windows(2) {
                    segments.push((proj.xy(&w[0]), proj.xy(&w[1])));
                }
            }
        }
    }
    Parts { points, segments }
}

fn any_vertex_inside(g: &Geometry, area: &Geometry) -> bool {
    match area {
        Geometry::Polygon(poly) => g.vertices().any(|p| point_in_polygon(*p, poly)),
        _ => false,
    }
}

/// Minimum separation in meters between two geometries; 0 when they touch,
/// cross, or one contains the other. Symmetric.
pub fn min_distance_m(a: &Geometry, b: &Geometry) -> f64 {
    if let (Geometry::Point(p), Geometry::Point(q)) = (a, b) {
        if p == q {
            return 0.0;
        }
    }
    if any_vertex_inside(b, a) || any_vertex_inside(a, b) {
        return 0.0;
    }
    let proj = Projection::centered(&a.bbox(), &b.bbox());
    let pa = parts(a, &proj);
    let pb = parts(b, &proj);

    for &(p1, p2) in &pa.segments {
        for &(q1, q2) in &pb.segments {
            if segments_cross(p1, p2, q1, q2) {
                return 0.0;
            }
        }
    }

    let mut best = f64::INFINITY;
    let mut vertex_to = |pts: &[Xy], other: &Parts| {
        for &p in pts {
            if other.segments.is_empty() {
                for &q in &other.points {
                    best = best.min(hypot(p.0 - q.0, p.1 - q.1));
                }
            } else {
                for &(q1, q2) in &other.segments {
                    best = best.min(point_segment(p, q1, q2));
                }
            }
        }
    };
    vertex_to(&pa.points, &pb);
    vertex_to(&pb.points, &pa);
    best
}

/// True when the geometries share at least one point.
pub fn intersects(a: &Geometry, b: &Geometry) -> bool {
    min_distance_m(a, b) == 0.0
}

/// True when `outer` (a polygon) contains every vertex of `inner`.
pub fn contains(outer: &Geometry, inner: &Geometry) -> bool {
    match outer {
        Geometry::Polygon(poly) => inner.vertices().all(|p| point_in_polygon(*p, poly)),
        _ => false,
    }
}

fn on_ring_boundary(p: Point, ring: &[Point]) -> bool {
    ring.windows(2).any(|w| {
        let (a, b) = (w[0], w[1]);
        let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
        let len = libm::hypot(b.lon - a.lon, b.lat - a.lat);
        libm::fabs(cross) <= BOUNDARY_EPS * len.max(1.0)
            && p.lon >= a.lon.min(b.lon) - BOUNDARY_EPS
            && p.lon <= a.lon.max(b.lon) + BOUNDARY_EPS
            && p.lat >= a.lat.min(b.lat) - BOUNDARY_EPS
            && p.lat <= a.lat.max(b.lat) + BOUNDARY_EPS
    })
}

/// Even-odd ray casting.
fn ring_contains(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd containment; points on any ring boundary count as inside,
/// points strictly inside a hole do not.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    if poly.rings().any(|r| on_ring_boundary(p, r)) {
        return true;
    }
    ring_contains(&poly.exterior, p) && !poly.holes.iter().any(|h| ring_contains(h, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(lon: f64, lat: f64) -> Geometry {
        Geometry::Point(Point::new(lon, lat))
    }

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point> {
        vec![
            Point::new(x0, y0),
            Point::new(x0 + s, y0),
            Point::new(x0 + s, y0 + s),
            Point::new(x0, y0 + s),
            Point::new(x0, y0),
        ]
    }

    /// Great-circle oracle, independent of the projection code path.
    fn haversine(a: Point, b: Point) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dp = p2 - p1;
        let dl = (b.lon - a.lon).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    #[test]
    fn identical_points() {
        assert_eq!(min_distance_m(&pt(-72.5, 42.3), &pt(-72.5, 42.3)), 0.0);
    }

    #[test]
    fn north_south_kilometre() {
        let a = Point::new(-72.5199, 42.3732);
        let b = Point::new(-72.5199, 42.3822);
        let oracle = haversine(a, b);
        assert!((oracle - 1000.8).abs() < 0.1, "oracle {oracle}");
        let d = min_distance_m(&Geometry::Point(a), &Geometry::Point(b));
        assert!((d - oracle).abs() / oracle < 0.005, "{d} vs {oracle}");
    }

    #[test]
    fn point_inside_polygon_is_zero() {
        let poly = Geometry::Polygon(Polygon::new(square(-72.6, 42.3, 0.1), vec![]));
        assert_eq!(min_distance_m(&pt(-72.55, 42.35), &poly), 0.0);
        assert_eq!(min_distance_m(&poly, &pt(-72.55, 42.35)), 0.0);
    }

    #[test]
    fn point_outside_polygon_measures_to_boundary() {
        let poly = Geometry::Polygon(Polygon::new(square(0.0, 0.0, 0.01), vec![]));
        let d = min_distance_m(&pt(0.005, 0.02), &poly);
        let oracle = haversine(Point::new(0.005, 0.02), Point::new(0.005, 0.01));
        assert!((d - oracle).abs() / oracle < 0.005);
    }

    #[test]
    fn crossing_lines_touch() {
        let a = Geometry::Polyline(vec![Point::new(0.0, 0.0), Point::new(0.01, 0.01)]);
        let b = Geometry::Polyline(vec![Point::new(0.0, 0.01), Point::new(0.01, 0.0)]);
        assert_eq!(min_distance_m(&a, &b), 0.0);
        assert!(intersects(&a, &b));
    }

    #[test]
    fn point_to_line_distance() {
        let line = Geometry::Polyline(vec![Point::new(0.0, 0.0), Point::new(0.01, 0.0)]);
        let p = Point::new(0.005, 0.001);
        let d = min_distance_m(&Geometry::Point(p), &line);
        let oracle = haversine(p, Point::new(0.005, 0.0));
        assert!((d - oracle).abs() / oracle < 0.005);
    }

    #[test]
    fn convex_centroid_inside() {
        let poly = Polygon::new(square(-71.1, 42.2, 0.05), vec![]);
        assert!(point_in_polygon(poly.centroid(), &poly));
    }

    #[test]
    fn outside_bbox_is_outside() {
        let poly = Polygon::new(square(-71.1, 42.2, 0.05), vec![]);
        assert!(!point_in_polygon(Point::new(-70.0, 42.2), &poly));
    }

    #[test]
    fn donut_hole_excluded_boundary_included() {
        let poly = Polygon::new(square(0.0, 0.0, 1.0), vec![square(0.25, 0.25, 0.5)]);
        assert!(!point_in_polygon(Point::new(0.5, 0.5), &poly));
        assert!(point_in_polygon(Point::new(0.1, 0.5), &poly));
        assert!(point_in_polygon(Point::new(0.0, 0.5), &poly));
        assert!(point_in_polygon(Point::new(0.25, 0.5), &poly));
        let d = min_distance_m(&Geometry::Point(Point::new(0.5, 0.5)), &Geometry::Polygon(poly));
        assert!(d > 0.0);
    }

    #[test]
    fn containment_direction() {
        let poly = Geometry::Polygon(Polygon::new(square(0.0, 0.0, 1.0), vec![]));
        assert!(contains(&poly, &pt(0.5, 0.5)));
        assert!(!contains(&pt(0.5, 0.5), &poly));
        let small = Geometry::Polygon(Polygon::new(square(0.2, 0.2, 0.1), vec![]));
        assert!(contains(&poly, &small));
        assert!(!contains(&small, &poly));
    }
}
