//! Deterministic synthetic municipality for tests, demos and the benchmark
//! harness.
//!
//! Towns tile a small lattice near (-71.1, 42.2). A grid of streets spans
//! all towns; roads are its block segments. Bus stops and crosswalks sit at
//! street intersections, schools are scattered inside towns, and crashes
//! cluster along roads (inheriting the nearby road's attributes) with the
//! remainder spread uniformly. Attribute values are drawn from the
//! registry's canonical lists, so any registry with the standard entities
//! works.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{point_in_polygon, Geometry, Point, Polygon, EARTH_RADIUS_M};
use crate::repair::{GazetteerEntry, GazetteerSource};
use crate::schema::{EntitySpec, FieldSpec, Scalar, SchemaRegistry, ValueKind};
use crate::store::{Dataset, EntityRecord, IngestError};

pub const TOWN_NAMES: [&str; 4] = ["Quincy", "Amherst", "Boston", "Brockton"];

const ORIGIN: Point = Point::new(-71.10, 42.20);
const CELL_LON: f64 = 0.06;
const CELL_LAT: f64 = 0.045;

const EAST_WEST: [&str; 12] = [
    "Palmer St", "Main St", "Elm St", "Pleasant St", "Union St", "High St", "School St",
    "Church St", "Water St", "Summer St", "Winter St", "Washington St",
];
const NORTH_SOUTH: [&str; 12] = [
    "Brockton Ave", "Maple Ave", "Oak Ave", "Hancock Ave", "Adams Ave", "Centre Ave",
    "Franklin Ave", "Belmont Ave", "Walnut Ave", "Chestnut Ave", "Cedar Ave", "Park Ave",
];
const SCHOOL_PATRONS: [&str; 12] = [
    "Lincoln", "Adams", "Franklin", "Hancock", "Revere", "Emerson", "Thoreau", "Alcott",
    "Whittier", "Longfellow", "Dickinson", "Bradford",
];
const SCHOOL_KINDS: [&str; 3] = ["Elementary School", "Middle School", "Academy"];

/// Record counts per entity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    /// 2 to 4; the first towns in [`TOWN_NAMES`] are used.
    pub towns: usize,
    pub roads: usize,
    pub schools: usize,
    pub bus_stops: usize,
    pub crosswalks: usize,
    pub crashes: usize,
    /// Share of crashes placed near a road, 0 to 1.
    pub clustering: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            towns: 4,
            roads: 120,
            schools: 24,
            bus_stops: 80,
            crosswalks: 60,
            crashes: 4000,
            clustering: 0.7,
        }
    }
}

impl FixtureSpec {
    /// Default layout with at most 1,500 crashes, for brute-force checks.
    pub fn small() -> Self {
        FixtureSpec {
            crashes: 1500,
            ..FixtureSpec::default()
        }
    }
}

/// A generated dataset plus named places that are not records.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub dataset: Dataset,
    pub places: Vec<GazetteerEntry>,
    pub seed: u64,
}

fn m_to_dlat(m: f64) -> f64 {
    m / (EARTH_RADIUS_M * core::f64::consts::PI / 180.0)
}

fn m_to_dlon(m: f64, lat: f64) -> f64 {
    m_to_dlat(m) / libm::cos(lat.to_radians())
}

fn round7(p: Point) -> Point {
    let r = |x: f64| libm::round(x * 1e7) / 1e7;
    Point::new(r(p.lon), r(p.lat))
}

fn weight(value: &str) -> f64 {
    match value {
        "Collision with motor vehicle in traffic" => 40.0,
        "Collision with fixed object" => 10.0,
        "Collision with pedestrian" => 8.0,
        "Collision with cyclist" => 5.0,
        "Property damage only (none injured)" => 65.0,
        "Non-fatal injury" => 28.0,
        "Fatal injury" => 1.5,
        "yes" => 55.0,
        "no" => 35.0,
        "Not at junction" => 45.0,
        "Four-way intersection" | "T-intersection" => 15.0,
        "Unknown" | "unknown" => 5.0,
        _ => 1.0,
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Value for one field, or None for a null.
    fn value(&mut self, f: &FieldSpec) -> Option<Scalar> {
        if f.nullable && self.unit() < 0.03 {
            return None;
        }
        Some(match f.kind {
            ValueKind::Categorical => {
                let values = f.values.as_deref().unwrap_or_default();
                let w: Vec<f64> = values.iter().map(|v| weight(v)).collect();
                let i = WeightedIndex::new(&w).map(|d| d.sample(&mut self.rng)).ok()?;
                Scalar::Text(values[i].clone())
            }
            ValueKind::Numeric if f.name.contains("speed") => {
                let speeds = [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 55.0];
                let w = [1.0, 4.0, 5.0, 3.0, 2.0, 1.5, 0.5];
                let d = WeightedIndex::new(w).expect("weights are positive");
                Scalar::Number(speeds[d.sample(&mut self.rng)])
            }
            ValueKind::Numeric => Scalar::Number(libm::round(self.range(0.0, 100.0))),
            ValueKind::Date => {
                let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
                let day = self.rng.random_range(0..1827u64);
                Scalar::Text(
                    start
                        .checked_add_days(Days::new(day))
                        .expect("in range")
                        .format("%Y-%m-%d")
                        .to_string(),
                )
            }
            ValueKind::TimeOfDay => {
                // morning and evening peaks over a flat base
                let m = match self.rng.random_range(0..4u8) {
                    0 => self.range(420.0, 600.0),
                    1 => self.range(900.0, 1140.0),
                    _ => self.range(0.0, 1440.0),
                };
                Scalar::Number(libm::floor(m).min(1439.0))
            }
            ValueKind::Text => return None,
        })
    }

    /// Sets both sidewalk sides together, since a street usually has
    /// sidewalks on both sides or on neither.
    fn sidewalks(&mut self, r: EntityRecord, spec: Option<&EntitySpec>) -> EntityRecord {
        let has = |name: &str| {
            spec.and_then(|s| s.field(name))
                .and_then(|f| f.values.as_ref())
                .is_some_and(|v| v.iter().any(|x| x == "yes") && v.iter().any(|x| x == "no"))
        };
        if !(has("sidewalk_left") && has("sidewalk_right")) {
            return r;
        }
        let profiles = [("yes", "yes"), ("no", "no"), ("yes", "no"), ("no", "yes")];
        let d = WeightedIndex::new([45.0, 35.0, 10.0, 10.0]).expect("weights are positive");
        let (left, right) = profiles[d.sample(&mut self.rng)];
        r.with("sidewalk_left", left).with("sidewalk_right", right)
    }

    /// Fills every field of `spec` not already set. Text fields take
    /// `text(field)`.
    fn fill(&mut self, mut r: EntityRecord, spec: Option<&EntitySpec>, text: impl Fn(&str) -> String) -> EntityRecord {
        let Some(spec) = spec else { return r };
        for f in &spec.fields {
            if r.attributes.contains_key(&f.name) {
                continue;
            }
            let v = match f.kind {
                ValueKind::Text => Some(Scalar::Text(text(&f.name))),
                _ => self.value(f),
            };
            r.attributes.insert(f.name.clone(), v);
        }
        r
    }
}

struct Layout {
    cols: usize,
    rows: usize,
    /// Half-cell node lattice, (2*cols+1) x (2*rows+1), row-major from the
    /// south-west corner.
    nodes: Vec<Point>,
}

impl Layout {
    fn node(&self, i: usize, j: usize) -> Point {
        self.nodes[j * (2 * self.cols + 1) + i]
    }

    fn town_ring(&self, c: usize, r: usize) -> Vec<Point> {
        let (i, j) = (2 * c, 2 * r);
        let ring = [
            (0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1), (0, 0),
        ];
        ring.iter()
            .map(|&(di, dj)| round7(self.node(i + di, j + dj)))
            .collect()
    }

    fn extent(&self) -> (Point, Point) {
        (
            ORIGIN,
            Point::new(
                ORIGIN.lon + CELL_LON * self.cols as f64,
                ORIGIN.lat + CELL_LAT * self.rows as f64,
            ),
        )
    }
}

fn layout(g: &mut Gen, towns: usize) -> Layout {
    let (cols, rows) = if towns >= 4 { (2, 2) } else { (towns, 1) };
    let (ni, nj) = (2 * cols + 1, 2 * rows + 1);
    let mut nodes = Vec::with_capacity(ni * nj);
    for j in 0..nj {
        for i in 0..ni {
            let mut p = Point::new(
                ORIGIN.lon + CELL_LON * 0.5 * i as f64,
                ORIGIN.lat + CELL_LAT * 0.5 * j as f64,
            );
            let interior = i > 0 && j > 0 && i < ni - 1 && j < nj - 1;
            if interior {
                p.lon += g.range(-0.2, 0.2) * CELL_LON * 0.5;
                p.lat += g.range(-0.2, 0.2) * CELL_LAT * 0.5;
            }
            nodes.push(p);
        }
    }
    Layout { cols, rows, nodes }
}

fn street_name(names: &[&str], i: usize) -> String {
    names
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("Street {}", i + 1))
}

fn point_in_any(p: Point, towns: &[(String, Polygon)]) -> bool {
    towns.iter().any(|(_, poly)| point_in_polygon(p, poly))
}

/// Builds the fixture. Identical seed and spec give an identical dataset.
pub fn generate_fixture(
    seed: u64,
    spec: FixtureSpec,
    registry: &SchemaRegistry,
) -> Result<Fixture, IngestError> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let n_towns = spec.towns.clamp(2, 4);
    let lay = layout(&mut g, n_towns);
    let (lo, hi) = lay.extent();

    let mut towns: Vec<(String, Polygon)> = Vec::new();
    for (t, name) in TOWN_NAMES.iter().take(n_towns).enumerate() {
        let (c, r) = (t % lay.cols, t / lay.cols);
        towns.push((
            name.to_string(),
            Polygon::new(lay.town_ring(c, r), vec![]),
        ));
    }
    let town_spec = registry.entity("Town");
    let town_records: Vec<EntityRecord> = towns
        .iter()
        .enumerate()
        .map(|(i, (name, poly))| {
            let r = EntityRecord::new(&format!("town-{:02}", i + 1), "Town", Geometry::Polygon(poly.clone()))
                .with("name", name.as_str());
            g.fill(r, town_spec, |_| name.clone())
        })
        .collect();

    // street grid
    let mut k = 2usize;
    while 2 * k * (k - 1) < spec.roads {
        k += 1;
    }
    let inset_lon = (hi.lon - lo.lon) / (k as f64 * 2.0);
    let inset_lat = (hi.lat - lo.lat) / (k as f64 * 2.0);
    let mut xs = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            let lon = lo.lon + inset_lon + (hi.lon - lo.lon - 2.0 * inset_lon) * i as f64 / (k - 1) as f64;
            let lat = lo.lat + inset_lat + (hi.lat - lo.lat - 2.0 * inset_lat) * j as f64 / (k - 1) as f64;
            let p = Point::new(
                lon + g.range(-0.05, 0.05) * inset_lon,
                lat + g.range(-0.05, 0.05) * inset_lat,
            );
            xs.push(round7(p));
        }
    }
    let at = |i: usize, j: usize| xs[j * k + i];
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for j in 0..k {
        for i in 0..k - 1 {
            segments.push((at(i, j), at(i + 1, j)));
            segments.push((at(j, i), at(j, i + 1)));
        }
    }
    let mut keep: Vec<usize> = (0..segments.len()).collect();
    keep.shuffle(&mut g.rng);
    keep.truncate(spec.roads);
    keep.sort_unstable();
    let road_spec = registry.entity("Road");
    let roads: Vec<EntityRecord> = keep
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            let (a, b) = segments[s];
            let id = format!("road-{:04}", n + 1);
            let r = EntityRecord::new(&id, "Road", Geometry::Polyline(vec![a, b]));
            let r = g.sidewalks(r, road_spec);
            g.fill(r, road_spec, |_| id.clone())
        })
        .collect();

    // bus stops at intersections, starting from the south-west corner
    let mut corners: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..k).map(move |i| (i, j))).collect();
    corners[1..].shuffle(&mut g.rng);
    let stop_spec = registry.entity("BusStop");
    let mut stops = Vec::new();
    for n in 0..spec.bus_stops {
        let (i, j) = corners[n % corners.len()];
        let round = n / corners.len();
        let name = if round == 0 {
            format!("{} @ {}", street_name(&EAST_WEST, j), street_name(&NORTH_SOUTH, i))
        } else {
            format!("{} @ {} ({})", street_name(&EAST_WEST, j), street_name(&NORTH_SOUTH, i), round + 1)
        };
        let mut p = at(i, j);
        p.lat += m_to_dlat(8.0 * round as f64);
        let id = format!("busstop-{:03}", n + 1);
        let r = EntityRecord::new(&id, "BusStop", Geometry::Point(round7(p)));
        let stop_code = format!("BS-{:04}", n + 1);
        stops.push(g.fill(r, stop_spec, |f| {
            if f.contains("name") {
                name.clone()
            } else {
                stop_code.clone()
            }
        }));
    }

    // crosswalks: 12 m squares beside intersections
    let cw_spec = registry.entity("Crosswalk");
    let mut crosswalks = Vec::new();
    for n in 0..spec.crosswalks {
        let (i, j) = corners[(n * 7 + 3) % corners.len()];
        let c = at(i, j);
        let quadrant = (n / corners.len()) % 4;
        let (sx, sy) = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)][quadrant];
        let (dx, dy) = (m_to_dlon(12.0, c.lat) * sx, m_to_dlat(12.0) * sy);
        let ring = vec![
            c,
            Point::new(c.lon + dx, c.lat),
            Point::new(c.lon + dx, c.lat + dy),
            Point::new(c.lon, c.lat + dy),
            c,
        ]
        .into_iter()
        .map(round7)
        .collect();
        let ring = if sx * sy < 0.0 {
            let mut r: Vec<Point> = ring;
            r.reverse();
            r
        } else {
            ring
        };
        let id = format!("crosswalk-{:03}", n + 1);
        let r = EntityRecord::new(&id, "Crosswalk", Geometry::Polygon(Polygon::new(ring, vec![])));
        crosswalks.push(g.fill(r, cw_spec, |_| id.clone()));
    }

    // schools
    let mut names: Vec<(String, Option<usize>)> = vec![
        ("Quincy High School".into(), Some(0)),
        ("Amherst Regional High School".into(), Some(1)),
        ("Main School".into(), Some(0)),
        ("Main School".into(), Some(2 % n_towns)),
    ];
    let mut generated: Vec<String> = SCHOOL_PATRONS
        .iter()
        .flat_map(|p| SCHOOL_KINDS.iter().map(move |k| format!("{p} {k}")))
        .collect();
    generated.shuffle(&mut g.rng);
    names.extend(generated.into_iter().map(|n| (n, None)));
    let school_spec = registry.entity("School");
    let mut schools = Vec::new();
    for n in 0..spec.schools {
        let (name, town) = names
            .get(n)
            .cloned()
            .unwrap_or_else(|| (format!("School {}", n + 1), None));
        let t = town.unwrap_or_else(|| g.rng.random_range(0..n_towns));
        let poly = &towns[t].1;
        let p = loop {
            let p = round7(Point::new(
                g.range(ORIGIN.lon, hi.lon),
                g.range(ORIGIN.lat, hi.lat),
            ));
            if point_in_polygon(p, poly) {
                break p;
            }
        };
        let id = format!("school-{:03}", n + 1);
        let r = EntityRecord::new(&id, "School", Geometry::Point(p)).with("name", name.as_str());
        schools.push(g.fill(r, school_spec, |_| name.clone()));
    }

    // crashes
    let crash_spec = registry.entity("Crash");
    let shared: Vec<&FieldSpec> = match (crash_spec, road_spec) {
        (Some(c), Some(r)) => c.fields.iter().filter(|f| r.field(&f.name).is_some()).collect(),
        _ => Vec::new(),
    };
    let mut crashes = Vec::with_capacity(spec.crashes);
    for n in 0..spec.crashes {
        let near_road = !roads.is_empty() && g.unit() < spec.clustering;
        let (p, road) = loop {
            if near_road {
                let ri = g.rng.random_range(0..roads.len());
                let Geometry::Polyline(v) = &roads[ri].geometry else { unreachable!() };
                let t = g.unit();
                let base = Point::new(
                    v[0].lon + (v[1].lon - v[0].lon) * t,
                    v[0].lat + (v[1].lat - v[0].lat) * t,
                );
                let offset = (g.unit() + g.unit() - 1.0) * 25.0;
                let horizontal = libm::fabs(v[1].lon - v[0].lon) > libm::fabs(v[1].lat - v[0].lat);
                let p = if horizontal {
                    Point::new(base.lon, base.lat + m_to_dlat(offset))
                } else {
                    Point::new(base.lon + m_to_dlon(offset, base.lat), base.lat)
                };
                let p = round7(p);
                if point_in_any(p, &towns) {
                    break (p, Some(ri));
                }
            } else {
                let p = round7(Point::new(g.range(lo.lon, hi.lon), g.range(lo.lat, hi.lat)));
                if point_in_any(p, &towns) {
                    break (p, None);
                }
            }
        };
        let mut r = EntityRecord::new(&format!("crash-{:05}", n + 1), "Crash", Geometry::Point(p));
        if let Some(ri) = road {
            for f in &shared {
                if let Some(v) = roads[ri].attributes.get(&f.name) {
                    r.attributes.insert(f.name.clone(), v.clone());
                }
            }
        }
        let id = r.id.clone();
        crashes.push(g.fill(r, crash_spec, |_| id.clone()));
    }

    let mut b = Dataset::builder(registry);
    for (entity, records) in [
        ("Town", town_records),
        ("Road", roads),
        ("School", schools),
        ("BusStop", stops),
        ("Crosswalk", crosswalks),
        ("Crash", crashes),
    ] {
        if registry.entity(entity).is_some() {
            b.add(entity, records)?;
        }
    }

    let mut places = Vec::new();
    for (town, place) in [("Amherst", "Amherst Center"), ("Quincy", "Quincy Center"), ("Boston", "Boston Common")] {
        if let Some((_, poly)) = towns.iter().find(|(n, _)| n == town) {
            places.push(GazetteerEntry {
                name: place.into(),
                entity: "Town".into(),
                location: round7(poly.centroid()),
                record_id: None,
                source: GazetteerSource::FixtureFile,
            });
        }
    }
    Ok(Fixture {
        dataset: b.build(),
        places,
        seed,
    })
}
