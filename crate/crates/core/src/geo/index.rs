use alloc::vec::Vec;

use rstar::{RTree, RTreeObject, AABB};

use super::distance::EARTH_RADIUS_M;
use super::{BBox, Geometry};

const DEG: f64 = core::f64::consts::PI / 180.0;
/// Upper bound on how far a pairwise projection centre can sit from the
/// query geometry, in degrees of latitude (about 330 km).
const PROJECTION_SLACK_DEG: f64 = 3.0;

#[derive(Debug, Clone)]
struct Slot {
    env: AABB<[f64; 2]>,
    slot: usize,
}

impl RTreeObject for Slot {
    type Envelope = AABB<[f64; 2]>;

    fn envelope(&self) -> Self::Envelope {
        self.env
    }
}

fn envelope(b: &BBox) -> AABB<[f64; 2]> {
    AABB::from_corners([b.min.lon, b.min.lat], [b.max.lon, b.max.lat])
}

/// Static bounding-box tree over a slice of geometries, bulk-loaded once.
/// Query results are positions into that slice.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    tree: RTree<Slot>,
    len: usize,
}

impl SpatialIndex {
    pub fn build<'a>(geoms: impl IntoIterator<Item = &'a Geometry>) -> Self {
        let slots: Vec<Slot> = geoms
            .into_iter()
            .enumerate()
            .map(|(slot, g)| Slot {
                env: envelope(&g.bbox()),
                slot,
            })
            .collect();
        let len = slots.len();
        SpatialIndex {
            tree: RTree::bulk_load(slots),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Positions of every indexed geometry that may lie within `radius_m`
    /// of `query`: a superset of the true set, never missing a member.
    /// Sorted ascending.
    pub fn candidates_within(&self, query: &Geometry, radius_m: f64) -> Vec<usize> {
        let b = query.bbox();
        let r = radius_m.max(0.0);
        let dlat = r / (EARTH_RADIUS_M * DEG) * 1.01 + 1e-9;
        let lat_extreme = b.min.lat.abs().max(b.max.lat.abs()) + dlat + PROJECTION_SLACK_DEG;
        let (min_lon, max_lon) = if lat_extreme >= 89.0 {
            (-180.0, 180.0)
        } else {
            let dlon = r / (EARTH_RADIUS_M * DEG * libm::cos(lat_extreme * DEG)) * 1.01 + 1e-9;
            (b.min.lon - dlon, b.max.lon + dlon)
        };
        let env = AABB::from_corners([min_lon, b.min.lat - dlat], [max_lon, b.max.lat + dlat]);
        let mut out: Vec<usize> = self
            .tree
            .locate_in_envelope_intersecting(&env)
            .map(|s| s.slot)
            .collect();
        out.sort_unstable();
        out
    }
}
