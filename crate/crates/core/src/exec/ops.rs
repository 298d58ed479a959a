//! Set-level operations over record streams. Streams are slices of records
//! sorted by id; every result keeps that order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::Serialize;

use crate::frame::AttrValue;
use crate::geo::{contains, min_distance_m, Geometry, SpatialIndex};
use crate::schema::{GeometryKind, Operator, Order, Relation, Scalar, ValueKind};
use crate::store::EntityRecord;

pub type Rec<'a> = &'a EntityRecord;

fn is_polygon(g: &Geometry) -> bool {
    matches!(g, Geometry::Polygon(_))
}

fn index_of(records: &[Rec<'_>]) -> SpatialIndex {
    SpatialIndex::build(records.iter().map(|r| &r.geometry))
}

/// Whether `target` contains `reference` or sits inside it, whichever
/// side is the polygon.
fn contains_either(target: &Geometry, reference: &Geometry) -> bool {
    if is_polygon(target) {
        contains(target, reference)
    } else if is_polygon(reference) {
        contains(reference, target)
    } else {
        false
    }
}

/// All `(target index, reference index)` pairs satisfying the relation,
/// sorted. `nearest_to` pairs every reference with its single closest
/// target, ties to the smaller id.
pub fn relation_pairs(
    relation: Relation,
    distance_m: Option<f64>,
    targets: &[Rec<'_>],
    references: &[Rec<'_>],
    target_kind: GeometryKind,
    reference_kind: GeometryKind,
) -> Result<Vec<(usize, usize)>, String> {
    let mut pairs = Vec::new();
    if targets.is_empty() || references.is_empty() {
        return Ok(pairs);
    }
    match relation {
        Relation::WithinDistance | Relation::Intersects => {
            let d = match relation {
                Relation::Intersects => 0.0,
                _ => distance_m
                    .filter(|d| d.is_finite() && *d >= 0.0)
                    .ok_or_else(|| String::from("within_distance needs a non-negative distance"))?,
            };
            let idx = index_of(targets);
            for (ri, r) in references.iter().enumerate() {
                for ti in idx.candidates_within(&r.geometry, d) {
                    if min_distance_m(&targets[ti].geometry, &r.geometry) <= d {
                        pairs.push((ti, ri));
                    }
                }
            }
        }
        Relation::Contains => {
            if target_kind != GeometryKind::Polygon && reference_kind != GeometryKind::Polygon {
                return Err(format!(
                    "contains is undefined between {target_kind} and {reference_kind}"
                ));
            }
            let idx = index_of(targets);
            for (ri, r) in references.iter().enumerate() {
                for ti in idx.candidates_within(&r.geometry, 0.0) {
                    if contains_either(&targets[ti].geometry, &r.geometry) {
                        pairs.push((ti, ri));
                    }
                }
            }
        }
        Relation::NearestTo => {
            for (ri, r) in references.iter().enumerate() {
                let mut best: Option<(f64, usize)> = None;
                for (ti, t) in targets.iter().enumerate() {
                    let d = min_distance_m(&t.geometry, &r.geometry);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, ti));
                    }
                }
                if let Some((_, ti)) = best {
                    pairs.push((ti, ri));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Targets related to at least one reference.
pub fn eval_spatial_match<'a>(
    relation: Relation,
    distance_m: Option<f64>,
    targets: &[Rec<'a>],
    references: &[Rec<'_>],
    target_kind: GeometryKind,
    reference_kind: GeometryKind,
) -> Result<Vec<Rec<'a>>, String> {
    let pairs = relation_pairs(
        relation,
        distance_m,
        targets,
        references,
        target_kind,
        reference_kind,
    )?;
    let hit: BTreeSet<usize> = pairs.into_iter().map(|(t, _)| t).collect();
    Ok(hit.into_iter().map(|i| targets[i]).collect())
}

/// Records intersecting any of the scope geometries.
pub fn eval_scope<'a>(records: &[Rec<'a>], scopes: &[Rec<'_>]) -> Vec<Rec<'a>> {
    let pairs = relation_pairs(
        Relation::Intersects,
        None,
        records,
        scopes,
        GeometryKind::Point,
        GeometryKind::Polygon,
    )
    .expect("intersects is total");
    let hit: BTreeSet<usize> = pairs.into_iter().map(|(t, _)| t).collect();
    hit.into_iter().map(|i| records[i]).collect()
}

fn kind_error(kind: ValueKind, op: Operator) -> String {
    format!("operator {op} does not apply to {kind} values")
}

fn ordered(kind: ValueKind, a: &Scalar, b: &Scalar) -> Option<Ordering> {
    match kind {
        ValueKind::Numeric | ValueKind::TimeOfDay => {
            a.as_number()?.partial_cmp(&b.as_number()?)
        }
        // ISO dates order lexicographically
        ValueKind::Date => Some(a.as_text()?.cmp(b.as_text()?)),
        _ => None,
    }
}

fn same(kind: ValueKind, a: &Scalar, b: &Scalar) -> bool {
    match kind {
        ValueKind::Numeric | ValueKind::TimeOfDay => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
        _ => a == b,
    }
}

/// Whether one attribute value passes the predicate. Absent and null
/// values pass only `is_null`.
pub fn attribute_matches(
    kind: ValueKind,
    op: Operator,
    value: Option<&AttrValue>,
    actual: Option<&Scalar>,
) -> Result<bool, String> {
    match op {
        Operator::IsNull => return Ok(actual.is_none()),
        Operator::NotNull => return Ok(actual.is_some()),
        _ => {}
    }
    let shape = || format!("operator {op} has a malformed value");
    let value = value.ok_or_else(shape)?;
    if op.is_ordering() && !matches!(kind, ValueKind::Numeric | ValueKind::TimeOfDay | ValueKind::Date) {
        return Err(kind_error(kind, op));
    }
    let Some(v) = actual else { return Ok(false) };
    let cmp = |bound: &Scalar| ordered(kind, v, bound).ok_or_else(|| kind_error(kind, op));
    Ok(match (op, value) {
        (Operator::Eq, AttrValue::One(x)) => same(kind, v, x),
        (Operator::In, AttrValue::Many(xs)) => xs.iter().any(|x| same(kind, v, x)),
        (Operator::Gt, AttrValue::One(x)) => cmp(x)? == Ordering::Greater,
        (Operator::Gte, AttrValue::One(x)) => cmp(x)? != Ordering::Less,
        (Operator::Lt, AttrValue::One(x)) => cmp(x)? == Ordering::Less,
        (Operator::Lte, AttrValue::One(x)) => cmp(x)? != Ordering::Greater,
        (Operator::Between, AttrValue::Many(xs)) if xs.len() == 2 => {
            let (lo, hi) = (&xs[0], &xs[1]);
            let above = cmp(lo)? != Ordering::Less;
            let below = cmp(hi)? != Ordering::Greater;
            let wraps = kind == ValueKind::TimeOfDay
                && ordered(kind, lo, hi) == Some(Ordering::Greater);
            if wraps {
                above || below
            } else {
                above && below
            }
        }
        _ => return Err(shape()),
    })
}

pub fn eval_attribute_filter<'a>(
    field: &str,
    kind: ValueKind,
    op: Operator,
    value: Option<&AttrValue>,
    records: &[Rec<'a>],
) -> Result<Vec<Rec<'a>>, String> {
    let mut out = Vec::new();
    for r in records {
        if attribute_matches(kind, op, value, r.attr(field))? {
            out.push(*r);
        }
    }
    Ok(out)
}

/// Assigns each point to the nearest line within `tolerance_m`, ties to
/// the smaller line id. Points with no line in reach are left out.
pub fn eval_relation_snap(
    points: &[Rec<'_>],
    lines: &[Rec<'_>],
    tolerance_m: f64,
) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    if lines.is_empty() {
        return out;
    }
    let idx = index_of(lines);
    for p in points {
        let mut best: Option<(f64, usize)> = None;
        for li in idx.candidates_within(&p.geometry, tolerance_m) {
            let d = min_distance_m(&p.geometry, &lines[li].geometry);
            if d <= tolerance_m && best.is_none_or(|(bd, bi)| d < bd || (d == bd && li < bi)) {
                best = Some((d, li));
            }
        }
        if let Some((_, li)) = best {
            out.insert(p.id.clone(), lines[li].id.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingRow {
    pub rank: u32,
    pub id: String,
    pub name: String,
    pub value: u64,
}

/// Orders primary records by count. `highest` lists only records with at
/// least one attributed support record; `lowest` includes zeros. Ties go
/// to the smaller id.
pub fn eval_rank(
    order: Order,
    top_n: u32,
    primary: &[Rec<'_>],
    counts: &BTreeMap<String, u64>,
    label_field: Option<&str>,
) -> Vec<RankingRow> {
    let mut rows: Vec<(u64, Rec<'_>)> = primary
        .iter()
        .map(|r| (counts.get(&r.id).copied().unwrap_or(0), *r))
        .filter(|(v, _)| order == Order::Lowest || *v > 0)
        .collect();
    rows.sort_by(|(va, a), (vb, b)| {
        let by_value = match order {
            Order::Highest => vb.cmp(va),
            Order::Lowest => va.cmp(vb),
        };
        by_value.then_with(|| a.id.cmp(&b.id))
    });
    rows.truncate(top_n as usize);
    rows.into_iter()
        .enumerate()
        .map(|(i, (value, r))| RankingRow {
            rank: i as u32 + 1,
            id: r.id.clone(),
            name: label_field
                .and_then(|f| r.text(f))
                .unwrap_or(&r.id)
                .into(),
            value,
        })
        .collect()
}
