//! Brute-force reference evaluator. Reads the validated frame directly
//! (no graph, no spatial index) and answers with nested scans.
//!
//! A target role keeps the records of its loaded, filtered and scoped set
//! that satisfy every spatial constraint on it, each constraint judged
//! against the reference role's final set.

use std::collections::{BTreeMap, BTreeSet};

use geoframe_core::exec::ResultSet;
use geoframe_core::frame::{canonicalize, AttrValue, AttributeConstraint, SemanticFrame, SpatialConstraint};
use geoframe_core::geo::{contains, min_distance_m, Geometry};
use geoframe_core::schema::{GeometryKind, Operator, Order, Relation, Role, Scalar, SchemaRegistry, ValueKind};
use geoframe_core::store::{Dataset, EntityRecord};

const IMPLICIT_SNAP_M: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub roles: BTreeMap<Role, BTreeSet<String>>,
    /// (id, count) in rank order.
    pub ranking: Option<Vec<(String, u64)>>,
}

impl Expected {
    pub fn of(r: &ResultSet) -> Expected {
        Expected {
            roles: r
                .role_records
                .iter()
                .map(|(role, rs)| (*role, rs.iter().map(|x| x.id.clone()).collect()))
                .collect(),
            ranking: r
                .ranking_rows()
                .map(|rows| rows.iter().map(|row| (row.id.clone(), row.value)).collect()),
        }
    }
}

struct Ctx<'a> {
    frame: SemanticFrame,
    reg: &'a SchemaRegistry,
    entity: BTreeMap<Role, String>,
    base: BTreeMap<Role, Vec<EntityRecord>>,
}

fn num(s: &Scalar) -> Option<f64> {
    match s {
        Scalar::Number(n) => Some(*n),
        _ => None,
    }
}

fn one(v: &AttrValue) -> Option<&Scalar> {
    match v {
        AttrValue::One(x) => Some(x),
        AttrValue::Many(_) => None,
    }
}

fn cmp(kind: ValueKind, a: &Scalar, b: &Scalar) -> Option<std::cmp::Ordering> {
    match kind {
        ValueKind::Date => match (a, b) {
            (Scalar::Text(x), Scalar::Text(y)) => Some(x.cmp(y)),
            _ => None,
        },
        ValueKind::Numeric | ValueKind::TimeOfDay => num(a)?.partial_cmp(&num(b)?),
        _ => None,
    }
}

fn equal(kind: ValueKind, a: &Scalar, b: &Scalar) -> bool {
    match kind {
        ValueKind::Numeric | ValueKind::TimeOfDay => num(a).zip(num(b)).is_some_and(|(x, y)| x == y),
        _ => a == b,
    }
}

fn passes(kind: ValueKind, c: &AttributeConstraint, actual: Option<&Scalar>) -> Result<bool, String> {
    use std::cmp::Ordering::*;
    let op = c.operator.known().ok_or("raw operator")?;
    if op == Operator::IsNull {
        return Ok(actual.is_none());
    }
    if op == Operator::NotNull {
        return Ok(actual.is_some());
    }
    let Some(v) = actual else { return Ok(false) };
    let value = c.value.as_ref().ok_or("missing value")?;
    let ord = |b: &Scalar| cmp(kind, v, b).ok_or_else(|| format!("{op} on {kind}"));
    Ok(match op {
        Operator::Eq => equal(kind, v, one(value).ok_or("shape")?),
        Operator::In => match value {
            AttrValue::Many(xs) => xs.iter().any(|x| equal(kind, v, x)),
            AttrValue::One(_) => return Err("shape".into()),
        },
        Operator::Gt => ord(one(value).ok_or("shape")?)? == Greater,
        Operator::Gte => ord(one(value).ok_or("shape")?)? != Less,
        Operator::Lt => ord(one(value).ok_or("shape")?)? == Less,
        Operator::Lte => ord(one(value).ok_or("shape")?)? != Greater,
        Operator::Between => {
            let AttrValue::Many(xs) = value else { return Err("shape".into()) };
            let [lo, hi] = xs.as_slice() else { return Err("shape".into()) };
            let (ge, le) = (ord(lo)? != Less, ord(hi)? != Greater);
            if kind == ValueKind::TimeOfDay && cmp(kind, lo, hi) == Some(Greater) {
                ge || le
            } else {
                ge && le
            }
        }
        Operator::IsNull | Operator::NotNull => unreachable!(),
    })
}

fn is_polygon(g: &Geometry) -> bool {
    matches!(g, Geometry::Polygon(_))
}

/// Whether `t` (target side) relates to `r` (reference side).
fn related(rel: Relation, d: Option<f64>, t: &Geometry, r: &Geometry) -> Result<bool, String> {
    Ok(match rel {
        Relation::WithinDistance => min_distance_m(t, r) <= d.ok_or("no distance")?,
        Relation::Intersects => min_distance_m(t, r) <= 0.0,
        Relation::Contains => {
            if is_polygon(t) {
                contains(t, r)
            } else if is_polygon(r) {
                contains(r, t)
            } else {
                return Err("contains without a polygon".into());
            }
        }
        Relation::NearestTo => unreachable!("handled by the caller"),
    })
}

/// Index of the record in `of` nearest to `g`; the first wins a tie.
fn nearest(of: &[EntityRecord], g: &Geometry) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in of.iter().enumerate() {
        let d = min_distance_m(&t.geometry, g);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// (target index, reference index) pairs under `c`.
fn pairs(c: &SpatialConstraint, targets: &[EntityRecord], refs: &[EntityRecord]) -> Result<BTreeSet<(usize, usize)>, String> {
    let rel = c.relation.known().ok_or("raw relation")?;
    let mut out = BTreeSet::new();
    for (ri, r) in refs.iter().enumerate() {
        if rel == Relation::NearestTo {
            out.extend(nearest(targets, &r.geometry).map(|ti| (ti, ri)));
            continue;
        }
        for (ti, t) in targets.iter().enumerate() {
            if related(rel, c.distance(), &t.geometry, &r.geometry)? {
                out.insert((ti, ri));
            }
        }
    }
    Ok(out)
}

impl Ctx<'_> {
    fn load(&self, data: &Dataset, role: Role, entity: &str) -> Result<Vec<EntityRecord>, String> {
        let refs: Vec<_> = self.frame.references.iter().filter(|r| r.role.is(role)).collect();
        let mut out: Vec<EntityRecord> = if refs.is_empty() {
            data.records(entity).to_vec()
        } else {
            let mut v = Vec::new();
            for r in refs {
                match (&r.resolved_id, r.resolved_location) {
                    (Some(id), _) => v.push(
                        data.records(entity)
                            .iter()
                            .find(|x| &x.id == id)
                            .ok_or_else(|| format!("no record {id}"))?
                            .clone(),
                    ),
                    (None, Some(p)) if role != Role::Scope => {
                        v.push(EntityRecord::new(&format!("anchor:{}", r.name), entity, Geometry::Point(p)))
                    }
                    _ => return Err(format!("unresolved {}", r.name)),
                }
            }
            v
        };
        let spec = self.reg.entity(entity).ok_or("unknown entity")?;
        for c in self.frame.attribute_constraints.iter().filter(|c| c.target_role.is(role)) {
            let kind = spec.field(&c.field).ok_or("unknown field")?.kind;
            let mut keep = Vec::new();
            for r in out {
                if passes(kind, c, r.attr(&c.field))? {
                    keep.push(r);
                }
            }
            out = keep;
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out.dedup_by(|a, b| a.id == b.id);
        Ok(out)
    }

    fn constraints_on(&self, role: Role) -> Vec<&SpatialConstraint> {
        self.frame.spatial_constraints.iter().filter(|c| c.target_role.is(role)).collect()
    }

    fn settled(&self, role: Role, memo: &mut BTreeMap<Role, Vec<EntityRecord>>, depth: usize) -> Result<Vec<EntityRecord>, String> {
        if let Some(v) = memo.get(&role) {
            return Ok(v.clone());
        }
        if depth > 8 {
            return Err("constraint cycle".into());
        }
        let base = &self.base[&role];
        let mut keep: BTreeSet<usize> = (0..base.len()).collect();
        for c in self.constraints_on(role) {
            let rr = c.reference_role.known().ok_or("raw role")?;
            let refs = self.settled(rr, memo, depth + 1)?;
            let hit: BTreeSet<usize> = pairs(c, base, &refs)?.into_iter().map(|(t, _)| t).collect();
            keep.retain(|i| hit.contains(i));
        }
        let v: Vec<EntityRecord> = keep.into_iter().map(|i| base[i].clone()).collect();
        memo.insert(role, v.clone());
        Ok(v)
    }
}

/// Expected role sets and ranking for a validated frame.
pub fn evaluate(frame: &SemanticFrame, reg: &SchemaRegistry, data: &Dataset) -> Result<Expected, String> {
    let mut cx = Ctx {
        frame: canonicalize(frame),
        reg,
        entity: BTreeMap::new(),
        base: BTreeMap::new(),
    };
    for t in &cx.frame.targets {
        cx.entity.insert(t.role.known().ok_or("raw role")?, t.entity.clone());
    }
    for (role, entity) in cx.entity.clone() {
        let recs = cx.load(data, role, &entity)?;
        cx.base.insert(role, recs);
    }
    if let Some(scope) = cx.base.get(&Role::Scope).cloned() {
        for (role, recs) in cx.base.iter_mut() {
            if *role != Role::Scope {
                recs.retain(|r| scope.iter().any(|s| min_distance_m(&r.geometry, &s.geometry) <= 0.0));
            }
        }
    }
    let mut memo = BTreeMap::new();
    let mut roles: BTreeMap<Role, Vec<EntityRecord>> = BTreeMap::new();
    for role in cx.entity.keys() {
        roles.insert(*role, cx.settled(*role, &mut memo, 0)?);
    }
    if !cx.frame.relations.is_empty() {
        return Err("explicit relations are not modelled".into());
    }

    let mut ranking = None;
    if let Some(spec) = &cx.frame.ranking {
        let p = spec.target_role.known().ok_or("raw role")?;
        let s = Role::Support;
        if p == s || !roles.contains_key(&s) {
            return Err("ranking needs a support role".into());
        }
        let kind = |r: Role| reg.entity(&cx.entity[&r]).map(|e| e.geometry).ok_or("unknown entity");
        let (pk, sk) = (kind(p)?, kind(s)?);
        let linking = cx.frame.spatial_constraints.iter().find(|c| {
            (c.target_role.is(p) && c.reference_role.is(s)) || (c.target_role.is(s) && c.reference_role.is(p))
        });
        let primary = roles[&p].clone();
        let mut credit: BTreeMap<String, BTreeSet<String>> =
            primary.iter().map(|r| (r.id.clone(), BTreeSet::new())).collect();
        if pk == GeometryKind::Polyline && sk == GeometryKind::Point && linking.is_none() {
            // implicit snap: each point to its nearest line in reach
            let mut snapped = Vec::new();
            for pt in &roles[&s] {
                let mut best: Option<(f64, &str)> = None;
                for line in &primary {
                    let d = min_distance_m(&pt.geometry, &line.geometry);
                    if d <= IMPLICIT_SNAP_M && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, &line.id));
                    }
                }
                if let Some((_, line)) = best {
                    credit.get_mut(line).expect("primary id").insert(pt.id.clone());
                    snapped.push(pt.clone());
                }
            }
            roles.insert(s, snapped);
        } else if let Some(c) = linking {
            let support = &roles[&s];
            if c.target_role.is(s) {
                for (si, pi) in pairs(c, support, &primary)? {
                    credit.get_mut(&primary[pi].id).unwrap().insert(support[si].id.clone());
                }
            } else {
                for (pi, si) in pairs(c, &primary, support)? {
                    credit.get_mut(&primary[pi].id).unwrap().insert(support[si].id.clone());
                }
            }
        } else if pk == GeometryKind::Polygon {
            for poly in &primary {
                for pt in &roles[&s] {
                    if contains(&poly.geometry, &pt.geometry) {
                        credit.get_mut(&poly.id).unwrap().insert(pt.id.clone());
                    }
                }
            }
        } else {
            return Err("no support measure".into());
        }
        let order = spec.order.known().ok_or("raw order")?;
        let mut rows: Vec<(String, u64)> = credit
            .into_iter()
            .map(|(id, v)| (id, v.len() as u64))
            .filter(|(_, n)| order == Order::Lowest || *n > 0)
            .collect();
        rows.sort_by(|a, b| match order {
            Order::Highest => b.1.cmp(&a.1).then(a.0.cmp(&b.0)),
            Order::Lowest => a.1.cmp(&b.1).then(a.0.cmp(&b.0)),
        });
        rows.truncate(spec.top_n as usize);
        let ids: BTreeSet<&String> = rows.iter().map(|(id, _)| id).collect();
        let kept: Vec<EntityRecord> = roles[&p].iter().filter(|r| ids.contains(&r.id)).cloned().collect();
        roles.insert(p, kept);
        ranking = Some(rows);
    }

    Ok(Expected {
        roles: roles
            .into_iter()
            .map(|(role, rs)| (role, rs.into_iter().map(|r| r.id).collect()))
            .collect(),
        ranking,
    })
}
