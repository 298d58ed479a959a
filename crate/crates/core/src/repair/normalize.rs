//! Value normalization: curated surface-form tables plus a handful of
//! built-in parsers for distances, clock times, dates and numbers.
//!
//! Matching is exact after lowercasing and trimming. There is deliberately
//! no similarity matching: every rewrite must be traceable to a table row or
//! a named parser.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{rules, ActionKind, RepairAction, Rejection};
use crate::frame::{fmt_number, AttrValue, SemanticFrame};
use crate::schema::{FieldSpec, Operator, Scalar, SchemaRegistry, ValueKind};
use crate::vocab::{Token, Vocab};

/// One curated mapping. `context` is a field name or one of the special
/// contexts `distance`, `time`, `order`, `relation`, `operator`, `entity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRule {
    pub rule_id: String,
    pub context: String,
    pub raw: String,
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("rule `{0}` has an empty column")]
    EmptyColumn(String),
    #[error("rule id `{0}` used twice")]
    DuplicateRuleId(String),
    #[error("({context}, {raw:?}) mapped twice (rules `{first}` and `{second}`)")]
    DuplicateKey {
        context: String,
        raw: String,
        first: String,
        second: String,
    },
    #[error("rule `{rule_id}`: canonical value {canonical:?} is not valid for context `{context}`")]
    BadCanonical {
        rule_id: String,
        context: String,
        canonical: String,
    },
}

fn key(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Lookup table from `(context, raw surface form)` to a canonical value.
#[derive(Debug, Clone, Default)]
pub struct NormalizationTable {
    rules: Vec<NormalizationRule>,
    by_key: BTreeMap<(String, String), usize>,
}

impl NormalizationTable {
    pub fn new(rules: impl IntoIterator<Item = NormalizationRule>) -> Result<Self, TableError> {
        let mut t = NormalizationTable::default();
        let mut ids = BTreeMap::new();
        for r in rules {
            if [&r.rule_id, &r.context, &r.raw, &r.canonical]
                .iter()
                .any(|c| c.trim().is_empty())
            {
                return Err(TableError::EmptyColumn(r.rule_id));
            }
            if ids.insert(r.rule_id.clone(), ()).is_some() || rules::is_builtin(&r.rule_id) {
                return Err(TableError::DuplicateRuleId(r.rule_id));
            }
            let ok = match r.context.as_str() {
                "distance" => parse_meters(&r.canonical).is_some(),
                "time" => parse_minutes_pair(&r.canonical).is_some(),
                _ => true,
            };
            if !ok {
                return Err(TableError::BadCanonical {
                    rule_id: r.rule_id,
                    context: r.context,
                    canonical: r.canonical,
                });
            }
            let k = (key(&r.context), key(&r.raw));
            if let Some(&prev) = t.by_key.get(&k) {
                return Err(TableError::DuplicateKey {
                    context: r.context,
                    raw: r.raw,
                    first: t.rules[prev].rule_id.clone(),
                    second: r.rule_id,
                });
            }
            t.by_key.insert(k, t.rules.len());
            t.rules.push(r);
        }
        Ok(t)
    }

    pub fn rules(&self) -> &[NormalizationRule] {
        &self.rules
    }

    pub fn lookup(&self, context: &str, raw: &str) -> Option<&NormalizationRule> {
        self.by_key
            .get(&(key(context), key(raw)))
            .map(|&i| &self.rules[i])
    }

    /// True for table rule ids and the built-in rule ids.
    pub fn knows_rule(&self, rule_id: &str) -> bool {
        rules::is_builtin(rule_id) || self.rules.iter().any(|r| r.rule_id == rule_id)
    }
}

fn parse_meters(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|n| n.is_finite())
}

fn parse_minutes_pair(s: &str) -> Option<(f64, f64)> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = inner.split_once(',')?;
    let a: f64 = a.trim().parse().ok()?;
    let b: f64 = b.trim().parse().ok()?;
    let ok = |x: f64| (0.0..1440.0).contains(&x);
    (ok(a) && ok(b)).then_some((a, b))
}

fn split_number_unit(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || *c == '.'))
        .map_or(s.len(), |(i, _)| i);
    if end == 0 {
        return None;
    }
    let n: f64 = s[..end].parse().ok()?;
    Some((n, s[end..].trim()))
}

/// `"1.5km"`, `"500 meters"`, `"0.5 mi"`, `"300ft"` and bare numbers
/// (meters).
pub fn parse_distance(s: &str) -> Option<f64> {
    let lower = s.trim().to_lowercase();
    let (n, unit) = split_number_unit(&lower)?;
    let factor = match unit {
        "" | "m" | "meter" | "meters" | "metre" | "metres" => 1.0,
        "km" | "kilometer" | "kilometers" | "kilometre" | "kilometres" => 1000.0,
        "mi" | "mile" | "miles" => 1609.344,
        "ft" | "foot" | "feet" => 0.3048,
        "yd" | "yard" | "yards" => 0.9144,
        _ => return None,
    };
    let m = n * factor;
    (m.is_finite() && m > 0.0).then_some(m)
}

/// Minutes since midnight for `"4pm"`, `"4:30 pm"`, `"16:00"`, `"noon"`,
/// `"midnight"`.
pub fn parse_clock(s: &str) -> Option<u32> {
    let lower = s.trim().to_lowercase().replace('.', "");
    match lower.as_str() {
        "noon" | "midday" => return Some(720),
        "midnight" => return Some(0),
        _ => {}
    }
    let (body, meridiem) = if let Some(b) = lower.strip_suffix("am") {
        (b.trim(), Some(false))
    } else if let Some(b) = lower.strip_suffix("pm") {
        (b.trim(), Some(true))
    } else {
        (lower.as_str(), None)
    };
    let (h, m) = match body.split_once(':') {
        Some((h, m)) if m.len() == 2 => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
        Some(_) => return None,
        None if meridiem.is_some() => (body.parse::<u32>().ok()?, 0),
        None => return None,
    };
    if m >= 60 {
        return None;
    }
    let h = match meridiem {
        Some(pm) if (1..=12).contains(&h) => h % 12 + if pm { 12 } else { 0 },
        Some(_) => return None,
        None if h < 24 => h,
        None => return None,
    };
    Some(h * 60 + m)
}

fn split_range(s: &str, allow_dash: bool) -> Option<(&str, &str)> {
    let s = s.trim();
    let lower = s.to_ascii_lowercase();
    let mut body = s;
    for prefix in ["between ", "from "] {
        if lower.starts_with(prefix) {
            body = s[prefix.len()..].trim();
            break;
        }
    }
    let lb = body.to_ascii_lowercase();
    for sep in [" and ", " to ", " through ", " until "] {
        if let Some(i) = lb.find(sep) {
            return Some((body[..i].trim(), body[i + sep.len()..].trim()));
        }
    }
    if allow_dash {
        if let Some((a, b)) = body.split_once('-') {
            return Some((a.trim(), b.trim()));
        }
    }
    None
}

/// `"between 4pm and 8pm"`, `"4pm-8pm"`, `"from 7:00 to 9:30"`.
pub fn parse_clock_range(s: &str) -> Option<(u32, u32)> {
    let (a, b) = split_range(s, true)?;
    Some((parse_clock(a)?, parse_clock(b)?))
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%B %d %Y", "%B %d, %Y", "%b %d %Y", "%b %d, %Y", "%m/%d/%Y"];

/// ISO `YYYY-MM-DD` for a handful of common spellings, ordinals allowed
/// (`"March 5th 2023"`).
pub fn parse_date(s: &str) -> Option<String> {
    let cleaned = strip_ordinals(s.trim());
    DATE_FORMATS.iter().find_map(|f| {
        chrono::NaiveDate::parse_from_str(&cleaned, f)
            .ok()
            .map(|d| d.format("%Y-%m-%d").to_string())
    })
}

fn strip_ordinals(s: &str) -> String {
    let words: Vec<String> = s
        .split_whitespace()
        .map(|w| {
            let (body, tail) = w.strip_suffix(',').map_or((w, ""), |b| (b, ","));
            let lower = body.to_lowercase();
            for suffix in ["st", "nd", "rd", "th"] {
                if let Some(d) = lower.strip_suffix(suffix) {
                    if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) {
                        return format!("{d}{tail}");
                    }
                }
            }
            w.to_string()
        })
        .collect();
    words.join(" ")
}

/// A number, optionally followed by a unit word (`"30 mph"`).
pub fn parse_number(s: &str) -> Option<f64> {
    let (n, _) = split_number_unit(s)?;
    n.is_finite().then_some(n)
}

/// Display form used in repair actions: the plain text of a single value,
/// bracketed lists otherwise.
pub fn display_value(v: &AttrValue) -> String {
    match v {
        AttrValue::One(s) => s.to_string(),
        AttrValue::Many(items) => {
            let parts: Vec<String> = items.iter().map(|s| s.to_string()).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

struct Ctx<'a> {
    reg: &'a SchemaRegistry,
    table: &'a NormalizationTable,
    actions: Vec<RepairAction>,
}

impl Ctx<'_> {
    fn act(&mut self, path: String, before: String, after: String, rule_id: &str) {
        self.actions.push(RepairAction {
            kind: ActionKind::ValueNormalization,
            path,
            before,
            after,
            rule_id: rule_id.into(),
        });
    }

    fn token<T: Vocab>(&mut self, tok: &mut Token<T>, context: &str, path: String) {
        let Token::Raw(raw) = tok else { return };
        let hit = self
            .table
            .lookup(context, raw)
            .and_then(|r| T::parse(r.canonical.trim()).map(|v| (v, r.rule_id.as_str())))
            .or_else(|| {
                T::ALL
                    .iter()
                    .find(|v| v.as_str().eq_ignore_ascii_case(raw.trim()))
                    .map(|v| (*v, rules::FOLD_CASE))
            });
        if let Some((v, rule)) = hit {
            let rule = String::from(rule);
            let before = raw.clone();
            *tok = Token::Known(v);
            self.act(path, before, v.as_str().into(), &rule);
        }
    }

    fn entity(&mut self, name: &mut String, path: String) {
        if self.reg.entity(name).is_some() {
            return;
        }
        let hit = self
            .table
            .lookup("entity", name)
            .filter(|r| self.reg.entity(r.canonical.trim()).is_some())
            .map(|r| (r.canonical.trim().to_string(), r.rule_id.clone()))
            .or_else(|| {
                self.reg
                    .entities
                    .iter()
                    .find(|e| e.name.eq_ignore_ascii_case(name.trim()))
                    .map(|e| (e.name.clone(), rules::FOLD_CASE.into()))
            });
        if let Some((canon, rule)) = hit {
            let before = core::mem::replace(name, canon.clone());
            self.act(path, before, canon, &rule);
        }
    }
}

enum Fix {
    Keep,
    Set(Scalar, String),
}

/// Normalizes one scalar for `field`. `Err` means the value cannot be
/// mapped to anything the field accepts.
fn fix_scalar(
    table: &NormalizationTable,
    field: &FieldSpec,
    s: &Scalar,
) -> Result<Fix, ()> {
    if crate::schema::check_kind(field, s).is_ok() {
        return Ok(Fix::Keep);
    }
    let Scalar::Text(raw) = s else { return Err(()) };
    let row = table.lookup(&field.name, raw);
    match field.kind {
        ValueKind::Categorical => {
            let canon = field.values.as_deref().unwrap_or_default();
            if let Some(r) = row.filter(|r| canon.iter().any(|c| c == r.canonical.trim())) {
                return Ok(Fix::Set(r.canonical.trim().into(), r.rule_id.clone()));
            }
            canon
                .iter()
                .find(|c| c.eq_ignore_ascii_case(raw.trim()))
                .map(|c| Fix::Set(c.as_str().into(), rules::FOLD_CASE.into()))
                .ok_or(())
        }
        ValueKind::Numeric => {
            if let Some((r, n)) = row.and_then(|r| parse_number(&r.canonical).map(|n| (r, n))) {
                return Ok(Fix::Set(n.into(), r.rule_id.clone()));
            }
            parse_number(raw)
                .map(|n| Fix::Set(n.into(), rules::PARSE_NUMBER.into()))
                .ok_or(())
        }
        ValueKind::TimeOfDay => {
            let row = row.or_else(|| table.lookup("time", raw));
            if let Some((r, n)) = row.and_then(|r| parse_number(&r.canonical).map(|n| (r, n))) {
                return Ok(Fix::Set(n.into(), r.rule_id.clone()));
            }
            parse_clock(raw)
                .map(|m| Fix::Set((m as f64).into(), rules::PARSE_CLOCK.into()))
                .ok_or(())
        }
        ValueKind::Date => {
            if let Some(r) = row.filter(|r| crate::schema::is_iso_date(r.canonical.trim())) {
                return Ok(Fix::Set(r.canonical.trim().into(), r.rule_id.clone()));
            }
            parse_date(raw)
                .map(|d| Fix::Set(d.as_str().into(), rules::PARSE_DATE.into()))
                .ok_or(())
        }
        ValueKind::Text => Ok(Fix::Keep),
    }
}

/// A `between` value written as one phrase, e.g. `"between 4pm and 8pm"`.
fn fix_range_phrase(
    table: &NormalizationTable,
    field: &FieldSpec,
    raw: &str,
) -> Option<(Vec<Scalar>, String)> {
    if field.kind == ValueKind::TimeOfDay {
        if let Some(r) = table.lookup("time", raw).or_else(|| table.lookup(&field.name, raw)) {
            if let Some((a, b)) = parse_minutes_pair(&r.canonical) {
                return Some((vec![a.into(), b.into()], r.rule_id.clone()));
            }
        }
        let (a, b) = parse_clock_range(raw)?;
        return Some((
            vec![(a as f64).into(), (b as f64).into()],
            rules::PARSE_CLOCK_RANGE.into(),
        ));
    }
    let (a, b) = split_range(raw, field.kind == ValueKind::Numeric)?;
    let mut out = Vec::new();
    let mut rule = None;
    for part in [a, b] {
        match fix_scalar(table, field, &Scalar::Text(part.into())).ok()? {
            Fix::Set(v, r) => {
                rule.get_or_insert(r);
                out.push(v);
            }
            Fix::Keep => out.push(Scalar::Text(part.into())),
        }
    }
    Some((out, rule.unwrap_or_else(|| rules::PARSE_NUMBER.into())))
}

fn after_display(field: &FieldSpec, v: &AttrValue) -> String {
    let shown = display_value(v);
    match field.kind {
        ValueKind::TimeOfDay => format!("{shown} minutes"),
        _ => shown,
    }
}

fn unrepairable(path: String, field: &str, value: String) -> Rejection {
    Rejection::UnrepairableValue {
        path,
        field: field.into(),
        value,
    }
}

/// Rewrites every surface form the table or a parser recognizes. Unknown
/// categorical values are fatal; every other remaining problem is left for
/// validation to report.
pub fn normalize_values(
    reg: &SchemaRegistry,
    table: &NormalizationTable,
    frame: &SemanticFrame,
) -> Result<(SemanticFrame, Vec<RepairAction>), Rejection> {
    let mut f = frame.clone();
    let mut cx = Ctx {
        reg,
        table,
        actions: Vec::new(),
    };

    for (i, t) in f.targets.iter_mut().enumerate() {
        cx.entity(&mut t.entity, format!("targets[{i}].entity"));
        cx.token(&mut t.role, "role", format!("targets[{i}].role"));
    }
    for (i, r) in f.references.iter_mut().enumerate() {
        cx.entity(&mut r.entity, format!("references[{i}].entity"));
        cx.token(&mut r.role, "role", format!("references[{i}].role"));
    }

    for (i, c) in f.spatial_constraints.iter_mut().enumerate() {
        let base = format!("spatial_constraints[{i}]");
        cx.token(&mut c.relation, "relation", format!("{base}.relation"));
        cx.token(&mut c.target_role, "role", format!("{base}.target_role"));
        cx.token(&mut c.reference_role, "role", format!("{base}.reference_role"));
        if let Some(Scalar::Text(raw)) = &c.distance_m {
            let path = format!("{base}.distance_m");
            let hit = table
                .lookup("distance", raw)
                .and_then(|r| parse_meters(&r.canonical).map(|m| (m, r.rule_id.clone())))
                .or_else(|| parse_distance(raw).map(|m| (m, rules::PARSE_DISTANCE.into())));
            let Some((m, rule)) = hit else {
                return Err(unrepairable(path, "distance_m", raw.clone()));
            };
            let before = raw.clone();
            c.distance_m = Some(Scalar::Number(m));
            cx.act(path, before, format!("{} m", fmt_number(m)), &rule);
        }
    }

    for (i, r) in f.relations.iter_mut().enumerate() {
        cx.token(&mut r.kind, "relation", format!("relations[{i}].kind"));
        cx.token(&mut r.from_role, "role", format!("relations[{i}].from_role"));
        cx.token(&mut r.to_role, "role", format!("relations[{i}].to_role"));
    }

    if let Some(r) = &mut f.ranking {
        cx.token(&mut r.metric, "metric", "ranking.metric".into());
        cx.token(&mut r.target_role, "role", "ranking.target_role".into());
        cx.token(&mut r.order, "order", "ranking.order".into());
    }

    let role_entities: Vec<(crate::schema::Role, String)> = f
        .targets
        .iter()
        .filter_map(|t| t.role.known().map(|r| (r, t.entity.clone())))
        .collect();
    for (i, c) in f.attribute_constraints.iter_mut().enumerate() {
        let base = format!("attribute_constraints[{i}]");
        cx.token(&mut c.target_role, "role", format!("{base}.target_role"));
        cx.token(&mut c.operator, "operator", format!("{base}.operator"));
        let Some(role) = c.target_role.known() else { continue };
        let mut bound = role_entities.iter().filter(|(r, _)| *r == role);
        let Some((_, entity)) = bound.next() else { continue };
        if bound.any(|(_, e)| e != entity) {
            continue;
        }
        let Some(field) = reg.field(entity, &c.field) else { continue };
        let Some(value) = &c.value else { continue };
        let path = format!("{base}.value");
        let op = c.operator.known();

        let fixed: Option<(AttrValue, String)> = match value {
            AttrValue::One(Scalar::Text(raw))
                if matches!(op, Some(Operator::Between)) =>
            {
                let (pair, rule) = fix_range_phrase(table, field, raw)
                    .ok_or_else(|| unrepairable(path.clone(), &field.name, raw.clone()))?;
                Some((AttrValue::Many(pair), rule))
            }
            AttrValue::One(s) => match fix_scalar(table, field, s) {
                Ok(Fix::Keep) => None,
                Ok(Fix::Set(v, rule)) => Some((AttrValue::One(v), rule)),
                Err(()) => return Err(unrepairable(path, &field.name, s.to_string())),
            },
            AttrValue::Many(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut rule = None;
                for s in items {
                    match fix_scalar(table, field, s) {
                        Ok(Fix::Keep) => out.push(s.clone()),
                        Ok(Fix::Set(v, r)) => {
                            rule.get_or_insert(r);
                            out.push(v);
                        }
                        Err(()) => return Err(unrepairable(path, &field.name, s.to_string())),
                    }
                }
                rule.map(|r| (AttrValue::Many(out), r))
            }
        };
        if let Some((v, rule)) = fixed {
            let before = display_value(value);
            let after = after_display(field, &v);
            c.value = Some(v);
            cx.act(path, before, after, &rule);
        }
    }

    Ok((f, cx.actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::parse_frame;
    use crate::testkit;

    #[test]
    fn distance_parser() {
        assert_eq!(parse_distance("1km"), Some(1000.0));
        assert_eq!(parse_distance("500 meters"), Some(500.0));
        assert_eq!(parse_distance("0.5 mi"), Some(804.672));
        assert_eq!(parse_distance("300ft"), Some(300.0 * 0.3048));
        assert_eq!(parse_distance("250"), Some(250.0));
        assert_eq!(parse_distance("far"), None);
        assert_eq!(parse_distance("0 m"), None);
    }

    #[test]
    fn clock_parser() {
        assert_eq!(parse_clock("4pm"), Some(960));
        assert_eq!(parse_clock("8 PM"), Some(1200));
        assert_eq!(parse_clock("12am"), Some(0));
        assert_eq!(parse_clock("12pm"), Some(720));
        assert_eq!(parse_clock("7:30 a.m."), Some(450));
        assert_eq!(parse_clock("16:45"), Some(1005));
        assert_eq!(parse_clock("noon"), Some(720));
        assert_eq!(parse_clock("13pm"), None);
        assert_eq!(parse_clock("16"), None);
        assert_eq!(parse_clock_range("between 4pm and 8pm"), Some((960, 1200)));
        assert_eq!(parse_clock_range("7am-9am"), Some((420, 540)));
        assert_eq!(parse_clock_range("from 22:00 to 2am"), Some((1320, 120)));
    }

    #[test]
    fn date_parser() {
        assert_eq!(parse_date("March 5 2023").as_deref(), Some("2023-03-05"));
        assert_eq!(parse_date("March 5th, 2023").as_deref(), Some("2023-03-05"));
        assert_eq!(parse_date("03/05/2023").as_deref(), Some("2023-03-05"));
        assert_eq!(parse_date("Feb 30 2023"), None);
    }

    #[test]
    fn table_rejects_conflicts() {
        let r = |id: &str, ctx: &str, raw: &str, c: &str| NormalizationRule {
            rule_id: id.into(),
            context: ctx.into(),
            raw: raw.into(),
            canonical: c.into(),
        };
        assert!(matches!(
            NormalizationTable::new([r("a", "severity", "Fatal", "Fatal injury"), r("b", "severity", "fatal ", "x")]),
            Err(TableError::DuplicateKey { .. })
        ));
        assert!(matches!(
            NormalizationTable::new([r("a", "distance", "far", "lots")]),
            Err(TableError::BadCanonical { .. })
        ));
        assert!(matches!(
            NormalizationTable::new([r("fold.case", "severity", "x", "y")]),
            Err(TableError::DuplicateRuleId(_))
        ));
    }

    fn norm(json: &str) -> Result<(SemanticFrame, Vec<RepairAction>), Rejection> {
        normalize_values(&testkit::registry(), &testkit::table(), &parse_frame(json).unwrap())
    }

    #[test]
    fn categorical_and_distance() {
        let (f, acts) = norm(
            r#"{"supported": true,
                "targets": [{"entity": "Crash", "role": "primary"}, {"entity": "School", "role": "anchor"}],
                "references": [{"entity": "School", "role": "anchor", "name": "X"}],
                "spatial_constraints": [{"relation": "within_distance", "target_role": "primary",
                                         "reference_role": "anchor", "distance_m": "half a mile"}],
                "attribute_constraints": [{"target_role": "primary", "field": "first_hrmf",
                                           "operator": "eq", "value": "cyclists"}]}"#,
        )
        .unwrap();
        assert_eq!(f.spatial_constraints[0].distance(), Some(804.0));
        assert_eq!(
            f.attribute_constraints[0].value,
            Some(AttrValue::One("Collision with cyclist".into()))
        );
        assert_eq!(acts.len(), 2);
        assert_eq!(acts[0].before, "half a mile");
        assert_eq!(acts[0].after, "804 m");
        assert_eq!(acts[1].path, "attribute_constraints[0].value");
    }

    #[test]
    fn time_phrase_becomes_pair() {
        let (f, acts) = norm(
            r#"{"supported": true, "targets": [{"entity": "Crash", "role": "primary"}],
                "attribute_constraints": [{"target_role": "primary", "field": "crash_time",
                                           "operator": "between", "value": "between 4pm and 8pm"}]}"#,
        )
        .unwrap();
        assert_eq!(
            f.attribute_constraints[0].value,
            Some(AttrValue::Many(vec![960.0.into(), 1200.0.into()]))
        );
        assert_eq!(acts[0].after, "[960, 1200] minutes");
    }

    #[test]
    fn in_list_is_one_action() {
        let (f, acts) = norm(
            r#"{"supported": true, "targets": [{"entity": "Crash", "role": "primary"}],
                "attribute_constraints": [{"target_role": "primary", "field": "severity",
                                           "operator": "in", "value": ["fatal", "injury", "Unknown"]}]}"#,
        )
        .unwrap();
        assert_eq!(acts.len(), 1);
        assert_eq!(
            f.attribute_constraints[0].value,
            Some(AttrValue::Many(vec![
                "Fatal injury".into(),
                "Non-fatal injury".into(),
                "Unknown".into()
            ]))
        );
    }

    #[test]
    fn tokens_and_entities() {
        let (f, acts) = norm(
            r#"{"supported": true, "targets": [{"entity": "schools", "role": "Primary"}, {"entity": "crash", "role": "support"}],
                "ranking": {"metric": "crash_count", "target_role": "primary", "order": "fewest", "top_n": 3}}"#,
        )
        .unwrap();
        assert_eq!(f.targets[0].entity, "School");
        assert_eq!(f.targets[1].entity, "Crash");
        assert!(f.targets[0].role.is(crate::schema::Role::Primary));
        assert_eq!(f.ranking.unwrap().order.as_str(), "lowest");
        let rules: Vec<&str> = acts.iter().map(|a| a.rule_id.as_str()).collect();
        assert_eq!(rules, ["test.entity.schools", "fold.case", "fold.case", "test.order.fewest"]);
    }

    #[test]
    fn unknown_categorical_is_fatal() {
        let err = norm(
            r#"{"supported": true, "targets": [{"entity": "Crash", "role": "primary"}],
                "attribute_constraints": [{"target_role": "primary", "field": "severity",
                                           "operator": "eq", "value": "catastrophic"}]}"#,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Rejection::UnrepairableValue {
                path: "attribute_constraints[0].value".into(),
                field: "severity".into(),
                value: "catastrophic".into()
            }
        );
    }

    #[test]
    fn canonical_frame_untouched() {
        let f = testkit::ranking_frame();
        let (g, acts) = normalize_values(&testkit::registry(), &testkit::table(), &f).unwrap();
        assert!(acts.is_empty());
        assert_eq!(f, g);
    }

    #[test]
    fn dates_and_numbers() {
        let (f, acts) = norm(
            r#"{"supported": true, "targets": [{"entity": "Crash", "role": "primary"}],
                "attribute_constraints": [
                  {"target_role": "primary", "field": "crash_date", "operator": "gte", "value": "January 1 2023"},
                  {"target_role": "primary", "field": "speed_limit", "operator": "gt", "value": "30 mph"}]}"#,
        )
        .unwrap();
        assert_eq!(f.attribute_constraints[0].value, Some(AttrValue::One("2023-01-01".into())));
        assert_eq!(f.attribute_constraints[1].value, Some(AttrValue::One(30.0.into())));
        assert_eq!(acts[0].rule_id, rules::PARSE_DATE);
        assert_eq!(acts[1].rule_id, rules::PARSE_NUMBER);
    }
}
