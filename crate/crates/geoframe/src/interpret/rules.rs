//! Offline interpreter: a clause grammar over the query families of the
//! benchmark (retrieval, scope, proximity, attribute and time filters,
//! rankings). Values are emitted as typed ("fatal", "1km", "7am") so the
//! repair layer does the normalization.
//!
//! Clauses are cut out of the query one family at a time; whatever remains
//! is scanned for entity nouns. Conventions:
//! - the first entity noun is the primary, except that a ranking's counted
//!   crashes are always the support;
//! - a named place after "near", "around" or "within D of" is an anchor;
//! - a plural entity after "near" or "within D of" is the support of a
//!   retrieval question and a filter on the counted crashes of a ranking;
//! - a bare "within D" in a ranking links the counted crashes to the
//!   primary;
//! - crash modifiers, times and dates apply to the crash role; speed limit
//!   and sidewalk filters apply to roads when roads are a target, else to
//!   crashes.

use std::sync::LazyLock;

use geoframe_core::frame::{
    AttrValue, AttributeConstraint, GeoReference, RankingSpec, SemanticFrame, SpatialConstraint,
    TargetBinding,
};
use geoframe_core::schema::{Metric, Scalar};
use geoframe_core::vocab::Token;
use geoframe_core::{Operator, Relation, Role};
use regex::Regex;

const CLOCK: &str = r"\d{1,2}(?::\d{2})? ?(?:am|pm)|noon|midnight";
const DATE: &str = r"(?:January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec)\.? \d{1,2}(?:st|nd|rd|th)?,? \d{4}|\d{4}-\d{2}-\d{2}";
const DIST: &str = r"\d+(?:\.\d+)? ?(?:km|kilometers?|kilometres?|meters?|metres?|mi|miles?|ft|feet|yards?|m)\b|half a mile|a quarter mile|a mile";
const NAME: &str = r"[A-Z][A-Za-z'.&-]*(?: (?:@ )?[A-Z][A-Za-z'.&-]*)*";
const ENTITY: &str = r"road segments?|roads?|streets?|schools?|bus stops?|crosswalks?|towns?|cities|sidewalk conditions";
const MODIFIER: &str = r"fatal|fatality|deadly|injury|injured|pdo|pedestrians?|ped|cyclists?|bicyclists?|bicycle|bike|deer|animal";

struct Grammar {
    rank_head: Regex,
    show_head: Regex,
    date_range: Regex,
    clock_range: Regex,
    date_bound: Regex,
    clock_bound: Regex,
    year: Regex,
    around_name: Regex,
    within_name: Regex,
    near_name: Regex,
    plural: Regex,
    bare_within: Regex,
    speed: Regex,
    sidewalks: Regex,
    junction: Regex,
    scope: Regex,
    order: Regex,
    by: Regex,
    crashes: Regex,
    entity: Regex,
}

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).expect("grammar pattern compiles")
}

static GRAMMAR: LazyLock<Grammar> = LazyLock::new(|| Grammar {
    rank_head: re(r"^(?i:(?:show|list|find|give)(?: me)? )?(?i:the )?(?:(?i:top) (\d+)|(\d+)) "),
    show_head: re(r"^(?i:show|list|find|map|display|give)(?i: me)?(?: all| the)? "),
    date_range: re(&format!(r"\bbetween ({DATE}) and ({DATE})")),
    clock_range: re(&format!(r"\b(?:between|from) ({CLOCK}) (?:and|to) ({CLOCK})")),
    date_bound: re(&format!(r"\b(before|after|since) ({DATE})")),
    clock_bound: re(&format!(r"\b(before|after) ({CLOCK})")),
    year: re(r"\bin (\d{4})\b"),
    around_name: re(&format!(r"\baround ({NAME})( bus stop)? within ({DIST})")),
    within_name: re(&format!(r"\bwithin ({DIST}) (?:of|around|from) ({NAME})( bus stop)?")),
    near_name: re(&format!(r"\bnear ({NAME})( bus stop)?")),
    plural: re(&format!(
        r"\b(?:within ({DIST}) (?:of|around|from)|near) (?:all |the |any )?({ENTITY})\b"
    )),
    bare_within: re(&format!(r"\bwithin ({DIST})")),
    speed: re(
        r"\b(?:with |and )?(?:a |the )?speed limits? (?:(above|over|more than|greater than|below|under|less than|at least|at most|of|equal to) )?(\d+(?:\.\d+)?)(?: ?mph)?",
    ),
    sidewalks: re(r"\b(?:with |and )?(?:without|with no|no) sidewalks?(?: on both sides| on either side)?"),
    junction: re(r"\bat (four-way intersections?|t intersections?|roundabouts?)"),
    scope: re(r"\bin ([A-Z][A-Za-z]+(?: [A-Z][A-Za-z]+)*)"),
    order: re(r"\b(?:with|and) the (most|fewest|least)\b"),
    by: re(r"\bby\b"),
    crashes: re(&format!(r"\b((?:(?:{MODIFIER}) )*)crash(?:es)?\b")),
    entity: re(&format!(r"\b({ENTITY})\b")),
});

/// Mutable query text; recognised clauses are blanked with `|` so byte
/// offsets stay put and later patterns cannot match across a cut.
struct Text(String);

impl Text {
    fn take(&mut self, re: &Regex) -> Option<Vec<String>> {
        let caps = re.captures(&self.0)?;
        let m = caps.get(0).expect("whole match");
        let groups = caps
            .iter()
            .skip(1)
            .map(|g| g.map_or(String::new(), |g| g.as_str().to_string()))
            .collect();
        let (start, end) = (m.start(), m.end());
        self.0.replace_range(start..end, &"|".repeat(end - start));
        Some(groups)
    }

    fn take_at(&mut self, re: &Regex) -> Option<(usize, Vec<String>)> {
        let start = re.find(&self.0)?.start();
        self.take(re).map(|g| (start, g))
    }
}

fn entity_of_noun(noun: &str) -> &'static str {
    let n = noun.to_lowercase();
    if n.starts_with("road") || n.starts_with("street") || n.starts_with("sidewalk") {
        "Road"
    } else if n.starts_with("school") {
        "School"
    } else if n.starts_with("bus stop") {
        "BusStop"
    } else if n.starts_with("crosswalk") {
        "Crosswalk"
    } else if n.starts_with("crash") {
        "Crash"
    } else {
        "Town"
    }
}

fn entity_of_name(name: &str, bus_stop_suffix: bool) -> &'static str {
    if bus_stop_suffix || name.contains('@') {
        "BusStop"
    } else if name.contains("School") || name.contains("Academy") {
        "School"
    } else {
        "Town"
    }
}

fn crash_field(modifier: &str) -> &'static str {
    match modifier {
        "fatal" | "fatality" | "deadly" | "injury" | "injured" | "pdo" => "severity",
        _ => "first_hrmf",
    }
}

fn speed_operator(word: &str) -> Operator {
    match word {
        "above" | "over" | "more than" | "greater than" => Operator::Gt,
        "below" | "under" | "less than" => Operator::Lt,
        "at least" => Operator::Gte,
        "at most" => Operator::Lte,
        _ => Operator::Eq,
    }
}

struct Attr {
    on_road: bool,
    field: &'static str,
    operator: Operator,
    value: AttrValue,
}

fn text(s: &str) -> Scalar {
    Scalar::Text(s.to_string())
}

/// Raw frame for `query`; `supported: false` when the question is outside
/// the grammar.
pub fn rule_based_interpret(query: &str) -> SemanticFrame {
    parse(query).unwrap_or_else(SemanticFrame::unsupported)
}

fn parse(query: &str) -> Option<SemanticFrame> {
    let g = &*GRAMMAR;
    let cleaned = query.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut q = Text(cleaned.trim_end_matches(['.', '?', '!']).to_string());

    let top_n = match q.take(&g.rank_head) {
        Some(caps) => Some(caps.iter().find(|c| !c.is_empty())?.parse::<u32>().ok()?),
        None => {
            q.take(&g.show_head)?;
            None
        }
    };
    let ranking = top_n.is_some();

    let mut attrs: Vec<Attr> = Vec::new();
    let mut crash_attr = |field, operator, value| {
        attrs.push(Attr {
            on_road: false,
            field,
            operator,
            value,
        })
    };
    if let Some(c) = q.take(&g.date_range) {
        crash_attr("crash_date", Operator::Between, AttrValue::Many(vec![text(&c[0]), text(&c[1])]));
    }
    if let Some(c) = q.take(&g.clock_range) {
        crash_attr("crash_time", Operator::Between, AttrValue::Many(vec![text(&c[0]), text(&c[1])]));
    }
    if let Some(c) = q.take(&g.date_bound) {
        let op = match c[0].as_str() {
            "before" => Operator::Lt,
            "after" => Operator::Gt,
            _ => Operator::Gte,
        };
        crash_attr("crash_date", op, AttrValue::One(text(&c[1])));
    }
    if let Some(c) = q.take(&g.clock_bound) {
        let op = if c[0] == "before" { Operator::Lt } else { Operator::Gte };
        crash_attr("crash_time", op, AttrValue::One(text(&c[1])));
    }
    if let Some(c) = q.take(&g.year) {
        crash_attr(
            "crash_date",
            Operator::Between,
            AttrValue::Many(vec![text(&format!("{}-01-01", c[0])), text(&format!("{}-12-31", c[0]))]),
        );
    }

    // (name, entity, distance)
    let anchor = if let Some(c) = q.take(&g.around_name) {
        Some((c[0].clone(), entity_of_name(&c[0], !c[1].is_empty()), c[2].clone()))
    } else if let Some(c) = q.take(&g.within_name) {
        Some((c[1].clone(), entity_of_name(&c[1], !c[2].is_empty()), c[0].clone()))
    } else {
        q.take(&g.near_name)
            .map(|c| (c[0].clone(), entity_of_name(&c[0], !c[1].is_empty()), "near".to_string()))
    };
    // (entity, distance)
    let plural = q.take(&g.plural).map(|c| {
        let d = if c[0].is_empty() { "near".to_string() } else { c[0].clone() };
        (entity_of_noun(&c[1]), d)
    });
    let bare = q.take(&g.bare_within).map(|c| c[0].clone());

    if let Some(c) = q.take(&g.speed) {
        attrs.push(Attr {
            on_road: true,
            field: "speed_limit",
            operator: speed_operator(&c[0]),
            value: AttrValue::One(Scalar::Number(c[1].parse().ok()?)),
        });
    }
    if q.take(&g.sidewalks).is_some() {
        for field in ["sidewalk_left", "sidewalk_right"] {
            attrs.push(Attr {
                on_road: true,
                field,
                operator: Operator::Eq,
                value: AttrValue::One(text("no")),
            });
        }
    }
    if let Some(c) = q.take(&g.junction) {
        attrs.push(Attr {
            on_road: false,
            field: "junction_type",
            operator: Operator::Eq,
            value: AttrValue::One(text(&c[0])),
        });
    }
    let scope = q.take(&g.scope).map(|c| c[0].clone());
    let order = q.take(&g.order).map(|c| c[0].clone());
    q.take(&g.by);

    let mut nouns: Vec<(usize, &'static str)> = Vec::new();
    if let Some((at, c)) = q.take_at(&g.crashes) {
        nouns.push((at, "Crash"));
        for m in c[0].split_whitespace() {
            attrs.push(Attr {
                on_road: false,
                field: crash_field(m),
                operator: Operator::Eq,
                value: AttrValue::One(text(m)),
            });
        }
    }
    while let Some((at, c)) = q.take_at(&g.entity) {
        nouns.push((at, entity_of_noun(&c[0])));
    }
    nouns.sort_by_key(|(at, _)| *at);

    let mut targets: Vec<(&str, Role)> = Vec::new();
    let mut spatial: Vec<SpatialConstraint> = Vec::new();
    let within = |target: Role, reference: Role, d: &str| SpatialConstraint {
        relation: Relation::WithinDistance.into(),
        target_role: target.into(),
        reference_role: reference.into(),
        distance_m: Some(text(d)),
    };
    if ranking {
        let primary = nouns.iter().map(|n| n.1).find(|e| *e != "Crash")?;
        nouns.iter().find(|n| n.1 == "Crash")?;
        targets.push((primary, Role::Primary));
        targets.push(("Crash", Role::Support));
        if let Some(d) = &bare {
            spatial.push(within(Role::Support, Role::Primary, d));
        }
        if let Some((e, d)) = &plural {
            targets.push((e, Role::Filter));
            spatial.push(within(Role::Support, Role::Filter, d));
        }
    } else {
        targets.push((nouns.first()?.1, Role::Primary));
        if let Some((e, d)) = &plural {
            targets.push((e, Role::Support));
            spatial.push(within(Role::Primary, Role::Support, d));
        }
    }
    let mut references = Vec::new();
    if let Some((name, entity, d)) = &anchor {
        targets.push((entity, Role::Anchor));
        references.push(GeoReference::new(entity, Role::Anchor, name));
        spatial.push(within(Role::Primary, Role::Anchor, d));
    }
    if let Some(name) = &scope {
        targets.push(("Town", Role::Scope));
        references.push(GeoReference::new("Town", Role::Scope, name));
    }

    let role_of = |entity: &str| targets.iter().find(|t| t.0 == entity).map(|t| t.1);
    let attribute_constraints = attrs
        .into_iter()
        .filter_map(|a| {
            let role = if a.on_road {
                role_of("Road").or_else(|| role_of("Crash"))
            } else {
                role_of("Crash")
            }?;
            Some(AttributeConstraint {
                target_role: role.into(),
                field: a.field.into(),
                operator: a.operator.into(),
                value: Some(a.value),
            })
        })
        .collect();

    let ranking = top_n.map(|n| RankingSpec {
        metric: Metric::CrashCount.into(),
        target_role: Role::Primary.into(),
        order: Token::Raw(order.unwrap_or_else(|| "top".into())),
        top_n: n,
    });

    Some(SemanticFrame {
        supported: true,
        targets: targets
            .into_iter()
            .map(|(e, r)| TargetBinding {
                entity: e.into(),
                role: r.into(),
            })
            .collect(),
        references,
        spatial_constraints: spatial,
        attribute_constraints,
        relations: Vec::new(),
        ranking,
    })
}
