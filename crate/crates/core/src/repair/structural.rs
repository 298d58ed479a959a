//! The three structural corrections: dropping targets nothing refers to,
//! merging repeated attribute constraints, and dropping spatial
//! constraints that point at unbound roles.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::validate::{spurious_targets, target_label};
use super::{rules, ActionKind, RepairAction};
use crate::frame::{canonical_attribute, SemanticFrame};

fn action(path: String, before: String, after: String, rule_id: &str) -> RepairAction {
    RepairAction {
        kind: ActionKind::Structural,
        path,
        before,
        after,
        rule_id: rule_id.into(),
    }
}

fn describe_attribute(c: &crate::frame::AttributeConstraint) -> String {
    let value = c
        .value
        .as_ref()
        .map(super::normalize::display_value)
        .unwrap_or_default();
    format!("{} {} {} {}", c.target_role, c.field, c.operator, value)
        .trim_end()
        .into()
}

pub fn structural_repair(frame: &SemanticFrame) -> (SemanticFrame, Vec<RepairAction>) {
    let mut f = frame.clone();
    let mut actions = Vec::new();

    let spurious = spurious_targets(&f);
    for &i in &spurious {
        let t = &f.targets[i];
        actions.push(action(
            format!("targets[{i}]"),
            target_label(&t.entity, &t.role),
            "removed".into(),
            rules::REMOVE_TARGET,
        ));
    }
    for &i in spurious.iter().rev() {
        f.targets.remove(i);
    }

    let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut dupes = Vec::new();
    for (i, c) in f.attribute_constraints.iter().enumerate() {
        let key = serde_json::to_string(&canonical_attribute(c)).expect("serializes");
        match first_seen.get(&key) {
            Some(&j) => {
                actions.push(action(
                    format!("attribute_constraints[{i}]"),
                    describe_attribute(c),
                    format!("merged into attribute_constraints[{j}]"),
                    rules::MERGE_DUPLICATE,
                ));
                dupes.push(i);
            }
            None => {
                first_seen.insert(key, i);
            }
        }
    }
    for &i in dupes.iter().rev() {
        f.attribute_constraints.remove(i);
    }

    let mut dangling = Vec::new();
    for (i, c) in f.spatial_constraints.iter().enumerate() {
        let unbound = [&c.target_role, &c.reference_role]
            .into_iter()
            .any(|r| r.known().is_some_and(|role| !f.has_role(role)));
        if unbound {
            actions.push(action(
                format!("spatial_constraints[{i}]"),
                format!("{} {} -> {}", c.relation, c.target_role, c.reference_role),
                "removed".into(),
                rules::DROP_DANGLING,
            ));
            dangling.push(i);
        }
    }
    for &i in dangling.iter().rev() {
        f.spatial_constraints.remove(i);
    }

    (f, actions)
}
