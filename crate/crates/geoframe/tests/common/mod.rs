//! Shared helpers for integration tests: the shipped registry, a cached
//! small fixture, random frames drawn over the registry and a brute-force
//! reference evaluator.
#![allow(dead_code)]

pub mod frames;
pub mod oracle;

use std::sync::OnceLock;

use geoframe::registry::default_registry;
use geoframe::table::default_table;
use geoframe_core::fixture::{generate_fixture, Fixture, FixtureSpec};
use geoframe_core::frame::SemanticFrame;
use geoframe_core::repair::{ambiguous_references, pick_candidate, repair, Gazetteer, NormalizationTable, RepairContext};
use geoframe_core::schema::SchemaRegistry;

pub fn registry() -> &'static SchemaRegistry {
    static R: OnceLock<SchemaRegistry> = OnceLock::new();
    R.get_or_init(default_registry)
}

pub fn table() -> &'static NormalizationTable {
    static T: OnceLock<NormalizationTable> = OnceLock::new();
    T.get_or_init(default_table)
}

/// Seed 1, at most 1,500 records per entity.
pub fn small_fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| generate_fixture(1, FixtureSpec::small(), registry()).expect("fixture builds"))
}

pub fn gazetteer() -> &'static Gazetteer {
    static G: OnceLock<Gazetteer> = OnceLock::new();
    G.get_or_init(|| {
        let f = small_fixture();
        Gazetteer::from_dataset(registry(), &f.dataset).with_entries(f.places.clone())
    })
}

/// Repairs a raw frame against the small fixture, taking the first
/// candidate of any ambiguous reference. None when repair rejects it.
pub fn validated(raw: &SemanticFrame) -> Option<SemanticFrame> {
    let cx = RepairContext {
        registry: registry(),
        table: table(),
        gazetteer: gazetteer(),
    };
    let (mut f, _) = repair(cx, raw).ok()?;
    while let Some(&i) = ambiguous_references(&f).first() {
        f = pick_candidate(&f, i, 1).ok()?;
    }
    Some(f)
}
