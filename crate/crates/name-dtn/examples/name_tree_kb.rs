//! Maintain a knowledge base of advertised names and resolve queries
//! against it: insert, refresh, lookup, expiry, and a full dump.
//!
//! Run with `cargo run --example name_tree_kb`.

use name_dtn::name_tree::{NameRecord, NameTree};
use name_dtn::specifier::NameSpecifier;

fn record(eid: &str, expires_at: f64) -> NameRecord {
    NameRecord {
        destination_eid: eid.into(),
        next_hop_eids: vec![],
        expires_at,
    }
}

fn main() {
    let mut kb = NameTree::new();

    let alpha = NameSpecifier::parse("[role=general [mission=rescue]] [unit=alpha]").unwrap();
    let bravo = NameSpecifier::parse("[role=general [mission=supply]] [unit=bravo]").unwrap();
    let medic = NameSpecifier::parse("[role=medic] [unit=alpha]").unwrap();

    kb.insert(&alpha, record("dtn://alpha-hq", 100.0), 0.0);
    kb.insert(&bravo, record("dtn://bravo-hq", 50.0), 0.0);
    kb.insert(&medic, record("dtn://field-medic", 100.0), 0.0);

    // Names with shared attributes merge into one tree, so a lookup walks
    // it once instead of scanning every stored specifier.
    println!("knowledge base at t=0:\n{}", kb.dump());

    let all_generals = NameSpecifier::parse("[role=general]").unwrap();
    let in_alpha = NameSpecifier::parse("[unit=alpha]").unwrap();
    for (label, q) in [("[role=general]", &all_generals), ("[unit=alpha]", &in_alpha)] {
        let eids: Vec<String> = kb
            .lookup(q, 10.0)
            .into_iter()
            .map(|r| r.destination_eid)
            .collect();
        println!("lookup {label:<16} at t=10 -> {eids:?}");
    }

    // Re-advertising the same (name, eid) refreshes its lifetime in place.
    kb.insert(&bravo, record("dtn://bravo-hq", 500.0), 40.0);

    // Expiry removes records whose lifetime has passed and prunes any tree
    // branches no live record references.
    let removed = kb.expire(200.0);
    println!("\nexpire(t=200) removed {removed} record(s)");
    println!("knowledge base at t=200:\n{}", kb.dump());
}
