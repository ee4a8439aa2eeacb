//! Merged name-tree storage: the union of every name-specifier a node
//! knows about, with leaf values pointing at name-records.
//!
//! Unlike a single specifier, an attribute node here can carry many values
//! (`role` may hold both `general` and `soldier`). Shared prefixes are
//! stored once; each record is reachable from every node its specifier
//! traverses.

use std::collections::{BTreeMap, BTreeSet};

use crate::specifier::{AvPair, NameSpecifier};
use crate::{Eid, SimTime};

/// Opaque handle for a stored record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordId(u64);

/// The stored binding: final destination EID, next-hop hints, lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct NameRecord {
    pub destination_eid: Eid,
    pub next_hop_eids: Vec<Eid>,
    pub expires_at: SimTime,
}

#[derive(Debug, Default)]
struct Level {
    attributes: BTreeMap<String, AttrNode>,
}

#[derive(Debug, Default)]
struct AttrNode {
    values: BTreeMap<String, ValueNode>,
}

#[derive(Debug, Default)]
struct ValueNode {
    children: Level,
    /// Every record whose specifier passes through this value node. A
    /// record whose specifier path ends here is referenced by this leaf.
    records: BTreeSet<RecordId>,
}

#[derive(Debug)]
struct StoredRecord {
    specifier: NameSpecifier,
    record: NameRecord,
}

/// The per-node name knowledge base.
#[derive(Debug, Default)]
pub struct NameTree {
    root: Level,
    records: BTreeMap<RecordId, StoredRecord>,
    /// (canonical specifier text, destination EID) -> record, for refresh.
    by_key: BTreeMap<(String, Eid), RecordId>,
    next_id: u64,
}

impl NameTree {
    pub fn new() -> Self {
        NameTree::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Merges `ns` into the tree and binds it to `record`. Re-inserting the
    /// same (specifier, destination EID) refreshes the existing record's
    /// next hops and expiry instead of duplicating it.
    pub fn insert(&mut self, ns: &NameSpecifier, record: NameRecord, now: SimTime) -> RecordId {
        debug_assert!(record.expires_at >= now);
        let key = (ns.serialize(), record.destination_eid.clone());
        if let Some(&id) = self.by_key.get(&key) {
            let stored = self.records.get_mut(&id).expect("keyed record exists");
            stored.record.next_hop_eids = record.next_hop_eids;
            stored.record.expires_at = record.expires_at;
            return id;
        }
        let id = RecordId(self.next_id);
        self.next_id += 1;
        merge_pairs(&mut self.root, ns.roots(), id);
        self.records.insert(
            id,
            StoredRecord {
                specifier: ns.clone(),
                record,
            },
        );
        self.by_key.insert(key, id);
        id
    }

    /// All unexpired records whose inserted specifier is matched by `query`,
    /// sorted by destination EID (then insertion order).
    pub fn lookup(&self, query: &NameSpecifier, now: SimTime) -> Vec<NameRecord> {
        let ids = match_level(&self.root, query.roots());
        let mut out: Vec<&StoredRecord> = ids
            .iter()
            .filter_map(|id| self.records.get(id))
            .filter(|s| s.record.expires_at >= now)
            .collect();
        out.sort_by(|a, b| a.record.destination_eid.cmp(&b.record.destination_eid));
        out.into_iter().map(|s| s.record.clone()).collect()
    }

    /// Removes records whose expiry lies strictly in the past and prunes
    /// tree nodes left without any records. Returns the number removed.
    pub fn expire(&mut self, now: SimTime) -> usize {
        let dead: Vec<RecordId> = self
            .records
            .iter()
            .filter(|(_, s)| s.record.expires_at < now)
            .map(|(&id, _)| id)
            .collect();
        for id in &dead {
            let stored = self.records.remove(id).expect("listed id exists");
            remove_pairs(&mut self.root, stored.specifier.roots(), *id);
            self.by_key
                .remove(&(stored.specifier.serialize(), stored.record.destination_eid));
        }
        dead.len()
    }

    /// Rewrites the next-hop hints on every record bound to `destination`.
    pub fn update_next_hops(&mut self, destination: &str, next_hops: &[Eid]) {
        for stored in self.records.values_mut() {
            if stored.record.destination_eid == destination {
                stored.record.next_hop_eids = next_hops.to_vec();
            }
        }
    }

    /// Debug dump: one line per record, `<eid> <expires_at> <specifier>`,
    /// sorted by EID then specifier text.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = self
            .records
            .values()
            .map(|s| {
                format!(
                    "{} {} {}",
                    s.record.destination_eid,
                    s.record.expires_at,
                    s.specifier.serialize()
                )
            })
            .collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    #[cfg(test)]
    fn value_count(&self, attribute: &str) -> usize {
        self.root
            .attributes
            .get(attribute)
            .map(|a| a.values.len())
            .unwrap_or(0)
    }
}

fn merge_pairs(level: &mut Level, pairs: &[AvPair], id: RecordId) {
    for pair in pairs {
        let node = level
            .attributes
            .entry(pair.attribute().to_string())
            .or_default()
            .values
            .entry(pair.value().to_string())
            .or_default();
        node.records.insert(id);
        merge_pairs(&mut node.children, pair.children(), id);
    }
}

fn remove_pairs(level: &mut Level, pairs: &[AvPair], id: RecordId) {
    for pair in pairs {
        let attr_empty = {
            let Some(attr) = level.attributes.get_mut(pair.attribute()) else {
                continue;
            };
            if let Some(node) = attr.values.get_mut(pair.value()) {
                node.records.remove(&id);
                remove_pairs(&mut node.children, pair.children(), id);
                if node.records.is_empty() {
                    attr.values.remove(pair.value());
                }
            }
            attr.values.is_empty()
        };
        if attr_empty {
            level.attributes.remove(pair.attribute());
        }
    }
}

/// Records satisfying every query pair at this level: the record must pass
/// through a value node with the pair's attribute and exact value, and its
/// own subtree must satisfy the pair's children.
fn match_level(level: &Level, query: &[AvPair]) -> BTreeSet<RecordId> {
    let mut result: Option<BTreeSet<RecordId>> = None;
    for pair in query {
        let ids = match level
            .attributes
            .get(pair.attribute())
            .and_then(|a| a.values.get(pair.value()))
        {
            Some(node) => {
                if pair.children().is_empty() {
                    node.records.clone()
                } else {
                    let nested = match_level(&node.children, pair.children());
                    node.records.intersection(&nested).copied().collect()
                }
            }
            None => BTreeSet::new(),
        };
        result = Some(match result {
            None => ids,
            Some(acc) => acc.intersection(&ids).copied().collect(),
        });
    }
    result.unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ns(s: &str) -> NameSpecifier {
        NameSpecifier::parse(s).unwrap()
    }

    fn rec(eid: &str, expires: f64) -> NameRecord {
        NameRecord {
            destination_eid: eid.to_string(),
            next_hop_eids: vec![],
            expires_at: expires,
        }
    }

    #[test]
    fn attribute_holds_many_values() {
        let mut tree = NameTree::new();
        tree.insert(&ns("[role=general]"), rec("dtn://a", 100.0), 0.0);
        tree.insert(&ns("[role=soldier]"), rec("dtn://b", 100.0), 0.0);
        assert_eq!(tree.value_count("role"), 2);
        assert_eq!(tree.len(), 2);
    }

    #[test]
    fn reinsert_refreshes_instead_of_duplicating() {
        let mut tree = NameTree::new();
        let a = tree.insert(&ns("[role=general]"), rec("dtn://a", 50.0), 0.0);
        let b = tree.insert(&ns("[role=general]"), rec("dtn://a", 200.0), 0.0);
        assert_eq!(a, b);
        assert_eq!(tree.len(), 1);
        let hits = tree.lookup(&ns("[role=general]"), 100.0);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].expires_at, 200.0);
    }

    #[test]
    fn every_leaf_references_the_record() {
        let mut tree = NameTree::new();
        let full = ns(
            "[role=general [mission=command]] \
             [location=known [longitude=116 degrees] [latitude=112 degrees]]",
        );
        tree.insert(&full, rec("dtn://a", 100.0), 0.0);
        // Each leaf path, used as a query, reaches the same record.
        for q in [
            "[role=general [mission=command]]",
            "[location=known [longitude=116 degrees]]",
            "[location=known [latitude=112 degrees]]",
        ] {
            let hits = tree.lookup(&ns(q), 0.0);
            assert_eq!(hits.len(), 1, "query {q}");
            assert_eq!(hits[0].destination_eid, "dtn://a");
        }
    }

    #[test]
    fn lookup_filters_and_orders() {
        let mut tree = NameTree::new();
        tree.insert(&ns("[role=general [mission=command]]"), rec("dtn://a", 100.0), 0.0);
        tree.insert(&ns("[role=soldier]"), rec("dtn://b", 100.0), 0.0);
        let hits = tree.lookup(&ns("[role=general]"), 0.0);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].destination_eid, "dtn://a");
        assert!(tree.lookup(&ns("[rank=colonel]"), 0.0).is_empty());
    }

    #[test]
    fn merged_roots_do_not_cross_records() {
        // A compound query must match one record's own specifier, not the
        // union of attributes contributed by different records.
        let mut tree = NameTree::new();
        tree.insert(&ns("[role=general]"), rec("dtn://a", 100.0), 0.0);
        tree.insert(&ns("[unit=third]"), rec("dtn://b", 100.0), 0.0);
        assert!(tree.lookup(&ns("[role=general] [unit=third]"), 0.0).is_empty());
    }

    #[test]
    fn expiry_boundary_is_exclusive_past() {
        let mut tree = NameTree::new();
        tree.insert(&ns("[a=b]"), rec("dtn://a", 10.0), 0.0);
        assert_eq!(tree.expire(10.0), 0);
        assert_eq!(tree.lookup(&ns("[a=b]"), 10.0).len(), 1);
        assert_eq!(tree.expire(11.0), 1);
        assert!(tree.lookup(&ns("[a=b]"), 11.0).is_empty());
        assert!(tree.is_empty());
    }

    #[test]
    fn expired_records_are_pruned_from_the_tree() {
        let mut tree = NameTree::new();
        tree.insert(&ns("[role=general]"), rec("dtn://a", 10.0), 0.0);
        tree.insert(&ns("[role=soldier]"), rec("dtn://b", 100.0), 0.0);
        tree.expire(20.0);
        assert_eq!(tree.value_count("role"), 1);
    }

    #[test]
    fn dump_is_sorted_by_eid() {
        let mut tree = NameTree::new();
        tree.insert(&ns("[role=soldier]"), rec("dtn://b", 100.0), 0.0);
        tree.insert(&ns("[role=general]"), rec("dtn://a", 50.0), 0.0);
        assert_eq!(tree.dump(), "dtn://a 50 [role=general]\ndtn://b 100 [role=soldier]\n");
    }
}
