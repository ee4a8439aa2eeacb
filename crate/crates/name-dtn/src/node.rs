//! Per-node state machine: application registration, location beaconing,
//! bundle acceptance with duplicate suppression, and the STEM/FLOOD
//! predicate-based routing decision.
//!
//! A custodian strictly outside the target region routes STEM: forward to
//! the known neighbor closest to the predicate center, provided it is
//! strictly closer than the custodian itself, otherwise hold and retry on
//! the next contact or beacon. Inside the region the state flips to FLOOD
//! and the bundle goes to every known neighbor whose location satisfies
//! the predicate, except the link it arrived from.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bundle::{self, Bundle, RoutingState};
use crate::geo::{self, GeoPoint, WithinPredicate};
use crate::name_tree::{NameRecord, NameTree};
use crate::specifier::NameSpecifier;
use crate::{Eid, SimTime};

/// Destination specifier marking a one-hop location beacon.
pub const BEACON_SPECIFIER: &str = "[beacon=location-update]";

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NodeError {
    #[error("STEM/FLOOD bundle {0} has no scope predicate")]
    MissingPredicate(String),
    #[error("bundle {0} is not pending at this node")]
    UnknownBundle(String),
    #[error("malformed beacon payload")]
    MalformedBeacon,
}

/// One row of the beacon-fed location table.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTableEntry {
    pub eid: Eid,
    pub location: GeoPoint,
    pub updated_at: SimTime,
}

/// Why a bundle was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Ttl,
}

/// The forwarding half of a routing decision.
#[derive(Debug, Clone, PartialEq)]
pub enum Forwarding {
    /// Expired; remove from the pending table.
    Drop(DropReason),
    /// Envelope leg: send to the next resolver, currently a neighbor.
    PointToPoint { next: Eid },
    /// Greedy geographic step toward the predicate center.
    Stem { next: Eid },
    /// Predicate-scoped epidemic step; may be empty inside the region.
    Flood { targets: Vec<Eid> },
    /// STEM with no strictly-closer neighbor (or an unreachable resolver):
    /// keep custody and retry later.
    Hold,
    /// Everything eligible was already sent; nothing to do this round.
    Idle,
}

/// Outcome of one routing evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    /// Newly matched local application EIDs, sorted; already-delivered
    /// (bundle, app) pairs are not repeated.
    pub deliver: Vec<Eid>,
    pub forwarding: Forwarding,
    /// Set when the MEB routing state changed, with the evaluated
    /// distance-to-center in km.
    pub state_change: Option<(RoutingState, f64)>,
}

/// Result of offering a bundle to a node.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptOutcome {
    /// Queued for routing; carries the pending bundle id (the inner id when
    /// an envelope was unwrapped on arrival).
    Accepted { bundle_id: String },
    /// Seen before; suppressed.
    Duplicate,
    /// Dead on arrival.
    Expired,
    /// Location beacon, applied to the node table and never queued.
    Beacon,
    /// Beacon or envelope payload that failed to parse.
    Malformed,
}

#[derive(Debug)]
struct PendingBundle {
    bundle: Bundle,
    received_from: Option<Eid>,
    /// Neighbors this node has already offered this bundle to.
    sent_to: BTreeSet<Eid>,
}

/// BPA + resolver + router state for one simulated node.
#[derive(Debug)]
pub struct NodeState {
    canonical_eid: Eid,
    pub location: GeoPoint,
    pub kb: NameTree,
    node_table: BTreeMap<Eid, NodeTableEntry>,
    pending: BTreeMap<String, PendingBundle>,
    seen_ids: BTreeSet<String>,
    registrations: Vec<(Eid, NameSpecifier)>,
    delivered: Vec<(String, Eid, SimTime)>,
    delivered_keys: BTreeSet<(String, Eid)>,
    beacon_seq: u64,
}

impl NodeState {
    pub fn new(canonical_eid: impl Into<Eid>, location: GeoPoint) -> Self {
        NodeState {
            canonical_eid: canonical_eid.into(),
            location,
            kb: NameTree::new(),
            node_table: BTreeMap::new(),
            pending: BTreeMap::new(),
            seen_ids: BTreeSet::new(),
            registrations: Vec::new(),
            delivered: Vec::new(),
            delivered_keys: BTreeSet::new(),
            beacon_seq: 0,
        }
    }

    pub fn canonical_eid(&self) -> &str {
        &self.canonical_eid
    }

    pub fn node_table(&self) -> &BTreeMap<Eid, NodeTableEntry> {
        &self.node_table
    }

    pub fn registrations(&self) -> &[(Eid, NameSpecifier)] {
        &self.registrations
    }

    pub fn delivered(&self) -> &[(String, Eid, SimTime)] {
        &self.delivered
    }

    pub fn pending_ids(&self) -> Vec<String> {
        self.pending.keys().cloned().collect()
    }

    pub fn pending_bundle(&self, id: &str) -> Option<&Bundle> {
        self.pending.get(id).map(|p| &p.bundle)
    }

    pub fn remove_pending(&mut self, id: &str) -> Option<Bundle> {
        self.pending.remove(id).map(|p| p.bundle)
    }

    /// Application registration: binds `ns` to `app_eid` in the local KB
    /// and records it for delivery matching.
    pub fn register(&mut self, app_eid: impl Into<Eid>, ns: NameSpecifier, lifetime: f64, now: SimTime) {
        let app_eid = app_eid.into();
        self.kb.insert(
            &ns,
            NameRecord {
                destination_eid: app_eid.clone(),
                next_hop_eids: Vec::new(),
                expires_at: now + lifetime,
            },
            now,
        );
        if !self
            .registrations
            .iter()
            .any(|(eid, spec)| *eid == app_eid && *spec == ns)
        {
            self.registrations.push((app_eid, ns));
        }
    }

    /// Builds the periodic one-hop location beacon.
    pub fn make_beacon(&mut self, beacon_period: f64, now: SimTime) -> Bundle {
        self.beacon_seq += 1;
        let payload = format!(
            "{} {} {} {}",
            self.canonical_eid,
            self.location.longitude(),
            self.location.latitude(),
            now
        );
        Bundle {
            bundle_id: format!("beacon:{}:{}", self.canonical_eid, self.beacon_seq),
            source_specifier: NameSpecifier::parse(&format!("[eid={}]", self.canonical_eid))
                .expect("canonical EID is a valid value token"),
            destination_specifier: NameSpecifier::parse(BEACON_SPECIFIER).unwrap(),
            meb: bundle::MetadataExtensionBlock::scoped(
                RoutingState::Flood,
                None,
                Some(beacon_period),
            )
            .expect("ttl present"),
            payload: payload.into_bytes(),
            created_at: now,
            hop_count: 0,
        }
    }

    /// Applies a received location beacon: upsert if its timestamp is newer
    /// than the stored entry. Beacons are never re-forwarded.
    pub fn apply_beacon(&mut self, beacon: &Bundle, _now: SimTime) -> Result<(), NodeError> {
        let payload =
            std::str::from_utf8(&beacon.payload).map_err(|_| NodeError::MalformedBeacon)?;
        let parts: Vec<&str> = payload.split(' ').collect();
        let [eid, lon, lat, at] = parts.as_slice() else {
            return Err(NodeError::MalformedBeacon);
        };
        let lon: f64 = lon.parse().map_err(|_| NodeError::MalformedBeacon)?;
        let lat: f64 = lat.parse().map_err(|_| NodeError::MalformedBeacon)?;
        let at: f64 = at.parse().map_err(|_| NodeError::MalformedBeacon)?;
        let location = GeoPoint::new(lon, lat).map_err(|_| NodeError::MalformedBeacon)?;
        match self.node_table.get(*eid) {
            Some(existing) if existing.updated_at >= at => {} // stale
            _ => {
                self.node_table.insert(
                    eid.to_string(),
                    NodeTableEntry {
                        eid: eid.to_string(),
                        location,
                        updated_at: at,
                    },
                );
            }
        }
        Ok(())
    }

    /// Refreshes the next-hop hints on this node's own registrations from
    /// the current neighbor set.
    pub fn refresh_next_hops(&mut self, neighbors: &[Eid]) {
        let apps: Vec<Eid> = self.registrations.iter().map(|(eid, _)| eid.clone()).collect();
        for app in apps {
            self.kb.update_next_hops(&app, neighbors);
        }
    }

    /// Offers a bundle to this node. Duplicates and expired bundles are
    /// rejected; beacons update the node table without queueing; an
    /// envelope addressed to this node is unwrapped and its inner bundle
    /// re-enters acceptance.
    pub fn accept_bundle(&mut self, b: Bundle, from: Option<&str>, now: SimTime) -> AcceptOutcome {
        if b.destination_specifier.serialize() == BEACON_SPECIFIER {
            return match self.apply_beacon(&b, now) {
                Ok(()) => AcceptOutcome::Beacon,
                Err(_) => AcceptOutcome::Malformed,
            };
        }
        if self.seen_ids.contains(&b.bundle_id) {
            return AcceptOutcome::Duplicate;
        }
        if b.is_expired(now) {
            return AcceptOutcome::Expired;
        }
        if b.meb.next_resolver_eid() == Some(self.canonical_eid.as_str()) {
            // Envelope reached its resolver: unwrap and re-enter.
            self.seen_ids.insert(b.bundle_id.clone());
            return match bundle::decode(&b.payload) {
                Ok(inner) => self.accept_bundle(inner, from, now),
                Err(_) => AcceptOutcome::Malformed,
            };
        }
        let mut b = b;
        if from.is_some() {
            b.hop_count += 1;
        }
        self.seen_ids.insert(b.bundle_id.clone());
        let id = b.bundle_id.clone();
        self.pending.insert(
            id.clone(),
            PendingBundle {
                bundle: b,
                received_from: from.map(str::to_string),
                sent_to: BTreeSet::new(),
            },
        );
        AcceptOutcome::Accepted { bundle_id: id }
    }

    /// Local (early-binding) resolution: destination EIDs the KB can bind
    /// the query to right now. Empty means route by name instead.
    pub fn resolve_local(&self, query: &NameSpecifier, now: SimTime) -> Vec<Eid> {
        self.kb
            .lookup(query, now)
            .into_iter()
            .map(|r| r.destination_eid)
            .collect()
    }

    /// Evaluates the routing algorithm for one pending bundle against the
    /// currently reachable known neighbors.
    ///
    /// `neighbors` must already be restricted to nodes this custodian both
    /// has a live link to and knows a location for (the node-table
    /// intersection); positions are the known ones.
    pub fn route_bundle(
        &mut self,
        bundle_id: &str,
        neighbors: &[(Eid, GeoPoint)],
        now: SimTime,
    ) -> Result<RoutingDecision, NodeError> {
        let pending = self
            .pending
            .get_mut(bundle_id)
            .ok_or_else(|| NodeError::UnknownBundle(bundle_id.to_string()))?;

        if pending.bundle.is_expired(now) {
            return Ok(RoutingDecision {
                deliver: Vec::new(),
                forwarding: Forwarding::Drop(DropReason::Ttl),
                state_change: None,
            });
        }

        // Point-to-point leg of an envelope: head straight for the resolver.
        if let Some(resolver) = pending.bundle.meb.next_resolver_eid() {
            let resolver = resolver.to_string();
            let reachable = neighbors.iter().any(|(eid, _)| *eid == resolver);
            let forwarding = if !reachable {
                Forwarding::Hold
            } else if pending.sent_to.contains(&resolver) {
                Forwarding::Idle
            } else {
                pending.sent_to.insert(resolver.clone());
                Forwarding::PointToPoint { next: resolver }
            };
            return Ok(RoutingDecision {
                deliver: Vec::new(),
                forwarding,
                state_change: None,
            });
        }

        let pred = pending
            .bundle
            .meb
            .scope_predicate
            .ok_or_else(|| NodeError::MissingPredicate(bundle_id.to_string()))?;

        // Delivery to matching local registrations, at most once per app.
        let mut deliver = Vec::new();
        for (app, spec) in &self.registrations {
            if pending.bundle.destination_specifier.matches(spec) {
                let key = (bundle_id.to_string(), app.clone());
                if !self.delivered_keys.contains(&key) {
                    self.delivered_keys.insert(key);
                    self.delivered
                        .push((bundle_id.to_string(), app.clone(), now));
                    deliver.push(app.clone());
                }
            }
        }
        deliver.sort();
        deliver.dedup();

        let own_distance = geo::distance(&self.location, &pred.center);
        let outside = own_distance > pred.radius_km();
        let new_state = if outside { RoutingState::Stem } else { RoutingState::Flood };
        let state_change = if pending.bundle.meb.routing_state() != new_state {
            pending.bundle.meb.set_routing_state(new_state);
            Some((new_state, own_distance))
        } else {
            None
        };

        let forwarding = if outside {
            stem_step(pending, &pred, neighbors, own_distance)
        } else {
            flood_step(pending, &pred, neighbors)
        };

        Ok(RoutingDecision {
            deliver,
            forwarding,
            state_change,
        })
    }
}

/// Greedy step: neighbor minimizing distance to center among those strictly
/// closer than the custodian; ties broken by smallest EID.
fn stem_step(
    pending: &mut PendingBundle,
    pred: &WithinPredicate,
    neighbors: &[(Eid, GeoPoint)],
    own_distance: f64,
) -> Forwarding {
    let mut best: Option<(f64, &Eid)> = None;
    let mut any_closer = false;
    for (eid, loc) in neighbors {
        let d = geo::distance(loc, &pred.center);
        if d >= own_distance {
            continue;
        }
        any_closer = true;
        if pending.sent_to.contains(eid) {
            continue;
        }
        best = match best {
            Some((bd, beid)) if (bd, beid.as_str()) <= (d, eid.as_str()) => Some((bd, beid)),
            _ => Some((d, eid)),
        };
    }
    match best {
        Some((_, eid)) => {
            let eid = eid.clone();
            pending.sent_to.insert(eid.clone());
            Forwarding::Stem { next: eid }
        }
        None if any_closer => Forwarding::Idle,
        None => Forwarding::Hold,
    }
}

/// Epidemic step inside the region: every known neighbor satisfying the
/// predicate, except the arrival link and anyone already offered the
/// bundle.
fn flood_step(
    pending: &mut PendingBundle,
    pred: &WithinPredicate,
    neighbors: &[(Eid, GeoPoint)],
) -> Forwarding {
    let targets: Vec<Eid> = neighbors
        .iter()
        .filter(|(eid, loc)| {
            pred.contains(loc)
                && pending.received_from.as_deref() != Some(eid.as_str())
                && !pending.sent_to.contains(eid)
        })
        .map(|(eid, _)| eid.clone())
        .collect();
    for eid in &targets {
        pending.sent_to.insert(eid.clone());
    }
    Forwarding::Flood { targets }
}
