//! Deterministic discrete-event simulation: waypoint mobility, range-based
//! and contact-scheduled connectivity, beaconing, timed transmissions, and
//! metric collection.
//!
//! Determinism contract: given the same scenario (and seed), two runs
//! produce byte-identical traces and metrics. Events at equal times are
//! ordered by a fixed kind rank, then subject EID, then insertion sequence,
//! and all per-node iteration uses sorted maps.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::bundle::{Bundle, RoutingState};
use crate::geo::{self, GeoPoint};
use crate::node::{AcceptOutcome, DropReason, Forwarding, NodeState};
use crate::{Eid, SimTime};

pub const DEFAULT_BEACON_PERIOD_S: f64 = 10.0;
pub const DEFAULT_LATENCY_S: f64 = 0.1;
pub const DEFAULT_MAINTENANCE_TICK_S: f64 = 1.0;
pub const DEFAULT_MOBILITY_TICK_S: f64 = 1.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SimError {
    #[error("event queue is empty")]
    EmptyQueue,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("routing invariant violated: {0}")]
    InvariantViolation(String),
}

/// What a scheduled event does.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A new bundle enters the network at `subject`.
    BundleInject { bundle: Bundle },
    /// Re-sample `subject`'s position along its waypoints.
    NodeMove,
    /// `subject` broadcasts its location beacon and reschedules.
    BeaconDue,
    /// A transmission to `subject` completes.
    TransmitComplete { from: Eid, bundle: Bundle },
    /// Expire KB records and dead bundles, retry held bundles.
    MaintenanceTick,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::BundleInject { .. } => 0,
            EventKind::NodeMove => 1,
            EventKind::BeaconDue => 2,
            EventKind::TransmitComplete { .. } => 3,
            EventKind::MaintenanceTick => 4,
        }
    }
}

/// One time-stamped simulator event.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub at: SimTime,
    pub subject: Eid,
    pub kind: EventKind,
    seq: u64,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at
            .total_cmp(&other.at)
            .then_with(|| self.kind.rank().cmp(&other.kind.rank()))
            .then_with(|| self.subject.cmp(&other.subject))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Run counters plus per-bundle first-delivery latency and hop count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub created: u64,
    pub delivered: u64,
    pub transmissions: u64,
    pub duplicates_suppressed: u64,
    pub drops_ttl: u64,
    pub holds: u64,
    pub first_delivery: BTreeMap<String, (SimTime, u32)>,
}

impl Metrics {
    /// Fraction of created bundles that reached at least one application.
    pub fn delivery_ratio(&self) -> f64 {
        if self.created == 0 {
            0.0
        } else {
            self.first_delivery.len() as f64 / self.created as f64
        }
    }

    pub fn avg_hops(&self) -> f64 {
        if self.first_delivery.is_empty() {
            0.0
        } else {
            let total: u64 = self.first_delivery.values().map(|&(_, h)| h as u64).sum();
            total as f64 / self.first_delivery.len() as f64
        }
    }

    pub fn avg_latency_s(&self) -> f64 {
        if self.first_delivery.is_empty() {
            0.0
        } else {
            let total: f64 = self.first_delivery.values().map(|&(l, _)| l).sum();
            total / self.first_delivery.len() as f64
        }
    }

    /// Flat `key=value` lines, the metrics file format.
    pub fn render(&self) -> String {
        format!(
            "created={}\ndelivered={}\ndelivery_ratio={:.6}\ntransmissions={}\n\
             duplicates_suppressed={}\ndrops_ttl={}\nholds={}\navg_hops={:.6}\navg_latency_s={:.6}\n",
            self.created,
            self.delivered,
            self.delivery_ratio(),
            self.transmissions,
            self.duplicates_suppressed,
            self.drops_ttl,
            self.holds,
            self.avg_hops(),
            self.avg_latency_s(),
        )
    }
}

/// Piecewise-linear waypoint track: the node starts at its declared
/// position and moves at constant speed between consecutive waypoints.
#[derive(Debug, Clone, Default)]
struct Track {
    start: Option<GeoPoint>,
    waypoints: Vec<(SimTime, GeoPoint)>,
}

impl Track {
    fn position_at(&self, t: SimTime) -> Option<GeoPoint> {
        let start = self.start?;
        if self.waypoints.is_empty() {
            return Some(start);
        }
        let mut prev = (0.0, start);
        for &(wt, wp) in &self.waypoints {
            if t <= wt {
                let (pt, pp) = prev;
                if wt <= pt {
                    return Some(wp);
                }
                let f = (t - pt) / (wt - pt);
                let lon = pp.longitude() + (wp.longitude() - pp.longitude()) * f;
                let lat = pp.latitude() + (wp.latitude() - pp.latitude()) * f;
                return GeoPoint::new(lon, lat).ok();
            }
            prev = (wt, wp);
        }
        Some(self.waypoints.last().unwrap().1)
    }
}

/// The whole simulated network.
#[derive(Debug)]
pub struct World {
    pub nodes: BTreeMap<Eid, NodeState>,
    pub radio_range_km: f64,
    /// Contact windows per unordered node pair; a pair with windows is
    /// connected only while the clock is inside one of them.
    link_schedule: BTreeMap<(Eid, Eid), Vec<(SimTime, SimTime)>>,
    pub latency_s: f64,
    pub beacon_period_s: f64,
    pub maintenance_tick_s: f64,
    clock: SimTime,
    pub rng_seed: u64,
    pub metrics: Metrics,
    horizon: SimTime,
    queue: BinaryHeap<std::cmp::Reverse<SimEvent>>,
    next_seq: u64,
    tracks: BTreeMap<Eid, Track>,
    trace: Vec<String>,
}

impl World {
    pub fn new(radio_range_km: f64, horizon: SimTime) -> Self {
        World {
            nodes: BTreeMap::new(),
            radio_range_km,
            link_schedule: BTreeMap::new(),
            latency_s: DEFAULT_LATENCY_S,
            beacon_period_s: DEFAULT_BEACON_PERIOD_S,
            maintenance_tick_s: DEFAULT_MAINTENANCE_TICK_S,
            clock: 0.0,
            rng_seed: 0,
            metrics: Metrics::default(),
            horizon,
            queue: BinaryHeap::new(),
            next_seq: 0,
            tracks: BTreeMap::new(),
            trace: Vec::new(),
        }
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn add_node(&mut self, eid: impl Into<Eid>, location: GeoPoint) {
        let eid = eid.into();
        self.nodes.insert(eid.clone(), NodeState::new(eid.clone(), location));
        self.tracks.insert(
            eid,
            Track {
                start: Some(location),
                waypoints: Vec::new(),
            },
        );
    }

    pub fn add_waypoint(&mut self, eid: &str, at: SimTime, target: GeoPoint) {
        let track = self.tracks.get_mut(eid).expect("declared node");
        track.waypoints.push((at, target));
        track.waypoints.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    pub fn add_contact_window(&mut self, a: &str, b: &str, open: SimTime, close: SimTime) {
        let key = pair_key(a, b);
        self.link_schedule.entry(key).or_default().push((open, close));
    }

    /// Seeds the periodic event streams. Call once after all nodes are
    /// declared and before `run`.
    pub fn schedule_initial_events(&mut self) {
        let eids: Vec<Eid> = self.nodes.keys().cloned().collect();
        for eid in &eids {
            self.schedule(0.0, eid.clone(), EventKind::BeaconDue);
            if !self.tracks[eid].waypoints.is_empty() {
                self.schedule(DEFAULT_MOBILITY_TICK_S, eid.clone(), EventKind::NodeMove);
            }
        }
        if let Some(first) = eids.first() {
            self.schedule(self.maintenance_tick_s, first.clone(), EventKind::MaintenanceTick);
        }
    }

    pub fn schedule_injection(&mut self, at: SimTime, source: &str, bundle: Bundle) {
        self.schedule(at, source.to_string(), EventKind::BundleInject { bundle });
    }

    fn schedule(&mut self, at: SimTime, subject: Eid, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(std::cmp::Reverse(SimEvent { at, subject, kind, seq }));
    }

    /// Physically reachable peers of `eid` right now: within radio range
    /// and, for pairs with a contact schedule, inside a window. Sorted by
    /// EID.
    pub fn neighbors(&self, eid: &str) -> Result<Vec<(Eid, GeoPoint)>, SimError> {
        let node = self
            .nodes
            .get(eid)
            .ok_or_else(|| SimError::UnknownNode(eid.to_string()))?;
        let mut out = Vec::new();
        for (other_eid, other) in &self.nodes {
            if other_eid == eid {
                continue;
            }
            if geo::distance(&node.location, &other.location) > self.radio_range_km {
                continue;
            }
            if let Some(windows) = self.link_schedule.get(&pair_key(eid, other_eid)) {
                if !windows.iter().any(|&(o, c)| self.clock >= o && self.clock <= c) {
                    continue;
                }
            }
            out.push((other_eid.clone(), other.location));
        }
        Ok(out)
    }

    /// The neighbor view a custodian routes against: physical neighbors it
    /// also has a node-table entry for, at their beacon-reported positions.
    fn known_neighbors(&self, eid: &str) -> Result<Vec<(Eid, GeoPoint)>, SimError> {
        let node = &self.nodes[eid];
        Ok(self
            .neighbors(eid)?
            .into_iter()
            .filter_map(|(neid, _)| {
                node.node_table()
                    .get(&neid)
                    .map(|entry| (neid, entry.location))
            })
            .collect())
    }

    /// Processes the earliest event. Errors if the queue is empty.
    pub fn step(&mut self) -> Result<SimEvent, SimError> {
        let std::cmp::Reverse(event) = self.queue.pop().ok_or(SimError::EmptyQueue)?;
        debug_assert!(event.at >= self.clock, "clock must not decrease");
        self.clock = event.at;
        match event.kind.clone() {
            EventKind::BundleInject { bundle } => self.handle_inject(&event.subject, bundle)?,
            EventKind::NodeMove => self.handle_move(&event.subject),
            EventKind::BeaconDue => self.handle_beacon_due(&event.subject)?,
            EventKind::TransmitComplete { from, bundle } => {
                self.handle_transmit_complete(&event.subject, &from, bundle)?
            }
            EventKind::MaintenanceTick => self.handle_maintenance()?,
        }
        Ok(event)
    }

    /// Runs until the queue is empty or the next event lies beyond `until`.
    pub fn run(&mut self, until: SimTime) -> Result<Metrics, SimError> {
        while let Some(std::cmp::Reverse(next)) = self.queue.peek() {
            if next.at > until {
                break;
            }
            self.step()?;
        }
        Ok(self.metrics.clone())
    }

    fn emit(&mut self, kind: &str, node: &str, bundle: Option<&str>, detail: String) {
        let t = self.clock;
        let b = bundle.unwrap_or("-");
        self.trace.push(format!("t={t} ev={kind} node={node} bundle={b} detail={detail}"));
    }

    fn handle_inject(&mut self, source: &str, bundle: Bundle) -> Result<(), SimError> {
        if !self.nodes.contains_key(source) {
            return Err(SimError::UnknownNode(source.to_string()));
        }
        self.metrics.created += 1;
        let id = bundle.bundle_id.clone();
        self.emit(
            "CREATE",
            source,
            Some(&id),
            format!("dst={}", bundle.destination_specifier.serialize()),
        );
        let now = self.clock;
        let outcome = self
            .nodes
            .get_mut(source)
            .unwrap()
            .accept_bundle(bundle, None, now);
        if let AcceptOutcome::Accepted { bundle_id } = outcome {
            self.dispatch_routing(&source.to_string(), &bundle_id)?;
        }
        Ok(())
    }

    fn handle_move(&mut self, eid: &str) {
        let now = self.clock;
        let track = &self.tracks[eid];
        if let Some(pos) = track.position_at(now) {
            let node = self.nodes.get_mut(eid).expect("tracked node exists");
            if node.location != pos {
                node.location = pos;
                self.emit(
                    "MOVE",
                    eid,
                    None,
                    format!("lon={},lat={}", pos.longitude(), pos.latitude()),
                );
            }
        }
        let last = self.tracks[eid].waypoints.last().map(|&(t, _)| t).unwrap_or(0.0);
        let next = now + DEFAULT_MOBILITY_TICK_S;
        if next <= self.horizon && now < last {
            self.schedule(next, eid.to_string(), EventKind::NodeMove);
        }
    }

    fn handle_beacon_due(&mut self, eid: &str) -> Result<(), SimError> {
        let now = self.clock;
        let neighbors = self.neighbors(eid)?;
        let neighbor_eids: Vec<Eid> = neighbors.iter().map(|(e, _)| e.clone()).collect();
        let node = self.nodes.get_mut(eid).expect("scheduled node exists");
        node.refresh_next_hops(&neighbor_eids);
        let beacon = node.make_beacon(self.beacon_period_s, now);
        self.emit("BEACON", eid, None, format!("neighbors={}", neighbor_eids.len()));
        for (to, _) in neighbors {
            self.schedule(
                now + self.latency_s,
                to,
                EventKind::TransmitComplete {
                    from: eid.to_string(),
                    bundle: beacon.clone(),
                },
            );
        }
        let next = now + self.beacon_period_s;
        if next <= self.horizon {
            self.schedule(next, eid.to_string(), EventKind::BeaconDue);
        }
        Ok(())
    }

    fn handle_transmit_complete(
        &mut self,
        to: &str,
        from: &str,
        bundle: Bundle,
    ) -> Result<(), SimError> {
        let now = self.clock;
        let id = bundle.bundle_id.clone();
        let is_beacon = bundle.destination_specifier.serialize() == crate::node::BEACON_SPECIFIER;
        let Some(node) = self.nodes.get_mut(to) else {
            return Err(SimError::UnknownNode(to.to_string()));
        };
        match node.accept_bundle(bundle, Some(from), now) {
            AcceptOutcome::Beacon => {
                // A fresher neighbor view may unblock held bundles.
                self.reroute_pending(&to.to_string())?;
            }
            AcceptOutcome::Accepted { bundle_id } => {
                self.emit("RECV", to, Some(&bundle_id), format!("from={from}"));
                self.dispatch_routing(&to.to_string(), &bundle_id)?;
            }
            AcceptOutcome::Duplicate => {
                self.metrics.duplicates_suppressed += 1;
                self.emit("DUP", to, Some(&id), format!("from={from}"));
            }
            AcceptOutcome::Expired => {
                self.metrics.drops_ttl += 1;
                self.emit("DROP_TTL", to, Some(&id), format!("from={from}"));
            }
            AcceptOutcome::Malformed => {
                debug_assert!(is_beacon, "only beacons/envelopes can be malformed");
                self.emit("DROP_TTL", to, Some(&id), "reason=malformed".to_string());
            }
        }
        Ok(())
    }

    fn handle_maintenance(&mut self) -> Result<(), SimError> {
        let now = self.clock;
        let eids: Vec<Eid> = self.nodes.keys().cloned().collect();
        for eid in &eids {
            self.nodes.get_mut(eid).unwrap().kb.expire(now);
            self.reroute_pending(eid)?;
        }
        let next = now + self.maintenance_tick_s;
        if next <= self.horizon {
            if let Some(first) = eids.first() {
                self.schedule(next, first.clone(), EventKind::MaintenanceTick);
            }
        }
        Ok(())
    }

    /// Re-evaluates routing for every bundle pending at `eid`.
    fn reroute_pending(&mut self, eid: &Eid) -> Result<(), SimError> {
        let ids = self.nodes[eid].pending_ids();
        for id in ids {
            self.dispatch_routing(eid, &id)?;
        }
        Ok(())
    }

    /// One routing evaluation for a pending bundle, applying the decision:
    /// traces deliveries and state changes, schedules transmissions,
    /// updates metrics.
    fn dispatch_routing(&mut self, eid: &Eid, bundle_id: &str) -> Result<(), SimError> {
        let now = self.clock;
        let neighbors = self.known_neighbors(eid)?;
        let node = self.nodes.get_mut(eid).expect("routed node exists");
        let decision = node
            .route_bundle(bundle_id, &neighbors, now)
            .map_err(|e| SimError::InvariantViolation(e.to_string()))?;

        for app in &decision.deliver {
            self.metrics.delivered += 1;
            let bundle = self.nodes[eid].pending_bundle(bundle_id).expect("pending");
            let latency = now - bundle.created_at;
            let hops = bundle.hop_count;
            self.metrics
                .first_delivery
                .entry(bundle_id.to_string())
                .or_insert((latency, hops));
            self.emit("DELIVER", eid, Some(bundle_id), format!("app={app}"));
        }

        if let Some((state, dist)) = decision.state_change {
            self.emit(
                "STATE",
                eid,
                Some(bundle_id),
                format!("state={},dist={dist}", state.as_str()),
            );
        }

        match decision.forwarding {
            Forwarding::Drop(DropReason::Ttl) => {
                self.metrics.drops_ttl += 1;
                self.emit("DROP_TTL", eid, Some(bundle_id), "reason=expired".to_string());
                self.nodes.get_mut(eid).unwrap().remove_pending(bundle_id);
            }
            Forwarding::Hold => {
                self.metrics.holds += 1;
                self.emit("HOLD", eid, Some(bundle_id), "reason=no-progress".to_string());
            }
            Forwarding::Idle => {}
            Forwarding::Stem { next } => {
                self.transmit(eid, &next, bundle_id, RoutingState::Stem)?;
            }
            Forwarding::PointToPoint { next } => {
                self.transmit(eid, &next, bundle_id, RoutingState::PointToPoint)?;
            }
            Forwarding::Flood { targets } => {
                for next in targets {
                    self.transmit(eid, &next, bundle_id, RoutingState::Flood)?;
                }
            }
        }
        Ok(())
    }

    fn transmit(
        &mut self,
        from: &str,
        to: &str,
        bundle_id: &str,
        state: RoutingState,
    ) -> Result<(), SimError> {
        let bundle = self.nodes[from]
            .pending_bundle(bundle_id)
            .ok_or_else(|| SimError::InvariantViolation(format!("{bundle_id} not pending")))?
            .clone();
        self.metrics.transmissions += 1;
        self.emit(
            "SEND",
            from,
            Some(bundle_id),
            format!("to={to},state={}", state.as_str()),
        );
        self.schedule(
            self.clock + self.latency_s,
            to.to_string(),
            EventKind::TransmitComplete {
                from: from.to_string(),
                bundle,
            },
        );
        Ok(())
    }
}

fn pair_key(a: &str, b: &str) -> (Eid, Eid) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}
