//! Line-oriented scenario files: node declarations, registrations,
//! mobility waypoints, contact windows, and bundle injections.
//!
//! ```text
//! # comment
//! node dtn://a 116.0 40.0
//! range 1.5
//! beacon 10
//! latency 0.1
//! seed 7
//! until 120
//! register dtn://a app://general 1000 [role=general]
//! move dtn://a 60 116.01 40.0
//! contact dtn://a dtn://b 100 120
//! inject b1 dtn://a 1 ttl 300 dst [role=general] [location=known \
//!     [longitude=116 degrees] [latitude=40 degrees] [distance=2 km]]
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::bundle::{self, Bundle, MetadataExtensionBlock, RoutingState};
use crate::geo::GeoPoint;
use crate::sim::{World, DEFAULT_BEACON_PERIOD_S, DEFAULT_LATENCY_S};
use crate::specifier::NameSpecifier;
use crate::{Eid, SimTime};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: node {eid} not declared")]
    UndeclaredNode { line: usize, eid: String },
    #[error("line {line}: invalid coordinate: {message}")]
    InvalidCoordinate { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub eid: Eid,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub node_eid: Eid,
    pub app_eid: Eid,
    pub lifetime_s: f64,
    pub specifier: NameSpecifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub eid: Eid,
    pub at: SimTime,
    pub target: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactWindow {
    pub a: Eid,
    pub b: Eid,
    pub open: SimTime,
    pub close: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub bundle_id: String,
    pub source_eid: Eid,
    pub at: SimTime,
    pub ttl_s: Option<f64>,
    pub destination: NameSpecifier,
}

/// Parsed scenario, ready to build a [`World`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: Vec<NodeDecl>,
    pub registrations: Vec<Registration>,
    pub waypoints: Vec<Waypoint>,
    pub contacts: Vec<ContactWindow>,
    pub injections: Vec<Injection>,
    pub range_km: f64,
    pub beacon_period_s: f64,
    pub latency_s: f64,
    pub seed: u64,
    pub until_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            nodes: Vec::new(),
            registrations: Vec::new(),
            waypoints: Vec::new(),
            contacts: Vec::new(),
            injections: Vec::new(),
            range_km: 1.0,
            beacon_period_s: DEFAULT_BEACON_PERIOD_S,
            latency_s: DEFAULT_LATENCY_S,
            seed: 0,
            until_s: 100.0,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::default();
        let mut declared: BTreeSet<Eid> = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ScenarioError::Syntax { line: line_no, message };
            let mut tokens = line.split_whitespace();
            let directive = tokens.next().expect("non-empty line");
            match directive {
                "node" => {
                    let eid = take_eid(&mut tokens, line_no)?;
                    let lon = take_f64(&mut tokens, line_no, "longitude")?;
                    let lat = take_f64(&mut tokens, line_no, "latitude")?;
                    let location = GeoPoint::new(lon, lat).map_err(|e| {
                        ScenarioError::InvalidCoordinate { line: line_no, message: e.to_string() }
                    })?;
                    if !declared.insert(eid.clone()) {
                        return Err(syntax(format!("node {eid} declared twice")));
                    }
                    scenario.nodes.push(NodeDecl { eid, location });
                }
                "range" => scenario.range_km = take_f64(&mut tokens, line_no, "range")?,
                "beacon" => scenario.beacon_period_s = take_f64(&mut tokens, line_no, "beacon period")?,
                "latency" => scenario.latency_s = take_f64(&mut tokens, line_no, "latency")?,
                "seed" => {
                    scenario.seed = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| ScenarioError::Syntax {
                            line: line_no,
                            message: "seed expects an integer".into(),
                        })?;
                }
                "until" => scenario.until_s = take_f64(&mut tokens, line_no, "until")?,
                "register" => {
                    let node_eid = take_eid(&mut tokens, line_no)?;
                    require_declared(&declared, &node_eid, line_no)?;
                    let app_eid = take_eid(&mut tokens, line_no)?;
                    let lifetime_s = take_f64(&mut tokens, line_no, "lifetime")?;
                    let specifier = rest_as_specifier(line, 4, line_no)?;
                    scenario.registrations.push(Registration {
                        node_eid,
                        app_eid,
                        lifetime_s,
                        specifier,
                    });
                }
                "move" => {
                    let eid = take_eid(&mut tokens, line_no)?;
                    require_declared(&declared, &eid, line_no)?;
                    let at = take_f64(&mut tokens, line_no, "time")?;
                    let lon = take_f64(&mut tokens, line_no, "longitude")?;
                    let lat = take_f64(&mut tokens, line_no, "latitude")?;
                    let target = GeoPoint::new(lon, lat).map_err(|e| {
                        ScenarioError::InvalidCoordinate { line: line_no, message: e.to_string() }
                    })?;
                    scenario.waypoints.push(Waypoint { eid, at, target });
                }
                "contact" => {
                    let a = take_eid(&mut tokens, line_no)?;
                    require_declared(&declared, &a, line_no)?;
                    let b = take_eid(&mut tokens, line_no)?;
                    require_declared(&declared, &b, line_no)?;
                    let open = take_f64(&mut tokens, line_no, "t_open")?;
                    let close = take_f64(&mut tokens, line_no, "t_close")?;
                    scenario.contacts.push(ContactWindow { a, b, open, close });
                }
                "inject" => {
                    let bundle_id = tokens
                        .next()
                        .ok_or_else(|| syntax("inject expects a bundle id".into()))?
                        .to_string();
                    let source_eid = take_eid(&mut tokens, line_no)?;
                    require_declared(&declared, &source_eid, line_no)?;
                    let at = take_f64(&mut tokens, line_no, "injection time")?;
                    if at < 0.0 {
                        return Err(syntax("injection time must be >= 0".into()));
                    }
                    let mut ttl_s = None;
                    match tokens.next() {
                        Some("ttl") => {
                            ttl_s = Some(take_f64(&mut tokens, line_no, "ttl")?);
                            match tokens.next() {
                                Some("dst") => {}
                                _ => return Err(syntax("expected `dst` after ttl".into())),
                            }
                        }
                        Some("dst") => {}
                        _ => return Err(syntax("expected `ttl <s>` or `dst <specifier>`".into())),
                    }
                    let dst_text = line
                        .split_once(" dst ")
                        .map(|(_, rest)| rest)
                        .ok_or_else(|| syntax("missing destination specifier".into()))?;
                    let destination = NameSpecifier::parse(dst_text)
                        .map_err(|e| syntax(format!("destination specifier: {e}")))?;
                    scenario.injections.push(Injection {
                        bundle_id,
                        source_eid,
                        at,
                        ttl_s,
                        destination,
                    });
                }
                other => return Err(syntax(format!("unknown directive {other:?}"))),
            }
        }
        Ok(scenario)
    }

    /// Canonical scenario text; `parse(to_text(s)) == s` modulo specifier
    /// canonicalization (already applied at parse time).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "range {}", self.range_km);
        let _ = writeln!(out, "beacon {}", self.beacon_period_s);
        let _ = writeln!(out, "latency {}", self.latency_s);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "until {}", self.until_s);
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "node {} {} {}",
                n.eid,
                n.location.longitude(),
                n.location.latitude()
            );
        }
        for r in &self.registrations {
            let _ = writeln!(
                out,
                "register {} {} {} {}",
                r.node_eid,
                r.app_eid,
                r.lifetime_s,
                r.specifier.serialize()
            );
        }
        for w in &self.waypoints {
            let _ = writeln!(
                out,
                "move {} {} {} {}",
                w.eid,
                w.at,
                w.target.longitude(),
                w.target.latitude()
            );
        }
        for c in &self.contacts {
            let _ = writeln!(out, "contact {} {} {} {}", c.a, c.b, c.open, c.close);
        }
        for i in &self.injections {
            match i.ttl_s {
                Some(ttl) => {
                    let _ = writeln!(
                        out,
                        "inject {} {} {} ttl {} dst {}",
                        i.bundle_id,
                        i.source_eid,
                        i.at,
                        ttl,
                        i.destination.serialize()
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "inject {} {} {} dst {}",
                        i.bundle_id,
                        i.source_eid,
                        i.at,
                        i.destination.serialize()
                    );
                }
            }
        }
        out
    }

    /// Builds the simulated world: nodes placed, registrations applied at
    /// t=0, periodic events seeded, injections scheduled.
    pub fn build_world(&self) -> Result<World, ScenarioError> {
        let mut world = World::new(self.range_km, self.until_s);
        world.latency_s = self.latency_s;
        world.beacon_period_s = self.beacon_period_s;
        world.rng_seed = self.seed;
        for n in &self.nodes {
            world.add_node(n.eid.clone(), n.location);
        }
        for r in &self.registrations {
            world
                .nodes
                .get_mut(&r.node_eid)
                .expect("declared before use")
                .register(r.app_eid.clone(), r.specifier.clone(), r.lifetime_s, 0.0);
        }
        for w in &self.waypoints {
            world.add_waypoint(&w.eid, w.at, w.target);
        }
        for c in &self.contacts {
            world.add_contact_window(&c.a, &c.b, c.open, c.close);
        }
        world.schedule_initial_events();
        for i in &self.injections {
            let bundle = self.build_bundle(i)?;
            world.schedule_injection(i.at, &i.source_eid, bundle);
        }
        Ok(world)
    }

    fn build_bundle(&self, i: &Injection) -> Result<Bundle, ScenarioError> {
        let (destination, pred) = bundle::extract_predicate(&i.destination).map_err(|e| {
            ScenarioError::Syntax {
                line: 0,
                message: format!("inject {}: {e}", i.bundle_id),
            }
        })?;
        let meb = MetadataExtensionBlock::scoped(RoutingState::Stem, pred, i.ttl_s).map_err(
            |e| ScenarioError::Syntax {
                line: 0,
                message: format!("inject {}: {e}", i.bundle_id),
            },
        )?;
        Ok(Bundle {
            bundle_id: i.bundle_id.clone(),
            source_specifier: NameSpecifier::parse(&format!("[eid={}]", i.source_eid))
                .expect("validated EID"),
            destination_specifier: destination,
            meb,
            payload: Vec::new(),
            created_at: i.at,
            hop_count: 0,
        })
    }
}

fn take_eid<'a>(
    tokens: &mut impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Eid, ScenarioError> {
    let eid = tokens.next().ok_or_else(|| ScenarioError::Syntax {
        line,
        message: "expected an EID".into(),
    })?;
    if eid.chars().any(|c| matches!(c, '[' | ']' | '=')) {
        return Err(ScenarioError::Syntax {
            line,
            message: format!("EID {eid:?} may not contain brackets or '='"),
        });
    }
    Ok(eid.to_string())
}

fn take_f64<'a>(
    tokens: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<f64, ScenarioError> {
    tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ScenarioError::Syntax {
            line,
            message: format!("expected a number for {what}"),
        })
}

fn require_declared(
    declared: &BTreeSet<Eid>,
    eid: &str,
    line: usize,
) -> Result<(), ScenarioError> {
    if declared.contains(eid) {
        Ok(())
    } else {
        Err(ScenarioError::UndeclaredNode {
            line,
            eid: eid.to_string(),
        })
    }
}

/// The remainder of `line` after `skip` whitespace-separated tokens,
/// parsed as a name-specifier.
fn rest_as_specifier(
    line: &str,
    skip: usize,
    line_no: usize,
) -> Result<NameSpecifier, ScenarioError> {
    let mut rest = line;
    for _ in 0..skip {
        rest = rest.trim_start();
        match rest.find(char::is_whitespace) {
            Some(idx) => rest = &rest[idx..],
            None => rest = "",
        }
    }
    NameSpecifier::parse(rest.trim()).map_err(|e| ScenarioError::Syntax {
        line: line_no,
        message: format!("specifier: {e}"),
    })
}
