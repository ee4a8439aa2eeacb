//! The store-and-forward message unit: name-specifier header, Metadata
//! Extension Block (MEB), payload, and bundle-in-bundle encapsulation.
//!
//! Geographic scope is not carried in the destination specifier. At bundle
//! creation [`extract_predicate`] lifts a `location` subtree like
//!
//! ```text
//! [location=known [longitude=116 degrees] [latitude=40 degrees] [distance=2 km]]
//! ```
//!
//! out of the specifier and into the MEB as a `within` predicate, leaving
//! the identity attributes (`[role=general]`) for delivery matching.

use thiserror::Error;

use crate::geo::{GeoPoint, WithinPredicate};
use crate::specifier::{AvPair, NameSpecifier};
use crate::{Eid, SimTime};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BundleError {
    #[error("location subtree present but unparseable: {0}")]
    MalformedLocationSubtree(String),
    #[error("specifier would be empty after stripping the location subtree")]
    EmptyAfterStrip,
    #[error("malformed bundle header: {0}")]
    MalformedHeader(String),
    #[error("payload is not valid hexadecimal")]
    BadHexPayload,
    #[error("MEB invariant violated: POINT_TO_POINT iff next resolver EID present")]
    InconsistentMeb,
    #[error("MEB needs at least one of scope predicate, ttl")]
    UnscopedMeb,
}

/// Routing state carried in the MEB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingState {
    PointToPoint,
    Stem,
    Flood,
}

impl RoutingState {
    pub fn as_str(&self) -> &'static str {
        match self {
            RoutingState::PointToPoint => "POINT_TO_POINT",
            RoutingState::Stem => "STEM",
            RoutingState::Flood => "FLOOD",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        match s {
            "POINT_TO_POINT" => Some(RoutingState::PointToPoint),
            "STEM" => Some(RoutingState::Stem),
            "FLOOD" => Some(RoutingState::Flood),
            _ => None,
        }
    }
}

/// Metadata Extension Block: next resolver, routing state, and the
/// conditions scoping transmission (spatial predicate and/or ttl).
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataExtensionBlock {
    next_resolver_eid: Option<Eid>,
    routing_state: RoutingState,
    pub scope_predicate: Option<WithinPredicate>,
    pub ttl_seconds: Option<f64>,
}

impl MetadataExtensionBlock {
    pub fn new(
        next_resolver_eid: Option<Eid>,
        routing_state: RoutingState,
        scope_predicate: Option<WithinPredicate>,
        ttl_seconds: Option<f64>,
    ) -> Result<Self, BundleError> {
        let has_resolver = next_resolver_eid.as_deref().is_some_and(|e| !e.is_empty());
        if has_resolver != (routing_state == RoutingState::PointToPoint) {
            return Err(BundleError::InconsistentMeb);
        }
        if scope_predicate.is_none() && ttl_seconds.is_none() {
            return Err(BundleError::UnscopedMeb);
        }
        Ok(MetadataExtensionBlock {
            next_resolver_eid,
            routing_state,
            scope_predicate,
            ttl_seconds,
        })
    }

    /// STEM/FLOOD block scoped by predicate and/or ttl.
    pub fn scoped(
        routing_state: RoutingState,
        scope_predicate: Option<WithinPredicate>,
        ttl_seconds: Option<f64>,
    ) -> Result<Self, BundleError> {
        MetadataExtensionBlock::new(None, routing_state, scope_predicate, ttl_seconds)
    }

    pub fn next_resolver_eid(&self) -> Option<&str> {
        self.next_resolver_eid.as_deref()
    }

    pub fn routing_state(&self) -> RoutingState {
        self.routing_state
    }

    /// Rewrites the routing state; POINT_TO_POINT cannot be entered or left
    /// this way since that would break the resolver invariant.
    pub fn set_routing_state(&mut self, state: RoutingState) {
        debug_assert!(state != RoutingState::PointToPoint);
        debug_assert!(self.routing_state != RoutingState::PointToPoint);
        self.routing_state = state;
    }
}

/// One store-and-forward bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub bundle_id: String,
    pub source_specifier: NameSpecifier,
    pub destination_specifier: NameSpecifier,
    pub meb: MetadataExtensionBlock,
    pub payload: Vec<u8>,
    pub created_at: SimTime,
    pub hop_count: u32,
}

impl Bundle {
    /// True once the ttl has lapsed; bundles with no ttl never expire.
    /// A bundle is still live at exactly `created_at + ttl`.
    pub fn is_expired(&self, now: SimTime) -> bool {
        match self.meb.ttl_seconds {
            Some(ttl) => now > self.created_at + ttl,
            None => false,
        }
    }
}

/// Splits the geographic scope out of a destination specifier.
///
/// If a root `location` pair carries `longitude = <n> degrees`,
/// `latitude = <n> degrees` and `distance = <n> km` children, the whole
/// location subtree is removed and returned as a [`WithinPredicate`]. The
/// unit words are mandatory. Without a `location` root the specifier is
/// returned unchanged, which also makes the operation idempotent.
pub fn extract_predicate(
    ns: &NameSpecifier,
) -> Result<(NameSpecifier, Option<WithinPredicate>), BundleError> {
    let Some(location) = ns.roots().iter().find(|p| p.attribute() == "location") else {
        return Ok((ns.clone(), None));
    };
    let lon = unit_number(location, "longitude", "degrees")?;
    let lat = unit_number(location, "latitude", "degrees")?;
    let radius = unit_number(location, "distance", "km")?;
    let center = GeoPoint::new(lon, lat)
        .map_err(|e| BundleError::MalformedLocationSubtree(e.to_string()))?;
    let pred = WithinPredicate::new(center, radius)
        .map_err(|e| BundleError::MalformedLocationSubtree(e.to_string()))?;

    let remaining: Vec<AvPair> = ns
        .roots()
        .iter()
        .filter(|p| p.attribute() != "location")
        .cloned()
        .collect();
    if remaining.is_empty() {
        return Err(BundleError::EmptyAfterStrip);
    }
    let stripped = NameSpecifier::new(remaining).expect("subset of a valid specifier");
    Ok((stripped, Some(pred)))
}

fn unit_number(location: &AvPair, attribute: &str, unit: &str) -> Result<f64, BundleError> {
    let child = location
        .children()
        .iter()
        .find(|c| c.attribute() == attribute)
        .ok_or_else(|| BundleError::MalformedLocationSubtree(format!("missing {attribute}")))?;
    let value = child.value();
    let number = value
        .strip_suffix(unit)
        .map(str::trim)
        .and_then(|n| n.parse::<f64>().ok())
        .ok_or_else(|| {
            BundleError::MalformedLocationSubtree(format!(
                "{attribute} value {value:?} is not `<number> {unit}`"
            ))
        })?;
    Ok(number)
}

/// Encodes a bundle as a line-oriented textual header, a blank line, and
/// the payload in lowercase hex. `decode(encode(b)) == b`.
pub fn encode(b: &Bundle) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&format!("id:{}\n", b.bundle_id));
    out.push_str(&format!("src:{}\n", b.source_specifier.serialize()));
    out.push_str(&format!("dst:{}\n", b.destination_specifier.serialize()));
    out.push_str(&format!("state:{}\n", b.meb.routing_state.as_str()));
    out.push_str(&format!(
        "resolver:{}\n",
        b.meb.next_resolver_eid.as_deref().unwrap_or("-")
    ));
    match &b.meb.scope_predicate {
        Some(p) => out.push_str(&format!(
            "scope:{} {} {}\n",
            p.center.longitude(),
            p.center.latitude(),
            p.radius_km()
        )),
        None => out.push_str("scope:-\n"),
    }
    match b.meb.ttl_seconds {
        Some(ttl) => out.push_str(&format!("ttl:{ttl}\n")),
        None => out.push_str("ttl:-\n"),
    }
    out.push_str(&format!("created:{}\n", b.created_at));
    out.push_str(&format!("hops:{}\n", b.hop_count));
    out.push('\n');
    out.push_str(&hex::encode(&b.payload));
    out.into_bytes()
}

pub fn decode(bytes: &[u8]) -> Result<Bundle, BundleError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| BundleError::MalformedHeader("not utf-8".into()))?;
    let (header, body) = text
        .split_once("\n\n")
        .ok_or_else(|| BundleError::MalformedHeader("missing blank line".into()))?;

    let mut lines = header.lines();
    let mut field = |name: &str| -> Result<String, BundleError> {
        let line = lines
            .next()
            .ok_or_else(|| BundleError::MalformedHeader(format!("missing {name} line")))?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(':'))
            .map(str::to_string)
            .ok_or_else(|| BundleError::MalformedHeader(format!("expected {name} line, got {line:?}")))
    };

    let bundle_id = field("id")?;
    let src = field("src")?;
    let dst = field("dst")?;
    let state = field("state")?;
    let resolver = field("resolver")?;
    let scope = field("scope")?;
    let ttl = field("ttl")?;
    let created = field("created")?;
    let hops = field("hops")?;

    let source_specifier = NameSpecifier::parse(&src)
        .map_err(|e| BundleError::MalformedHeader(format!("src: {e}")))?;
    let destination_specifier = NameSpecifier::parse(&dst)
        .map_err(|e| BundleError::MalformedHeader(format!("dst: {e}")))?;
    let routing_state = RoutingState::from_str(&state)
        .ok_or_else(|| BundleError::MalformedHeader(format!("bad state {state:?}")))?;
    let next_resolver_eid = if resolver == "-" { None } else { Some(resolver) };
    let scope_predicate = if scope == "-" {
        None
    } else {
        let parts: Vec<&str> = scope.split(' ').collect();
        let [lon, lat, radius] = parts.as_slice() else {
            return Err(BundleError::MalformedHeader(format!("bad scope {scope:?}")));
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| BundleError::MalformedHeader(format!("bad scope {scope:?}")))
        };
        let center = GeoPoint::new(parse(lon)?, parse(lat)?)
            .map_err(|e| BundleError::MalformedHeader(e.to_string()))?;
        Some(
            WithinPredicate::new(center, parse(radius)?)
                .map_err(|e| BundleError::MalformedHeader(e.to_string()))?,
        )
    };
    let ttl_seconds = if ttl == "-" {
        None
    } else {
        Some(
            ttl.parse::<f64>()
                .map_err(|_| BundleError::MalformedHeader(format!("bad ttl {ttl:?}")))?,
        )
    };
    let created_at = created
        .parse::<f64>()
        .map_err(|_| BundleError::MalformedHeader(format!("bad created {created:?}")))?;
    let hop_count = hops
        .parse::<u32>()
        .map_err(|_| BundleError::MalformedHeader(format!("bad hops {hops:?}")))?;

    let meb = MetadataExtensionBlock::new(next_resolver_eid, routing_state, scope_predicate, ttl_seconds)?;
    let payload = hex::decode(body.trim_end_matches('\n')).map_err(|_| BundleError::BadHexPayload)?;

    Ok(Bundle {
        bundle_id,
        source_specifier,
        destination_specifier,
        meb,
        payload,
        created_at,
        hop_count,
    })
}

/// Wraps `inner` in an envelope bundle addressed point-to-point to the
/// next resolver; the inner bundle rides as the encoded payload and is
/// unwrapped when the envelope reaches the resolver.
pub fn encapsulate(inner: &Bundle, resolver_eid: &str, now: SimTime) -> Bundle {
    assert!(!resolver_eid.is_empty(), "resolver EID must be non-empty");
    let destination = NameSpecifier::new(vec![
        AvPair::leaf("eid", resolver_eid).expect("resolver EID is a valid value token"),
    ])
    .expect("single-root specifier");
    let meb = MetadataExtensionBlock::new(
        Some(resolver_eid.to_string()),
        RoutingState::PointToPoint,
        None,
        Some(inner.meb.ttl_seconds.unwrap_or(f64::INFINITY)),
    );
    // Envelope keeps the inner ttl; an inner bundle without one gets an
    // unbounded envelope, encoded as `inf`.
    let meb = match meb {
        Ok(m) => m,
        Err(_) => unreachable!("resolver is non-empty and ttl present"),
    };
    Bundle {
        bundle_id: format!("env:{}", inner.bundle_id),
        source_specifier: inner.source_specifier.clone(),
        destination_specifier: destination,
        meb,
        payload: encode(inner),
        created_at: now,
        hop_count: 0,
    }
}
