//! Intentional naming and predicate-based routing for delay-tolerant networks.
//!
//! Nodes describe themselves and their destinations with bracketed
//! attribute-value *name-specifiers* (`[role=general [mission=command]]`)
//! rather than fixed addresses. Each node merges every specifier it learns
//! into a *name-tree* knowledge base, and bundles are routed toward a
//! geographic target region: greedy forwarding (STEM) while outside the
//! region, predicate-scoped epidemic flooding (FLOOD) once inside.
//!
//! The crate ships a deterministic discrete-event simulator so the whole
//! pipeline (registration, beaconing, resolution, routing, delivery) can be
//! exercised end to end from a plain-text scenario file. See the `examples/`
//! directory for one runnable program per capability and the `name-dtn`
//! binary for scenario-driven runs.

pub mod bundle;
pub mod cli;
pub mod geo;
pub mod name_tree;
pub mod node;
pub mod scenario;
pub mod sim;
pub mod specifier;

pub use bundle::{Bundle, BundleError, MetadataExtensionBlock, RoutingState};
pub use geo::{GeoError, GeoPoint, WithinPredicate};
pub use name_tree::{NameRecord, NameTree, RecordId};
pub use node::{Forwarding, NodeState, RoutingDecision};
pub use scenario::{Scenario, ScenarioError};
pub use sim::{Metrics, SimEvent, World};
pub use specifier::{AvPair, NameSpecifier, SpecifierError};

/// Endpoint identifier. Canonical EIDs uniquely name one node's bundle
/// processing entity; application EIDs name registered local applications.
pub type Eid = String;

/// Simulation time in seconds.
pub type SimTime = f64;
