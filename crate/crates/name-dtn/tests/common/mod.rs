//! Shared helpers for the integration suites: pseudo-random specifier
//! generation, independent oracles, and trace parsing.
//!
//! The oracles here deliberately do not share code with the library: the
//! distance check uses a different spherical formula and the knowledge-base
//! check is a naive filtered list.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use name_dtn::specifier::{AvPair, NameSpecifier};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn token(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..=6);
    (0..len)
        .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
        .collect()
}

fn value(rng: &mut ChaCha8Rng) -> String {
    // one- or two-word values, mirroring "116 degrees"
    if rng.gen_bool(0.3) {
        format!("{} {}", rng.gen_range(0..200), token(rng))
    } else {
        token(rng)
    }
}

fn av_pair(rng: &mut ChaCha8Rng, depth: usize, max_depth: usize, max_fanout: usize) -> AvPair {
    let mut children = Vec::new();
    if depth < max_depth {
        let fanout = rng.gen_range(0..=max_fanout);
        let mut used = std::collections::BTreeSet::new();
        for _ in 0..fanout {
            let child = av_pair(rng, depth + 1, max_depth, max_fanout);
            if used.insert(child.attribute().to_string()) {
                children.push(child);
            }
        }
    }
    AvPair::new(token(rng), value(rng), children).expect("generated tokens are valid")
}

/// Random canonical specifier with bounded depth and fanout.
pub fn random_specifier(rng: &mut ChaCha8Rng, max_depth: usize, max_fanout: usize) -> NameSpecifier {
    let count = rng.gen_range(1..=max_fanout.max(1));
    let mut used = std::collections::BTreeSet::new();
    let mut roots = Vec::new();
    for _ in 0..count {
        let pair = av_pair(rng, 1, max_depth, max_fanout);
        if used.insert(pair.attribute().to_string()) {
            roots.push(pair);
        }
    }
    NameSpecifier::new(roots).expect("at least one root")
}

/// A random "query" derived from an advert by pruning: drops some roots
/// and some subtrees, so it still matches the advert by construction.
pub fn prune_specifier(rng: &mut ChaCha8Rng, advert: &NameSpecifier) -> NameSpecifier {
    fn prune_pair(rng: &mut ChaCha8Rng, pair: &AvPair) -> AvPair {
        let mut children = Vec::new();
        for c in pair.children() {
            if rng.gen_bool(0.5) {
                children.push(prune_pair(rng, c));
            }
        }
        AvPair::new(pair.attribute(), pair.value(), children).expect("subset of valid pair")
    }
    let mut roots = Vec::new();
    for p in advert.roots() {
        if rng.gen_bool(0.5) {
            roots.push(prune_pair(rng, p));
        }
    }
    if roots.is_empty() {
        let idx = rng.gen_range(0..advert.roots().len());
        roots.push(prune_pair(rng, &advert.roots()[idx]));
    }
    NameSpecifier::new(roots).expect("non-empty")
}

/// Independent great-circle distance: the well-conditioned atan2 form of
/// the spherical inverse problem, written without reference to the
/// library's haversine.
pub fn oracle_distance_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    const R: f64 = 6371.0;
    let p1 = lat1.to_radians();
    let p2 = lat2.to_radians();
    let dl = (lon2 - lon1).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2)
        + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
    .sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    R * y.atan2(x)
}

/// Naive knowledge-base model: a flat list filtered by `matches` and
/// expiry, mirroring the name-tree contract.
#[derive(Default)]
pub struct KbOracle {
    entries: Vec<(NameSpecifier, String, f64)>,
}

impl KbOracle {
    pub fn insert(&mut self, ns: &NameSpecifier, eid: &str, expires_at: f64) {
        if let Some(existing) = self
            .entries
            .iter_mut()
            .find(|(s, e, _)| s == ns && e == eid)
        {
            existing.2 = expires_at;
        } else {
            self.entries.push((ns.clone(), eid.to_string(), expires_at));
        }
    }

    pub fn expire(&mut self, now: f64) {
        self.entries.retain(|&(_, _, exp)| exp >= now);
    }

    pub fn lookup(&self, query: &NameSpecifier, now: f64) -> Vec<String> {
        let mut out: Vec<String> = self
            .entries
            .iter()
            .filter(|(s, _, exp)| *exp >= now && query.matches(s))
            .map(|(_, eid, _)| eid.clone())
            .collect();
        out.sort();
        out
    }
}

/// One parsed trace line.
#[derive(Debug, Clone)]
pub struct TraceLine {
    pub t: f64,
    pub ev: String,
    pub node: String,
    pub bundle: String,
    pub detail: String,
}

impl TraceLine {
    /// Value of a `key=value` entry inside the detail field.
    pub fn detail_value(&self, key: &str) -> Option<&str> {
        self.detail
            .split(',')
            .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}

pub fn parse_trace(lines: &[String]) -> Vec<TraceLine> {
    lines
        .iter()
        .map(|line| {
            let rest = line.strip_prefix("t=").expect("trace line starts with t=");
            let (t, rest) = rest.split_once(" ev=").expect("ev field");
            let (ev, rest) = rest.split_once(" node=").expect("node field");
            let (node, rest) = rest.split_once(" bundle=").expect("bundle field");
            let (bundle, detail) = rest.split_once(" detail=").expect("detail field");
            TraceLine {
                t: t.parse().expect("numeric time"),
                ev: ev.to_string(),
                node: node.to_string(),
                bundle: bundle.to_string(),
                detail: detail.to_string(),
            }
        })
        .collect()
}
