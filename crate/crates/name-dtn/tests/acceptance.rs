//! End-to-end verification suite. Each test covers one numbered criterion
//! and prints a `PASS criterion N` line on success; failures panic with
//! the offending case.

mod common;

use std::time::Instant;

use rand::prelude::*;

use common::{oracle_distance_km, parse_trace, prune_specifier, random_specifier, rng, KbOracle};
use name_dtn::bundle::{self, MetadataExtensionBlock, RoutingState};
use name_dtn::geo::{self, GeoPoint, WithinPredicate};
use name_dtn::name_tree::{NameRecord, NameTree};
use name_dtn::scenario::Scenario;
use name_dtn::sim::World;
use name_dtn::specifier::NameSpecifier;
use name_dtn::Bundle;

#[test]
fn criterion_01_parser_round_trip() {
    let start = Instant::now();
    let mut rng = rng(0x01);
    for i in 0..1000 {
        let ns = random_specifier(&mut rng, 5, 4);
        let text = ns.serialize();
        let reparsed = NameSpecifier::parse(&text)
            .unwrap_or_else(|e| panic!("case {i}: {text:?} failed to reparse: {e}"));
        assert_eq!(reparsed, ns, "case {i}: round-trip mismatch for {text:?}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "round-trip suite took {elapsed:?}");
    println!("PASS criterion 1: 1000 specifier round-trips in {elapsed:?}");
}

#[test]
fn criterion_02_figure_fidelity() {
    // The role/mission and location subtrees of the canonical example name.
    let text = "[role = general [mission = command]] \
                [location = known [longitude = 116 degrees] [latitude = 112 degrees]]";
    let ns = NameSpecifier::parse(text).unwrap();
    assert_eq!(ns.roots().len(), 2);
    let location = &ns.roots()[0];
    let role = &ns.roots()[1];
    assert_eq!(role.attribute(), "role");
    assert_eq!(role.value(), "general");
    assert_eq!(role.children().len(), 1);
    assert_eq!(role.children()[0].attribute(), "mission");
    assert_eq!(role.children()[0].value(), "command");
    assert_eq!(location.attribute(), "location");
    let lons: Vec<_> = location
        .children()
        .iter()
        .map(|c| (c.attribute().to_string(), c.value().to_string()))
        .collect();
    assert_eq!(
        lons,
        vec![
            ("latitude".to_string(), "112 degrees".to_string()),
            ("longitude".to_string(), "116 degrees".to_string()),
        ]
    );

    // The "within 2 km of 116 degrees" sentence, with a geographically
    // valid latitude, survives predicate extraction exactly.
    let routed = NameSpecifier::parse(
        "[role=general] [location=known [longitude=116 degrees] \
         [latitude=40 degrees] [distance=2 km]]",
    )
    .unwrap();
    let (stripped, pred) = bundle::extract_predicate(&routed).unwrap();
    let pred = pred.unwrap();
    assert_eq!(stripped.serialize(), "[role=general]");
    assert_eq!(pred.center.longitude(), 116.0);
    assert_eq!(pred.center.latitude(), 40.0);
    assert_eq!(pred.radius_km(), 2.0);
    println!("PASS criterion 2: figure specifier tree and predicate values exact");
}

#[test]
fn criterion_03_name_tree_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng(0x03);
    let mut tree = NameTree::new();
    let mut oracle = KbOracle::default();

    let adverts: Vec<(NameSpecifier, String, f64)> = (0..120)
        .map(|i| {
            let ns = random_specifier(&mut rng, 4, 3);
            let eid = format!("dtn://node{i:03}");
            let expires = rng.gen_range(1.0..100.0);
            (ns, eid, expires)
        })
        .collect();
    let queries: Vec<NameSpecifier> = (0..110)
        .map(|i| {
            if i % 2 == 0 {
                let (ref ns, _, _) = adverts[rng.gen_range(0..adverts.len())];
                prune_specifier(&mut rng, ns)
            } else {
                random_specifier(&mut rng, 4, 3)
            }
        })
        .collect();

    for (ns, eid, expires) in &adverts {
        tree.insert(
            ns,
            NameRecord {
                destination_eid: eid.clone(),
                next_hop_eids: vec![],
                expires_at: *expires,
            },
            0.0,
        );
        oracle.insert(ns, eid, *expires);
    }

    let mut mismatches = 0;
    for checkpoint in [0.0, 20.0, 40.0, 60.0, 80.0, 100.0] {
        tree.expire(checkpoint);
        oracle.expire(checkpoint);
        // refresh a few records mid-run to exercise replacement
        for _ in 0..10 {
            let (ns, eid, _) = &adverts[rng.gen_range(0..adverts.len())];
            let expires = checkpoint + rng.gen_range(1.0..50.0);
            tree.insert(
                ns,
                NameRecord {
                    destination_eid: eid.clone(),
                    next_hop_eids: vec![],
                    expires_at: expires,
                },
                checkpoint,
            );
            oracle.insert(ns, eid, expires);
        }
        for query in &queries {
            let got: Vec<String> = tree
                .lookup(query, checkpoint)
                .into_iter()
                .map(|r| r.destination_eid)
                .collect();
            let want = oracle.lookup(query, checkpoint);
            if got != want {
                mismatches += 1;
                eprintln!(
                    "t={checkpoint}: query {} -> tree {got:?}, oracle {want:?}",
                    query.serialize()
                );
            }
        }
    }
    assert_eq!(mismatches, 0);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "oracle suite took {elapsed:?}");
    println!("PASS criterion 3: name-tree lookups match brute force at all checkpoints ({elapsed:?})");
}

#[test]
fn criterion_04_distance_oracle() {
    let mut rng = rng(0x04);
    for i in 0..10_000 {
        let a = GeoPoint::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0)).unwrap();
        let b = GeoPoint::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0)).unwrap();
        let got = geo::distance(&a, &b);
        let want =
            oracle_distance_km(a.longitude(), a.latitude(), b.longitude(), b.latitude());
        let rel = (got - want).abs() / want.max(1e-12);
        assert!(
            rel < 1e-9,
            "case {i}: {a:?} {b:?}: haversine {got}, oracle {want}, rel {rel}"
        );
    }
    let antipodal = geo::distance(
        &GeoPoint::new(0.0, 0.0).unwrap(),
        &GeoPoint::new(180.0, 0.0).unwrap(),
    );
    assert!((antipodal - 20015.09).abs() < 0.01, "antipodal {antipodal}");
    println!("PASS criterion 4: haversine matches independent oracle on 10000 pairs");
}

/// A random static scenario: uniformly placed nodes, radio range set to the
/// connectivity bottleneck, generals registered inside a disc around a
/// random node, one bundle injected from the farthest node.
struct StaticScenario {
    world: World,
    positions: std::collections::BTreeMap<String, GeoPoint>,
    center: GeoPoint,
    radius_km: f64,
}

fn build_static_scenario(seed: u64) -> StaticScenario {
    let mut rng = rng(seed);
    let n = rng.gen_range(20..=50);
    let mut positions = std::collections::BTreeMap::new();
    for i in 0..n {
        let lon = 10.0 + rng.gen_range(0.0..0.3);
        let lat = 10.0 + rng.gen_range(0.0..0.3);
        positions.insert(
            format!("dtn://n{i:02}"),
            GeoPoint::new(lon, lat).unwrap(),
        );
    }
    let eids: Vec<String> = positions.keys().cloned().collect();

    // Bottleneck range: smallest radio range keeping the graph connected.
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..eids.len() {
        for j in (i + 1)..eids.len() {
            let d = geo::distance(&positions[&eids[i]], &positions[&eids[j]]);
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..eids.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let mut components = eids.len();
    let mut range = 0.0;
    for (d, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            components -= 1;
            range = d;
            if components == 1 {
                break;
            }
        }
    }
    range = range * 1.001 + 0.001;

    let center_eid = eids[rng.gen_range(0..eids.len())].clone();
    let center = positions[&center_eid];
    let radius_km = 5.0;

    let mut world = World::new(range, 60.0);
    for (eid, &pos) in &positions {
        world.add_node(eid.clone(), pos);
    }
    let general = NameSpecifier::parse("[role=general]").unwrap();
    for (eid, pos) in &positions {
        if geo::distance(pos, &center) <= radius_km {
            world
                .nodes
                .get_mut(eid)
                .unwrap()
                .register(format!("app://{eid}"), general.clone(), 10_000.0, 0.0);
        }
    }
    let source = positions
        .iter()
        .max_by(|a, b| {
            geo::distance(a.1, &center)
                .total_cmp(&geo::distance(b.1, &center))
                .then(a.0.cmp(b.0))
        })
        .map(|(eid, _)| eid.clone())
        .unwrap();
    world.schedule_initial_events();
    let pred = WithinPredicate::new(center, radius_km).unwrap();
    let bundle = Bundle {
        bundle_id: format!("b{seed}"),
        source_specifier: NameSpecifier::parse(&format!("[eid={source}]")).unwrap(),
        destination_specifier: general,
        meb: MetadataExtensionBlock::scoped(RoutingState::Stem, Some(pred), Some(200.0)).unwrap(),
        payload: vec![0x42],
        created_at: 1.0,
        hop_count: 0,
    };
    world.schedule_injection(1.0, &source, bundle);

    StaticScenario {
        world,
        positions,
        center,
        radius_km,
    }
}

#[test]
fn criteria_05_06_10_random_static_scenarios() {
    let mut stem_hops = 0u64;
    let mut flood_sends = 0u64;
    for seed in 0..50 {
        let mut s = build_static_scenario(1000 + seed);
        s.world.run(60.0).unwrap();
        let trace = parse_trace(s.world.trace());

        let mut recv_seen = std::collections::BTreeSet::new();
        for line in &trace {
            match line.ev.as_str() {
                "SEND" => {
                    let to = line.detail_value("to").expect("SEND has to=");
                    match line.detail_value("state").expect("SEND has state=") {
                        "STEM" => {
                            stem_hops += 1;
                            let d_from = geo::distance(&s.positions[&line.node], &s.center);
                            let d_to = geo::distance(&s.positions[to], &s.center);
                            assert!(
                                d_to < d_from,
                                "seed {seed}: STEM hop {} -> {to} does not progress \
                                 ({d_from} -> {d_to})",
                                line.node
                            );
                        }
                        "FLOOD" => {
                            flood_sends += 1;
                            let d_to = geo::distance(&s.positions[to], &s.center);
                            assert!(
                                d_to <= s.radius_km,
                                "seed {seed}: FLOOD send to {to} outside region ({d_to} km)"
                            );
                        }
                        other => panic!("seed {seed}: unexpected SEND state {other}"),
                    }
                }
                "RECV" => {
                    assert!(
                        recv_seen.insert((line.node.clone(), line.bundle.clone())),
                        "seed {seed}: node {} accepted bundle {} twice",
                        line.node,
                        line.bundle
                    );
                }
                _ => {}
            }
        }
    }
    assert!(stem_hops > 0, "scenarios exercised no STEM hops");
    assert!(flood_sends > 0, "scenarios exercised no FLOOD sends");
    println!(
        "PASS criterion 5: {stem_hops} STEM hops all strictly decrease distance-to-center"
    );
    println!("PASS criterion 6: {flood_sends} FLOOD sends all target in-region receivers");
    println!("PASS criterion 10: no (node, bundle) accepted twice across 50 scenarios");
}

fn grid_scenario_text() -> String {
    let mut text = String::new();
    for row in 0..5 {
        for col in 0..5 {
            text.push_str(&format!(
                "node dtn://n{row}{col} {} {}\n",
                10.0 + col as f64 * 0.02,
                row as f64 * 0.02
            ));
        }
    }
    text.push_str("range 3.2\nuntil 30\n");
    for eid in ["dtn://n00", "dtn://n01", "dtn://n10"] {
        text.push_str(&format!("register {eid} app:{} 10000 [role=general]\n", &eid[6..]));
    }
    text.push_str(
        "inject g1 dtn://n44 1 ttl 200 dst [role=general] [location=known \
         [longitude=10 degrees] [latitude=0 degrees] [distance=3 km]]\n",
    );
    text
}

#[test]
fn criterion_07_grid_delivery_completeness() {
    let start = Instant::now();
    let scenario = Scenario::parse(&grid_scenario_text()).unwrap();
    let mut world = scenario.build_world().unwrap();
    let metrics = world.run(scenario.until_s).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(metrics.created, 1);
    assert_eq!(metrics.delivered, 3, "all three generals deliver");
    assert_eq!(metrics.delivery_ratio(), 1.0);
    assert!(metrics.duplicates_suppressed > 0, "flooding produced no duplicates");

    let trace = parse_trace(world.trace());
    let deliveries: Vec<(String, String)> = trace
        .iter()
        .filter(|l| l.ev == "DELIVER")
        .map(|l| (l.node.clone(), l.detail_value("app").unwrap().to_string()))
        .collect();
    assert_eq!(deliveries.len(), 3);
    let unique: std::collections::BTreeSet<_> = deliveries.iter().collect();
    assert_eq!(unique.len(), 3, "each general delivers exactly once");
    assert!(elapsed.as_secs_f64() < 2.0, "grid run took {elapsed:?}");
    println!("PASS criterion 7: grid delivers 3/3 with {} duplicates suppressed in {elapsed:?}",
        metrics.duplicates_suppressed);
}

const DISRUPTION_SCENARIO: &str = "\
node dtn://a1 10.0 0.0
node dtn://b1 10.009 0.0
node dtn://b2 10.018 0.0
range 1.2
until 150
register dtn://b2 app://general 10000 [role=general]
contact dtn://a1 dtn://b1 100 120
inject m1 dtn://a1 1 dst [role=general] [location=known [longitude=10.018 degrees] [latitude=0 degrees] [distance=0.5 km]]
";

#[test]
fn criterion_08_disruption_tolerance() {
    let scenario = Scenario::parse(DISRUPTION_SCENARIO).unwrap();
    let mut world = scenario.build_world().unwrap();
    let metrics = world.run(scenario.until_s).unwrap();
    assert_eq!(metrics.delivered, 1);
    let trace = parse_trace(world.trace());
    let deliver = trace.iter().find(|l| l.ev == "DELIVER").expect("delivered");
    assert!(deliver.t > 100.0, "delivered at {} before the contact opened", deliver.t);
    assert!(
        deliver.t < 100.0 + 10.0 * scenario.latency_s,
        "delivered at {} too long after the contact opened",
        deliver.t
    );
    println!("PASS criterion 8: partition healed at t=100, delivered at t={}", deliver.t);
}

#[test]
fn criterion_09_determinism() {
    let run = |text: &str| {
        let scenario = Scenario::parse(text).unwrap();
        let mut world = scenario.build_world().unwrap();
        let metrics = world.run(scenario.until_s).unwrap();
        (world.trace().join("\n"), metrics.render())
    };
    for text in [grid_scenario_text().as_str(), DISRUPTION_SCENARIO] {
        let (trace_a, metrics_a) = run(text);
        let (trace_b, metrics_b) = run(text);
        assert_eq!(trace_a, trace_b, "traces differ between identical runs");
        assert_eq!(metrics_a, metrics_b, "metrics differ between identical runs");
    }
    println!("PASS criterion 9: identical runs produce byte-identical trace and metrics");
}

#[test]
fn criterion_11_envelope_round_trip() {
    let mut world = World::new(1.2, 30.0);
    world.add_node("dtn://a", GeoPoint::new(10.0, 0.0).unwrap());
    world.add_node("dtn://b", GeoPoint::new(10.009, 0.0).unwrap());
    world.add_node("dtn://c", GeoPoint::new(10.018, 0.0).unwrap());
    let c_pos = GeoPoint::new(10.018, 0.0).unwrap();
    world.nodes.get_mut("dtn://c").unwrap().register(
        "app://general",
        NameSpecifier::parse("[role=general]").unwrap(),
        10_000.0,
        0.0,
    );
    world.schedule_initial_events();

    let inner = Bundle {
        bundle_id: "inner-1".to_string(),
        source_specifier: NameSpecifier::parse("[eid=dtn://a]").unwrap(),
        destination_specifier: NameSpecifier::parse("[role=general]").unwrap(),
        meb: MetadataExtensionBlock::scoped(
            RoutingState::Stem,
            Some(WithinPredicate::new(c_pos, 0.5).unwrap()),
            Some(500.0),
        )
        .unwrap(),
        payload: b"carried inside an envelope".to_vec(),
        created_at: 1.0,
        hop_count: 0,
    };
    // dtn://a cannot resolve the name; it wraps the bundle for the next
    // resolver dtn://b, which unwraps and routes onward to the region.
    let envelope = bundle::encapsulate(&inner, "dtn://b", 1.0);
    world.schedule_injection(1.0, "dtn://a", envelope);

    let metrics = world.run(30.0).unwrap();
    assert_eq!(metrics.delivered, 1);

    let at_c = world.nodes["dtn://c"]
        .pending_bundle("inner-1")
        .expect("inner bundle reached dtn://c")
        .clone();
    assert_eq!(at_c.bundle_id, inner.bundle_id);
    assert_eq!(at_c.source_specifier, inner.source_specifier);
    assert_eq!(at_c.destination_specifier, inner.destination_specifier);
    assert_eq!(at_c.payload, inner.payload);
    assert_eq!(at_c.created_at, inner.created_at);
    assert_eq!(at_c.meb.scope_predicate, inner.meb.scope_predicate);
    assert_eq!(at_c.meb.ttl_seconds, inner.meb.ttl_seconds);
    assert_eq!(at_c.hop_count, 2, "one hop into the envelope leg, one out");

    let trace = parse_trace(world.trace());
    assert!(trace
        .iter()
        .any(|l| l.ev == "SEND" && l.detail_value("state") == Some("POINT_TO_POINT")));
    assert!(trace.iter().any(|l| l.ev == "DELIVER" && l.node == "dtn://c"));
    println!("PASS criterion 11: envelope unwrapped at resolver, inner bundle intact at delivery");
}
