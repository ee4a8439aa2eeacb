//! Bundle-in-bundle forwarding: a node that cannot resolve a name wraps
//! the bundle in an envelope addressed point-to-point to a resolver it
//! does know. The resolver unwraps the envelope and routes the inner
//! bundle onward; the inner bundle arrives with its immutable fields
//! untouched and only its hop count advanced.
//!
//! Run with `cargo run --example envelope_forwarding`.

use name_dtn::bundle::{self, Bundle, MetadataExtensionBlock, RoutingState};
use name_dtn::geo::{GeoPoint, WithinPredicate};
use name_dtn::sim::World;
use name_dtn::specifier::NameSpecifier;

fn main() {
    // Three nodes in a line, 1 km apart, range 1.2 km: a-b-c.
    let mut world = World::new(1.2, 30.0);
    world.add_node("dtn://a", GeoPoint::new(10.0, 0.0).unwrap());
    world.add_node("dtn://b", GeoPoint::new(10.009, 0.0).unwrap());
    world.add_node("dtn://c", GeoPoint::new(10.018, 0.0).unwrap());

    let general = NameSpecifier::parse("[role=general]").unwrap();
    let c_pos = GeoPoint::new(10.018, 0.0).unwrap();
    world
        .nodes
        .get_mut("dtn://c")
        .unwrap()
        .register("app://general", general.clone(), 10_000.0, 0.0);
    world.schedule_initial_events();

    let inner = Bundle {
        bundle_id: "inner-1".into(),
        source_specifier: NameSpecifier::parse("[node=a]").unwrap(),
        destination_specifier: general,
        meb: MetadataExtensionBlock::scoped(
            RoutingState::Stem,
            Some(WithinPredicate::new(c_pos, 0.5).unwrap()),
            Some(200.0),
        )
        .unwrap(),
        payload: b"carried inside an envelope".to_vec(),
        created_at: 1.0,
        hop_count: 0,
    };

    // The envelope's destination is the resolver's canonical EID and its
    // payload is the encoded inner bundle.
    let envelope = bundle::encapsulate(&inner, "dtn://b", 1.0);
    println!("envelope on the wire:\n---");
    print!("{}", String::from_utf8_lossy(&bundle::encode(&envelope)));
    println!("---\n");

    world.schedule_injection(1.0, "dtn://a", envelope);
    let metrics = world.run(30.0).unwrap();

    for line in world.trace() {
        if !line.contains("ev=BEACON") && !line.contains("ev=HOLD") {
            println!("{line}");
        }
    }
    println!("--- metrics ---\n{}", metrics.render());
}
