//! Geographic routing across a 4x4 grid: a bundle addressed to a name in
//! a circular region travels hop by hop toward the region (STEM), then
//! floods inside it and delivers to every matching registration.
//!
//! Run with `cargo run --example grid_routing`.

use name_dtn::bundle::{Bundle, MetadataExtensionBlock, RoutingState};
use name_dtn::geo::{GeoPoint, WithinPredicate};
use name_dtn::sim::World;
use name_dtn::specifier::NameSpecifier;

fn main() {
    // 4x4 grid with 0.02 degree spacing (~2.2 km at this latitude); radio
    // range 3.2 km reaches orthogonal and diagonal neighbors only.
    let mut world = World::new(3.2, 60.0);
    let pos = |col: u32, row: u32| {
        GeoPoint::new(10.0 + 0.02 * f64::from(col), 0.02 * f64::from(row)).unwrap()
    };
    for row in 0..4 {
        for col in 0..4 {
            world.add_node(format!("dtn://g{col}{row}"), pos(col, row));
        }
    }

    // Two nodes near the origin corner register the same role; both are
    // inside the 3 km destination region.
    let general = NameSpecifier::parse("[role=general]").unwrap();
    for eid in ["dtn://g00", "dtn://g10"] {
        world
            .nodes
            .get_mut(eid)
            .unwrap()
            .register("app://general", general.clone(), 10_000.0, 0.0);
    }
    world.schedule_initial_events();

    let center = pos(0, 0);
    let bundle = Bundle {
        bundle_id: "demo-1".into(),
        source_specifier: NameSpecifier::parse("[node=g33]").unwrap(),
        destination_specifier: general,
        meb: MetadataExtensionBlock::scoped(
            RoutingState::Stem,
            Some(WithinPredicate::new(center, 3.0).unwrap()),
            Some(300.0),
        )
        .unwrap(),
        payload: b"report to the corner post".to_vec(),
        created_at: 1.0,
        hop_count: 0,
    };
    world.schedule_injection(1.0, "dtn://g33", bundle);

    let metrics = world.run(60.0).unwrap();

    println!("--- trace (injection, forwarding, and delivery events) ---");
    for line in world.trace() {
        if ["ev=CREATE", "ev=SEND", "ev=STATE", "ev=DELIVER", "ev=DUP"]
            .iter()
            .any(|ev| line.contains(ev))
        {
            println!("{line}");
        }
    }
    println!("--- metrics ---\n{}", metrics.render());
}
