//! Store-and-forward across a network partition: the only link between
//! two groups is a contact window that opens at t=100, so the bundle is
//! held at the edge of its partition and crosses when the window opens.
//!
//! The scenario is written in the same line-oriented format the `name-dtn`
//! binary reads from `--scenario` files.
//!
//! Run with `cargo run --example disruption_window`.

use name_dtn::scenario::Scenario;

const SCENARIO: &str = "\
node dtn://a1 10.0 0.0
node dtn://b1 10.009 0.0
node dtn://b2 10.018 0.0
range 1.2
until 150
register dtn://b2 app://general 10000 [role=general]
contact dtn://a1 dtn://b1 100 120
inject m1 dtn://a1 1 dst [role=general] [location=known [longitude=10.018 degrees] [latitude=0 degrees] [distance=0.5 km]]
";

fn main() {
    let scenario = Scenario::parse(SCENARIO).unwrap();
    let mut world = scenario.build_world().unwrap();
    let metrics = world.run(scenario.until_s).unwrap();

    // Show the hold at dtn://a1, then the burst of activity once the
    // contact window opens. Repeated HOLD lines in between are elided.
    let mut last_hold = None;
    for line in world.trace() {
        if line.contains("ev=HOLD") {
            last_hold = Some(line.clone());
            continue;
        }
        if let Some(hold) = last_hold.take() {
            println!("{hold}   (last of many)");
        }
        println!("{line}");
    }
    println!("--- metrics ---\n{}", metrics.render());
}
