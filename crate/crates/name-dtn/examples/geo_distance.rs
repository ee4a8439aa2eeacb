//! Great-circle distances and circular region membership.
//!
//! Run with `cargo run --example geo_distance`.

use name_dtn::geo::{self, GeoPoint, WithinPredicate};

fn main() {
    let beijing = GeoPoint::new(116.4, 39.9).unwrap();
    let shanghai = GeoPoint::new(121.5, 31.2).unwrap();
    let sydney = GeoPoint::new(151.2, -33.9).unwrap();

    println!(
        "Beijing - Shanghai: {:8.1} km",
        geo::distance(&beijing, &shanghai)
    );
    println!(
        "Beijing - Sydney:   {:8.1} km",
        geo::distance(&beijing, &sydney)
    );
    println!(
        "Sydney  - Sydney:   {:8.1} km",
        geo::distance(&sydney, &sydney)
    );

    // A within-predicate is the geographic scope a bundle carries: a
    // center and a radius. The boundary itself counts as inside.
    let region = WithinPredicate::new(beijing, 1100.0).unwrap();
    for (name, p) in [("Shanghai", &shanghai), ("Sydney", &sydney)] {
        println!(
            "{name} within 1100 km of Beijing: {}",
            geo::within(p, &region)
        );
    }

    // Coordinates are validated at construction.
    println!("GeoPoint::new(200, 0): {}", GeoPoint::new(200.0, 0.0).unwrap_err());
    println!("GeoPoint::new(0, -91): {}", GeoPoint::new(0.0, -91.0).unwrap_err());
}
