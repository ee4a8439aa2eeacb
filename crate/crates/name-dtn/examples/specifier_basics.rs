//! Parse, canonicalize, and match name-specifiers.
//!
//! Run with `cargo run --example specifier_basics`.

use name_dtn::specifier::NameSpecifier;

fn main() {
    // Whitespace between tokens is free-form; multi-word values like
    // "116 degrees" keep their internal single spaces.
    let advert = NameSpecifier::parse(
        "[role=general [mission=rescue]]
         [location=known [longitude=116 degrees] [latitude=40 degrees]]",
    )
    .unwrap();
    println!("advert (canonical): {advert}");

    // A query matches when every attribute-value pair it mentions appears,
    // with the same nesting, in the advertised name. Omitted attributes
    // are "don't care".
    let queries = [
        "[role=general]",
        "[role=general [mission=rescue]]",
        "[location=known [latitude=40 degrees]]",
        "[role=general [mission=supply]]",
        "[rank=colonel]",
    ];
    for q in queries {
        let query = NameSpecifier::parse(q).unwrap();
        println!(
            "  query {:<46} -> {}",
            query.to_string(),
            if query.matches(&advert) { "match" } else { "no match" }
        );
    }

    // Sibling order never matters: these two texts name the same thing.
    let a = NameSpecifier::parse("[b=2] [a=1]").unwrap();
    let b = NameSpecifier::parse("[a=1] [b=2]").unwrap();
    assert_eq!(a, b);
    println!("\n\"[b=2] [a=1]\" and \"[a=1] [b=2]\" both serialize as: {a}");

    // Malformed input is rejected with a specific error.
    for bad in ["[role general]", "[role=]", "[a=1", ""] {
        println!("  parse {bad:?}: {}", NameSpecifier::parse(bad).unwrap_err());
    }
}
