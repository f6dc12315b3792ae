//! The checkers on hand-built delivery patterns: one that respects every
//! property and one with two messages seen in opposite orders.
//!
//! ```bash
//! cargo run --example delivery_patterns
//! ```

use scd_broadcast::checkers::check_scd_properties;
use scd_broadcast::fixtures::{delivery_pattern, negative_example, positive_example};
use scd_broadcast::trace::Layer;

fn show(name: &str, trace: &scd_broadcast::trace::Trace) {
    println!("{name}:");
    for v in check_scd_properties(trace, Layer::Scd) {
        println!("  {v}");
    }
}

fn main() {
    show("positive", &positive_example());
    show("negative", &negative_example());
    // Prefix unions {m1} and {m2} are incomparable.
    show("containment breach", &delivery_pattern(&[&[&[1], &[2]], &[&[2], &[1]]]));
}
