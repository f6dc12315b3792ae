//! A parallel seed sweep over random workloads with crashes, summarized per
//! seed in seed order.
//!
//! ```bash
//! cargo run --release --example seed_sweep
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scd_broadcast::gen::{broadcast_workload, max_tolerated, random_crashes};
use scd_broadcast::runner::{run_checked, sweep, SeedSummary};
use scd_broadcast::sim::SimConfig;
use scd_broadcast::verify::CheckOptions;

fn main() {
    let n = 5;
    let results = sweep(0..500, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let crashes = random_crashes(&mut rng, n, max_tolerated(n), 100);
        let messages = rng.gen_range(1..=20);
        let config = SimConfig { n, t: max_tolerated(n), seed, crashes, ..SimConfig::default() };
        let c = run_checked(&config, &broadcast_workload(&mut rng, n, messages, 100), &CheckOptions::default())
            .expect("generated configurations are valid");
        SeedSummary::of(seed, &c)
    });
    let failing: Vec<_> = results.iter().filter(|(_, s)| !s.failed.is_empty()).collect();
    let worst = results.iter().filter_map(|(_, s)| s.max_latency).max();
    let sends = results.iter().map(|(_, s)| s.max_forward_sends).max();
    println!("{} seeds, {} failing, max FORWARD sends {sends:?}, worst latency {worst:?}", results.len(), failing.len());
    for (seed, s) in failing.iter().take(5) {
        println!("  seed {seed}: {:?}", s.failed);
    }
}
