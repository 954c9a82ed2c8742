//! Runs the three-cell screening benchmark with a small replication count.
//!
//! `cargo run --release --example benchmark -- 100` for the full table.

use smle::bench::{canonical_benchmark, run_experiments};

fn main() -> smle::Result<()> {
    let reps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let report = run_experiments(&canonical_benchmark(reps, 1))?;
    println!(
        "{:<9} {:<10} {:>5} {:>6} {:>8}",
        "cell", "method", "SSR", "PRR", "iters"
    );
    for r in &report.rows {
        println!(
            "{:<9} {:<10} {:>5.2} {:>6.3} {:>8.1}",
            r.cell,
            r.method,
            r.ssr.unwrap_or(f64::NAN),
            r.prr.unwrap_or(f64::NAN),
            r.mean_iterations.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
