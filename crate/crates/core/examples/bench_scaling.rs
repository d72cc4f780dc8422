//! Times the linear and parallel deciders across sizes and worker counts.
//!
//!     cargo run --release --example bench_scaling

use sandpile_ap::bench::{run_bench, BenchPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = BenchPlan {
        sizes: vec![100_000, 1_000_000],
        workers: vec![1, 2, 4],
        ..BenchPlan::default()
    };
    let report = run_bench(&plan)?;
    print!("{}", report.to_markdown());
    Ok(())
}
