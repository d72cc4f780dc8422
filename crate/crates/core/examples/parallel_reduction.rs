//! Tree reduction of transfer tables at different worker counts.
//!
//!     cargo run --release --example parallel_reduction -- 2000000

use std::time::Instant;

use sandpile_ap::instances::{generate, GeneratorSpec};
use sandpile_ap::ncdecider::sequential_fold;
use sandpile_ap::{decide_linear, decide_parallel, reduce_range, ApInstance};

fn main() -> sandpile_ap::Result<()> {
    let m: usize = std::env::args().nth(1).map_or(1_000_000, |a| a.parse().expect("length"));
    let s = generate(&GeneratorSpec::new(3, m, 0.05, 11))?;
    let fold = sequential_fold(&s)?;
    for workers in [1, 2, 4, 8] {
        let start = Instant::now();
        let table = reduce_range(&s, workers)?;
        println!(
            "workers {workers}: {:?}, identical to sequential fold: {}",
            start.elapsed(),
            table == fold
        );
    }
    let inst = ApInstance::new(s, m + 1)?;
    println!("linear {} / parallel {}", decide_linear(&inst)?, decide_parallel(&inst, 4)?);
    Ok(())
}
