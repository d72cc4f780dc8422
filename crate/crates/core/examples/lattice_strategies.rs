//! Different firing orders reach the same stable configuration.
//!
//!     cargo run --example lattice_strategies

use sandpile_ap::{FiringStrategy, SlopeConfig};

fn main() -> sandpile_ap::Result<()> {
    let s = SlopeConfig::new(2, vec![2, 2, 2, 2, 2])?.add_grain()?;
    let strategies = [
        FiringStrategy::Leftmost,
        FiringStrategy::Rightmost,
        FiringStrategy::Explicit(vec![1, 3, 5, 2, 4]),
        FiringStrategy::SeededRandom(1),
        FiringStrategy::SeededRandom(2),
    ];
    println!("unstable start {s}");
    for strategy in &strategies {
        let (fin, order) = s.stabilize(strategy)?;
        println!("{:<28} order {:?} -> {:?}", format!("{strategy:?}"), order, fin.slots());
    }
    let bad = s.stabilize(&FiringStrategy::Explicit(vec![1, 3]));
    println!("stopping early: {}", bad.unwrap_err());
    Ok(())
}
