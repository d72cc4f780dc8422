//! Replays an avalanche firing by firing, with slopes and statuses.
//!
//!     cargo run --example trace_avalanche -- 3 3 0 2 3 1 3 1

use sandpile_ap::{compute_avalanche, status_at, SlopeConfig};

fn main() -> sandpile_ap::Result<()> {
    let args: Vec<i32> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (p, slopes) = match args.split_first() {
        Some((&p, rest)) if !rest.is_empty() => (p as u32, rest.to_vec()),
        _ => (3, vec![3, 0, 2, 3, 1, 3, 1]),
    };
    let s = SlopeConfig::new(p, slopes)?;
    let av = compute_avalanche(&s)?;
    println!("start      {s}");
    println!("add grain  {}", s.add_grain()?);
    for rec in av.trace(true) {
        let slopes = rec.slopes_after.unwrap_or_default();
        println!("{:>3} fire {:>3} {:<4} -> {slopes:?}", rec.step, rec.column, rec.kind.to_string());
    }
    println!("fired set  {:?}", av.fired.columns().collect::<Vec<_>>());
    println!("final      {}", av.final_config);
    for i in p as usize + 1..=s.len() + 1 {
        println!("status at {i:>3}: {}", status_at(&av, i));
    }
    Ok(())
}
