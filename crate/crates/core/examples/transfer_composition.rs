//! Builds per-position transfer tables and composes them by hand.
//!
//!     cargo run --example transfer_composition

use sandpile_ap::ncdecider::window_advance;
use sandpile_ap::{build_transfer, compose, compute_avalanche, seed_status, status_at, SlopeConfig};

fn main() -> sandpile_ap::Result<()> {
    let s = SlopeConfig::new(3, vec![3, 0, 2, 3, 1, 3, 1])?;
    let seed = seed_status(&s)?;
    println!("{s}\nseed {seed} at {}", seed.position());

    let t4 = build_transfer(&s, 4)?;
    let t5 = build_transfer(&s, 5)?;
    print!("{t4}");
    let both = compose(&t5, &t4)?;
    print!("composed {both}");

    let mut st = seed;
    for i in 4..=s.len() {
        st = build_transfer(&s, i)?.apply_status(&st)?;
        println!("status at {}: {st}", st.position());
    }

    let av = compute_avalanche(&s)?;
    let part = &s.slopes()[3..7];
    let (flags, out) = window_advance(3, 4, part, &status_at(&av, 4))?;
    println!("window from 4: fired flags {flags:?}, status at {} = {out}", out.position());
    Ok(())
}
