//! Exhaustive and sampled comparison against the brute-force avalanche,
//! plus a deliberately broken candidate to show the shrunk witness.
//!
//!     cargo run --release --example verify_equivalence

use sandpile_ap::avalanche::Status;
use sandpile_ap::verify::{default_candidates, run_verification, Candidate, VerifyPlan};
use sandpile_ap::SlopeConfig;

fn main() -> sandpile_ap::Result<()> {
    for p in 1..=3 {
        let plan = VerifyPlan {
            samples: 50,
            sample_len: 500,
            ..VerifyPlan::exhaustive(p, 9 - 2 * p as usize)
        };
        println!("p = {p}\n{}\n", run_verification(&plan, &default_candidates(2))?);
    }

    let mut broken = default_candidates(1);
    let last_bit_lost: Candidate = Box::new(|s: &SlopeConfig| {
        let st = sandpile_ap::ncdecider::final_status_linear(s)?;
        let mask = (1u32 << (s.p() - 1)) - 1;
        Ok(Status::new(st.bits() & mask, st.position(), s.p()))
    });
    broken.push(("drops-top-bit".into(), last_bit_lost));
    println!("{}", run_verification(&VerifyPlan::exhaustive(2, 6), &broken)?);
    Ok(())
}
