//! Decides the bundled example instances with every method.
//!
//!     cargo run --example example_instances

use sandpile_ap::instances::example_fixtures;
use sandpile_ap::ncdecider::{decide, Method};
use sandpile_ap::ApInstance;

fn main() -> sandpile_ap::Result<()> {
    for fixture in example_fixtures() {
        println!("{}: {}", fixture.name, fixture.config);
        for (&k, &expected) in &fixture.expected.answers {
            let inst = ApInstance::new(fixture.config.clone(), k)?;
            let answers: Vec<String> = [Method::Naive, Method::Linear, Method::Parallel]
                .into_iter()
                .map(|m| decide(&inst, m, 2).map(|d| format!("{m}={}", if d.answer { "YES" } else { "NO" })))
                .collect::<Result<_, _>>()?;
            println!("  k = {k:>2}: {}  (expected {})", answers.join(" "), if expected { "YES" } else { "NO" });
        }
    }
    Ok(())
}
