//! Writes generated configs and the bundled fixtures to a directory.
//!
//!     cargo run --example generate_corpus -- /tmp/corpus

use std::fs;
use std::path::PathBuf;

use sandpile_ap::instances::{example_fixtures, generate, load_fixture_dir, read_config, write_fixture_dir, GeneratorSpec};
use sandpile_ap::serialize_config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus".into()));
    fs::create_dir_all(&dir)?;
    for (p, density) in [(2, 0.0), (3, 0.1), (4, 0.3)] {
        let spec = GeneratorSpec::new(p, 64, density, 2024);
        let s = generate(&spec)?;
        let path = dir.join(format!("gen-p{p}.cfg"));
        fs::write(&path, format!("{}\n{}", spec.header(), serialize_config(&s)))?;
        assert_eq!(read_config(&path)?, s);
        println!("{} {}", path.display(), spec.header());
    }
    let fixtures = dir.join("fixtures");
    fs::create_dir_all(&fixtures)?;
    write_fixture_dir(&fixtures, &example_fixtures())?;
    println!("{} fixtures in {}", load_fixture_dir(&fixtures)?.len(), fixtures.display());
    Ok(())
}
