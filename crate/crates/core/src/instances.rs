//! Where instances come from: the text and JSON config formats, a seeded
//! generator, an exhaustive enumerator, and the bundled example fixtures.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SlopeConfig;
use crate::error::{Result, SandpileError};

/// Name of the generator algorithm, written into generated files.
pub const GENERATOR_ID: &str = "chacha8/rand-0.8/v1";

/// Upper bound on `(p+1)^m` for [`enumerate_gsm`].
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Serialize, Deserialize)]
struct JsonConfig {
    p: i64,
    slopes: Vec<i32>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> SandpileError {
    SandpileError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses the text format (line 1: `p`, line 2: slopes; blank lines and lines
/// starting with `#` are skipped) or, if the input starts with `{`, the JSON
/// form `{"p": .., "slopes": [..]}`.
pub fn parse_config(text: &str) -> Result<SlopeConfig> {
    if text.trim_start().starts_with('{') {
        return parse_json(text);
    }
    let mut content = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });

    let Some((p_idx, p_line)) = content.next() else {
        return Err(parse_err(1, 1, "missing p line"));
    };
    let p_col = p_line.len() - p_line.trim_start().len() + 1;
    let p_tok = p_line.trim();
    let p: i64 = p_tok
        .parse()
        .map_err(|_| parse_err(p_idx + 1, p_col, format!("malformed integer {p_tok:?} for p")))?;
    if p < 1 || p > u32::MAX as i64 {
        return Err(parse_err(p_idx + 1, p_col, format!("p must be a positive integer, got {p}")));
    }

    let mut slopes = Vec::new();
    if let Some((idx, line)) = content.next() {
        let mut offset = 0;
        for tok in line.split_whitespace() {
            let col = line[offset..].find(tok).unwrap() + offset;
            offset = col + tok.len();
            let v: i32 = tok
                .parse()
                .map_err(|_| parse_err(idx + 1, col + 1, format!("malformed integer {tok:?}")))?;
            slopes.push(v);
        }
    }
    if let Some((idx, line)) = content.next() {
        let col = line.len() - line.trim_start().len() + 1;
        return Err(parse_err(idx + 1, col, "unexpected content after the slope line"));
    }
    SlopeConfig::new(p as u32, slopes)
}

fn parse_json(text: &str) -> Result<SlopeConfig> {
    let cfg: JsonConfig = serde_json::from_str(text)
        .map_err(|e| parse_err(e.line(), e.column(), e.to_string()))?;
    if cfg.p < 1 || cfg.p > u32::MAX as i64 {
        return Err(parse_err(1, 1, format!("p must be a positive integer, got {}", cfg.p)));
    }
    SlopeConfig::new(cfg.p as u32, cfg.slopes)
}

/// Text form; `parse_config(&serialize_config(s))` gives back `s`.
pub fn serialize_config(s: &SlopeConfig) -> String {
    let slopes: Vec<String> = s.slopes().iter().map(|v| v.to_string()).collect();
    format!("{}\n{}\n", s.p(), slopes.join(" "))
}

pub fn config_to_json(s: &SlopeConfig) -> String {
    serde_json::to_string(&JsonConfig {
        p: s.p() as i64,
        slopes: s.slopes().to_vec(),
    })
    .expect("plain struct serializes")
}

pub fn read_config(path: &Path) -> Result<SlopeConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| SandpileError::InvalidInput(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parameters of the random gSM generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub p: u32,
    pub m: usize,
    /// Probability that a slope is 0; otherwise uniform on `1..=p`.
    pub zero_density: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(p: u32, m: usize, zero_density: f64, seed: u64) -> Self {
        GeneratorSpec {
            p,
            m,
            zero_density,
            seed,
        }
    }

    /// Comment line recording how a file was generated.
    pub fn header(&self) -> String {
        format!(
            "# generator={GENERATOR_ID} p={} m={} zero_density={} seed={}",
            self.p, self.m, self.zero_density, self.seed
        )
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<SlopeConfig> {
    if spec.p == 0 {
        return Err(SandpileError::InvalidParameter(0));
    }
    if !(0.0..=1.0).contains(&spec.zero_density) {
        return Err(SandpileError::InvalidInput(format!(
            "zero density {} is outside [0, 1]",
            spec.zero_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.p as i32;
    let slopes = (0..spec.m)
        .map(|_| {
            if rng.gen_bool(spec.zero_density) {
                0
            } else {
                rng.gen_range(1..=p)
            }
        })
        .collect();
    SlopeConfig::new(spec.p, slopes)
}

/// All `(p+1)^m` gSM configurations of length `m`, in lexicographic order.
pub fn enumerate_gsm(p: u32, m: usize) -> Result<GsmEnumerator> {
    if p == 0 {
        return Err(SandpileError::InvalidParameter(0));
    }
    let count = (p as u128 + 1)
        .checked_pow(m as u32)
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or(SandpileError::EnumerationTooLarge {
            count: (p as u128 + 1).saturating_pow(m.min(u32::MAX as usize) as u32),
            limit: ENUMERATION_LIMIT,
        })?;
    Ok(GsmEnumerator {
        p,
        next: Some(vec![0; m]),
        remaining: count as usize,
    })
}

pub struct GsmEnumerator {
    p: u32,
    next: Option<Vec<i32>>,
    remaining: usize,
}

impl Iterator for GsmEnumerator {
    type Item = SlopeConfig;

    fn next(&mut self) -> Option<SlopeConfig> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut pos = succ.len();
        self.next = loop {
            if pos == 0 {
                break None;
            }
            pos -= 1;
            if succ[pos] < self.p as i32 {
                succ[pos] += 1;
                break Some(succ);
            }
            succ[pos] = 0;
        };
        self.remaining -= 1;
        Some(SlopeConfig::new(self.p, cur).expect("p checked at construction"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for GsmEnumerator {}

/// Expected results stored next to a fixture config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureExpectation {
    pub firings: Vec<usize>,
    pub fired: Vec<usize>,
    /// Answer for every valid `k`.
    pub answers: BTreeMap<usize, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub name: String,
    pub config: SlopeConfig,
    pub expected: FixtureExpectation,
}

fn fixture(name: &str, p: u32, slopes: &[i32], firings: &[usize], answers: &[(usize, bool)]) -> Fixture {
    let mut fired = firings.to_vec();
    fired.sort_unstable();
    Fixture {
        name: name.to_string(),
        config: SlopeConfig::new(p, slopes.to_vec()).expect("fixture p >= 1"),
        expected: FixtureExpectation {
            firings: firings.to_vec(),
            fired,
            answers: answers.iter().copied().collect(),
        },
    }
}

/// The four worked examples: two decision instances, the zero-slope stop
/// case, and the all-twos lattice example.
pub fn example_fixtures() -> Vec<Fixture> {
    vec![
        fixture("e1", 2, &[2, 0, 2, 1, 1, 2, 1, 0, 2], &[1, 3], &[(10, false), (11, false)]),
        fixture(
            "e2",
            3,
            &[3, 0, 2, 3, 1, 3, 1],
            &[1, 4, 3, 6, 5],
            &[(8, true), (9, true), (10, false)],
        ),
        fixture("e3", 2, &[2, 0, 2, 2, 1, 2, 2], &[1, 3], &[(8, false), (9, false)]),
        fixture("e4", 2, &[2, 2, 2, 2, 2], &[1, 3, 2, 4, 5], &[(6, true), (7, true)]),
    ]
}

/// Writes `<name>.cfg` and `<name>.expected.json` for each fixture.
pub fn write_fixture_dir(dir: &Path, fixtures: &[Fixture]) -> Result<()> {
    let io = |e: std::io::Error| SandpileError::InvalidInput(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for f in fixtures {
        fs::write(dir.join(format!("{}.cfg", f.name)), serialize_config(&f.config)).map_err(io)?;
        let json = serde_json::to_string_pretty(&f.expected).expect("expectation serializes");
        fs::write(dir.join(format!("{}.expected.json", f.name)), json + "\n").map_err(io)?;
    }
    Ok(())
}

/// Loads every `<name>.cfg` with a matching `<name>.expected.json`, sorted by name.
pub fn load_fixture_dir(dir: &Path) -> Result<Vec<Fixture>> {
    let io = |e: std::io::Error| SandpileError::InvalidInput(format!("{}: {e}", dir.display()));
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(name) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".cfg"))
        else {
            continue;
        };
        let config = read_config(&path)?;
        let exp_path = dir.join(format!("{name}.expected.json"));
        let text = fs::read_to_string(&exp_path).map_err(io)?;
        let expected: FixtureExpectation = serde_json::from_str(&text)
            .map_err(|e| parse_err(e.line(), e.column(), e.to_string()))?;
        out.push(Fixture {
            name: name.to_string(),
            config,
            expected,
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let e1 = parse_config("2\n2 0 2 1 1 2 1 0 2\n").unwrap();
        assert_eq!(e1, example_fixtures()[0].config);
        let e2 = parse_config("3\n3 0 2 3 1 3 1\n").unwrap();
        assert_eq!(e2, example_fixtures()[1].config);
        let empty = parse_config("2\n\n").unwrap();
        assert_eq!(empty.p(), 2);
        assert!(empty.is_empty());
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let s = parse_config("# header\n\n  3\n# slopes next\n 1  2 3\n\n").unwrap();
        assert_eq!(s.slopes(), &[1, 2, 3]);
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert_eq!(
            parse_config("2\n1 x 3\n"),
            Err(SandpileError::Parse {
                line: 2,
                column: 3,
                message: "malformed integer \"x\"".into()
            })
        );
        assert!(matches!(
            parse_config("# only a comment\n"),
            Err(SandpileError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("-2\n1\n"),
            Err(SandpileError::Parse { line: 1, column: 1, .. })
        ));
        assert!(matches!(parse_config("0\n1\n"), Err(SandpileError::Parse { .. })));
        assert!(matches!(
            parse_config("2\n1\n3\n"),
            Err(SandpileError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn json_form() {
        let s = parse_config(r#"{"p": 3, "slopes": [3, 0, 2]}"#).unwrap();
        assert_eq!(s.slopes(), &[3, 0, 2]);
        assert_eq!(parse_config(&config_to_json(&s)).unwrap(), s);
        assert!(matches!(
            parse_config(r#"{"p": 0, "slopes": []}"#),
            Err(SandpileError::Parse { .. })
        ));
        assert!(matches!(parse_config(r#"{"p": 2"#), Err(SandpileError::Parse { .. })));
    }

    #[test]
    fn serialize_round_trip_examples() {
        for f in example_fixtures() {
            assert_eq!(parse_config(&serialize_config(&f.config)).unwrap(), f.config);
        }
        let empty = SlopeConfig::new(2, vec![]).unwrap();
        assert_eq!(serialize_config(&empty), "2\n\n");
        assert_eq!(parse_config(&serialize_config(&empty)).unwrap(), empty);
    }

    #[test]
    fn generator_contract() {
        let positive = generate(&GeneratorSpec::new(3, 500, 0.0, 1)).unwrap();
        assert!(positive.slopes().iter().all(|&v| (1..=3).contains(&v)));
        let zeros = generate(&GeneratorSpec::new(3, 50, 1.0, 1)).unwrap();
        assert!(zeros.slopes().iter().all(|&v| v == 0));
        let spec = GeneratorSpec::new(4, 200, 0.3, 7);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(
            generate(&spec).unwrap(),
            generate(&GeneratorSpec { seed: 8, ..spec }).unwrap()
        );
        assert!(generate(&GeneratorSpec::new(2, 5, 1.5, 0)).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let all: Vec<Vec<i32>> = enumerate_gsm(1, 2)
            .unwrap()
            .map(|s| s.slopes().to_vec())
            .collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(enumerate_gsm(2, 8).unwrap().count(), 6561);
        let p2m1: Vec<Vec<i32>> = enumerate_gsm(2, 1)
            .unwrap()
            .map(|s| s.slopes().to_vec())
            .collect();
        assert_eq!(p2m1, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(enumerate_gsm(3, 0).unwrap().count(), 1);
        assert!(matches!(
            enumerate_gsm(3, 12),
            Err(SandpileError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn fixture_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_dir(dir.path(), &example_fixtures()).unwrap();
        assert_eq!(load_fixture_dir(dir.path()).unwrap(), example_fixtures());
    }
}
