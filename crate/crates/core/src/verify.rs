//! Cross-checks the fast deciders against the brute-force avalanche.
//!
//! A candidate computes the status at `m+1` for a configuration; its bit
//! `kappa-1` is the answer for target `k = m + kappa`, so one status covers
//! every valid `k`. Each configuration is also run through the structural
//! avalanche checks and the status-by-status comparison of the linear scan.

use std::fmt;

use crate::avalanche::{check_lemmas, compute_avalanche, status_at, Status};
use crate::config::SlopeConfig;
use crate::error::Result;
use crate::instances::{enumerate_gsm, generate, GeneratorSpec};
use crate::ncdecider::{final_status_linear, final_status_parallel, StatusScan};

pub type Candidate = Box<dyn Fn(&SlopeConfig) -> Result<Status> + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyPlan {
    pub p: u32,
    /// Exhaustive pass covers every config of exactly this length.
    pub max_len: usize,
    pub samples: usize,
    pub sample_len: usize,
    pub zero_density: f64,
    pub seed: u64,
    pub workers: usize,
}

impl VerifyPlan {
    pub fn exhaustive(p: u32, max_len: usize) -> Self {
        VerifyPlan {
            p,
            max_len,
            samples: 0,
            sample_len: 1000,
            zero_density: 0.25,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub config: SlopeConfig,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub exhaustive_configs: usize,
    pub sampled_configs: usize,
    /// (config, k) pairs compared.
    pub instances: usize,
    pub mismatches: usize,
    pub lemma_violations: usize,
    pub status_mismatches: usize,
    /// Smallest failing config found, after shrinking.
    pub witness: Option<Failure>,
}

impl VerifyReport {
    pub fn clean(&self) -> bool {
        self.mismatches == 0 && self.lemma_violations == 0 && self.status_mismatches == 0
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} configs × all k: {} mismatches",
            self.exhaustive_configs, self.mismatches
        )?;
        if self.sampled_configs > 0 {
            writeln!(f, "{} sampled configs included", self.sampled_configs)?;
        }
        writeln!(f, "{} (config, k) pairs compared", self.instances)?;
        writeln!(f, "structural violations: {}", self.lemma_violations)?;
        write!(f, "status mismatches: {}", self.status_mismatches)?;
        if let Some(w) = &self.witness {
            write!(f, "\nwitness {}: {}", w.config, w.description)?;
        }
        Ok(())
    }
}

/// The linear and parallel deciders, as verification candidates.
pub fn default_candidates(workers: usize) -> Vec<(String, Candidate)> {
    vec![
        ("linear".to_string(), Box::new(final_status_linear)),
        (
            "parallel".to_string(),
            Box::new(move |s: &SlopeConfig| final_status_parallel(s, workers)),
        ),
    ]
}

/// Everything wrong with one config, or `None` if it checks out.
fn check_config(s: &SlopeConfig, candidates: &[(String, Candidate)], tally: &mut VerifyReport) -> Option<String> {
    let mut problems = Vec::new();
    let p = s.p();
    let av = match compute_avalanche(s) {
        Ok(av) => av,
        Err(e) => return Some(format!("oracle failed: {e}")),
    };
    for v in check_lemmas(&av, s) {
        tally.lemma_violations += 1;
        problems.push(v.to_string());
    }
    let truth = status_at(&av, s.len() + 1);
    tally.instances += p as usize;
    for (name, cand) in candidates {
        match cand(s) {
            Ok(got) => {
                let bad = (0..p).filter(|&j| got.bit(j) != truth.bit(j)).count();
                if bad > 0 {
                    tally.mismatches += bad;
                    problems.push(format!("{name} final status {got}, expected {truth}"));
                }
            }
            Err(e) => {
                tally.mismatches += p as usize;
                problems.push(format!("{name} failed: {e}"));
            }
        }
    }
    if s.len() > p as usize {
        if let Ok(scan) = StatusScan::new(s) {
            for st in scan {
                let want = status_at(&av, st.position());
                if st != want {
                    tally.status_mismatches += 1;
                    problems.push(format!("scan status at {} is {st}, expected {want}", st.position()));
                    break;
                }
            }
        }
    }
    (!problems.is_empty()).then(|| problems.join("; "))
}

fn fails(s: &SlopeConfig, candidates: &[(String, Candidate)]) -> bool {
    !s.is_empty() && check_config(s, candidates, &mut VerifyReport::default()).is_some()
}

/// Greedily shortens and lowers a failing config while it keeps failing.
pub fn shrink(start: &SlopeConfig, candidates: &[(String, Candidate)]) -> SlopeConfig {
    let mut best = start.clone();
    loop {
        let slopes = best.slopes().to_vec();
        let mut tries = Vec::new();
        if slopes.len() > 1 {
            tries.push(slopes[..slopes.len() - 1].to_vec());
            tries.push(slopes[1..].to_vec());
        }
        for i in 0..slopes.len() {
            if slopes[i] > 0 {
                let mut t = slopes.clone();
                t[i] -= 1;
                tries.push(t);
            }
        }
        let next = tries
            .into_iter()
            .map(|t| SlopeConfig::new(best.p(), t).expect("p unchanged"))
            .find(|c| fails(c, candidates));
        match next {
            Some(c) => best = c,
            None => return best,
        }
    }
}

/// Runs the exhaustive pass, then the sampled pass.
pub fn run_verification(plan: &VerifyPlan, candidates: &[(String, Candidate)]) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut first: Option<SlopeConfig> = None;
    for s in enumerate_gsm(plan.p, plan.max_len)? {
        report.exhaustive_configs += 1;
        if s.is_empty() {
            continue;
        }
        if check_config(&s, candidates, &mut report).is_some() && first.is_none() {
            first = Some(s);
        }
    }
    for idx in 0..plan.samples {
        let spec = GeneratorSpec::new(
            plan.p,
            plan.sample_len,
            plan.zero_density,
            plan.seed.wrapping_add(idx as u64),
        );
        let s = generate(&spec)?;
        report.sampled_configs += 1;
        if check_config(&s, candidates, &mut report).is_some() && first.is_none() {
            first = Some(s);
        }
    }
    if let Some(s) = first {
        let small = shrink(&s, candidates);
        let description = check_config(&small, candidates, &mut VerifyReport::default())
            .unwrap_or_default();
        report.witness = Some(Failure {
            config: small,
            description,
        });
    }
    Ok(report)
}
