//! Timing harness for comparing the deciders on generated instances.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SandpileError;
use crate::instances::{generate, GeneratorSpec};
use crate::ncdecider::{decide_linear, decide_parallel, ApInstance, Method};
use crate::avalanche::decide_naive;

pub const CSV_HEADER: &str = "method,m,workers,repeat,elapsed_ns,answer";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sandpile(#[from] SandpileError),
    #[error("methods disagree on m = {m}, k = {k} ({}): {answers:?}", spec.header())]
    Disagreement {
        m: usize,
        k: usize,
        spec: GeneratorSpec,
        answers: Vec<(Method, usize, bool)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub workers: Vec<usize>,
    pub repeats: usize,
    pub p: u32,
    pub zero_density: f64,
    pub seed: u64,
}

impl Default for BenchPlan {
    fn default() -> Self {
        BenchPlan {
            methods: vec![Method::Linear, Method::Parallel],
            sizes: vec![1_000_000],
            workers: vec![1, 4],
            repeats: 3,
            p: 3,
            zero_density: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub m: usize,
    pub workers: usize,
    pub repeat: usize,
    pub elapsed_ns: u64,
    pub answer: bool,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method, self.m, self.workers, self.repeat, self.elapsed_ns, self.answer
        )
    }
}

/// Summary of one (method, m, workers) cell. Only the parallel method is
/// keyed by worker count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchCell {
    pub method: Method,
    pub m: usize,
    pub workers: Option<usize>,
    pub median_ns: u64,
    pub min_ns: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRatio {
    pub m_small: usize,
    pub m_large: usize,
    pub size_ratio: f64,
    pub time_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speedup {
    pub m: usize,
    pub base_workers: usize,
    pub workers: usize,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub cells: Vec<BenchCell>,
    pub linear_scaling: Vec<ScalingRatio>,
    pub speedups: Vec<Speedup>,
}

fn median(sorted: &[u64]) -> u64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        ((sorted[n / 2 - 1] as u128 + sorted[n / 2] as u128) / 2) as u64
    }
}

impl BenchReport {
    /// Builds the summary from raw rows. Pure.
    pub fn from_rows(rows: Vec<BenchRow>) -> Self {
        let mut groups: BTreeMap<(Method, usize, Option<usize>), Vec<u64>> = BTreeMap::new();
        for r in &rows {
            let w = (r.method == Method::Parallel).then_some(r.workers);
            groups.entry((r.method, r.m, w)).or_default().push(r.elapsed_ns);
        }
        let cells: Vec<BenchCell> = groups
            .into_iter()
            .map(|((method, m, workers), mut t)| {
                t.sort_unstable();
                BenchCell {
                    method,
                    m,
                    workers,
                    median_ns: median(&t),
                    min_ns: t[0],
                    samples: t.len(),
                }
            })
            .collect();

        let linear: Vec<&BenchCell> = cells.iter().filter(|c| c.method == Method::Linear).collect();
        let linear_scaling = linear
            .windows(2)
            .map(|w| ScalingRatio {
                m_small: w[0].m,
                m_large: w[1].m,
                size_ratio: w[1].m as f64 / w[0].m as f64,
                time_ratio: w[1].median_ns as f64 / w[0].median_ns.max(1) as f64,
            })
            .collect();

        let mut speedups = Vec::new();
        let parallel: Vec<&BenchCell> = cells.iter().filter(|c| c.method == Method::Parallel).collect();
        for m in parallel.iter().map(|c| c.m).collect::<std::collections::BTreeSet<_>>() {
            let at_m: Vec<&&BenchCell> = parallel.iter().filter(|c| c.m == m).collect();
            if let Some(base) = at_m.first() {
                for c in &at_m[1..] {
                    speedups.push(Speedup {
                        m,
                        base_workers: base.workers.unwrap_or(1),
                        workers: c.workers.unwrap_or(1),
                        speedup: base.median_ns as f64 / c.median_ns.max(1) as f64,
                    });
                }
            }
        }

        BenchReport {
            rows,
            cells,
            linear_scaling,
            speedups,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| method | m | workers | median ms | min ms | samples |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        for c in &self.cells {
            let w = c.workers.map_or("-".to_string(), |w| w.to_string());
            let low = if c.samples < 3 { " (low)" } else { "" };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.3} | {:.3} | {}{} |",
                c.method,
                c.m,
                w,
                c.median_ns as f64 / 1e6,
                c.min_ns as f64 / 1e6,
                c.samples,
                low
            );
        }
        for r in &self.linear_scaling {
            let _ = writeln!(
                out,
                "\nlinear: m {} -> {} (x{:.1}) took x{:.2}",
                r.m_small, r.m_large, r.size_ratio, r.time_ratio
            );
        }
        for s in &self.speedups {
            let _ = writeln!(
                out,
                "\nparallel m = {}: {} -> {} workers speedup {:.2}",
                s.m, s.base_workers, s.workers, s.speedup
            );
        }
        out
    }
}

fn run_once(inst: &ApInstance, method: Method, workers: usize) -> Result<(u64, bool), SandpileError> {
    let start = Instant::now();
    let answer = match method {
        Method::Naive => decide_naive(inst)?,
        Method::Linear => decide_linear(inst)?,
        Method::Parallel => decide_parallel(inst, workers)?,
    };
    Ok((start.elapsed().as_nanos().max(1) as u64, answer))
}

/// Times every (method, size, workers) combination after one warmup run.
/// Rows for an instance are kept only if all methods agree on it.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport, BenchError> {
    if plan.repeats == 0 || plan.workers.is_empty() || plan.methods.is_empty() {
        return Err(SandpileError::InvalidInput("empty bench plan".into()).into());
    }
    let mut sizes = plan.sizes.clone();
    sizes.sort_unstable();
    let mut rows = Vec::new();
    for &m in &sizes {
        if m < plan.p as usize + 2 {
            return Err(SandpileError::InvalidInput(format!(
                "size {m} is below p + 2 = {}",
                plan.p + 2
            ))
            .into());
        }
        let spec = GeneratorSpec::new(plan.p, m, plan.zero_density, plan.seed);
        let inst = ApInstance::new(generate(&spec)?, m + 1)?;
        let mut batch = Vec::new();
        let mut answers = Vec::new();
        for &method in &plan.methods {
            for &workers in &plan.workers {
                let (_, warm) = run_once(&inst, method, workers)?;
                answers.push((method, workers, warm));
                for repeat in 0..plan.repeats {
                    let (elapsed_ns, answer) = run_once(&inst, method, workers)?;
                    answers.push((method, workers, answer));
                    batch.push(BenchRow {
                        method,
                        m,
                        workers,
                        repeat,
                        elapsed_ns,
                        answer,
                    });
                }
            }
        }
        if answers.iter().any(|a| a.2 != answers[0].2) {
            answers.dedup();
            return Err(BenchError::Disagreement {
                m,
                k: m + 1,
                spec,
                answers,
            });
        }
        rows.extend(batch);
    }
    Ok(BenchReport::from_rows(rows))
}
