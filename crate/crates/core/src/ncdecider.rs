//! Deciding the avalanche problem by propagating statuses.
//!
//! The status at position `i` is the `p`-bit window of fired flags for
//! columns `i-p..i-1`. Whether column `i` fires depends only on that window
//! and on the slopes `s_i..s_{i+p-1}`:
//!
//! * peak: `s_i = p` and column `i-p` fired;
//! * col: take the smallest `l` in `(i, i+p)` with `s_l = p` and `l-p` fired.
//!   Column `l` fires, and the descent `l-1, l-2, ..., i` continues through
//!   every column `c` with `s_c >= 1` or `c-p` fired.
//!
//! So each position has a total map from statuses at `i` to statuses at
//! `i+1` (a [`TransferFunction`]). Composing those maps is associative, which
//! lets [`reduce_range`] evaluate them as a balanced fork-join tree. The
//! single-status scan [`decide_linear`] threads one status through the same
//! rule in `O(m)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::avalanche::{compute_avalanche, status_at, Status};
use crate::config::SlopeConfig;
use crate::error::{Result, SandpileError};

/// Largest `p` for which transfer tables (`2^p` entries) are built.
pub const P_CAP: u32 = 16;
/// Above this `p`, table construction is slow enough to deserve a warning.
pub const P_WARN: u32 = 10;

const MIN_GRAIN: usize = 2048;
const DEDUP_EVERY: usize = 32;

/// An avalanche-problem instance: `s` in gSM and a target `k` in `(m, m+p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApInstance {
    config: SlopeConfig,
    k: usize,
}

impl ApInstance {
    pub fn new(config: SlopeConfig, k: usize) -> Result<Self> {
        if !config.in_gsm() {
            return Err(SandpileError::NotInGsm);
        }
        if config.is_empty() {
            return Err(SandpileError::InvalidInput(
                "the avalanche problem needs at least one column".into(),
            ));
        }
        let m = config.len();
        let p = config.p();
        if k <= m || k > m + p as usize {
            return Err(SandpileError::KOutOfRange { k, len: m, p });
        }
        Ok(ApInstance { config, k })
    }

    pub fn config(&self) -> &SlopeConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `k - m`, in `1..=p`.
    pub fn kappa(&self) -> usize {
        self.k - self.config.len()
    }
}

/// Every valid target column for `s`.
pub fn valid_targets(s: &SlopeConfig) -> std::ops::RangeInclusive<usize> {
    s.len() + 1..=s.len() + s.p() as usize
}

fn check_cap(p: u32) -> Result<()> {
    if p > P_CAP {
        Err(SandpileError::PTooLarge { p, cap: P_CAP })
    } else {
        Ok(())
    }
}

/// Slope at `i`, reading everything outside `1..=m` as 0 (overflow included).
#[inline]
fn slope_in(s: &SlopeConfig, i: usize) -> i32 {
    if i == 0 {
        0
    } else {
        s.slopes().get(i - 1).copied().unwrap_or(0)
    }
}

/// The slopes `s_i..s_{i+p-1}` seen from position `i`, as two masks: bit `j`
/// of `peak` is `s_{i+j} = p`, bit `j` of `zero` is `s_{i+j} = 0`.
#[derive(Debug, Clone, Copy)]
struct Window {
    p: u32,
    peak: u32,
    zero: u32,
}

impl Window {
    fn at(s: &SlopeConfig, i: usize) -> Self {
        let p = s.p();
        let mut w = Window { p, peak: 0, zero: 0 };
        for j in 0..p {
            w.set_bit(j, slope_in(s, i + j as usize));
        }
        w
    }

    #[inline]
    fn set_bit(&mut self, j: u32, slope: i32) {
        self.peak |= ((slope == self.p as i32) as u32) << j;
        self.zero |= ((slope == 0) as u32) << j;
    }

    /// Moves from position `i` to `i + 1`.
    #[inline]
    fn advance(&mut self, s: &SlopeConfig, i: usize) {
        self.peak >>= 1;
        self.zero >>= 1;
        self.set_bit(self.p - 1, slope_in(s, i + self.p as usize));
    }

    #[inline]
    fn fires(&self, status: u32) -> bool {
        let candidates = self.peak & status;
        if candidates == 0 {
            return false;
        }
        let below = (1u32 << candidates.trailing_zeros()) - 1;
        self.zero & !status & below == 0
    }

    #[inline]
    fn step(&self, status: u32) -> u32 {
        (status >> 1) | ((self.fires(status) as u32) << (self.p - 1))
    }
}

/// Whether column `i` fires, given the packed status at `i`.
pub fn fired_at(s: &SlopeConfig, i: usize, status: u32) -> bool {
    Window::at(s, i).fires(status)
}

/// Status at `p + 1`: the fired flags of columns `1..=p`.
///
/// Column 1 fires iff `s_1 = p`. Columns `2..=p` cannot be peaks, so they
/// fire only in the descent from a peak at `p + 1`, which stops at the first
/// zero slope.
pub fn seed_status(s: &SlopeConfig) -> Result<Status> {
    if !s.in_gsm() {
        return Err(SandpileError::NotInGsm);
    }
    let p = s.p();
    let pu = p as usize;
    if s.len() < pu + 1 {
        return Err(SandpileError::ConfigTooShort { len: s.len(), p });
    }
    let mut bits = 0u32;
    if s.slope(1) == p as i32 {
        bits |= 1;
        if s.slope(pu + 1) == p as i32 {
            for c in (2..=pu).rev() {
                if s.slope(c) < 1 {
                    break;
                }
                bits |= 1 << (c - 1);
            }
        }
    }
    Ok(Status::new(bits, pu + 1, p))
}

/// Lazily yields the status at every position `p+1..=m+1`.
pub struct StatusScan<'a> {
    s: &'a SlopeConfig,
    window: Window,
    bits: u32,
    position: usize,
}

impl<'a> StatusScan<'a> {
    pub fn new(s: &'a SlopeConfig) -> Result<Self> {
        check_cap(s.p())?;
        let seed = seed_status(s)?;
        Ok(StatusScan {
            s,
            window: Window::at(s, seed.position()),
            bits: seed.bits(),
            position: seed.position(),
        })
    }
}

impl Iterator for StatusScan<'_> {
    type Item = Status;

    fn next(&mut self) -> Option<Status> {
        let m = self.s.len();
        if self.position > m + 1 {
            return None;
        }
        let out = Status::new(self.bits, self.position, self.s.p());
        if self.position <= m {
            self.bits = self.window.step(self.bits);
            self.window.advance(self.s, self.position);
        }
        self.position += 1;
        Some(out)
    }
}

/// A total map from statuses at `from` to statuses at `to`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransferFunction {
    p: u32,
    from: usize,
    to: usize,
    table: Vec<u16>,
}

impl TransferFunction {
    pub fn identity(p: u32, at: usize) -> Result<Self> {
        check_cap(p)?;
        let table = (0..1u32 << p).map(|b| b as u16).collect();
        Ok(TransferFunction {
            p,
            from: at,
            to: at,
            table,
        })
    }

    /// Builds a table directly from its entries.
    pub fn from_table(p: u32, from: usize, to: usize, table: Vec<u16>) -> Result<Self> {
        check_cap(p)?;
        if table.len() != 1 << p || table.iter().any(|&v| (v as u32) >> p != 0) {
            return Err(SandpileError::InvalidInput(format!(
                "a table for p = {p} needs {} entries below {}",
                1u32 << p,
                1u32 << p
            )));
        }
        Ok(TransferFunction {
            p,
            from,
            to,
            table,
        })
    }

    /// The map across `[from, to)`, computed by threading every status
    /// through the positions. Statuses that coincide are merged so that
    /// long ranges cost roughly one pass per distinct live status.
    pub fn over_range(s: &SlopeConfig, from: usize, to: usize) -> Result<Self> {
        let p = s.p();
        check_cap(p)?;
        let lo = p as usize + 1;
        let hi = s.len() + 1;
        for pos in [from, to] {
            if pos < lo || pos > hi {
                return Err(SandpileError::PositionOutOfRange { position: pos, lo, hi });
            }
        }
        if from > to {
            return Err(SandpileError::PositionOutOfRange {
                position: to,
                lo: from,
                hi,
            });
        }
        let n = 1usize << p;
        let mut reps: Vec<u32> = (0..n as u32).collect();
        let mut owner: Vec<u32> = (0..n as u32).collect();
        let mut slot = vec![u32::MAX; n];
        let mut window = Window::at(s, from);
        for (step, i) in (from..to).enumerate() {
            for r in reps.iter_mut() {
                *r = window.step(*r);
            }
            window.advance(s, i);
            if reps.len() > 1 && (step + 1) % DEDUP_EVERY == 0 {
                merge_equal(&mut reps, &mut owner, &mut slot);
            }
        }
        let table = owner.iter().map(|&o| reps[o as usize] as u16).collect();
        Ok(TransferFunction {
            p,
            from,
            to,
            table,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Half-open position interval `[from, to)`.
    pub fn span(&self) -> (usize, usize) {
        (self.from, self.to)
    }

    pub fn table(&self) -> &[u16] {
        &self.table
    }

    #[inline]
    pub fn apply(&self, status: u32) -> u32 {
        self.table[status as usize] as u32
    }

    /// Applies the map to a status anchored at `from`.
    pub fn apply_status(&self, status: &Status) -> Result<Status> {
        if status.position() != self.from {
            return Err(SandpileError::SpanMismatch {
                inner_end: status.position(),
                outer_start: self.from,
            });
        }
        Ok(Status::new(self.apply(status.bits()), self.to, self.p))
    }

    /// `self` after `inner`: `table[b] = self[inner[b]]`.
    pub fn after(&self, inner: &TransferFunction) -> Result<TransferFunction> {
        compose(self, inner)
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "status at {} -> status at {}", self.from, self.to)?;
        for (b, &v) in self.table.iter().enumerate() {
            let from = Status::new(b as u32, self.from, self.p);
            let to = Status::new(v as u32, self.to, self.p);
            writeln!(f, "  {from} -> {to}")?;
        }
        Ok(())
    }
}

fn merge_equal(reps: &mut Vec<u32>, owner: &mut [u32], slot: &mut [u32]) {
    let mut remap = Vec::with_capacity(reps.len());
    let mut kept = Vec::with_capacity(reps.len());
    for &r in reps.iter() {
        let idx = &mut slot[r as usize];
        if *idx == u32::MAX {
            *idx = kept.len() as u32;
            kept.push(r);
        }
        remap.push(*idx);
    }
    for &r in &kept {
        slot[r as usize] = u32::MAX;
    }
    if kept.len() < reps.len() {
        for o in owner.iter_mut() {
            *o = remap[*o as usize];
        }
        *reps = kept;
    }
}

/// The per-position map from the status at `i` to the status at `i + 1`.
pub fn build_transfer(s: &SlopeConfig, i: usize) -> Result<TransferFunction> {
    let p = s.p();
    check_cap(p)?;
    let lo = p as usize + 1;
    if i < lo || i > s.len() {
        return Err(SandpileError::PositionOutOfRange {
            position: i,
            lo,
            hi: s.len(),
        });
    }
    let window = Window::at(s, i);
    let table = (0..1u32 << p).map(|b| window.step(b) as u16).collect();
    Ok(TransferFunction {
        p,
        from: i,
        to: i + 1,
        table,
    })
}

/// `g` after `f`. Requires `f` to end where `g` starts.
pub fn compose(g: &TransferFunction, f: &TransferFunction) -> Result<TransferFunction> {
    if f.to != g.from || f.p != g.p {
        return Err(SandpileError::SpanMismatch {
            inner_end: f.to,
            outer_start: g.from,
        });
    }
    let table = f.table.iter().map(|&b| g.table[b as usize]).collect();
    Ok(TransferFunction {
        p: f.p,
        from: f.from,
        to: g.to,
        table,
    })
}

/// Left-to-right fold of [`compose`] over every per-position table. This is
/// the reference that [`reduce_range`] must reproduce.
pub fn sequential_fold(s: &SlopeConfig) -> Result<TransferFunction> {
    let start = s.p() as usize + 1;
    if s.len() < start {
        return Err(SandpileError::ConfigTooShort {
            len: s.len(),
            p: s.p(),
        });
    }
    (start..=s.len()).try_fold(TransferFunction::identity(s.p(), start)?, |acc, i| {
        compose(&build_transfer(s, i)?, &acc)
    })
}

fn pool(workers: usize) -> Result<Arc<rayon::ThreadPool>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some(p) = pools.get(&workers) {
        return Ok(p.clone());
    }
    let built = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("ap-reduce-{i}"))
        .build()
        .map_err(|e| SandpileError::InvalidInput(format!("thread pool: {e}")))?;
    let built = Arc::new(built);
    pools.insert(workers, built.clone());
    Ok(built)
}

fn reduce_span(
    s: &SlopeConfig,
    from: usize,
    to: usize,
    grain: usize,
    parallel: bool,
) -> Result<TransferFunction> {
    if to - from <= grain {
        return TransferFunction::over_range(s, from, to);
    }
    let mid = from + (to - from) / 2;
    let (left, right) = if parallel {
        rayon::join(
            || reduce_span(s, from, mid, grain, true),
            || reduce_span(s, mid, to, grain, true),
        )
    } else {
        (
            reduce_span(s, from, mid, grain, false),
            reduce_span(s, mid, to, grain, false),
        )
    };
    compose(&right?, &left?)
}

fn default_grain(len: usize, workers: usize) -> usize {
    len.div_ceil(workers * 4).max(MIN_GRAIN)
}

/// The map `mu` from the status at `p+1` to the status at `m+1`, computed as
/// a balanced tree of compositions on `workers` threads.
pub fn reduce_range(s: &SlopeConfig, workers: usize) -> Result<TransferFunction> {
    let len = s.len().saturating_sub(s.p() as usize);
    reduce_range_with_grain(s, workers, default_grain(len, workers.max(1)))
}

/// [`reduce_range`] with an explicit leaf size, in positions.
pub fn reduce_range_with_grain(
    s: &SlopeConfig,
    workers: usize,
    grain: usize,
) -> Result<TransferFunction> {
    let p = s.p();
    check_cap(p)?;
    if workers == 0 || grain == 0 {
        return Err(SandpileError::InvalidInput(
            "workers and grain must be at least 1".into(),
        ));
    }
    let from = p as usize + 1;
    let to = s.len() + 1;
    if s.len() < from {
        return Err(SandpileError::ConfigTooShort { len: s.len(), p });
    }
    if workers == 1 {
        return reduce_span(s, from, to, grain, false);
    }
    pool(workers)?.install(|| reduce_span(s, from, to, grain, true))
}

fn uses_scan(s: &SlopeConfig) -> bool {
    s.len() > s.p() as usize
}

/// Status at `m+1` via the linear scan, or via the avalanche for configs too
/// short to seed.
pub fn final_status_linear(s: &SlopeConfig) -> Result<Status> {
    if !uses_scan(s) {
        return final_status_naive(s);
    }
    Ok(StatusScan::new(s)?.last().expect("scan yields at least one status"))
}

pub fn final_status_parallel(s: &SlopeConfig, workers: usize) -> Result<Status> {
    if !uses_scan(s) {
        return final_status_naive(s);
    }
    let seed = seed_status(s)?;
    reduce_range(s, workers)?.apply_status(&seed)
}

pub fn final_status_naive(s: &SlopeConfig) -> Result<Status> {
    let av = compute_avalanche(s)?;
    Ok(status_at(&av, s.len() + 1))
}

/// Single left-to-right status scan, `O(m)` time.
pub fn decide_linear(inst: &ApInstance) -> Result<bool> {
    Ok(final_status_linear(inst.config())?.bit(inst.kappa() as u32 - 1))
}

/// Seed status, tree-reduced transfer map, answer bit `kappa - 1`.
pub fn decide_parallel(inst: &ApInstance, workers: usize) -> Result<bool> {
    Ok(final_status_parallel(inst.config(), workers)?.bit(inst.kappa() as u32 - 1))
}

/// Lemma-style window step: from the slopes `s_i..s_{j-1}` (in `part`) and
/// the status at `i`, finds the fired flags of columns `i..=j-p` and the
/// status at `j-p+1`. Works peak by peak: the next peak at or after `k` is
/// the smallest `l` in `[k, k+p)` with `s_l = p` and `l-p` fired; the
/// columns it brings down follow by descent.
pub fn window_advance(
    p: u32,
    i: usize,
    part: &[i32],
    status: &Status,
) -> Result<(Vec<bool>, Status)> {
    let pu = p as usize;
    let j = i + part.len();
    if j <= i + pu {
        return Err(SandpileError::WindowTooNarrow { i, j, p });
    }
    if i <= pu {
        return Err(SandpileError::PositionOutOfRange {
            position: i,
            lo: pu + 1,
            hi: usize::MAX,
        });
    }
    if status.position() != i || status.width() != p {
        return Err(SandpileError::SpanMismatch {
            inner_end: status.position(),
            outer_start: i,
        });
    }
    // flags[c - (i - p)] for columns i-p .. j-1
    let base = i - pu;
    let mut flags = vec![false; j - base];
    for jj in 0..pu {
        flags[jj] = status.bit(jj as u32);
    }
    let slope = |c: usize| part[c - i];
    let last = j - pu;
    let mut k = i;
    while k <= last {
        let Some(q) = (k..k + pu).find(|&l| slope(l) == p as i32 && flags[l - pu - base]) else {
            break;
        };
        flags[q - base] = true;
        let mut c = q;
        while c > k {
            c -= 1;
            if slope(c) >= 1 || flags[c - pu - base] {
                flags[c - base] = true;
            } else {
                break;
            }
        }
        k = q + 1;
    }
    let fired: Vec<bool> = flags[i - base..=last - base].to_vec();
    let bits = (0..p).fold(0u32, |acc, jj| {
        acc | ((flags[last + 1 - pu + jj as usize - base] as u32) << jj)
    });
    Ok((fired, Status::new(bits, last + 1, p)))
}

/// Slopes `s_i..s_{j-1}` of `s`, zero past `m`.
pub fn window_of(s: &SlopeConfig, i: usize, j: usize) -> Vec<i32> {
    (i..j).map(|c| slope_in(s, c)).collect()
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Linear,
    Parallel,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Linear => "linear",
            Method::Parallel => "parallel",
        })
    }
}

/// A decider result, serialized as the JSON record of the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub answer: bool,
    pub method: Method,
    pub k: usize,
    /// Fired flags of columns `m-p+1..=m`.
    pub fired_right_boundary: Vec<u8>,
    pub elapsed_ns: u64,
}

pub fn decide(inst: &ApInstance, method: Method, workers: usize) -> Result<Decision> {
    let start = Instant::now();
    let status = match method {
        Method::Naive => final_status_naive(inst.config())?,
        Method::Linear => final_status_linear(inst.config())?,
        Method::Parallel => final_status_parallel(inst.config(), workers)?,
    };
    let elapsed_ns = start.elapsed().as_nanos().max(1) as u64;
    let answer = status.bit(inst.kappa() as u32 - 1);
    Ok(Decision {
        answer,
        method,
        k: inst.k(),
        fired_right_boundary: status.tuple(),
        elapsed_ns,
    })
}
