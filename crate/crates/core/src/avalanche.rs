//! The canonical avalanche: the leftmost-first stabilization of `s^+`.
//!
//! Besides computing it, this module classifies firings as peaks or cols,
//! reads statuses (windows of fired flags) out of it, checks the structural
//! properties every avalanche satisfies, and answers the avalanche problem by
//! brute force. Everything in `ncdecider` is tested against this module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{FiringStrategy, SlopeConfig};
use crate::error::{Result, SandpileError};
use crate::ncdecider::ApInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiringKind {
    /// Strictly right of every earlier firing.
    Peak,
    /// Immediate left neighbour of the previous firing.
    Col,
}

impl fmt::Display for FiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiringKind::Peak => "peak",
            FiringKind::Col => "col",
        })
    }
}

/// Set of fired columns, indexed 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FiredSet {
    flags: Vec<bool>,
}

impl FiredSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_columns<I: IntoIterator<Item = usize>>(cols: I) -> Self {
        let mut set = FiredSet::new();
        for c in cols {
            set.insert(c);
        }
        set
    }

    pub fn insert(&mut self, col: usize) {
        assert!(col >= 1, "columns are 1-based");
        if self.flags.len() <= col {
            self.flags.resize(col + 1, false);
        }
        self.flags[col] = true;
    }

    pub fn remove(&mut self, col: usize) {
        if let Some(f) = self.flags.get_mut(col) {
            *f = false;
        }
    }

    /// Columns `<= 0` are never fired.
    #[inline]
    pub fn contains(&self, col: i64) -> bool {
        col >= 1 && self.flags.get(col as usize).copied().unwrap_or(false)
    }

    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(c, _)| c)
    }

    pub fn len(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fired flags of the `p` columns `position-p .. position-1`, packed with the
/// leftmost column in bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Status {
    bits: u32,
    position: usize,
    width: u32,
}

impl Status {
    pub fn new(bits: u32, position: usize, width: u32) -> Self {
        debug_assert!(width >= 1 && width <= 31);
        debug_assert!(bits < (1 << width));
        Status {
            bits,
            position,
            width,
        }
    }

    pub fn dead(position: usize, width: u32) -> Self {
        Status::new(0, position, width)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `b_j`: whether column `position - p + j` fired.
    pub fn bit(&self, j: u32) -> bool {
        self.bits >> j & 1 == 1
    }

    pub fn is_dead(&self) -> bool {
        self.bits == 0
    }

    /// `(b_0, ..., b_{p-1})`.
    pub fn tuple(&self) -> Vec<u8> {
        (0..self.width).map(|j| self.bit(j) as u8).collect()
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for j in 0..self.width {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", self.bit(j) as u8)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Avalanche {
    /// The gSM configuration before the grain was added.
    pub initial: SlopeConfig,
    pub firings: Vec<usize>,
    pub kinds: Vec<FiringKind>,
    pub fired: FiredSet,
    /// Stable configuration after the avalanche, overflow slots included.
    pub final_config: SlopeConfig,
}

impl Avalanche {
    pub fn p(&self) -> u32 {
        self.initial.p()
    }

    pub fn is_empty(&self) -> bool {
        self.firings.is_empty()
    }

    pub fn peaks(&self) -> impl Iterator<Item = usize> + '_ {
        self.firings
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == FiringKind::Peak)
            .map(|(&c, _)| c)
    }

    /// One record per firing, optionally carrying the slopes after it.
    pub fn trace(&self, with_slopes: bool) -> Vec<TraceRecord> {
        let mut cur = self.initial.add_grain().ok();
        self.firings
            .iter()
            .zip(&self.kinds)
            .enumerate()
            .map(|(idx, (&column, &kind))| {
                let slopes_after = if with_slopes {
                    let c = cur.as_mut().expect("non-empty avalanche has s^+");
                    c.fire_in_place(column).expect("replaying a valid avalanche");
                    Some(c.slots().to_vec())
                } else {
                    None
                };
                TraceRecord {
                    step: idx + 1,
                    column,
                    kind,
                    slopes_after,
                }
            })
            .collect()
    }
}

/// One line of the JSON-lines avalanche trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub column: usize,
    pub kind: FiringKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slopes_after: Option<Vec<i32>>,
}

/// The lexicographically minimal avalanche strategy for `s`.
pub fn compute_avalanche(s: &SlopeConfig) -> Result<Avalanche> {
    if !s.in_gsm() {
        return Err(SandpileError::NotInGsm);
    }
    let (final_config, firings) = s.add_grain()?.stabilize(&FiringStrategy::Leftmost)?;
    let kinds = classify(&firings)?;
    let fired = FiredSet::from_columns(firings.iter().copied());
    Ok(Avalanche {
        initial: s.clone(),
        firings,
        kinds,
        fired,
        final_config,
    })
}

/// Tags each firing as a peak or a col. The maximum of the empty prefix is 0.
pub fn classify(firings: &[usize]) -> Result<Vec<FiringKind>> {
    let mut max_so_far = 0;
    let mut prev: Option<usize> = None;
    let mut kinds = Vec::with_capacity(firings.len());
    for (index, &a) in firings.iter().enumerate() {
        let kind = if a > max_so_far {
            FiringKind::Peak
        } else if prev.is_some_and(|b| b >= 1 && a == b - 1) {
            FiringKind::Col
        } else {
            return Err(SandpileError::StructureViolation { index, column: a });
        };
        kinds.push(kind);
        max_so_far = max_so_far.max(a);
        prev = Some(a);
    }
    Ok(kinds)
}

/// Status of the avalanche at column `i`. Virtual columns `<= 0` read as
/// unfired, so this is also defined for `i <= p`.
pub fn status_at(av: &Avalanche, i: usize) -> Status {
    let p = av.p();
    let bits = (0..p).fold(0u32, |acc, j| {
        let col = i as i64 - p as i64 + j as i64;
        acc | ((av.fired.contains(col) as u32) << j)
    });
    Status::new(bits, i, p)
}

/// Brute-force answer: does the avalanche raise the slope at column `k`,
/// i.e. does column `k - p` fire?
pub fn decide_naive(inst: &ApInstance) -> Result<bool> {
    let av = compute_avalanche(inst.config())?;
    Ok(av.fired.contains(inst.k() as i64 - inst.config().p() as i64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalityViolation {
    /// A peak whose initial slope is not `p`.
    SlopeNotP { peak: usize, slope: i32 },
    /// A peak further than `p` from the previous peak.
    PeakTooFar { peak: usize, previous: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalityReport {
    pub peaks_checked: usize,
    pub violations: Vec<LocalityViolation>,
}

impl LocalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every peak `q > 1` has `s_q = p` and a previous peak within distance `p`.
/// Only this direction holds; columns with slope `p` need not be peaks.
pub fn check_peak_locality(av: &Avalanche, s: &SlopeConfig) -> LocalityReport {
    let p = s.p() as usize;
    let mut report = LocalityReport::default();
    let mut previous: Option<usize> = None;
    for q in av.peaks() {
        if q > 1 {
            report.peaks_checked += 1;
            let slope = s.slope(q);
            if slope != p as i32 {
                report
                    .violations
                    .push(LocalityViolation::SlopeNotP { peak: q, slope });
            }
            match previous {
                Some(prev) if q - prev <= p => {}
                Some(prev) => report
                    .violations
                    .push(LocalityViolation::PeakTooFar { peak: q, previous: prev }),
                None => report
                    .violations
                    .push(LocalityViolation::PeakTooFar { peak: q, previous: 0 }),
            }
        }
        previous = Some(q);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointViolation {
    pub column: usize,
    /// Whether the column should fire given the rest of the set.
    pub expected: bool,
    pub got: bool,
}

/// Columns `i` in `1..=m` where membership in `fired` disagrees with
/// `s_i + [i=1] + p[i+1 fired] + [i-p fired] > p`.
pub fn fixed_point_violations(s: &SlopeConfig, fired: &FiredSet) -> Vec<FixedPointViolation> {
    let p = s.p() as i64;
    (1..=s.len())
        .filter_map(|i| {
            let c = i as i64;
            let received = s.slope(i) as i64
                + (i == 1) as i64
                + p * fired.contains(c + 1) as i64
                + fired.contains(c - p) as i64;
            let expected = received > p;
            let got = fired.contains(c);
            (expected != got).then_some(FixedPointViolation {
                column: i,
                expected,
                got,
            })
        })
        .collect()
}

pub fn check_fired_fixed_point(s: &SlopeConfig, fired: &FiredSet) -> bool {
    fixed_point_violations(s, fired).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LemmaViolation {
    FiredTwice { column: usize },
    FirstNotColumnOne { column: usize },
    NeitherPeakNorCol { index: usize, column: usize },
    Locality(LocalityViolation),
    FixedPoint(FixedPointViolation),
}

impl fmt::Display for LemmaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LemmaViolation::FiredTwice { column } => write!(f, "column {column} fired twice"),
            LemmaViolation::FirstNotColumnOne { column } => {
                write!(f, "first firing is column {column}, not 1")
            }
            LemmaViolation::NeitherPeakNorCol { index, column } => {
                write!(f, "firing #{index} (column {column}) is neither peak nor col")
            }
            LemmaViolation::Locality(LocalityViolation::SlopeNotP { peak, slope }) => {
                write!(f, "peak {peak} has initial slope {slope}")
            }
            LemmaViolation::Locality(LocalityViolation::PeakTooFar { peak, previous }) => {
                write!(f, "peak {peak} is too far from previous peak {previous}")
            }
            LemmaViolation::FixedPoint(v) => write!(
                f,
                "fixed point broken at column {}: expected {}, got {}",
                v.column, v.expected, v.got
            ),
        }
    }
}

/// Runs every structural check on an avalanche of `s`.
pub fn check_lemmas(av: &Avalanche, s: &SlopeConfig) -> Vec<LemmaViolation> {
    let mut out = Vec::new();
    let mut seen = FiredSet::new();
    for &c in &av.firings {
        if seen.contains(c as i64) {
            out.push(LemmaViolation::FiredTwice { column: c });
        }
        seen.insert(c);
    }
    if let Some(&first) = av.firings.first() {
        if first != 1 {
            out.push(LemmaViolation::FirstNotColumnOne { column: first });
        }
    }
    if let Err(SandpileError::StructureViolation { index, column }) = classify(&av.firings) {
        out.push(LemmaViolation::NeitherPeakNorCol { index, column });
    }
    out.extend(
        check_peak_locality(av, s)
            .violations
            .into_iter()
            .map(LemmaViolation::Locality),
    );
    out.extend(
        fixed_point_violations(s, &av.fired)
            .into_iter()
            .map(LemmaViolation::FixedPoint),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: u32, s: &[i32]) -> SlopeConfig {
        SlopeConfig::new(p, s.to_vec()).unwrap()
    }

    fn e2() -> SlopeConfig {
        cfg(3, &[3, 0, 2, 3, 1, 3, 1])
    }

    #[test]
    fn avalanche_examples() {
        let av = compute_avalanche(&e2()).unwrap();
        assert_eq!(av.firings, vec![1, 4, 3, 6, 5]);
        assert!(compute_avalanche(&cfg(2, &[1, 2, 2])).unwrap().is_empty());
        let av = compute_avalanche(&cfg(2, &[2, 2, 2, 2, 2])).unwrap();
        assert_eq!(av.firings, vec![1, 3, 2, 4, 5]);
    }

    #[test]
    fn avalanche_rejects_outside_gsm() {
        assert_eq!(
            compute_avalanche(&cfg(2, &[3, 0])),
            Err(SandpileError::NotInGsm)
        );
        assert_eq!(
            compute_avalanche(&cfg(2, &[1, -1])),
            Err(SandpileError::NotInGsm)
        );
    }

    #[test]
    fn classify_examples() {
        use FiringKind::*;
        assert_eq!(
            classify(&[1, 4, 3, 6, 5]).unwrap(),
            vec![Peak, Peak, Col, Peak, Col]
        );
        assert_eq!(classify(&[1]).unwrap(), vec![Peak]);
        assert_eq!(
            classify(&[1, 3, 2, 4, 5]).unwrap(),
            vec![Peak, Peak, Col, Peak, Peak]
        );
        assert!(classify(&[]).unwrap().is_empty());
        assert_eq!(
            classify(&[1, 4, 2]),
            Err(SandpileError::StructureViolation { index: 2, column: 2 })
        );
    }

    #[test]
    fn status_examples() {
        let av = compute_avalanche(&e2()).unwrap();
        let st = status_at(&av, 8);
        assert_eq!(st.tuple(), vec![1, 1, 0]);
        assert_eq!(st.to_string(), "(1,1,0)");

        let empty = compute_avalanche(&cfg(2, &[1, 2, 2])).unwrap();
        assert!(status_at(&empty, 3).is_dead());

        // Small indices read virtual columns as unfired.
        assert_eq!(status_at(&av, 2).tuple(), vec![0, 0, 1]);
    }

    #[test]
    fn status_format_for_width_four() {
        // The p = 4 figure reports (0,1,0,1) at column 8: columns 5 and 7 fired.
        let st = Status::new(0b1010, 8, 4);
        assert_eq!(st.to_string(), "(0,1,0,1)");
    }

    #[test]
    fn naive_decider_examples() {
        let e1 = cfg(2, &[2, 0, 2, 1, 1, 2, 1, 0, 2]);
        for k in [10, 11] {
            assert!(!decide_naive(&ApInstance::new(e1.clone(), k).unwrap()).unwrap());
        }
        let expected = [(8, true), (9, true), (10, false)];
        for (k, ans) in expected {
            assert_eq!(decide_naive(&ApInstance::new(e2(), k).unwrap()).unwrap(), ans);
        }
        let e3 = cfg(2, &[2, 0, 2, 2, 1, 2, 2]);
        assert!(!decide_naive(&ApInstance::new(e3, 8).unwrap()).unwrap());
    }

    #[test]
    fn peak_locality_examples() {
        let av = compute_avalanche(&e2()).unwrap();
        let report = check_peak_locality(&av, &e2());
        assert_eq!(av.peaks().collect::<Vec<_>>(), vec![1, 4, 6]);
        assert_eq!(report.peaks_checked, 2);
        assert!(report.passed());

        let empty = compute_avalanche(&cfg(2, &[1, 2])).unwrap();
        assert!(check_peak_locality(&empty, &cfg(2, &[1, 2])).passed());

        // Slope p without being a peak is fine.
        let e3 = cfg(2, &[2, 0, 2, 2, 1, 2, 2]);
        let av = compute_avalanche(&e3).unwrap();
        assert!(check_peak_locality(&av, &e3).passed());
        assert!(!av.fired.contains(6) && e3.slope(6) == 2);
    }

    #[test]
    fn peak_locality_reports_violations() {
        let s = cfg(2, &[2, 1, 0, 0, 2]);
        let fake = Avalanche {
            initial: s.clone(),
            firings: vec![1, 5],
            kinds: vec![FiringKind::Peak, FiringKind::Peak],
            fired: FiredSet::from_columns([1, 5]),
            final_config: s.clone(),
        };
        let r = check_peak_locality(&fake, &s);
        assert_eq!(
            r.violations,
            vec![LocalityViolation::PeakTooFar { peak: 5, previous: 1 }]
        );
    }

    #[test]
    fn fixed_point_examples() {
        let s = e2();
        let fired = FiredSet::from_columns([1, 3, 4, 5, 6]);
        assert!(check_fired_fixed_point(&s, &fired));
        // i = 4: 3 + 0 + 3*1 + 1 = 7 > 3; i = 7: 1 + 0 + 0 + 1 = 2 <= 3.
        let mut wrong = fired.clone();
        wrong.insert(7);
        assert_eq!(
            fixed_point_violations(&s, &wrong),
            vec![FixedPointViolation {
                column: 7,
                expected: false,
                got: true
            }]
        );
        assert!(check_fired_fixed_point(&cfg(2, &[1, 2, 0]), &FiredSet::new()));
    }

    #[test]
    fn trace_replays_slopes() {
        let av = compute_avalanche(&cfg(2, &[2, 0, 2, 2, 1, 2, 2])).unwrap();
        let t = av.trace(true);
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].slopes_after.as_deref(), Some(&[0, 2, 0, 2, 2, 2, 2, 0, 0][..]));
        let json = serde_json::to_string(&av.trace(false)[0]).unwrap();
        assert_eq!(json, r#"{"step":1,"column":1,"kind":"peak"}"#);
    }

    #[test]
    fn lemma_checks_pass_on_examples() {
        for s in [e2(), cfg(2, &[2, 2, 2, 2, 2]), cfg(1, &[1, 0, 1, 1])] {
            let av = compute_avalanche(&s).unwrap();
            assert!(check_lemmas(&av, &s).is_empty());
        }
    }
}
