//! Sandpile configurations in slope and height form, the toppling rule and
//! stabilization under different firing strategies.
//!
//! Columns are 1-based. A [`SlopeConfig`] of length `m` stores its slopes
//! `s_1..s_m` followed by `p` overflow slots `s_{m+1}..s_{m+p}`. Overflow slots
//! receive the `+1` of firings near the right edge but are never fired
//! themselves. Updates that would land on an index below 1 are dropped.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SandpileError};

/// A one-dimensional Kadanoff sandpile in slope form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlopeConfig {
    p: u32,
    len: usize,
    slots: Vec<i32>,
}

impl SlopeConfig {
    /// Builds a configuration with zeroed overflow slots.
    pub fn new(p: u32, slopes: Vec<i32>) -> Result<Self> {
        if p == 0 {
            return Err(SandpileError::InvalidParameter(0));
        }
        let len = slopes.len();
        let mut slots = slopes;
        slots.resize(len + p as usize, 0);
        Ok(SlopeConfig { p, len, slots })
    }

    /// Builds a configuration from all `m + p` slots, overflow included.
    pub fn with_overflow(p: u32, slots: Vec<i32>) -> Result<Self> {
        if p == 0 {
            return Err(SandpileError::InvalidParameter(0));
        }
        if slots.len() < p as usize {
            return Err(SandpileError::InvalidInput(format!(
                "{} slots cannot hold {p} overflow slots",
                slots.len()
            )));
        }
        let len = slots.len() - p as usize;
        Ok(SlopeConfig { p, len, slots })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Number of slopes `m = |s|`, overflow excluded.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The slopes `s_1..s_m`.
    pub fn slopes(&self) -> &[i32] {
        &self.slots[..self.len]
    }

    /// The overflow slots `s_{m+1}..s_{m+p}`.
    pub fn overflow(&self) -> &[i32] {
        &self.slots[self.len..]
    }

    /// All `m + p` stored slots.
    pub fn slots(&self) -> &[i32] {
        &self.slots
    }

    /// Slope at 1-based index `i`; zero outside `1..=m+p`.
    #[inline]
    pub fn slope(&self, i: usize) -> i32 {
        if i == 0 {
            0
        } else {
            self.slots.get(i - 1).copied().unwrap_or(0)
        }
    }

    pub fn is_stable(&self) -> bool {
        let p = self.p as i32;
        self.slopes().iter().all(|&s| s <= p)
    }

    pub fn is_monotone(&self) -> bool {
        self.slopes().iter().all(|&s| s >= 0)
    }

    /// Stable and monotone: the domain of the avalanche problem.
    pub fn in_gsm(&self) -> bool {
        self.is_stable() && self.is_monotone()
    }

    #[inline]
    fn is_unstable_at(&self, i: usize) -> bool {
        i >= 1 && i <= self.len && self.slots[i - 1] > self.p as i32
    }

    /// Applies the toppling rule at column `i` and returns the new configuration.
    pub fn fire(&self, i: usize) -> Result<SlopeConfig> {
        let mut next = self.clone();
        next.fire_in_place(i)?;
        Ok(next)
    }

    /// In-place form of [`fire`](Self::fire).
    pub fn fire_in_place(&mut self, i: usize) -> Result<()> {
        if i == 0 || i > self.len {
            return Err(SandpileError::IndexOutOfRange {
                column: i,
                len: self.len,
            });
        }
        let p = self.p as i32;
        let slope = self.slots[i - 1];
        if slope <= p {
            return Err(SandpileError::FiringStableColumn {
                column: i,
                slope,
                p: self.p,
            });
        }
        if i > 1 {
            self.slots[i - 2] += p;
        }
        self.slots[i - 1] -= p + 1;
        // i + p <= m + p always lands inside the slot array.
        self.slots[i + self.p as usize - 1] += 1;
        Ok(())
    }

    /// The configuration `s^+`: one grain added on column 1.
    pub fn add_grain(&self) -> Result<SlopeConfig> {
        if self.is_empty() {
            return Err(SandpileError::InvalidInput(
                "cannot add a grain to an empty configuration".into(),
            ));
        }
        let mut next = self.clone();
        next.slots[0] += 1;
        Ok(next)
    }

    /// Ascending list of columns in `1..=m` whose slope exceeds `p`.
    pub fn unstable_columns(&self) -> Vec<usize> {
        (1..=self.len).filter(|&i| self.is_unstable_at(i)).collect()
    }

    /// Position-weighted grain count `sum_j j * s_j` over all slots. With
    /// heights anchored to zero past the last slot this is the total number
    /// of grains, and it is invariant under [`fire`](Self::fire).
    pub fn grain_count(&self) -> i64 {
        self.slots
            .iter()
            .enumerate()
            .map(|(idx, &s)| (idx as i64 + 1) * s as i64)
            .sum()
    }

    fn firing_bound(&self) -> usize {
        let m = self.len;
        let reach = (m + self.p as usize) as u128;
        let weight: u128 = self
            .slots
            .iter()
            .enumerate()
            .map(|(idx, &s)| (idx as u128 + 1) * s.unsigned_abs() as u128)
            .sum();
        let displacement = weight * reach / self.p as u128 + 1;
        let quadratic = (m as u128) * (m as u128 + 1);
        displacement.max(quadratic).min(usize::MAX as u128) as usize
    }

    /// Fires unstable columns according to `strategy` until the configuration
    /// is stable. Returns the stable configuration and the firing sequence.
    pub fn stabilize(&self, strategy: &FiringStrategy) -> Result<(SlopeConfig, Vec<usize>)> {
        let mut cur = self.clone();
        let mut firings = Vec::new();
        let bound = self.firing_bound();

        if let FiringStrategy::Explicit(sequence) = strategy {
            for &col in sequence {
                if firings.len() >= bound {
                    return Err(SandpileError::InternalBoundExceeded { bound });
                }
                cur.fire_in_place(col)?;
                firings.push(col);
            }
            let remaining = cur.unstable_columns();
            if !remaining.is_empty() {
                return Err(SandpileError::IncompleteStrategy { remaining });
            }
            return Ok((cur, firings));
        }

        let mut unstable: BTreeSet<usize> = cur.unstable_columns().into_iter().collect();
        let mut rng = match strategy {
            FiringStrategy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        while !unstable.is_empty() {
            if firings.len() >= bound {
                return Err(SandpileError::InternalBoundExceeded { bound });
            }
            let col = match strategy {
                FiringStrategy::Leftmost => *unstable.first().unwrap(),
                FiringStrategy::Rightmost => *unstable.last().unwrap(),
                FiringStrategy::SeededRandom(_) => {
                    let rng = rng.as_mut().unwrap();
                    let pick = rng.gen_range(0..unstable.len());
                    *unstable.iter().nth(pick).unwrap()
                }
                FiringStrategy::Explicit(_) => unreachable!(),
            };
            cur.fire_in_place(col)?;
            firings.push(col);
            for touched in [col.saturating_sub(1), col, col + cur.p as usize] {
                if cur.is_unstable_at(touched) {
                    unstable.insert(touched);
                } else {
                    unstable.remove(&touched);
                }
            }
        }
        Ok((cur, firings))
    }

    /// Height form of the slopes `s_1..s_m`, anchored so the last column is 0.
    pub fn to_heights(&self) -> HeightConfig {
        slopes_to_heights(self)
    }
}

impl fmt::Display for SlopeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={} (", self.p)?;
        for (idx, s) in self.slopes().iter().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Column heights `h_1..h_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeightConfig {
    pub heights: Vec<i64>,
}

impl HeightConfig {
    pub fn new(heights: Vec<i64>) -> Self {
        HeightConfig { heights }
    }

    pub fn total_grains(&self) -> i64 {
        self.heights.iter().sum()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.heights.windows(2).all(|w| w[0] >= w[1])
    }
}

/// `s_i = h_i - h_{i+1}`. Non-monotone heights are accepted; check the result
/// with [`SlopeConfig::is_monotone`].
pub fn heights_to_slopes(h: &HeightConfig, p: u32) -> Result<SlopeConfig> {
    if h.heights.is_empty() {
        return Err(SandpileError::InvalidInput("empty height sequence".into()));
    }
    let slopes = h
        .heights
        .windows(2)
        .map(|w| {
            i32::try_from(w[0] - w[1]).map_err(|_| {
                SandpileError::InvalidInput(format!("slope {} does not fit in i32", w[0] - w[1]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SlopeConfig::new(p, slopes)
}

/// Inverse of [`heights_to_slopes`], anchored at `h_n = 0`. Overflow slots
/// are not part of the height form.
pub fn slopes_to_heights(s: &SlopeConfig) -> HeightConfig {
    let mut heights = vec![0i64; s.len() + 1];
    for i in (0..s.len()).rev() {
        heights[i] = heights[i + 1] + s.slopes()[i] as i64;
    }
    HeightConfig { heights }
}

/// Order in which unstable columns are fired during stabilization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiringStrategy {
    /// Always fire the leftmost unstable column. Produces the avalanche.
    Leftmost,
    Rightmost,
    /// Uniform choice among unstable columns, driven by ChaCha8 with this seed.
    SeededRandom(u64),
    /// Fire exactly these columns in order; the result must be stable.
    Explicit(Vec<usize>),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: u32, s: &[i32]) -> SlopeConfig {
        SlopeConfig::new(p, s.to_vec()).unwrap()
    }

    #[test]
    fn heights_to_slopes_examples() {
        let s = heights_to_slopes(&HeightConfig::new(vec![4, 2, 2, 0]), 2).unwrap();
        assert_eq!(s.slopes(), &[2, 0, 2]);
        assert_eq!(s.overflow(), &[0, 0]);

        let s = heights_to_slopes(&HeightConfig::new(vec![0]), 5).unwrap();
        assert!(s.is_empty());

        let s = heights_to_slopes(&HeightConfig::new(vec![9, 5, 5, 3, 2, 1]), 2).unwrap();
        assert_eq!(s.slopes(), &[4, 0, 2, 1, 1]);
        assert!(!s.is_stable());

        assert!(matches!(
            heights_to_slopes(&HeightConfig::new(vec![]), 2),
            Err(SandpileError::InvalidInput(_))
        ));
    }

    #[test]
    fn slopes_to_heights_examples() {
        assert_eq!(cfg(2, &[2, 0, 2]).to_heights().heights, vec![4, 2, 2, 0]);
        assert_eq!(cfg(2, &[]).to_heights().heights, vec![0]);
        // Suffix sums computed by hand from the right: 1, 1+3, 4+1, 5+3, 8+2, 10+0, 10+3.
        let h = cfg(3, &[3, 0, 2, 3, 1, 3, 1]).to_heights();
        assert_eq!(h.heights, vec![13, 10, 10, 8, 5, 4, 1, 0]);
        assert_eq!(
            heights_to_slopes(&h, 3).unwrap(),
            cfg(3, &[3, 0, 2, 3, 1, 3, 1])
        );
    }

    #[test]
    fn predicates() {
        let e1 = cfg(2, &[2, 0, 2, 1, 1, 2, 1, 0, 2]);
        assert!(e1.is_stable() && e1.is_monotone() && e1.in_gsm());
        assert!(!cfg(2, &[3, 0, 2, 1]).is_stable());
        assert!(!cfg(2, &[1, -1]).is_monotone());
        assert!(!cfg(2, &[1, -1]).in_gsm());
    }

    #[test]
    fn zero_p_rejected() {
        assert_eq!(SlopeConfig::new(0, vec![1]), Err(SandpileError::InvalidParameter(0)));
    }

    #[test]
    fn fire_examples() {
        let s = cfg(2, &[3, 0, 2, 1, 1, 2, 1, 0, 2]).fire(1).unwrap();
        assert_eq!(s.slopes(), &[0, 0, 3, 1, 1, 2, 1, 0, 2]);
        let s = s.fire(3).unwrap();
        assert_eq!(s.slopes(), &[0, 2, 0, 1, 2, 2, 1, 0, 2]);

        let s = cfg(3, &[4, 0, 2, 3, 1, 3, 1]).fire(1).unwrap();
        assert_eq!(s.slopes(), &[0, 0, 2, 4, 1, 3, 1]);
    }

    #[test]
    fn fire_lands_in_overflow() {
        let s = cfg(2, &[0, 0, 3]).fire(3).unwrap();
        assert_eq!(s.slots(), &[0, 2, 0, 0, 1]);
    }

    #[test]
    fn fire_errors() {
        let s = cfg(2, &[2, 3]);
        assert!(matches!(
            s.fire(1),
            Err(SandpileError::FiringStableColumn { column: 1, .. })
        ));
        assert!(matches!(s.fire(0), Err(SandpileError::IndexOutOfRange { .. })));
        assert!(matches!(s.fire(3), Err(SandpileError::IndexOutOfRange { .. })));
    }

    #[test]
    fn add_grain_examples() {
        assert_eq!(
            cfg(2, &[2, 0, 2, 1, 1, 2, 1, 0, 2]).add_grain().unwrap().slopes(),
            &[3, 0, 2, 1, 1, 2, 1, 0, 2]
        );
        assert_eq!(
            cfg(3, &[3, 0, 2, 3, 1, 3, 1]).add_grain().unwrap().slopes(),
            &[4, 0, 2, 3, 1, 3, 1]
        );
        let s = cfg(2, &[1, 1]).add_grain().unwrap();
        assert_eq!(s.slopes(), &[2, 1]);
        assert!(s.is_stable());
        assert!(cfg(2, &[]).add_grain().is_err());
    }

    #[test]
    fn unstable_columns_examples() {
        assert_eq!(cfg(2, &[3, 0, 2, 1]).unstable_columns(), vec![1]);
        assert!(cfg(2, &[2, 0, 2]).unstable_columns().is_empty());
        assert_eq!(cfg(2, &[0, 4, 0, 4, 0, 0, 1]).unstable_columns(), vec![2, 4]);
    }

    #[test]
    fn replay_reaches_mid_state() {
        // (3,2,2,2,2) fired at 1 then 3 gives the state used above.
        let s = cfg(2, &[3, 2, 2, 2, 2]).fire(1).unwrap().fire(3).unwrap();
        assert_eq!(s.slots(), &[0, 4, 0, 2, 3, 0, 0]);
        assert_eq!(s.unstable_columns(), vec![2, 5]);
    }

    #[test]
    fn stabilize_all_twos() {
        let plus = cfg(2, &[2, 2, 2, 2, 2]).add_grain().unwrap();
        let (fin, seq) = plus.stabilize(&FiringStrategy::Leftmost).unwrap();
        assert_eq!(seq, vec![1, 3, 2, 4, 5]);
        assert_eq!(fin.slots(), &[2, 1, 2, 2, 0, 1, 1]);

        let (alt, seq) = plus
            .stabilize(&FiringStrategy::Explicit(vec![1, 3, 5, 2, 4]))
            .unwrap();
        assert_eq!(seq, vec![1, 3, 5, 2, 4]);
        assert_eq!(alt, fin);

        let (right, _) = plus.stabilize(&FiringStrategy::Rightmost).unwrap();
        assert_eq!(right, fin);
    }

    #[test]
    fn stabilize_zero_slope_stop() {
        let plus = cfg(2, &[2, 0, 2, 2, 1, 2, 2]).add_grain().unwrap();
        let (fin, seq) = plus.stabilize(&FiringStrategy::Leftmost).unwrap();
        assert_eq!(seq, vec![1, 3]);
        assert_eq!(fin.slopes(), &[0, 2, 0, 2, 2, 2, 2]);
    }

    #[test]
    fn explicit_strategy_errors() {
        let plus = cfg(2, &[2, 2, 2]).add_grain().unwrap();
        assert!(matches!(
            plus.stabilize(&FiringStrategy::Explicit(vec![2])),
            Err(SandpileError::FiringStableColumn { column: 2, .. })
        ));
        assert!(matches!(
            plus.stabilize(&FiringStrategy::Explicit(vec![1])),
            Err(SandpileError::IncompleteStrategy { .. })
        ));
    }

    #[test]
    fn heavily_unstable_input_terminates() {
        let s = cfg(1, &[40, 0, 7]);
        let (fin, seq) = s.stabilize(&FiringStrategy::Leftmost).unwrap();
        assert!(fin.is_stable());
        assert!(seq.len() > 3 * 4);
        let (r, _) = s.stabilize(&FiringStrategy::SeededRandom(3)).unwrap();
        assert_eq!(r, fin);
    }

    #[test]
    fn grain_count_is_height_sum_without_overflow() {
        let s = cfg(3, &[3, 0, 2, 3, 1, 3, 1]);
        assert_eq!(s.grain_count(), s.to_heights().total_grains());
    }
}
