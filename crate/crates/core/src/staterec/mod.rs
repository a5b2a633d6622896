//! Recommendation state `(t, a, A, R)`.
//!
//! `A` and `R` are relative-frequency vectors over clusters. They are carried as
//! exact rationals so replaying a session never drifts, and are only turned
//! into floats when a model looks at them. For planning, both are discretised
//! onto a [`SimplexLattice`].

mod lattice;

pub use lattice::{LatticeDescriptor, SimplexLattice};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::REC_SLOTS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("cluster index {index} out of range for {k} clusters")]
    ClusterOutOfRange { index: usize, k: usize },
    #[error("cannot transition from period {t}: horizon is {horizon}")]
    PastHorizon { t: usize, horizon: usize },
    #[error("only search actions continue a session")]
    Terminal,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Relative frequencies over `k` clusters, or the EMPTY sentinel.
///
/// Stored as `num[i] / den` in lowest terms; `den == 0` marks EMPTY.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FreqVector {
    num: Vec<u64>,
    den: u64,
}

impl FreqVector {
    pub fn empty(k: usize) -> Self {
        FreqVector { num: vec![0; k], den: 0 }
    }

    /// Frequencies proportional to nonnegative integer counts. All-zero counts
    /// give EMPTY.
    pub fn from_counts(counts: &[u64]) -> Self {
        let den: u64 = counts.iter().sum();
        let mut v = FreqVector { num: counts.to_vec(), den };
        v.reduce();
        v
    }

    /// Empirical frequencies of a multiset of cluster indices.
    pub fn from_items(k: usize, items: &[usize]) -> Result<Self, StateError> {
        let mut counts = vec![0u64; k];
        for &i in items {
            if i >= k {
                return Err(StateError::ClusterOutOfRange { index: i, k });
            }
            counts[i] += 1;
        }
        Ok(Self::from_counts(&counts))
    }

    /// Rational vector `num / den` (entries must sum to `den`).
    pub fn from_ratio(num: Vec<u64>, den: u64) -> Self {
        debug_assert!(den == 0 || num.iter().sum::<u64>() == den);
        let mut v = FreqVector { num, den };
        v.reduce();
        v
    }

    fn reduce(&mut self) {
        if self.den == 0 {
            self.num.iter_mut().for_each(|x| *x = 0);
            return;
        }
        let g = self.num.iter().fold(self.den, |g, &x| gcd(g, x));
        if g > 1 {
            self.num.iter_mut().for_each(|x| *x /= g);
            self.den /= g;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.den == 0
    }

    pub fn k(&self) -> usize {
        self.num.len()
    }

    pub fn numerators(&self) -> &[u64] {
        &self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    /// Frequency of cluster `i` (0 for EMPTY).
    pub fn get(&self, i: usize) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num[i] as f64 / self.den as f64
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.get(i)).collect()
    }

    /// Sum of the frequencies (1 unless EMPTY).
    pub fn total(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            1.0
        }
    }

    /// `update_freq`: augments the `n_prev` observations summarised by `self`
    /// with `items` and renormalises.
    pub fn update(&self, n_prev: u64, items: &[usize]) -> Result<Self, StateError> {
        let k = self.k();
        let mut add = vec![0u64; k];
        for &i in items {
            if i >= k {
                return Err(StateError::ClusterOutOfRange { index: i, k });
            }
            add[i] += 1;
        }
        let m = items.len() as u64;
        if self.den == 0 || n_prev == 0 {
            return Ok(Self::from_counts(&add));
        }
        // (n_prev * num/den + add) / (n_prev + m)
        let num = self
            .num
            .iter()
            .zip(&add)
            .map(|(&x, &c)| n_prev * x + self.den * c)
            .collect();
        Ok(Self::from_ratio(num, self.den * (n_prev + m)))
    }
}

impl fmt::Debug for FreqVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "EMPTY")
        } else {
            f.debug_list().entries(self.to_f64()).finish()
        }
    }
}

/// `update_freq(prev, n_prev, new_items)`.
pub fn update_freq(prev: &FreqVector, n_prev: u64, new_items: &[usize]) -> Result<FreqVector, StateError> {
    prev.update(n_prev, new_items)
}

/// Three recommendation slots as a sorted multiset of cluster indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecAction([u8; REC_SLOTS]);

impl RecAction {
    pub fn new(mut slots: [usize; REC_SLOTS]) -> Self {
        slots.sort_unstable();
        RecAction(slots.map(|s| s as u8))
    }

    pub fn slots(&self) -> [usize; REC_SLOTS] {
        self.0.map(usize::from)
    }

    /// Number of distinct clusters among the slots (1, 2 or 3).
    pub fn distinct(&self) -> usize {
        let [a, b, c] = self.0;
        1 + usize::from(a != b) + usize::from(b != c)
    }

    pub fn count(&self, cluster: usize) -> usize {
        self.0.iter().filter(|&&s| usize::from(s) == cluster).count()
    }
}

impl fmt::Debug for RecAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{},{}}}", self.0[0], self.0[1], self.0[2])
    }
}

/// The recommendation system's state `Θ_t = {t, a_t, A_t, R_t}`.
///
/// `last` is the cluster just clicked, `views` summarises the `t - 1` earlier
/// clicks and `recs` the `3(t - 1)` slots recommended so far. Cluster indices are
/// zero-based.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecState {
    pub t: usize,
    pub last: usize,
    pub views: FreqVector,
    pub recs: FreqVector,
}

impl fmt::Debug for RecState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{t={}, a={}, A={:?}, R={:?}}}", self.t, self.last, self.views, self.recs)
    }
}

impl RecState {
    /// Cold-start state after the first click.
    pub fn initial(k: usize, first_click: usize) -> Result<Self, StateError> {
        if first_click >= k {
            return Err(StateError::ClusterOutOfRange { index: first_click, k });
        }
        Ok(RecState { t: 1, last: first_click, views: FreqVector::empty(k), recs: FreqVector::empty(k) })
    }

    pub fn k(&self) -> usize {
        self.views.k()
    }

    /// Number of recommendation slots summarised by `recs`.
    pub fn rec_slots(&self) -> u64 {
        (REC_SLOTS * (self.t - 1)) as u64
    }

    /// The state the consumer decides in: `R_t ∪ r_{t+1}` with everything else
    /// unchanged.
    pub fn with_recs(&self, rec: &RecAction) -> RecState {
        let recs = self
            .recs
            .update(self.rec_slots(), &rec.slots())
            .expect("recommendation clusters validated on construction");
        RecState { t: self.t, last: self.last, views: self.views.clone(), recs }
    }

    /// Advances the state after the consumer searches `next` having been shown
    /// `rec`.
    pub fn transition(&self, next: usize, rec: &RecAction, horizon: usize) -> Result<RecState, StateError> {
        let k = self.k();
        if self.t >= horizon {
            return Err(StateError::PastHorizon { t: self.t, horizon });
        }
        if next >= k {
            return Err(StateError::ClusterOutOfRange { index: next, k });
        }
        if let Some(&bad) = rec.slots().iter().find(|&&s| s >= k) {
            return Err(StateError::ClusterOutOfRange { index: bad, k });
        }
        let views = self.views.update((self.t - 1) as u64, &[self.last])?;
        let recs = self.recs.update(self.rec_slots(), &rec.slots())?;
        Ok(RecState { t: self.t + 1, last: next, views, recs })
    }
}

/// Value lookup at a frequency vector by nearest-lattice-point interpolation.
pub fn interpolate_value(v: &FreqVector, lattice: &SimplexLattice, table: &[f64]) -> f64 {
    table[lattice.snap(v)]
}
