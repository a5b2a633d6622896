use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::FreqVector;

/// All vectors `m / G` with nonnegative integer `m` summing to `G`, in
/// lexicographic order of `m`, followed by the EMPTY sentinel.
///
/// Serialised as its descriptor `{k, g}`; the point list is rebuilt on load.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LatticeDescriptor", into = "LatticeDescriptor")]
pub struct SimplexLattice {
    k: usize,
    g: u32,
    points: Vec<Vec<u32>>,
    // binom[n][r] for the composition counts used by `rank`
    binom: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeDescriptor {
    pub k: usize,
    pub g: u32,
}

impl From<LatticeDescriptor> for SimplexLattice {
    fn from(d: LatticeDescriptor) -> Self {
        SimplexLattice::new(d.k.max(1), d.g.max(1))
    }
}

impl From<SimplexLattice> for LatticeDescriptor {
    fn from(l: SimplexLattice) -> Self {
        LatticeDescriptor { k: l.k, g: l.g }
    }
}

fn binomials(n: usize) -> Vec<Vec<u64>> {
    let mut b = vec![vec![0u64; n + 1]; n + 1];
    for i in 0..=n {
        b[i][0] = 1;
        for j in 1..=i {
            b[i][j] = b[i - 1][j - 1] + if j <= i - 1 { b[i - 1][j] } else { 0 };
        }
    }
    b
}

impl SimplexLattice {
    /// Lattice of granularity `g` over `k` clusters. Panics if `k == 0` or `g == 0`.
    pub fn new(k: usize, g: u32) -> Self {
        assert!(k >= 1 && g >= 1, "lattice needs k >= 1 and g >= 1");
        let mut points = Vec::new();
        let mut cur = vec![0u32; k];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            let k = cur.len();
            if i == k - 1 {
                cur[i] = left;
                out.push(cur.clone());
                return;
            }
            for v in 0..=left {
                cur[i] = v;
                rec(i + 1, left - v, cur, out);
            }
        }
        rec(0, g, &mut cur, &mut points);
        let binom = binomials(g as usize + k);
        SimplexLattice { k, g, points, binom }
    }

    pub fn descriptor(&self) -> LatticeDescriptor {
        LatticeDescriptor { k: self.k, g: self.g }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn granularity(&self) -> u32 {
        self.g
    }

    /// Number of points including EMPTY: `C(G+K-1, K-1) + 1`.
    pub fn len(&self) -> usize {
        self.points.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of proper (non-EMPTY) points.
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn empty_index(&self) -> usize {
        self.points.len()
    }

    /// Integer coordinates `m` of point `idx` (`None` for EMPTY).
    pub fn coords(&self, idx: usize) -> Option<&[u32]> {
        self.points.get(idx).map(|p| p.as_slice())
    }

    pub fn freq(&self, idx: usize) -> FreqVector {
        match self.coords(idx) {
            Some(m) => FreqVector::from_ratio(m.iter().map(|&x| u64::from(x)).collect(), u64::from(self.g)),
            None => FreqVector::empty(self.k),
        }
    }

    pub fn values(&self, idx: usize) -> Vec<f64> {
        self.freq(idx).to_f64()
    }

    fn compositions(&self, total: u32, parts: usize) -> u64 {
        // C(total + parts - 1, parts - 1)
        if parts == 0 {
            return u64::from(total == 0);
        }
        self.binom[total as usize + parts - 1][parts - 1]
    }

    /// Position of integer coordinates `m` (summing to `G`) in the point list.
    pub fn rank(&self, m: &[u32]) -> usize {
        debug_assert_eq!(m.len(), self.k);
        let mut idx = 0u64;
        let mut left = self.g;
        for (i, &mi) in m.iter().enumerate().take(self.k - 1) {
            let parts = self.k - i - 1;
            for v in 0..mi {
                idx += self.compositions(left - v, parts);
            }
            left -= mi;
        }
        idx as usize
    }

    /// Nearest lattice point in L2, ties broken towards the lexicographically
    /// smallest point. EMPTY maps to EMPTY. Exact integer arithmetic.
    pub fn snap(&self, v: &FreqVector) -> usize {
        if v.is_empty() {
            return self.empty_index();
        }
        debug_assert_eq!(v.k(), self.k);
        let den = v.denominator();
        let g = u64::from(self.g);
        let mut m = vec![0u32; self.k];
        let mut rem = vec![0u64; self.k];
        let mut assigned = 0u64;
        for (i, &x) in v.numerators().iter().enumerate() {
            let scaled = g * x;
            m[i] = (scaled / den) as u32;
            rem[i] = scaled % den;
            assigned += u64::from(m[i]);
        }
        let deficit = (g - assigned) as usize;
        if deficit > 0 {
            let mut order: Vec<usize> = (0..self.k).collect();
            // largest remainder first; equal remainders go to later coordinates
            order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(b.cmp(&a)));
            for &i in order.iter().take(deficit) {
                m[i] += 1;
            }
        }
        self.rank(&m)
    }

    /// Lattice index of `update_freq(point, n_prev, items)` snapped back onto
    /// the lattice.
    pub fn successor(&self, idx: usize, n_prev: u64, items: &[usize]) -> usize {
        let next = self.freq(idx).update(n_prev, items).expect("items in range");
        self.snap(&next)
    }
}
