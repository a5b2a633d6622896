use alloc::vec;
use alloc::vec::Vec;

use super::sq_dist;

/// One agglomeration step: clusters rooted at `a` and `b` merge at Ward
/// distance `height` (twice the increase in within-cluster sum of squares).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Ward linkage over a point set, computed once and cut at any K.
#[derive(Clone, Debug)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

#[inline]
fn condensed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j - i - 1
}

impl Dendrogram {
    /// Nearest-neighbour-chain Ward clustering with Lance-Williams updates on
    /// squared Euclidean distances.
    pub fn ward(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        if n < 2 {
            return Dendrogram { n, merges: Vec::new() };
        }
        let mut d = vec![0.0f64; n * (n - 1) / 2];
        for i in 0..n {
            for j in i + 1..n {
                d[condensed(n, i, j)] = sq_dist(&points[i], &points[j]);
            }
        }
        let mut size = vec![1usize; n];
        let mut active = vec![true; n];
        let mut merges = Vec::with_capacity(n - 1);
        let mut chain: Vec<usize> = Vec::new();
        let mut remaining = n;
        while remaining > 1 {
            if chain.is_empty() {
                chain.push(active.iter().position(|&x| x).unwrap());
            }
            let a = *chain.last().unwrap();
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            if let Some(p) = prev {
                best = p;
                best_d = d[condensed(n, a, p)];
            }
            for c in 0..n {
                if c == a || !active[c] {
                    continue;
                }
                let dc = d[condensed(n, a, c)];
                if dc < best_d {
                    best_d = dc;
                    best = c;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                let (keep, drop) = if a < best { (a, best) } else { (best, a) };
                merges.push(Merge { a: keep, b: drop, height: best_d });
                let (ni, nj) = (size[keep] as f64, size[drop] as f64);
                for c in 0..n {
                    if !active[c] || c == keep || c == drop {
                        continue;
                    }
                    let nk = size[c] as f64;
                    let dik = d[condensed(n, keep, c)];
                    let djk = d[condensed(n, drop, c)];
                    d[condensed(n, keep, c)] = ((ni + nk) * dik + (nj + nk) * djk - nk * best_d) / (ni + nj + nk);
                }
                active[drop] = false;
                size[keep] += size[drop];
                remaining -= 1;
            } else {
                chain.push(best);
            }
        }
        Dendrogram { n, merges }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat partition into `k` clusters, labelled `0..k` in order of first
    /// appearance.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let n = self.n;
        let mut order: Vec<usize> = (0..self.merges.len()).collect();
        order.sort_by(|&x, &y| self.merges[x].height.total_cmp(&self.merges[y].height).then(x.cmp(&y)));
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &m in order.iter().take(n.saturating_sub(k)) {
            let Merge { a, b, .. } = self.merges[m];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[rb.max(ra)] = ra.min(rb);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        (0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                if label[r] == usize::MAX {
                    label[r] = next;
                    next += 1;
                }
                label[r]
            })
            .collect()
    }
}
