/// All integer vectors of length `k` with entries summing to `g`, in
/// lexicographic order.
pub fn compositions(k: usize, g: u32) -> Vec<Vec<u32>> {
    fn go(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            go(k - 1, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(k, g, &mut Vec::new(), &mut out);
    out
}

/// Nearest point of the grid `{m / g}` to `num / den` by exhaustive search in
/// squared L2 with exact integer arithmetic; the first (lexicographically
/// smallest) minimiser wins.
pub fn nearest(num: &[u64], den: u64, g: u32) -> Vec<u32> {
    let k = num.len();
    let mut best: Option<(u128, Vec<u32>)> = None;
    for m in compositions(k, g) {
        // (m_i/g - x_i/den)^2 scaled by (g·den)^2
        let d: u128 = m
            .iter()
            .zip(num)
            .map(|(&mi, &xi)| {
                let a = i128::from(mi) * i128::from(den as i64);
                let b = i128::from(xi as i64) * i128::from(g);
                ((a - b) * (a - b)) as u128
            })
            .sum();
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, m));
        }
    }
    best.unwrap().1
}
