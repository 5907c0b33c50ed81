//! Brute-force reference implementations used by the statistics tests and
//! the acceptance run. Deliberately naive.

/// Trimmed mean by explicit removal of the smallest and largest quarter.
pub fn iqm_oracle(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    let k = v.len() / 4;
    for _ in 0..k {
        let (i, _) = v.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &x)| if x < a.1 { (i, x) } else { a });
        v.remove(i);
        let (i, _) = v.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        v.remove(i);
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// All size-`k` index subsets of `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn u_pairs(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// `(U, p)` with U counted pairwise and the null distribution enumerated
/// over every relabelling of the pooled values.
pub fn mwu_oracle(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let u = u_pairs(x, y);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for c in combinations(pooled.len(), x.len()) {
        let a: Vec<f64> = c.iter().map(|&i| pooled[i]).collect();
        let b: Vec<f64> = (0..pooled.len()).filter(|i| !c.contains(i)).map(|i| pooled[i]).collect();
        let v = u_pairs(&a, &b);
        total += 1;
        if v <= u {
            le += 1;
        }
        if v >= u {
            ge += 1;
        }
    }
    (u, (2.0 * le.min(ge) as f64 / total as f64).min(1.0))
}

/// Holm adjustment straight from the definition.
pub fn holm_oracle(ps: &[f64]) -> Vec<f64> {
    let m = ps.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| ps[a].partial_cmp(&ps[b]).unwrap());
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut best = 0.0f64;
        for j in 0..=i {
            best = best.max((((m - j) as f64) * ps[idx[j]]).min(1.0));
        }
        out[idx[i]] = best;
    }
    out
}

/// Exhaustive one-sided permutation p-value for H1: IQM(a) < IQM(b)
/// (`less`) or the reverse.
pub fn permutation_oracle(a: &[f64], b: &[f64], less: bool) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let stat = |x: &[f64], y: &[f64]| iqm_oracle(x) - iqm_oracle(y);
    let observed = stat(a, b);
    let eps = 1e-12 * (1.0 + observed.abs());
    let combos = combinations(pooled.len(), a.len());
    let count = combos
        .iter()
        .filter(|c| {
            let x: Vec<f64> = c.iter().map(|&i| pooled[i]).collect();
            let y: Vec<f64> = (0..pooled.len()).filter(|i| !c.contains(i)).map(|i| pooled[i]).collect();
            let s = stat(&x, &y);
            if less { s <= observed + eps } else { s >= observed - eps }
        })
        .count();
    count as f64 / combos.len() as f64
}
