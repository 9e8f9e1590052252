//! Brute-force reference computations. Each one takes a different route from
//! the library code it checks.

#![allow(dead_code)]

/// Cosine via the law of cosines: |u-v|^2 = |u|^2 + |v|^2 - 2|u||v|cos.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let sq = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let (nu, nv) = (sq(u).sqrt(), sq(v).sqrt());
    (sq(u) + sq(v) - sq(&diff)) / (2.0 * nu * nv)
}

/// The `j`-th smallest value (0-based), found by counting, without sorting.
fn order_statistic(xs: &[f64], j: usize) -> f64 {
    for &v in xs {
        let less = xs.iter().filter(|&&x| x < v).count();
        let leq = xs.iter().filter(|&&x| x <= v).count();
        if less <= j && j < leq {
            return v;
        }
    }
    unreachable!("order statistic {j} not found")
}

/// Linear interpolation between the order statistics around (n-1)p.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let h = (xs.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let a = order_statistic(xs, lo);
    if lo + 1 >= xs.len() {
        return a;
    }
    let b = order_statistic(xs, lo + 1);
    a + (h - lo as f64) * (b - a)
}

/// Bin = 1 + number of interior edges at or below the similarity.
pub fn bin_of(similarity: f64, edges: &[f64]) -> usize {
    let k = edges.len() - 1;
    1 + edges[1..k].iter().filter(|&&e| e <= similarity).count()
}

/// IoU of integer boxes by counting unit cells.
pub fn iou_grid(a: [i64; 4], b: [i64; 4]) -> f64 {
    let inside = |bx: [i64; 4], x: i64, y: i64| x >= bx[0] && x < bx[2] && y >= bx[1] && y < bx[3];
    let (x0, y0) = (a[0].min(b[0]), a[1].min(b[1]));
    let (x1, y1) = (a[2].max(b[2]), a[3].max(b[3]));
    let (mut inter, mut union) = (0u64, 0u64);
    for x in x0..x1 {
        for y in y0..y1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

/// Raw-sum textbook formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Rank = (#smaller) + (#equal + 1) / 2.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&v| {
            let less = xs.iter().filter(|&&x| x < v).count() as f64;
            let eq = xs.iter().filter(|&&x| x == v).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

/// 1 - 6 sum(d^2) / (n (n^2 - 1)) without ties, Pearson on ranks otherwise.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let has_ties = |r: &[f64]| r.iter().any(|v| v.fract() != 0.0) || {
        let mut s = r.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).any(|w| w[0] == w[1])
    };
    if !has_ties(&rx) && !has_ties(&ry) {
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    } else {
        pearson(&rx, &ry)
    }
}

/// Counts samples in [lo + i*w, lo + (i+1)*w) by scanning every bin.
pub fn histogram_counts(samples: &[f64], edges: &[f64]) -> (Vec<usize>, usize, usize) {
    let n = edges.len() - 1;
    let mut counts = vec![0; n];
    let (mut under, mut over) = (0, 0);
    for &x in samples {
        if x.is_nan() || x > edges[n] {
            over += 1;
            continue;
        }
        if x < edges[0] {
            under += 1;
            continue;
        }
        let mut placed = false;
        for i in 0..n {
            let upper_ok = if i == n - 1 { x <= edges[i + 1] } else { x < edges[i + 1] };
            if x >= edges[i] && upper_ok {
                counts[i] += 1;
                placed = true;
                break;
            }
        }
        assert!(placed);
    }
    (counts, under, over)
}
