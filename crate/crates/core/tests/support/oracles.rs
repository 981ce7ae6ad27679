// Reference implementations used only by tests. They favour the textbook
// formulas over speed so they stay independent of the library code.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Product-moment correlation from raw sums.
pub fn pearson_sums(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Centred two-pass correlation, used when a stable reference is wanted.
pub fn pearson_centred(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        dx2 += (a - mx) * (a - mx);
        dy2 += (b - my) * (b - my);
    }
    num / (dx2 * dy2).sqrt()
}

/// Fractional ranks by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Tau-b from an explicit loop over all pairs.
pub fn kendall_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let a = (conc + disc + tx) as f64;
    let b = (conc + disc + ty) as f64;
    (conc - disc) as f64 / (a * b).sqrt()
}

pub fn spearman_ranks(x: &[f64], y: &[f64]) -> f64 {
    pearson_centred(&ranks(x), &ranks(y))
}

/// Two-sided permutation p-value: share of shuffles of `y` whose statistic is
/// at least as extreme as the observed one.
pub fn permutation_p(
    x: &[f64],
    y: &[f64],
    stat: impl Fn(&[f64], &[f64]) -> f64,
    draws: usize,
    seed: u64,
) -> f64 {
    let observed = stat(x, y).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = y.to_vec();
    let mut hits = 0usize;
    for _ in 0..draws {
        shuffled.shuffle(&mut rng);
        if stat(x, &shuffled).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// `n` distinct values drawn uniformly from `[lo, hi)`.
pub fn distinct_values(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.random_range(lo..hi);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// A tie-free sample whose y carries a random amount of x.
pub fn correlated_sample(rng: &mut impl Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let x = distinct_values(rng, n, -50.0, 50.0);
    let weight: f64 = rng.random_range(-1.0..1.0);
    let noise = distinct_values(rng, n, -50.0, 50.0);
    let y = x
        .iter()
        .zip(&noise)
        .map(|(a, e)| weight * a + (1.0 - weight.abs()) * e)
        .collect();
    (x, y)
}

/// Plain RK4 on scalar SIRD with vital dynamics and a constant reinfection rate,
/// written out directly. Returns daily (s, i, r, d).
pub fn sird_reference(
    y0: [f64; 4],
    beta: f64,
    lambda_r: f64,
    lambda_d: f64,
    mu: f64,
    gamma: f64,
    zeta: f64,
    days: usize,
    h: f64,
) -> Vec<[f64; 4]> {
    let n = y0.iter().sum::<f64>();
    let f = |y: [f64; 4]| -> [f64; 4] {
        let [s, i, r, d] = y;
        let inf = beta * s * i / n;
        [
            -inf + mu * n - gamma * s + zeta * gamma * r,
            inf - (lambda_d + lambda_r) * i - gamma * i,
            lambda_r * i - gamma * r,
            lambda_d * i - gamma * d,
        ]
    };
    let add = |a: [f64; 4], b: [f64; 4], k: f64| -> [f64; 4] {
        [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]]
    };
    let steps = (1.0 / h).round() as usize;
    let mut y = y0;
    let mut out = vec![y];
    for _ in 0..days {
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            for c in 0..4 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        out.push(y);
    }
    out
}
