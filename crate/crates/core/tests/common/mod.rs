//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

/// Distribution of successes over `r` slots with per-slot outage `eps`,
/// by walking every success pattern rather than using the binomial formula.
pub fn enumerate_successes(r: u32, eps: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; r as usize + 1];
    for mask in 0u64..(1u64 << r) {
        let ok = mask.count_ones() as i32;
        pmf[ok as usize] += (1.0 - eps).powi(ok) * eps.powi(r as i32 - ok);
    }
    pmf
}

/// E[min packets] for `k` edge users over a `t_set`-slot window by brute
/// force: the first user gets every slot, each later user a request slot
/// uniform on `1..=t_set` and the slots after it; the joint grid of
/// per-user counts is summed in full.
pub fn exhaustive_min_packets(k: usize, t_set: u32, eps: f64) -> f64 {
    let t = t_set as usize;
    let first = enumerate_successes(t_set, eps);
    let mut later = vec![0.0; t + 1];
    for t_k in 1..=t_set {
        for (c, p) in enumerate_successes(t_set - t_k, eps).into_iter().enumerate() {
            later[c] += p / t_set as f64;
        }
    }
    let mut marginals = vec![first];
    marginals.extend(std::iter::repeat_n(later, k - 1));

    let mut total = 0.0;
    let mut idx = vec![0usize; k];
    loop {
        let p: f64 = idx.iter().zip(&marginals).map(|(&c, m)| m[c]).product();
        total += p * *idx.iter().min().unwrap() as f64;
        // odometer over (t + 1)^k cells
        let mut pos = 0;
        loop {
            if pos == k {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] <= t {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// E[t_K]: the largest of `k - 1` request slots uniform on `1..=t_set`.
pub fn expected_last_slot(k: usize, t_set: u64) -> f64 {
    let t = t_set as f64;
    t - (1..t_set)
        .map(|j| (j as f64 / t).powi(k as i32 - 1))
        .sum::<f64>()
}

/// Log-spaced brute-force scan, refined once around the best cell.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let scan = |lo: f64, hi: f64| {
        let (llo, lhi) = (lo.ln(), hi.ln());
        let mut best = (lo, f64::INFINITY);
        for i in 0..n {
            let x = (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp();
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best.0
    };
    let x = scan(lo, hi);
    let step = ((hi / lo).ln() / (n - 1) as f64).exp();
    scan(x / step, x * step)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Finite-difference checks on `f(x) = exp(b^x / a)` over `[0, 20]`:
/// `f > 1`, `f' > 0`, `f'' > 0`, `f'/f < f''/f'` and convexity of
/// `f(x)/x`. Points where `f` no longer fits in an f64 are skipped.
pub fn double_exponential_checks(a: f64, b: f64) -> Result<usize, String> {
    let f = |x: f64| (b.powf(x) / a).exp();
    let n = 2000;
    let mut checked = 0;
    for i in 0..=n {
        let x = 20.0 * i as f64 / n as f64;
        let fx = f(x);
        if !(fx < 1e250) || !f(x + 1e-3).is_finite() {
            break;
        }
        let slope = ((f(x + 1e-3).ln() - fx.ln()) / 1e-3).abs();
        let h = 1e-4 / (1.0 + slope);
        let (fp, fm) = (f(x + h), f(x - h));
        if !fp.is_finite() {
            break;
        }
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - 2.0 * fx + fm) / (h * h);
        if !(fx > 1.0 && d1 > 0.0 && d2 > 0.0) {
            return Err(format!("({a}, {b}) sign check failed at x = {x}"));
        }
        if !(d1 / fx < d2 / d1 * (1.0 + 1e-4)) {
            return Err(format!("({a}, {b}) ratio check failed at x = {x}"));
        }
        if x > 0.0 {
            let g = |x: f64| f(x) / x;
            let hg = 1e-3 * x.min(1.0);
            let second = g(x + hg) - 2.0 * g(x) + g(x - hg);
            if second.is_finite() && second <= 0.0 {
                return Err(format!("({a}, {b}) f(x)/x not convex at x = {x}"));
            }
        }
        checked += 1;
    }
    Ok(checked)
}

/// Kolmogorov-Smirnov distance of a sample from U(0, 1).
pub fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
