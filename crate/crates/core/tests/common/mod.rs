//! Brute-force reference solver for small diagonal QPs over the capped simplex.
#![allow(dead_code)]

use rand::Rng;

/// `sum_i (a_i / 2) x_i^2 - b_i x_i`
pub fn objective(a: &[f64], b: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(b).zip(x).map(|((a, b), x)| 0.5 * a * x * x - b * x).sum()
}

/// Enumerates every assignment of each coordinate to the lower bound, the
/// upper bound or the interior, solves the equality-constrained problem on
/// the interior set in closed form, and keeps the best feasible candidate.
/// At most one zero-curvature coordinate is left interior: with a linear
/// objective in those coordinates the mass can always be moved onto one.
pub fn oracle(a: &[f64], b: &[f64], k: usize) -> (Vec<f64>, f64) {
    let n = a.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut code = vec![0u8; n];
    let total = 3usize.pow(n as u32);
    for mut c in 0..total {
        for slot in code.iter_mut() {
            *slot = (c % 3) as u8;
            c /= 3;
        }
        if let Some(x) = candidate(a, b, k, &code) {
            let f = objective(a, b, &x);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
    }
    best.expect("the capped simplex is nonempty")
}

fn candidate(a: &[f64], b: &[f64], k: usize, code: &[u8]) -> Option<Vec<f64>> {
    const TOL: f64 = 1e-12;
    let n = a.len();
    let mut x = vec![0.0; n];
    let ones = code.iter().filter(|&&c| c == 1).count();
    let free: Vec<usize> = (0..n).filter(|&i| code[i] == 2).collect();
    for i in 0..n {
        if code[i] == 1 {
            x[i] = 1.0;
        }
    }
    let rest = k as f64 - ones as f64;
    let flat: Vec<usize> = free.iter().copied().filter(|&i| a[i] == 0.0).collect();
    let curved: Vec<usize> = free.iter().copied().filter(|&i| a[i] > 0.0).collect();
    match flat.len() {
        0 => {
            if curved.is_empty() {
                return (rest.abs() < TOL).then_some(x);
            }
            let inv: f64 = curved.iter().map(|&i| 1.0 / a[i]).sum();
            let mu = (curved.iter().map(|&i| b[i] / a[i]).sum::<f64>() - rest) / inv;
            for &i in &curved {
                x[i] = (b[i] - mu) / a[i];
            }
        }
        1 => {
            let j = flat[0];
            let mu = b[j];
            for &i in &curved {
                x[i] = (b[i] - mu) / a[i];
            }
            x[j] = rest - curved.iter().map(|&i| x[i]).sum::<f64>();
        }
        _ => return None,
    }
    if free.iter().any(|&i| x[i] < -TOL || x[i] > 1.0 + TOL) {
        return None;
    }
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Some(x)
}

/// Random instance with `n <= max_n` and about 20% zero curvatures.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let n = rng.gen_range(1..=max_n);
    let k = rng.gen_range(1..=n);
    let a = (0..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { 10f64.powf(rng.gen_range(-2.0..2.0)) }).collect();
    let b = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (a, b, k)
}
