//! Test-only oracles shared by the integration suites. Nothing here calls the
//! closed forms it is used to check.
#![allow(dead_code)]

use phasefit::analysis;
use phasefit::sampling::SamplerState;
use phasefit::{Branch, GeneralizedCoxModel};

pub const GRID_MU: [f64; 3] = [0.1, 1.0, 10.0];
pub const GRID_CV2: [f64; 12] = [
    0.05,
    0.1,
    0.25,
    1.0 / 3.0,
    0.5,
    0.9,
    1.0,
    1.1,
    2.0,
    4.0,
    10.0,
    100.0,
];

/// `(μ, σ²)` for every grid point.
pub fn grid() -> Vec<(f64, f64)> {
    GRID_MU
        .iter()
        .flat_map(|&mu| GRID_CV2.iter().map(move |&c| (mu, c * mu * mu)))
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Random model: 1-4 branches of 0-4 stages, log-uniform rates in [0.1, 10].
pub fn random_model(rng: &mut SamplerState, allow_instant: bool) -> GeneralizedCoxModel {
    let m = 1 + (rng.uniform() * 4.0) as usize % 4;
    let mut weights: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let min_len = usize::from(!allow_instant);
    let branches = weights
        .into_iter()
        .map(|p| {
            let len = min_len + (rng.uniform() * (5 - min_len) as f64) as usize % (5 - min_len);
            let rates = (0..len)
                .map(|_| 10f64.powf(2.0 * rng.uniform() - 1.0))
                .collect();
            Branch::new(p, rates)
        })
        .collect();
    GeneralizedCoxModel::new(branches).unwrap()
}

/// `(-1)^k f^(k)(0)` of the Laplace transform by central finite differences
/// (fourth-order stencils), step scaled to the nearest pole.
pub fn fd_moment(model: &GeneralizedCoxModel, k: u32) -> f64 {
    let lmin = model
        .branches()
        .iter()
        .flat_map(|b| b.rates.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if !lmin.is_finite() {
        return 0.0;
    }
    let f = |s: f64| analysis::laplace_real(model, s).unwrap();
    let d = match k {
        1 => {
            let h = 1e-3 * lmin;
            (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
        }
        2 => {
            let h = 1e-2 * lmin;
            (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h))
                / (12.0 * h * h)
        }
        3 => {
            let h = 1e-2 * lmin;
            (-f(3.0 * h) + 8.0 * f(2.0 * h) - 13.0 * f(h) + 13.0 * f(-h) - 8.0 * f(-2.0 * h)
                + f(-3.0 * h))
                / (8.0 * h * h * h)
        }
        _ => panic!("finite differences implemented for k <= 3"),
    };
    if k.is_multiple_of(2) {
        d
    } else {
        -d
    }
}

/// `E[T²]` from explicit stage means, straight from the branch sums.
fn second_moment_of(probs: &[f64], x: &[Vec<f64>]) -> f64 {
    probs
        .iter()
        .zip(x)
        .map(|(p, xs)| {
            let s: f64 = xs.iter().sum();
            let q: f64 = xs.iter().map(|v| v * v).sum();
            p * (s * s + q)
        })
        .sum()
}

/// Brute-force minimum of `E[T²]` over nonnegative stage means subject to
/// `Σ_j p_j Σ_k x_jk = μ`: dense grid over the free coordinates, then compass
/// search. Returns the minimum found and the minimizing stage means.
pub fn brute_force_min_second_moment(
    probs: &[f64],
    lengths: &[usize],
    mu: f64,
) -> (f64, Vec<Vec<f64>>) {
    // one variable is pinned by the mean constraint: the first stage of the
    // first branch with positive probability and positive length
    let anchor = probs
        .iter()
        .zip(lengths)
        .position(|(p, l)| *p > 0.0 && *l > 0)
        .expect("nondegenerate configuration");
    let mut free: Vec<(usize, usize, f64)> = Vec::new(); // (branch, stage, upper bound)
    for (j, (&p, &l)) in probs.iter().zip(lengths).enumerate() {
        for k in 0..l {
            if (j, k) != (anchor, 0) && p > 0.0 {
                free.push((j, k, mu / p));
            }
        }
    }
    let build = |vals: &[f64]| -> Option<Vec<Vec<f64>>> {
        let mut x: Vec<Vec<f64>> = lengths.iter().map(|&l| vec![0.0; l]).collect();
        let mut used = 0.0;
        for (&(j, k, _), &v) in free.iter().zip(vals) {
            x[j][k] = v;
            used += probs[j] * v;
        }
        let rest = (mu - used) / probs[anchor];
        if rest < 0.0 || vals.iter().any(|v| *v < 0.0) {
            return None;
        }
        x[anchor][0] = rest;
        Some(x)
    };
    let objective =
        |vals: &[f64]| build(vals).map_or(f64::INFINITY, |x| second_moment_of(probs, &x));

    let d = free.len();
    let points = 41usize;
    let mut best = vec![0.0; d];
    let mut best_val = objective(&best);
    let mut idx = vec![0usize; d];
    if d > 0 {
        'grid: loop {
            let vals: Vec<f64> = idx
                .iter()
                .zip(&free)
                .map(|(&i, &(_, _, ub))| ub * i as f64 / (points - 1) as f64)
                .collect();
            let v = objective(&vals);
            if v < best_val {
                best_val = v;
                best = vals;
            }
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < points {
                    continue 'grid;
                }
                *slot = 0;
            }
            break;
        }
        let mut step: Vec<f64> = free.iter().map(|f| f.2 / (points - 1) as f64).collect();
        while step.iter().any(|&s| s > 1e-13 * mu) {
            let mut improved = false;
            for i in 0..d {
                for dir in [-1.0, 1.0] {
                    let mut trial = best.clone();
                    trial[i] += dir * step[i];
                    let v = objective(&trial);
                    if v < best_val {
                        best_val = v;
                        best = trial;
                        improved = true;
                    }
                }
            }
            // diagonal moves help along the constraint's ridge
            for i in 0..d {
                for j in i + 1..d {
                    for (a, b) in [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0)] {
                        let mut trial = best.clone();
                        trial[i] += a * step[i];
                        trial[j] += b * step[j];
                        let v = objective(&trial);
                        if v < best_val {
                            best_val = v;
                            best = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
    }
    (best_val, build(&best).unwrap())
}

/// Random `(probs, lengths)` with 1-4 branches and at most 4 stages overall.
pub fn random_routing(rng: &mut SamplerState) -> (Vec<f64>, Vec<usize>) {
    loop {
        let m = 1 + (rng.uniform() * 4.0) as usize % 4;
        let lengths: Vec<usize> = (0..m)
            .map(|_| 1 + (rng.uniform() * 4.0) as usize % 4)
            .collect();
        if lengths.iter().sum::<usize>() > 4 {
            continue;
        }
        let mut probs: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        return (probs, lengths);
    }
}
