#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pliable::{Dataset, PliableFit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Gaussian `X`, continuous `Z`, sparse main effects and interactions.
pub fn random_dataset(seed: u64, n: usize, p: usize, k: usize) -> Dataset {
    let mut r = rng(seed);
    let x = normal_matrix(&mut r, n, p);
    let z = normal_matrix(&mut r, n, k);
    let mut y = normal_vector(&mut r, n);
    for j in 0..p.min(4) {
        let b: f64 = r.random_range(-2.0..2.0);
        y.axpy(b, &x.column(j), 1.0);
        if k > 0 && j < 2 {
            let zk = r.random_range(0..k);
            let t: f64 = r.random_range(-1.5..1.5);
            y += x.column(j).component_mul(&z.column(zk)) * t;
        }
    }
    Dataset::new(y, x, z).unwrap()
}

/// Random dense fit for objective-level properties.
pub fn random_fit(rng: &mut ChaCha8Rng, p: usize, k: usize, density: f64) -> PliableFit {
    let mut fit = PliableFit::zeros(p, k, 0.0, 0.5);
    fit.beta0 = rng.sample(StandardNormal);
    fit.theta0 = normal_vector(rng, k);
    let mut theta = DMatrix::zeros(p, k);
    for j in 0..p {
        if rng.random::<f64>() < density {
            fit.beta[j] = rng.sample(StandardNormal);
            for kk in 0..k {
                if rng.random::<f64>() < 0.5 {
                    theta[(j, kk)] = rng.sample(StandardNormal);
                }
            }
        }
    }
    fit.theta = pliable::ThetaRows::from_dense(&theta);
    fit
}

/// Plain lasso by cyclic coordinate descent on
/// `(1/2N)||y - b0 - X b||^2 + lambda |b|_1`, written against raw slices.
pub fn lasso_cd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    warm: Option<&[f64]>,
) -> (f64, Vec<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| x.column(j).iter().copied().collect())
        .collect();
    let sq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();
    let mut b = warm.map_or(vec![0.0; p], |w| w.to_vec());
    let mut r: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..p).map(|j| cols[j][i] * b[j]).sum::<f64>())
        .collect();
    let mut b0 = r.iter().sum::<f64>() / nf;
    r.iter_mut().for_each(|v| *v -= b0);
    for _ in 0..1_000_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let rho = cols[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / nf + sq[j] * b[j];
            let new = if rho > lambda {
                (rho - lambda) / sq[j]
            } else if rho < -lambda {
                (rho + lambda) / sq[j]
            } else {
                0.0
            };
            let d = new - b[j];
            if d != 0.0 {
                for i in 0..n {
                    r[i] -= d * cols[j][i];
                }
                max_change = max_change.max(d.abs() * sq[j].sqrt());
                b[j] = new;
            }
        }
        let shift = r.iter().sum::<f64>() / nf;
        b0 += shift;
        r.iter_mut().for_each(|v| *v -= shift);
        if max_change < 1e-13 && shift.abs() < 1e-13 {
            break;
        }
    }
    (b0, b)
}

/// Nested bisection for the norm equations
/// `a (1 + c/R) = g1`, `b (1 + c (1/b + 1/R)) = g2` with `R = sqrt(a^2 + b^2)`.
///
/// Inner: for fixed `b > 0` the first equation is increasing in `a` on `[0, g1]`.
/// Outer: `F(b) = b + c + c b / R(a(b), b) - g2` is increasing in `b` on `[0, g2]`.
pub fn norm_equation_bisection(g1: f64, g2: f64, c: f64) -> (f64, f64) {
    // Boundary cases from the subgradient conditions.
    if g2 <= c {
        return ((g1 - c).max(0.0), 0.0);
    }
    if g1 * g1 + (g2 - c) * (g2 - c) <= c * c {
        return (0.0, 0.0);
    }
    let a_of_b = |b: f64| -> f64 {
        let (mut lo, mut hi) = (0.0, g1);
        for _ in 0..200 {
            let a = 0.5 * (lo + hi);
            let f = a * (1.0 + c / a.hypot(b)) - g1;
            if f > 0.0 {
                hi = a;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    };
    let outer = |b: f64| -> f64 {
        let a = a_of_b(b);
        b + c + c * b / a.hypot(b) - g2
    };
    let (mut lo, mut hi) = (0.0, g2);
    for _ in 0..200 {
        let b = 0.5 * (lo + hi);
        if outer(b) > 0.0 {
            hi = b;
        } else {
            lo = b;
        }
    }
    let b = 0.5 * (lo + hi);
    (a_of_b(b), b)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

pub fn support(fit: &PliableFit) -> (Vec<usize>, Vec<(usize, usize)>) {
    let beta = fit.nonzero_beta();
    let mut theta = Vec::new();
    for (j, row) in fit.theta.iter() {
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                theta.push((j, k));
            }
        }
    }
    (beta, theta)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
