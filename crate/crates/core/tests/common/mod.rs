#![allow(dead_code)]

use psvar::data::{Dataset, DesignMatrix};
use psvar::glm::{fit_logistic, LogisticFit};
use psvar::rng::{StreamKey, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Three normal and `p − 3` binary covariates, logistic treatment and
/// outcome models with modest effects.
pub fn random_dataset(rng: &mut StreamRng, n: usize, p: usize) -> Dataset {
    let mut columns = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = if j < 3 {
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            (0..n).map(|_| f64::from(rng.random_bool(0.4) as u8)).collect()
        };
        columns.push(col);
    }
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.6..0.6)).collect();
    let gamma: Vec<f64> = (0..p).map(|_| rng.random_range(-0.6..0.6)).collect();
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let lp: f64 = (0..p).map(|j| beta[j] * columns[j][i]).sum();
        let zi = f64::from(rng.random_bool(expit(lp - 0.2)) as u8);
        let ly: f64 = (0..p).map(|j| gamma[j] * columns[j][i]).sum::<f64>() + 0.5 * zi - 0.3;
        z.push(zi);
        y.push(f64::from(rng.random_bool(expit(ly)) as u8));
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(y, z, columns, names).unwrap()
}

/// A dataset with a clean (non-separated) propensity fit, at least three
/// subjects per arm, and its fit.
pub fn fitted_dataset(seed: u64, n: usize, p: usize) -> (Dataset, DesignMatrix, LogisticFit) {
    let root = StreamKey::new(seed);
    for attempt in 0.. {
        let mut rng = root.child(attempt).rng();
        let d = random_dataset(&mut rng, n, p);
        if d.n_treated() < 3 || d.n_control() < 3 {
            continue;
        }
        let dm = DesignMatrix::with_intercept(&d);
        if let Ok(fit) = fit_logistic(&dm, d.z()) {
            return (d, dm, fit);
        }
    }
    unreachable!()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
