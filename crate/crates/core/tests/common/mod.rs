//! Reference implementations shared by the integration tests. Nothing here
//! calls into the crate's linear algebra.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, p: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; p]; p];
    for r in 0..p {
        for s in r..p {
            let v: f64 = rng.sample(StandardNormal);
            a[r][s] = v;
            a[s][r] = v;
        }
    }
    a
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let scale: f64 = m.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|r| (0..p).filter(move |&s| s != r).map(move |s| (r, s)))
            .map(|(r, s)| m[r][s] * m[r][s])
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for r in 0..p {
            for s in r + 1..p {
                if m[r][s] == 0.0 {
                    continue;
                }
                let theta = (m[s][s] - m[r][r]) / (2.0 * m[r][s]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..p {
                    let (mkr, mks) = (m[k][r], m[k][s]);
                    m[k][r] = c * mkr - sn * mks;
                    m[k][s] = sn * mkr + c * mks;
                }
                for k in 0..p {
                    let (mrk, msk) = (m[r][k], m[s][k]);
                    m[r][k] = c * mrk - sn * msk;
                    m[s][k] = sn * mrk + c * msk;
                }
            }
        }
    }
    (0..p).map(|i| m[i][i]).collect()
}

/// Singular values of a symmetric matrix, descending.
pub fn singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let mut sv: Vec<f64> = jacobi_eigenvalues(a).into_iter().map(f64::abs).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn ky_fan(a: &[Vec<f64>], k: usize) -> f64 {
    singular_values(a).iter().take(k).sum()
}

/// Sample covariance by explicit double loop, divisor `n − 1`.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut s = vec![vec![0.0; p]; p];
    for r in 0..p {
        for c in 0..p {
            let mut acc = 0.0;
            for row in rows {
                acc += (row[r] - mean[r]) * (row[c] - mean[c]);
            }
            s[r][c] = acc / (n as f64 - 1.0);
        }
    }
    s
}

pub fn difference(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect())
        .collect()
}

/// `T_k` for `k = 1..=m` from the two groups' rows.
pub fn t_k(g1: &[Vec<f64>], g2: &[Vec<f64>], m: usize) -> Vec<f64> {
    let sv = singular_values(&difference(&covariance(g1), &covariance(g2)));
    (1..=m).map(|k| sv.iter().take(k).sum()).collect()
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!((a - b).abs() <= tol * scale, "{what}: {a} vs {b}");
}
