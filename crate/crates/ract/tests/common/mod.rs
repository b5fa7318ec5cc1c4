#![allow(dead_code, clippy::needless_range_loop)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use ract_core::sim::{build_scenario, item_rng, sample_gaussian, Scenario, ScenarioConfig};

pub fn ract() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ract"));
    cmd.env_remove("RACT_WORKERS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    ract().args(args).output().expect("binary runs")
}

pub fn run_with_workers(args: &[&str], workers: usize) -> Output {
    ract()
        .args(args)
        .env("RACT_WORKERS", workers.to_string())
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).expect("valid JSON")
}

pub fn write_csv(path: &Path, x: &DMatrix<f64>) {
    let mut s = String::new();
    let header: Vec<String> = (0..x.ncols()).map(|j| format!("g{j}")).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format!("{:?}", x[(i, j)])).collect();
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Two CSV files drawn from a scenario; returns their paths.
pub fn scenario_files(
    dir: &Path,
    scenario: Scenario,
    p: usize,
    n: usize,
    tau_sq: f64,
    seed: u64,
) -> (PathBuf, PathBuf) {
    let mut cfg = ScenarioConfig::desk(scenario, tau_sq, seed);
    cfg.p = p;
    cfg.n1 = n;
    cfg.n2 = n;
    let (s1, s2) = build_scenario(&cfg).unwrap();
    let mut rng = item_rng(seed, 1);
    let x1 = sample_gaussian(&s1, n, &mut rng).unwrap();
    let x2 = sample_gaussian(&s2, n, &mut rng).unwrap();
    let a = dir.join(format!("g1_{seed}.csv"));
    let b = dir.join(format!("g2_{seed}.csv"));
    write_csv(&a, &x1);
    write_csv(&b, &x2);
    (a, b)
}

pub fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Cyclic Jacobi eigenvalues; an oracle independent of the library's eigensolver.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let p = a.nrows();
    let mut m = a.clone();
    let scale = m.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..p {
            for s in 0..p {
                if r != s {
                    off += m[(r, s)] * m[(r, s)];
                }
            }
        }
        if off <= 1e-30 * scale {
            break;
        }
        for r in 0..p {
            for s in r + 1..p {
                if m[(r, s)] == 0.0 {
                    continue;
                }
                let theta = (m[(s, s)] - m[(r, r)]) / (2.0 * m[(r, s)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..p {
                    let (mkr, mks) = (m[(k, r)], m[(k, s)]);
                    m[(k, r)] = c * mkr - sn * mks;
                    m[(k, s)] = sn * mkr + c * mks;
                }
                for k in 0..p {
                    let (mrk, msk) = (m[(r, k)], m[(s, k)]);
                    m[(r, k)] = c * mrk - sn * msk;
                    m[(s, k)] = sn * mrk + c * msk;
                }
            }
        }
    }
    (0..p).map(|i| m[(i, i)]).collect()
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        acc += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}
