mod common;

use common::*;
use ract_core::data::sample_covariance;
use ract_core::sim::{
    build_scenario, item_rng, lowrank_factor, run_nullshape, run_power, run_type1, sample_gaussian, GridAxis, Method,
    NullCovariance, Scenario, ScenarioConfig, SimSettings,
};
use ract_core::{Sequential, SymmetricMatrix};

#[test]
fn gaussian_draws_recover_the_covariance() {
    let sigma = ract_core::sim::ar_covariance(4, 0.8).unwrap();
    let x = sample_gaussian(&sigma, 200_000, &mut item_rng(3, 0)).unwrap();
    let s = sample_covariance(&x).unwrap();
    for r in 0..4 {
        for c in 0..4 {
            assert!(
                (s.get(r, c) - sigma.get(r, c)).abs() < 0.02,
                "({r},{c}) {}",
                s.get(r, c)
            );
        }
    }
}

#[test]
fn off_diagonal_scenario_spectrum() {
    // both blocks have eigenvalues 1 + (h − 1)τ² once and 1 − τ² otherwise
    let (p, tau) = (8, 0.5);
    let (s1, s2) = build_scenario(&ScenarioConfig {
        p,
        ..ScenarioConfig::desk(Scenario::OffDiagonal, tau, 0)
    })
    .unwrap();
    let h = p / 2;
    let mut expect = vec![1.0 + (h as f64 - 1.0) * tau];
    expect.extend(std::iter::repeat_n(1.0 - tau, h - 1));
    expect.extend(std::iter::repeat_n(1.0, p - h));
    expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for s in [&s1, &s2] {
        let m: Vec<Vec<f64>> = (0..p).map(|r| (0..p).map(|c| s.get(r, c)).collect()).collect();
        let mut ev = jacobi_eigenvalues(&m);
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }
    // the sign flip only touches the first block, and the difference has rank 2
    let diff = s1.sub(&s2).unwrap();
    assert_eq!(diff.get(h, h + 1), 0.0);
    let m: Vec<Vec<f64>> = (0..p).map(|r| (0..p).map(|c| diff.get(r, c)).collect()).collect();
    let nonzero = jacobi_eigenvalues(&m).iter().filter(|v| v.abs() > 1e-10).count();
    assert_eq!(nonzero, 2);
}

#[test]
fn low_rank_factors_are_orthonormal_and_isotropic() {
    let (dim, w, reps) = (8, 2, 4000);
    let mut rng = item_rng(5, 0);
    let mut diag = vec![0.0; dim];
    for _ in 0..reps {
        let u = lowrank_factor(dim, w, &mut rng).unwrap();
        assert!((u.transpose() * &u - nalgebra::DMatrix::identity(w, w)).amax() < 1e-10);
        let proj = &u * u.transpose();
        for (i, d) in diag.iter_mut().enumerate() {
            *d += proj[(i, i)];
        }
    }
    // E[UUᵀ] = (w/dim) I by rotation invariance
    for d in diag {
        assert!((d / reps as f64 - w as f64 / dim as f64).abs() < 0.02);
    }
}

#[test]
fn block_scenarios_share_the_unchanged_block() {
    for (scenario, h) in [(Scenario::BlockLarge, 12), (Scenario::BlockSmall, 10)] {
        let (s1, s2) = build_scenario(&ScenarioConfig {
            p: 24,
            ..ScenarioConfig::desk(scenario, 2.0, 9)
        })
        .unwrap();
        for r in 0..24 {
            for c in 0..24 {
                if r >= h || c >= h {
                    assert_eq!(s1.get(r, c), s2.get(r, c));
                }
            }
        }
        assert!(s1.sub(&s2).unwrap().frobenius_norm() > 0.1);
    }
}

#[test]
fn nullshape_columns_are_standardized() {
    let sigma = NullCovariance::Ar { rho: 0.8 }.build(10, 0).unwrap();
    let table = run_nullshape(&sigma, &[1, 3, 10], 20, 300, 1, &Sequential).unwrap();
    assert_eq!(table.rows.len(), 300);
    for j in 0..3 {
        let col: Vec<f64> = table.rows.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / 300.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 299.0;
        assert!(mean.abs() < 1e-12 && (var.sqrt() - 1.0).abs() < 1e-12);
        assert!(table.means[j] > 0.0);
    }
}

#[test]
fn null_covariance_variants_build() {
    for cov in [
        NullCovariance::Iid,
        NullCovariance::LowRank { w: 2, tau_sq: 3.0 },
        NullCovariance::OffDiagonal { tau_sq: 0.5 },
        NullCovariance::Ar { rho: 0.8 },
    ] {
        let s = cov.build(12, 4).unwrap();
        assert!(s.min_eigenvalue() > 0.0, "{cov}");
    }
    assert_eq!(NullCovariance::Iid.build(3, 0).unwrap(), SymmetricMatrix::identity(3));
}

#[test]
fn drivers_are_deterministic_and_report_rates() {
    let cfg = ScenarioConfig {
        p: 12,
        n1: 8,
        n2: 8,
        ..ScenarioConfig::desk(Scenario::LowRank, 0.0, 17)
    };
    let settings = SimSettings {
        b: 19,
        n_datasets: 40,
        ..SimSettings::desk(vec![
            Method::Ract,
            Method::RactMax,
            Method::KyFan(1),
            Method::Frobenius,
            Method::Trace,
        ])
    };
    let a = run_type1(&cfg, &settings, &Sequential).unwrap();
    assert_eq!(a, run_type1(&cfg, &settings, &Sequential).unwrap());
    assert_eq!(a.rows.len(), 5);
    for row in &a.rows {
        assert!((0.0..=1.0).contains(&row.rate));
        assert_eq!(row.reps, 40);
        assert!(row.mean_k >= 1.0);
    }

    let grid = [0.0, 4.0];
    let power = run_power(&cfg, GridAxis::TauSq, &grid, &settings, &Sequential).unwrap();
    assert_eq!(power.rows.len(), 10);
    let strong = power.rate(Method::KyFan(1), 4.0).unwrap().rate;
    let none = power.rate(Method::KyFan(1), 0.0).unwrap().rate;
    assert!(strong > none);
}

#[test]
fn fixed_pair_mode_reuses_one_covariance_pair() {
    let cfg = ScenarioConfig {
        p: 12,
        n1: 8,
        n2: 8,
        ..ScenarioConfig::desk(Scenario::LowRank, 3.0, 2)
    };
    let mut settings = SimSettings {
        b: 19,
        n_datasets: 10,
        ..SimSettings::desk(vec![Method::KyFan(1)])
    };
    let fresh = run_power(&cfg, GridAxis::TauSq, &[3.0], &settings, &Sequential).unwrap();
    settings.fixed_pair = true;
    let fixed = run_power(&cfg, GridAxis::TauSq, &[3.0], &settings, &Sequential).unwrap();
    assert_eq!(fresh.rows.len(), fixed.rows.len());
    assert!(run_power(&cfg, GridAxis::Cutoff, &[0.5, 0.9], &settings, &Sequential).is_ok());
}
