mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use ract_core::data::{residualize, sample_covariance};
use ract_core::matrix::{ky_fan_norm, select_k};
use ract_core::perm::{build_null, component_p_values, minp_test, permutation_p_value};
use ract_core::stats::{
    frobenius_stat, max_elementwise_stat, superdiag_stat, t_k_grid, trace_stat, FamilySet, StatKernel,
};
use ract_core::{CovariateMatrix, Sequential, SymmetricMatrix, TwoSampleDataset};

fn dataset(seed: u64, n1: usize, n2: usize, p: usize) -> TwoSampleDataset {
    let mut rng = rng(seed);
    let g1 = normal_rows(&mut rng, n1, p);
    let g2 = normal_rows(&mut rng, n2, p);
    TwoSampleDataset::new(to_matrix(&g1), to_matrix(&g2)).unwrap()
}

fn random_orthogonal(seed: u64, p: usize) -> DMatrix<f64> {
    let a = to_matrix(&normal_rows(&mut rng(seed), p, p));
    a.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ky_fan_is_a_monotone_norm(seed in any::<u64>(), p in 2usize..12, c in -5.0f64..5.0) {
        let mut rng = rng(seed);
        let a = SymmetricMatrix::new(to_matrix(&random_symmetric(&mut rng, p))).unwrap();
        let b = SymmetricMatrix::new(to_matrix(&random_symmetric(&mut rng, p))).unwrap();
        let sum = a.add(&b).unwrap();
        let mut prev = 0.0;
        for k in 1..=p {
            let na = ky_fan_norm(&a, k).unwrap();
            prop_assert!(na >= prev - 1e-12);
            prev = na;
            prop_assert!(ky_fan_norm(&sum, k).unwrap() <= na + ky_fan_norm(&b, k).unwrap() + 1e-10);
            let scaled = ky_fan_norm(&a.scale(c), k).unwrap();
            prop_assert!((scaled - c.abs() * na).abs() <= 1e-10 * na.max(1.0));
        }
        // k = p is the nuclear norm; k = 1 dominates the Frobenius norm over √p
        prop_assert!(ky_fan_norm(&a, 1).unwrap() >= a.frobenius_norm() / (p as f64).sqrt() - 1e-12);
    }

    #[test]
    fn select_k_is_monotone_in_cutoff(values in prop::collection::vec(0.0f64..10.0, 1..30), c1 in 0.01f64..0.99, c2 in 0.01f64..0.99) {
        prop_assume!(values.iter().sum::<f64>() > 0.0);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let cap = sorted.len();
        let k_lo = select_k(&sorted, lo, cap).unwrap();
        let k_hi = select_k(&sorted, hi, cap).unwrap();
        prop_assert!(k_lo <= k_hi);
        prop_assert!((1..=cap).contains(&k_lo));
    }

    #[test]
    fn sample_covariance_is_psd(seed in any::<u64>(), n in 2usize..15, p in 1usize..20) {
        let x = to_matrix(&normal_rows(&mut rng(seed), n, p));
        let s = sample_covariance(&x).unwrap();
        let scale = s.trace().max(1.0);
        prop_assert!(s.min_eigenvalue() >= -1e-10 * scale);
    }

    #[test]
    fn residualize_is_idempotent(seed in any::<u64>(), n in 5usize..20, q in 1usize..3) {
        let mut rng = rng(seed);
        let x = to_matrix(&normal_rows(&mut rng, n, 4));
        let c = CovariateMatrix::with_intercept(&to_matrix(&normal_rows(&mut rng, n, q))).unwrap();
        let once = residualize(&x, &c).unwrap();
        let twice = residualize(&once, &c).unwrap();
        prop_assert!((&once - &twice).amax() < 1e-10);
        // residuals are orthogonal to the design
        prop_assert!((c.design().transpose() * &once).amax() < 1e-9);
    }

    #[test]
    fn statistics_are_symmetric_in_the_groups(seed in any::<u64>(), n1 in 4usize..10, n2 in 4usize..10, p in 2usize..8) {
        let d = dataset(seed, n1, n2, p);
        let swapped = TwoSampleDataset::new(d.group2().clone(), d.group1().clone()).unwrap();
        let m = d.n().min(p);
        let a = t_k_grid(&d, m).unwrap();
        let b = t_k_grid(&swapped, m).unwrap();
        for k in 0..m {
            prop_assert!((a.values[k] - b.values[k]).abs() < 1e-10);
        }
        prop_assert!((frobenius_stat(&d).unwrap() - frobenius_stat(&swapped).unwrap()).abs() < 1e-10);
        prop_assert!((max_elementwise_stat(&d).unwrap().value - max_elementwise_stat(&swapped).unwrap().value).abs() < 1e-8);
    }

    #[test]
    fn spectral_statistics_are_rotation_invariant(seed in any::<u64>(), p in 2usize..30) {
        let d = dataset(seed, 6, 7, p);
        let q = random_orthogonal(seed ^ 0x5eed, p);
        let rotated = TwoSampleDataset::new(d.group1() * &q, d.group2() * &q).unwrap();
        let m = d.n().min(p);
        let a = t_k_grid(&d, m).unwrap();
        let b = t_k_grid(&rotated, m).unwrap();
        for k in 0..m {
            prop_assert!((a.values[k] - b.values[k]).abs() < 1e-9 * a.values[k].max(1.0));
        }
        prop_assert!((frobenius_stat(&d).unwrap() - frobenius_stat(&rotated).unwrap()).abs() < 1e-9);
        prop_assert!((trace_stat(&d).unwrap() - trace_stat(&rotated).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn permutation_p_values_lie_on_the_lattice(seed in any::<u64>(), b in 2usize..40) {
        let d = dataset(seed, 5, 6, 4);
        let families = FamilySet::all(3, 4);
        let kernel = StatKernel::new(&d, families).unwrap();
        let observed = kernel.observed();
        let nulls = build_null(&d, b, families, seed, &Sequential).unwrap();
        let step = 1.0 / (b as f64 + 1.0);
        for (obs, null) in observed.iter().zip(&nulls) {
            for pv in component_p_values(obs, null) {
                let units = pv / step;
                prop_assert!((units - units.round()).abs() < 1e-9, "{pv} off the lattice");
                prop_assert!(pv >= step - 1e-15 && pv <= 1.0);
            }
            let col: Vec<f64> = null.column(0).collect();
            let pv = permutation_p_value(obs.values[0], &col);
            prop_assert!(((pv / step) - (pv / step).round()).abs() < 1e-9);
            let (_, p_minp) = minp_test(obs, null);
            prop_assert!(p_minp >= step - 1e-15 && p_minp <= 1.0);
        }
    }
}

#[test]
fn coordinate_statistics_are_not_rotation_invariant() {
    let d = dataset(3, 8, 8, 5);
    let q = random_orthogonal(4, 5);
    let rotated = TwoSampleDataset::new(d.group1() * &q, d.group2() * &q).unwrap();
    let moved = |a: f64, b: f64| (a - b).abs() > 1e-6 * a.abs().max(1.0);
    assert!(moved(
        superdiag_stat(&d, 1).unwrap(),
        superdiag_stat(&rotated, 1).unwrap()
    ));
    assert!(moved(
        max_elementwise_stat(&d).unwrap().value,
        max_elementwise_stat(&rotated).unwrap().value
    ));
}
