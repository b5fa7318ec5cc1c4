mod common;

use common::*;
use ract_core::theory::{diagnostics_table, increments, omega_sq, snr_k, PopulationPair};
use ract_core::{Error, SymmetricMatrix};

fn random_pd(rng: &mut rand_chacha::ChaCha8Rng, p: usize) -> SymmetricMatrix {
    let a = to_matrix(&normal_rows(rng, p, p));
    SymmetricMatrix::new(&a * a.transpose() / p as f64 + nalgebra::DMatrix::identity(p, p) * 0.1).unwrap()
}

#[test]
fn criterion_agrees_with_direct_snr_comparison() {
    let mut rng = rng(99);
    let mut checked = 0;
    while checked < 100 {
        let p = 3 + checked % 4;
        let pop = PopulationPair::new(random_pd(&mut rng, p), random_pd(&mut rng, p), 2.0, 2.0).unwrap();
        let (k1, k2) = (1, 2);
        let inc = match increments(&pop, k1, k2) {
            Ok(inc) => inc,
            Err(Error::IllPosedSubspace { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let lo = snr_k(&pop, k1).unwrap();
        let hi = snr_k(&pop, k2).unwrap();
        assert_eq!(inc.snr_increases, hi.snr >= lo.snr, "{inc:?} {lo:?} {hi:?}");
        checked += 1;
    }
}

#[test]
fn omega_grows_with_k_when_the_difference_is_one_signed() {
    let mut rng = rng(100);
    for _ in 0..50 {
        let p = 5;
        let base = random_pd(&mut rng, p);
        let extra = random_pd(&mut rng, p);
        let pop = PopulationPair::new(base.add(&extra).unwrap(), base, 2.0, 2.0).unwrap();
        let mut prev = 0.0;
        for k in 1..=p {
            let w = omega_sq(&pop, k).unwrap();
            assert!(w >= prev - 1e-10);
            prev = w;
        }
    }
}

#[test]
fn table_rows_are_consistent_with_single_queries() {
    let mut rng = rng(101);
    let pop = PopulationPair::new(random_pd(&mut rng, 4), random_pd(&mut rng, 4), 3.0, 1.5).unwrap();
    for row in diagnostics_table(&pop, 4).unwrap() {
        let single = snr_k(&pop, row.profile.k).unwrap();
        assert_eq!(row.profile, single);
        if let Some(inc) = row.from_first {
            assert_eq!(inc, increments(&pop, 1, row.profile.k).unwrap());
        }
    }
}

#[test]
fn signal_is_the_ky_fan_norm_of_the_difference() {
    let mut rng = rng(102);
    let (a, b) = (random_pd(&mut rng, 5), random_pd(&mut rng, 5));
    let m = |s: &SymmetricMatrix| {
        (0..5)
            .map(|r| (0..5).map(|c| s.get(r, c)).collect())
            .collect::<Vec<Vec<f64>>>()
    };
    let diff = difference(&m(&a), &m(&b));
    let pop = PopulationPair::new(a, b, 2.0, 2.0).unwrap();
    for k in 1..=5 {
        assert_close(snr_k(&pop, k).unwrap().kyfan_signal, ky_fan(&diff, k), 1e-10, "signal");
    }
}
