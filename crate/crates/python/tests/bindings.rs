use compound_ld::counting::CountingModel;
use compound_ld::summand::SummandModel;
use compound_ld_py::{
    enumerate_exact, mittag_leffler, rate_ld, rate_md_sum, PyCounting, PySummand,
};

fn models() -> (PySummand, PyCounting) {
    (
        PySummand {
            inner: SummandModel::rademacher(0.5).unwrap(),
        },
        PyCounting {
            inner: CountingModel::poisson(1.0).unwrap(),
        },
    )
}

#[test]
fn rates_match_the_core_crate() {
    let (x, n) = models();
    let i = rate_ld(&x, &n, vec![0.0], 2.0, false).unwrap();
    // Λ_X*(0) = 0 for the symmetric sign, so only the count part remains.
    assert!((i - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9);
    assert!(rate_ld(&x, &n, vec![3.0], 1.0, false)
        .unwrap()
        .is_infinite());
    assert!((rate_md_sum(&x, &n, vec![1.0], 0.0).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn exact_enumeration_and_mittag_leffler() {
    let x = PySummand {
        inner: SummandModel::rademacher(0.5).unwrap(),
    };
    let n = PyCounting {
        inner: CountingModel::bernoulli_constant(0.5).unwrap(),
    };
    assert_eq!(
        enumerate_exact(&x, &n, 6, "sum", 0.5, None).unwrap(),
        299.0 / 4096.0
    );
    assert!((mittag_leffler(1.0, 1.0, 2.0).unwrap() - 2f64.exp()).abs() < 1e-12);
    assert!(mittag_leffler(1.5, 1.0, 2.0).is_err());
}
