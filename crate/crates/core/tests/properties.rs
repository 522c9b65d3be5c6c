use compound_ld::config::{parse_config, ExperimentConfig};
use compound_ld::counting::CountingModel;
use compound_ld::dual::{DualVector, ExtendedReal};
use compound_ld::montecarlo::{simulate_compound, Seeds};
use compound_ld::summand::SummandModel;
use compound_ld::variational::{
    rate_ld_explicit, rate_md_centered_sum, rate_md_centered_summands, RateQuery,
};
use proptest::prelude::*;

fn counting() -> impl Strategy<Value = CountingModel> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|r| CountingModel::poisson(r).unwrap()),
        (0.3f64..1.0, 0.2f64..3.0)
            .prop_map(|(nu, l)| CountingModel::fractional_poisson(nu, l).unwrap()),
        (0.05f64..0.95).prop_map(|p| CountingModel::bernoulli_constant(p).unwrap()),
        (0.2f64..3.0, 0.2f64..2.0).prop_map(|(l, c)| CountingModel::bernoulli_runs(l, c).unwrap()),
        (0.2f64..4.0).prop_map(|r| CountingModel::renewal_exponential(r).unwrap()),
    ]
}

fn summand() -> impl Strategy<Value = SummandModel> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|p| SummandModel::rademacher(p).unwrap()),
        (-2.0f64..2.0, 0.1f64..3.0).prop_map(|(m, v)| SummandModel::gaussian(
            vec![m],
            vec![vec![v]]
        )
        .unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counting_cgf_is_convex_and_vanishes_at_zero(m in counting(), eta in -4.0f64..4.0) {
        let h = 1e-2;
        let f = |e: f64| m.cgf_n_limit(e).unwrap();
        prop_assert!(f(0.0).abs() < 1e-12);
        let second = f(eta + h) - 2.0 * f(eta) + f(eta - h);
        prop_assert!(second >= -1e-9 * f(eta).abs().max(1.0), "second difference {second}");
        prop_assert!(f(eta + h) >= f(eta) - 1e-12);
    }

    #[test]
    fn count_rate_is_nonnegative_and_zero_at_mean(m in counting(), y in 0.01f64..3.0) {
        let v = m.rate_n(y).unwrap();
        prop_assert!(v.to_f64() >= -1e-10, "{v:?}");
        let d1 = m.derivs_at_zero().unwrap().d1;
        prop_assert!(m.rate_n(d1).unwrap().to_f64().abs() < 1e-8);
    }

    #[test]
    fn ld_rate_is_nonnegative(mx in summand(), mn in counting(), x in -3.0f64..3.0, y in 0.0f64..3.0) {
        let v = rate_ld_explicit(&mx, &mn, &RateQuery::new(vec![x], y).unwrap()).unwrap();
        prop_assert!(v.to_f64() >= -1e-10, "{v:?}");
    }

    #[test]
    fn ld_rate_vanishes_at_limit_point(mx in summand(), mn in counting()) {
        let d1 = mn.derivs_at_zero().unwrap().d1;
        let mu = mx.mean().coords()[0];
        let v = rate_ld_explicit(&mx, &mn, &RateQuery::new(vec![d1 * mu], d1).unwrap()).unwrap();
        prop_assert!(v.to_f64().abs() < 1e-7, "{v:?}");
    }

    #[test]
    fn md_rates_are_even_quadratics(mx in summand(), mn in counting(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let q = RateQuery::new(vec![x], y).unwrap();
        let neg = RateQuery::new(vec![-x], -y).unwrap();
        let dbl = RateQuery::new(vec![2.0 * x], 2.0 * y).unwrap();
        for f in [rate_md_centered_summands, rate_md_centered_sum] {
            let a = f(&mx, &mn, &q).unwrap().to_f64();
            prop_assert!(a >= 0.0);
            prop_assert!((a - f(&mx, &mn, &neg).unwrap().to_f64()).abs() <= 1e-12 * a.max(1.0));
            prop_assert!((4.0 * a - f(&mx, &mn, &dbl).unwrap().to_f64()).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn simulation_ignores_worker_count(seed in any::<u64>(), reps in 1usize..2500, workers in 2usize..6) {
        let mx = SummandModel::rademacher(0.4).unwrap();
        let mn = CountingModel::poisson(1.2).unwrap();
        let a = simulate_compound(&mx, &mn, 20, reps, Seeds::from_master(seed), 1).unwrap();
        let b = simulate_compound(&mx, &mn, 20, reps, Seeds::from_master(seed), workers).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn derived_streams_differ(seed in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        let s = Seeds::from_master(seed);
        prop_assert_ne!(s.derive(i), s.derive(j));
        prop_assert_ne!(s.derive(i).counting, s.derive(i).summand);
    }

    #[test]
    fn extended_real_json_round_trip(v in prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(ExtendedReal::Finite),
        Just(ExtendedReal::PosInf),
        Just(ExtendedReal::NegInf),
    ]) {
        let text = serde_json::to_string(&v).unwrap();
        prop_assert_eq!(serde_json::from_str::<ExtendedReal>(&text).unwrap(), v);
    }

    #[test]
    fn config_round_trip(rate in 0.01f64..10.0, p in 0.0f64..1.0, ys in prop::collection::vec(-5.0f64..5.0, 1..6), seed in any::<u64>()) {
        let text = format!(
            "[summand]\nkind = \"rademacher\"\np = {p:?}\n[counting]\nkind = \"poisson\"\nrate = {rate:?}\n\
             [experiment]\nkind = \"clt-check\"\nn = 10\nv = [1.0]\nseed = {seed}\n"
        );
        let cfg = parse_config(&text).unwrap();
        let again: ExperimentConfig = parse_config(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&again, &cfg);
        let grid = format!(
            "[summand]\nkind = \"rademacher\"\n[counting]\nkind = \"poisson\"\nrate = {rate:?}\n\
             [experiment]\nkind = \"rate-eval\"\nxs = [[0.5]]\nys = {ys:?}\n"
        );
        let cfg = parse_config(&grid).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}

#[test]
fn tilted_summand_mean_moves_along_gradient() {
    let mx = SummandModel::rademacher(0.3).unwrap();
    let theta = DualVector::new(vec![0.7]).unwrap();
    let t = mx.tilted(&theta).unwrap();
    let g = mx.cgf_gradient(&theta).unwrap();
    assert!((t.mean().coords()[0] - g.coords()[0]).abs() < 1e-14);
}
