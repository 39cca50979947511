use poisson_bkg::sim::{ecdf, sample_dataset, StreamSeed};
use poisson_bkg::{
    cmin_fixed, cmin_joint, fit_constant, fit_joint_constant, profile_bin, profile_bin_slope, wmin, ConstantModel,
    Exposures, FitMethod, OptimizerSettings, PairedDataset, ParentModel,
};
use proptest::prelude::*;

fn counts(max_len: usize) -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    (1..=max_len).prop_flat_map(|n| (prop::collection::vec(0u64..40, n), prop::collection::vec(0u64..40, n)))
}

fn exposures() -> impl Strategy<Value = Exposures> {
    (0.2f64..5.0, 0.2f64..5.0).prop_map(|(s, b)| Exposures::new(s, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validate_is_idempotent((s, b) in counts(12), t in exposures()) {
        let d = PairedDataset::from_counts(s, b, t).unwrap();
        prop_assert_eq!(d.clone().validate().unwrap(), d);
    }

    #[test]
    fn totals_and_joint_fit_ignore_bin_order((s, b) in counts(12), rot in 0usize..12) {
        let n = s.len();
        let mut s2 = s.clone();
        let mut b2 = b.clone();
        s2.rotate_left(rot % n);
        b2.rotate_left(rot % n);
        let d1 = PairedDataset::from_counts(s, b, Exposures::unit()).unwrap();
        let d2 = PairedDataset::from_counts(s2, b2, Exposures::unit()).unwrap();
        prop_assert_eq!(d1.totals(), d2.totals());
        let f1 = fit_joint_constant(&d1).unwrap();
        let f2 = fit_joint_constant(&d2).unwrap();
        prop_assert_eq!(&f1.theta_hat, &f2.theta_hat);
        prop_assert!((f1.statistic - f2.statistic).abs() <= 1e-9 * f1.statistic.max(1.0));
    }

    #[test]
    fn statistics_are_nonnegative((s, b) in counts(8), t in exposures(), theta in 0.0f64..30.0, phi in 0.01f64..30.0) {
        let d = PairedDataset::from_counts(s, b, t).unwrap();
        if let Ok(c) = cmin_joint(&d, &ConstantModel, &[theta], phi) {
            prop_assert!(c >= 0.0);
        }
        if let Ok(c) = cmin_fixed(&d, &ConstantModel, &[theta]) {
            prop_assert!(c >= 0.0);
        }
        if let Ok(w) = wmin(&d, &ConstantModel, &[theta]) {
            prop_assert!(w >= 0.0);
        }
    }

    #[test]
    fn profile_never_above_fixed((s, b) in counts(8), t in exposures(), theta in 0.0f64..30.0) {
        let d = PairedDataset::from_counts(s, b, t).unwrap();
        if let Ok(c) = cmin_fixed(&d, &ConstantModel, &[theta]) {
            let w = wmin(&d, &ConstantModel, &[theta]).unwrap();
            prop_assert!(w <= c + 1e-9 * c.max(1.0), "W={} C={}", w, c);
        }
    }

    #[test]
    fn profiled_background_solves_quadratic(s in 0u64..500, b in 1u64..500, mu in 0.0f64..100.0, t in exposures()) {
        let bh = profile_bin(s, b, mu, t);
        prop_assert!(bh > 0.0);
        let total = t.total();
        let (sf, bf) = (s as f64, b as f64);
        let resid = total * bh * bh + (total * mu - sf - bf) * bh - bf * mu;
        let scale = total * bh * bh + (total * mu + sf + bf) * bh + bf * mu;
        prop_assert!(resid.abs() <= 1e-8 * scale, "resid={} scale={}", resid, scale);
        // first-order condition in b
        let foc = sf / (mu + bh) + bf / bh - total;
        prop_assert!(foc.abs() <= 1e-8 * (sf / (mu + bh) + bf / bh).max(1.0));
    }

    #[test]
    fn empty_background_branch(s in 0u64..100, mu in 0.0f64..100.0, t in exposures()) {
        let bh = profile_bin(s, 0, mu, t);
        let pooled = s as f64 / t.total();
        prop_assert!(bh >= 0.0);
        if mu > pooled { prop_assert_eq!(bh, 0.0); } else { prop_assert!((bh - (pooled - mu)).abs() < 1e-12); }
    }

    #[test]
    fn slope_is_near_minus_half_for_balanced_large_counts(s in 100u64..2000, frac in -0.07f64..0.07, theta in 0.0f64..1.0) {
        let b = ((s as f64) * (1.0 + frac)).round().max(100.0) as u64;
        let u = theta - (s as f64 - b as f64) / 2.0;
        prop_assume!(u.abs() <= 0.04 * ((s * b) as f64).sqrt());
        let slope = profile_bin_slope(s, b, theta, Exposures::unit());
        prop_assert!((slope + 0.5).abs() < 0.02, "slope={}", slope);
    }

    #[test]
    fn fits_respect_boundary_with_empty_background_bin((s, mut b) in counts(8), k in 0usize..8) {
        let n = b.len();
        b[k % n] = 0;
        let d = PairedDataset::from_counts(s, b, Exposures::unit()).unwrap();
        let settings = OptimizerSettings { fixed_nonnegative: false, ..Default::default() };
        let w = fit_constant(FitMethod::Wstat, &d, &settings).unwrap();
        let f = fit_constant(FitMethod::FixedBackground, &d, &settings).unwrap();
        prop_assert!(w.theta_hat[0] >= 0.0);
        prop_assert!(f.theta_hat[0] >= 0.0);
        prop_assert!(w.background_hat.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn wmin_not_above_fixed_cmin_at_optimum((s, b) in counts(10), t in exposures()) {
        let d = PairedDataset::from_counts(s, b, t).unwrap();
        let settings = OptimizerSettings::default();
        let w = fit_constant(FitMethod::Wstat, &d, &settings).unwrap();
        let f = fit_constant(FitMethod::FixedBackground, &d, &settings).unwrap();
        prop_assert!(w.statistic <= f.statistic + 1e-9 * f.statistic.max(1.0), "W={} C={}", w.statistic, f.statistic);
    }

    #[test]
    fn fixed_fit_solves_score_equation((s, b) in counts(10)) {
        let d = PairedDataset::from_counts(s.clone(), b.clone(), Exposures::unit()).unwrap();
        let f = fit_constant(FitMethod::FixedBackground, &d, &OptimizerSettings::default()).unwrap();
        let th = f.theta_hat[0];
        if !f.at_boundary && th > 0.0 {
            let lhs: f64 = s.iter().zip(&b).map(|(&si, &bi)| si as f64 / (th + bi as f64)).sum();
            prop_assert!((lhs - s.len() as f64).abs() < 1e-6, "lhs={}", lhs);
        }
    }

    #[test]
    fn ecdf_hits_order_statistics(mut xs in prop::collection::vec(-1e3f64..1e3, 1..60)) {
        let e = ecdf(&xs, "p").unwrap();
        xs.sort_by(f64::total_cmp);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.probabilities.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*e.probabilities.last().unwrap(), 1.0);
        for (k, &x) in xs.iter().enumerate() {
            // with ties the value is reached at the last of its copies
            let last = xs.iter().rposition(|&v| v == x).unwrap();
            prop_assert_eq!(e.eval(x), (last + 1) as f64 / xs.len() as f64);
            prop_assert!(k <= last);
        }
    }

    #[test]
    fn sampling_is_reproducible(theta in 0.0f64..50.0, beta in 0.0f64..50.0, key in any::<u64>(), stream in any::<u64>()) {
        let p = ParentModel::constant(theta, beta);
        let a = sample_dataset(&p, &ConstantModel, 20, Exposures::unit(), StreamSeed::new(key, stream)).unwrap();
        let b = sample_dataset(&p, &ConstantModel, 20, Exposures::unit(), StreamSeed::new(key, stream)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn slope_far_from_balance_is_not_minus_half() {
    // outside the balanced region the slope leaves the -1/2 band
    let slope = profile_bin_slope(400, 100, 0.5, Exposures::unit());
    assert!((slope + 0.5).abs() > 0.02, "{slope}");
}
