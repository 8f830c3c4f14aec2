use barfima::fracdiff::{c_coeffs, pi_coeffs};
use barfima::mc::{aggregate, reference_truth, run_design, run_replicate, McDesign, McReport, Scenario, Statistic};
use barfima::special::reg_inc_beta;
use barfima::{beta_inverse_cdf, forecast::forecast_with, simulate, ForecastRequest, Link, ModelSpec, ParamVector, Sample, SimConfig};
use proptest::prelude::*;

fn any_link() -> impl Strategy<Value = Link> {
    prop_oneof![Just(Link::Logit), Just(Link::Probit), Just(Link::Cloglog), Just(Link::Loglog)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laurent_coefficients_reduce(d in -0.49f64..0.49, theta in -0.9f64..0.9) {
        let pi = pi_coeffs(d, 60);
        prop_assert_eq!(c_coeffs(&[], d, 60), pi.clone());
        let c = c_coeffs(&[theta], d, 60);
        for k in 1..=60 {
            prop_assert!((c[k] - (pi[k] + theta * pi[k - 1])).abs() < 1e-15);
        }
        let short = c_coeffs(&[theta, 0.25], 0.0, 10);
        prop_assert_eq!(&short[..4], &[1.0, theta, 0.25, 0.0]);
    }

    #[test]
    fn link_round_trip(link in any_link(), mu in 1e-6f64..(1.0 - 1e-6)) {
        let back = link.inverse(link.forward(mu));
        prop_assert!((back - mu).abs() <= 1e-12 * mu.min(1.0 - mu).max(1e-3), "{link}: {mu} -> {back}");
    }

    #[test]
    fn beta_quantile_inverts_the_cdf(u in 1e-6f64..(1.0 - 1e-6), a in 0.5f64..80.0, b in 0.5f64..80.0) {
        let x = beta_inverse_cdf(u, a, b).unwrap();
        prop_assert!(x > 0.0 && x < 1.0);
        prop_assert!((reg_inc_beta(x, a, b).unwrap() - u).abs() < 1e-10);
    }

    #[test]
    fn samples_and_forecasts_stay_in_the_unit_interval(
        seed in 0u64..1000,
        d in -0.4f64..0.45,
        alpha in -1.5f64..1.5,
        phi in -0.7f64..0.7,
        theta in -0.7f64..0.7,
        nu in 5.0f64..200.0,
    ) {
        let spec = ModelSpec::new(1, 1, 0).with_truncation(30);
        let params = ParamVector::new(nu, d, alpha, vec![], vec![phi], vec![theta]);
        let sample = simulate(&SimConfig::new(spec.clone(), params.clone(), 120, seed).with_burn_in(60)).unwrap();
        prop_assert!(sample.y().iter().all(|&y| y > 0.0 && y < 1.0));
        let f = forecast_with(&spec, &params, &sample, &ForecastRequest::new(5)).unwrap();
        prop_assert!(f.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn short_memory_forecasts_ignore_distant_data(seed in 0u64..1000, shift in -2.0f64..2.0) {
        let spec = ModelSpec::new(2, 0, 0).with_truncation(20);
        let params = ParamVector::new(30.0, 0.0, 0.1, vec![], vec![0.5, -0.2], vec![]);
        let sample = simulate(&SimConfig::new(spec.clone(), params.clone(), 50, seed).with_burn_in(40)).unwrap();
        let link = Link::Logit;
        let mut y = sample.y().to_vec();
        for v in &mut y[..48] {
            *v = link.inverse(link.forward(*v) + shift);
        }
        let perturbed = Sample::univariate(y).unwrap();
        let req = ForecastRequest::new(4);
        prop_assert_eq!(
            forecast_with(&spec, &params, &sample, &req).unwrap(),
            forecast_with(&spec, &params, &perturbed, &req).unwrap()
        );
    }

    #[test]
    fn mse_is_variance_plus_squared_bias(draws in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 2..40)) {
        let names = vec!["a".to_string(), "b".to_string()];
        for cell in aggregate("s", 10, &names, &[0.5, -1.0], &draws) {
            let bias = cell.mean - cell.truth;
            prop_assert!((cell.mse - (cell.var + bias * bias)).abs() < 1e-10 * (1.0 + cell.mse));
        }
    }
}

#[test]
fn precision_shrinks_sample_variance() {
    let spec = ModelSpec::new(0, 0, 0).with_truncation(5);
    let mean_var = |nu: f64| {
        (0..100)
            .map(|r| {
                let p = ParamVector::new(nu, 0.0, 0.3, vec![], vec![], vec![]);
                let y = simulate(&SimConfig::new(spec.clone(), p, 200, r).with_burn_in(10)).unwrap().y().to_vec();
                let m = y.iter().sum::<f64>() / y.len() as f64;
                y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64
            })
            .sum::<f64>()
            / 100.0
    };
    let v = [mean_var(10.0), mean_var(40.0), mean_var(160.0)];
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
}

#[test]
fn extra_replicates_leave_earlier_ones_unchanged() {
    let (spec, truth) = reference_truth(0.2, 40.0);
    let spec = spec.with_truncation(30);
    let short = Scenario::new("s", spec.clone(), truth.clone(), vec![200], 2, 77).with_tests(vec![Statistic::Lr, Statistic::Z]);
    let long = Scenario::new("s", spec, truth, vec![200], 4, 77).with_tests(vec![Statistic::Lr, Statistic::Z]);
    for i in 0..2 {
        assert_eq!(run_replicate(&short, 200, i), run_replicate(&long, 200, i));
    }
    assert_ne!(run_replicate(&long, 200, 2).seed, run_replicate(&long, 200, 3).seed);
}

#[test]
fn report_csv_round_trip() {
    let (spec, truth) = reference_truth(0.2, 40.0);
    let sc = Scenario::new("toy", spec.with_truncation(30), truth, vec![150, 250], 3, 5).with_tests(vec![Statistic::Lr, Statistic::Z, Statistic::Score]);
    let report = run_design(&McDesign { scenarios: vec![sc] }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write_csv(dir.path()).unwrap();
    assert_eq!(McReport::read_csv(dir.path()).unwrap(), report);
    assert!(report.rejections.iter().all(|c| (0.0..=1.0).contains(&c.rate)));
    let text = report.summarize();
    assert_eq!(text.matches("Scenario toy, n = ").count(), 2 + report.failures.iter().filter(|f| f.failed > 0).count());
}
