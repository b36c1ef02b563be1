use mechscale::fit::{fit_dataset, fit_integration_settings, Dataset, FitSpec};
use mechscale::io::{normalize_axis, parse_dataset, NormalizeMode};
use mechscale::laws::fp_ideal_concurrency;
use mechscale::{find_critical_n, presets, sweep, IntegrationSettings};

fn ideal_data() -> Dataset {
    let points = (1..=12)
        .map(|i| {
            let n = (i * 8) as f64;
            (n, fp_ideal_concurrency(0.004, 1.0, n).unwrap().s_star)
        })
        .collect();
    Dataset::new(points, "ideal").unwrap()
}

#[test]
fn noise_free_ideal_concurrency_fit() {
    let data = ideal_data();
    let mut spec = FitSpec::default().with_seed(4);
    for name in ["k2", "k3", "k5", "k6", "k7"] {
        spec = spec.fix(name, 0.0).unwrap();
    }
    let fit = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
    assert!(fit.mse <= 1e-6 * data.max_abs_x().powi(2), "mse {}", fit.mse);
    assert_eq!(fit.rates.k2, 0.0);
    assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn pinned_solo_contribution_uses_first_point() {
    let data = Dataset::new(vec![(1.0, 0.4), (2.0, 0.7), (4.0, 1.1), (8.0, 1.3)], "").unwrap();
    let mut spec = FitSpec { pin_cs_first: true, ..FitSpec::default() };
    spec.de.max_generations = 5;
    let fit = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
    assert_eq!(fit.contribution.c_s, 0.4);
    assert_eq!(fit.contribution.c_g, 0.0);
}

#[test]
fn seeded_fit_is_reproducible() {
    let data = ideal_data();
    let mut spec = FitSpec::default().fix("k5", 0.0).unwrap().fix("k6", 0.0).unwrap().with_seed(9);
    spec.de.max_generations = 8;
    let a = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
    let b = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.objective_evaluations, 15 * 6 * 9);
}

#[test]
fn flat_dataset_still_fits() {
    let data = Dataset::new((1..=6).map(|n| (n as f64, 2.0)).collect(), "flat").unwrap();
    let mut spec = FitSpec::default().with_seed(2);
    spec.de.max_generations = 30;
    let fit = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
    assert!(fit.mse.is_finite() && fit.mse >= 0.0);
}

#[test]
fn sql_preset_rises_then_declines() {
    let p = presets::SQL_SERVER;
    let ns: Vec<f64> = (1..=100).map(f64::from).collect();
    let curve = sweep(&p.rates, &p.contribution, &ns, &IntegrationSettings::default()).unwrap();
    let (n_c, _) = find_critical_n(&curve).expect("interior maximum");
    assert!(n_c > 7.0 && n_c < 100.0);
    let xs = curve.throughputs();
    assert!(xs[6] > xs[0]);
    assert!(xs[99] < xs[n_c as usize - 1]);
}

#[test]
fn normalized_dataset_from_text() {
    let data = parse_dataset("# users,tps\nn,x\n10,5\n20,9\n40,12\n").unwrap();
    let first = normalize_axis(&data, NormalizeMode::FirstToOne).unwrap();
    assert_eq!(first.points()[2], (4.0, 12.0));
    let range = normalize_axis(&data, NormalizeMode::Range1To100).unwrap();
    assert_eq!(range.points()[1].0, 34.0);
}
