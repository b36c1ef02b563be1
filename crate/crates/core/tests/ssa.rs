use mechscale::ssa::{run_ensemble, SsaSettings};
use mechscale::{integrate_to_steady, Contribution, IntegrationSettings, Rates, SystemConfig};

/// The `table1` preset rates with the pair-interaction rates scaled by `100 / n`,
/// so the mean-field solo fraction is the same at every size.
fn scaled_rates(n: f64) -> Rates {
    let scale = 100.0 / n;
    Rates::from_array([0.005 * scale, 0.1 * scale, 0.06 * scale, 10.0, 0.15 * scale, 0.3 * scale, 0.8])
}

fn relative_gap(n: u64) -> f64 {
    let rates = scaled_rates(n as f64);
    let cfg = SystemConfig::new(rates, Contribution::default(), n as f64).unwrap();
    let s_ode = integrate_to_steady(&cfg, &IntegrationSettings::default()).unwrap().s_star;
    let settings = SsaSettings { t_end: 40.0, seed: 11, record_interval: 0.25 };
    let stats = run_ensemble(n, &rates, &settings, 200).unwrap();
    let s_ssa = stats.tail_mean(10.0).unwrap()[0];
    (s_ssa - s_ode).abs() / s_ode
}

#[test]
fn ensemble_mean_approaches_mean_field_as_size_grows() {
    let gaps: Vec<f64> = [50, 200, 800].into_iter().map(relative_gap).collect();
    println!("relative gaps {gaps:?}");
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 0.02, "{gaps:?}");
}

#[test]
fn variance_is_non_negative_and_zero_at_start() {
    let rates = scaled_rates(60.0);
    let stats = run_ensemble(60, &rates, &SsaSettings { t_end: 5.0, seed: 1, record_interval: 0.5 }, 16).unwrap();
    assert_eq!(stats.variance[0], [0.0; 3]);
    assert!(stats.variance.iter().flatten().all(|v| *v >= 0.0));
    assert!(stats.mean.iter().all(|m| (m.iter().sum::<f64>() - 60.0).abs() < 1e-9));
}
