//! Steady state by time integration from the all-solo state, and sweeps over
//! system size.
//!
//! The fixed point of interest is the limit of the trajectory that starts with
//! every unit solo. Several fixed points can coexist in the simplex, so the
//! steady state is found by integrating forward rather than by root finding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws;
use crate::model::{
    jacobian_unchecked, rhs_unchecked, spectral_radius, Contribution, FixedPoint, PopulationState, Rates, Stability,
    SystemConfig,
};
use crate::ode::{dopri5_step, step_factor, Vec3, STABILITY_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationSettings {
    pub dt_initial: f64,
    pub t_max: f64,
    /// Steady when the max-norm of the right-hand side stays below
    /// `steady_tol * max(1, n)` for two consecutive accepted steps.
    pub steady_tol: f64,
    /// Cap on attempted steps, accepted or rejected.
    pub max_steps: u64,
    pub rtol: f64,
    pub atol: f64,
    /// Allowed conservation defect and negative excursion, relative to `n`.
    pub simplex_tol: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            dt_initial: 1e-3,
            t_max: 1e6,
            steady_tol: 1e-9,
            max_steps: 10_000_000,
            rtol: 1e-8,
            atol: 1e-10,
            simplex_tol: 1e-9,
        }
    }
}

impl IntegrationSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_initial", self.dt_initial),
            ("t_max", self.t_max),
            ("steady_tol", self.steady_tol),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("simplex_tol", self.simplex_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// A fixed point together with integration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOutcome {
    pub fixed_point: FixedPoint,
    /// Time at which the steady-state test passed.
    pub t: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// Largest `|s + g + f - n|` seen at any accepted step.
    pub max_conservation_defect: f64,
    /// Smallest population component seen at any accepted step, before clamping.
    pub min_population: f64,
}

/// Integrates from `(n, 0, 0)` until the right-hand side vanishes.
pub fn integrate_to_steady(cfg: &SystemConfig, settings: &IntegrationSettings) -> Result<FixedPoint> {
    integrate_to_steady_traced(cfg, settings).map(|o| o.fixed_point)
}

/// Like [`integrate_to_steady`], also returning step counts and the worst
/// conservation and positivity excursions over the whole trajectory.
pub fn integrate_to_steady_traced(cfg: &SystemConfig, settings: &IntegrationSettings) -> Result<SteadyOutcome> {
    cfg.validate()?;
    settings.validate()?;
    let n = cfg.n;
    let rates = cfg.rates;

    if rates.is_zero() {
        let fixed_point = FixedPoint {
            s_star: n,
            g_star: 0.0,
            f_star: 0.0,
            stability: Stability::Stable,
            residual: 0.0,
        };
        return Ok(SteadyOutcome {
            fixed_point,
            t: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
            max_conservation_defect: 0.0,
            min_population: 0.0,
        });
    }

    let rhs = |y: &Vec3| -> Vec3 {
        let (ds, dg, df) = rhs_unchecked(&rates, y[0], y[1], y[2]);
        [ds, dg, df]
    };
    let threshold = settings.steady_tol * n.max(1.0);
    let simplex_slack = settings.simplex_tol * n;
    let stiff_cap = |y: &Vec3| {
        let rho = spectral_radius(&jacobian_unchecked(&rates, n, y[0], y[2]));
        if rho > 0.0 {
            STABILITY_LIMIT / rho
        } else {
            f64::INFINITY
        }
    };

    let mut y: Vec3 = [n, 0.0, 0.0];
    let mut dy = rhs(&y);
    let mut t = 0.0;
    let mut h = settings.dt_initial.min(stiff_cap(&y));
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut calm_steps = 0u32;
    let mut max_defect = 0.0f64;
    let mut min_pop = 0.0f64;
    let mut residual = max_norm(&dy);

    for _ in 0..settings.max_steps {
        if t >= settings.t_max {
            break;
        }
        h = h.min(settings.t_max - t);
        let trial = dopri5_step(&rhs, &y, &dy, h, settings.rtol, settings.atol);
        let ok = trial.err <= 1.0 && trial.y.iter().all(|v| v.is_finite());
        if ok {
            t += h;
            y = trial.y;
            dy = trial.dy;
            accepted += 1;

            let defect = (y[0] + y[1] + y[2] - n).abs();
            let lowest = y[0].min(y[1]).min(y[2]);
            max_defect = max_defect.max(defect);
            min_pop = min_pop.min(lowest);
            if defect > simplex_slack || lowest < -simplex_slack {
                return Err(Error::NumericalFailure {
                    n,
                    t,
                    detail: format!("state ({}, {}, {}) left the simplex", y[0], y[1], y[2]),
                });
            }

            residual = max_norm(&dy);
            if residual < threshold {
                calm_steps += 1;
                if calm_steps >= 2 {
                    let s = y[0].max(0.0);
                    let g = y[1].max(0.0);
                    let f = y[2].max(0.0);
                    let fixed_point = FixedPoint::assess(cfg, s, g, f, settings.steady_tol)?;
                    return Ok(SteadyOutcome {
                        fixed_point,
                        t,
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                        max_conservation_defect: max_defect,
                        min_population: min_pop,
                    });
                }
            } else {
                calm_steps = 0;
            }
            h = (h * step_factor(trial.err, true)).min(stiff_cap(&y));
        } else {
            rejected += 1;
            h *= if trial.err.is_finite() { step_factor(trial.err, false) } else { 0.1 };
        }
        if h.is_nan() || h <= f64::EPSILON * t.max(1.0) {
            return Err(Error::NumericalFailure { n, t, detail: format!("step size underflow (h = {h:e})") });
        }
    }

    Err(Error::Convergence {
        n,
        last: PopulationState { s: y[0], g: y[1], f: y[2], t },
        residual,
    })
}

fn max_norm(v: &Vec3) -> f64 {
    v[0].abs().max(v[1].abs()).max(v[2].abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: f64,
    pub s_star: f64,
    pub g_star: f64,
    pub f_star: f64,
    pub throughput: f64,
    /// `None` when `c_s = 0`.
    pub speedup: Option<f64>,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn n_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.throughput).collect()
    }
}

fn validate_sizes(n_values: &[f64]) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::InvalidInput("no system sizes given".into()));
    }
    if let Some(bad) = n_values.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
        return Err(Error::InvalidInput(format!("system size must be finite and > 0, got {bad}")));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("system sizes must be strictly increasing".into()));
    }
    Ok(())
}

/// Steady state, throughput and speedup for each `n`. Rows are independent
/// and computed in parallel; the first failing row (in `n` order) is reported.
pub fn sweep(
    rates: &Rates,
    contribution: &Contribution,
    n_values: &[f64],
    settings: &IntegrationSettings,
) -> Result<SweepResult> {
    validate_sizes(n_values)?;
    rates.validate()?;
    contribution.validate()?;
    settings.validate()?;

    let rows: Vec<Result<SweepRow>> = n_values
        .par_iter()
        .map(|&n| {
            let cfg = SystemConfig::new(*rates, *contribution, n)?;
            let fp = integrate_to_steady(&cfg, settings)?;
            Ok(SweepRow {
                n,
                s_star: fp.s_star,
                g_star: fp.g_star,
                f_star: fp.f_star,
                throughput: laws::throughput(&fp, contribution),
                speedup: laws::speedup(&fp, contribution).ok(),
                stability: fp.stability,
            })
        })
        .collect();

    let mut out = Vec::with_capacity(rows.len());
    for (row, &n) in rows.into_iter().zip(n_values) {
        out.push(row.map_err(|e| Error::Sweep { n, source: Box::new(e) })?);
    }
    Ok(SweepResult { rows: out })
}

/// Location and value of an interior throughput maximum, if the curve has one.
///
/// Returns `None` when the maximum sits at either end of the range (the curve
/// is monotone over the sampled sizes). Ties go to the smallest `n`.
pub fn critical_point(n_values: &[f64], throughput: &[f64]) -> Option<(f64, f64)> {
    if n_values.is_empty() || n_values.len() != throughput.len() {
        return None;
    }
    let mut best = 0;
    for (i, &x) in throughput.iter().enumerate() {
        if x > throughput[best] {
            best = i;
        }
    }
    let last = throughput.len() - 1;
    let peak = throughput[best];
    // a plateau within rounding of the peak does not count as retrograde
    let margin = 1e-9 * peak.abs().max(f64::MIN_POSITIVE);
    if best == 0 || best == last || throughput[last] >= peak - margin {
        return None;
    }
    Some((n_values[best], peak))
}

/// Critical size `n_c` and peak throughput of a sweep, or `None` for a monotone curve.
pub fn find_critical_n(sweep: &SweepResult) -> Option<(f64, f64)> {
    critical_point(&sweep.n_values(), &sweep.throughputs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn settings() -> IntegrationSettings {
        IntegrationSettings::default()
    }

    const TABLE1: Rates = Rates::from_array([0.005, 0.1, 0.06, 10.0, 0.15, 0.3, 0.8]);

    #[test]
    fn zero_rates_return_initial_point() {
        let cfg = SystemConfig::new(Rates::zero(), Contribution::default(), 50.0).unwrap();
        let fp = integrate_to_steady(&cfg, &settings()).unwrap();
        assert_eq!((fp.s_star, fp.g_star, fp.f_star), (50.0, 0.0, 0.0));
        assert_eq!(fp.stability, Stability::Stable);
    }

    #[test]
    fn ideal_concurrency_matches_quadratic_root() {
        // 2 k1 s^2 + k4 s - k4 n = 0, positive root
        let (k1, k4, n) = (0.004_f64, 1.0_f64, 100.0_f64);
        let expected = (-k4 + (k4 * k4 + 8.0 * k1 * k4 * n).sqrt()) / (4.0 * k1);
        let cfg = SystemConfig::new(Rates::ideal(k1, k4), Contribution::default(), n).unwrap();
        let fp = integrate_to_steady(&cfg, &settings()).unwrap();
        assert_relative_eq!(fp.s_star, expected, max_relative = 1e-6);
        assert_eq!(fp.f_star, 0.0);
        assert_eq!(fp.stability, Stability::Stable);
    }

    #[test]
    fn trace_reports_conservation() {
        let cfg = SystemConfig::new(TABLE1, Contribution::default(), 80.0).unwrap();
        let out = integrate_to_steady_traced(&cfg, &settings()).unwrap();
        assert!(out.max_conservation_defect <= 1e-9 * 80.0);
        assert!(out.min_population >= -1e-9 * 80.0);
        assert!(out.accepted_steps > 0);
        assert!(out.fixed_point.residual < 1e-9 * 80.0 * 1.0001);
        assert_eq!(out.fixed_point.stability, Stability::Stable);
    }

    #[test]
    fn table1_solo_rises_then_falls() {
        let ns: Vec<f64> = (1..=200).map(f64::from).collect();
        let sw = sweep(&TABLE1, &Contribution::default(), &ns, &settings()).unwrap();
        let s: Vec<f64> = sw.rows.iter().map(|r| r.s_star).collect();
        let peak = s.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(peak > 0 && peak < s.len() - 1);
        assert!(s[s.len() - 1] < s[peak]);
        for r in &sw.rows {
            assert!((r.s_star + r.g_star + r.f_star - r.n).abs() <= 1e-8 * r.n);
        }
    }

    #[test]
    fn convergence_error_when_budget_is_too_small() {
        let cfg = SystemConfig::new(TABLE1, Contribution::default(), 50.0).unwrap();
        let tight = IntegrationSettings { max_steps: 5, ..settings() };
        match integrate_to_steady(&cfg, &tight) {
            Err(Error::Convergence { n, last, .. }) => {
                assert_eq!(n, 50.0);
                assert!((last.total() - 50.0).abs() < 1e-9);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
        let short = IntegrationSettings { t_max: 1e-4, ..settings() };
        assert!(matches!(integrate_to_steady(&cfg, &short), Err(Error::Convergence { .. })));
    }

    #[test]
    fn invalid_settings_rejected() {
        let cfg = SystemConfig::new(TABLE1, Contribution::default(), 5.0).unwrap();
        let bad = IntegrationSettings { steady_tol: 0.0, ..settings() };
        assert!(matches!(integrate_to_steady(&cfg, &bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sweep_ideal_line() {
        let ns: Vec<f64> = (1..=10).map(f64::from).collect();
        let sw = sweep(&Rates::zero(), &Contribution::default(), &ns, &settings()).unwrap();
        for r in &sw.rows {
            assert_eq!(r.speedup, Some(r.n));
            assert_eq!(r.throughput, r.n);
        }
        assert_eq!(find_critical_n(&sw), None);
    }

    #[test]
    fn sweep_rejects_bad_sizes() {
        let c = Contribution::default();
        assert!(sweep(&TABLE1, &c, &[], &settings()).is_err());
        assert!(sweep(&TABLE1, &c, &[2.0, 1.0], &settings()).is_err());
        assert!(sweep(&TABLE1, &c, &[0.0, 1.0], &settings()).is_err());
    }

    #[test]
    fn sweep_annotates_failing_row() {
        let tight = IntegrationSettings { max_steps: 3, ..settings() };
        match sweep(&TABLE1, &Contribution::default(), &[10.0, 20.0], &tight) {
            Err(Error::Sweep { n, source }) => {
                assert_eq!(n, 10.0);
                assert!(matches!(*source, Error::Convergence { .. }));
            }
            other => panic!("expected sweep error, got {other:?}"),
        }
    }

    #[test]
    fn speedup_missing_when_solo_contributes_nothing() {
        let sw = sweep(&TABLE1, &Contribution { c_s: 0.0, c_g: 1.0 }, &[5.0], &settings()).unwrap();
        assert_eq!(sw.rows[0].speedup, None);
        assert!(sw.rows[0].throughput > 0.0);
    }

    #[test]
    fn swarm_curve_peaks_at_minus_b_over_c() {
        let ns: Vec<f64> = (1..=40).map(f64::from).collect();
        let xs: Vec<f64> = ns.iter().map(|n| n * (-0.1 * n).exp()).collect();
        let (nc, _) = critical_point(&ns, &xs).unwrap();
        assert_eq!(nc, 10.0);
    }

    #[test]
    fn critical_point_edge_cases() {
        assert_eq!(critical_point(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), None);
        assert_eq!(critical_point(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(critical_point(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 3.0, 2.0]), Some((2.0, 3.0)));
        assert_eq!(critical_point(&[1.0, 2.0, 3.0], &[1.0, 3.0, 3.0]), None);
        assert_eq!(critical_point(&[], &[]), None);
    }

    #[test]
    fn deterministic() {
        let cfg = SystemConfig::new(TABLE1, Contribution::default(), 33.0).unwrap();
        let a = integrate_to_steady(&cfg, &settings()).unwrap();
        let b = integrate_to_steady(&cfg, &settings()).unwrap();
        assert_eq!(a.s_star.to_bits(), b.s_star.to_bits());
        assert_eq!(a.f_star.to_bits(), b.f_star.to_bits());
    }
}
