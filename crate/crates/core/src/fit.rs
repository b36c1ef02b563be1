//! Fitting transition rates to measured throughput curves.
//!
//! The parameter vector is `[k1, k2, k3, k4, k5, k6, k7, c_s]`; `c_g` is pinned.
//! Minimization uses differential evolution (rand/1/bin with dithered `F`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Contribution, Rates, SystemConfig};
use crate::steady::{integrate_to_steady, IntegrationSettings};

pub const PARAM_NAMES: [&str; 8] = ["k1", "k2", "k3", "k4", "k5", "k6", "k7", "c_s"];

pub fn param_index(name: &str) -> Result<usize> {
    PARAM_NAMES.iter().position(|p| *p == name).ok_or_else(|| {
        Error::InvalidInput(format!("unknown parameter '{name}', expected one of {}", PARAM_NAMES.join(", ")))
    })
}

/// Throughput measurements `(n, x)`, sorted by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<(f64, f64)>,
    label: String,
}

impl Dataset {
    /// Sorts by `n`. Requires at least two points, distinct positive `n` and finite `x`.
    pub fn new(mut points: Vec<(f64, f64)>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!("dataset needs at least 2 points, got {}", points.len())));
        }
        for &(n, x) in &points {
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::InvalidInput(format!("dataset n must be finite and > 0, got {n}")));
            }
            if !x.is_finite() {
                return Err(Error::InvalidInput(format!("dataset x must be finite, got {x} at n = {n}")));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("duplicate n = {}", w[0].0)));
        }
        Ok(Self { points, label: label.into() })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_abs_x(&self) -> f64 {
        self.points.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeSettings {
    /// Defaults to 15 times the number of free parameters.
    pub population: Option<usize>,
    pub mutation_min: f64,
    pub mutation_max: f64,
    pub crossover: f64,
    pub max_generations: usize,
    /// Stop once the population's objective std is at most `tol * |mean|`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            population: None,
            mutation_min: 0.5,
            mutation_max: 1.0,
            crossover: 0.7,
            max_generations: 300,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl DeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.mutation_min) || !(self.mutation_min..=2.0).contains(&self.mutation_max) {
            return Err(Error::InvalidInput(format!(
                "mutation range [{}, {}] must satisfy 0 <= min <= max <= 2",
                self.mutation_min, self.mutation_max
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidInput(format!("crossover must be in [0, 1], got {}", self.crossover)));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidInput(format!("tol must be finite and >= 0, got {}", self.tol)));
        }
        if matches!(self.population, Some(p) if p < 4) {
            return Err(Error::InvalidInput("population must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub generations: usize,
    pub converged: bool,
    pub evaluations: usize,
    /// Best objective after initialization and after each generation.
    pub history: Vec<f64>,
}

/// Minimizes `objective` over the box `bounds`.
///
/// Trial vectors for a generation are drawn sequentially from one seeded
/// generator and then evaluated in parallel, so results do not depend on
/// thread scheduling. Non-finite objective values count as `+inf`.
pub fn differential_evolution<F>(bounds: &[(f64, f64)], settings: &DeSettings, objective: F) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    settings.validate()?;
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::InvalidInput("no free parameters to optimize".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidInput(format!("bounds[{i}] = [{lo}, {hi}] is not a finite interval")));
        }
    }

    let size = settings.population.unwrap_or(15 * dim).max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let evaluate = |xs: &[Vec<f64>]| -> Vec<f64> {
        xs.par_iter()
            .map(|x| {
                let v = objective(x);
                if v.is_finite() { v } else { f64::INFINITY }
            })
            .collect()
    };

    let mut pop: Vec<Vec<f64>> =
        (0..size).map(|_| bounds.iter().map(|&b| uniform(&mut rng, b)).collect()).collect();
    let mut values = evaluate(&pop);
    let mut evaluations = size;
    let best_of = |values: &[f64]| {
        values.iter().enumerate().fold(0, |best, (i, v)| if *v < values[best] { i } else { best })
    };
    let mut history = vec![values[best_of(&values)]];
    let mut generations = 0;
    let mut converged = false;

    while generations < settings.max_generations {
        let trials: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                let [r1, r2, r3] = distinct_others(&mut rng, size, i);
                let scale = settings.mutation_min + (settings.mutation_max - settings.mutation_min) * rng.random::<f64>();
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < settings.crossover {
                            let v = pop[r1][j] + scale * (pop[r2][j] - pop[r3][j]);
                            let (lo, hi) = bounds[j];
                            if (lo..=hi).contains(&v) { v } else { uniform(&mut rng, bounds[j]) }
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_values = evaluate(&trials);
        evaluations += size;
        for (i, (trial, value)) in trials.into_iter().zip(trial_values).enumerate() {
            if value <= values[i] {
                pop[i] = trial;
                values[i] = value;
            }
        }
        generations += 1;
        history.push(values[best_of(&values)]);

        let mean = values.iter().sum::<f64>() / size as f64;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / size as f64).sqrt();
        if std <= settings.tol * mean.abs() {
            converged = true;
            break;
        }
    }

    let best = best_of(&values);
    Ok(DeOutcome {
        best: pop[best].clone(),
        best_value: values[best],
        generations,
        converged,
        evaluations,
        history,
    })
}

fn distinct_others(rng: &mut ChaCha8Rng, size: usize, exclude: usize) -> [usize; 3] {
    let mut picked = [exclude; 3];
    for k in 0..3 {
        loop {
            let r = rng.random_range(0..size);
            if r != exclude && !picked[..k].contains(&r) {
                picked[k] = r;
                break;
            }
        }
    }
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSpec {
    /// Search box for `[k1, ..., k7, c_s]`.
    pub bounds: [(f64, f64); 8],
    /// Parameters held at a constant value instead of being searched.
    pub fixed: [Option<f64>; 8],
    pub c_g: f64,
    /// Set `c_s` to the first data point's throughput instead of fitting it.
    pub pin_cs_first: bool,
    /// Objective value for candidates whose integration fails. `None` picks a
    /// value above any attainable mean squared error, at least `1e6 * max|x|^2`.
    pub penalty: Option<f64>,
    pub de: DeSettings,
}

impl Default for FitSpec {
    fn default() -> Self {
        let mut bounds = [(0.0, 10.0); 8];
        bounds[7] = (1e-9, 10.0);
        Self { bounds, fixed: [None; 8], c_g: 0.0, pin_cs_first: false, penalty: None, de: DeSettings::default() }
    }
}

impl FitSpec {
    pub fn fix(mut self, name: &str, value: f64) -> Result<Self> {
        self.fixed[param_index(name)?] = Some(value);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.de.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidInput(format!("bounds for {} = [{lo}, {hi}] are invalid", PARAM_NAMES[i])));
            }
        }
        for (i, v) in self.fixed.iter().enumerate() {
            if let Some(v) = v {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidInput(format!("fixed {} must be finite and >= 0, got {v}", PARAM_NAMES[i])));
                }
            }
        }
        if !(self.c_g.is_finite() && self.c_g >= 0.0) {
            return Err(Error::InvalidInput(format!("c_g must be finite and >= 0, got {}", self.c_g)));
        }
        if let Some(p) = self.penalty {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidInput(format!("penalty must be finite and > 0, got {p}")));
            }
        }
        if self.free_indices().is_empty() {
            return Err(Error::InvalidInput("every parameter is fixed; nothing to fit".into()));
        }
        self.de.validate()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..8).filter(|&i| self.fixed[i].is_none() && !(i == 7 && self.pin_cs_first)).collect()
    }

    /// Penalty used for `data`.
    pub fn penalty_for(&self, data: &Dataset) -> f64 {
        if let Some(p) = self.penalty {
            return p;
        }
        let m = data.max_abs_x();
        let n_max = data.points().last().map_or(1.0, |p| p.0);
        let c_max = self.bounds[7].1.max(self.fixed[7].unwrap_or(0.0)).max(self.c_g);
        let worst = c_max * n_max + m;
        (1e6 * m * m).max(4.0 * worst * worst).max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub rates: Rates,
    pub contribution: Contribution,
    pub mse: f64,
    pub generations_used: usize,
    pub converged: bool,
    pub objective_evaluations: usize,
    pub history: Vec<f64>,
}

/// Integration settings for objective evaluations: the defaults with a
/// tighter step budget so pathological candidates fail fast.
pub fn fit_integration_settings() -> IntegrationSettings {
    IntegrationSettings { max_steps: 100_000, ..IntegrationSettings::default() }
}

fn split_params(params: &[f64; 8], c_g: f64) -> (Rates, Contribution) {
    let mut k = [0.0; 7];
    k.copy_from_slice(&params[..7]);
    (Rates::from_array(k), Contribution { c_s: params[7], c_g })
}

/// Mean squared error of the model curve against `data`, or the configured
/// penalty if any point fails to integrate.
pub fn objective_mse(params: &[f64; 8], data: &Dataset, spec: &FitSpec, settings: &IntegrationSettings) -> f64 {
    let penalty = spec.penalty_for(data);
    let (rates, contribution) = split_params(params, spec.c_g);
    let mut sum = 0.0;
    for &(n, x) in data.points() {
        let Ok(cfg) = SystemConfig::new(rates, contribution, n) else { return penalty };
        let Ok(fp) = integrate_to_steady(&cfg, settings) else { return penalty };
        let model = contribution.c_s * fp.s_star + contribution.c_g * fp.g_star;
        sum += (model - x).powi(2);
    }
    let mse = sum / data.len() as f64;
    if mse.is_finite() { mse } else { penalty }
}

pub fn fit_dataset(data: &Dataset, spec: &FitSpec, settings: &IntegrationSettings) -> Result<FitResult> {
    spec.validate()?;
    settings.validate()?;
    let mut template = [0.0; 8];
    for (i, v) in spec.fixed.iter().enumerate() {
        template[i] = v.unwrap_or(0.0);
    }
    if spec.pin_cs_first {
        let first = data.points()[0].1;
        if first < 0.0 {
            return Err(Error::InvalidInput(format!("cannot pin c_s to negative first throughput {first}")));
        }
        template[7] = first;
    }
    let free = spec.free_indices();
    let bounds: Vec<_> = free.iter().map(|&i| spec.bounds[i]).collect();
    let expand = |x: &[f64]| {
        let mut full = template;
        for (&i, &v) in free.iter().zip(x) {
            full[i] = v;
        }
        full
    };

    let outcome = differential_evolution(&bounds, &spec.de, |x| objective_mse(&expand(x), data, spec, settings))?;
    let (rates, contribution) = split_params(&expand(&outcome.best), spec.c_g);
    Ok(FitResult {
        rates,
        contribution,
        mse: outcome.best_value,
        generations_used: outcome.generations,
        converged: outcome.converged,
        objective_evaluations: outcome.evaluations,
        history: outcome.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(ns: &[f64], slope: f64) -> Dataset {
        Dataset::new(ns.iter().map(|&n| (n, slope * n)).collect(), "line").unwrap()
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(vec![(1.0, 1.0)], "").is_err());
        assert!(Dataset::new(vec![(1.0, 1.0), (1.0, 2.0)], "").is_err());
        assert!(Dataset::new(vec![(0.0, 1.0), (1.0, 2.0)], "").is_err());
        assert!(Dataset::new(vec![(1.0, f64::NAN), (2.0, 2.0)], "").is_err());
        let d = Dataset::new(vec![(3.0, 1.0), (1.0, 2.0)], "x").unwrap();
        assert_eq!(d.points(), &[(1.0, 2.0), (3.0, 1.0)]);
    }

    #[test]
    fn parabola_minimum() {
        let settings = DeSettings { population: Some(20), max_generations: 200, seed: 7, ..Default::default() };
        let out = differential_evolution(&[(0.0, 10.0)], &settings, |x| (x[0] - 3.0).powi(2)).unwrap();
        assert!((out.best[0] - 3.0).abs() < 1e-3, "{:?}", out.best);
        let again = differential_evolution(&[(0.0, 10.0)], &settings, |x| (x[0] - 3.0).powi(2)).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn rosenbrock_bowl() {
        let settings = DeSettings { seed: 1, ..Default::default() };
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = differential_evolution(&[(-2.0, 2.0), (-1.0, 3.0)], &settings, rosen).unwrap();
        assert!(out.best_value < 1e-4, "{}", out.best_value);
    }

    #[test]
    fn best_value_never_increases() {
        let settings = DeSettings { max_generations: 50, seed: 3, ..Default::default() };
        let out = differential_evolution(&[(-5.0, 5.0); 3], &settings, |x| x.iter().map(|v| v.abs().sqrt()).sum()).unwrap();
        assert_eq!(out.history.len(), out.generations + 1);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn candidates_stay_in_bounds(lo in -10.0f64..0.0, width in 0.0f64..5.0, seed in any::<u64>()) {
            let bounds = [(lo, lo + width), (0.0, 1.0)];
            let settings = DeSettings { max_generations: 10, seed, ..Default::default() };
            differential_evolution(&bounds, &settings, |x| {
                assert!(bounds.iter().zip(x).all(|(&(a, b), v)| a <= *v && *v <= b), "{x:?}");
                x[0] * x[1]
            })
            .unwrap();
        }
    }

    #[test]
    fn objective_is_zero_on_ideal_line() {
        let data = line(&[1.0, 2.0, 5.0, 10.0], 1.0);
        let spec = FitSpec::default();
        let mse = objective_mse(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &data, &spec, &fit_integration_settings());
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn objective_scales_with_contribution_error() {
        let ns = [1.0, 2.0, 5.0, 10.0];
        let data = line(&ns, 1.0);
        let delta = 0.25;
        let mse = objective_mse(
            &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 + delta],
            &data,
            &FitSpec::default(),
            &fit_integration_settings(),
        );
        let mean_sq = ns.iter().map(|n| n * n).sum::<f64>() / ns.len() as f64;
        assert!((mse - delta * delta * mean_sq).abs() < 1e-12);
    }

    #[test]
    fn failed_integration_costs_penalty() {
        let data = line(&[1.0, 2.0], 1.0);
        let spec = FitSpec { penalty: Some(123.0), ..Default::default() };
        let tight = IntegrationSettings { max_steps: 1, ..IntegrationSettings::default() };
        let mse = objective_mse(&[0.1, 0.1, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &data, &spec, &tight);
        assert_eq!(mse, 123.0);
    }

    #[test]
    fn default_penalty_exceeds_any_model_error() {
        let data = line(&[1.0, 100.0], 0.01);
        let spec = FitSpec::default();
        let p = spec.penalty_for(&data);
        assert!(p >= 1e6 * 1.0);
        assert!(p > (10.0 * 100.0 + 1.0_f64).powi(2));
    }

    #[test]
    fn spec_validation() {
        assert!(FitSpec::default().fix("k9", 0.0).is_err());
        let mut all = FitSpec::default();
        for name in PARAM_NAMES {
            all = all.fix(name, 0.0).unwrap();
        }
        assert!(all.validate().is_err());
        let spec = FitSpec::default().fix("k5", 0.0).unwrap().fix("k6", 0.0).unwrap();
        assert_eq!(spec.free_indices(), vec![0, 1, 2, 3, 6, 7]);
        let pinned = FitSpec { pin_cs_first: true, ..spec };
        assert_eq!(pinned.free_indices(), vec![0, 1, 2, 3, 6]);
    }

    #[test]
    fn recovers_ideal_line_contribution() {
        let data = line(&[1.0, 2.0, 4.0, 8.0, 16.0], 0.5);
        let mut spec = FitSpec::default().with_seed(11);
        for name in ["k1", "k2", "k3", "k4", "k5", "k6", "k7"] {
            spec = spec.fix(name, 0.0).unwrap();
        }
        let fit = fit_dataset(&data, &spec, &fit_integration_settings()).unwrap();
        assert!((fit.contribution.c_s - 0.5).abs() < 1e-4, "{}", fit.contribution.c_s);
        assert!(fit.mse < 1e-6);
    }
}
