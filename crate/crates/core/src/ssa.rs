//! Exact stochastic simulation of the seven reactions at integer population
//! counts.
//!
//! Same-species pair reactions fire with propensity `k·x·(x-1)` and consume two
//! units, so the mean flux approaches the `2k·x²` term of the mean-field ODE as
//! the population grows. Rates act on raw counts; there is no volume factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Rates;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub s: u64,
    pub g: u64,
    pub f: u64,
    pub t: f64,
}

impl DiscreteState {
    pub const fn all_solo(n: u64) -> Self {
        Self { s: n, g: 0, f: 0, t: 0.0 }
    }

    pub fn total(&self) -> u64 {
        self.s + self.g + self.f
    }

    fn counts(&self) -> [u64; 3] {
        [self.s, self.g, self.f]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsaSettings {
    pub t_end: f64,
    pub seed: u64,
    pub record_interval: f64,
}

impl Default for SsaSettings {
    fn default() -> Self {
        Self { t_end: 50.0, seed: 0, record_interval: 0.5 }
    }
}

impl SsaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidInput(format!("t_end must be positive and finite, got {}", self.t_end)));
        }
        if !(self.record_interval.is_finite() && self.record_interval > 0.0) {
            return Err(Error::InvalidInput(format!(
                "record_interval must be positive and finite, got {}",
                self.record_interval
            )));
        }
        Ok(())
    }

    /// Sample times `0, Δ, 2Δ, …` up to and including `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = (self.t_end / self.record_interval * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|i| i as f64 * self.record_interval).collect()
    }
}

/// Propensities of the seven reactions, in order
/// `S+S→G+G`, `S+G→G+G`, `S+F→G+F`, `G→S`, `G+G→F+F`, `G+F→F+F`, `F→G`.
pub fn propensities(state: &DiscreteState, rates: &Rates) -> [f64; 7] {
    let s = state.s as f64;
    let g = state.g as f64;
    let f = state.f as f64;
    [
        rates.k1 * s * (s - 1.0).max(0.0),
        rates.k2 * s * g,
        rates.k3 * s * f,
        rates.k4 * g,
        rates.k5 * g * (g - 1.0).max(0.0),
        rates.k6 * g * f,
        rates.k7 * f,
    ]
}

fn apply(state: &DiscreteState, reaction: usize, t: f64) -> DiscreteState {
    let DiscreteState { mut s, mut g, mut f, .. } = *state;
    match reaction {
        0 => {
            s -= 2;
            g += 2;
        }
        1 | 2 => {
            s -= 1;
            g += 1;
        }
        3 => {
            g -= 1;
            s += 1;
        }
        4 => {
            g -= 2;
            f += 2;
        }
        5 => {
            g -= 1;
            f += 1;
        }
        6 => {
            f -= 1;
            g += 1;
        }
        _ => unreachable!("only seven reactions"),
    }
    DiscreteState { s, g, f, t }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Fired { state: DiscreteState, wait: f64, reaction: usize },
    /// Total propensity is zero; no further events can occur.
    Absorbed,
}

pub fn step<R: Rng + ?Sized>(state: &DiscreteState, rates: &Rates, rng: &mut R) -> Step {
    let a = propensities(state, rates);
    let total: f64 = a.iter().sum();
    if total <= 0.0 {
        return Step::Absorbed;
    }
    let wait = rng.sample::<f64, _>(Exp1) / total;
    let target = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut reaction = a.iter().rposition(|&x| x > 0.0).expect("positive total");
    for (j, &aj) in a.iter().enumerate() {
        cumulative += aj;
        if aj > 0.0 && target < cumulative {
            reaction = j;
            break;
        }
    }
    Step::Fired { state: apply(state, reaction, state.t + wait), wait, reaction }
}

/// Counts `(s, g, f)` sampled at `SsaSettings::sample_times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[u64; 3]>,
    pub events: u64,
}

/// Generator for run `run` of an ensemble seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Simulates one trajectory from `(n, 0, 0)`, calling `on_event` after every reaction.
pub fn simulate<R: Rng + ?Sized>(
    n: u64,
    rates: &Rates,
    settings: &SsaSettings,
    rng: &mut R,
    mut on_event: impl FnMut(&DiscreteState),
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    rates.validate()?;
    settings.validate()?;

    let times = settings.sample_times();
    let mut states = Vec::with_capacity(times.len());
    let mut state = DiscreteState::all_solo(n);
    let mut events = 0;

    while states.len() < times.len() {
        match step(&state, rates, rng) {
            Step::Absorbed => break,
            Step::Fired { state: next, .. } => {
                while states.len() < times.len() && times[states.len()] < next.t {
                    states.push(state.counts());
                }
                if next.t > settings.t_end {
                    break;
                }
                state = next;
                events += 1;
                on_event(&state);
            }
        }
    }
    states.resize(times.len(), state.counts());
    Ok(Trajectory { times, states, events })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: u64,
    pub runs: usize,
    pub times: Vec<f64>,
    /// Mean of `(s, g, f)` over runs at each sample time.
    pub mean: Vec<[f64; 3]>,
    /// Population variance (divided by `runs`) at each sample time.
    pub variance: Vec<[f64; 3]>,
}

impl EnsembleStats {
    /// Time average of the ensemble mean over samples with `t >= from`.
    pub fn tail_mean(&self, from: f64) -> Option<[f64; 3]> {
        let tail: Vec<_> = self.times.iter().zip(&self.mean).filter(|(t, _)| **t >= from).map(|(_, m)| m).collect();
        if tail.is_empty() {
            return None;
        }
        let mut acc = [0.0; 3];
        for m in &tail {
            for i in 0..3 {
                acc[i] += m[i];
            }
        }
        Some(acc.map(|x| x / tail.len() as f64))
    }
}

/// Runs `runs` independent trajectories in parallel; run `i` uses `run_rng(settings.seed, i)`.
pub fn run_ensemble(n: u64, rates: &Rates, settings: &SsaSettings, runs: usize) -> Result<EnsembleStats> {
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be at least 1".into()));
    }
    let trajectories: Vec<Trajectory> = (0..runs as u64)
        .into_par_iter()
        .map(|i| simulate(n, rates, settings, &mut run_rng(settings.seed, i), |_| {}))
        .collect::<Result<_>>()?;

    let times = trajectories[0].times.clone();
    let count = runs as f64;
    let mut mean = vec![[0.0; 3]; times.len()];
    let mut variance = vec![[0.0; 3]; times.len()];
    for (k, (m, v)) in mean.iter_mut().zip(variance.iter_mut()).enumerate() {
        for tr in &trajectories {
            for (acc, &x) in m.iter_mut().zip(&tr.states[k]) {
                *acc += x as f64;
            }
        }
        *m = m.map(|x| x / count);
        for tr in &trajectories {
            for ((acc, &x), mu) in v.iter_mut().zip(&tr.states[k]).zip(m.iter()) {
                *acc += (x as f64 - mu).powi(2);
            }
        }
        *v = v.map(|x| x / count);
    }
    Ok(EnsembleStats { n, runs, times, mean, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::fp_ideal_concurrency;
    use proptest::prelude::*;

    fn state(s: u64, g: u64, f: u64) -> DiscreteState {
        DiscreteState { s, g, f, t: 0.0 }
    }

    #[test]
    fn propensity_examples() {
        let r = Rates { k1: 1.0, ..Rates::zero() };
        assert_eq!(propensities(&state(3, 2, 1), &r), [6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let all = Rates::from_array([1.0; 7]);
        assert_eq!(propensities(&state(1, 0, 0), &all).iter().sum::<f64>(), 0.0);
        assert_eq!(propensities(&state(7, 3, 2), &Rates::zero()), [0.0; 7]);
    }

    #[test]
    fn zero_rates_absorb_immediately() {
        let mut rng = run_rng(1, 0);
        assert_eq!(step(&state(10, 0, 0), &Rates::zero(), &mut rng), Step::Absorbed);
        let tr = simulate(10, &Rates::zero(), &SsaSettings::default(), &mut rng, |_| panic!("event")).unwrap();
        assert!(tr.states.iter().all(|s| *s == [10, 0, 0]));
        assert_eq!(tr.events, 0);
    }

    #[test]
    fn single_release_waiting_time_is_exponential() {
        let r = Rates { k4: 2.5, ..Rates::zero() };
        let samples = 20_000;
        let mut sum = 0.0;
        for seed in 0..samples {
            match step(&state(0, 1, 0), &r, &mut run_rng(seed, 0)) {
                Step::Fired { state: next, wait, reaction } => {
                    assert_eq!((next.s, next.g, next.f), (1, 0, 0));
                    assert_eq!(reaction, 3);
                    sum += wait;
                }
                Step::Absorbed => panic!("absorbed"),
            }
        }
        let mean = sum / samples as f64;
        let se = (1.0 / 2.5) / (samples as f64).sqrt();
        assert!((mean - 0.4).abs() < 3.0 * se, "mean {mean}");
    }

    proptest! {
        #[test]
        fn every_step_conserves_count(
            s in 0u64..50, g in 0u64..50, f in 0u64..50,
            k in prop::array::uniform7(0.0f64..5.0),
            seed in any::<u64>(),
        ) {
            let st = state(s, g, f);
            if let Step::Fired { state: next, wait, .. } = step(&st, &Rates::from_array(k), &mut run_rng(seed, 0)) {
                prop_assert_eq!(next.total(), st.total());
                prop_assert!(wait > 0.0);
            }
        }
    }

    #[test]
    fn events_conserve_population() {
        let r = Rates::from_array([0.005, 0.1, 0.06, 10.0, 0.15, 0.3, 0.8]);
        let settings = SsaSettings { t_end: 5.0, seed: 3, record_interval: 0.5 };
        let mut seen = 0;
        simulate(120, &r, &settings, &mut run_rng(3, 0), |st| {
            assert_eq!(st.total(), 120);
            seen += 1;
        })
        .unwrap();
        assert!(seen > 100);
    }

    #[test]
    fn same_seed_same_ensemble() {
        let r = Rates::from_array([0.005, 0.1, 0.06, 10.0, 0.15, 0.3, 0.8]);
        let settings = SsaSettings { t_end: 3.0, seed: 99, record_interval: 0.25 };
        let a = run_ensemble(80, &r, &settings, 8).unwrap();
        let b = run_ensemble(80, &r, &settings, 8).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(80, &r, &SsaSettings { seed: 100, ..settings }, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rates_ensemble_is_static() {
        let stats = run_ensemble(15, &Rates::zero(), &SsaSettings::default(), 4).unwrap();
        assert!(stats.mean.iter().all(|m| *m == [15.0, 0.0, 0.0]));
        assert!(stats.variance.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn ideal_concurrency_mean_matches_closed_form() {
        let r = Rates::ideal(0.004, 1.0);
        let settings = SsaSettings { t_end: 30.0, seed: 5, record_interval: 0.5 };
        let stats = run_ensemble(200, &r, &settings, 40).unwrap();
        let s_mean = stats.tail_mean(10.0).unwrap()[0];
        let exact = fp_ideal_concurrency(0.004, 1.0, 200.0).unwrap().s_star;
        assert!((s_mean - exact).abs() < 0.05 * exact, "{s_mean} vs {exact}");
    }

    #[test]
    fn sample_times_include_end() {
        let s = SsaSettings { t_end: 1.0, seed: 0, record_interval: 0.1 };
        let t = s.sample_times();
        assert_eq!(t.len(), 11);
        assert!((t[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_settings() {
        assert!(SsaSettings { t_end: 0.0, ..Default::default() }.validate().is_err());
        assert!(SsaSettings { record_interval: -1.0, ..Default::default() }.validate().is_err());
        assert!(run_ensemble(0, &Rates::zero(), &SsaSettings::default(), 1).is_err());
        assert!(run_ensemble(5, &Rates::zero(), &SsaSettings::default(), 0).is_err());
    }
}
