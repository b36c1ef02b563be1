//! Classical scalability laws, the throughput/speedup mapping, and closed-form
//! fixed points for the parameter families where the model is solvable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Contribution, FixedPoint, Rates, SystemConfig};

/// Eigenvalue margin used when classifying closed-form fixed points.
const CLOSED_FORM_STABILITY_TOL: f64 = 1e-9;

/// Relative gap `|k2 - 2 k1| / max(k2, 2 k1)` below which the contention
/// family switches to its singular closed form.
pub const AMDAHL_SINGULAR_SWITCH: f64 = 1e-9;

/// Relative gap `|k4 - 2 k1 n| / max(k4, 2 k1 n)` below which the fermo
/// closed form of the diminishing-returns family is treated as singular.
pub const DIMINISHING_SINGULAR_SWITCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmdahlParams {
    /// Serial fraction in `[0, 1]`.
    pub sigma: f64,
}

impl AmdahlParams {
    pub fn new(sigma: f64) -> Result<Self> {
        unit_interval("sigma", sigma)?;
        Ok(Self { sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GustafsonParams {
    pub sigma: f64,
}

impl GustafsonParams {
    pub fn new(sigma: f64) -> Result<Self> {
        unit_interval("sigma", sigma)?;
        Ok(Self { sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UslParams {
    /// Contention. Negative values model synergy.
    pub sigma: f64,
    /// Coherency delay, `>= 0`.
    pub kappa: f64,
}

impl UslParams {
    pub fn new(sigma: f64, kappa: f64) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be finite, got {sigma}")));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { sigma, kappa })
    }
}

/// `a * n^b * exp(c n)` with `a > 0`, `b > 0`, `c < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SwarmParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0 && c.is_finite() && c < 0.0) {
            return Err(Error::InvalidInput(format!("swarm law needs a > 0, b > 0, c < 0; got a={a}, b={b}, c={c}")));
        }
        Ok(Self { a, b, c })
    }

    /// Size that maximizes performance, `-b / c`.
    pub fn argmax(&self) -> f64 {
        -self.b / self.c
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {v}")))
    }
}

/// `n / (1 + sigma (n - 1))`, for `n >= 1`.
pub fn amdahl_speedup(p: &AmdahlParams, n: f64) -> f64 {
    n / (1.0 + p.sigma * (n - 1.0))
}

/// `n + (1 - n) sigma`, for `n >= 1`.
pub fn gustafson_speedup(p: &GustafsonParams, n: f64) -> f64 {
    n + (1.0 - n) * p.sigma
}

/// `n / (1 + sigma (n - 1) + kappa n (n - 1))`. With negative contention the
/// denominator can reach zero; that is reported as a domain error.
pub fn usl_speedup(p: &UslParams, n: f64) -> Result<f64> {
    let denom = 1.0 + p.sigma * (n - 1.0) + p.kappa * n * (n - 1.0);
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "USL denominator {denom} <= 0 at n={n} (sigma={}, kappa={})",
            p.sigma, p.kappa
        )));
    }
    Ok(n / denom)
}

pub fn swarm_performance(p: &SwarmParams, n: f64) -> f64 {
    p.a * n.powf(p.b) * (p.c * n).exp()
}

/// Approximate speedup of the diminishing-returns family,
/// `n / ((k2/k4)^2 n^2 + (k2/k4) n + 1)`.
///
/// Similar in shape to [`usl_speedup`] with `sigma = k2/k4`, `kappa = sigma^2`,
/// but the two use `n` and `n - 1` differently and are not equal.
pub fn usl_approx_speedup(k2: f64, k4: f64, n: f64) -> f64 {
    let r = k2 / k4;
    n / (r * r * n * n + r * n + 1.0)
}

/// `c_s s* + c_g g*`; fermo units contribute nothing.
pub fn throughput(fp: &FixedPoint, c: &Contribution) -> f64 {
    c.c_s * fp.s_star + c.c_g * fp.g_star
}

/// Throughput relative to a single solo unit, `s* + (c_g / c_s) g*`.
pub fn speedup(fp: &FixedPoint, c: &Contribution) -> Result<f64> {
    if c.c_s == 0.0 {
        return Err(Error::UndefinedSpeedup);
    }
    Ok(fp.s_star + (c.c_g / c.c_s) * fp.g_star)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn assess(rates: Rates, n: f64, s: f64, g: f64, f: f64) -> Result<FixedPoint> {
    let cfg = SystemConfig::new(rates, Contribution::default(), n)?;
    FixedPoint::assess(&cfg, s, g, f, CLOSED_FORM_STABILITY_TOL)
}

/// Stable fixed point with only `k1` and `k4` active:
/// `s* = (sqrt(k4^2 + 8 k1 k4 n) - k4) / (4 k1)`, `f* = 0`.
///
/// With `k1 = 0` nothing leaves the solo state and the point is `(n, 0, 0)`.
pub fn fp_ideal_concurrency(k1: f64, k4: f64, n: f64) -> Result<FixedPoint> {
    positive("k4", k4)?;
    positive("n", n)?;
    if !(k1.is_finite() && k1 >= 0.0) {
        return Err(Error::InvalidInput(format!("k1 must be finite and >= 0, got {k1}")));
    }
    let s = if k1 == 0.0 {
        n
    } else {
        // rationalized form of the same root; exact as k1 -> 0
        2.0 * k4 * n / (k4 + (k4 * k4 + 8.0 * k1 * k4 * n).sqrt())
    };
    assess(Rates::ideal(k1, k4), n, s, n - s, 0.0)
}

/// Stable fixed point with `k1`, `k2`, `k4` active.
///
/// For `k2 = 2 k1` the quadratic degenerates and `s* = k4 n / (k4 + k2 n)`,
/// which has the shape of Amdahl's law with `sigma = k2 / k4`.
pub fn fp_amdahl(k1: f64, k2: f64, k4: f64, n: f64) -> Result<FixedPoint> {
    positive("k1", k1)?;
    positive("k2", k2)?;
    positive("k4", k4)?;
    positive("n", n)?;
    let a = k2 - 2.0 * k1;
    let s = if a.abs() < AMDAHL_SINGULAR_SWITCH * k2.max(2.0 * k1) {
        k4 * n / (k4 + k2 * n)
    } else {
        // (k4 + k2 n - sqrt(D)) / (2 a), rewritten as 2 k4 n / (k4 + k2 n + sqrt(D))
        let d = k4 * k4 + 8.0 * k1 * k4 * n - 2.0 * k2 * k4 * n + k2 * k2 * n * n;
        2.0 * k4 * n / (k4 + k2 * n + d.sqrt())
    };
    assess(Rates::amdahl(k1, k2, k4), n, s, n - s, 0.0)
}

fn diminishing_root(k1: f64, k4: f64, n: f64) -> f64 {
    let x = k1 * n;
    (16.0 * x.powi(4) + 48.0 * k4 * x.powi(3) - 4.0 * k4 * k4 * x * x + 4.0 * k4.powi(3) * x + k4.powi(4)).sqrt()
}

/// Solo population of the diminishing-returns family
/// (`k2 = k3 = k5 = k6 = 2 k1`, `k7 = k4`). Defined for all `k1, k4 > 0`.
pub fn diminishing_solo_star(k1: f64, k4: f64, n: f64) -> f64 {
    let x = k1 * n;
    let root = diminishing_root(k1, k4, n);
    2.0 * k4 * k4 * n / (4.0 * x * x + root + 2.0 * k4 * x + k4 * k4)
}

/// Stable fixed point of the diminishing-returns family
/// (`k2 = k3 = k5 = k6 = 2 k1`, `k7 = k4`).
///
/// The fermo expression divides by `8 k1^2 n (k4 - 2 k1 n)`; at `k4 = 2 k1 n`
/// it is 0/0 and a [`Error::SingularFormula`] is returned. The solo value is
/// still available from [`diminishing_solo_star`].
pub fn fp_diminishing(k1: f64, k4: f64, n: f64) -> Result<FixedPoint> {
    positive("k1", k1)?;
    positive("k4", k4)?;
    positive("n", n)?;
    let gap = k4 - 2.0 * k1 * n;
    if gap.abs() < DIMINISHING_SINGULAR_SWITCH * k4.max(2.0 * k1 * n) {
        return Err(Error::SingularFormula(format!(
            "fermo closed form needs k4 != 2 k1 n (k1={k1}, k4={k4}, n={n})"
        )));
    }
    let x = k1 * n;
    let root = diminishing_root(k1, k4, n);
    let s = diminishing_solo_star(k1, k4, n);
    let num = 24.0 * x.powi(3) - (2.0 * x + k4) * root + 4.0 * k4 * k4 * x + k4.powi(3);
    let den = 8.0 * k1 * k1 * k4 * n - 16.0 * k1.powi(3) * n * n;
    let f = -num / den;
    assess(Rates::diminishing(k1, k4), n, s, n - s - f, f)
}
