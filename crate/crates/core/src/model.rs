//! Domain types and right-hand sides of the solo/grupo/fermo population model.
//!
//! Seven transitions move units between three states:
//!
//! ```text
//! 2S -k1-> 2G     S+G -k2-> 2G     S+F -k3-> G+F     G -k4-> S
//! 2G -k5-> 2F     G+F -k6-> 2F     F -k7-> G
//! ```
//!
//! Populations are real-valued concentrations with unit volume, so they are
//! numerically equal to unit counts. The total `s + g + f = n` is conserved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition rates of the seven reactions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rates {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
}

impl Rates {
    pub fn new(k: [f64; 7]) -> Result<Self> {
        let rates = Self::from_array(k);
        rates.validate()?;
        Ok(rates)
    }

    pub const fn from_array(k: [f64; 7]) -> Self {
        Self { k1: k[0], k2: k[1], k3: k[2], k4: k[3], k5: k[4], k6: k[5], k7: k[6] }
    }

    pub const fn to_array(&self) -> [f64; 7] {
        [self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k7]
    }

    pub const fn zero() -> Self {
        Self::from_array([0.0; 7])
    }

    /// Only pair interaction `k1` and release `k4`.
    pub const fn ideal(k1: f64, k4: f64) -> Self {
        Self::from_array([k1, 0.0, 0.0, k4, 0.0, 0.0, 0.0])
    }

    /// Pair interaction, recruitment by grupo units, and release.
    pub const fn amdahl(k1: f64, k2: f64, k4: f64) -> Self {
        Self::from_array([k1, k2, 0.0, k4, 0.0, 0.0, 0.0])
    }

    /// The constrained family `k2 = k3 = k5 = k6 = 2 k1`, `k7 = k4`.
    pub fn diminishing(k1: f64, k4: f64) -> Self {
        let c = 2.0 * k1;
        Self::from_array([k1, c, c, k4, c, c, k4])
    }

    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.to_array().iter().enumerate() {
            if !k.is_finite() || *k < 0.0 {
                return Err(Error::InvalidInput(format!("k{} must be finite and >= 0, got {k}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&k| k == 0.0)
    }

    /// True when nothing can ever enter or leave the fermo state.
    pub fn fermo_decoupled(&self) -> bool {
        self.k5 == 0.0 && self.k6 == 0.0 && self.k7 == 0.0
    }
}

/// Per-unit throughput of solo and grupo units. Fermo units contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub c_s: f64,
    pub c_g: f64,
}

impl Contribution {
    pub fn new(c_s: f64, c_g: f64) -> Result<Self> {
        let c = Self { c_s, c_g };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_s", self.c_s), ("c_g", self.c_g)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for Contribution {
    fn default() -> Self {
        Self { c_s: 1.0, c_g: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub s: f64,
    pub g: f64,
    pub f: f64,
    pub t: f64,
}

impl PopulationState {
    /// All units solo at `t = 0`.
    pub const fn all_solo(n: f64) -> Self {
        Self { s: n, g: 0.0, f: 0.0, t: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.s + self.g + self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub rates: Rates,
    pub contribution: Contribution,
    pub n: f64,
}

impl SystemConfig {
    pub fn new(rates: Rates, contribution: Contribution, n: f64) -> Result<Self> {
        let cfg = Self { rates, contribution, n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.contribution.validate()?;
        if !self.n.is_finite() || self.n <= 0.0 {
            return Err(Error::InvalidInput(format!("system size must be finite and > 0, got {}", self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub s_star: f64,
    pub g_star: f64,
    pub f_star: f64,
    pub stability: Stability,
    /// Max-norm of the full right-hand side at the point.
    pub residual: f64,
}

impl FixedPoint {
    /// Builds a fixed point at `(s, g, f)` for `cfg`, filling in residual and
    /// stability. `tol` is the eigenvalue margin used by [`classify_stability`].
    pub fn assess(cfg: &SystemConfig, s: f64, g: f64, f: f64, tol: f64) -> Result<Self> {
        let (ds, dg, df) = rhs_full(&PopulationState { s, g, f, t: 0.0 }, cfg)?;
        let residual = ds.abs().max(dg.abs()).max(df.abs());
        let stability = classify_stability(cfg, s, f, tol)?;
        Ok(Self { s_star: s, g_star: g, f_star: f, stability, residual })
    }

    pub fn total(&self) -> f64 {
        self.s_star + self.g_star + self.f_star
    }
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite value in {values:?}")))
    }
}

/// Time derivatives `(ds/dt, dg/dt, df/dt)` of the three-state system.
pub fn rhs_full(state: &PopulationState, cfg: &SystemConfig) -> Result<(f64, f64, f64)> {
    ensure_finite(&[state.s, state.g, state.f])?;
    Ok(rhs_unchecked(&cfg.rates, state.s, state.g, state.f))
}

/// Raw right-hand side without validation; the integrator's hot path.
#[inline]
pub(crate) fn rhs_unchecked(r: &Rates, s: f64, g: f64, f: f64) -> (f64, f64, f64) {
    let r1 = r.k1 * s * s;
    let r2 = r.k2 * s * g;
    let r3 = r.k3 * s * f;
    let r4 = r.k4 * g;
    let r5 = r.k5 * g * g;
    let r6 = r.k6 * g * f;
    let r7 = r.k7 * f;
    let ds = -2.0 * r1 - r2 - r3 + r4;
    let df = 2.0 * r5 + r6 - r7;
    // dg is the exact negation so the three components cancel.
    let dg = -(ds + df);
    (ds, dg, df)
}

fn check_simplex(s: f64, f: f64, n: f64) -> Result<f64> {
    ensure_finite(&[s, f])?;
    if s < 0.0 || f < 0.0 {
        return Err(Error::Domain(format!("populations must be >= 0, got s={s}, f={f}")));
    }
    let g = n - s - f;
    if g < -1e-12 * n.max(1.0) {
        return Err(Error::Domain(format!("s + f = {} exceeds n = {n}", s + f)));
    }
    Ok(g)
}

/// Two-equation form with `g = n - s - f` substituted; returns `(ds/dt, df/dt)`.
pub fn rhs_reduced(s: f64, f: f64, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let g = check_simplex(s, f, cfg.n)?;
    let (ds, _, df) = rhs_unchecked(&cfg.rates, s, g, f);
    Ok((ds, df))
}

/// Analytic Jacobian of [`rhs_reduced`] with respect to `(s, f)`, row-major:
/// `[[d(ds)/ds, d(ds)/df], [d(df)/ds, d(df)/df]]`.
pub fn jacobian_reduced(s: f64, f: f64, cfg: &SystemConfig) -> Result<[[f64; 2]; 2]> {
    check_simplex(s, f, cfg.n)?;
    Ok(jacobian_unchecked(&cfg.rates, cfg.n, s, f))
}

#[inline]
pub(crate) fn jacobian_unchecked(r: &Rates, n: f64, s: f64, f: f64) -> [[f64; 2]; 2] {
    let g = n - s - f;
    let dsds = -4.0 * r.k1 * s - r.k2 * g + r.k2 * s - r.k3 * f - r.k4;
    let dsdf = r.k2 * s - r.k3 * s - r.k4;
    let dfds = -4.0 * r.k5 * g - r.k6 * f;
    let dfdf = -4.0 * r.k5 * g + r.k6 * (g - f) - r.k7;
    [[dsds, dsdf], [dfds, dfdf]]
}

/// Largest eigenvalue modulus of a 2x2 matrix.
pub(crate) fn spectral_radius(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        ((tr + root) / 2.0).abs().max(((tr - root) / 2.0).abs())
    } else {
        det.abs().sqrt()
    }
}

/// Real parts of the two eigenvalues of a 2x2 matrix, largest first.
pub fn eigen_real_parts(m: &[[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        [(tr + root) / 2.0, (tr - root) / 2.0]
    } else {
        [tr / 2.0, tr / 2.0]
    }
}

/// Classifies the point `(s, f)` from the reduced Jacobian's eigenvalues.
///
/// All-zero rates are Stable by convention. When the fermo state is
/// decoupled (`k5 = k6 = k7 = 0`) the `f` row of the Jacobian vanishes and
/// `f` stays at its initial value, so only the solo direction is judged.
pub fn classify_stability(cfg: &SystemConfig, s: f64, f: f64, tol: f64) -> Result<Stability> {
    if cfg.rates.is_zero() {
        return Ok(Stability::Stable);
    }
    let j = jacobian_reduced(s, f, cfg)?;
    let re = if cfg.rates.fermo_decoupled() {
        [j[0][0], j[0][0]]
    } else {
        eigen_real_parts(&j)
    };
    Ok(if re.iter().all(|&x| x < -tol) {
        Stability::Stable
    } else if re.iter().any(|&x| x > tol) {
        Stability::Unstable
    } else {
        Stability::Marginal
    })
}
