//! Dormand–Prince 5(4) embedded pair for small autonomous systems.
//! Stage times are not needed because the right-hand side has no explicit `t`.

pub(crate) type Vec3 = [f64; 3];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Largest step (times the dominant eigenvalue modulus) that stays inside the
/// method's stability region along both the real and imaginary axes.
pub(crate) const STABILITY_LIMIT: f64 = 2.8;

pub(crate) struct Trial {
    pub y: Vec3,
    /// Derivative at the new point; reused as the first stage of the next step.
    pub dy: Vec3,
    /// Scaled RMS error estimate; the step is acceptable when `<= 1`.
    pub err: f64,
}

#[inline]
fn axpy(y: &Vec3, h: f64, terms: &[(f64, &Vec3)]) -> Vec3 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand–Prince step from `y` with derivative `k1 = f(y)` already known.
pub(crate) fn dopri5_step<F>(f: &F, y: &Vec3, k1: &Vec3, h: f64, rtol: f64, atol: f64) -> Trial
where
    F: Fn(&Vec3) -> Vec3,
{
    let k2 = f(&axpy(y, h, &[(A21, k1)]));
    let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(&y_new);

    let mut sum = 0.0;
    for i in 0..3 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / sc).powi(2);
    }
    Trial { y: y_new, dy: k7, err: (sum / 3.0).sqrt() }
}

/// Step-size multiplier from the error estimate.
pub(crate) fn step_factor(err: f64, accepted: bool) -> f64 {
    let raw = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
    if accepted {
        raw.clamp(0.2, 10.0)
    } else {
        raw.clamp(0.1, 0.9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate<F: Fn(&Vec3) -> Vec3>(f: F, y0: Vec3, t_end: f64) -> Vec3 {
        let (mut t, mut y, mut k, mut h) = (0.0, y0, f(&y0), 1e-3_f64);
        while t < t_end {
            h = h.min(t_end - t);
            let trial = dopri5_step(&f, &y, &k, h, 1e-10, 1e-12);
            let ok = trial.err <= 1.0;
            if ok {
                t += h;
                y = trial.y;
                k = trial.dy;
            }
            h *= step_factor(trial.err, ok);
        }
        y
    }

    #[test]
    fn exponential_decay() {
        let y = integrate(|y| [-y[0], -2.0 * y[1], 0.5 * y[2]], [1.0, 1.0, 1.0], 3.0);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-9);
        assert!((y[1] - (-6.0f64).exp()).abs() < 1e-9);
        assert!((y[2] - 1.5f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let y = integrate(|y| [y[1], -y[0], 0.0], [1.0, 0.0, 0.0], 2.0 * std::f64::consts::PI);
        assert!((y[0] - 1.0).abs() < 1e-8);
        assert!(y[1].abs() < 1e-8);
    }
}
