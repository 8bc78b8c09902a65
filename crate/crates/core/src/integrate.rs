//! Periodic orbits by shooting: time-stepping of the planar system with
//! event detection for the half period.
//!
//! Orbits are normalized with the maximum at x = 0: phi(0) = b2,
//! phi'(0) = 0, which makes phi even. The integration starts at the upper
//! turning point, detects the first zero of xi = phi' (the minimum, at
//! x = L/2 by symmetry) on the dense output, and resamples one full period
//! onto a uniform grid by landing on every sample point exactly.

use crate::error::{Error, Result};
use crate::model::{Branch, Model, OrbitSpec};
use crate::ode::{first_zero_after, Integrator};
use crate::quadrature;

/// Hard ceiling on the energy drift of a solved orbit.
pub const MAX_ENERGY_DRIFT: f64 = 1e-9;

/// Event-search horizon in time units.
const EVENT_HORIZON: f64 = 1e4;

/// A sampled periodic orbit over one period.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    spec: OrbitSpec,
    period: f64,
    /// phi at the n+1 uniform samples x_i = i L / n, i = 0..=n.
    phi: Vec<f64>,
    /// phi' at the same samples.
    dphi: Vec<f64>,
    /// max |E(phi_i, xi_i) - B| over the samples.
    energy_drift: f64,
    /// Integrator tolerance the orbit was built with.
    ode_tol: f64,
}

/// Planar vector field (phi, xi) -> (xi, phi - phi^k).
#[inline]
pub(crate) fn planar_rhs(model: Model) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + Copy {
    move |_x, y| [y[1], y[0] - model.pow_k_offset(y[0], 0)]
}

/// Shoot the periodic orbit for `spec`. `tol` is the integrator tolerance
/// (absolute and relative); `n_samples` the number of uniform sample
/// intervals over [0, L].
pub fn solve_orbit(spec: &OrbitSpec, tol: f64, n_samples: usize) -> Result<PeriodicOrbit> {
    assert!(n_samples >= 64, "n_samples must be at least 64");
    let model = spec.model;
    let integ = Integrator::with_tol(tol);
    let rhs = planar_rhs(model);

    // Crude period estimate for the event guard.
    let l_est = quadrature::period_integral(spec, 1e-6)?.period;
    let guard = 0.01 * l_est;

    let y0 = [spec.b2, 0.0];
    let (x_half, y_half) = first_zero_after(&integ, rhs, 0.0, y0, 1, guard, EVENT_HORIZON)?;
    let period = 2.0 * x_half;

    // The event must be the lower turning point.
    if (y_half[0] - spec.b1).abs() > 1e-7 * spec.width().max(1.0) {
        return Err(Error::TolFailure(format!(
            "half-period event landed at phi = {} instead of b1 = {}",
            y_half[0], spec.b1
        )));
    }

    // Resample one full period, hitting every grid point exactly.
    let n = n_samples;
    let xs: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    let mut phi = vec![0.0; n + 1];
    let mut dphi = vec![0.0; n + 1];
    integ.integrate_to_targets(rhs, 0.0, y0, &xs, |i, y| {
        phi[i] = y[0];
        dphi[i] = y[1];
    })?;

    let mut energy_drift: f64 = 0.0;
    for i in 0..=n {
        let e = model.energy_unchecked(phi[i], dphi[i]);
        energy_drift = energy_drift.max((e - spec.b).abs());
    }
    if energy_drift > MAX_ENERGY_DRIFT {
        return Err(Error::TolFailure(format!(
            "energy drift {energy_drift:e} exceeds {MAX_ENERGY_DRIFT:e}"
        )));
    }

    Ok(PeriodicOrbit {
        spec: *spec,
        period,
        phi,
        dphi,
        energy_drift,
        ode_tol: tol,
    })
}

/// Construct the spec and shoot in one call; turning-point errors propagate.
pub fn solve_orbit_at(
    model: Model,
    branch: Branch,
    b: f64,
    tol: f64,
    n_samples: usize,
) -> Result<PeriodicOrbit> {
    let spec = OrbitSpec::new(model, branch, b)?;
    solve_orbit(&spec, tol, n_samples)
}

impl PeriodicOrbit {
    pub fn spec(&self) -> &OrbitSpec {
        &self.spec
    }

    pub fn model(&self) -> Model {
        self.spec.model
    }

    /// The period L determined by shooting.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of uniform sample intervals (samples are n+1 points).
    pub fn n_samples(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }

    pub fn ode_tol(&self) -> f64 {
        self.ode_tol
    }

    /// Sample abscissa x_i.
    pub fn x_at(&self, i: usize) -> f64 {
        self.period * i as f64 / self.n_samples() as f64
    }

    pub fn phi_samples(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphi_samples(&self) -> &[f64] {
        &self.dphi
    }

    /// phi''(0) = phi(0) - phi(0)^k = b2 - b2^k; nonzero on every orbit.
    pub fn ddphi0(&self) -> f64 {
        let b2 = self.spec.b2;
        b2 - self.spec.model.pow_k_offset(b2, 0)
    }

    /// Mean of phi over one period (periodic trapezoid, spectrally accurate).
    pub fn mean_phi(&self) -> f64 {
        let n = self.n_samples();
        self.phi[..n].iter().sum::<f64>() / n as f64
    }

    /// (phi, phi') at arbitrary x, wrapped modulo L. Cubic Hermite on the
    /// stored samples: phi interpolated with its stored derivative, phi'
    /// with xi' = phi - phi^k from the equation. Exact at sample points.
    pub fn evaluate(&self, x: f64) -> (f64, f64) {
        let n = self.n_samples();
        let l = self.period;
        let mut xw = x.rem_euclid(l);
        if !xw.is_finite() {
            xw = 0.0;
        }
        let hstep = l / n as f64;
        let mut i = (xw / hstep).floor() as usize;
        if i >= n {
            i = n - 1;
        }
        let s = (xw - hstep * i as f64) / hstep;
        let model = self.spec.model;
        let ddphi =
            |p: f64| -> f64 { p - model.pow_k_offset(p, 0) };
        let hermite = |f0: f64, d0: f64, f1: f64, d1: f64, s: f64| -> f64 {
            let s2 = s * s;
            let s3 = s2 * s;
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            h00 * f0 + h10 * hstep * d0 + h01 * f1 + h11 * hstep * d1
        };
        let p = hermite(self.phi[i], self.dphi[i], self.phi[i + 1], self.dphi[i + 1], s);
        let dp = hermite(
            self.dphi[i],
            ddphi(self.phi[i]),
            self.dphi[i + 1],
            ddphi(self.phi[i + 1]),
            s,
        );
        (p, dp)
    }

    /// Number of sign changes of phi' over one period (should be exactly 2).
    pub fn dphi_sign_changes(&self) -> usize {
        cyclic_sign_changes(&self.dphi[..self.n_samples()])
    }
}

/// Sign changes around a cyclic sequence, skipping entries that are zero to
/// within 1e-12 of the largest magnitude.
pub(crate) fn cyclic_sign_changes(v: &[f64]) -> usize {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let eps = 1e-12 * scale;
    let signs: Vec<f64> = v
        .iter()
        .filter(|x| x.abs() > eps)
        .map(|x| x.signum())
        .collect();
    if signs.is_empty() {
        return 0;
    }
    let mut count = 0;
    for i in 0..signs.len() {
        if signs[i] != signs[(i + 1) % signs.len()] {
            count += 1;
        }
    }
    count
}
