//! The Floquet constant theta of the linearization around a periodic orbit.
//!
//! phi' is a periodic solution of the Hill equation
//! -y'' + y - k phi^(k-1) y = 0. The second solution ybar, fixed by the
//! even initial data ybar(0) = -1/phi''(0), ybar'(0) = 0, satisfies
//! ybar(x + L) = ybar(x) + theta phi'(x); theta = ybar'(L)/phi''(0) and the
//! period map obeys dL/dB = -theta. theta < 0 on the positive branch,
//! theta > 0 on the sign-changing branch.
//!
//! All variational quantities are integrated as systems coupled with
//! (phi, xi) rather than frozen on stored samples, so they track the orbit
//! to integrator accuracy.

use crate::error::{Error, Result};
use crate::integrate::{solve_orbit, PeriodicOrbit};
use crate::model::Model;
use crate::ode::Integrator;
use crate::quadrature;

/// Orbits narrower than this are rejected: phi''(0) -> 0 degrades the
/// conditioning of the ybar initial data.
pub const NEAR_CENTER_WIDTH: f64 = 1e-6;

/// Coupled system (phi, xi, y, y') with -y'' + y - k phi^(k-1) y = 0.
#[inline]
pub(crate) fn variational_rhs(model: Model) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + Copy {
    move |_x, y| {
        let q = 1.0 - model.k() * model.pow_k_offset(y[0], -1);
        [y[1], y[0] - model.pow_k_offset(y[0], 0), y[3], q * y[2]]
    }
}

/// (phi, xi) plus two Hill solutions u, v: a 6-dimensional system used for
/// the monodromy matrix.
#[inline]
fn hill_pair_rhs(model: Model) -> impl Fn(f64, &[f64; 6]) -> [f64; 6] + Copy {
    move |_x, y| {
        let q = 1.0 - model.k() * model.pow_k_offset(y[0], -1);
        [
            y[1],
            y[0] - model.pow_k_offset(y[0], 0),
            y[3],
            q * y[2],
            y[5],
            q * y[4],
        ]
    }
}

fn guard_near_center(orbit: &PeriodicOrbit) -> Result<()> {
    if orbit.spec().width() < NEAR_CENTER_WIDTH {
        Err(Error::NearCenter)
    } else {
        Ok(())
    }
}

/// Sampled solution of the ybar initial-value problem over [0, L].
#[derive(Debug, Clone)]
pub struct YbarSolution {
    /// ybar at the orbit's uniform samples x_i = i L / n.
    pub ybar: Vec<f64>,
    /// ybar' at the same samples.
    pub dybar: Vec<f64>,
}

/// Integrate the ybar IVP along the orbit, sampled on the orbit's grid.
pub fn ybar_ivp(orbit: &PeriodicOrbit, tol: f64) -> Result<YbarSolution> {
    guard_near_center(orbit)?;
    let n = orbit.n_samples();
    let integ = Integrator::with_tol(tol);
    let rhs = variational_rhs(orbit.model());
    let y0 = [orbit.spec().b2, 0.0, -1.0 / orbit.ddphi0(), 0.0];
    let xs: Vec<f64> = (0..=n).map(|i| orbit.x_at(i)).collect();
    let mut ybar = vec![0.0; n + 1];
    let mut dybar = vec![0.0; n + 1];
    integ.integrate_to_targets(rhs, 0.0, y0, &xs, |i, y| {
        ybar[i] = y[2];
        dybar[i] = y[3];
    })?;
    Ok(YbarSolution { ybar, dybar })
}

/// Number of check points for the translation identity
/// ybar(x + L) - ybar(x) - theta phi'(x) = 0.
const Y1_CHECK_POINTS: usize = 16;

/// Pointwise tolerance on the translation identity.
pub const Y1_RESIDUAL_TOL: f64 = 1e-7;

/// theta together with the measured translation-identity residual.
pub fn theta_with_residual(orbit: &PeriodicOrbit, tol: f64) -> Result<(f64, f64)> {
    guard_near_center(orbit)?;
    let l = orbit.period();
    let integ = Integrator::with_tol(tol);
    let rhs = variational_rhs(orbit.model());
    let ddphi0 = orbit.ddphi0();
    let y0 = [orbit.spec().b2, 0.0, -1.0 / ddphi0, 0.0];

    // Targets: the 16 check points in [0, L), x = L itself, and the same
    // points shifted by L.
    let mut targets = Vec::with_capacity(2 * Y1_CHECK_POINTS + 2);
    for j in 0..Y1_CHECK_POINTS {
        targets.push(l * j as f64 / Y1_CHECK_POINTS as f64);
    }
    targets.push(l);
    for j in 1..=Y1_CHECK_POINTS {
        targets.push(l + l * j as f64 / Y1_CHECK_POINTS as f64);
    }
    let mut states = vec![[0.0; 4]; targets.len()];
    integ.integrate_to_targets(rhs, 0.0, y0, &targets, |i, y| {
        states[i] = *y;
    })?;

    let theta = states[Y1_CHECK_POINTS][3] / ddphi0;

    let mut residual: f64 = 0.0;
    for j in 0..Y1_CHECK_POINTS {
        let near = &states[j];
        let far = &states[Y1_CHECK_POINTS + 1 + j];
        // far holds the state at x_j + L (for j = 15 the last pushed target)
        let r = (far[2] - near[2] - theta * near[1]).abs();
        residual = residual.max(r);
    }
    if residual > Y1_RESIDUAL_TOL {
        return Err(Error::TolFailure(format!(
            "translation identity residual {residual:e} exceeds {Y1_RESIDUAL_TOL:e}"
        )));
    }
    Ok((theta, residual))
}

/// The Floquet constant theta = ybar'(L) / phi''(0).
pub fn theta(orbit: &PeriodicOrbit, tol: f64) -> Result<f64> {
    Ok(theta_with_residual(orbit, tol)?.0)
}

/// Fundamental solution matrix of the Hill equation at lambda = 0 over one
/// period: columns are the solutions with initial data (1,0) and (0,1).
pub fn monodromy(orbit: &PeriodicOrbit, tol: f64) -> Result<[[f64; 2]; 2]> {
    guard_near_center(orbit)?;
    let integ = Integrator::with_tol(tol);
    let rhs = hill_pair_rhs(orbit.model());
    let y0 = [orbit.spec().b2, 0.0, 1.0, 0.0, 0.0, 1.0];
    let y = integ.integrate_to(rhs, 0.0, y0, orbit.period())?;
    Ok([[y[2], y[4]], [y[3], y[5]]])
}

/// Floquet data bundled with the finite-difference derivative of the period
/// map; `residual` is |dL/dB + theta|, the measured defect of the identity
/// dL/dB = -theta.
#[derive(Debug, Clone, Copy)]
pub struct FloquetReport {
    pub theta: f64,
    pub monodromy: [[f64; 2]; 2],
    /// Trace of the monodromy matrix (2 at a periodic eigenvalue).
    pub discriminant: f64,
    pub det_monodromy: f64,
    pub dldb_fd: f64,
    pub residual: f64,
    /// Translation-identity residual of ybar.
    pub y1_residual: f64,
}

pub fn floquet_report(orbit: &PeriodicOrbit, fd_step: f64, tol: f64) -> Result<FloquetReport> {
    let (theta, y1_residual) = theta_with_residual(orbit, tol)?;
    let m = monodromy(orbit, tol)?;
    let spec = orbit.spec();
    let dldb = quadrature::dldb_fd(spec.model, spec.branch, spec.b, fd_step, 1e-8)?;
    Ok(FloquetReport {
        theta,
        monodromy: m,
        discriminant: m[0][0] + m[1][1],
        det_monodromy: m[0][0] * m[1][1] - m[0][1] * m[1][0],
        dldb_fd: dldb,
        residual: (dldb + theta).abs(),
        y1_residual,
    })
}

/// Max-norm residual of ybar = -d phi/dB measured against a central
/// difference of two neighbouring orbits at B +- h, on a 64-point grid.
pub fn dvarphi_db_residual(orbit: &PeriodicOrbit, h: f64) -> Result<f64> {
    guard_near_center(orbit)?;
    let spec = orbit.spec();
    let (lo, hi) = crate::model::admissible_range(&spec.model, spec.branch)?;
    if !(spec.b - h > lo && spec.b + h < hi) {
        return Err(Error::StepOutOfRange {
            b: spec.b,
            h_step: h,
        });
    }
    let tol = orbit.ode_tol();
    let n = orbit.n_samples();
    let plus = solve_orbit(
        &crate::model::OrbitSpec::new(spec.model, spec.branch, spec.b + h)?,
        tol,
        n,
    )?;
    let minus = solve_orbit(
        &crate::model::OrbitSpec::new(spec.model, spec.branch, spec.b - h)?,
        tol,
        n,
    )?;
    let ybar = ybar_ivp(orbit, tol)?;
    let l = orbit.period();
    let mut residual: f64 = 0.0;
    for j in 0..64 {
        let x = l * j as f64 / 64.0;
        let i = j * n / 64; // orbit grid index at the same x
        let fd = -(plus.evaluate(x).0 - minus.evaluate(x).0) / (2.0 * h);
        residual = residual.max((fd - ybar.ybar[i]).abs());
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::solve_orbit_at;
    use crate::model::Branch;

    fn orbit(k: f64, branch: Branch, b: f64) -> PeriodicOrbit {
        solve_orbit_at(Model::new(k).unwrap(), branch, b, 1e-13, 1024).unwrap()
    }

    #[test]
    fn ybar_initial_value_k3() {
        // phi''(0) = 2 - 8 = -6, so ybar(0) = 1/6
        let orb = orbit(3.0, Branch::SignChanging, 2.0);
        let sol = ybar_ivp(&orb, 1e-13).unwrap();
        assert!((sol.ybar[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(sol.dybar[0], 0.0);
    }

    #[test]
    fn wronskian_is_one_along_the_orbit() {
        let orb = orbit(2.0, Branch::Positive, -0.1);
        let sol = ybar_ivp(&orb, 1e-13).unwrap();
        let model = orb.model();
        for i in 0..=orb.n_samples() {
            let phi = orb.phi_samples()[i];
            let dphi = orb.dphi_samples()[i];
            let ddphi = phi - model.pow_k_offset(phi, 0);
            let w = dphi * sol.dybar[i] - ddphi * sol.ybar[i];
            assert!((w - 1.0).abs() < 1e-9, "W = {w} at sample {i}");
        }
    }

    #[test]
    fn theta_matches_frozen_derivatives() {
        // frozen: dL/dB = 9.013060485626989 at k=2, B=-0.1, theta = -dL/dB
        let th = theta(&orbit(2.0, Branch::Positive, -0.1), 1e-13).unwrap();
        assert!((th + 9.013060485626989).abs() < 1e-7, "theta = {th}");
        // frozen: dL/dB = -0.6331887105762713 at k=3, B=2
        let th = theta(&orbit(3.0, Branch::SignChanging, 2.0), 1e-13).unwrap();
        assert!((th - 0.6331887105762713).abs() < 1e-8, "theta = {th}");
    }

    #[test]
    fn theta_signs_follow_the_branch() {
        assert!(theta(&orbit(2.0, Branch::Positive, -0.1), 1e-12).unwrap() < 0.0);
        assert!(theta(&orbit(1.5, Branch::Positive, -0.05), 1e-12).unwrap() < 0.0);
        assert!(theta(&orbit(3.0, Branch::SignChanging, 2.0), 1e-12).unwrap() > 0.0);
        assert!(theta(&orbit(5.0, Branch::SignChanging, 1.0), 1e-12).unwrap() > 0.0);
    }

    #[test]
    fn theta_stable_under_tolerance_refinement() {
        let orb = orbit(3.0, Branch::SignChanging, 0.5);
        let a = theta(&orb, 1e-12).unwrap();
        let b = theta(&orb, 1e-13).unwrap();
        assert!(((a - b) / b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn report_identity_dldb_plus_theta() {
        for (k, branch, b) in [
            (2.0, Branch::Positive, -0.10),
            (3.0, Branch::SignChanging, 2.0),
        ] {
            let orb = orbit(k, branch, b);
            let rep = floquet_report(&orb, 1e-4, 1e-13).unwrap();
            assert!(
                rep.residual <= 1e-6 * rep.theta.abs().max(1.0),
                "k={k} B={b}: residual {:e}",
                rep.residual
            );
            assert!(rep.y1_residual <= Y1_RESIDUAL_TOL);
        }
    }

    #[test]
    fn monodromy_structure() {
        let orb = orbit(3.0, Branch::SignChanging, 2.0);
        let m = monodromy(&orb, 1e-13).unwrap();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let tr = m[0][0] + m[1][1];
        assert!((det - 1.0).abs() < 1e-8, "det = {det}");
        assert!((tr - 2.0).abs() < 1e-6, "tr = {tr}");
        // (M - I) annihilates the periodic kernel direction (0, phi''(0))
        let v = [0.0, orb.ddphi0()];
        let mv = [
            m[0][0] * v[0] + m[0][1] * v[1] - v[0],
            m[1][0] * v[0] + m[1][1] * v[1] - v[1],
        ];
        assert!(mv[0].abs() < 1e-6 && mv[1].abs() < 1e-6, "{mv:?}");
    }

    #[test]
    fn near_center_rejected() {
        let m = Model::new(2.0).unwrap();
        let b = m.center_energy() + 1e-13;
        let spec = crate::model::OrbitSpec::new(m, Branch::Positive, b).unwrap();
        assert!(spec.width() < NEAR_CENTER_WIDTH);
        let orb = solve_orbit(&spec, 1e-12, 64);
        if let Ok(orb) = orb {
            assert!(matches!(theta(&orb, 1e-12), Err(Error::NearCenter)));
        }
    }

    #[test]
    fn dvarphi_db_second_order() {
        for (k, branch, b) in [
            (2.0, Branch::Positive, -0.1),
            (3.0, Branch::SignChanging, 2.0),
        ] {
            let orb = orbit(k, branch, b);
            let r = dvarphi_db_residual(&orb, 1e-4).unwrap();
            assert!(r <= 1e-6, "k={k}: residual {r:e} at h=1e-4");
        }
        // quadratic decay: halving h shrinks the residual by about 4
        let orb = orbit(2.0, Branch::Positive, -0.1);
        let r1 = dvarphi_db_residual(&orb, 4e-3).unwrap();
        let r2 = dvarphi_db_residual(&orb, 2e-3).unwrap();
        let ratio = r1 / r2;
        assert!(
            (2.8..5.5).contains(&ratio),
            "ratio {ratio} (r1 {r1:e}, r2 {r2:e})"
        );
    }

    #[test]
    fn dvarphi_step_out_of_range() {
        let orb = orbit(2.0, Branch::Positive, -0.1);
        assert!(matches!(
            dvarphi_db_residual(&orb, 0.2),
            Err(Error::StepOutOfRange { .. })
        ));
    }
}
