//! The period map L(B) by direct quadrature of
//! L = 2 * int_{b1}^{b2} dh / sqrt(G(h)).
//!
//! The integrand carries inverse-square-root singularities at both turning
//! points. The substitution h = m + r sin t (m the midpoint, r the radius)
//! removes them exactly when the zeros of G are simple; the transformed
//! integrand extends smoothly to t = +-pi/2. Tanh-sinh quadrature then
//! clusters nodes toward the endpoints and mops up the residual boundary
//! layers that appear near degenerate energy levels.

use crate::error::{Error, Result};
use crate::model::{Branch, Model, OrbitSpec};
use std::f64::consts::FRAC_PI_2;

/// Orbits narrower than this are evaluated by the center linearization
/// instead of quadrature; the integrand becomes numerically flat-singular.
pub const NEAR_CENTER_WIDTH: f64 = 1e-6;

/// Default relative tolerance for the period integral.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Node budget ladder: refinement stops once the count would exceed 2^16.
const MAX_NODES: usize = 1 << 16;

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    /// The period L.
    pub period: f64,
    pub nodes_used: usize,
    /// Difference between the two finest refinement levels.
    pub error_estimate: f64,
    /// Set when the near-center guard returned the linearized period.
    pub near_center: bool,
}

/// Tanh-sinh integration of f over (-1, 1).
///
/// Levels halve the mesh in u (x = tanh(pi/2 sinh u)) and reuse previous
/// evaluations; convergence is declared when two successive levels agree to
/// `tol` relative. Nodes whose abscissa rounds onto the endpoints are
/// dropped: the integrands used here are bounded, so the omitted tail is
/// below double precision.
fn tanh_sinh<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<(f64, usize, f64)> {
    const U_MAX: f64 = 3.7;
    let weight = |u: f64| -> Option<(f64, f64)> {
        let s = FRAC_PI_2 * u.sinh();
        let x = s.tanh();
        if x.abs() >= 1.0 - 1e-16 {
            return None;
        }
        let c = s.cosh();
        Some((x, FRAC_PI_2 * u.cosh() / (c * c)))
    };

    // Level 0: trapezoidal sum with h0 over all significant nodes.
    let mut h = U_MAX / 32.0;
    let mut nodes = 0usize;
    let mut sum = {
        let mut s = f(0.0) * FRAC_PI_2; // u = 0: x = 0, w = pi/2
        nodes += 1;
        let mut j = 1;
        loop {
            let u = h * j as f64;
            if u > U_MAX {
                break;
            }
            match (weight(u), weight(-u)) {
                (Some((xp, wp)), Some((xm, wm))) => {
                    s += wp * f(xp) + wm * f(xm);
                    nodes += 2;
                }
                _ => break,
            }
            j += 1;
        }
        s * h
    };

    let mut level = 0usize;
    loop {
        // Refine: new nodes sit at odd multiples of h/2.
        let h2 = 0.5 * h;
        let mut add = 0.0;
        let mut j = 1;
        loop {
            let u = h2 * j as f64;
            if u > U_MAX {
                break;
            }
            match (weight(u), weight(-u)) {
                (Some((xp, wp)), Some((xm, wm))) => {
                    add += wp * f(xp) + wm * f(xm);
                    nodes += 2;
                }
                _ => break,
            }
            j += 2;
        }
        let refined = 0.5 * sum + h2 * add;
        let err = (refined - sum).abs();
        sum = refined;
        h = h2;
        level += 1;
        // two levels minimum so the first coarse sum cannot self-certify
        if level >= 2 && err <= tol * sum.abs().max(f64::MIN_POSITIVE) {
            return Ok((sum, nodes, err));
        }
        if nodes > MAX_NODES {
            return Err(Error::NoConvergence(format!(
                "tanh-sinh ladder exhausted at {nodes} nodes (last delta {err:e})"
            )));
        }
    }
}

/// Transformed period integrand evaluated at the tanh-sinh abscissa
/// x in (-1, 1): t = (pi/2) x, h = m + r sin t, value 2 r cos t / sqrt(G(h)),
/// scaled by the dt = (pi/2) dx factor.
fn transformed_integrand(spec: &OrbitSpec) -> impl Fn(f64) -> f64 + '_ {
    let m = 0.5 * (spec.b1 + spec.b2);
    let r = 0.5 * spec.width();
    move |x: f64| {
        let t = FRAC_PI_2 * x;
        let h = m + r * t.sin();
        let g = spec.g(h);
        if g <= 0.0 {
            // only reachable within rounding distance of the endpoints,
            // where the true contribution is below double precision
            return 0.0;
        }
        FRAC_PI_2 * 2.0 * r * t.cos() / g.sqrt()
    }
}

/// Period of the orbit by tanh-sinh quadrature of the sine-substituted
/// integral, to relative tolerance `tol`.
///
/// Near-degenerate orbits (width below [`NEAR_CENTER_WIDTH`]) return the
/// linearized period 2 pi / sqrt(k-1) with the `near_center` flag set.
pub fn period_integral(spec: &OrbitSpec, tol: f64) -> Result<QuadratureResult> {
    if spec.width() < NEAR_CENTER_WIDTH {
        return Ok(QuadratureResult {
            period: spec.model.linearized_period(),
            nodes_used: 0,
            error_estimate: 0.0,
            near_center: true,
        });
    }
    let (value, nodes_used, error_estimate) = tanh_sinh(transformed_integrand(spec), tol)?;
    Ok(QuadratureResult {
        period: value,
        nodes_used,
        error_estimate,
        near_center: false,
    })
}

/// Convenience: the period at energy level `b` on `branch`.
pub fn period_at(model: Model, branch: Branch, b: f64, tol: f64) -> Result<f64> {
    let spec = OrbitSpec::new(model, branch, b)?;
    Ok(period_integral(&spec, tol)?.period)
}

/// dL/dB by central differences with Richardson extrapolation.
///
/// The step starts at `h_step` and halves until two successive extrapolated
/// values agree to `tol` relative. The quadrature underneath runs four
/// digits tighter than the difference target.
pub fn dldb_fd(model: Model, branch: Branch, b: f64, h_step: f64, tol: f64) -> Result<f64> {
    let (lo, hi) = crate::model::admissible_range(&model, branch)?;
    if !(b - h_step > lo && b + h_step < hi) {
        return Err(Error::StepOutOfRange { b, h_step });
    }
    let quad_tol = (tol * 1e-4).clamp(1e-14, 1e-10);
    let central = |h: f64| -> Result<f64> {
        let lp = period_at(model, branch, b + h, quad_tol)?;
        let lm = period_at(model, branch, b - h, quad_tol)?;
        Ok((lp - lm) / (2.0 * h))
    };
    let mut h = h_step;
    let mut d_prev = central(h)?;
    let mut extrap_prev: Option<f64> = None;
    for _ in 0..6 {
        h *= 0.5;
        let d = central(h)?;
        let extrap = (4.0 * d - d_prev) / 3.0;
        if let Some(prev) = extrap_prev {
            if (extrap - prev).abs() <= tol * extrap.abs().max(1.0) {
                return Ok(extrap);
            }
        }
        extrap_prev = Some(extrap);
        d_prev = d;
    }
    Err(Error::NoConvergence(
        "Richardson ladder for dL/dB did not settle".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Branch, Model};

    fn spec(k: f64, branch: Branch, b: f64) -> OrbitSpec {
        OrbitSpec::new(Model::new(k).unwrap(), branch, b).unwrap()
    }

    // ---- independent oracle: composite Gauss-Legendre ----
    //
    // Panels of 32-point Gauss-Legendre on the sine-substituted integrand,
    // doubling the panel count until two successive totals agree to 1e-10
    // relative. Shares no code with the tanh-sinh path above.

    fn gauss_legendre_32() -> (Vec<f64>, Vec<f64>) {
        let n = 32usize;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = -p / d;
                x += dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x.abs();
            nodes[n - 1 - i] = x.abs();
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    }

    fn legendre(n: usize, x: f64) -> (f64, f64) {
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 2..=n {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, d)
    }

    fn oracle_period(spec: &OrbitSpec) -> f64 {
        let m = 0.5 * (spec.b1 + spec.b2);
        let r = 0.5 * spec.width();
        let f = |t: f64| {
            let h = m + r * t.sin();
            let g = spec.g(h);
            if g <= 0.0 {
                0.0
            } else {
                2.0 * r * t.cos() / g.sqrt()
            }
        };
        let (xs, ws) = gauss_legendre_32();
        let mut prev = f64::NAN;
        let mut panels = 64usize;
        loop {
            let width = std::f64::consts::PI / panels as f64;
            let mut total = 0.0;
            for p in 0..panels {
                let a = -FRAC_PI_2 + width * p as f64;
                let c = a + 0.5 * width;
                let mut s = 0.0;
                for (x, w) in xs.iter().zip(&ws) {
                    s += w * f(c + 0.5 * width * x);
                }
                total += 0.5 * width * s;
            }
            if (total - prev).abs() <= 1e-10 * total.abs() || panels * 32 >= (1 << 20) {
                return total;
            }
            prev = total;
            panels *= 2;
        }
    }

    #[test]
    fn oracle_reproduces_frozen_values() {
        // frozen from an independent high-precision evaluation
        let l = oracle_period(&spec(3.0, Branch::SignChanging, 2.0));
        assert!((l - 4.685680336587079).abs() < 1e-9, "oracle {l}");
        let l = oracle_period(&spec(2.0, Branch::Positive, -0.1));
        assert!((l - 6.736478871550036).abs() < 1e-9, "oracle {l}");
    }

    #[test]
    fn period_matches_frozen_and_oracle() {
        for (k, branch, b, frozen) in [
            (3.0, Branch::SignChanging, 2.0, 4.685680336587079),
            (2.0, Branch::Positive, -0.1, 6.736478871550036),
            (3.0, Branch::SignChanging, 0.5, 6.784478775426384),
            (3.0, Branch::Positive, -0.12, 5.073906988929357),
            (5.0, Branch::SignChanging, 1.0, 4.538309377157916),
            (1.5, Branch::Positive, -0.05, 9.590876081726863),
        ] {
            let s = spec(k, branch, b);
            let r = period_integral(&s, 1e-12).unwrap();
            assert!(
                (r.period - frozen).abs() <= 1e-10 * frozen,
                "k={k} B={b}: got {}, frozen {frozen}",
                r.period
            );
            let l_oracle = oracle_period(&s);
            assert!(
                (r.period - l_oracle).abs() <= 1e-9 * frozen,
                "k={k} B={b}: tanh-sinh {} vs oracle {l_oracle}",
                r.period
            );
            assert!(!r.near_center);
            assert!(r.nodes_used > 0);
        }
    }

    #[test]
    fn stability_under_tightening() {
        // result stable to 1e-10 relative when the tolerance (hence the node
        // count) is pushed further
        let s = spec(3.0, Branch::SignChanging, 2.0);
        let a = period_integral(&s, 1e-9).unwrap();
        let b = period_integral(&s, 1e-13).unwrap();
        assert!(((a.period - b.period) / b.period).abs() < 1e-10);
        assert!(b.nodes_used > a.nodes_used);
        // the reported estimate bounds the observed difference
        assert!((a.period - b.period).abs() <= a.error_estimate.max(1e-15));
    }

    #[test]
    fn near_center_guard_returns_linearization() {
        // B so close to the center energy that the width collapses
        let m = Model::new(2.0).unwrap();
        let b = m.center_energy() + 1e-14;
        let s = OrbitSpec::new(m, Branch::Positive, b).unwrap();
        assert!(s.width() < NEAR_CENTER_WIDTH);
        let r = period_integral(&s, 1e-10).unwrap();
        assert!(r.near_center);
        assert!((r.period - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn center_limit_positive_branch() {
        // small-amplitude limit: L -> 2 pi / sqrt(k-1)
        for k in [2.0, 3.0] {
            let m = Model::new(k).unwrap();
            let b = m.center_energy() + 1e-8;
            let s = OrbitSpec::new(m, Branch::Positive, b).unwrap();
            let r = period_integral(&s, 1e-11).unwrap();
            let lin = m.linearized_period();
            assert!(
                ((r.period - lin) / lin).abs() < 1e-3,
                "k={k}: {} vs {lin}",
                r.period
            );
        }
    }

    #[test]
    fn dldb_matches_frozen_derivatives() {
        // frozen: dL/dB = 9.013060485626989 at k=2, B=-0.1
        let m = Model::new(2.0).unwrap();
        let d = dldb_fd(m, Branch::Positive, -0.1, 1e-4, 1e-8).unwrap();
        assert!(
            (d - 9.013060485626989).abs() < 1e-6,
            "dL/dB = {d}"
        );
        // frozen: dL/dB = -0.6331887105762713 at k=3, B=2
        let m = Model::new(3.0).unwrap();
        let d = dldb_fd(m, Branch::SignChanging, 2.0, 1e-4, 1e-8).unwrap();
        assert!(
            (d - (-0.6331887105762713)).abs() < 1e-7,
            "dL/dB = {d}"
        );
    }

    #[test]
    fn dldb_step_out_of_range() {
        let m = Model::new(2.0).unwrap();
        assert!(matches!(
            dldb_fd(m, Branch::Positive, -1e-12, 1e-5, 1e-7),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn monotone_on_both_branches() {
        // positive branch: L strictly increasing toward B = 0
        let m = Model::new(2.0).unwrap();
        let mut prev = 0.0;
        for i in 0..20 {
            let t = i as f64 / 19.0;
            let b = m.center_energy() * (0.99 * (1.0 - t) + 0.01 * t);
            let l = period_at(m, Branch::Positive, b, 1e-10).unwrap();
            assert!(l > prev, "not increasing at B = {b}");
            prev = l;
        }
        // sign-changing branch: L strictly decreasing in B
        let m = Model::new(3.0).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let b = 0.05 * (20.0f64 / 0.05).powf(i as f64 / 19.0);
            let l = period_at(m, Branch::SignChanging, b, 1e-10).unwrap();
            assert!(l < prev, "not decreasing at B = {b}");
            prev = l;
        }
    }

    #[test]
    fn limits_toward_separatrix_and_infinity() {
        let m2 = Model::new(2.0).unwrap();
        let l2 = |b: f64| period_at(m2, Branch::Positive, b, 1e-10).unwrap();
        assert!(l2(-1e-2) < l2(-1e-4));
        assert!(l2(-1e-4) < l2(-1e-6));
        let m3 = Model::new(3.0).unwrap();
        let l3 = |b: f64| period_at(m3, Branch::SignChanging, b, 1e-10).unwrap();
        assert!(l3(1e-2) > l3(1.0));
        assert!(l3(1.0) > l3(10.0));
        assert!(l3(100.0) < l3(10.0));
    }
}
