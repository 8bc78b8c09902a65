//! Embedded Dormand-Prince 5(4) integrator with PI step-size control and
//! dense output.
//!
//! The driver steps a fixed-dimension first-order system, optionally hitting
//! a list of output points exactly (the step is clipped onto each target, so
//! target states carry the full fifth-order accuracy instead of the dense
//! interpolant's). The dense interpolant is used for event bracketing.

use crate::error::{Error, Result};
use std::ops::ControlFlow;

// Butcher tableau, Dormand & Prince RK5(4)7M.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Embedded error coefficients e = b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // largest step decrease
const FAC_MAX: f64 = 10.0; // largest step increase

/// One accepted step with its quartic Hermite-type interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub x0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    /// Interpolate the full state at x inside [x0, x0+h].
    pub fn eval(&self, x: f64) -> [f64; N] {
        let theta = (x - self.x0) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            out[i] = c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
        }
        out
    }

    pub fn eval_component(&self, i: usize, x: f64) -> f64 {
        let theta = (x - self.x0) / self.h;
        let th1 = 1.0 - theta;
        let c = &self.cont;
        c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-12,
            max_steps: 20_000_000,
        }
    }
}

impl Integrator {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            atol: tol,
            rtol: tol,
            ..Self::default()
        }
    }

    /// Initial step-size heuristic (order-5 variant of Hairer's HINIT).
    fn initial_step<const N: usize>(
        &self,
        f: &impl Fn(f64, &[f64; N]) -> [f64; N],
        x0: f64,
        y0: &[f64; N],
        f0: &[f64; N],
        dir: f64,
        h_max: f64,
    ) -> f64 {
        let sk = |y: &[f64; N], i: usize| self.atol + self.rtol * y[i].abs();
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            d0 += (y0[i] / sk(y0, i)).powi(2);
            d1 += (f0[i] / sk(y0, i)).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(h_max);
        let mut y1 = *y0;
        for i in 0..N {
            y1[i] += dir * h0 * f0[i];
        }
        let f1 = f(x0 + dir * h0, &y1);
        let mut d2: f64 = 0.0;
        for i in 0..N {
            d2 += ((f1[i] - f0[i]) / sk(y0, i)).powi(2);
        }
        d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        dir * (100.0 * h0).min(h1).min(h_max)
    }

    /// Integrate from (x0, y0) to x_end. The observer sees every accepted
    /// step (with dense output) and the state at the step end; returning
    /// `ControlFlow::Break` stops the integration after that step.
    ///
    /// Returns the final (x, y) — either at x_end or where the observer broke.
    pub fn solve<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N],
        x0: f64,
        y0: [f64; N],
        x_end: f64,
        mut observer: impl FnMut(&DenseStep<N>, &[f64; N]) -> ControlFlow<()>,
    ) -> Result<(f64, [f64; N])> {
        if x_end == x0 {
            return Ok((x0, y0));
        }
        let dir = (x_end - x0).signum();
        let span = (x_end - x0).abs();
        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        let mut h = self.initial_step(&f, x, &y, &k1, dir, span);
        if h == 0.0 || !h.is_finite() {
            h = dir * 1e-6;
        }
        let mut facold: f64 = 1e-4;
        let mut last = false;

        let mut stages = [[0.0; N]; 7];
        for _ in 0..self.max_steps {
            if (x + h - x_end) * dir > 0.0 {
                h = x_end - x;
                last = true;
            }
            // Seven stages; k1 is fresh (FSAL) from the previous step.
            stages[0] = k1;
            let mut yt = [0.0; N];
            macro_rules! stage {
                ($idx:expr, $row:expr) => {{
                    for i in 0..N {
                        let mut acc = 0.0;
                        for (j, aj) in $row.iter().enumerate() {
                            acc += aj * stages[j][i];
                        }
                        yt[i] = y[i] + h * acc;
                    }
                    stages[$idx] = f(x + C[$idx] * h, &yt);
                }};
            }
            stage!(1, A2);
            stage!(2, A3);
            stage!(3, A4);
            stage!(4, A5);
            stage!(5, A6);
            stage!(6, A7); // yt now holds the fifth-order solution y1
            let y1 = yt;
            let k7 = stages[6];

            // Scaled error norm of the embedded fourth-order difference.
            let mut err: f64 = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * stages[j][i];
                }
                e *= h;
                let sk = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sk) * (e / sk);
            }
            err = (err / N as f64).sqrt();

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                // accept
                let fac = (fac11 / facold.powf(BETA) / SAFE)
                    .max(1.0 / FAC_MAX)
                    .min(1.0 / FAC_MIN);
                facold = err.max(1e-4);
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y1[i] - y[i];
                    cont[0][i] = y[i];
                    cont[1][i] = dy;
                    cont[2][i] = h * k1[i] - dy;
                    cont[3][i] = dy - h * k7[i] - cont[2][i];
                    let mut d = 0.0;
                    for j in 0..7 {
                        d += D[j] * stages[j][i];
                    }
                    cont[4][i] = h * d;
                }
                let step = DenseStep { x0: x, h, cont };
                x += h;
                y = y1;
                k1 = k7;
                if let ControlFlow::Break(()) = observer(&step, &y) {
                    return Ok((x, y));
                }
                if last {
                    return Ok((x, y));
                }
                h /= fac;
            } else {
                // reject; shrink and retry
                h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
                last = false;
            }
            if h.abs() < 1e-15 * x.abs().max(1.0) {
                return Err(Error::NoConvergence(format!(
                    "step size underflow at x = {x}"
                )));
            }
        }
        Err(Error::NoConvergence(
            "integrator exceeded its step budget".into(),
        ))
    }

    /// Integrate to x_end with no observation.
    pub fn integrate_to<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N],
        x0: f64,
        y0: [f64; N],
        x_end: f64,
    ) -> Result<[f64; N]> {
        let (_, y) = self.solve(f, x0, y0, x_end, |_, _| ControlFlow::Continue(()))?;
        Ok(y)
    }

    /// Integrate while landing on each target exactly (steps are clipped onto
    /// the targets, which must be sorted in the direction of integration).
    /// `on_target(index, state)` fires once per target.
    pub fn integrate_to_targets<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N] + Copy,
        x0: f64,
        y0: [f64; N],
        targets: &[f64],
        mut on_target: impl FnMut(usize, &[f64; N]),
    ) -> Result<[f64; N]> {
        let mut x = x0;
        let mut y = y0;
        for (idx, &t) in targets.iter().enumerate() {
            if t == x {
                on_target(idx, &y);
                continue;
            }
            let (x1, y1) = self.solve(f, x, y, t, |_, _| ControlFlow::Continue(()))?;
            x = x1;
            y = y1;
            on_target(idx, &y);
        }
        Ok(y)
    }
}

/// Locate the first zero of component `comp` after `x_guard` by sign change
/// over accepted steps, refined by bisection on the dense interpolant to a
/// width of 1e-14 * max(1, |x|). Returns (x*, state(x*)).
pub fn first_zero_after<const N: usize>(
    integ: &Integrator,
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    y0: [f64; N],
    comp: usize,
    x_guard: f64,
    horizon: f64,
) -> Result<(f64, [f64; N])> {
    let mut found: Option<DenseStep<N>> = None;
    let mut prev_x = x_guard;
    let mut prev_v: Option<f64> = None;
    integ.solve(f, x0, y0, horizon, |step, y_end| {
        if step.x1() <= x_guard {
            return ControlFlow::Continue(());
        }
        let a = prev_x.max(step.x0).max(x_guard);
        let va = match prev_v {
            Some(v) if a == prev_x => v,
            _ => step.eval_component(comp, a),
        };
        let vb = y_end[comp];
        if va == 0.0 || va.signum() != vb.signum() {
            found = Some(step.clone());
            return ControlFlow::Break(());
        }
        prev_x = step.x1();
        prev_v = Some(vb);
        ControlFlow::Continue(())
    })?;
    let step = found.ok_or_else(|| {
        Error::NoConvergence(format!(
            "no zero of component {comp} found before x = {horizon}"
        ))
    })?;
    let mut a = step.x0.max(x_guard);
    let mut b = step.x1();
    let mut va = step.eval_component(comp, a);
    if va == 0.0 {
        return Ok((a, step.eval(a)));
    }
    while (b - a).abs() > 1e-14 * b.abs().max(1.0) {
        let m = 0.5 * (a + b);
        let vm = step.eval_component(comp, m);
        if vm == 0.0 {
            return Ok((m, step.eval(m)));
        }
        if vm.signum() == va.signum() {
            a = m;
            va = vm;
        } else {
            b = m;
        }
    }
    let x_star = 0.5 * (a + b);
    Ok((x_star, step.eval(x_star)))
}
