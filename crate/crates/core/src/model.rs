//! The equation -phi'' + phi - phi^k = 0, its first integral, branch
//! classification and turning points.
//!
//! The planar system phi' = xi, xi' = phi - phi^k conserves
//! E(phi, xi) = xi^2/2 - phi^2/2 + phi^(k+1)/(k+1). Orbits live on level
//! sets E = B. Two families of periodic orbits exist: positive orbits
//! around the center (1, 0) for B in ((1-k)/(2(k+1)), 0), and, for odd
//! integer k, sign-changing orbits outside the separatrix for B > 0.

use crate::error::{Error, Result};

/// Exponents within this distance of an odd integer are treated as exact.
pub const ODD_INTEGER_TOL: f64 = 1e-12;

/// Default absolute tolerance on |G| for turning-point root finding.
pub const DEFAULT_ROOT_TOL: f64 = 1e-13;

/// The model is the single exponent k > 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    k: f64,
    /// Set when k is an integer (within [`ODD_INTEGER_TOL`]); integer powers
    /// are then evaluated with `powi`, which is defined for negative bases.
    int_k: Option<i32>,
}

impl Model {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(Error::Domain { k, phi: f64::NAN });
        }
        let rounded = k.round();
        let int_k = if (k - rounded).abs() < ODD_INTEGER_TOL {
            Some(rounded as i32)
        } else {
            None
        };
        Ok(Self { k, int_k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// True iff k is an odd integer (the sign-changing branch exists).
    pub fn is_odd_integer_k(&self) -> bool {
        matches!(self.int_k, Some(n) if n % 2 == 1)
    }

    /// phi^(k+p) for integer offset p, without a domain check. For integer k
    /// this is exact for negative bases; for real k the caller must keep
    /// phi >= 0 (positive-branch orbits do).
    #[inline]
    pub fn pow_k_offset(&self, phi: f64, p: i32) -> f64 {
        match self.int_k {
            Some(n) => phi.powi(n + p),
            None => phi.powf(self.k + f64::from(p)),
        }
    }

    /// First integral E(phi, xi) = xi^2/2 - phi^2/2 + phi^(k+1)/(k+1).
    pub fn energy(&self, phi: f64, xi: f64) -> Result<f64> {
        if phi < 0.0 && self.int_k.is_none() {
            return Err(Error::Domain { k: self.k, phi });
        }
        Ok(self.energy_unchecked(phi, xi))
    }

    #[inline]
    pub fn energy_unchecked(&self, phi: f64, xi: f64) -> f64 {
        0.5 * xi * xi - 0.5 * phi * phi + self.pow_k_offset(phi, 1) / (self.k + 1.0)
    }

    /// G(h) = -2 h^(k+1)/(k+1) + h^2 + 2B; the squared velocity on the level
    /// set E = B, i.e. G(h) = xi^2 when phi = h. Turning points are its zeros.
    #[inline]
    pub fn g(&self, h: f64, b: f64) -> f64 {
        -2.0 * self.pow_k_offset(h, 1) / (self.k + 1.0) + h * h + 2.0 * b
    }

    /// dG/dh = -2 h^k + 2h.
    #[inline]
    pub fn g_prime(&self, h: f64) -> f64 {
        2.0 * (h - self.pow_k_offset(h, 0))
    }

    /// Energy of the center equilibrium (1, 0): (1-k)/(2(k+1)), the lower
    /// endpoint of the positive-branch range.
    pub fn center_energy(&self) -> f64 {
        (1.0 - self.k) / (2.0 * (self.k + 1.0))
    }

    /// Period of the linearized oscillation around the center: 2 pi / sqrt(k-1).
    pub fn linearized_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.k - 1.0).sqrt()
    }
}

/// Which family of periodic orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Orbits around the center (1, 0); phi > 0 along the whole orbit.
    Positive,
    /// Zero-mean orbits outside the separatrix; only for odd integer k.
    SignChanging,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Positive => "positive",
            Branch::SignChanging => "signchanging",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(Branch::Positive),
            "signchanging" | "sign-changing" | "sc" => Ok(Branch::SignChanging),
            other => Err(format!("unknown branch '{other}'")),
        }
    }
}

/// Open interval of admissible energy levels for a branch.
pub fn admissible_range(model: &Model, branch: Branch) -> Result<(f64, f64)> {
    match branch {
        Branch::Positive => Ok((model.center_energy(), 0.0)),
        Branch::SignChanging => {
            if model.is_odd_integer_k() {
                Ok((0.0, f64::INFINITY))
            } else {
                Err(Error::BranchUnavailable { k: model.k() })
            }
        }
    }
}

fn check_admissible(model: &Model, branch: Branch, b: f64) -> Result<()> {
    let (lo, hi) = admissible_range(model, branch)?;
    if b > lo && b < hi {
        Ok(())
    } else {
        Err(Error::DegenerateOrbit { b })
    }
}

/// Bisection refined by safeguarded Newton for a simple zero of G inside a
/// sign-changing bracket. Terminates on |G| <= tol.
fn refine_root(model: &Model, b: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut g_lo = model.g(lo, b);
    let g_hi = model.g(hi, b);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoConvergence(format!(
            "turning-point bracket [{lo}, {hi}] does not change sign"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = model.g(x, b);
        if g.abs() <= tol {
            return Ok(x);
        }
        // Maintain the bracket.
        if g.signum() == g_lo.signum() {
            lo = x;
            g_lo = g;
        } else {
            hi = x;
        }
        // Newton step, safeguarded: fall back to bisection when the step
        // leaves the bracket or the derivative is too small.
        let dg = model.g_prime(x);
        let newton = x - g / dg;
        x = if dg != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence(
        "turning-point refinement exceeded the iteration budget".into(),
    ))
}

/// Turning points (b1, b2) of the orbit at energy level `b`: the bracketing
/// simple zeros of G. For the positive branch 0 < b1 < 1 < b2; for the
/// sign-changing branch b1 = -b2 exactly (G is even for odd k).
pub fn turning_points(model: &Model, b: f64, branch: Branch, tol: f64) -> Result<(f64, f64)> {
    check_admissible(model, branch, b)?;
    match branch {
        Branch::Positive => {
            // G(0+) = 2B < 0 and G(1) = (k-1)/(k+1) + 2B > 0 for admissible B,
            // so each side of the center holds exactly one simple zero.
            let eps = 1e-300;
            let b1 = refine_root(model, b, eps, 1.0, tol)?;
            let mut hmax = 2.0;
            while model.g(hmax, b) > 0.0 {
                hmax *= 2.0;
                if hmax > 1e12 {
                    return Err(Error::NoConvergence(
                        "upper turning point not bracketed".into(),
                    ));
                }
            }
            let b2 = refine_root(model, b, 1.0, hmax, tol)?;
            Ok((b1, b2))
        }
        Branch::SignChanging => {
            let mut hmax = 2.0;
            while model.g(hmax, b) > 0.0 {
                hmax *= 2.0;
                if hmax > 1e12 {
                    return Err(Error::NoConvergence(
                        "upper turning point not bracketed".into(),
                    ));
                }
            }
            // G increases on (0, 1) and decreases beyond h = 1, with
            // G(1) > 0, so the single positive zero lies in (1, hmax).
            let b2 = refine_root(model, b, 1.0, hmax, tol)?;
            Ok((-b2, b2))
        }
    }
}

/// A fully identified periodic orbit: branch, energy level and turning points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub model: Model,
    pub branch: Branch,
    /// Energy level B.
    pub b: f64,
    /// Minimum of phi over one period.
    pub b1: f64,
    /// Maximum of phi over one period.
    pub b2: f64,
}

impl OrbitSpec {
    pub fn new(model: Model, branch: Branch, b: f64) -> Result<Self> {
        Self::with_root_tol(model, branch, b, DEFAULT_ROOT_TOL)
    }

    pub fn with_root_tol(model: Model, branch: Branch, b: f64, tol: f64) -> Result<Self> {
        let (b1, b2) = turning_points(&model, b, branch, tol)?;
        Ok(Self {
            model,
            branch,
            b,
            b1,
            b2,
        })
    }

    /// Orbit amplitude b2 - b1.
    pub fn width(&self) -> f64 {
        self.b2 - self.b1
    }

    /// G evaluated at this spec's energy level.
    #[inline]
    pub fn g(&self, h: f64) -> f64 {
        self.model.g(h, self.b)
    }
}
