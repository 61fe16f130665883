//! Strict Archimedean generators and bivariate copula primitives.
//!
//! A strict generator `phi` maps `[0, inf)` onto `(0, 1]` with `phi(0) = 1`,
//! is strictly decreasing and convex, and vanishes at infinity. The induced
//! bivariate copula is `C(u, v) = phi(phi_inv(u) + phi_inv(v))`. Everything
//! downstream (shock model, Kendall analytics, sampling) is expressed through
//! `phi`, its inverse, and the composite `h(x) = phi'(phi_inv(x))`.

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::numeric::bisect_increasing;

/// Generator families supported by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `phi(x) = (1 + x)^(-1/beta)`, `beta > 0`. Lower-tail dependent.
    Clayton,
    /// `phi(x) = exp(-x^(1/beta))`, `beta >= 1`. Upper-tail dependent.
    Gumbel,
    /// `phi(x) = exp(-x)`, the product copula.
    Independence,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Clayton => write!(f, "clayton"),
            Family::Gumbel => write!(f, "gumbel"),
            Family::Independence => write!(f, "independence"),
        }
    }
}

/// A strict Archimedean generator together with its parameter.
///
/// Clayton with `beta -> 0` and Gumbel with `beta = 1` both degenerate to the
/// independence generator; the constructors normalize those cases so `h`
/// never hits a 0/0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchimedeanGenerator {
    family: Family,
    beta: f64,
}

impl ArchimedeanGenerator {
    /// Clayton generator. `beta` below `1e-9` collapses to independence.
    pub fn clayton(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Validation(format!(
                "clayton parameter must be nonnegative, got {beta}"
            )));
        }
        if beta < 1e-9 {
            return Ok(Self::independence());
        }
        Ok(Self {
            family: Family::Clayton,
            beta,
        })
    }

    /// Gumbel generator. `beta = 1` (to within `1e-12`) collapses to
    /// independence.
    pub fn gumbel(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 1.0 {
            return Err(Error::Validation(format!(
                "gumbel parameter must be >= 1, got {beta}"
            )));
        }
        if (beta - 1.0).abs() < 1e-12 {
            return Ok(Self::independence());
        }
        Ok(Self {
            family: Family::Gumbel,
            beta,
        })
    }

    pub fn independence() -> Self {
        Self {
            family: Family::Independence,
            beta: f64::NAN,
        }
    }

    /// Builds a generator of `family` with parameter `beta` (ignored for
    /// independence).
    pub fn from_family(family: Family, beta: f64) -> Result<Self> {
        match family {
            Family::Clayton => Self::clayton(beta),
            Family::Gumbel => Self::gumbel(beta),
            Family::Independence => Ok(Self::independence()),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The dependence parameter. NaN for the independence family.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `phi(x)` for `x >= 0`. Also accepts `x = +inf` (returns 0).
    pub fn phi(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "phi requires x >= 0, got {x}");
        match self.family {
            Family::Clayton => (1.0 + x).powf(-1.0 / self.beta),
            Family::Gumbel => (-x.powf(1.0 / self.beta)).exp(),
            Family::Independence => (-x).exp(),
        }
    }

    /// `phi_inv(u)` for `u` in `(0, 1]`. Returns a domain error outside.
    pub fn phi_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!(
                "phi_inv requires u in (0, 1], got {u}"
            )));
        }
        Ok(self.phi_inv_raw(u))
    }

    #[inline]
    pub(crate) fn phi_inv_raw(&self, u: f64) -> f64 {
        match self.family {
            Family::Clayton => u.powf(-self.beta) - 1.0,
            Family::Gumbel => (-u.ln()).powf(self.beta),
            Family::Independence => -u.ln(),
        }
    }

    /// `h(x) = phi'(phi_inv(x))` for `x` in `(0, 1)`. Always negative.
    pub fn h(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!("h requires x in (0, 1), got {x}")));
        }
        Ok(self.h_raw(x))
    }

    /// `h` extended to `[0, 1]` by IEEE limits: `h(0)` is `0` (Clayton,
    /// independence) and `h(1)` is `-1/beta`, `-inf`, or `-1` depending on
    /// the family. Used where integrands need the one-sided limits.
    #[inline]
    pub(crate) fn h_raw(&self, x: f64) -> f64 {
        match self.family {
            Family::Clayton => -x.powf(1.0 + self.beta) / self.beta,
            Family::Gumbel => -x * (-x.ln()).powf(1.0 - self.beta) / self.beta,
            Family::Independence => -x,
        }
    }
}

/// A bivariate Archimedean copula `C(u, v) = phi(phi_inv(u) + phi_inv(v))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCopula {
    gen: ArchimedeanGenerator,
}

/// Evaluation interface shared by copula implementations: the joint cdf and
/// its partial derivative in the first argument (the conditional cdf of `V`
/// given `U = u`).
pub trait BivariateCopula {
    fn cdf(&self, u: f64, v: f64) -> f64;
    /// `dC/du` extended by one-sided limits at `u` in `{0, 1}`.
    fn partial_u_limit(&self, u: f64, v: f64) -> f64;
}

impl PairCopula {
    pub fn new(gen: ArchimedeanGenerator) -> Self {
        Self { gen }
    }

    pub fn generator(&self) -> &ArchimedeanGenerator {
        &self.gen
    }

    /// `C(u, v)`. Boundary arguments short-circuit before touching
    /// `phi_inv`: a zero coordinate gives 0, a unit coordinate gives the
    /// other coordinate.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v;
        }
        if v >= 1.0 {
            return u;
        }
        self.gen
            .phi(self.gen.phi_inv_raw(u) + self.gen.phi_inv_raw(v))
    }

    /// `dC(u, v)/du = h(C(u, v)) / h(u)`, the conditional cdf of `V` given
    /// `U = u`. Domain error at `u` in `{0, 1}`; use [`BivariateCopula::partial_u_limit`]
    /// where the boundary limits are wanted.
    pub fn partial_u(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "partial_u requires u in (0, 1), got {u}"
            )));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!(
                "partial_u requires v in [0, 1], got {v}"
            )));
        }
        Ok(self.partial_u_raw(u, v))
    }

    #[inline]
    fn partial_u_raw(&self, u: f64, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let c = self.cdf(u, v);
        self.gen.h_raw(c) / self.gen.h_raw(u)
    }

    /// Draws one `(U, V)` pair with copula `C` by conditional inversion:
    /// `U` and `W` uniform, then `V` solves `dC(U, V)/dU = W` by bisection
    /// on `(0, 1)` to width `1e-10`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u = unit_open(rng);
        let w = unit_open(rng);
        (u, self.conditional_inverse(u, w))
    }

    /// Solves `dC(u, v)/du = w` for `v`. The conditional cdf is increasing
    /// in `v` from 0 to 1, so bisection over `(0, 1)` cannot escape the
    /// bracket; 200 halvings is far beyond the 1e-10 width target.
    pub(crate) fn conditional_inverse(&self, u: f64, w: f64) -> f64 {
        if let Family::Independence = self.gen.family {
            return w;
        }
        bisect_increasing(&|v| self.partial_u_raw(u, v), 0.0, 1.0, w, 1e-10, 200)
    }
}

impl BivariateCopula for PairCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        PairCopula::cdf(self, u, v)
    }

    fn partial_u_limit(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            // h(v)/h(1): finite for Clayton and independence, 0 for Gumbel
            if v <= 0.0 {
                return 0.0;
            }
            if v >= 1.0 {
                return 1.0;
            }
            return self.gen.h_raw(v) / self.gen.h_raw(1.0);
        }
        self.partial_u_raw(u, v)
    }
}

/// Uniform draw restricted to the open interval, so that downstream
/// quantile transforms never see an exact 0.
#[inline]
pub(crate) fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>().max(1e-16)
}
