//! Kendall functions and Kendall taus.
//!
//! Two layers of analytics live here:
//!
//! * the asymmetric `C(u, v) = C_phi(u^theta, v) u^(1-theta)` copulas that
//!   couple each idiosyncratic shock to its systemic component, with their
//!   Kendall functions and taus in closed form (Clayton, Gumbel) and in
//!   generic quadrature form;
//! * the pairwise analytics of the lifetime vector `(T_i, T_k)`, again in
//!   closed form per family and through a generic integral representation
//!   that serves as the independent cross-check.
//!
//! The Kendall function `K(t) = P(C(U, V) <= t)` determines Kendall's tau
//! through `tau = 3 - 4 * int_0^1 K(t) dt`; every closed form here is tested
//! against that identity and against brute-force simulation.

use crate::archimedean::{ArchimedeanGenerator, BivariateCopula, Family};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, bisect_increasing};
use crate::shock_model::ModelParams;

/// Default number of interior grid points carried by a [`KendallReport`].
pub const DEFAULT_KENDALL_GRID: usize = 1000;

/// Kendall's tau of the bivariate Marshall-Olkin copula with parameters
/// `alpha_i`, `alpha_k`.
pub fn marshall_olkin_tau(alpha_i: f64, alpha_k: f64) -> f64 {
    alpha_i * alpha_k / (alpha_i + alpha_k - alpha_i * alpha_k)
}

/// Kendall function of the bivariate Marshall-Olkin copula:
/// `K(t) = t - (1 - tau_mo) t ln t`.
pub fn marshall_olkin_kendall_fn(alpha_i: f64, alpha_k: f64, t: f64) -> f64 {
    t - (1.0 - marshall_olkin_tau(alpha_i, alpha_k)) * t * t.ln()
}

/// The tail integral `I(a, inf, beta) = int_a^inf dz / (z^beta (z + 1))`,
/// mapped onto `(0, 1]` by the substitution `w = a / z` and evaluated by
/// adaptive quadrature to absolute tolerance `1e-10`.
///
/// Values overflow to `inf` when `a^(1-beta)` exceeds the float range; the
/// scaled combination `a^beta * I(a, inf, beta)` used internally stays
/// bounded for all `a`.
pub fn improper_tail_integral(a: f64, beta: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!(
            "tail integral requires a > 0, got {a}"
        )));
    }
    if !(beta >= 1.0) {
        return Err(Error::Domain(format!(
            "tail integral requires beta >= 1, got {beta}"
        )));
    }
    Ok(scaled_tail(a, beta) * a.powf(-beta))
}

/// `I(a, b, beta)` with a finite upper bound `b >= a`, computed as the
/// difference of two tails.
pub fn tail_integral(a: f64, b: f64, beta: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!(
            "tail integral requires a > 0, got {a}"
        )));
    }
    if b < a {
        return Err(Error::Domain(format!(
            "tail integral requires b >= a, got a={a}, b={b}"
        )));
    }
    if b == a {
        return Ok(0.0);
    }
    Ok(improper_tail_integral(a, beta)? - improper_tail_integral(b, beta)?)
}

/// `a^beta * I(a, inf, beta) = int_0^1 w^(beta-1) / (1 + w/a) dw`.
/// Bounded by 1 for every `a > 0`, `beta >= 1`; this is the form all tau
/// formulas use so that extreme `a` (degenerate systemic weights) neither
/// overflows nor loses absolute accuracy.
pub(crate) fn scaled_tail(a: f64, beta: f64) -> f64 {
    let f = |w: f64| {
        if w <= 0.0 {
            if beta <= 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            w.powf(beta - 1.0) / (1.0 + w / a)
        }
    };
    adaptive_simpson(&f, 0.0, 1.0, 1e-12)
}

/// The copula `C(u, v) = phi(phi_inv(g(u)) + phi_inv(v)) u / g(u)` with
/// `g(u) = u^theta`, `theta` in `(0, 1]`. This is the survival dependence
/// between the systemic arrival time and one idiosyncratic shock when that
/// shock contributes a fraction `theta` of the systemic intensity;
/// `theta = 1` recovers the plain Archimedean copula.
#[derive(Debug, Clone, Copy)]
pub struct KhoudrajiSpec {
    gen: ArchimedeanGenerator,
    theta: f64,
}

impl KhoudrajiSpec {
    pub fn new(gen: ArchimedeanGenerator, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Domain(format!(
                "theta must lie in (0, 1], got {theta}"
            )));
        }
        Ok(Self { gen, theta })
    }

    pub fn generator(&self) -> &ArchimedeanGenerator {
        &self.gen
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Copula value `phi(phi_inv(u^theta) + phi_inv(v)) * u^(1-theta)`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        let (u, v) = (u.min(1.0), v.min(1.0));
        let head = self.gen.phi_inv_raw(u.powf(self.theta));
        let tail = self.gen.phi_inv_raw(v);
        self.gen.phi(head + tail) * u.powf(1.0 - self.theta)
    }

    /// Kendall function, closed form per family.
    ///
    /// * Clayton: `t (1 + theta/beta) - (1 - theta) t ln t - (theta/beta) t^(1+beta)`.
    /// * Gumbel: `t - t ln t [1 - (beta - 1) a^beta I(a, inf, beta)]` with
    ///   `a = theta / (1 - theta)`; `theta = 1` routes to the Archimedean
    ///   form `t - t ln t / beta` to avoid the degenerate ratio.
    /// * Independence: `t - t ln t` (the copula itself degenerates to `uv`).
    pub fn kendall_fn(&self, t: f64) -> Result<f64> {
        check_unit_open(t)?;
        let th = self.theta;
        Ok(match self.gen.family() {
            Family::Clayton => {
                let b = self.gen.beta();
                t * (1.0 + th / b) - (1.0 - th) * t * t.ln() - th / b * t.powf(1.0 + b)
            }
            Family::Gumbel => {
                let b = self.gen.beta();
                if th >= 1.0 {
                    t - t * t.ln() / b
                } else {
                    let a = th / (1.0 - th);
                    t - t * t.ln() * (1.0 - (b - 1.0) * scaled_tail(a, b))
                }
            }
            Family::Independence => t - t * t.ln(),
        })
    }

    /// Kendall function through the generic integral
    /// `t - t ln t + theta t ln t + theta int_t^1 h(u^(theta-1) t) / h(u^theta) du`,
    /// evaluated by adaptive quadrature. Independent route used to validate
    /// the closed forms.
    pub fn kendall_fn_numeric(&self, t: f64) -> Result<f64> {
        check_unit_open(t)?;
        let th = self.theta;
        let gen = self.gen;
        let f = |u: f64| {
            let num = gen.h_raw((u.powf(th - 1.0) * t).min(1.0 - 1e-16));
            let den = gen.h_raw(u.powf(th).min(1.0));
            let r = num / den;
            if r.is_finite() {
                r
            } else {
                0.0
            }
        };
        let integral = adaptive_simpson(&f, t, 1.0, 1e-9);
        Ok(t - t * t.ln() + th * t * t.ln() + th * integral)
    }

    /// Kendall's tau, closed form per family:
    /// Clayton `theta beta / (beta + 2)`, Gumbel
    /// `(beta - 1) a^beta I(a, inf, beta)`, independence 0.
    pub fn tau(&self) -> f64 {
        let th = self.theta;
        match self.gen.family() {
            Family::Clayton => {
                let b = self.gen.beta();
                th * b / (b + 2.0)
            }
            Family::Gumbel => {
                let b = self.gen.beta();
                if th >= 1.0 {
                    1.0 - 1.0 / b
                } else {
                    (b - 1.0) * scaled_tail(th / (1.0 - th), b)
                }
            }
            Family::Independence => 0.0,
        }
    }

    /// Tau through `3 - 4 int_0^1 K(t) dt` with the numeric Kendall
    /// function. Slow; used as an oracle.
    pub fn tau_numeric(&self) -> f64 {
        let f = |t: f64| {
            if t <= 0.0 {
                0.0
            } else if t >= 1.0 {
                1.0
            } else {
                self.kendall_fn_numeric(t).unwrap()
            }
        };
        3.0 - 4.0 * adaptive_simpson(&f, 0.0, 1.0, 1e-8)
    }
}

fn check_unit_open(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!(
            "kendall function requires t in (0, 1), got {t}"
        )));
    }
    Ok(())
}

/// Kendall function of a copula `C~(u, v) = C(g(u), v) u / g(u)` for a
/// strictly increasing differentiable `g`, computed from the generic
/// representation
///
/// `K(t) = t - t ln t + t ln g(t) + int_t^1 d1C(g(u), l_t(u)) g'(u)/g(u) u du`
///
/// where `l_t(u)` solves `C(g(u), v) = t g(u) / u` (bracketed bisection to
/// `1e-10` inside adaptive quadrature to `1e-9`). This route only needs
/// pointwise access to the base copula and its first partial derivative.
pub fn kendall_fn_generic_pair<C, G, GP>(base: &C, g: G, g_prime: GP, t: f64) -> Result<f64>
where
    C: BivariateCopula,
    G: Fn(f64) -> f64,
    GP: Fn(f64) -> f64,
{
    check_unit_open(t)?;
    let integrand = |u: f64| {
        let u = u.clamp(t, 1.0);
        let gu = g(u).min(1.0);
        let target = (t * gu / u).min(gu);
        let l = bisect_increasing(&|v| base.cdf(gu, v), 0.0, 1.0, target, 1e-10, 200);
        base.partial_u_limit(gu, l) * g_prime(u) / gu * u
    };
    let integral = adaptive_simpson(&integrand, t, 1.0, 1e-9);
    Ok(t - t * t.ln() + t * (g(t).ln()) + integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairRoute {
    Clayton,
    Gumbel,
    Numeric,
}

/// Closed forms exist when the two generators of a pair belong to one family;
/// independence blends with either (Clayton `beta -> 0`, Gumbel `beta = 1`).
fn pair_route(gi: &ArchimedeanGenerator, gk: &ArchimedeanGenerator) -> PairRoute {
    let clayton_ok =
        |g: &ArchimedeanGenerator| matches!(g.family(), Family::Clayton | Family::Independence);
    let gumbel_ok =
        |g: &ArchimedeanGenerator| matches!(g.family(), Family::Gumbel | Family::Independence);
    if clayton_ok(gi) && clayton_ok(gk) {
        PairRoute::Clayton
    } else if gumbel_ok(gi) && gumbel_ok(gk) {
        PairRoute::Gumbel
    } else {
        PairRoute::Numeric
    }
}

/// Parameters of one ordered side of a lifetime pair: entity `own` carries
/// the generator (`theta_own`, `beta_own`) and `alpha_other` belongs to the
/// partner whose minimum operates on it.
#[derive(Debug, Clone, Copy)]
struct PairSide {
    theta_own: f64,
    beta_own: f64,
    alpha_own: f64,
    alpha_other: f64,
}

fn pair_sides(params: &ModelParams, i: usize, k: usize) -> Result<(PairSide, PairSide, f64)> {
    if i == k {
        return Err(Error::Usage(format!("pair indices must differ, got {i}")));
    }
    let d = params.d();
    if i == 0 || k == 0 || i > d || k > d {
        return Err(Error::Usage(format!(
            "pair indices must lie in 1..={d}, got ({i}, {k})"
        )));
    }
    let tau_mo = marshall_olkin_tau(params.alpha(i), params.alpha(k));
    let side_k = PairSide {
        theta_own: params.theta(k),
        beta_own: effective_beta(params.generator(k)),
        alpha_own: params.alpha(k),
        alpha_other: params.alpha(i),
    };
    let side_i = PairSide {
        theta_own: params.theta(i),
        beta_own: effective_beta(params.generator(i)),
        alpha_own: params.alpha(i),
        alpha_other: params.alpha(k),
    };
    Ok((side_i, side_k, tau_mo))
}

fn effective_beta(gen: &ArchimedeanGenerator) -> f64 {
    match gen.family() {
        Family::Independence => 0.0,
        _ => gen.beta(),
    }
}

/// Clayton-side coefficients of the pairwise Kendall function, written as
/// `K = t (1 + c_k + c_i) - t ln t (L_k + L_i) - P_k(t) - P_i(t)`.
/// `beta = 0` is the independence limit where the whole side collapses into
/// the `t ln t` coefficient.
fn clayton_side(side: &PairSide, tau_mo: f64) -> (f64, f64, f64) {
    // rho attaches the partner's alpha deficit to this side
    let rho = (1.0 - side.alpha_own) / side.alpha_own * tau_mo;
    if side.beta_own == 0.0 {
        (0.0, rho, 0.0)
    } else {
        let c = side.theta_own * side.alpha_other / side.beta_own;
        let l = (1.0 - side.theta_own * side.alpha_other) * rho;
        (c, l, side.beta_own * rho)
    }
}

/// Contribution of one Gumbel side to the brace of
/// `K_{i,k}(t) = t - t ln t * brace`: `tau_mo theta (1 - r^(beta-1))`
/// minus the scaled tail-integral term. Vanishes when `theta = 0` or
/// `beta = 1`.
fn gumbel_side_contribution(side: &PairSide, tau_mo: f64) -> f64 {
    let th = side.theta_own;
    let b = side.beta_own;
    if th == 0.0 || b <= 1.0 {
        return 0.0;
    }
    let r = th * side.alpha_own / (1.0 - side.alpha_own * (1.0 - th));
    let prod = (side.alpha_other * th).min(1.0 - 1e-12);
    let s = prod / (1.0 - prod);
    let ub = s / (tau_mo * th) - 1.0;
    let bracket = tau_mo * th * (1.0 - r.powf(b - 1.0));
    let integral = if ub <= s {
        0.0
    } else {
        (b - 1.0) * (scaled_tail(s, b) - (s / ub).powf(b) * scaled_tail(ub, b))
    };
    bracket - integral
}

/// Kendall function of the lifetime pair `(T_i, T_k)`, closed form when the
/// two generators share a family, generic quadrature otherwise.
pub fn kendall_fn_pair(params: &ModelParams, i: usize, k: usize, t: f64) -> Result<f64> {
    check_unit_open(t)?;
    let (side_i, side_k, tau_mo) = pair_sides(params, i, k)?;
    match pair_route(params.generator(i), params.generator(k)) {
        PairRoute::Clayton => {
            let (ck, lk, pk) = clayton_side(&side_k, tau_mo);
            let (ci, li, pi) = clayton_side(&side_i, tau_mo);
            let mut val = t * (1.0 + ck + ci) - t * t.ln() * (lk + li);
            if ck > 0.0 {
                val -= ck * t.powf(1.0 + pk);
            }
            if ci > 0.0 {
                val -= ci * t.powf(1.0 + pi);
            }
            Ok(val)
        }
        PairRoute::Gumbel => {
            let brace = 1.0 - tau_mo
                + gumbel_side_contribution(&side_k, tau_mo)
                + gumbel_side_contribution(&side_i, tau_mo);
            Ok(t - t * t.ln() * brace)
        }
        PairRoute::Numeric => kendall_fn_pair_numeric(params, i, k, t),
    }
}

/// Generic integral form of the pairwise Kendall function under exponential
/// margins: with `c = tau_mo`,
///
/// `K(t) = t - t ln t (A_i + A_k)
///         + theta_k int_{t^alpha_i}^{t^c} y^((1-alpha_i)/alpha_i)
///              h_k(t y^(-(1-theta_k alpha_i)/alpha_i)) / h_k(y^theta_k) dy
///         + theta_i (i <-> k)`.
///
/// Works for any mix of generator families; this is the authoritative route
/// the closed forms are validated against.
pub fn kendall_fn_pair_numeric(params: &ModelParams, i: usize, k: usize, t: f64) -> Result<f64> {
    check_unit_open(t)?;
    let (side_i, side_k, tau_mo) = pair_sides(params, i, k)?;
    let a_i = (1.0 - side_k.theta_own * side_k.alpha_other)
        * ((1.0 - side_k.alpha_own) / side_k.alpha_own)
        * tau_mo;
    let a_k = (1.0 - side_i.theta_own * side_i.alpha_other)
        * ((1.0 - side_i.alpha_own) / side_i.alpha_own)
        * tau_mo;

    let side_integral = |side: &PairSide, gen: ArchimedeanGenerator| -> f64 {
        let th = side.theta_own;
        if th == 0.0 {
            return 0.0;
        }
        let ao = side.alpha_other;
        let q = (1.0 - th * ao) / ao;
        let f = |y: f64| {
            if y <= 0.0 {
                return 0.0;
            }
            let arg = (t * y.powf(-q)).min(1.0 - 1e-16);
            let num = gen.h_raw(arg);
            let den = gen.h_raw(y.powf(th).min(1.0 - 1e-16));
            let r = y.powf((1.0 - ao) / ao) * num / den;
            if r.is_finite() {
                r
            } else {
                0.0
            }
        };
        adaptive_simpson(&f, t.powf(ao), t.powf(tau_mo), 1e-9)
    };

    let up_k = side_integral(&side_k, *params.generator(k));
    let up_i = side_integral(&side_i, *params.generator(i));
    Ok(t - t * t.ln() * (a_i + a_k) + side_k.theta_own * up_k + side_i.theta_own * up_i)
}

/// Kendall's tau of the lifetime pair `(T_i, T_k)`.
///
/// Clayton family: the exact decomposition
/// `tau = tau_mo + tau_bar_i + tau_bar_k` with
/// `tau_bar_i = alpha_i rho_ik theta_k (rho_ik beta_k) / (rho_ik beta_k + 2)`.
/// Gumbel family: `tau = 1 - brace` with the same brace as the Kendall
/// function. Mixed families integrate the generic Kendall function.
pub fn tau_pair(params: &ModelParams, i: usize, k: usize) -> Result<f64> {
    let (side_i, side_k, tau_mo) = pair_sides(params, i, k)?;
    match pair_route(params.generator(i), params.generator(k)) {
        PairRoute::Clayton => {
            Ok(tau_mo + clayton_tau_bar(&side_k, tau_mo) + clayton_tau_bar(&side_i, tau_mo))
        }
        PairRoute::Gumbel => Ok(tau_mo
            - gumbel_side_contribution(&side_k, tau_mo)
            - gumbel_side_contribution(&side_i, tau_mo)),
        PairRoute::Numeric => tau_pair_numeric(params, i, k),
    }
}

/// `tau_bar` of one Clayton side: a rescaled Clayton tau capturing how the
/// dependence inside the pair `(Y, X)` of this side feeds the lifetime pair.
fn clayton_tau_bar(side: &PairSide, tau_mo: f64) -> f64 {
    if side.beta_own == 0.0 {
        return 0.0;
    }
    let rho = (1.0 - side.alpha_own) / side.alpha_own * tau_mo;
    let rb = rho * side.beta_own;
    side.alpha_other * rho * side.theta_own * rb / (rb + 2.0)
}

/// Tau through `3 - 4 int_0^1 K(t) dt` on the generic pairwise Kendall
/// function. Always available; the closed-form routes are checked against it.
pub fn tau_pair_numeric(params: &ModelParams, i: usize, k: usize) -> Result<f64> {
    pair_sides(params, i, k)?;
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            kendall_fn_pair_numeric(params, i, k, t).unwrap()
        }
    };
    Ok(3.0 - 4.0 * adaptive_simpson(&f, 0.0, 1.0, 1e-7))
}

/// Named terms of the pairwise tau split `tau = tau_mo + tau_bar_i + tau_bar_k`.
///
/// `tau_bar_i` is the contribution channelled through entity `k`'s coupling
/// (its `theta_k`, `beta_k` seen from `i`), and symmetrically for
/// `tau_bar_k`. For the Gumbel family the two extra terms have no elementary
/// form and are reported as the evaluated side contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauDecomposition {
    pub tau_mo: f64,
    pub tau_bar_i: f64,
    pub tau_bar_k: f64,
}

/// Kendall function samples and tau for one copula pair.
#[derive(Debug, Clone)]
pub struct KendallReport {
    /// Human-readable pair label, e.g. `"T1,T3"`.
    pub pair: String,
    pub tau: f64,
    /// `(t, K(t))` on a uniform interior grid.
    pub kendall_fn: Vec<(f64, f64)>,
    /// Present when the generators admit a closed-form split.
    pub decomposition: Option<TauDecomposition>,
}

/// Full pairwise report: tau, a sampled Kendall function on `grid` interior
/// points, and the decomposition when the pair is in closed form.
pub fn tau_pair_report(
    params: &ModelParams,
    i: usize,
    k: usize,
    grid: usize,
) -> Result<KendallReport> {
    let (side_i, side_k, tau_mo) = pair_sides(params, i, k)?;
    let tau = tau_pair(params, i, k)?;
    let decomposition = match pair_route(params.generator(i), params.generator(k)) {
        PairRoute::Clayton => Some(TauDecomposition {
            tau_mo,
            tau_bar_i: clayton_tau_bar(&side_k, tau_mo),
            tau_bar_k: clayton_tau_bar(&side_i, tau_mo),
        }),
        PairRoute::Gumbel => Some(TauDecomposition {
            tau_mo,
            tau_bar_i: -gumbel_side_contribution(&side_k, tau_mo),
            tau_bar_k: -gumbel_side_contribution(&side_i, tau_mo),
        }),
        PairRoute::Numeric => None,
    };
    let mut kendall_fn = Vec::with_capacity(grid);
    for m in 1..=grid {
        let t = m as f64 / (grid + 1) as f64;
        kendall_fn.push((t, kendall_fn_pair(params, i, k, t)?));
    }
    Ok(KendallReport {
        pair: format!("T{i},T{k}"),
        tau,
        kendall_fn,
        decomposition,
    })
}

/// Which systemic dependence measure to report for an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemicMode {
    /// `tau(X0, X_k)`: idiosyncratic shock against the systemic arrival
    /// time. The per-entity systemic riskiness measure.
    VsIdiosyncratic,
    /// `tau(X0, T_k)`: observed lifetime against the systemic arrival time.
    VsLifetime,
}

/// Kendall's tau between the systemic arrival time and either the
/// idiosyncratic shock or the observed lifetime of entity `k`.
pub fn tau_systemic(params: &ModelParams, k: usize, mode: SystemicMode) -> Result<f64> {
    if k == 0 || k > params.d() {
        return Err(Error::Usage(format!(
            "entity index must lie in 1..={}, got {k}",
            params.d()
        )));
    }
    let th = params.theta(k);
    let gen = params.generator(k);
    match mode {
        SystemicMode::VsIdiosyncratic => {
            if th == 0.0 {
                return Ok(0.0);
            }
            Ok(KhoudrajiSpec::new(*gen, th)?.tau())
        }
        SystemicMode::VsLifetime => {
            let a = params.alpha(k);
            if a >= 1.0 {
                return Ok(1.0);
            }
            match gen.family() {
                Family::Independence => Ok(a),
                Family::Clayton => {
                    let b = gen.beta();
                    let rb = (1.0 - a) * b;
                    Ok(a + (1.0 - a) * th * rb / (rb + 2.0))
                }
                Family::Gumbel => {
                    if th == 0.0 {
                        return Ok(a);
                    }
                    let b = gen.beta();
                    // cap the theta -> 1 degeneracy of theta/(1-theta)
                    let th = th.min(1.0 - 1e-9);
                    let r = th * a / (1.0 - a * (1.0 - th));
                    let s = th / (1.0 - th);
                    let ub = (1.0 - a * (1.0 - th)) / (a * (1.0 - th));
                    let integral =
                        (b - 1.0) * (scaled_tail(s, b) - (s / ub).powf(b) * scaled_tail(ub, b));
                    Ok(a - a * th * (1.0 - r.powf(b - 1.0)) + integral)
                }
            }
        }
    }
}
