//! The lifetime model: each entity's lifetime is the first arrival between an
//! idiosyncratic shock and a single systemic shock shared by all entities.
//!
//! The systemic arrival time is `X0 = min(Y_0, ..., Y_d)` where `Y_0` is fully
//! independent and each remaining `Y_j` is coupled to the idiosyncratic shock
//! `X_j` of entity `j` through a bivariate Archimedean copula. All arrival
//! times are exponential powers of the baseline survival `G(x) = exp(-x)`,
//! so the dependence structure of the lifetimes `T_j = min(X_j, X0)` is fully
//! described by the ratios `alpha_j = lambda0 / (lambda0 + lambda_j)`, the
//! systemic weights `theta_j = gamma_j / lambda0`, and the copula parameters.

use crate::archimedean::{ArchimedeanGenerator, Family, PairCopula};
use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;

/// The fixed baseline survival function `G(x) = exp(-x)` together with its
/// quantile. Every arrival time in the model is distributed as a power of
/// `G`, which makes all margins exponential.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineSurvival;

impl BaselineSurvival {
    /// `G(x) = exp(-x)` for `x >= 0`.
    pub fn survival(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        (-x).exp()
    }

    /// Solves `G(x) = p` for `p` in `(0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        debug_assert!(p > 0.0 && p <= 1.0);
        -p.ln()
    }
}

/// Full parameter set of the model for `d` entities.
///
/// Stored in the dependence parameterization `(alpha, theta, beta)` plus the
/// free intensity scale `lambda0`; the shock intensities `gamma_j`,
/// `lambda_j`, `eta_j` are derived views. Invariants enforced on
/// construction:
///
/// * `theta` has `d + 1` entries (index 0 is the weight of the fully
///   independent shock) summing to 1 within `1e-9`;
/// * `alpha_j` lies in `(0, 1]`; `alpha_j = 1` means entity `j` has no
///   idiosyncratic shock at all;
/// * one generator per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    lambda0: f64,
    alpha: Vec<f64>,
    theta: Vec<f64>,
    gens: Vec<ArchimedeanGenerator>,
}

impl ModelParams {
    pub fn new(
        lambda0: f64,
        alpha: Vec<f64>,
        theta: Vec<f64>,
        gens: Vec<ArchimedeanGenerator>,
    ) -> Result<Self> {
        let d = alpha.len();
        if d == 0 {
            return Err(Error::Validation("need at least one entity".into()));
        }
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::Validation(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        if theta.len() != d + 1 {
            return Err(Error::Validation(format!(
                "theta must have d+1 = {} entries, got {}",
                d + 1,
                theta.len()
            )));
        }
        if gens.len() != d {
            return Err(Error::Validation(format!(
                "need one generator per entity ({d}), got {}",
                gens.len()
            )));
        }
        for (j, &a) in alpha.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Validation(format!(
                    "alpha_{} must lie in (0, 1], got {a}",
                    j + 1
                )));
            }
        }
        for (j, &t) in theta.iter().enumerate() {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Validation(format!(
                    "theta_{j} must be nonnegative, got {t}"
                )));
            }
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "theta must sum to 1 within 1e-9, got {sum}"
            )));
        }
        Ok(Self {
            lambda0,
            alpha,
            theta,
            gens,
        })
    }

    /// Builds parameters from the shock intensities: `gamma` holds the
    /// `d + 1` systemic component intensities (`gamma_0` first) and `eta` the
    /// `d` combined intensities of `Z_j = min(Y_j, X_j)`. Requires
    /// `eta_j >= gamma_j` (so the idiosyncratic intensity
    /// `lambda_j = eta_j - gamma_j` is nonnegative) and at least one positive
    /// `gamma`.
    pub fn from_intensities(
        gamma: &[f64],
        eta: &[f64],
        gens: Vec<ArchimedeanGenerator>,
    ) -> Result<Self> {
        if gamma.len() != eta.len() + 1 {
            return Err(Error::Validation(format!(
                "gamma must have one more entry than eta, got {} and {}",
                gamma.len(),
                eta.len()
            )));
        }
        let d = eta.len();
        if d == 0 {
            return Err(Error::Validation("need at least one entity".into()));
        }
        for (j, &g) in gamma.iter().enumerate() {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::Validation(format!(
                    "gamma_{j} must be nonnegative, got {g}"
                )));
            }
        }
        for j in 0..d {
            if !(eta[j] > 0.0) || !eta[j].is_finite() {
                return Err(Error::Validation(format!(
                    "eta_{} must be positive, got {}",
                    j + 1,
                    eta[j]
                )));
            }
            if eta[j] < gamma[j + 1] {
                return Err(Error::Validation(format!(
                    "eta_{} = {} is below gamma_{} = {}",
                    j + 1,
                    eta[j],
                    j + 1,
                    gamma[j + 1]
                )));
            }
        }
        let lambda0: f64 = gamma.iter().sum();
        if lambda0 <= 0.0 {
            return Err(Error::Validation(
                "at least one gamma must be positive (no systemic shock otherwise)".into(),
            ));
        }
        let alpha: Vec<f64> = (0..d)
            .map(|j| {
                let lambda_j = eta[j] - gamma[j + 1];
                lambda0 / (lambda0 + lambda_j)
            })
            .collect();
        let theta: Vec<f64> = gamma.iter().map(|g| g / lambda0).collect();
        Self::new(lambda0, alpha, theta, gens)
    }

    /// Number of entities.
    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// `alpha_j` for entity `j` in `1..=d`.
    pub fn alpha(&self, j: usize) -> f64 {
        self.alpha[j - 1]
    }

    /// `theta_j` for `j` in `0..=d` (`j = 0` is the independent shock).
    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    /// Generator of the pair `(Y_j, X_j)` for entity `j` in `1..=d`.
    pub fn generator(&self, j: usize) -> &ArchimedeanGenerator {
        &self.gens[j - 1]
    }

    /// Copula of the pair `(Y_j, X_j)` for entity `j` in `1..=d`.
    pub fn pair_copula(&self, j: usize) -> PairCopula {
        PairCopula::new(self.gens[j - 1])
    }

    /// Idiosyncratic intensity `lambda_j = lambda0 (1 - alpha_j) / alpha_j`.
    pub fn lambda(&self, j: usize) -> f64 {
        let a = self.alpha(j);
        self.lambda0 * (1.0 - a) / a
    }

    /// Systemic component intensity `gamma_j = theta_j * lambda0`, `j` in `0..=d`.
    pub fn gamma(&self, j: usize) -> f64 {
        self.theta[j] * self.lambda0
    }

    /// Combined intensity `eta_j = gamma_j + lambda_j` of `Z_j`.
    pub fn eta(&self, j: usize) -> f64 {
        self.gamma(j) + self.lambda(j)
    }

    /// Total intensity `sum_{j=0..d} lambda_j` of the diagonal
    /// `T_1 = ... = T_d`, with `lambda_0 = lambda0`.
    pub fn lambda_hat(&self) -> f64 {
        self.lambda0 + (1..=self.d()).map(|j| self.lambda(j)).sum::<f64>()
    }

    /// The derived survival-function view of these parameters.
    pub fn law(&self) -> LifetimeLaw<'_> {
        LifetimeLaw { params: self }
    }

    /// Marginal survival of the idiosyncratic shock `X_j`:
    /// `phi_j(phi_j_inv(G^eta_j(x)) - phi_j_inv(G^gamma_j(x)))`.
    ///
    /// Short-circuits the two degenerate cases: `gamma_j = 0` (independent of
    /// `Y_j`, plain `G^eta_j`) and `lambda_j = 0` (no idiosyncratic shock,
    /// survival identically 1).
    pub fn marginal_survival_x(&self, j: usize, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        if x == 0.0 {
            return 1.0;
        }
        let lambda_j = self.lambda(j);
        if lambda_j == 0.0 {
            return 1.0;
        }
        let gamma_j = self.gamma(j);
        let eta_j = gamma_j + lambda_j;
        let gen = self.generator(j);
        let sz = (-eta_j * x).exp();
        if gamma_j == 0.0 || sz == 0.0 {
            return sz;
        }
        let sy = (-gamma_j * x).exp();
        gen.phi(gen.phi_inv_raw(sz) - gen.phi_inv_raw(sy))
    }

    /// Joint survival of the lifetimes: with `m = max_i t_i`,
    /// `G^gamma_0(m) * prod_j C_j(G^gamma_j(m), S_X_j(t_j))`.
    pub fn joint_survival(&self, t: &[f64]) -> f64 {
        assert_eq!(t.len(), self.d(), "need one time per entity");
        let m = t.iter().fold(0.0f64, |acc, &x| acc.max(x));
        let mut acc = (-self.gamma(0) * m).exp();
        for j in 1..=self.d() {
            let sy = (-self.gamma(j) * m).exp();
            let sx = self.marginal_survival_x(j, t[j - 1]);
            acc *= self.pair_copula(j).cdf(sy, sx);
        }
        acc
    }

    /// Marginal survival of the lifetime `T_j`: `G^(lambda0 + lambda_j)(x)`.
    pub fn marginal_survival_t(&self, j: usize, x: f64) -> f64 {
        (-(self.lambda0 + self.lambda(j)) * x).exp()
    }

    /// Survival copula of the lifetime vector evaluated at `u`:
    /// `min_i u_i^(alpha_i theta_0) * prod_j phi_j[phi_j_inv(min_i u_i^(alpha_i theta_j))
    ///  + phi_j_inv(u_j^(1 - alpha_j (1 - theta_j))) - phi_j_inv(u_j^(alpha_j theta_j))]`.
    pub fn survival_copula(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.d(), "need one coordinate per entity");
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        if u.iter().all(|&x| x >= 1.0) {
            return 1.0;
        }
        // min_i u_i^(alpha_i theta) = (min_i u_i^alpha_i)^theta
        let m = (0..self.d())
            .map(|i| u[i].powf(self.alpha[i]))
            .fold(f64::INFINITY, f64::min);
        let mut acc = m.powf(self.theta[0]);
        for j in 1..=self.d() {
            let gen = self.generator(j);
            let a = self.alpha(j);
            let th = self.theta[j];
            let uj = u[j - 1].min(1.0);
            let head = gen.phi_inv_raw(m.powf(th));
            let upper = gen.phi_inv_raw(uj.powf(1.0 - a * (1.0 - th)));
            let lower = gen.phi_inv_raw(uj.powf(a * th));
            acc *= gen.phi((head + upper - lower).max(0.0));
        }
        acc
    }

    /// Survival copula of the pair `(T_i, T_k)`. Collapses the remaining
    /// entities' weights into the minimum term; with `alpha_i = 1` this is
    /// the survival copula of `(X0, T_k)`.
    pub fn pair_survival_copula(&self, i: usize, k: usize, ui: f64, uk: f64) -> Result<f64> {
        if i == k {
            return Err(Error::Usage(format!("pair indices must differ, got {i}")));
        }
        if ui <= 0.0 || uk <= 0.0 {
            return Ok(0.0);
        }
        let (ui, uk) = (ui.min(1.0), uk.min(1.0));
        let m = ui.powf(self.alpha(i)).min(uk.powf(self.alpha(k)));
        let mut acc = m.powf(1.0 - self.theta[i] - self.theta[k]);
        for (j, uj) in [(i, ui), (k, uk)] {
            let gen = self.generator(j);
            let a = self.alpha(j);
            let th = self.theta[j];
            let head = gen.phi_inv_raw(m.powf(th));
            let upper = gen.phi_inv_raw(uj.powf(1.0 - a * (1.0 - th)));
            let lower = gen.phi_inv_raw(uj.powf(a * th));
            acc *= gen.phi((head + upper - lower).max(0.0));
        }
        Ok(acc)
    }

    /// `P(T_1 = ... = T_d > t)`: the singular mass of the distribution
    /// beyond horizon `t`. Uses the closed form when all generators belong
    /// to one family (independence blends with either) and falls back to
    /// quadrature for mixed families.
    pub fn simultaneous_default_prob(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let clayton_ok = self
            .gens
            .iter()
            .all(|g| matches!(g.family(), Family::Clayton | Family::Independence));
        if clayton_ok {
            return self.simultaneous_clayton(t);
        }
        let gumbel_ok = self
            .gens
            .iter()
            .all(|g| matches!(g.family(), Family::Gumbel | Family::Independence));
        if gumbel_ok {
            return self.simultaneous_gumbel(t);
        }
        self.simultaneous_default_prob_numeric(t)
    }

    /// Clayton closed form; independence enters as `beta = 0`.
    fn simultaneous_clayton(&self, t: f64) -> f64 {
        let lh = self.lambda_hat();
        let g = (-t).exp();
        let mut p = self.gamma(0) / lh * g.powf(lh);
        for j in 1..=self.d() {
            let gamma_j = self.gamma(j);
            if gamma_j == 0.0 {
                continue;
            }
            let beta = match self.generator(j).family() {
                Family::Clayton => self.generator(j).beta(),
                _ => 0.0,
            };
            let rate = lh + self.lambda(j) * beta;
            p += gamma_j / rate * g.powf(rate);
        }
        p
    }

    /// Gumbel closed form; independence enters as `beta = 1`. A zero
    /// `gamma_j` contributes nothing (its weight vanishes faster than the
    /// diverging base).
    fn simultaneous_gumbel(&self, t: f64) -> f64 {
        let lh = self.lambda_hat();
        let g = (-t).exp();
        let mut coeff = self.gamma(0) / lh;
        for j in 1..=self.d() {
            let gamma_j = self.gamma(j);
            if gamma_j == 0.0 {
                continue;
            }
            let beta = match self.generator(j).family() {
                Family::Gumbel => self.generator(j).beta(),
                _ => 1.0,
            };
            coeff += gamma_j / lh * (1.0 + self.lambda(j) / gamma_j).powf(1.0 - beta);
        }
        coeff * g.powf(lh)
    }

    /// Quadrature evaluation of the singular mass, valid for any mix of
    /// generator families:
    ///
    /// `gamma_0/lh * G^lh(t) + sum_j gamma_j * int_0^G(t) y^(lh - lambda_j - 1)
    ///  h_j(y^eta_j) / h_j(y^gamma_j) dy`.
    ///
    /// The substitution `y = s^(1/lh)` removes the endpoint power singularity;
    /// the transformed integrand is the bounded ratio
    /// `h_j(y^eta_j) / (h_j(y^gamma_j) y^lambda_j) / lh`.
    pub fn simultaneous_default_prob_numeric(&self, t: f64) -> f64 {
        let lh = self.lambda_hat();
        let g = (-t).exp();
        let upper = g.powf(lh);
        let mut p = self.gamma(0) / lh * upper;
        for j in 1..=self.d() {
            let gamma_j = self.gamma(j);
            if gamma_j == 0.0 {
                continue;
            }
            let lambda_j = self.lambda(j);
            let eta_j = gamma_j + lambda_j;
            let gen = *self.generator(j);
            let integrand = move |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                let y = s.powf(1.0 / lh);
                let num = gen.h_raw(y.powf(eta_j).min(1.0 - 1e-16));
                let den = gen.h_raw(y.powf(gamma_j).min(1.0 - 1e-16));
                if num == 0.0 || !den.is_finite() || den == 0.0 {
                    // deep underflow: the true ratio is far below tolerance
                    return 0.0;
                }
                let v = num / den * y.powf(-lambda_j) / lh;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            p += gamma_j * adaptive_simpson(&integrand, 0.0, upper, 1e-9);
        }
        p
    }
}

/// Survival functions of all latent arrival times, derived from
/// [`ModelParams`]. `Y_j` are the systemic components, `Z_j = min(Y_j, X_j)`,
/// `X0 = min_j Y_j`, and `T_j = min(X_j, X0)`.
#[derive(Debug, Clone, Copy)]
pub struct LifetimeLaw<'a> {
    params: &'a ModelParams,
}

impl LifetimeLaw<'_> {
    /// `S_Y_j(x) = G^gamma_j(x)` for `j` in `0..=d` (identically 1 when
    /// `gamma_j = 0`).
    pub fn survival_y(&self, j: usize, x: f64) -> f64 {
        (-self.params.gamma(j) * x).exp()
    }

    /// `S_Z_j(x) = G^eta_j(x)`.
    pub fn survival_z(&self, j: usize, x: f64) -> f64 {
        (-self.params.eta(j) * x).exp()
    }

    /// `S_X0(x) = G^lambda0(x)`.
    pub fn survival_x0(&self, x: f64) -> f64 {
        (-self.params.lambda0() * x).exp()
    }

    /// `S_T_j(x) = G^(lambda0 + lambda_j)(x)`.
    pub fn survival_t(&self, j: usize, x: f64) -> f64 {
        self.params.marginal_survival_t(j, x)
    }

    /// Quantile of the lifetime survival: solves `S_T_j(x) = p`.
    pub fn quantile_t(&self, j: usize, p: f64) -> f64 {
        debug_assert!(p > 0.0 && p <= 1.0);
        -p.ln() / (self.params.lambda0() + self.params.lambda(j))
    }
}
