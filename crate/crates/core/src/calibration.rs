//! Moment-based calibration: fit the model's pairwise Kendall taus to
//! empirical ones by least squares over the full parameter set.
//!
//! The feasible set is mapped onto an unconstrained space (logistic maps for
//! the `alpha` and `beta` boxes, a reference-pinned softmax for the simplex
//! of systemic weights) and searched with Nelder-Mead from seeded random
//! restarts. Fits are judged on fitted-tau error: with `3d + 1` parameters
//! against `d(d-1)/2` moments the parameter vector itself is generically not
//! identified, so boundary solutions are flagged rather than rejected.

use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::archimedean::{ArchimedeanGenerator, Family};
use crate::dependence::{tau_pair, tau_systemic, SystemicMode};
use crate::error::{Error, Result};
use crate::shock_model::ModelParams;

/// Symmetric matrix of pairwise Kendall taus, stored as the strict upper
/// triangle with one label per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl TauMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let d = labels.len();
        if d < 2 {
            return Err(Error::Usage(format!("need at least two entities, got {d}")));
        }
        if values.len() != d * (d - 1) / 2 {
            return Err(Error::Usage(format!(
                "need {} upper-triangular entries for {d} entities, got {}",
                d * (d - 1) / 2,
                values.len()
            )));
        }
        for &v in &values {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "tau entries must be finite and in [-1, 1], got {v}"
                )));
            }
        }
        Ok(Self { labels, values })
    }

    /// Builds the matrix by evaluating `f(i, k)` on every pair `i < k`
    /// (1-based indices).
    pub fn from_fn<F: FnMut(usize, usize) -> Result<f64>>(
        labels: Vec<String>,
        mut f: F,
    ) -> Result<Self> {
        let d = labels.len();
        let mut values = Vec::with_capacity(d * (d - 1) / 2);
        for i in 1..=d {
            for k in (i + 1)..=d {
                values.push(f(i, k)?);
            }
        }
        Self::new(labels, values)
    }

    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Tau of the pair `(i, k)`, 1-based, order-insensitive.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let (i, k) = if i < k { (i, k) } else { (k, i) };
        let d = self.d();
        // row-major strict upper triangle
        let idx = (i - 1) * d - (i - 1) * i / 2 + (k - i - 1);
        self.values[idx]
    }

    /// Iterates `(i, k, tau)` over the strict upper triangle, 1-based.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.d();
        (1..=d)
            .flat_map(move |i| ((i + 1)..=d).map(move |k| (i, k)))
            .zip(self.values.iter())
            .map(|((i, k), &v)| (i, k, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Copula family used for every pair during calibration. The application
/// fixes one family for all entities; per-entity mixing stays available for
/// evaluation but not for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationFamily {
    Clayton,
    Gumbel,
}

/// Optimizer settings exposed through the CLI.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Simplex-diameter convergence threshold.
    pub xtol: f64,
    /// Objective value below which a restart is declared converged.
    pub ftol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            restarts: 20,
            seed: 0,
            xtol: 1e-8,
            ftol: 1e-12,
        }
    }
}

/// Result of a calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub params: ModelParams,
    /// Final sum of squared tau deviations.
    pub objective: f64,
    pub fitted_taus: TauMatrix,
    pub n_restarts_used: usize,
    pub converged: bool,
    /// Names of parameters that ended within `1e-3` of a box edge (or a
    /// weight that collapsed to zero). Empty for interior solutions.
    pub boundary: Vec<String>,
}

/// Sum of squared deviations between the target taus and the model's
/// closed-form pairwise taus.
pub fn objective(params: &ModelParams, target: &TauMatrix) -> Result<f64> {
    if params.d() != target.d() {
        return Err(Error::Usage(format!(
            "dimension mismatch: params d={} vs target d={}",
            params.d(),
            target.d()
        )));
    }
    let mut acc = 0.0;
    for (i, k, t_hat) in target.pairs() {
        let t_model = tau_pair(params, i, k)?;
        acc += (t_hat - t_model) * (t_hat - t_model);
    }
    Ok(acc)
}

const ALPHA_EPS: f64 = 1e-6;
const BETA_EPS: f64 = 1e-6;
const BETA_MAX: f64 = 50.0;

/// Bijection between the unconstrained optimizer space and [`ModelParams`].
///
/// Layout of the unconstrained vector `z` (length `3d`): `d` alpha logits,
/// then `d` weight logits (a softmax over `(theta_0..theta_d)` with the
/// `theta_0` logit pinned to 0, which makes the map one-to-one), then `d`
/// beta logits. `lambda0` is fixed to 1: the dependence structure is
/// scale-free, absolute intensities enter only through market data.
#[derive(Debug, Clone, Copy)]
pub struct ParamMap {
    pub d: usize,
    pub family: CalibrationFamily,
}

impl ParamMap {
    pub fn new(d: usize, family: CalibrationFamily) -> Self {
        Self { d, family }
    }

    pub fn dim(&self) -> usize {
        3 * self.d
    }

    fn beta_bounds(&self) -> (f64, f64) {
        match self.family {
            CalibrationFamily::Clayton => (BETA_EPS, BETA_MAX),
            CalibrationFamily::Gumbel => (1.0 + BETA_EPS, BETA_MAX),
        }
    }

    /// Unconstrained -> constrained.
    pub fn to_params(&self, z: &[f64]) -> Result<ModelParams> {
        assert_eq!(z.len(), self.dim());
        let d = self.d;
        let alpha: Vec<f64> = z[..d]
            .iter()
            .map(|&v| logistic(v, ALPHA_EPS, 1.0 - ALPHA_EPS))
            .collect();
        // stable softmax over (0, z_theta_1, .., z_theta_d)
        let logits = &z[d..2 * d];
        let m = logits.iter().fold(0.0f64, |a, &b| a.max(b));
        let w0 = (-m).exp();
        let weights: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
        let denom: f64 = w0 + weights.iter().sum::<f64>();
        let mut theta = Vec::with_capacity(d + 1);
        theta.push(w0 / denom);
        theta.extend(weights.iter().map(|w| w / denom));
        let (blo, bhi) = self.beta_bounds();
        let family = match self.family {
            CalibrationFamily::Clayton => Family::Clayton,
            CalibrationFamily::Gumbel => Family::Gumbel,
        };
        let gens: Result<Vec<ArchimedeanGenerator>> = z[2 * d..]
            .iter()
            .map(|&v| ArchimedeanGenerator::from_family(family, logistic(v, blo, bhi)))
            .collect();
        ModelParams::new(1.0, alpha, theta, gens?)
    }

    /// Constrained -> unconstrained; exact inverse of [`ParamMap::to_params`],
    /// so the round trip unconstrained -> params -> unconstrained is the
    /// identity. Zero weights are floored at `1e-300` before the log.
    pub fn to_unconstrained(&self, params: &ModelParams) -> Vec<f64> {
        let d = self.d;
        let (blo, bhi) = self.beta_bounds();
        let mut z = Vec::with_capacity(self.dim());
        for j in 1..=d {
            z.push(logit(params.alpha(j), ALPHA_EPS, 1.0 - ALPHA_EPS));
        }
        let t0 = params.theta(0).max(1e-300);
        for j in 1..=d {
            z.push((params.theta(j).max(1e-300) / t0).ln());
        }
        for j in 1..=d {
            z.push(logit(params.generator(j).beta(), blo, bhi));
        }
        z
    }
}

fn logistic(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-z).exp())
}

fn logit(x: f64, lo: f64, hi: f64) -> f64 {
    let p = ((x - lo) / (hi - lo)).clamp(1e-15, 1.0 - 1e-15);
    (p / (1.0 - p)).ln()
}

/// Fits the model to `target` by minimizing [`objective`] with Nelder-Mead
/// from `opts.restarts` seeded random starting points. Restarts run in
/// parallel and are reduced deterministically (best objective, ties broken
/// by restart index), so results depend only on `(target, family, opts)`.
pub fn calibrate(
    target: &TauMatrix,
    family: CalibrationFamily,
    opts: &OptimizerSettings,
) -> Result<CalibrationResult> {
    let d = target.d();
    for (i, k, v) in target.pairs() {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "target tau({i},{k}) = {v} outside [0, 1); the model cannot produce it"
            )));
        }
    }
    let map = ParamMap::new(d, family);
    let f = |z: &[f64]| -> f64 {
        match map.to_params(z) {
            Ok(p) => objective(&p, target).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };

    let runs: Vec<(usize, nelder_mead::Outcome)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = Pcg64Mcg::seed_from_u64(opts.seed ^ (r as u64).wrapping_mul(0x9E37_79B9));
            let x0: Vec<f64> = (0..map.dim())
                .map(|_| 6.0 * rng.random::<f64>() - 3.0)
                .collect();
            (r, nelder_mead::minimize(&f, &x0, 0.5, opts))
        })
        .collect();

    let (_, best) = runs
        .into_iter()
        .min_by(|(ra, a), (rb, b)| a.fmin.total_cmp(&b.fmin).then_with(|| ra.cmp(rb)))
        .expect("at least one restart");

    let params = map.to_params(&best.xmin)?;
    let fitted = TauMatrix::from_fn(target.labels().to_vec(), |i, k| tau_pair(&params, i, k))?;
    let obj = objective(&params, target)?;
    let boundary = boundary_flags(&params, family);
    Ok(CalibrationResult {
        params,
        objective: obj,
        fitted_taus: fitted,
        n_restarts_used: opts.restarts.max(1),
        converged: best.converged,
        boundary,
    })
}

/// Flags parameters sitting within `1e-3` of their box edges (weights are
/// flagged once they collapse below `1e-3`).
fn boundary_flags(params: &ModelParams, family: CalibrationFamily) -> Vec<String> {
    let mut flags = Vec::new();
    let (blo, bhi) = ParamMap::new(params.d(), family).beta_bounds();
    for j in 1..=params.d() {
        let a = params.alpha(j);
        if !(ALPHA_EPS + 1e-3..=1.0 - ALPHA_EPS - 1e-3).contains(&a) {
            flags.push(format!("alpha_{j}"));
        }
        let b = params.generator(j).beta();
        if !b.is_nan() && !(blo + 1e-3..=bhi - 1e-3).contains(&b) {
            flags.push(format!("beta_{j}"));
        }
        if params.theta(j) < 1e-3 {
            flags.push(format!("theta_{j}"));
        }
    }
    if params.theta(0) < 1e-3 {
        flags.push("theta_0".into());
    }
    flags
}

/// Per-entity systemic riskiness measures evaluated on fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRiskiness {
    pub entity: String,
    /// `tau(X0, X_j)`: dependence between the idiosyncratic shock and the
    /// systemic arrival time.
    pub tau_x0_x: f64,
    /// `tau(X0, T_j)`: dependence between the observed lifetime and the
    /// systemic arrival time.
    pub tau_x0_t: f64,
}

/// Evaluates both systemic tau measures for every entity of a fit.
pub fn riskiness_report(result: &CalibrationResult) -> Result<Vec<EntityRiskiness>> {
    let params = &result.params;
    let labels = result.fitted_taus.labels();
    (1..=params.d())
        .map(|j| {
            Ok(EntityRiskiness {
                entity: labels[j - 1].clone(),
                tau_x0_x: tau_systemic(params, j, SystemicMode::VsIdiosyncratic)?,
                tau_x0_t: tau_systemic(params, j, SystemicMode::VsLifetime)?,
            })
        })
        .collect()
}

mod nelder_mead {
    //! Plain Nelder-Mead with standard coefficients. Runs in the
    //! unconstrained space; convergence is declared on simplex diameter or
    //! objective value.

    use super::OptimizerSettings;

    pub(super) struct Outcome {
        pub xmin: Vec<f64>,
        pub fmin: f64,
        pub converged: bool,
    }

    pub(super) fn minimize<F: Fn(&[f64]) -> f64>(
        f: &F,
        x0: &[f64],
        step: f64,
        opts: &OptimizerSettings,
    ) -> Outcome {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step;
            let fx = f(&x);
            simplex.push((x, fx));
        }

        let mut converged = false;
        for _ in 0..opts.max_iters {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[0].1 < opts.ftol || diameter(&simplex) < opts.xtol {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].clone();
            let reflected = blend(&centroid, &worst.0, -1.0);
            let fr = f(&reflected);
            if fr < simplex[0].1 {
                let expanded = blend(&centroid, &worst.0, -2.0);
                let fe = f(&expanded);
                simplex[n] = if fe < fr {
                    (expanded, fe)
                } else {
                    (reflected, fr)
                };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (reflected, fr);
            } else {
                let contracted = if fr < worst.1 {
                    blend(&centroid, &worst.0, -0.5)
                } else {
                    blend(&centroid, &worst.0, 0.5)
                };
                let fc = f(&contracted);
                if fc < worst.1.min(fr) {
                    simplex[n] = (contracted, fc);
                } else {
                    // shrink toward the best vertex
                    let best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        for (x, b) in v.0.iter_mut().zip(&best) {
                            *x = b + 0.5 * (*x - b);
                        }
                        v.1 = f(&v.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < opts.ftol || diameter(&simplex) < opts.xtol {
            converged = true;
        }
        Outcome {
            xmin: simplex[0].0.clone(),
            fmin: simplex[0].1,
            converged,
        }
    }

    /// `centroid + coeff * (x - centroid)`
    fn blend(centroid: &[f64], x: &[f64], coeff: f64) -> Vec<f64> {
        centroid
            .iter()
            .zip(x)
            .map(|(c, v)| c + coeff * (v - c))
            .collect()
    }

    /// Largest max-norm distance from the best vertex.
    fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
        let best = &simplex[0].0;
        simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(best)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    fn clayton_params(d: usize, seed: u64) -> ModelParams {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..d).map(|_| 0.25 + 0.6 * rng.random::<f64>()).collect();
        let mut theta: Vec<f64> = (0..=d).map(|_| 0.05 + rng.random::<f64>()).collect();
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= s);
        let gens = (0..d)
            .map(|_| ArchimedeanGenerator::clayton(0.5 + 3.0 * rng.random::<f64>()).unwrap())
            .collect();
        ModelParams::new(1.0, alpha, theta, gens).unwrap()
    }

    fn labels(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("E{j}")).collect()
    }

    #[test]
    fn tau_matrix_indexing() {
        let m = TauMatrix::new(labels(3), vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(m.get(1, 2), 0.1);
        assert_eq!(m.get(1, 3), 0.2);
        assert_eq!(m.get(2, 3), 0.3);
        assert_eq!(m.get(3, 2), 0.3);
        let pairs: Vec<_> = m.pairs().collect();
        assert_eq!(pairs, vec![(1, 2, 0.1), (1, 3, 0.2), (2, 3, 0.3)]);
        assert!(TauMatrix::new(labels(1), vec![]).is_err());
        assert!(TauMatrix::new(labels(3), vec![0.1]).is_err());
        assert!(TauMatrix::new(labels(2), vec![1.5]).is_err());
    }

    #[test]
    fn objective_self_consistency() {
        for seed in 0..100 {
            let p = clayton_params(3, seed);
            let target = TauMatrix::from_fn(labels(3), |i, k| tau_pair(&p, i, k)).unwrap();
            let obj = objective(&p, &target).unwrap();
            assert!(obj <= 1e-12, "seed {seed}: {obj}");
        }
    }

    #[test]
    fn objective_single_term_square() {
        let p = ModelParams::new(
            1.0,
            vec![0.5, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![ArchimedeanGenerator::independence(); 2],
        )
        .unwrap();
        let tau_mo = crate::dependence::marshall_olkin_tau(0.5, 0.5);
        let target = TauMatrix::new(labels(2), vec![tau_mo + 0.1]).unwrap();
        let obj = objective(&p, &target).unwrap();
        assert!((obj - 0.01).abs() < 1e-12);
        // dimension mismatch is a usage error
        assert!(objective(&p, &TauMatrix::new(labels(3), vec![0.1, 0.1, 0.1]).unwrap()).is_err());
    }

    #[test]
    fn reparameterization_round_trip() {
        let mut rng = Pcg64Mcg::seed_from_u64(8);
        for family in [CalibrationFamily::Clayton, CalibrationFamily::Gumbel] {
            let map = ParamMap::new(3, family);
            for _ in 0..50 {
                let z: Vec<f64> = (0..map.dim())
                    .map(|_| 8.0 * rng.random::<f64>() - 4.0)
                    .collect();
                let params = map.to_params(&z).unwrap();
                let back = map.to_unconstrained(&params);
                for (a, b) in z.iter().zip(&back) {
                    assert!((a - b).abs() < 1e-10, "{family:?}: {z:?} vs {back:?}");
                }
            }
        }
    }

    #[test]
    fn calibrate_recovers_synthetic_taus() {
        let truth = clayton_params(3, 4242);
        let target = TauMatrix::from_fn(labels(3), |i, k| tau_pair(&truth, i, k)).unwrap();
        let opts = OptimizerSettings {
            restarts: 8,
            seed: 7,
            ..OptimizerSettings::default()
        };
        let fit = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        assert!(fit.objective <= 1e-8, "objective {}", fit.objective);
        for (i, k, t) in target.pairs() {
            let f = fit.fitted_taus.get(i, k);
            assert!((f - t).abs() < 1e-3, "pair ({i},{k}): {f} vs {t}");
        }
        // the reported objective is the recomputed sum of squares
        let recomputed = objective(&fit.params, &target).unwrap();
        assert!((fit.objective - recomputed).abs() < 1e-12);
    }

    #[test]
    fn calibrate_is_deterministic() {
        let truth = clayton_params(3, 99);
        let target = TauMatrix::from_fn(labels(3), |i, k| tau_pair(&truth, i, k)).unwrap();
        let opts = OptimizerSettings {
            restarts: 4,
            max_iters: 800,
            seed: 3,
            ..OptimizerSettings::default()
        };
        let a = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        let b = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.params, b.params);
        assert_eq!(a.converged, b.converged);
    }

    #[test]
    fn calibrate_independence_target() {
        let target = TauMatrix::new(labels(2), vec![0.0]).unwrap();
        let opts = OptimizerSettings {
            restarts: 6,
            seed: 11,
            ..OptimizerSettings::default()
        };
        let fit = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        assert!(fit.objective <= 1e-8, "objective {}", fit.objective);
        assert!(fit.fitted_taus.get(1, 2).abs() < 1e-3);
        // a zero tau needs a degenerate corner of the parameter space
        assert!(!fit.boundary.is_empty(), "expected a boundary flag");
    }

    #[test]
    fn calibrate_near_unit_target_is_reported_honestly() {
        // tau = 0.999 is taken literally: either the fit pushes alpha toward
        // its upper bound (flagged) or it fails to reach the target
        let target = TauMatrix::new(labels(2), vec![0.999]).unwrap();
        let opts = OptimizerSettings {
            restarts: 6,
            seed: 19,
            ..OptimizerSettings::default()
        };
        let fit = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        assert!(
            !fit.boundary.is_empty() || fit.objective > 1e-8 || !fit.converged,
            "objective {} boundary {:?} converged {}",
            fit.objective,
            fit.boundary,
            fit.converged
        );
        // invalid targets are rejected up front
        assert!(calibrate(
            &TauMatrix::new(labels(2), vec![-0.2]).unwrap(),
            CalibrationFamily::Clayton,
            &opts
        )
        .is_err());
    }

    #[test]
    fn fitted_taus_stay_feasible() {
        let truth = clayton_params(3, 17);
        let target = TauMatrix::from_fn(labels(3), |i, k| tau_pair(&truth, i, k)).unwrap();
        let opts = OptimizerSettings {
            restarts: 4,
            max_iters: 1500,
            seed: 5,
            ..OptimizerSettings::default()
        };
        let fit = calibrate(&target, CalibrationFamily::Clayton, &opts).unwrap();
        for (_, _, v) in fit.fitted_taus.pairs() {
            assert!((0.0..1.0).contains(&v), "fitted tau {v}");
        }
    }

    #[test]
    fn riskiness_report_values() {
        // frozen: beta=2, theta=0.5, alpha=0.5 -> (0.25, 0.58333...)
        let p = ModelParams::new(
            1.0,
            vec![0.5, 0.5],
            vec![0.0, 0.5, 0.5],
            vec![ArchimedeanGenerator::clayton(2.0).unwrap(); 2],
        )
        .unwrap();
        let target = TauMatrix::from_fn(labels(2), |i, k| tau_pair(&p, i, k)).unwrap();
        let fake = CalibrationResult {
            params: p,
            objective: 0.0,
            fitted_taus: target,
            n_restarts_used: 0,
            converged: true,
            boundary: vec![],
        };
        let report = riskiness_report(&fake).unwrap();
        assert_eq!(report.len(), 2);
        assert!((report[0].tau_x0_x - 0.25).abs() < 1e-14);
        assert!((report[0].tau_x0_t - (0.5 + 0.25 / 3.0)).abs() < 1e-14);
        assert_eq!(report[0].entity, "E1");
    }
}
