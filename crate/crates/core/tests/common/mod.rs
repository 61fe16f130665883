//! Shared helpers for the integration suites. The quadrature here is
//! deliberately test-local so oracle integrals never run through the same
//! code path as the library's own quadrature.
#![allow(dead_code)] // each test binary uses a different subset

use rand::RngExt;
use rand_pcg::Pcg64Mcg;

use sysrisk::archimedean::{ArchimedeanGenerator, Family};
use sysrisk::shock_model::ModelParams;

/// Test-side adaptive Simpson, independent of the library implementation.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(a, m, fa, flm, fm);
        let right = rule(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, rule(a, b, fa, fm, fb), tol, 60)
}

/// Random feasible parameters away from degenerate corners.
pub fn random_params(rng: &mut Pcg64Mcg, d: usize, family: Family) -> ModelParams {
    let alpha: Vec<f64> = (0..d).map(|_| 0.25 + 0.6 * rng.random::<f64>()).collect();
    let mut theta: Vec<f64> = (0..=d).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= s);
    let gens: Vec<ArchimedeanGenerator> = (0..d)
        .map(|_| {
            let b = match family {
                Family::Clayton => 0.5 + 3.5 * rng.random::<f64>(),
                Family::Gumbel => 1.25 + 2.5 * rng.random::<f64>(),
                Family::Independence => 0.0,
            };
            ArchimedeanGenerator::from_family(family, b).unwrap()
        })
        .collect();
    ModelParams::new(1.0, alpha, theta, gens).unwrap()
}
