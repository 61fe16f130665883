//! Brute-force simulation oracle.
//!
//! Samples the full latent shock vector `(Y_0..Y_d, X_1..X_d)`, assembles the
//! lifetimes `T_j = min(X_j, min_i Y_i)`, and estimates taus and simultaneous
//! default frequencies. Every closed form in the library is validated against
//! this path.
//!
//! Reproducibility contract: each row's randomness is derived from
//! `(seed, row index)` alone, so results are bit-identical across runs and
//! across worker counts; workers merely split rows.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::archimedean::unit_open;
use crate::error::{Error, Result};
use crate::numeric::invert_decreasing;
use crate::shock_model::{BaselineSurvival, ModelParams};

/// Simulation size, seed and worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Number of rayon workers; 0 means "use the current thread pool".
    pub n_workers: usize,
}

impl SimulationConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            n_workers: 0,
        }
    }

    pub fn with_workers(mut self, n_workers: usize) -> Self {
        self.n_workers = n_workers;
        self
    }
}

/// Latent draws backing a batch: `y` is row-major `n x (d+1)` (`Y_0` first),
/// `x` is row-major `n x d`. Entries may be `+inf` where an intensity is 0.
#[derive(Debug, Clone)]
pub struct Latents {
    pub(crate) y: Vec<f64>,
    pub(crate) x: Vec<f64>,
}

/// A batch of simulated lifetimes with optional latent draws.
///
/// Lifetimes are stored row-major `n x d`. Because `T_j` is assigned the
/// *same* float as the row's systemic minimum whenever the systemic shock
/// fires first, simultaneous defaults are decided by provenance and never by
/// comparing independently computed floats.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    n: usize,
    d: usize,
    lifetimes: Vec<f64>,
    latents: Option<Latents>,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Lifetime of entity `j` (1-based) in `row`.
    pub fn lifetime(&self, row: usize, j: usize) -> f64 {
        self.lifetimes[row * self.d + (j - 1)]
    }

    /// Copy of the lifetime column of entity `j` (1-based).
    pub fn lifetime_column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.lifetime(r, j)).collect()
    }

    pub fn latents(&self) -> Option<&Latents> {
        self.latents.as_ref()
    }

    /// Drops the latent draws, keeping only lifetimes.
    pub fn without_latents(mut self) -> Self {
        self.latents = None;
        self
    }

    /// The systemic arrival time `min_i Y_i` of `row`, when latents are kept.
    pub fn systemic_min(&self, row: usize) -> Option<f64> {
        self.latents.as_ref().map(|l| {
            l.y[row * (self.d + 1)..(row + 1) * (self.d + 1)]
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b))
        })
    }

    /// Latent idiosyncratic shock `X_j` (1-based `j`) of `row`.
    pub fn idiosyncratic(&self, row: usize, j: usize) -> Option<f64> {
        self.latents.as_ref().map(|l| l.x[row * self.d + (j - 1)])
    }
}

/// Derives the per-row generator: an affine jump in the seed space followed
/// by a splitmix64 scramble. Worker count never enters.
fn row_rng(seed: u64, row: u64) -> Pcg64Mcg {
    let mut z = seed
        .wrapping_add(row.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    Pcg64Mcg::seed_from_u64(z ^ (z >> 31))
}

/// One simulated row: systemic triggers, idiosyncratic shocks, lifetimes.
type RowDraw = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Simulates `cfg.n_samples` independent draws of the full shock system.
///
/// Per row: draw `Y_0` from `G^gamma_0`; for each entity draw `(U, V)` from
/// its pair copula, map `U` through the `Y_j` quantile and invert the
/// idiosyncratic margin at `V` by bracketed bisection on
/// [`ModelParams::marginal_survival_x`]; then `T_j = min(X_j, min_i Y_i)`.
pub fn sample_model(params: &ModelParams, cfg: &SimulationConfig) -> Result<SampleBatch> {
    if cfg.n_samples == 0 {
        return Err(Error::Usage("n_samples must be at least 1".into()));
    }
    let d = params.d();
    let copulas: Vec<_> = (1..=d).map(|j| params.pair_copula(j)).collect();

    let one_row = |row: usize| -> Result<RowDraw> {
        let mut rng = row_rng(cfg.seed, row as u64);
        let baseline = BaselineSurvival;
        let mut ys = vec![f64::INFINITY; d + 1];
        let mut xs = vec![f64::INFINITY; d];
        let gamma0 = params.gamma(0);
        if gamma0 > 0.0 {
            // survival G^gamma: quantile is the baseline quantile over gamma
            ys[0] = baseline.quantile(unit_open(&mut rng)) / gamma0;
        }
        for j in 1..=d {
            let (u, v) = copulas[j - 1].sample(&mut rng);
            let gamma_j = params.gamma(j);
            if gamma_j > 0.0 {
                ys[j] = baseline.quantile(u) / gamma_j;
            }
            xs[j - 1] = invert_marginal_x(params, j, v)?;
        }
        let x0 = ys.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let ts = xs
            .iter()
            .map(|&x| if x < x0 { x } else { x0 })
            .collect::<Vec<f64>>();
        Ok((ys, xs, ts))
    };

    let rows: Vec<Result<RowDraw>> = if cfg.n_workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.n_workers)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.n_samples).into_par_iter().map(one_row).collect())
    } else {
        (0..cfg.n_samples).into_par_iter().map(one_row).collect()
    };

    let mut y = Vec::with_capacity(cfg.n_samples * (d + 1));
    let mut x = Vec::with_capacity(cfg.n_samples * d);
    let mut lifetimes = Vec::with_capacity(cfg.n_samples * d);
    for row in rows {
        let (ys, xs, ts) = row?;
        y.extend_from_slice(&ys);
        x.extend_from_slice(&xs);
        lifetimes.extend_from_slice(&ts);
    }
    Ok(SampleBatch {
        n: cfg.n_samples,
        d,
        lifetimes,
        latents: Some(Latents { y, x }),
    })
}

/// Inverts `S_X_j(x) = v` by doubling bracket growth plus bisection to
/// `1e-10`. Entities without an idiosyncratic shock return `+inf`.
fn invert_marginal_x(params: &ModelParams, j: usize, v: f64) -> Result<f64> {
    if params.lambda(j) == 0.0 {
        return Ok(f64::INFINITY);
    }
    invert_decreasing(&|x| params.marginal_survival_x(j, x), v, 1e-10, 400).ok_or_else(|| {
        Error::Numerical(format!(
            "failed to invert the idiosyncratic margin of entity {j} at {v}"
        ))
    })
}

/// Cutoff below which the quadratic reference estimator is used directly.
const QUADRATIC_CUTOFF: usize = 2000;

/// Empirical Kendall tau: `(C - D) / (n(n-1)/2)` where ties count as
/// neither concordant nor discordant. Uses merge-sort counting
/// (`O(n log n)`) above [`QUADRATIC_CUTOFF`] points and the quadratic
/// reference below it.
pub fn empirical_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_tau_inputs(x, y)?;
    if x.len() <= QUADRATIC_CUTOFF {
        return empirical_tau_reference(x, y);
    }
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // tied-in-x and tied-in-both pair counts
    let mut n1 = 0u64;
    let mut n3 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let g = (j - i) as u64;
        n1 += g * (g - 1) / 2;
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && pairs[b].1 == pairs[a].1 {
                b += 1;
            }
            let gg = (b - a) as u64;
            n3 += gg * (gg - 1) / 2;
            a = b;
        }
        i = j;
    }

    // discordant pairs = inversions of the y-sequence (strict), counted by
    // stable merge sort; x-ties are pre-sorted ascending in y and so never
    // register as inversions
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0f64; n];
    let swaps = merge_count(&mut ys, &mut buf);

    // tied-in-y pair count from the now-sorted sequence
    let mut n2 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let g = (j - i) as u64;
        n2 += g * (g - 1) / 2;
        i = j;
    }

    let n0 = n as u64 * (n as u64 - 1) / 2;
    let c_plus_d = (n0 - n1 - n2 + n3) as f64;
    Ok((c_plus_d - 2.0 * swaps as f64) / n0 as f64)
}

/// Quadratic reference estimator: the literal definition, enumerating all
/// pairs. Kept as the independent cross-check of the merge-sort counting and
/// used directly for small samples.
pub fn empirical_tau_reference(x: &[f64], y: &[f64]) -> Result<f64> {
    check_tau_inputs(x, y)?;
    let n = x.len();
    let mut net = 0i64;
    for i in 0..n {
        for k in (i + 1)..n {
            let dx = x[i].total_cmp(&x[k]);
            let dy = y[i].total_cmp(&y[k]);
            net += match (dx, dy) {
                (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater)
                | (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => 1,
                (std::cmp::Ordering::Greater, std::cmp::Ordering::Less)
                | (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => -1,
                _ => 0,
            };
        }
    }
    let n0 = n as f64 * (n as f64 - 1.0) / 2.0;
    Ok(net as f64 / n0)
}

fn check_tau_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Usage("need at least two observations".into()));
    }
    Ok(())
}

/// Counts inversions (strict descents) while merge-sorting `v` in place.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    let mut swaps = 0u64;
    let mut width = 1usize;
    while width < n {
        let mut lo = 0usize;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                swaps += merge_halves(&v[lo..mid], &v[mid..hi], &mut buf[lo..hi]);
                v[lo..hi].copy_from_slice(&buf[lo..hi]);
            }
            lo = hi;
        }
        width *= 2;
    }
    swaps
}

fn merge_halves(left: &[f64], right: &[f64], out: &mut [f64]) -> u64 {
    let mut swaps = 0u64;
    let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);
    while i < left.len() && j < right.len() {
        // stable: ties stay on the left and count as no inversion
        if right[j] < left[i] {
            swaps += (left.len() - i) as u64;
            out[k] = right[j];
            j += 1;
        } else {
            out[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        out[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        out[k] = right[j];
        j += 1;
        k += 1;
    }
    swaps
}

/// Large-sample standard error of the empirical tau under independence,
/// `sqrt(2 (2n + 5) / (9 n (n - 1)))`. Used for z-scores in reports.
pub fn tau_standard_error(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0))).sqrt()
}

/// Fraction of rows in which every lifetime equals the row's systemic
/// minimum (all entities died of the shared shock) and that common value
/// exceeds `t`.
///
/// With latents present, equality is decided against the stored
/// `min_i Y_i`; without them, the bit-identical floats written by
/// [`sample_model`] make exact comparison between columns equivalent.
pub fn empirical_simultaneous(batch: &SampleBatch, t: f64) -> f64 {
    let n = batch.n();
    let d = batch.d();
    let mut hits = 0usize;
    for row in 0..n {
        // with one entity the event degenerates to the plain margin
        let common = if d == 1 {
            Some(batch.lifetime(row, 1))
        } else {
            match batch.systemic_min(row) {
                Some(x0) => {
                    if (1..=d).all(|j| batch.lifetime(row, j) == x0) {
                        Some(x0)
                    } else {
                        None
                    }
                }
                None => {
                    let first = batch.lifetime(row, 1);
                    if (2..=d).all(|j| batch.lifetime(row, j) == first) {
                        Some(first)
                    } else {
                        None
                    }
                }
            }
        };
        if let Some(v) = common {
            if v > t {
                hits += 1;
            }
        }
    }
    hits as f64 / n as f64
}
