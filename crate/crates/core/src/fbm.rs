//! Fractional Brownian motion: covariance, the Volterra kernel `K_H`, and an
//! exact Cholesky path sampler.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fmt::fmt17;
use crate::gaussian::CovMatrix;
use crate::quad::{self, AdaptiveOptions};
use crate::rng::PathStream;
use crate::stats::map_chunks;

/// Distance kept from `1/2` and `1` for every stochastic operation.
pub const HURST_GUARD: f64 = 1e-9;

/// Hurst index strictly inside `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.5 + HURST_GUARD..=1.0 - HURST_GUARD).contains(&value) {
            return Err(Error::domain(format!(
                "Hurst index {value} outside [{}, {}]",
                0.5 + HURST_GUARD,
                1.0 - HURST_GUARD
            )));
        }
        Ok(HurstIndex(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `R_H(s, t) = ½(t^{2H} + s^{2H} − |t−s|^{2H})`. Accepts `H = 1/2`.
pub fn covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::domain(format!("negative time in covariance({s}, {t})")));
    }
    if !(0.5..=1.0 - HURST_GUARD).contains(&hurst) {
        return Err(Error::domain(format!("Hurst index {hurst} outside [0.5, 1)")));
    }
    Ok(cov_unchecked(s, t, hurst))
}

#[inline]
pub(crate) fn cov_unchecked(s: f64, t: f64, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// The normalising constant `c_H` with `c_H² = H(2H−1)/β(2−2H, H−1/2)`.
pub fn c_h_const(hurst: HurstIndex) -> f64 {
    let h = hurst.value();
    let a = 2.0 - 2.0 * h;
    let b = h - 0.5;
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    (h * (2.0 * h - 1.0) * (-ln_beta).exp()).sqrt()
}

/// `∫_lo^hi (u−s)^{H−3/2} u^{H−1/2} du` for `s ≤ lo < hi`.
///
/// With `w = (u−s)^{H−1/2}` the integrand becomes `(s + w^{1/(H−1/2)})^{H−1/2}
/// / (H−1/2)`, which is smooth up to `w = 0`.
pub(crate) fn kernel_inner_integral(s: f64, lo: f64, hi: f64, hurst: f64, tol: f64) -> Result<f64> {
    let a = hurst - 0.5;
    let inv_a = 1.0 / a;
    let w_lo = (lo - s).powf(a);
    let w_hi = (hi - s).powf(a);
    let q = quad::integrate(
        |w: f64| (s + w.powf(inv_a)).powf(a),
        w_lo,
        w_hi,
        &[],
        AdaptiveOptions::rel(tol),
    )?;
    Ok(q.value * inv_a)
}

/// The Volterra kernel `K_H(t, s)`; zero for `s ≥ t`.
pub fn kernel_k(t: f64, s: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::domain(format!("negative time in kernel_k({t}, {s})")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if s >= t {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Err(Error::domain("kernel_k diverges at s = 0 (factor s^{1/2-H})"));
    }
    let h = hurst.value();
    let inner = kernel_inner_integral(s, s, t, h, tol)?;
    Ok(c_h_const(hurst) * s.powf(0.5 - h) * inner)
}

/// `∫_0^{s∧t} K_H(s, u) K_H(t, u) du`, which reproduces `R_H(s, t)`.
pub fn kernel_gram(s: f64, t: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    let upper = s.min(t);
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let h = hurst.value();
    // u = w^{1/(2−2H)} absorbs the u^{1−2H} factor carried by the product.
    let p = 1.0 / (2.0 - 2.0 * h);
    let inner_tol = tol * 1e-2;
    let mut failure = None;
    let q = quad::integrate(
        |w: f64| {
            let u = w.powf(p);
            if u <= 0.0 || u >= upper {
                return 0.0;
            }
            let ks = kernel_inner_integral(u, u, s, h, inner_tol);
            let kt = kernel_inner_integral(u, u, t, h, inner_tol);
            match (ks, kt) {
                (Ok(a), Ok(b)) => a * b,
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        upper.powf(2.0 - 2.0 * h),
        &[],
        AdaptiveOptions::rel(tol).with_abs(tol * 1e-3),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let c = c_h_const(hurst);
    Ok(c * c * p * q.value)
}

/// Covariance of the increments `B_{b_i} − B_{a_i}`.
pub fn increment_cov(intervals: &[(f64, f64)], hurst: f64) -> Result<CovMatrix> {
    for &(a, b) in intervals {
        if !(a < b) {
            return Err(Error::domain(format!("degenerate or reversed interval ({a}, {b})")));
        }
        if a < 0.0 {
            return Err(Error::domain(format!("negative time {a}")));
        }
    }
    Ok(increment_cov_unchecked(intervals, hurst))
}

pub(crate) fn increment_cov_unchecked(intervals: &[(f64, f64)], hurst: f64) -> CovMatrix {
    let two_h = 2.0 * hurst;
    let p = |x: f64| x.abs().powf(two_h);
    CovMatrix::from_fn(intervals.len(), |i, j| {
        let (ai, bi) = intervals[i];
        let (aj, bj) = intervals[j];
        0.5 * (p(bj - ai) + p(aj - bi) - p(aj - ai) - p(bj - bi))
    })
}

/// Strictly increasing sampling times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if !(points[0] >= 0.0) {
            return Err(Error::domain("time grid starts before 0"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time grid is not strictly increasing"));
        }
        let uniform = match points.len() {
            0..=2 => true,
            _ => {
                let d0 = points[1] - points[0];
                points
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - d0).abs() <= 1e-12 * d0.abs().max(points[points.len() - 1]))
            }
        };
        Ok(TimeGrid { points, uniform })
    }

    /// `n_steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || n_steps == 0 {
            return Err(Error::invalid("uniform grid needs horizon > 0 and at least one step"));
        }
        let dt = horizon / n_steps as f64;
        let mut points: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        points[n_steps] = horizon;
        Ok(TimeGrid {
            points,
            uniform: true,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// One sampled fBm trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub hurst: HurstIndex,
    pub seed: u64,
}

impl FbmPath {
    /// Writes the path as `t,value` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(out, "{},{}", fmt17(*t), fmt17(*v))?;
        }
        Ok(())
    }
}

/// Exact sampler for a fixed grid: the Cholesky factor of the covariance of
/// `B` at the grid points is computed once and reused for every path.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstIndex,
    /// Lower triangle of the factor, packed row by row.
    factor: Vec<f64>,
    dim: usize,
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        if grid.len() < 2 || grid.points()[0] != 0.0 {
            return Err(Error::invalid("sampler grid must start at 0 and have at least 2 points"));
        }
        let h = hurst.value();
        let times = &grid.points()[1..];
        let dim = times.len();
        let cov = DMatrix::from_fn(dim, dim, |i, j| cov_unchecked(times[i], times[j], h));
        let chol = match cov.clone().cholesky() {
            Some(c) => c,
            None => {
                let max_diag = (0..dim).map(|i| cov[(i, i)]).fold(0.0, f64::max);
                let jitter = 1e-12 * max_diag;
                let mut jittered = cov;
                for i in 0..dim {
                    jittered[(i, i)] += jitter;
                }
                jittered.cholesky().ok_or_else(|| {
                    Error::numerical("Cholesky factorization failed after diagonal jitter", jitter)
                })?
            }
        };
        let l = chol.l();
        let mut factor = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        Ok(FbmSampler {
            grid,
            hurst,
            factor,
            dim,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    /// Fills `values` (length = grid length) with path `index` of `seed`.
    /// `scratch` must have length `grid.len() − 1`.
    pub fn sample_into(&self, seed: u64, index: u64, values: &mut [f64], scratch: &mut [f64]) {
        debug_assert_eq!(values.len(), self.dim + 1);
        let mut stream = PathStream::new(seed, index);
        stream.fill_normal(scratch);
        values[0] = 0.0;
        let mut offset = 0;
        for i in 0..self.dim {
            let row = &self.factor[offset..offset + i + 1];
            let mut acc = 0.0;
            for (l, z) in row.iter().zip(&scratch[..=i]) {
                acc += l * z;
            }
            values[i + 1] = acc;
            offset += i + 1;
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> FbmPath {
        let mut values = vec![0.0; self.grid.len()];
        let mut scratch = vec![0.0; self.dim];
        self.sample_into(seed, index, &mut values, &mut scratch);
        FbmPath {
            grid: self.grid.clone(),
            values,
            hurst: self.hurst,
            seed,
        }
    }
}

/// Draws `n_paths` exact fBm paths; path `i` depends only on `(seed, i)`.
pub fn sample_fbm(grid: &TimeGrid, hurst: HurstIndex, seed: u64, n_paths: usize) -> Result<Vec<FbmPath>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let sampler = FbmSampler::new(grid.clone(), hurst)?;
    let chunks = map_chunks(n_paths, |range| {
        range.map(|i| sampler.sample(seed, i as u64)).collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Covariance matrix of `B` at the given times, as used by the sampler.
pub fn grid_covariance(times: &[f64], hurst: HurstIndex) -> DMatrix<f64> {
    let h = hurst.value();
    DMatrix::from_fn(times.len(), times.len(), |i, j| cov_unchecked(times[i], times[j], h))
}
