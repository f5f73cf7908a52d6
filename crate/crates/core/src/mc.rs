//! Monte Carlo estimators of `P_0 f(h) = E[f(X_h)] − f(x0)` and of the
//! conditional increment `E[f(X_{t+h}) − f(X_t) | X_t]` for
//! `dX = b(X) dt + dB`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fbm::{cov_unchecked, FbmSampler, HurstIndex, TimeGrid};
use crate::stats::{map_chunks, McEstimate, Moments};

/// Settings shared by the path simulations in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McSettings {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        McSettings { n_paths, n_steps, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps < 64 {
            return Err(Error::invalid("Monte Carlo runs need at least 64 steps"));
        }
        if self.n_paths < 2 {
            return Err(Error::invalid("Monte Carlo runs need at least 2 paths"));
        }
        Ok(())
    }
}

/// Number of control variates used by [`mc_p0`].
const N_CONTROLS: usize = 8;

/// Functionals of the driving path with exactly known means, used as
/// control variates: powers of `B_h`, the Riemann sum `L = Σ B_{t_k} Δt`
/// and low-order products. All are centered.
struct Controls {
    var_h: f64,
    mean_lb: f64,
    mean_ll: f64,
}

impl Controls {
    fn new(times: &[f64], hurst: f64) -> Self {
        let n = times.len() - 1;
        let h = times[n];
        let dt = |k: usize| times[k + 1] - times[k];
        let var_h = h.powf(2.0 * hurst);
        let mean_lb = (0..n).map(|k| cov_unchecked(times[k], h, hurst) * dt(k)).sum();
        let mut mean_ll = 0.0;
        for j in 0..n {
            for k in 0..n {
                mean_ll += cov_unchecked(times[j], times[k], hurst) * dt(j) * dt(k);
            }
        }
        Controls { var_h, mean_lb, mean_ll }
    }

    fn fill(&self, path: &[f64], times: &[f64], out: &mut [f64; N_CONTROLS]) {
        let n = path.len() - 1;
        let bh = path[n];
        let l: f64 = (0..n).map(|k| path[k] * (times[k + 1] - times[k])).sum();
        let b2 = bh * bh;
        *out = [
            bh,
            b2 - self.var_h,
            b2 * bh,
            b2 * b2 - 3.0 * self.var_h * self.var_h,
            l,
            l * bh - self.mean_lb,
            l * b2,
            l * l - self.mean_ll,
        ];
    }
}

/// Per-chunk sums for a regression on the control variates.
#[derive(Clone)]
struct CvSums {
    n: u64,
    y: f64,
    yy: f64,
    c: [f64; N_CONTROLS],
    yc: [f64; N_CONTROLS],
    cc: [[f64; N_CONTROLS]; N_CONTROLS],
}

impl CvSums {
    fn new() -> Self {
        CvSums {
            n: 0,
            y: 0.0,
            yy: 0.0,
            c: [0.0; N_CONTROLS],
            yc: [0.0; N_CONTROLS],
            cc: [[0.0; N_CONTROLS]; N_CONTROLS],
        }
    }

    fn push(&mut self, y: f64, c: &[f64; N_CONTROLS]) {
        self.n += 1;
        self.y += y;
        self.yy += y * y;
        for i in 0..N_CONTROLS {
            self.c[i] += c[i];
            self.yc[i] += y * c[i];
            for j in 0..=i {
                self.cc[i][j] += c[i] * c[j];
            }
        }
    }

    fn merge(mut self, o: &CvSums) -> Self {
        self.n += o.n;
        self.y += o.y;
        self.yy += o.yy;
        for i in 0..N_CONTROLS {
            self.c[i] += o.c[i];
            self.yc[i] += o.yc[i];
            for j in 0..=i {
                self.cc[i][j] += o.cc[i][j];
            }
        }
        self
    }

    /// Regression estimate `ȳ − β·c̄` with `β` from the sample covariances.
    fn estimate(&self, regress: bool) -> McEstimate {
        let n = self.n as f64;
        let my = self.y / n;
        let mc: Vec<f64> = self.c.iter().map(|s| s / n).collect();
        let syy = self.yy - n * my * my;
        let syc = DVector::from_fn(N_CONTROLS, |i, _| self.yc[i] - n * my * mc[i]);
        let scc = DMatrix::from_fn(N_CONTROLS, N_CONTROLS, |i, j| {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            self.cc[a][b] - n * mc[a] * mc[b]
        });
        let plain = McEstimate {
            value: my,
            stderr: (syy.max(0.0) / (n - 1.0) / n).sqrt(),
            n: self.n,
        };
        if !regress || self.n as usize <= 2 * N_CONTROLS {
            return plain;
        }
        let Some(beta) = scc.clone().cholesky().map(|c| c.solve(&syc)) else {
            return plain;
        };
        let value = my - beta.iter().zip(&mc).map(|(b, m)| b * m).sum::<f64>();
        let resid = (syy - syc.dot(&beta)).max(0.0);
        let dof = n - 1.0 - N_CONTROLS as f64;
        McEstimate {
            value,
            stderr: (resid / dof / n).sqrt(),
            n: self.n,
        }
    }
}

fn euler_additive(drift: &Expr, zero_drift: bool, x0: f64, times: &[f64], path: &[f64], out: &mut [f64]) -> Result<()> {
    out[0] = x0;
    for k in 0..times.len() - 1 {
        let x = out[k];
        let b = if zero_drift { 0.0 } else { drift.eval(x)? };
        out[k + 1] = x + b * (times[k + 1] - times[k]) + (path[k + 1] - path[k]);
    }
    Ok(())
}

/// `E[f(X_h)] − f(x0)` for `dX = b(X) dt + dB`, Euler scheme on a uniform
/// grid of `[0, h]`.
///
/// With `control_variates` the plain mean is corrected by a least-squares
/// regression on centered path functionals with known means; the target is
/// unchanged, only the variance drops.
pub fn mc_p0(
    f: &Expr,
    b: &Expr,
    x0: f64,
    hurst: HurstIndex,
    h: f64,
    settings: McSettings,
    control_variates: bool,
) -> Result<McEstimate> {
    settings.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("h = {h} must be positive")));
    }
    let n = settings.n_steps;
    let grid = TimeGrid::uniform(h, n)?;
    let times = grid.points().to_vec();
    let sampler = FbmSampler::new(grid, hurst)?;
    let controls = Controls::new(&times, hurst.value());
    let f0 = f.eval(x0)?;
    let zero_drift = *b == Expr::Const(0.0);

    let chunks = map_chunks(settings.n_paths, |range| -> Result<CvSums> {
        let mut sums = CvSums::new();
        let mut path = vec![0.0; n + 1];
        let mut scratch = vec![0.0; n];
        let mut x = vec![0.0; n + 1];
        let mut c = [0.0; N_CONTROLS];
        for i in range {
            sampler.sample_into(settings.seed, i as u64, &mut path, &mut scratch);
            euler_additive(b, zero_drift, x0, &times, &path, &mut x)?;
            let y = f.eval(x[n])? - f0;
            if control_variates {
                controls.fill(&path, &times, &mut c);
            }
            sums.push(y, &c);
        }
        Ok(sums)
    });
    let mut total = CvSums::new();
    for chunk in chunks {
        total = total.merge(&chunk?);
    }
    Ok(total.estimate(control_variates))
}

/// One regression point of [`mc_pt_conditional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalPoint {
    pub x: f64,
    pub estimate: McEstimate,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub ess: f64,
    /// False when `ess < 30`.
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalEstimate {
    pub bandwidth: f64,
    pub points: Vec<ConditionalPoint>,
    /// Plain average of the increments, which estimates `P_t f(h)`.
    pub unconditional: McEstimate,
}

/// Minimum effective sample size for a regression point to count as reliable.
pub const MIN_ESS: f64 = 30.0;

/// Nadaraya–Watson estimate of `E[f(X_{t+h}) − f(X_t) | X_t = x]` at each
/// evaluation point, Gaussian kernel. `bandwidth = None` uses Silverman's
/// rule `1.06 σ̂ n^{−1/5}` on the sampled `X_t`, which is biased for strongly
/// curved regressions.
///
/// The grid has `n_steps` intervals split between `[0, t]` and `[t, t+h]` in
/// proportion to their lengths, so `t` is a grid point.
#[allow(clippy::too_many_arguments)]
pub fn mc_pt_conditional(
    f: &Expr,
    b: &Expr,
    x0: f64,
    hurst: HurstIndex,
    t: f64,
    h: f64,
    settings: McSettings,
    bandwidth: Option<f64>,
    eval_points: &[f64],
) -> Result<ConditionalEstimate> {
    settings.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("h = {h} must be positive")));
    }
    if let Some(bw) = bandwidth {
        if !(bw > 0.0) {
            return Err(Error::invalid("bandwidth must be positive"));
        }
    }
    let n = settings.n_steps;
    let n_before = ((n as f64 * t / (t + h)).round() as usize).clamp(1, n - 1);
    let n_after = n - n_before;
    let mut points: Vec<f64> = (0..=n_before).map(|k| t * k as f64 / n_before as f64).collect();
    points.extend((1..=n_after).map(|k| t + h * k as f64 / n_after as f64));
    let grid = TimeGrid::new(points)?;
    let times = grid.points().to_vec();
    let sampler = FbmSampler::new(grid, hurst)?;
    let zero_drift = *b == Expr::Const(0.0);

    let chunks = map_chunks(settings.n_paths, |range| -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(range.len());
        let mut path = vec![0.0; n + 1];
        let mut scratch = vec![0.0; n];
        let mut x = vec![0.0; n + 1];
        for i in range {
            sampler.sample_into(settings.seed, i as u64, &mut path, &mut scratch);
            euler_additive(b, zero_drift, x0, &times, &path, &mut x)?;
            let xt = x[n_before];
            out.push((xt, f.eval(x[n])? - f.eval(xt)?));
        }
        Ok(out)
    });
    let mut samples = Vec::with_capacity(settings.n_paths);
    for chunk in chunks {
        samples.extend(chunk?);
    }

    let mut xs = Moments::default();
    let mut ys = Moments::default();
    for &(x, y) in &samples {
        xs.push(x);
        ys.push(y);
    }
    let bw = match bandwidth {
        Some(bw) => bw,
        None => 1.06 * xs.variance().sqrt() * (samples.len() as f64).powf(-0.2),
    };
    if !(bw > 0.0) {
        return Err(Error::numerical("degenerate bandwidth from a constant sample", bw));
    }

    let points = eval_points
        .iter()
        .map(|&x0| {
            let (mut sw, mut sw2, mut swy) = (0.0, 0.0, 0.0);
            for &(x, y) in &samples {
                let z = (x - x0) / bw;
                let w = (-0.5 * z * z).exp();
                sw += w;
                sw2 += w * w;
                swy += w * y;
            }
            if sw == 0.0 {
                return ConditionalPoint {
                    x: x0,
                    estimate: McEstimate {
                        value: f64::NAN,
                        stderr: f64::INFINITY,
                        n: 0,
                    },
                    ess: 0.0,
                    reliable: false,
                };
            }
            let m = swy / sw;
            let var: f64 = samples
                .iter()
                .map(|&(x, y)| {
                    let z = (x - x0) / bw;
                    let w = (-0.5 * z * z).exp();
                    w * w * (y - m) * (y - m)
                })
                .sum::<f64>()
                / (sw * sw);
            let ess = sw * sw / sw2;
            ConditionalPoint {
                x: x0,
                estimate: McEstimate {
                    value: m,
                    stderr: var.sqrt(),
                    n: samples.len() as u64,
                },
                ess,
                reliable: ess >= MIN_ESS,
            }
        })
        .collect();

    Ok(ConditionalEstimate {
        bandwidth: bw,
        points,
        unconditional: ys.estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn hurst(h: f64) -> HurstIndex {
        HurstIndex::new(h).unwrap()
    }

    #[test]
    fn linear_drift_mean() {
        let est = mc_p0(
            &Expr::Var,
            &Expr::Const(0.7),
            0.1,
            hurst(0.7),
            0.5,
            McSettings::new(2000, 64, 4),
            false,
        )
        .unwrap();
        assert!(est.within(0.35, 3.0), "{est:?}");
        // B_h is one of the controls, so the corrected estimate is exact.
        let est = mc_p0(
            &Expr::Var,
            &Expr::Const(0.7),
            0.1,
            hurst(0.7),
            0.5,
            McSettings::new(2000, 64, 4),
            true,
        )
        .unwrap();
        assert!((est.value - 0.35).abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn square_without_drift() {
        let h: f64 = 0.3;
        let est = mc_p0(
            &parse("x^2").unwrap(),
            &Expr::Const(0.0),
            0.0,
            hurst(0.7),
            h,
            McSettings::new(4000, 64, 1),
            false,
        )
        .unwrap();
        assert!(est.within(h.powf(1.4), 3.0), "{est:?}");
    }

    #[test]
    fn controls_are_centered() {
        let grid = TimeGrid::uniform(0.4, 64).unwrap();
        let times = grid.points().to_vec();
        let sampler = FbmSampler::new(grid, hurst(0.7)).unwrap();
        let controls = Controls::new(&times, 0.7);
        let mut acc = [Moments::default(); N_CONTROLS];
        let mut c = [0.0; N_CONTROLS];
        for i in 0..20_000 {
            let p = sampler.sample(11, i);
            controls.fill(&p.values, &times, &mut c);
            acc.iter_mut().zip(&c).for_each(|(m, v)| m.push(*v));
        }
        for (i, m) in acc.iter().enumerate() {
            assert!(m.estimate().within(0.0, 4.0), "control {i}: {:?}", m.estimate());
        }
    }

    #[test]
    fn conditional_driftless_linear() {
        let (t, h) = (1.0, 0.1);
        let est = mc_pt_conditional(
            &Expr::Var,
            &Expr::Const(0.0),
            0.0,
            hurst(0.7),
            t,
            h,
            McSettings::new(4000, 64, 2),
            Some(0.2),
            &[0.0, 0.5],
        )
        .unwrap();
        assert!(est.unconditional.within(0.0, 3.0));
        let rho = cov_unchecked(t + h, t, 0.7) / t;
        for p in &est.points {
            assert!(p.reliable);
            let target = (rho - 1.0) * p.x;
            assert!((p.estimate.value - target).abs() <= 3.0 * p.estimate.stderr + 2.0 * 0.04, "{p:?}");
        }
        let far = mc_pt_conditional(
            &Expr::Var,
            &Expr::Const(0.0),
            0.0,
            hurst(0.7),
            t,
            h,
            McSettings::new(200, 64, 2),
            Some(0.01),
            &[6.0],
        )
        .unwrap();
        assert!(!far.points[0].reliable);
    }
}
