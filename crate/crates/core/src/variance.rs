//! Variance of the conditional increment `Z_h = h^{−α} E[B_{t+h} − B_t | F_t]`
//! and the constants of its small-`h` limit.
//!
//! `Var(Z_h) = h^{−2α} c_H² ∫_0^t s^{1−2H} I(s)² ds` with
//! `I(s) = ∫_t^{t+h} (u−s)^{H−3/2} u^{H−1/2} du`. As `h → 0` it behaves like
//! `h^{2(H−α)} σ_H²`, where `σ_H² = (c_H/(H−½))² ∫_0^∞ g²` and
//! `g(s) = (s+1)^{H−½} − s^{H−½}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{c_h_const, kernel_inner_integral, HurstIndex};
use crate::quad::{self, AdaptiveOptions};

/// Finite integration range for `∫ g²`; the rest is summed in closed form.
const G_CUTOFF: f64 = 1e4;
/// Terms of the large-`s` series of `g` used for the tail.
const TAIL_TERMS: usize = 12;

/// `g(s) = (s+1)^{H−½} − s^{H−½}`, computed without cancellation for large `s`.
pub fn g_fn(s: f64, hurst: HurstIndex) -> f64 {
    let a = hurst.value() - 0.5;
    if s <= 1.0 {
        (s + 1.0).powf(a) - s.powf(a)
    } else {
        s.powf(a) * (a * (1.0 / s).ln_1p()).exp_m1()
    }
}

/// `binom(a, k)` for `k = 0..n`.
fn binomials(a: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 1.0;
    for k in 0..n {
        out.push(c);
        c *= (a - k as f64) / (k + 1) as f64;
    }
    out
}

/// `∫_S^∞ g(x² u) g(u) du` from `g(s) = s^a Σ_{k≥1} binom(a,k) s^{−k}`.
fn product_tail(x: f64, a: f64, cutoff: f64) -> f64 {
    let bin = binomials(a, TAIL_TERMS + 1);
    let x2 = x * x;
    let mut total = 0.0;
    for j in 1..=TAIL_TERMS {
        for k in 1..=TAIL_TERMS - j + 1 {
            let power = 2.0 * a - (j + k) as f64;
            let scale = x2.powf(a - j as f64);
            total += bin[j] * bin[k] * scale * cutoff.powf(power + 1.0) / -(power + 1.0);
        }
    }
    total
}

/// `∫_lo^hi f(s) ds` for `f` with an `s^a`-type cusp at `lo = 0`, through
/// `s = w^{1/a}`.
fn integrate_cusp<F: Fn(f64) -> f64>(f: F, hi: f64, a: f64, tol: f64) -> Result<f64> {
    let inv = 1.0 / a;
    let q = quad::integrate(
        |w: f64| f(w.powf(inv)) * inv * w.powf(inv - 1.0),
        0.0,
        hi.powf(a),
        &[],
        AdaptiveOptions::rel(tol),
    )?;
    Ok(q.value)
}

/// `∫_lo^hi f` on a logarithmic scale.
fn integrate_log<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let q = quad::integrate(
        |y: f64| {
            let s = y.exp();
            f(s) * s
        },
        lo.ln(),
        hi.ln(),
        &[],
        AdaptiveOptions::rel(tol),
    )?;
    Ok(q.value)
}

/// `σ_H² = (c_H/(H−½))² ∫_0^∞ g(s)² ds`.
pub fn sigma_h_sq(hurst: HurstIndex, tol: f64) -> Result<f64> {
    sigma_h_sq_with_cutoff(hurst, tol, G_CUTOFF)
}

/// [`sigma_h_sq`] with an explicit split point between quadrature and the
/// closed-form tail.
pub fn sigma_h_sq_with_cutoff(hurst: HurstIndex, tol: f64, cutoff: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(cutoff > 1.0) {
        return Err(Error::invalid("cutoff must exceed 1"));
    }
    let a = hurst.value() - 0.5;
    let g2 = |s: f64| g_fn(s, hurst).powi(2);
    let head = integrate_cusp(g2, 1.0, a, tol * 1e-2)?;
    let body = integrate_log(g2, 1.0, cutoff, tol * 1e-2)?;
    let tail = product_tail(1.0, a, cutoff);
    let c = c_h_const(hurst) / a;
    Ok(c * c * (head + body + tail))
}

/// `r(x) = x ∫_0^∞ g(x² u) g(u) du`, symmetric under `x ↦ 1/x`.
pub fn r_fn(x: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("r(x) needs x > 0, got {x}")));
    }
    let a = hurst.value() - 0.5;
    let x2 = x * x;
    let integrand = |u: f64| g_fn(x2 * u, hurst) * g_fn(u, hurst);
    // Both factors have cusps at u = 0 and change scale at u = 1 and 1/x².
    let knee = 1f64.min(1.0 / x2);
    let far = 1f64.max(1.0 / x2);
    let cutoff = G_CUTOFF * far;
    let inner_tol = tol * 1e-2;
    let head = integrate_cusp(integrand, knee, a, inner_tol)?;
    let mid = if far > knee {
        integrate_log(integrand, knee, far, inner_tol)?
    } else {
        0.0
    };
    let body = integrate_log(integrand, far, cutoff, inner_tol)?;
    let tail = product_tail(x, a, cutoff);
    Ok(x * (head + mid + body + tail))
}

/// `∫_0^t s^{1−2H} F(s) ds`, with `s = w^{1/(2−2H)}` on `[0, t/2]` and
/// `t − s = y^{1/(H−½)}` on `[t/2, t]`, extra breakpoints mapped from
/// `t − h` and `t − h²`.
fn outer_integral<F>(t: f64, h: f64, hurst: f64, tol: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mid = 0.5 * t;
    let p = 1.0 / (2.0 - 2.0 * hurst);
    let a = hurst - 0.5;
    let inv_a = 1.0 / a;
    let mut failure = None;
    let mut guarded = |s: f64| match f(s) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let cuts_near: Vec<f64> = [t - h, t - h * h]
        .into_iter()
        .filter(|&s| s > 0.0 && s < t)
        .collect();

    let left_cuts: Vec<f64> = cuts_near.iter().filter(|&&s| s < mid).map(|s| s.powf(1.0 / p)).collect();
    let left = quad::integrate(
        |w: f64| {
            let s = w.powf(p);
            if s <= 0.0 {
                return 0.0;
            }
            p * guarded(s)
        },
        0.0,
        mid.powf(1.0 / p),
        &left_cuts,
        AdaptiveOptions::rel(tol),
    )?;
    let right_cuts: Vec<f64> = cuts_near.iter().filter(|&&s| s > mid).map(|s| (t - s).powf(a)).collect();
    let right = quad::integrate(
        |y: f64| {
            let r = y.powf(inv_a);
            let s = t - r;
            if r <= 0.0 {
                return 0.0;
            }
            s.powf(1.0 - 2.0 * hurst) * guarded(s) * inv_a * y.powf(inv_a - 1.0)
        },
        0.0,
        mid.powf(a),
        &right_cuts,
        AdaptiveOptions::rel(tol),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(left.value + right.value)
}

fn check_args(t: f64, h: f64, tol: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    if !(h > 0.0) {
        return Err(Error::domain(format!("h = {h} must be positive")));
    }
    check_tol(tol)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("tolerance must be positive"))
    }
}

/// `∫_0^t (K_H(t+h, s) − K_H(t, s))² ds`, the variance of
/// `E[B_{t+h} − B_t | F_t]`.
pub fn var_zh(t: f64, h: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    check_args(t, h, tol)?;
    let hv = hurst.value();
    let inner_tol = tol * 0.1;
    let v = outer_integral(t, h, hv, tol, |s| {
        let i = kernel_inner_integral(s, t, t + h, hv, inner_tol)?;
        Ok(i * i)
    })?;
    let c = c_h_const(hurst);
    Ok(c * c * v)
}

/// `(c_H/(H−½))² ∫_0^t s^{1−2H} ((t+h−s)^{H−½} − (t−s)^{H−½})² ds`.
fn bound_integral(t: f64, h: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    check_args(t, h, tol)?;
    let hv = hurst.value();
    let a = hv - 0.5;
    let v = outer_integral(t, h, hv, tol, |s| {
        let d = (t + h - s).powf(a) - (t - s).powf(a);
        Ok(d * d)
    })?;
    let c = c_h_const(hurst) / a;
    Ok(c * c * v)
}

/// Lower bound on [`var_zh`] obtained from `u^{H−½} ≥ t^{H−½}`.
pub fn var_zh_lower_bound(t: f64, h: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    Ok(t.powf(2.0 * hurst.value() - 1.0) * bound_integral(t, h, hurst, tol)?)
}

/// Upper bound on [`var_zh`] obtained from `u^{H−½} ≤ (t+h)^{H−½}`.
pub fn var_zh_upper_bound(t: f64, h: f64, hurst: HurstIndex, tol: f64) -> Result<f64> {
    Ok((t + h).powf(2.0 * hurst.value() - 1.0) * bound_integral(t, h, hurst, tol)?)
}

/// One line of a variance scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRow {
    pub h: f64,
    /// `h^{−2α} var_zh`.
    pub raw_var: f64,
    /// `raw_var / h^{2(H−α)}`.
    pub normalized: f64,
    /// `normalized / σ_H²`.
    pub ratio_to_limit: f64,
}

/// `Var(Z_h)` along a decreasing grid of `h`.
pub fn variance_scan(t: f64, hurst: HurstIndex, alpha: f64, h_grid: &[f64], tol: f64) -> Result<Vec<VarianceRow>> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("alpha must be finite"));
    }
    if h_grid.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::invalid("h grid must be positive"));
    }
    if h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("h grid must be strictly decreasing"));
    }
    let limit = sigma_h_sq(hurst, tol)?;
    let hv = hurst.value();
    h_grid
        .iter()
        .map(|&h| {
            let v = var_zh(t, h, hurst, tol)?;
            let raw_var = h.powf(-2.0 * alpha) * v;
            let normalized = v / h.powf(2.0 * hv);
            Ok(VarianceRow {
                h,
                raw_var,
                normalized,
                ratio_to_limit: normalized / limit,
            })
        })
        .collect()
}
