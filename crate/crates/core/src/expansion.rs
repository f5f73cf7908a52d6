//! Expansions on the fractional power scale `{h^{2mH+n}}`.
//!
//! [`expand_p0`] assembles `E[f(X_h)] − f(x)` for `dX = b(X)dt + dB` from the
//! word coefficients `c_I` and the operators `Γ_I`. [`cond_expand_driftless`]
//! gives the exact conditional expansion of `E[f(B_{t+h}) − f(B_t) | B_t]`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::coeff::{c_coefficient_analytic, iterated_integral_combination_mc, McConfig, MAX_ANALYTIC_DT_SLOTS};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fbm::HurstIndex;
use crate::fmt::fmt17;
use crate::gamma::{derivatives, gamma_polynomial};
use crate::jet::{factorial, MAX_ORDER};
use crate::word::{words_for_exponent, Word};

/// Exponents closer than this are treated as equal.
pub const COLLISION_TOL: f64 = 1e-12;

/// `(m, n)` labelling the power `h^{2mH+n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ExponentPair {
    pub m: u32,
    pub n: u32,
}

impl ExponentPair {
    pub fn new(m: u32, n: u32) -> Self {
        ExponentPair { m, n }
    }

    pub fn value(self, hurst: f64) -> f64 {
        2.0 * self.m as f64 * hurst + self.n as f64
    }
}

/// One term `coefficient · h^{exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    #[serde(flatten)]
    pub pair: ExponentPair,
    pub exponent: f64,
    pub coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Terms sorted by exponent, truncated at `2pH + q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermList {
    pub hurst: HurstIndex,
    pub truncation: ExponentPair,
    pub terms: Vec<Term>,
}

impl TermList {
    pub fn get(&self, m: u32, n: u32) -> Option<&Term> {
        self.terms.iter().find(|t| t.pair == ExponentPair::new(m, n))
    }

    /// Coefficient at `(m, n)`, zero when absent.
    pub fn coefficient(&self, m: u32, n: u32) -> f64 {
        self.get(m, n).map_or(0.0, |t| t.coefficient)
    }

    pub fn has_stderr(&self) -> bool {
        self.terms.iter().any(|t| t.stderr.is_some())
    }

    /// CSV with header `m,n,exponent,coefficient`, plus `stderr` when any
    /// term carries one.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let with_se = self.has_stderr();
        writeln!(out, "m,n,exponent,coefficient{}", if with_se { ",stderr" } else { "" })?;
        for t in &self.terms {
            write!(out, "{},{},{},{}", t.pair.m, t.pair.n, fmt17(t.exponent), fmt17(t.coefficient))?;
            if with_se {
                match t.stderr {
                    Some(se) => write!(out, ",{}", fmt17(se))?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// All `(m, n) ≠ (0, 0)` with `2mH + n ≤ 2pH + q`, sorted by exponent with
/// ties broken by `m`.
pub fn exponent_set(p: u32, q: u32, hurst: HurstIndex) -> Result<Vec<ExponentPair>> {
    if p == 0 && q == 0 {
        return Err(Error::invalid("truncation (0, 0) is empty"));
    }
    let h = hurst.value();
    let limit = ExponentPair::new(p, q).value(h) + COLLISION_TOL;
    let mut out = Vec::new();
    let mut m = 0;
    while 2.0 * m as f64 * h <= limit {
        let mut n = if m == 0 { 1 } else { 0 };
        while ExponentPair::new(m, n).value(h) <= limit {
            out.push(ExponentPair::new(m, n));
            n += 1;
        }
        m += 1;
    }
    out.sort_by(|a, b| a.value(h).total_cmp(&b.value(h)).then(a.m.cmp(&b.m)));
    Ok(out)
}

/// Merges terms whose exponents differ by less than `tol`, adding
/// coefficients (and standard errors in quadrature) and keeping the
/// lexicographically smaller label.
pub fn merge_collisions(mut terms: TermList, tol: f64) -> Result<TermList> {
    if !(tol > 0.0) {
        return Err(Error::invalid("collision tolerance must be positive"));
    }
    terms.terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent).then(a.pair.cmp(&b.pair)));
    let mut merged: Vec<Term> = Vec::with_capacity(terms.terms.len());
    for t in terms.terms {
        match merged.last_mut() {
            Some(last) if (t.exponent - last.exponent).abs() < tol => {
                last.coefficient += t.coefficient;
                last.stderr = match (last.stderr, t.stderr) {
                    (None, None) => None,
                    (a, b) => Some(a.unwrap_or(0.0).hypot(b.unwrap_or(0.0))),
                };
                if t.pair < last.pair {
                    last.pair = t.pair;
                    last.exponent = t.exponent;
                }
            }
            _ => merged.push(t),
        }
    }
    terms.terms = merged;
    Ok(terms)
}

/// `Σ coefficient · h^{exponent}`.
pub fn evaluate_truncation(terms: &TermList, h: f64) -> f64 {
    terms.terms.iter().map(|t| t.coefficient * h.powf(t.exponent)).sum()
}

/// How `expand_p0` obtains `c_I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffSource {
    /// Analytic where the dt dimension allows, Monte Carlo otherwise.
    Auto,
    /// Analytic only; words beyond the quadrature guard are an error.
    Analytic,
    /// Monte Carlo for every word with a `dB` letter.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandSettings {
    pub source: CoeffSource,
    pub tol: f64,
    pub mc: McConfig,
}

impl Default for ExpandSettings {
    fn default() -> Self {
        ExpandSettings {
            source: CoeffSource::Auto,
            tol: 1e-10,
            mc: McConfig::default(),
        }
    }
}

/// Expansion of `E[f(X_h)] − f(x)` for `dX = b(X) dt + dB`, `X_0 = x`, up to
/// `h^{2pH+q}`. The coefficient of `h^{2mH+n}` is `Σ_I c_I Γ_I(f, b)(x)` over
/// words with `2m` ones and `n` zeros.
pub fn expand_p0(
    f: &Expr,
    b: &Expr,
    x: f64,
    hurst: HurstIndex,
    p: u32,
    q: u32,
    settings: &ExpandSettings,
) -> Result<TermList> {
    let pairs = exponent_set(p, q, hurst)?;
    let max_len = pairs.iter().map(|e| (2 * e.m + e.n) as usize).max().unwrap_or(0);
    let needs_b = pairs.iter().any(|e| e.n > 0);
    let f_derivs = derivatives(f, x, max_len)?;
    let b_derivs = if needs_b { derivatives(b, x, max_len - 1)? } else { Vec::new() };
    let h = hurst.value();

    let mut terms = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut coefficient = 0.0;
        let mut mc_words: Vec<Word> = Vec::new();
        let mut mc_weights = Vec::new();
        for word in words_for_exponent(pair.m as usize, pair.n as usize)? {
            let gamma = gamma_polynomial(&word)?.eval(&f_derivs, &b_derivs);
            if gamma == 0.0 {
                continue;
            }
            if word.weight() == 0 {
                coefficient += gamma / factorial(word.len());
                continue;
            }
            let use_mc = match settings.source {
                CoeffSource::Mc => true,
                CoeffSource::Analytic => false,
                CoeffSource::Auto => word.dt_slots().len() > MAX_ANALYTIC_DT_SLOTS,
            };
            if use_mc {
                mc_words.push(word);
                mc_weights.push(gamma);
            } else {
                coefficient += gamma * c_coefficient_analytic(&word, hurst, settings.tol)?.value;
            }
        }
        let stderr = if mc_words.is_empty() {
            None
        } else {
            let est = iterated_integral_combination_mc(&mc_words, &mc_weights, hurst, 1.0, settings.mc)?.estimate();
            coefficient += est.value;
            Some(est.stderr)
        };
        terms.push(Term {
            pair,
            exponent: pair.value(h),
            coefficient,
            stderr,
        });
    }
    merge_collisions(
        TermList {
            hurst,
            truncation: ExponentPair::new(p, q),
            terms,
        },
        COLLISION_TOL,
    )
}

/// A truncated series `Σ a_{mn} h^{2mH+n}` including the constant `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSeries {
    hurst: f64,
    threshold: f64,
    terms: BTreeMap<ExponentPair, f64>,
}

impl FractionalSeries {
    /// The zero series truncated at `2pH + q`.
    pub fn zero(hurst: HurstIndex, p: u32, q: u32) -> Self {
        let h = hurst.value();
        FractionalSeries {
            hurst: h,
            threshold: ExponentPair::new(p, q).value(h),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(hurst: HurstIndex, p: u32, q: u32, c: f64) -> Self {
        let mut s = Self::zero(hurst, p, q);
        s.insert(ExponentPair::new(0, 0), c);
        s
    }

    fn keeps(&self, pair: ExponentPair) -> bool {
        pair.value(self.hurst) <= self.threshold + COLLISION_TOL
    }

    /// Adds `c · h^{2mH+n}`, dropping it beyond the truncation.
    pub fn insert(&mut self, pair: ExponentPair, c: f64) {
        if c != 0.0 && self.keeps(pair) {
            *self.terms.entry(pair).or_insert(0.0) += c;
        }
    }

    pub fn coefficient(&self, pair: ExponentPair) -> f64 {
        self.terms.get(&pair).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (ExponentPair, f64)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }

    /// Smallest exponent with a nonzero coefficient.
    pub fn min_exponent(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, _)| k.value(self.hurst))
            .min_by(f64::total_cmp)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in other.terms() {
            out.insert(k, v);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self { terms: BTreeMap::new(), ..*self };
        for (k, v) in self.terms() {
            out.insert(k, c * v);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self { terms: BTreeMap::new(), ..*self };
        for (a, x) in self.terms() {
            for (b, y) in other.terms() {
                out.insert(ExponentPair::new(a.m + b.m, a.n + b.n), x * y);
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self { terms: BTreeMap::new(), ..*self };
        out.insert(ExponentPair::new(0, 0), 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Value at `h`.
    pub fn eval(&self, h: f64) -> f64 {
        self.terms().map(|(k, v)| v * h.powf(k.value(self.hurst))).sum()
    }

    /// Largest power `j` such that `s^j` can still reach the truncation,
    /// given that `s` has no constant term.
    fn max_useful_power(&self) -> u32 {
        match self.min_exponent() {
            Some(e) if e > 0.0 => ((self.threshold + COLLISION_TOL) / e).floor() as u32,
            _ => 0,
        }
    }
}

/// Exact expansion of `E[f(B_{t+h}) − f(B_t) | B_t = beta]` up to `h^{2pH+q}`.
///
/// Writing `ρ(h) = R_H(t+h, t)/t^{2H}` and `v(h) = h^{2H} − t^{2H}(ρ−1)²`, the
/// conditional law is `N(ρ beta, v)`, so the expectation is
/// `Σ_{l,i} f^{(i+2l)}(beta) ((ρ−1) beta)^i v^l / (i! 2^l l!)` minus `f(beta)`.
pub fn cond_expand_driftless(f: &Expr, t: f64, beta: f64, hurst: HurstIndex, p: u32, q: u32) -> Result<TermList> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("conditioning time t = {t} must be positive")));
    }
    exponent_set(p, q, hurst)?;
    let h = hurst.value();
    let zero = FractionalSeries::zero(hurst, p, q);

    // ρ − 1 = ½ Σ_{n≥1} binom(2H, n) (h/t)^n − h^{2H} / (2 t^{2H})
    let mut rho_m1 = zero.clone();
    let mut binom = 1.0;
    let mut n = 1u32;
    while ExponentPair::new(0, n).value(h) <= zero.threshold + COLLISION_TOL {
        binom *= (2.0 * h - (n - 1) as f64) / n as f64;
        rho_m1.insert(ExponentPair::new(0, n), 0.5 * binom * t.powi(-(n as i32)));
        n += 1;
    }
    rho_m1.insert(ExponentPair::new(1, 0), -0.5 * t.powf(-2.0 * h));

    let mut v = rho_m1.mul(&rho_m1).scale(-t.powf(2.0 * h));
    v.insert(ExponentPair::new(1, 0), 1.0);

    let shift = rho_m1.scale(beta);
    let max_i = shift.max_useful_power();
    let max_l = v.max_useful_power();
    let order = (max_i + 2 * max_l) as usize;
    if order > MAX_ORDER {
        return Err(Error::Resource(format!(
            "truncation needs {order} derivatives, more than the supported {MAX_ORDER}"
        )));
    }
    let fd = derivatives(f, beta, order)?;

    let shift_pows: Vec<_> = (0..=max_i).map(|i| shift.powi(i)).collect();
    let mut total = zero.clone();
    let mut v_pow = zero.clone();
    v_pow.insert(ExponentPair::new(0, 0), 1.0);
    for l in 0..=max_l {
        let scale_l = 1.0 / (2f64.powi(l as i32) * factorial(l as usize));
        for (i, sp) in shift_pows.iter().enumerate() {
            if l == 0 && i == 0 {
                continue;
            }
            let c = fd[i + 2 * l as usize] * scale_l / factorial(i);
            total = total.add(&sp.mul(&v_pow).scale(c));
        }
        v_pow = v_pow.mul(&v);
    }

    let terms = exponent_set(p, q, hurst)?
        .into_iter()
        .map(|pair| Term {
            pair,
            exponent: pair.value(h),
            coefficient: total.coefficient(pair),
            stderr: None,
        })
        .collect();
    merge_collisions(
        TermList {
            hurst,
            truncation: ExponentPair::new(p, q),
            terms,
        },
        COLLISION_TOL,
    )
}
