//! The coefficients `c_I = E[∫_{Δ^k[0,1]} dB^I]` of mixed iterated integrals.
//!
//! The analytic route integrates, over the ordered times of the `dt` slots,
//! the Gaussian moment of the `dB` blocks between them: a run of `g`
//! consecutive `dB` letters starting at time `s` integrates to
//! `(B_t − B_s)^g / g!` under the Young chain rule. The Monte Carlo route
//! evaluates the iterated integral on sampled paths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{increment_cov_unchecked, FbmSampler, HurstIndex, TimeGrid};
use crate::gaussian::{PowerIndex, WickPolynomial};
use crate::jet::factorial;
use crate::quad::GaussLegendre;
use crate::stats::{map_chunks, Moments};
use crate::word::Word;

/// Largest number of `dt` slots handled by the analytic quadrature.
pub const MAX_ANALYTIC_DT_SLOTS: usize = 3;
/// Gauss–Legendre order per axis and panel.
const SIMPLEX_ORDER: usize = 40;
/// Panels per axis are doubled up to this count before giving up.
const MAX_PANELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffMethod {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffResult {
    pub word: Word,
    pub hurst: HurstIndex,
    pub method: CoeffMethod,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// How a sampled path is turned into iterated integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    /// Exact iterated integrals of the piecewise-linear interpolant of the
    /// path (Chen's relation segment by segment).
    #[default]
    PiecewiseLinear,
    /// Left-point Riemann sums. Consistent for H > 1/2, but the mean of a
    /// second-order `dB` integral carries a bias of order `n_steps^{1−2H}`.
    LeftPoint,
}

/// Monte Carlo settings for coefficient estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub discretization: Discretization,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            n_steps,
            seed,
            discretization: Discretization::default(),
        }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::new(100_000, 512, 0)
    }
}

/// A block of consecutive `dB` letters: the increment over
/// `[time index lo, time index hi]` raised to `power`. Index 0 is time 0,
/// index `m + 1` is time 1, and `1..=m` are the `dt` slot times.
#[derive(Debug, Clone, Copy)]
struct Block {
    lo: usize,
    hi: usize,
    power: u32,
}

fn blocks(word: &Word) -> Vec<Block> {
    let k = word.len();
    let slots = word.dt_slots();
    let m = slots.len();
    let mut out = Vec::new();
    let mut prev_pos = 0usize;
    for (i, &pos) in slots.iter().enumerate() {
        // dB letters strictly between the previous dt slot and this one.
        let power = (pos - prev_pos - 1) as u32;
        if power > 0 {
            out.push(Block { lo: i, hi: i + 1, power });
        }
        prev_pos = pos;
    }
    let power = (k - prev_pos) as u32;
    if power > 0 {
        out.push(Block { lo: m, hi: m + 1, power });
    }
    out
}

/// Analytic `c_I` for words with at most three `dt` slots.
pub fn c_coefficient_analytic(word: &Word, hurst: HurstIndex, tol: f64) -> Result<CoeffResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let value = analytic_value(word, hurst, tol)?;
    Ok(CoeffResult {
        word: word.clone(),
        hurst,
        method: CoeffMethod::Analytic,
        value,
        stderr: None,
    })
}

fn analytic_value(word: &Word, hurst: HurstIndex, tol: f64) -> Result<f64> {
    let k = word.len();
    let weight = word.weight();
    if weight % 2 == 1 {
        return Ok(0.0);
    }
    if weight == 0 {
        return Ok(1.0 / factorial(k));
    }
    let m = k - weight;
    if m == 0 {
        // E[B_1^k]/k! = (k−1)!!/k! = 1/(2^{k/2} (k/2)!)
        let half = k / 2;
        return Ok(1.0 / (2f64.powi(half as i32) * factorial(half)));
    }
    if m > MAX_ANALYTIC_DT_SLOTS {
        return Err(Error::Resource(format!(
            "word {word} has {m} dt slots; the analytic method handles at most \
             {MAX_ANALYTIC_DT_SLOTS}, use the Monte Carlo method"
        )));
    }

    let blocks = blocks(word);
    let norm: f64 = blocks.iter().map(|b| factorial(b.power as usize)).product();
    let poly = WickPolynomial::new(&PowerIndex(blocks.iter().map(|b| b.power).collect()))?;
    let h = hurst.value();
    let rule = GaussLegendre::new(SIMPLEX_ORDER);

    let integrand = |times: &[f64]| -> f64 {
        let intervals: Vec<(f64, f64)> = blocks.iter().map(|b| (times[b.lo], times[b.hi])).collect();
        if intervals.iter().any(|(a, b)| !(b > a)) {
            return 0.0;
        }
        poly.eval(&increment_cov_unchecked(&intervals, h))
    };

    let mut panels = 1;
    let mut previous = simplex_integral(m, &rule, panels, &integrand);
    loop {
        panels *= 2;
        let current = simplex_integral(m, &rule, panels, &integrand);
        let diff = (current - previous).abs();
        if diff <= tol * current.abs() + 1e-300 {
            return Ok(current / norm);
        }
        if panels >= MAX_PANELS {
            return Err(Error::numerical(
                format!("simplex quadrature for word {word} did not reach tolerance {tol}"),
                diff / current.abs().max(f64::MIN_POSITIVE),
            ));
        }
        previous = current;
    }
}

/// Integrates over `0 ≤ t_1 ≤ … ≤ t_m ≤ 1` using the nesting
/// `t_m = u_m`, `t_i = t_{i+1} u_i`, a tensor Gauss–Legendre rule with
/// `panels` equal panels per axis of the unit cube.
///
/// Each axis is first mapped by `u = 35v⁴ − 84v⁵ + 70v⁶ − 20v⁷`, whose
/// derivative `140 v³(1−v)³` turns the `u^{2H}` and `(1−u)^{2H}` endpoint
/// behaviour of the Gaussian moments into high-order zeros.
fn simplex_integral(m: usize, rule: &GaussLegendre, panels: usize, f: &impl Fn(&[f64]) -> f64) -> f64 {
    let width = 1.0 / panels as f64;
    let mut nodes = Vec::with_capacity(panels * rule.order());
    for p in 0..panels {
        let a = p as f64 * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let v = a + 0.5 * width * (x + 1.0);
            let u = v.powi(4) * (35.0 + v * (-84.0 + v * (70.0 - 20.0 * v)));
            let jac = 140.0 * (v * (1.0 - v)).powi(3);
            nodes.push((u, 0.5 * width * w * jac));
        }
    }
    // times[0] = 0, times[1..=m] = slot times, times[m+1] = 1
    let mut times = vec![0.0; m + 2];
    times[m + 1] = 1.0;
    let mut idx = vec![0usize; m];
    let n = nodes.len();
    let mut total = 0.0;
    loop {
        // Axis m−1 is the outermost time t_m.
        let mut weight = 1.0;
        let mut upper = 1.0;
        for axis in (0..m).rev() {
            let (u, w) = nodes[idx[axis]];
            times[axis + 1] = upper * u;
            weight *= w * upper;
            upper = times[axis + 1];
        }
        total += weight * f(&times);
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == m {
                return total;
            }
        }
    }
}

/// Monte Carlo `c_I`.
pub fn c_coefficient_mc(word: &Word, hurst: HurstIndex, config: McConfig) -> Result<CoeffResult> {
    Ok(c_coefficients_mc(std::slice::from_ref(word), hurst, config)?
        .pop()
        .expect("one word in, one result out"))
}

/// Monte Carlo `c_I` for several words evaluated on the same paths.
pub fn c_coefficients_mc(words: &[Word], hurst: HurstIndex, config: McConfig) -> Result<Vec<CoeffResult>> {
    let estimates = iterated_integrals_mc(words, hurst, 1.0, config)?;
    Ok(words
        .iter()
        .zip(estimates)
        .map(|(w, m)| {
            let est = m.estimate();
            CoeffResult {
                word: w.clone(),
                hurst,
                method: CoeffMethod::Mc,
                value: est.value,
                stderr: Some(est.stderr),
            }
        })
        .collect())
}

/// Sample moments of `∫_{Δ^k[0, horizon]} dB^I` for each word on a uniform
/// grid, using the configured discretization.
pub fn iterated_integrals_mc(
    words: &[Word],
    hurst: HurstIndex,
    horizon: f64,
    config: McConfig,
) -> Result<Vec<Moments>> {
    let chunks = per_path(
        words,
        hurst,
        horizon,
        config,
        || vec![Moments::default(); words.len()],
        |acc, values| acc.iter_mut().zip(values).for_each(|(m, &v)| m.push(v)),
    )?;
    Ok(chunks.into_iter().fold(vec![Moments::default(); words.len()], |total, chunk| {
        total.into_iter().zip(chunk).map(|(a, b)| a.merge(b)).collect()
    }))
}

/// Moments of `Σ_I weight_I ∫_{Δ^k[0, horizon]} dB^I`, evaluated path by path
/// so that the standard error accounts for correlation between words.
pub fn iterated_integral_combination_mc(
    words: &[Word],
    weights: &[f64],
    hurst: HurstIndex,
    horizon: f64,
    config: McConfig,
) -> Result<Moments> {
    if words.len() != weights.len() {
        return Err(Error::invalid("one weight per word is required"));
    }
    let chunks = per_path(words, hurst, horizon, config, Moments::default, |acc, values| {
        acc.push(values.iter().zip(weights).map(|(v, w)| v * w).sum())
    })?;
    Ok(chunks.into_iter().fold(Moments::default(), Moments::merge))
}

/// Runs `consume` on the iterated integrals of every word for each sampled
/// path, one accumulator per chunk, chunks returned in order.
fn per_path<T, I, C>(
    words: &[Word],
    hurst: HurstIndex,
    horizon: f64,
    config: McConfig,
    init: I,
    consume: C,
) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> T + Sync,
    C: Fn(&mut T, &[f64]) + Sync,
{
    if config.n_steps < 64 {
        return Err(Error::invalid("Monte Carlo coefficients need at least 64 steps"));
    }
    if config.n_paths < 100 {
        return Err(Error::invalid("Monte Carlo coefficients need at least 100 paths"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let n = config.n_steps;
    let sampler = FbmSampler::new(TimeGrid::uniform(horizon, n)?, hurst)?;
    let dt = horizon / n as f64;
    // Words without dB are the deterministic `horizon^k / k!`.
    let deterministic: Vec<Option<f64>> = words
        .iter()
        .map(|w| (w.weight() == 0).then(|| horizon.powi(w.len() as i32) / factorial(w.len())))
        .collect();
    Ok(map_chunks(config.n_paths, |range| {
        let mut acc = init();
        let mut path = vec![0.0; n + 1];
        let mut scratch = vec![0.0; n];
        let mut db = vec![0.0; n];
        let mut cur = vec![0.0; n + 1];
        let mut next = vec![0.0; n + 1];
        let mut prefix = Vec::new();
        let mut incr = Vec::new();
        let mut values = vec![0.0; words.len()];
        for i in range {
            sampler.sample_into(config.seed, i as u64, &mut path, &mut scratch);
            for (d, w) in db.iter_mut().zip(path.windows(2)) {
                *d = w[1] - w[0];
            }
            for ((v, word), fixed) in values.iter_mut().zip(words).zip(&deterministic) {
                if let Some(x) = fixed {
                    *v = *x;
                    continue;
                }
                *v = match config.discretization {
                    Discretization::LeftPoint => left_point(word, &db, dt, &mut cur, &mut next),
                    Discretization::PiecewiseLinear => piecewise_linear(word, &db, dt, &mut prefix, &mut incr),
                };
            }
            consume(&mut acc, &values);
        }
        acc
    }))
}

/// `F_0 ≡ 1`, `F_j(t_{l+1}) = F_j(t_l) + F_{j−1}(t_l) Δ_l^{(i_j)}`.
fn left_point(word: &Word, db: &[f64], dt: f64, cur: &mut Vec<f64>, next: &mut Vec<f64>) -> f64 {
    let n = db.len();
    cur.iter_mut().for_each(|v| *v = 1.0);
    for &letter in word.letters() {
        next[0] = 0.0;
        for l in 0..n {
            let step = if letter == 1 { db[l] } else { dt };
            next[l + 1] = next[l] + cur[l] * step;
        }
        std::mem::swap(cur, next);
    }
    cur[n]
}

/// Over a linear segment the iterated integral of letters `i+1..=j` is
/// `∏ Δ^{(i_l)} / (j−i)!`, so the prefix integrals `F_0..F_k` update as
/// `F_j ← Σ_{i≤j} F_i ∏_{l=i+1}^{j} Δ^{(i_l)} / (j−i)!`.
fn piecewise_linear(word: &Word, db: &[f64], dt: f64, prefix: &mut Vec<f64>, incr: &mut Vec<f64>) -> f64 {
    let letters = word.letters();
    let k = letters.len();
    prefix.clear();
    prefix.resize(k + 1, 0.0);
    prefix[0] = 1.0;
    incr.resize(k, 0.0);
    for &d in db {
        for (slot, &letter) in incr.iter_mut().zip(letters) {
            *slot = if letter == 1 { d } else { dt };
        }
        for j in (1..=k).rev() {
            let mut prod = 1.0;
            let mut add = 0.0;
            for i in (0..j).rev() {
                prod *= incr[i] / (j - i) as f64;
                add += prefix[i] * prod;
            }
            prefix[j] += add;
        }
    }
    prefix[k]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hurst(h: f64) -> HurstIndex {
        HurstIndex::new(h).unwrap()
    }

    fn word(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn analytic(w: &str, h: f64) -> f64 {
        c_coefficient_analytic(&w.parse().unwrap(), hurst(h), 1e-9).unwrap().value
    }

    #[test]
    fn block_decomposition() {
        let b = blocks(&"1101".parse().unwrap());
        let summary: Vec<_> = b.iter().map(|b| (b.lo, b.hi, b.power)).collect();
        assert_eq!(summary, vec![(0, 1, 2), (1, 2, 1)]);
        let b = blocks(&"0110".parse().unwrap());
        let summary: Vec<_> = b.iter().map(|b| (b.lo, b.hi, b.power)).collect();
        assert_eq!(summary, vec![(1, 2, 2)]);
    }

    #[test]
    fn length_three_closed_forms() {
        let h = 0.75;
        assert!((analytic("011", h) - 0.2).abs() < 1e-9);
        assert!((analytic("101", h) - 0.1).abs() < 1e-9);
        assert!((analytic("110", h) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn length_four_example() {
        let h: f64 = 0.75;
        let expected = h * (2.0 * h - 1.0) / (2.0 * (2.0 * h + 1.0) * (2.0 * h + 2.0));
        // "1101" has odd weight; the even-weight dB dt dt dB ordering is "1001".
        assert_eq!(analytic("1101", h), 0.0);
        assert!((analytic("1001", h) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn trivial_words() {
        assert_eq!(analytic("1", 0.7), 0.0);
        assert_eq!(analytic("111", 0.7), 0.0);
        assert!((analytic("0000", 0.7) - 1.0 / 24.0).abs() < 1e-15);
        assert!((analytic("00000", 0.7) - 1.0 / 120.0).abs() < 1e-15);
        assert!((analytic("11", 0.7) - 0.5).abs() < 1e-15);
        assert!((analytic("1111", 0.6) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn guard_on_dt_slots() {
        let err = c_coefficient_analytic(&"00001111".parse().unwrap(), hurst(0.7), 1e-8).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn mc_dt_word_is_exact() {
        let r = c_coefficient_mc(
            &"0".parse().unwrap(),
            hurst(0.7),
            McConfig::new(200, 64, 3),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert_eq!(r.stderr, Some(0.0));
        assert_eq!(r.method, CoeffMethod::Mc);
    }

    #[test]
    fn piecewise_linear_is_exact_for_linear_paths() {
        let db = [0.3, -0.1, 0.25, 0.05];
        let dt = 0.25;
        let total: f64 = db.iter().sum();
        let (mut p, mut q) = (Vec::new(), Vec::new());
        let v = piecewise_linear(&word("11"), &db, dt, &mut p, &mut q);
        assert!((v - total * total / 2.0).abs() < 1e-15);
        let v = piecewise_linear(&word("111"), &db, dt, &mut p, &mut q);
        assert!((v - total.powi(3) / 6.0).abs() < 1e-15);
        // a single segment: ∫∫ dB dt = Δt ΔB / 2 in either order
        let v = piecewise_linear(&word("01"), &[0.4], 1.0, &mut p, &mut q);
        assert!((v - 0.2).abs() < 1e-15);
        // "01" + "10" = t·B_t by the shuffle identity
        let a = piecewise_linear(&word("01"), &db, dt, &mut p, &mut q);
        let b = piecewise_linear(&word("10"), &db, dt, &mut p, &mut q);
        assert!((a + b - total).abs() < 1e-15);
    }

    #[test]
    fn mc_parameter_validation() {
        let w: Word = "11".parse().unwrap();
        let cfg = McConfig::new(50, 64, 0);
        assert!(c_coefficient_mc(&w, hurst(0.7), cfg).is_err());
        let cfg = McConfig::new(500, 32, 0);
        assert!(c_coefficient_mc(&w, hurst(0.7), cfg).is_err());
    }
}
