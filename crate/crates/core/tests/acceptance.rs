//! Acceptance checks. Prints one summary line per criterion; details for
//! each criterion are printed while it runs.
//!
//! The process exits 0 even when a criterion fails, so the remaining test
//! targets still run; read the summary lines for the verdict.

use std::time::{Duration, Instant};

use fracexp::coeff::{c_coefficient_analytic, c_coefficients_mc, McConfig};
use fracexp::expansion::{cond_expand_driftless, evaluate_truncation, expand_p0, CoeffSource, ExpandSettings};
use fracexp::expr::{parse, Expr};
use fracexp::fbm::{c_h_const, covariance, kernel_gram, FbmPath, FbmSampler, HurstIndex, TimeGrid};
use fracexp::mc::{mc_p0, mc_pt_conditional, McSettings};
use fracexp::sde::{chain_rule_residual, doss_sussmann_solve, euler_young_solve, SdeProblem};
use fracexp::stats::Moments;
use fracexp::variance::{r_fn, sigma_h_sq, var_zh, var_zh_lower_bound, var_zh_upper_bound};
use fracexp::word::Word;

type Check = Result<bool, fracexp::Error>;

fn hurst(h: f64) -> HurstIndex {
    HurstIndex::new(h).expect("valid Hurst index")
}

fn word(s: &str) -> Word {
    s.parse().expect("valid word")
}

fn all_words(max_len: usize) -> Vec<Word> {
    (1..=max_len)
        .flat_map(|len| {
            (0..1u32 << len).map(move |bits| Word::new((0..len).map(|i| ((bits >> (len - 1 - i)) & 1) as u8).collect()))
        })
        .map(|w| w.expect("valid word"))
        .collect()
}

fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

/// Table of third and fourth order coefficients with their closed forms.
fn criterion_1() -> Check {
    type Form = fn(f64) -> f64;
    let table: [(&str, Form); 9] = [
        ("011", |h| 1.0 / (2.0 * (2.0 * h + 1.0))),
        ("101", |h| (2.0 * h - 1.0) / (2.0 * (2.0 * h + 1.0))),
        ("110", |h| 1.0 / (2.0 * (2.0 * h + 1.0))),
        ("0011", |h| 1.0 / (2.0 * (2.0 * h + 1.0) * (2.0 * h + 2.0))),
        ("0101", |h| h / ((2.0 * h + 1.0) * (2.0 * h + 2.0))),
        ("0110", |h| 1.0 / (2.0 * (2.0 * h + 1.0) * (2.0 * h + 2.0))),
        ("1010", |h| h / ((2.0 * h + 1.0) * (2.0 * h + 2.0))),
        ("1001", |h| h * (2.0 * h - 1.0) / (2.0 * (2.0 * h + 1.0) * (2.0 * h + 2.0))),
        ("1100", |h| 1.0 / (2.0 * (2.0 * h + 1.0) * (2.0 * h + 2.0))),
    ];
    let mut all = true;
    for (w, form) in table {
        let start = Instant::now();
        for h in [0.6, 0.75, 0.9] {
            let got = c_coefficient_analytic(&word(w), hurst(h), 1e-10)?.value;
            let want = form(h);
            let rel = (got - want).abs() / want.abs();
            let ok = rel <= 1e-6;
            all &= ok;
            println!("  c_{w} H={h}: {got:.12e} closed form {want:.12e} rel {rel:.2e} {}", status(ok));
        }
        let elapsed = start.elapsed();
        let ok = elapsed <= Duration::from_secs(60);
        all &= ok;
        println!("  c_{w} runtime {:.3}s {}", elapsed.as_secs_f64(), status(ok));
    }
    Ok(all)
}

/// Analytic coefficients against Monte Carlo for every word up to length 4.
fn criterion_2() -> Check {
    let h = hurst(0.7);
    let words = all_words(4);
    let mc = c_coefficients_mc(&words, h, McConfig::new(100_000, 512, 20))?;
    let mut all = true;
    for (w, est) in words.iter().zip(&mc) {
        let analytic = c_coefficient_analytic(w, h, 1e-10)?.value;
        let se = est.stderr.unwrap_or(0.0);
        let diff = (analytic - est.value).abs();
        let mut ok = diff <= 3.0 * se;
        if w.weight() % 2 == 1 {
            ok &= analytic == 0.0;
        }
        all &= ok;
        println!(
            "  {w:>4} analytic {analytic:+.6e} mc {:+.6e} ± {se:.1e} |diff|/se {:.2} {}",
            est.value,
            if se > 0.0 { diff / se } else { f64::NAN },
            status(ok)
        );
    }
    Ok(all)
}

/// Driftless expansion of sin at 0.3: only the pure `h^{2mH}` terms survive.
fn criterion_3() -> Check {
    let f = parse("sin(x)")?;
    let x = 0.3_f64;
    let settings = ExpandSettings {
        source: CoeffSource::Analytic,
        ..ExpandSettings::default()
    };
    let derivs = [x.sin(), x.cos(), -x.sin(), -x.cos(), x.sin(), x.cos(), -x.sin()];
    let mut all = true;
    for hv in [0.6, 0.7, 0.9] {
        let terms = expand_p0(&f, &Expr::zero(), x, hurst(hv), 3, 0, &settings)?;
        let mut seen = [false; 4];
        for t in &terms.terms {
            let (m, n) = (t.pair.m, t.pair.n);
            let want = if n == 0 && (1..=3).contains(&m) {
                seen[m as usize] = true;
                derivs[2 * m as usize] / (2f64.powi(m as i32) * (1..=m).product::<u32>() as f64)
            } else {
                0.0
            };
            let ok = (t.coefficient - want).abs() <= 1e-9;
            all &= ok;
            println!(
                "  H={hv} ({m},{n}) exponent {:.2}: {:+.12e} want {want:+.12e} {}",
                t.exponent,
                t.coefficient,
                status(ok)
            );
        }
        let ok = seen[1..].iter().all(|&s| s);
        all &= ok;
        if !ok {
            println!("  H={hv}: missing an (m, 0) term");
        }
    }
    Ok(all)
}

/// Remainder of the (1, 1) truncation against Monte Carlo.
fn criterion_4() -> Check {
    let start = Instant::now();
    let f = parse("sin(x)")?;
    let b = parse("0.5*tanh(x)")?;
    let (x0, h_idx) = (0.3, hurst(0.7));
    let terms = expand_p0(&f, &b, x0, h_idx, 1, 1, &ExpandSettings::default())?;
    let exps: Vec<String> = terms.terms.iter().map(|t| format!("{:.1}", t.exponent)).collect();
    println!("  truncation exponents {{{}}}", exps.join(", "));
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut points = Vec::new();
    for (i, &h) in hs.iter().enumerate() {
        let est = mc_p0(&f, &b, x0, h_idx, h, McSettings::new(1_000_000, 128, 40 + i as u64), true)?;
        let trunc = evaluate_truncation(&terms, h);
        let diff = est.value - trunc;
        println!(
            "  h={h}: mc {:.10e} ± {:.1e} truncation {trunc:.10e} diff {diff:+.4e} ({:.1} se)",
            est.value,
            est.stderr,
            diff / est.stderr
        );
        points.push((h, diff, est.stderr));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let slope_ok = slope >= 2.4 - 0.15;
    println!("  fitted slope {slope:.3} (need ≥ 2.25) {}", status(slope_ok));
    // Error bars contradict the fit when a point is indistinguishable from
    // zero or the remainder changes sign along the grid.
    let sign = points[0].1.signum();
    let bars_ok = points.iter().all(|&(_, d, se)| d.abs() > 3.0 * se && d.signum() == sign);
    println!("  every |diff| > 3 se with a common sign: {}", status(bars_ok));
    let elapsed = start.elapsed();
    let time_ok = elapsed <= Duration::from_secs(600);
    println!("  runtime {:.1}s {}", elapsed.as_secs_f64(), status(time_ok));
    Ok(slope_ok && bars_ok && time_ok)
}

/// Small-h variance of the conditional increment.
fn criterion_5() -> Check {
    let t = 1.0;
    let tol = 1e-10;
    let mut all = true;
    for hv in [0.6, 0.7, 0.8] {
        let hi = hurst(hv);
        let s2 = sigma_h_sq(hi, tol)?;
        for h in [1e-1, 1e-2, 1e-3, 1e-4] {
            let v = var_zh(t, h, hi, tol)?;
            let lo = var_zh_lower_bound(t, h, hi, tol)?;
            let up = var_zh_upper_bound(t, h, hi, tol)?;
            let ratio = v / (s2 * h.powf(2.0 * hv));
            let mut ok = lo <= v && v <= up;
            if h == 1e-4 {
                ok &= (0.98..=1.02).contains(&ratio);
            }
            all &= ok;
            println!("  H={hv} h={h:e}: lower {lo:.8e} var {v:.8e} upper {up:.8e} ratio {ratio:.6} {}", status(ok));
        }
    }
    Ok(all)
}

/// `r` is symmetric but not constant, and `r(1)` recovers `σ_H²`.
fn criterion_6() -> Check {
    let hi = hurst(0.7);
    let tol = 1e-11;
    let r1 = r_fn(1.0, hi, tol)?;
    let r2 = r_fn(2.0, hi, tol)?;
    let spread = (r2 - r1).abs() / r1;
    let mut all = spread > 0.01;
    println!("  r(1) {r1:.12e} r(2) {r2:.12e} relative gap {spread:.4} {}", status(spread > 0.01));
    for x in [1.5, 2.0, 4.0] {
        let a = r_fn(x, hi, tol)?;
        let b = r_fn(1.0 / x, hi, tol)?;
        let ok = (a - b).abs() <= 1e-8;
        all &= ok;
        println!("  r({x}) {a:.12e} r(1/{x}) {b:.12e} {}", status(ok));
    }
    let c = c_h_const(hi) / 0.2;
    let lhs = r1 * c * c;
    let s2 = sigma_h_sq(hi, tol)?;
    let rel = (lhs - s2).abs() / s2;
    let ok = rel <= 1e-8;
    all &= ok;
    println!("  r(1)(c_H/(H-1/2))^2 {lhs:.12e} sigma_H^2 {s2:.12e} rel {rel:.1e} {}", status(ok));
    Ok(all)
}

/// Leading coefficients of the driftless conditional expansion.
fn criterion_7() -> Check {
    let (t, beta, hv) = (1.0_f64, 0.5_f64, 0.7);
    let hi = hurst(hv);
    let mut all = true;
    let mut check = |label: &str, got: f64, want: f64| {
        let ok = (got - want).abs() <= 1e-12;
        all &= ok;
        println!("  {label}: {got:+.15e} want {want:+.15e} {}", status(ok));
    };
    let lin = cond_expand_driftless(&Expr::Var, t, beta, hi, 1, 2)?;
    check("f=x (0,1)", lin.coefficient(0, 1), hv * beta / t);
    check("f=x (1,0)", lin.coefficient(1, 0), -beta / (2.0 * t.powf(2.0 * hv)));
    check(
        "f=x (0,2)",
        lin.coefficient(0, 2),
        hv * (2.0 * hv - 1.0) * beta / (2.0 * t * t),
    );
    let sin = cond_expand_driftless(&parse("sin(x)")?, t, beta, hi, 1, 2)?;
    check("f=sin (0,1)", sin.coefficient(0, 1), hv * beta * beta.cos() / t);
    check(
        "f=sin (1,0) - f''/2",
        sin.coefficient(1, 0) - 0.5 * (-beta.sin()),
        -beta * beta.cos() / (2.0 * t.powf(2.0 * hv)),
    );
    Ok(all)
}

/// The Volterra kernel reproduces the covariance.
fn criterion_8() -> Check {
    let grid = [0.4, 0.8, 1.2, 1.6, 2.0];
    let mut all = true;
    for hv in [0.6, 0.75, 0.9] {
        let mut worst: f64 = 0.0;
        for &s in &grid {
            for &t in &grid {
                let g = kernel_gram(s, t, hurst(hv), 1e-10)?;
                worst = worst.max((g - covariance(s, t, hv)?).abs());
            }
        }
        let ok = worst <= 1e-6;
        all &= ok;
        println!("  H={hv}: max |gram - R| over 5x5 grid {worst:.2e} {}", status(ok));
    }
    Ok(all)
}

/// Sampler covariance, Euler against Doss–Sussmann, chain-rule residuals.
fn criterion_9() -> Check {
    let hi = hurst(0.7);
    let grid = TimeGrid::uniform(1.0, 511)?;
    let times = grid.points().to_vec();
    let sampler = FbmSampler::new(grid, hi)?;
    // 16 evenly spaced grid points, every pair.
    let idx: Vec<usize> = (1..=16).map(|k| k * 511 / 16).collect();
    let n_pairs = idx.len() * (idx.len() + 1) / 2;
    let mut acc = vec![Moments::default(); n_pairs];
    let mut path = vec![0.0; times.len()];
    let mut scratch = vec![0.0; times.len() - 1];
    for i in 0..20_000u64 {
        sampler.sample_into(90, i, &mut path, &mut scratch);
        let mut k = 0;
        for (a, &ia) in idx.iter().enumerate() {
            for &ib in &idx[..=a] {
                acc[k].push(path[ia] * path[ib]);
                k += 1;
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for (a, &ia) in idx.iter().enumerate() {
        for &ib in &idx[..=a] {
            let est = acc[k].estimate();
            worst = worst.max((est.value - covariance(times[ia], times[ib], 0.7)?).abs() / est.stderr);
            k += 1;
        }
    }
    let cov_ok = worst <= 3.0;
    println!(
        "  sampler: {n_pairs} covariance entries on 512 points, 2e4 paths, max |err|/se {worst:.2} {}",
        status(cov_ok)
    );

    let n = 4096;
    let fine = FbmSampler::new(TimeGrid::uniform(1.0, n)?, hi)?;
    let problem = SdeProblem::new(parse("tanh(x)")?, 0.5, hi, 1.0)?;
    let mut sup: f64 = 0.0;
    for i in 0..8 {
        let path = fine.sample(91, i);
        let euler = euler_young_solve(&problem, &path)?;
        let ds = doss_sussmann_solve(&problem, &path, 1e-10)?;
        sup = euler.iter().zip(&ds).fold(sup, |m, (a, b)| m.max((a - b).abs()));
    }
    let ds_ok = sup <= 1e-3;
    println!("  Euler vs Doss-Sussmann at {n} steps, 8 paths: sup diff {sup:.2e} {}", status(ds_ok));

    let g = parse("sin(x)")?;
    let base = fine.sample(92, 0);
    let mut residuals = Vec::new();
    for level in [256usize, 512, 1024, 2048, 4096] {
        let stride = n / level;
        let coarse = FbmPath {
            grid: TimeGrid::uniform(1.0, level)?,
            values: base.values.iter().step_by(stride).copied().collect(),
            hurst: hi,
            seed: base.seed,
        };
        residuals.push(chain_rule_residual(&g, &problem, &coarse)?);
    }
    let mono_ok = residuals.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = residuals.iter().map(|r| format!("{r:.3e}")).collect();
    println!("  chain-rule residual, 256..4096 steps: {} {}", shown.join(" > "), status(mono_ok));
    Ok(cov_ok && ds_ok && mono_ok)
}

/// Kernel regression of the conditional increment against its exact form.
fn criterion_10() -> Check {
    let (t, h, hv) = (1.0_f64, 0.1_f64, 0.7);
    let bw = 0.1;
    let est = mc_pt_conditional(
        &Expr::Var,
        &Expr::zero(),
        0.0,
        hurst(hv),
        t,
        h,
        McSettings::new(200_000, 64, 100),
        Some(bw),
        &[-1.0, 0.0, 1.0],
    )?;
    let rho = covariance(t + h, t, hv)? / t.powf(2.0 * hv);
    let mut all = true;
    for p in &est.points {
        let want = (rho - 1.0) * p.x;
        let slack = 3.0 * p.estimate.stderr + 2.0 * bw * bw;
        let ok = (p.estimate.value - want).abs() <= slack && p.reliable;
        all &= ok;
        println!(
            "  beta={:+}: nw {:+.6e} ± {:.1e} exact {want:+.6e} ess {:.0} {}",
            p.x,
            p.estimate.value,
            p.estimate.stderr,
            p.ess,
            status(ok)
        );
    }
    let u = est.unconditional;
    let ok = u.within(0.0, 3.0);
    all &= ok;
    println!("  unconditional mean {:+.3e} ± {:.1e} {}", u.value, u.stderr, status(ok));
    Ok(all)
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 10] = [
        ("coefficient table", criterion_1),
        ("analytic vs Monte Carlo coefficients", criterion_2),
        ("driftless expansion closed form", criterion_3),
        ("expansion remainder order", criterion_4),
        ("variance scaling and sandwich bounds", criterion_5),
        ("non-constant r and sigma_H^2", criterion_6),
        ("conditional driftless expansion", criterion_7),
        ("kernel reproduces covariance", criterion_8),
        ("sampler and solvers", criterion_9),
        ("conditional regression", criterion_10),
    ];
    // `ACCEPTANCE_ONLY=1,4` runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut summary = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        println!("criterion {}: {name}", i + 1);
        let start = Instant::now();
        let verdict = match run() {
            Ok(true) => "PASS".to_string(),
            Ok(false) => "FAIL".to_string(),
            Err(e) => format!("FAIL (error: {e})"),
        };
        summary.push(format!(
            "criterion {:>2} {verdict}: {name} [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        ));
    }
    println!();
    for line in summary {
        println!("{line}");
    }
}
