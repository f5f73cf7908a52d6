//! Pathwise solvers for `dX = b(X) dt + σ(X) dB` driven by a sampled fBm path.
//!
//! For `H > 1/2` the `dB` integral is a Young integral, so left-point sums
//! converge and the classical chain rule holds (no Itô correction).

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fbm::{FbmPath, HurstIndex};
use crate::jet::jet_eval;
use crate::quad::{self, AdaptiveOptions};

/// Smallest `|σ|` accepted as elliptic.
const ELLIPTIC_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SdeProblem {
    pub drift: Expr,
    pub diffusion: Expr,
    pub x0: f64,
    pub hurst: HurstIndex,
    pub horizon: f64,
}

impl SdeProblem {
    /// A problem with unit diffusion.
    pub fn new(drift: Expr, x0: f64, hurst: HurstIndex, horizon: f64) -> Result<Self> {
        Self::with_diffusion(drift, Expr::Const(1.0), x0, hurst, horizon)
    }

    pub fn with_diffusion(drift: Expr, diffusion: Expr, x0: f64, hurst: HurstIndex, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon {horizon} must be positive")));
        }
        if !x0.is_finite() {
            return Err(Error::invalid("x0 must be finite"));
        }
        Ok(SdeProblem {
            drift,
            diffusion,
            x0,
            hurst,
            horizon,
        })
    }

    fn unit_diffusion(&self) -> bool {
        self.diffusion == Expr::Const(1.0)
    }

    fn sigma(&self, x: f64) -> Result<f64> {
        if self.unit_diffusion() {
            return Ok(1.0);
        }
        let s = self.diffusion.eval(x)?;
        if !(s.abs() >= ELLIPTIC_FLOOR) {
            return Err(Error::domain(format!(
                "diffusion `{}` vanishes at x = {x}; ellipticity is required",
                self.diffusion
            )));
        }
        Ok(s)
    }

    fn check_path(&self, path: &FbmPath) -> Result<()> {
        let pts = path.grid.points();
        if pts.len() < 2 || pts[0] != 0.0 {
            return Err(Error::invalid("solver paths must start at t = 0"));
        }
        let end = pts[pts.len() - 1];
        if (end - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::invalid(format!(
                "path ends at {end} but the horizon is {}",
                self.horizon
            )));
        }
        if path.values.len() != pts.len() {
            return Err(Error::invalid("path values do not match its grid"));
        }
        Ok(())
    }
}

/// `X_{k+1} = X_k + b(X_k) Δt_k + σ(X_k) ΔB_k` on the path grid.
pub fn euler_young_solve(p: &SdeProblem, path: &FbmPath) -> Result<Vec<f64>> {
    p.check_path(path)?;
    let t = path.grid.points();
    let b = &path.values;
    let mut x = Vec::with_capacity(t.len());
    x.push(p.x0);
    for k in 0..t.len() - 1 {
        let xk = x[k];
        let next = xk + p.drift.eval(xk)? * (t[k + 1] - t[k]) + p.sigma(xk)? * (b[k + 1] - b[k]);
        if !next.is_finite() {
            return Err(Error::numerical(format!("Euler iterate diverged at t = {}", t[k + 1]), next));
        }
        x.push(next);
    }
    Ok(x)
}

/// `|g(X_T) − g(x0) − Σ g′(X_k)σ(X_k)ΔB_k − Σ g′(X_k)b(X_k)Δt_k|` along the
/// Euler solution.
pub fn chain_rule_residual(g: &Expr, p: &SdeProblem, path: &FbmPath) -> Result<f64> {
    let x = euler_young_solve(p, path)?;
    let t = path.grid.points();
    let b = &path.values;
    let mut sum = 0.0;
    for k in 0..x.len() - 1 {
        let dg = jet_eval(g, x[k], 1)?.derivative(1);
        sum += dg * (p.sigma(x[k])? * (b[k + 1] - b[k]) + p.drift.eval(x[k])? * (t[k + 1] - t[k]));
    }
    Ok((g.eval(x[x.len() - 1])? - g.eval(p.x0)? - sum).abs())
}

/// Integral curve `ψ' = σ(ψ)`, `ψ(0) = anchor`, tabulated on a uniform lattice
/// in both directions and read back by cubic Hermite interpolation (the
/// slope at each node is `σ(ψ)`).
struct SigmaFlow<'a> {
    sigma: &'a Expr,
    step: f64,
    /// `(ψ(kδ), σ(ψ(kδ)))` for `k ≥ 0` and for `k ≤ 0`.
    pos: Vec<(f64, f64)>,
    neg: Vec<(f64, f64)>,
    increasing: bool,
}

const MAX_FLOW_NODES: usize = 50_000_000;

impl<'a> SigmaFlow<'a> {
    fn new(sigma: &'a Expr, anchor: f64, tol: f64) -> Result<Self> {
        let s0 = sigma.eval(anchor)?;
        if !(s0.abs() >= ELLIPTIC_FLOOR) {
            return Err(Error::domain(format!("diffusion `{sigma}` vanishes at x = {anchor}")));
        }
        // One Richardson check on a unit flow time fixes the lattice step.
        let mut step = 1.0 / 64.0;
        loop {
            let coarse = rk4_flow(sigma, anchor, step, (1.0 / step) as usize)?;
            let fine = rk4_flow(sigma, anchor, 0.5 * step, (2.0 / step) as usize)?;
            if (coarse - fine).abs() <= tol * 0.1 {
                break;
            }
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::numerical("flow step size underflow", (coarse - fine).abs()));
            }
        }
        Ok(SigmaFlow {
            sigma,
            step,
            pos: vec![(anchor, s0)],
            neg: vec![(anchor, s0)],
            increasing: s0 > 0.0,
        })
    }

    fn extend(&mut self, forward: bool) -> Result<()> {
        let table = if forward { &mut self.pos } else { &mut self.neg };
        if table.len() >= MAX_FLOW_NODES {
            return Err(Error::Resource("diffusion flow table exceeded its size limit".into()));
        }
        let h = if forward { self.step } else { -self.step };
        let (y, s) = *table.last().expect("table has its anchor");
        let next = rk4_step(self.sigma, y, h, s)?;
        let sn = self.sigma.eval(next)?;
        if !(sn.abs() >= ELLIPTIC_FLOOR) || sn.signum() != s.signum() || !next.is_finite() {
            return Err(Error::domain(format!(
                "diffusion `{}` is not elliptic along its flow near x = {next}",
                self.sigma
            )));
        }
        table.push((next, sn));
        Ok(())
    }

    fn node(&mut self, k: i64) -> Result<(f64, f64)> {
        let idx = k.unsigned_abs() as usize;
        let forward = k >= 0;
        loop {
            let table = if forward { &self.pos } else { &self.neg };
            if let Some(&v) = table.get(idx) {
                return Ok(v);
            }
            self.extend(forward)?;
        }
    }

    /// `ψ(τ)`.
    fn value(&mut self, tau: f64) -> Result<f64> {
        let k = (tau / self.step).floor() as i64;
        let (y0, s0) = self.node(k)?;
        let (y1, s1) = self.node(k + 1)?;
        let u = tau / self.step - k as f64;
        Ok(hermite(y0, s0, y1, s1, self.step, u))
    }

    /// `ψ^{−1}(x)`.
    fn inverse(&mut self, x: f64) -> Result<f64> {
        let forward = (x > self.pos[0].0) == self.increasing;
        let anchor = self.pos[0].0;
        // Extend the table until it passes x, then bisect on node index.
        loop {
            let table = if forward { &self.pos } else { &self.neg };
            let last = table[table.len() - 1].0;
            if (last - x) * (anchor - x) <= 0.0 {
                break;
            }
            self.extend(forward)?;
        }
        let table = if forward { &self.pos } else { &self.neg };
        let (mut lo, mut hi) = (0usize, table.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if (table[mid].0 - x) * (anchor - x) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let cell = if forward { lo as i64 } else { -(hi as i64) };
        self.solve_cell(cell, x)
    }

    fn solve_cell(&mut self, k: i64, x: f64) -> Result<f64> {
        let (y0, s0) = self.node(k)?;
        let (y1, s1) = self.node(k + 1)?;
        let (mut a, mut b) = (0.0, 1.0);
        let mut u = if y1 != y0 { ((x - y0) / (y1 - y0)).clamp(0.0, 1.0) } else { 0.5 };
        for _ in 0..100 {
            let f = hermite(y0, s0, y1, s1, self.step, u) - x;
            if f == 0.0 {
                break;
            }
            if (f > 0.0) == self.increasing {
                b = u;
            } else {
                a = u;
            }
            let d = self.step * hermite_slope(y0, s0, y1, s1, self.step, u);
            let newton = u - f / d;
            u = if d != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-15 || (f / d).abs() < 1e-16 {
                break;
            }
        }
        Ok((k as f64 + u) * self.step)
    }
}

fn hermite(y0: f64, s0: f64, y1: f64, s1: f64, step: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * step * s0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * step * s1
}

/// `d/dτ` of [`hermite`].
fn hermite_slope(y0: f64, s0: f64, y1: f64, s1: f64, step: f64, u: f64) -> f64 {
    let u2 = u * u;
    ((6.0 * u2 - 6.0 * u) * (y0 - y1)) / step + (3.0 * u2 - 4.0 * u + 1.0) * s0 + (3.0 * u2 - 2.0 * u) * s1
}

fn rk4_step(sigma: &Expr, y: f64, h: f64, s_y: f64) -> Result<f64> {
    let k1 = s_y;
    let k2 = sigma.eval(y + 0.5 * h * k1)?;
    let k3 = sigma.eval(y + 0.5 * h * k2)?;
    let k4 = sigma.eval(y + h * k3)?;
    Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn rk4_flow(sigma: &Expr, y0: f64, h: f64, steps: usize) -> Result<f64> {
    let mut y = y0;
    for _ in 0..steps {
        y = rk4_step(sigma, y, h, sigma.eval(y)?)?;
    }
    Ok(y)
}

/// Doss–Sussmann representation `X_t = φ(A_t, B_t)` with `∂φ/∂x₂ = σ(φ)`,
/// `φ(x₁, 0) = x₁`, and
/// `A′ = exp(−∫_0^{B_t} σ′(φ(A, s)) ds) b(φ(A, B_t)) = σ(A)/σ(φ(A, B_t)) · b(φ(A, B_t))`.
///
/// `φ` is read from the flow of `σ` through `x0`: `φ(x₁, x₂) = ψ(ψ^{−1}(x₁) + x₂)`.
/// `A` is integrated with classical RK4 against the linear interpolant of
/// the path, starting from eight substeps per grid interval and doubling
/// until two successive solutions agree to `ode_tol`.
pub fn doss_sussmann_solve(p: &SdeProblem, path: &FbmPath, ode_tol: f64) -> Result<Vec<f64>> {
    p.check_path(path)?;
    if !(ode_tol > 0.0) {
        return Err(Error::invalid("ODE tolerance must be positive"));
    }
    let constant_sigma = if p.diffusion.is_constant() {
        let c = p.diffusion.eval(0.0)?;
        if !(c.abs() >= ELLIPTIC_FLOOR) {
            return Err(Error::domain("diffusion coefficient is zero"));
        }
        Some(c)
    } else {
        None
    };
    let mut flow = match constant_sigma {
        Some(_) => None,
        None => Some(SigmaFlow::new(&p.diffusion, p.x0, ode_tol)?),
    };
    let mut phi = |x1: f64, x2: f64| -> Result<f64> {
        match (constant_sigma, flow.as_mut()) {
            (Some(c), _) => Ok(x1 + c * x2),
            (None, Some(flow)) => {
                let tau = flow.inverse(x1)?;
                flow.value(tau + x2)
            }
            (None, None) => unreachable!("flow exists for non-constant diffusion"),
        }
    };

    let mut substeps = 8usize;
    let mut previous = integrate_a(p, path, substeps, &mut phi)?;
    loop {
        substeps *= 2;
        let refined = integrate_a(p, path, substeps, &mut phi)?;
        let gap = previous
            .iter()
            .zip(&refined)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        previous = refined;
        if gap <= ode_tol {
            break;
        }
        if substeps >= 1 << 12 {
            return Err(Error::numerical("ODE step size underflow in Doss–Sussmann solve", gap));
        }
    }
    previous
        .iter()
        .zip(&path.values)
        .map(|(&a, &b)| phi(a, b))
        .collect()
}

fn integrate_a<F>(p: &SdeProblem, path: &FbmPath, substeps: usize, phi: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let t = path.grid.points();
    let bv = &path.values;
    let zero_drift = p.drift == Expr::Const(0.0);
    let mut a = p.x0;
    let mut out = Vec::with_capacity(t.len());
    out.push(a);
    for k in 0..t.len() - 1 {
        if zero_drift {
            out.push(a);
            continue;
        }
        let dt = (t[k + 1] - t[k]) / substeps as f64;
        let slope = (bv[k + 1] - bv[k]) / (t[k + 1] - t[k]);
        let b_at = |s: f64| bv[k] + slope * s;
        let mut rhs = |a: f64, s: f64| -> Result<f64> {
            let x = phi(a, b_at(s))?;
            Ok(p.sigma(a)? / p.sigma(x)? * p.drift.eval(x)?)
        };
        for j in 0..substeps {
            let s = j as f64 * dt;
            let k1 = rhs(a, s)?;
            let k2 = rhs(a + 0.5 * dt * k1, s + 0.5 * dt)?;
            let k3 = rhs(a + 0.5 * dt * k2, s + 0.5 * dt)?;
            let k4 = rhs(a + dt * k3, s + dt)?;
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if !a.is_finite() {
            return Err(Error::numerical("Doss–Sussmann drift ODE diverged", a));
        }
        out.push(a);
    }
    Ok(out)
}

/// The change of variable `F(x) = ∫_0^x dz/σ(z)` that turns the diffusion
/// coefficient into 1.
#[derive(Debug, Clone)]
pub struct LampertiMap {
    sigma: Expr,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

/// Same as [`LampertiMap::new`].
pub fn lamperti_map(sigma: &Expr, domain: (f64, f64)) -> Result<LampertiMap> {
    LampertiMap::new(sigma, domain)
}

/// Sample count for the ellipticity scan of [`LampertiMap::new`].
const ELLIPTIC_SCAN: usize = 2001;

impl LampertiMap {
    /// Builds the map on `[lo, hi]`. `σ` must keep one sign away from zero on
    /// the hull of the domain and 0.
    pub fn new(sigma: &Expr, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("invalid domain [{lo}, {hi}]")));
        }
        let (a, b) = (lo.min(0.0), hi.max(0.0));
        let mut sign = 0.0;
        for i in 0..ELLIPTIC_SCAN {
            let x = a + (b - a) * i as f64 / (ELLIPTIC_SCAN - 1) as f64;
            let s = sigma.eval(x)?;
            if !(s.abs() >= ELLIPTIC_FLOOR) || (sign != 0.0 && s.signum() != sign) {
                return Err(Error::domain(format!("diffusion `{sigma}` is not elliptic near x = {x}")));
            }
            sign = s.signum();
        }
        let mut map = LampertiMap {
            sigma: sigma.clone(),
            lo,
            hi,
            f_lo: 0.0,
            f_hi: 0.0,
        };
        map.f_lo = map.integral(lo)?;
        map.f_hi = map.integral(hi)?;
        Ok(map)
    }

    fn integral(&self, x: f64) -> Result<f64> {
        let mut failure = None;
        let q = quad::integrate(
            |z: f64| match self.sigma.eval(z) {
                Ok(s) => 1.0 / s,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            0.0,
            x,
            &[],
            AdaptiveOptions::rel(1e-14).with_abs(1e-15),
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(q.value),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `F(x)`.
    pub fn forward(&self, x: f64) -> Result<f64> {
        if !(x >= self.lo && x <= self.hi) {
            return Err(Error::domain(format!(
                "x = {x} outside the Lamperti domain [{}, {}]",
                self.lo, self.hi
            )));
        }
        self.integral(x)
    }

    /// `F^{−1}(y)` by Newton steps safeguarded with bisection.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (ymin, ymax) = (self.f_lo.min(self.f_hi), self.f_lo.max(self.f_hi));
        if !(y >= ymin && y <= ymax) {
            return Err(Error::domain(format!(
                "y = {y} outside the Lamperti range [{ymin}, {ymax}]"
            )));
        }
        let increasing = self.f_hi > self.f_lo;
        let (mut a, mut b) = (self.lo, self.hi);
        let mut x = (self.lo + (y - self.f_lo) / (self.f_hi - self.f_lo) * (self.hi - self.lo)).clamp(a, b);
        for _ in 0..200 {
            let r = self.integral(x)? - y;
            if r.abs() <= 1e-15 * y.abs().max(1.0) {
                return Ok(x);
            }
            if (r > 0.0) == increasing {
                b = x;
            } else {
                a = x;
            }
            let newton = x - r * self.sigma.eval(x)?;
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                return Ok(x);
            }
        }
        Ok(x)
    }

    /// Drift of `Y = F(X)`: `b̃(y) = (b/σ)(F^{−1}(y))`.
    pub fn transformed_drift(&self, drift: &Expr, y: f64) -> Result<f64> {
        let x = self.inverse(y)?;
        Ok(drift.eval(x)? / self.sigma.eval(x)?)
    }

    /// Euler scheme for `dY = b̃(Y) dt + dB`, `Y_0 = F(x0)`, mapped back
    /// through `F^{−1}`.
    pub fn solve_euler(&self, p: &SdeProblem, path: &FbmPath) -> Result<Vec<f64>> {
        p.check_path(path)?;
        let t = path.grid.points();
        let bv = &path.values;
        let zero_drift = p.drift == Expr::Const(0.0);
        let mut y = self.forward(p.x0)?;
        let mut out = Vec::with_capacity(t.len());
        out.push(p.x0);
        for k in 0..t.len() - 1 {
            let drift = if zero_drift { 0.0 } else { self.transformed_drift(&p.drift, y)? };
            y += drift * (t[k + 1] - t[k]) + (bv[k + 1] - bv[k]);
            out.push(self.inverse(y)?);
        }
        Ok(out)
    }
}
