//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] of order `d` at `x` carries `c_j = f^{(j)}(x)/j!` for `j ≤ d`.
//! Elementary functions use the usual recurrences obtained from their
//! first-order ODEs, so every coefficient is exact up to rounding.

use crate::error::{Error, Result};
use crate::expr::{Expr, Func};

/// Largest supported jet order.
pub const MAX_ORDER: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub point: f64,
    pub coeffs: Vec<f64>,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `f^{(k)}(x) = k! c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|k| self.derivative(k)).collect()
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Taylor coefficients of `e` at `x` up to `order`.
pub fn jet_eval(e: &Expr, x: f64, order: usize) -> Result<Jet> {
    if order > MAX_ORDER {
        return Err(Error::Resource(format!("jet order {order} exceeds {MAX_ORDER}")));
    }
    let coeffs = eval_rec(e, x, order + 1)?;
    Ok(Jet { point: x, coeffs })
}

fn constant(c: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = c;
    v
}

fn eval_rec(e: &Expr, x: f64, n: usize) -> Result<Vec<f64>> {
    Ok(match e {
        Expr::Const(c) => constant(*c, n),
        Expr::Var => {
            let mut v = constant(x, n);
            if n > 1 {
                v[1] = 1.0;
            }
            v
        }
        Expr::Neg(a) => eval_rec(a, x, n)?.into_iter().map(|c| -c).collect(),
        Expr::Add(a, b) => {
            let (a, b) = (eval_rec(a, x, n)?, eval_rec(b, x, n)?);
            a.iter().zip(&b).map(|(p, q)| p + q).collect()
        }
        Expr::Sub(a, b) => {
            let (a, b) = (eval_rec(a, x, n)?, eval_rec(b, x, n)?);
            a.iter().zip(&b).map(|(p, q)| p - q).collect()
        }
        Expr::Mul(a, b) => mul(&eval_rec(a, x, n)?, &eval_rec(b, x, n)?),
        Expr::Div(a, b) => {
            let denom = eval_rec(b, x, n)?;
            if denom[0] == 0.0 {
                return Err(Error::domain(format!("division by zero in `{e}` at x = {x}")));
            }
            div(&eval_rec(a, x, n)?, &denom)
        }
        Expr::Pow(base, exponent) => {
            let base_jet = eval_rec(base, x, n)?;
            match exponent.as_integer() {
                Some(k) => {
                    if k < 0 && base_jet[0] == 0.0 {
                        return Err(Error::domain(format!("zero to a negative power in `{e}`")));
                    }
                    powi(&base_jet, k)
                }
                None => {
                    if !(base_jet[0] > 0.0) {
                        return Err(Error::domain(format!(
                            "non-integer power of nonpositive base {} in `{e}`",
                            base_jet[0]
                        )));
                    }
                    let exp_jet = eval_rec(exponent, x, n)?;
                    exp(&mul(&exp_jet, &log(&base_jet)))
                }
            }
        }
        Expr::Call(func, arg) => {
            let a = eval_rec(arg, x, n)?;
            match func {
                Func::Exp => exp(&a),
                Func::Log => {
                    if !(a[0] > 0.0) {
                        return Err(Error::domain(format!("log of nonpositive value {} in `{e}`", a[0])));
                    }
                    log(&a)
                }
                Func::Sin => sin_cos(&a).0,
                Func::Cos => sin_cos(&a).1,
                Func::Tanh => tanh(&a),
                Func::Sqrt => {
                    if a[0] < 0.0 || (a[0] == 0.0 && n > 1) {
                        return Err(Error::domain(format!(
                            "sqrt of value {} in `{e}` (not differentiable)",
                            a[0]
                        )));
                    }
                    sqrt(&a)
                }
            }
        }
    })
}

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum())
        .collect()
}

fn div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    for k in 0..n {
        let s: f64 = (1..=k).map(|j| b[j] * c[k - j]).sum();
        c[k] = (a[k] - s) / b[0];
    }
    c
}

fn powi(a: &[f64], k: i32) -> Vec<f64> {
    let n = a.len();
    let mut result = constant(1.0, n);
    let mut base = a.to_vec();
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    if k < 0 {
        div(&constant(1.0, n), &result)
    } else {
        result
    }
}

fn exp(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut e = vec![0.0; n];
    e[0] = a[0].exp();
    for k in 1..n {
        let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
        e[k] = s / k as f64;
    }
    e
}

fn log(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut l = vec![0.0; n];
    l[0] = a[0].ln();
    for k in 1..n {
        let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
        l[k] = (a[k] - s / k as f64) / a[0];
    }
    l
}

fn sin_cos(a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for k in 1..n {
        let mut ss = 0.0;
        let mut cc = 0.0;
        for j in 1..=k {
            let ja = j as f64 * a[j];
            ss += ja * c[k - j];
            cc += ja * s[k - j];
        }
        s[k] = ss / k as f64;
        c[k] = -cc / k as f64;
    }
    (s, c)
}

fn tanh(a: &[f64]) -> Vec<f64> {
    // y' = (1 − y²) a'
    let n = a.len();
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    y[0] = a[0].tanh();
    w[0] = 1.0 - y[0] * y[0];
    for k in 1..n {
        let s: f64 = (1..=k).map(|j| j as f64 * a[j] * w[k - j]).sum();
        y[k] = s / k as f64;
        let sq: f64 = (0..=k).map(|i| y[i] * y[k - i]).sum();
        w[k] = -sq;
    }
    y
}

fn sqrt(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut r = vec![0.0; n];
    r[0] = a[0].sqrt();
    for k in 1..n {
        let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
        r[k] = (a[k] - s) / (2.0 * r[0]);
    }
    r
}
