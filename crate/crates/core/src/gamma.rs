//! The differential operators `Γ_I(f, b)` as formal polynomials in the
//! derivative symbols `f^{(a)}` and `b^{(j)}`.
//!
//! Starting from `f`, each letter of the word (innermost first) applies
//! `g ↦ g′` for a `1` and `g ↦ b·g′` for a `0`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::jet_eval;
use crate::word::Word;

/// Longest word accepted by [`gamma_polynomial`].
pub const MAX_WORD_LEN: usize = 12;

/// `f^{(f_order)} · ∏ b^{(b_orders[i])}`, with `b_orders` sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub f_order: u32,
    pub b_orders: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GammaPolynomial {
    terms: BTreeMap<Monomial, i64>,
}

impl GammaPolynomial {
    fn identity() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(
            Monomial {
                f_order: 0,
                b_orders: Vec::new(),
            },
            1,
        );
        GammaPolynomial { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_f_order(&self) -> u32 {
        self.terms.keys().map(|m| m.f_order).max().unwrap_or(0)
    }

    pub fn max_b_order(&self) -> Option<u32> {
        self.terms.keys().flat_map(|m| m.b_orders.iter().copied()).max()
    }

    fn differentiate(&self) -> Self {
        let mut out: BTreeMap<Monomial, i64> = BTreeMap::new();
        for (mono, &coef) in &self.terms {
            let mut df = mono.clone();
            df.f_order += 1;
            *out.entry(df).or_insert(0) += coef;
            for i in 0..mono.b_orders.len() {
                let mut db = mono.clone();
                db.b_orders[i] += 1;
                db.b_orders.sort_unstable();
                *out.entry(db).or_insert(0) += coef;
            }
        }
        out.retain(|_, c| *c != 0);
        GammaPolynomial { terms: out }
    }

    fn times_b(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(mono, &c)| {
                let mut m = mono.clone();
                m.b_orders.push(0);
                m.b_orders.sort_unstable();
                (m, c)
            })
            .collect();
        GammaPolynomial { terms }
    }

    /// Evaluates with `f_derivs[a] = f^{(a)}(x)` and `b_derivs[j] = b^{(j)}(x)`.
    pub fn eval(&self, f_derivs: &[f64], b_derivs: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(mono, &coef)| {
                mono.b_orders
                    .iter()
                    .fold(coef as f64 * f_derivs[mono.f_order as usize], |acc, &j| {
                        acc * b_derivs[j as usize]
                    })
            })
            .sum()
    }
}

impl fmt::Display for GammaPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (mono, &coef)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if coef != 1 {
                write!(f, "{coef} ")?;
            }
            for b in &mono.b_orders {
                write!(f, "b^({b}) ")?;
            }
            write!(f, "f^({})", mono.f_order)?;
        }
        Ok(())
    }
}

/// Builds `Γ_I` for `word`.
pub fn gamma_polynomial(word: &Word) -> Result<GammaPolynomial> {
    if word.len() > MAX_WORD_LEN {
        return Err(Error::Resource(format!(
            "word length {} exceeds {MAX_WORD_LEN}",
            word.len()
        )));
    }
    let mut poly = GammaPolynomial::identity();
    for &letter in word.letters() {
        poly = poly.differentiate();
        if letter == 0 {
            poly = poly.times_b();
        }
    }
    Ok(poly)
}

/// Derivatives of `e` at `x` up to `order`.
pub(crate) fn derivatives(e: &Expr, x: f64, order: usize) -> Result<Vec<f64>> {
    Ok(jet_eval(e, x, order)?.derivatives())
}

/// `Γ_I(f, b)(x)`.
pub fn gamma_value(word: &Word, f: &Expr, b: &Expr, x: f64) -> Result<f64> {
    let poly = gamma_polynomial(word)?;
    eval_polynomial(&poly, f, b, x)
}

pub(crate) fn eval_polynomial(poly: &GammaPolynomial, f: &Expr, b: &Expr, x: f64) -> Result<f64> {
    let f_derivs = derivatives(f, x, poly.max_f_order() as usize)?;
    let b_derivs = match poly.max_b_order() {
        Some(k) => derivatives(b, x, k as usize)?,
        None => Vec::new(),
    };
    Ok(poly.eval(&f_derivs, &b_derivs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn word(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn mono(f: u32, b: &[u32]) -> Monomial {
        Monomial {
            f_order: f,
            b_orders: b.to_vec(),
        }
    }

    #[test]
    fn base_cases() {
        let g1 = gamma_polynomial(&word("1")).unwrap();
        assert_eq!(g1.terms().collect::<Vec<_>>(), vec![(&mono(1, &[]), 1)]);
        let g0 = gamma_polynomial(&word("0")).unwrap();
        assert_eq!(g0.terms().collect::<Vec<_>>(), vec![(&mono(1, &[0]), 1)]);
    }

    #[test]
    fn two_letter_words() {
        let g = gamma_polynomial(&word("01")).unwrap();
        let terms: Vec<_> = g.terms().collect();
        assert_eq!(terms, vec![(&mono(1, &[1]), 1), (&mono(2, &[0]), 1)]);
        assert_eq!(g.to_string(), "b^(1) f^(1) + b^(0) f^(2)");
        let g = gamma_polynomial(&word("11")).unwrap();
        assert_eq!(g.terms().collect::<Vec<_>>(), vec![(&mono(2, &[]), 1)]);
        // "00": b (b f')' = b b' f' + b² f''
        let g = gamma_polynomial(&word("00")).unwrap();
        assert_eq!(
            g.terms().collect::<Vec<_>>(),
            vec![(&mono(1, &[0, 1]), 1), (&mono(2, &[0, 0]), 1)]
        );
    }

    #[test]
    fn like_terms_collect() {
        // (b f')'' = b'' f' + 2 b' f'' + b f'''
        let g = gamma_polynomial(&word("011")).unwrap();
        let terms: Vec<_> = g.terms().collect();
        assert_eq!(
            terms,
            vec![(&mono(1, &[2]), 1), (&mono(2, &[1]), 2), (&mono(3, &[0]), 1)]
        );
    }

    #[test]
    fn value_examples() {
        let any_b = parse("cos(x)").unwrap();
        let v = gamma_value(&word("11"), &parse("x^2").unwrap(), &any_b, 1.0).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let v = gamma_value(&word("0"), &Expr::Var, &Expr::Const(3.0), 0.7).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
        let v = gamma_value(&word("01"), &parse("sin(x)").unwrap(), &Expr::Var, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn length_guard() {
        let w = Word::new(vec![1; 13]).unwrap();
        assert!(matches!(gamma_polynomial(&w), Err(Error::Resource(_))));
    }
}
