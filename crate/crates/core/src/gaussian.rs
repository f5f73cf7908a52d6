//! Mixed moments of centered Gaussian vectors (Wick/Isserlis).
//!
//! [`wick_moment`] evaluates a single moment numerically. [`WickPolynomial`]
//! compiles the moment of a fixed power index into a polynomial in the
//! covariance entries, which is what the coefficient quadrature evaluates at
//! every node.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest total degree accepted by the moment routines.
pub const MAX_DEGREE: u32 = 24;

/// Symmetric covariance matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "covariance data has {} entries, expected {}",
                data.len(),
                dim * dim
            )));
        }
        for i in 0..dim {
            if data[i * dim + i] < 0.0 {
                return Err(Error::domain(format!("negative variance at index {i}")));
            }
            for j in 0..i {
                let a = data[i * dim + j];
                let b = data[j * dim + i];
                let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CovMatrix { dim, data })
    }

    /// Builds from the closure `entry(i, j)` evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = entry(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        CovMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CovMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }
}

/// Exponents `p_i` of a monomial `∏ Z_i^{p_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PowerIndex(pub Vec<u32>);

impl PowerIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

fn check_degree(idx: &PowerIndex) -> Result<()> {
    let degree = idx.degree();
    if degree > MAX_DEGREE {
        return Err(Error::Resource(format!(
            "moment of total degree {degree} exceeds the guard {MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// `E[∏ Z_i^{p_i}]` for a centered Gaussian vector with covariance `cov`.
pub fn wick_moment(cov: &CovMatrix, idx: &PowerIndex) -> Result<f64> {
    if idx.0.len() != cov.dim() {
        return Err(Error::invalid(format!(
            "power index has {} entries, covariance dimension is {}",
            idx.0.len(),
            cov.dim()
        )));
    }
    check_degree(idx)?;
    if idx.degree() % 2 == 1 {
        return Ok(0.0);
    }
    let powers: Vec<u8> = idx.0.iter().map(|&p| p as u8).collect();
    let mut memo = HashMap::new();
    Ok(moment_rec(cov, powers, &mut memo))
}

fn moment_rec(cov: &CovMatrix, mut p: Vec<u8>, memo: &mut HashMap<Vec<u8>, f64>) -> f64 {
    let Some(a) = p.iter().position(|&x| x > 0) else {
        return 1.0;
    };
    if let Some(&v) = memo.get(&p) {
        return v;
    }
    let key = p.clone();
    // E[Z_a M] = Σ_b Cov(a, b) E[∂M/∂Z_b]
    p[a] -= 1;
    let mut total = 0.0;
    for b in 0..p.len() {
        if p[b] == 0 {
            continue;
        }
        let c = cov.get(a, b);
        if c == 0.0 {
            continue;
        }
        let mult = p[b] as f64;
        p[b] -= 1;
        total += c * mult * moment_rec(cov, p.clone(), memo);
        p[b] += 1;
    }
    memo.insert(key, total);
    total
}

/// The moment of a fixed power index as a polynomial in the covariance
/// entries `c_{ij}` (`i ≤ j`).
#[derive(Debug, Clone, PartialEq)]
pub struct WickPolynomial {
    dim: usize,
    /// Each term: coefficient and the `(i, j, exponent)` factors.
    terms: Vec<(f64, Vec<Factor>)>,
}

/// `(i, j, exponent)`: the covariance entry `C_ij` raised to `exponent`.
type Factor = (usize, usize, u32);

type Monomial = Vec<u8>;
type Poly = HashMap<Monomial, f64>;

impl WickPolynomial {
    pub fn new(idx: &PowerIndex) -> Result<Self> {
        check_degree(idx)?;
        let dim = idx.0.len();
        let n_pairs = dim * (dim + 1) / 2;
        if idx.degree() % 2 == 1 {
            return Ok(WickPolynomial {
                dim,
                terms: Vec::new(),
            });
        }
        let powers: Vec<u8> = idx.0.iter().map(|&p| p as u8).collect();
        let mut memo = HashMap::new();
        let poly = poly_rec(dim, n_pairs, powers, &mut memo);
        let mut terms: Vec<(f64, Vec<Factor>)> = poly
            .into_iter()
            .map(|(mono, coef)| {
                let mut factors = Vec::new();
                for i in 0..dim {
                    for j in i..dim {
                        let e = mono[pair_slot(dim, i, j)];
                        if e > 0 {
                            factors.push((i, j, e as u32));
                        }
                    }
                }
                (coef, factors)
            })
            .collect();
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(WickPolynomial { dim, terms })
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, cov: &CovMatrix) -> f64 {
        debug_assert_eq!(cov.dim(), self.dim);
        self.terms
            .iter()
            .map(|(coef, factors)| {
                factors
                    .iter()
                    .fold(*coef, |acc, &(i, j, e)| acc * cov.get(i, j).powi(e as i32))
            })
            .sum()
    }
}

fn pair_slot(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

fn poly_rec(dim: usize, n_pairs: usize, mut p: Vec<u8>, memo: &mut HashMap<Vec<u8>, Poly>) -> Poly {
    let Some(a) = p.iter().position(|&x| x > 0) else {
        let mut one = Poly::new();
        one.insert(vec![0; n_pairs], 1.0);
        return one;
    };
    if let Some(v) = memo.get(&p) {
        return v.clone();
    }
    let key = p.clone();
    p[a] -= 1;
    let mut out = Poly::new();
    for b in 0..dim {
        if p[b] == 0 {
            continue;
        }
        let mult = p[b] as f64;
        p[b] -= 1;
        let sub = poly_rec(dim, n_pairs, p.clone(), memo);
        p[b] += 1;
        let slot = pair_slot(dim, a, b);
        for (mono, coef) in sub {
            let mut m = mono;
            m[slot] += 1;
            *out.entry(m).or_insert(0.0) += mult * coef;
        }
    }
    memo.insert(key, out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov2(a: f64, b: f64, c: f64) -> CovMatrix {
        CovMatrix::new(2, vec![a, b, b, c]).unwrap()
    }

    #[test]
    fn scalar_moments() {
        let s2 = 1.7;
        let cov = CovMatrix::new(1, vec![s2]).unwrap();
        assert_eq!(wick_moment(&cov, &PowerIndex(vec![2])).unwrap(), s2);
        let m4 = wick_moment(&cov, &PowerIndex(vec![4])).unwrap();
        assert!((m4 - 3.0 * s2 * s2).abs() < 1e-14);
        let m6 = wick_moment(&cov, &PowerIndex(vec![6])).unwrap();
        assert!((m6 - 15.0 * s2.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn odd_degree_is_exact_zero() {
        let cov = cov2(1.0, 0.3, 2.0);
        assert_eq!(wick_moment(&cov, &PowerIndex(vec![2, 1])).unwrap(), 0.0);
        assert_eq!(wick_moment(&cov, &PowerIndex(vec![0, 3])).unwrap(), 0.0);
        let poly = WickPolynomial::new(&PowerIndex(vec![1, 2])).unwrap();
        assert_eq!(poly.n_terms(), 0);
        assert_eq!(poly.eval(&cov), 0.0);
    }

    #[test]
    fn cross_moment_is_covariance() {
        let cov = cov2(1.0, 0.3, 2.0);
        assert_eq!(wick_moment(&cov, &PowerIndex(vec![1, 1])).unwrap(), 0.3);
    }

    #[test]
    fn degree_guard() {
        let cov = CovMatrix::new(1, vec![1.0]).unwrap();
        let err = wick_moment(&cov, &PowerIndex(vec![26])).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cov = cov2(1.0, 0.0, 1.0);
        assert!(wick_moment(&cov, &PowerIndex(vec![2])).is_err());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(CovMatrix::new(2, vec![1.0, 0.2, 0.3, 1.0]).is_err());
    }

    #[test]
    fn compiled_polynomial_matches_recursion() {
        let cov = CovMatrix::from_fn(3, |i, j| if i == j { 1.0 + i as f64 } else { 0.2 * (i + j) as f64 });
        for p in [vec![2, 2, 0], vec![1, 2, 3], vec![4, 0, 2], vec![3, 3, 2]] {
            let idx = PowerIndex(p);
            let a = wick_moment(&cov, &idx).unwrap();
            let b = WickPolynomial::new(&idx).unwrap().eval(&cov);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{idx:?}: {a} vs {b}");
        }
    }
}
