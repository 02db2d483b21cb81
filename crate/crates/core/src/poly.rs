//! Sparse multivariate polynomials with complex coefficients.
//!
//! Terms are kept in a `BTreeMap` keyed by [`MultiIndex`], so iteration runs in
//! the basis enumeration order. Used for coordinate changes, observables and
//! the symbolic expansion of `F · ∇f`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::multiindex::MultiIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    pub fn monomial(alpha: MultiIndex, c: Complex64) -> Self {
        let mut p = Self::zero(alpha.dim());
        p.add_term(alpha, c);
        p
    }

    /// The coordinate function `z_l` (0-based `l`).
    pub fn variable(n: usize, l: usize) -> Self {
        Self::monomial(MultiIndex::unit(n, l), Complex64::new(1.0, 0.0))
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Self {
        let mut p = Self::zero(n);
        for (a, c) in terms {
            p.add_term(a, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: Complex64) {
        assert_eq!(alpha.dim(), self.n, "term dimension mismatch");
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(alpha).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
    }

    /// Drops exact zeros left by cancellation.
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }

    /// Drops terms with modulus at most `tol`.
    pub fn prune_below(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Complex64 {
        self.terms
            .get(alpha)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Polynomial::from_terms(self.n, self.terms.iter().map(|(a, v)| (a.clone(), v * c)))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Polynomial::constant(self.n, Complex64::new(1.0, 0.0));
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative in the 0-based variable `l`.
    pub fn derivative(&self, l: usize) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (alpha, c) in &self.terms {
            let e = alpha.get(l);
            if e == 0 {
                continue;
            }
            let mut exps = alpha.exponents().to_vec();
            exps[l] -= 1;
            out.add_term(MultiIndex::new(exps), c * f64::from(e));
        }
        out
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|(a, c)| c * a.eval(z)).sum()
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (a, c) in &rhs.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n, rhs.n, "polynomial dimension mismatch");
        let mut out = Polynomial::zero(self.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(a.checked_add(b).expect("same dimension"), ca * cb);
            }
        }
        out
    }
}
