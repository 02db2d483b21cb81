//! Matrix elements of the Koopman generator `L_F f = F · ∇f` in the monomial
//! basis of the unit-polydisc Hardy space.
//!
//! All functions here read the coefficient table as given; callers working on
//! `D^n(μ)` rescale to the unit polydisc first.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::multiindex::{shifted_index, MonomialIndexMap, MultiIndex};
use crate::poly::Polynomial;
use crate::vectorfield::TaylorVectorField;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `⟨L_F e_k, e_j⟩` for two basis multi-indices.
///
/// Zero when `|α(j)| < |α(k)|`; otherwise `Σ_l α_l(k) a_{l,(α(j)−α(k))_l}`.
pub fn generator_entry_alpha(
    f: &TaylorVectorField,
    alpha_k: &MultiIndex,
    alpha_j: &MultiIndex,
) -> Complex64 {
    if alpha_j.degree() < alpha_k.degree() {
        return ZERO;
    }
    let mut acc = ZERO;
    for l in 0..f.dim() {
        let weight = alpha_k.get(l);
        if weight == 0 {
            continue;
        }
        if let Some(beta) = shifted_index(alpha_j, alpha_k, l).expect("same dimension") {
            acc += f.coeff(l, &beta) * f64::from(weight);
        }
    }
    acc
}

/// `⟨L_F e_k, e_j⟩` for basis indices `k, j >= 1`.
pub fn generator_entry(
    f: &TaylorVectorField,
    map: &MonomialIndexMap,
    k: usize,
    j: usize,
) -> Complex64 {
    generator_entry_alpha(f, &map.index_to_alpha(k), &map.index_to_alpha(j))
}

/// Diagonal element `⟨L_F e_k, e_k⟩ = Σ_l α_l(k) a_{l,l}`.
pub fn diagonal_entry(f: &TaylorVectorField, alpha: &MultiIndex) -> Complex64 {
    (0..f.dim())
        .filter(|&l| alpha.get(l) > 0)
        .map(|l| f.diagonal(l) * f64::from(alpha.get(l)))
        .sum()
}

/// Sparse image `L_F e_k = Σ_j ⟨L_F e_k, e_j⟩ e_j` over the stored
/// coefficients, exact zeros removed.
pub fn apply_to_monomial(
    f: &TaylorVectorField,
    alpha_k: &MultiIndex,
) -> BTreeMap<MultiIndex, Complex64> {
    let mut out = BTreeMap::new();
    for l in 0..f.dim() {
        let weight = alpha_k.get(l);
        if weight == 0 {
            continue;
        }
        let mut base = alpha_k.exponents().to_vec();
        base[l] -= 1;
        let base = MultiIndex::new(base);
        for (beta, a) in f.component(l) {
            let target = base.checked_add(beta).expect("same dimension");
            *out.entry(target).or_insert(ZERO) += a * f64::from(weight);
        }
    }
    out.retain(|_, v| *v != ZERO);
    out
}

/// One nonzero matrix element, serialised as `[j, k, re, im]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorEntry {
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

impl Serialize for GeneratorEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.row, self.col, self.value.re, self.value.im).serialize(s)
    }
}

/// Finite section of the generator over all indices of degree `<= max_degree`.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorWindow {
    pub max_degree: u32,
    /// Row-major by `(row, col)`, exact zeros omitted.
    pub entries: Vec<GeneratorEntry>,
}

impl GeneratorWindow {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .binary_search_by(|e| (e.row, e.col).cmp(&(row, col)))
            .map(|i| self.entries[i].value)
            .unwrap_or(ZERO)
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = &GeneratorEntry> {
        self.entries.iter().filter(|e| e.row != e.col)
    }
}

pub fn generator_window(
    f: &TaylorVectorField,
    map: &MonomialIndexMap,
    max_degree: u32,
) -> GeneratorWindow {
    assert!(max_degree >= 1);
    let alphas = map.alphas_up_to_degree(max_degree);
    let mut entries = Vec::new();
    for (col, alpha_k) in alphas.iter().enumerate().skip(1) {
        for (target, value) in apply_to_monomial(f, alpha_k) {
            if target.degree() <= max_degree {
                let row = map.alpha_to_index(&target).expect("same dimension");
                entries.push(GeneratorEntry { row, col, value });
            }
        }
    }
    entries.sort_by_key(|e| (e.row, e.col));
    GeneratorWindow {
        max_degree,
        entries,
    }
}

/// Reference value of `⟨L_F e_k, e_j⟩` by expanding `F · ∇(z^{α(k)})` as a
/// polynomial and reading off the coefficient of `z^{α(j)}`.
pub fn generator_entry_oracle(
    f: &TaylorVectorField,
    map: &MonomialIndexMap,
    k: usize,
    j: usize,
) -> Result<Complex64> {
    if !f.is_polynomial() {
        return Err(Error::NotPolynomial);
    }
    let n = f.dim();
    let observable = Polynomial::monomial(map.index_to_alpha(k), Complex64::new(1.0, 0.0));
    let components = f.to_polynomials();
    let mut image = Polynomial::zero(n);
    for (l, fl) in components.iter().enumerate() {
        image = &image + &(fl * &observable.derivative(l));
    }
    Ok(image.coeff(&map.index_to_alpha(j)))
}
