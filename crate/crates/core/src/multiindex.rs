//! Multi-indices and the graded monomial enumeration used for the Hardy-space basis.
//!
//! The basis monomials `e_k(z) = z^{α(k)}` are numbered by a graded order:
//! lower total degree first, and inside a degree block `α` precedes `β` when
//! `α_j > β_j` at the first position where they differ. Index 0 is the
//! constant monomial and indices `1..=n` are `z_1, …, z_n`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        assert!(
            !exponents.is_empty(),
            "multi-index must have dimension >= 1"
        );
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit multi-index `e_l` for a 0-based component `l`.
    pub fn unit(n: usize, l: usize) -> Self {
        let mut e = vec![0; n];
        e[l] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, l: usize) -> u32 {
        self.0[l]
    }

    /// True when this is `e_l` for some `l`; returns that `l`.
    pub fn as_unit(&self) -> Option<usize> {
        if self.degree() != 1 {
            return None;
        }
        self.0.iter().position(|&a| a == 1)
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        check_dims(self.dim(), other.dim())?;
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Componentwise `self - other`, `None` if any entry would be negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.dim() != other.dim() {
            return None;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `z^α` evaluated at a complex point.
    pub fn eval(&self, z: &[num_complex::Complex64]) -> num_complex::Complex64 {
        self.0
            .iter()
            .zip(z)
            .fold(num_complex::Complex64::new(1.0, 0.0), |acc, (&e, zi)| {
                acc * zi.powu(e)
            })
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex::new(v)
    }
}

impl Ord for MultiIndex {
    /// Graded order of the monomial basis (smaller = earlier in the enumeration).
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| {
                for (a, b) in self.0.iter().zip(&other.0) {
                    if a != b {
                        // larger leading exponent comes first
                        return b.cmp(a);
                    }
                }
                Ordering::Equal
            })
            .then_with(|| self.0.len().cmp(&other.0.len()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `(α(j) − α(k))_l`: the exponent of the Taylor coefficient `a_{l,·}` that
/// couples `e_k` to `e_j` through component `l` (0-based). `Ok(None)` when
/// some entry would be negative, in which case the coefficient counts as zero.
pub fn shifted_index(
    alpha_j: &MultiIndex,
    alpha_k: &MultiIndex,
    l: usize,
) -> Result<Option<MultiIndex>> {
    check_dims(alpha_j.dim(), alpha_k.dim())?;
    if l >= alpha_j.dim() {
        return Err(Error::ComponentOutOfRange {
            component: l + 1,
            n: alpha_j.dim(),
        });
    }
    let mut out = Vec::with_capacity(alpha_j.dim());
    for (i, (&aj, &ak)) in alpha_j.0.iter().zip(&alpha_k.0).enumerate() {
        let v = i64::from(aj) - i64::from(ak) + i64::from(i == l);
        if v < 0 {
            return Ok(None);
        }
        out.push(v as u32);
    }
    Ok(Some(MultiIndex(out)))
}

/// Number of monomials of total degree `m` in `n` variables, `C(m+n-1, n-1)`.
pub fn block_size(n: usize, m: u32) -> u64 {
    binomial(u64::from(m) + n as u64 - 1, n as u64 - 1)
}

/// Number of monomials of total degree `<= m`, `C(m+n, n)`.
pub fn count_up_to_degree(n: usize, m: u32) -> usize {
    binomial(u64::from(m) + n as u64, n as u64) as usize
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1)) as u64
}

/// All multi-indices of total degree `m` in enumeration order.
pub fn degree_block(n: usize, m: u32) -> Vec<MultiIndex> {
    fn fill(rest: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        let n = cur.len();
        if pos + 1 == n {
            cur[pos] = rest;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for a in (0..=rest).rev() {
            cur[pos] = a;
            fill(rest - a, pos + 1, cur, out);
        }
    }
    let mut out = Vec::with_capacity(block_size(n, m) as usize);
    let mut cur = vec![0; n];
    fill(m, 0, &mut cur, &mut out);
    out
}

#[derive(Default)]
struct Cache {
    alphas: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// Degree of the last complete block, `None` before anything is built.
    max_degree: Option<u32>,
}

/// Bijection between `ℕ` and `ℕⁿ` following the graded order, extended lazily
/// one degree block at a time. Lookups take a shared lock; extension takes the
/// write lock.
pub struct MonomialIndexMap {
    n: usize,
    cache: RwLock<Cache>,
}

impl fmt::Debug for MonomialIndexMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonomialIndexMap")
            .field("n", &self.n)
            .field("built_degree", &self.cache.read().unwrap().max_degree)
            .finish()
    }
}

impl Clone for MonomialIndexMap {
    fn clone(&self) -> Self {
        let cache = self.cache.read().unwrap();
        MonomialIndexMap {
            n: self.n,
            cache: RwLock::new(Cache {
                alphas: cache.alphas.clone(),
                lookup: cache.lookup.clone(),
                max_degree: cache.max_degree,
            }),
        }
    }
}

impl MonomialIndexMap {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        MonomialIndexMap {
            n,
            cache: RwLock::new(Cache::default()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Make sure every block up to total degree `m` is enumerated.
    pub fn ensure_degree(&self, m: u32) {
        if self
            .cache
            .read()
            .unwrap()
            .max_degree
            .is_some_and(|d| d >= m)
        {
            return;
        }
        let mut cache = self.cache.write().unwrap();
        let start = cache.max_degree.map_or(0, |d| d + 1);
        for deg in start..=m {
            for alpha in degree_block(self.n, deg) {
                let idx = cache.alphas.len();
                cache.lookup.insert(alpha.clone(), idx);
                cache.alphas.push(alpha);
            }
            cache.max_degree = Some(deg);
        }
    }

    fn ensure_index(&self, k: usize) {
        let mut m = 0;
        while count_up_to_degree(self.n, m) <= k {
            m += 1;
        }
        self.ensure_degree(m);
    }

    pub fn index_to_alpha(&self, k: usize) -> MultiIndex {
        self.ensure_index(k);
        self.cache.read().unwrap().alphas[k].clone()
    }

    pub fn alpha_to_index(&self, alpha: &MultiIndex) -> Result<usize> {
        check_dims(self.n, alpha.dim())?;
        self.ensure_degree(alpha.degree());
        Ok(self.cache.read().unwrap().lookup[alpha])
    }

    /// Multi-indices with index `0..count_up_to_degree(n, m)`, in order.
    pub fn alphas_up_to_degree(&self, m: u32) -> Vec<MultiIndex> {
        self.ensure_degree(m);
        let count = count_up_to_degree(self.n, m);
        self.cache.read().unwrap().alphas[..count].to_vec()
    }
}
