//! Lyapunov functions `V(z) = Σ_k ε_k |w^{α(k)}|²`, `w = z/s`, assembled from
//! the generator's matrix elements on the rescaled unit polydisc.
//!
//! The construction follows the ordered recursion on the basis index: pick
//! coupling weights `b_{jk}`, form `Q_{jk}`, then grow `ε_j` so that it
//! strictly exceeds every `ε_k Q_{jk}` with `k < j`. The radius of the series
//! `Σ |α(k)| ε_k ρ^{2|α(k)|}` bounds the rescaled region where `V` is valid.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certify::{polynomial_quantities, Branch, PolynomialCriterion};
use crate::error::{Error, Result};
use crate::koopman::{apply_to_monomial, diagonal_entry};
use crate::multiindex::{MonomialIndexMap, MultiIndex};
use crate::series::block_tail;
use crate::vectorfield::TaylorVectorField;

pub const DEFAULT_SLACK: f64 = 0.99;
pub const DEFAULT_SLACK_DELTA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SchemeKind {
    /// Uniform weights `ξ/(2K)` on every coupled pair, `1 − ξ` on the diagonal.
    Uniform,
    /// Weights proportional to the coupling, normalised by the row or column
    /// absolute sum, `1 − κ` on the diagonal.
    Proportional,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightScheme {
    pub kind: SchemeKind,
    /// `ξ` for [`SchemeKind::Uniform`], `κ` for [`SchemeKind::Proportional`].
    pub slack: f64,
    custom: BTreeMap<(usize, usize), f64>,
}

impl WeightScheme {
    pub fn uniform(xi: f64) -> Result<Self> {
        Self::with_slack(SchemeKind::Uniform, xi)
    }

    pub fn proportional(kappa: f64) -> Result<Self> {
        Self::with_slack(SchemeKind::Proportional, kappa)
    }

    fn with_slack(kind: SchemeKind, slack: f64) -> Result<Self> {
        if !(slack > 0.0 && slack < 1.0) {
            return Err(Error::InvalidScheme(format!(
                "slack must lie in ]0,1[, got {slack}"
            )));
        }
        Ok(WeightScheme {
            kind,
            slack,
            custom: BTreeMap::new(),
        })
    }

    /// User-supplied `b_{jk}`; unlisted pairs are zero.
    pub fn custom(table: impl IntoIterator<Item = ((usize, usize), f64)>) -> Result<Self> {
        let custom: BTreeMap<_, _> = table.into_iter().collect();
        if custom.values().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidScheme(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(WeightScheme {
            kind: SchemeKind::Custom,
            slack: f64::NAN,
            custom,
        })
    }

    pub fn weight(&self, table: &CouplingTable, j: usize, k: usize) -> f64 {
        match self.kind {
            SchemeKind::Uniform => {
                if j == k {
                    1.0 - self.slack
                } else if table.coupled(j, k) {
                    self.slack / (2.0 * table.coupling_terms as f64)
                } else {
                    0.0
                }
            }
            SchemeKind::Proportional => {
                if j == k {
                    return 1.0 - self.slack;
                }
                let (dj, dk) = (table.alphas[j].degree(), table.alphas[k].degree());
                if dj == dk {
                    0.0
                } else if dk < dj {
                    0.5 * self.slack * table.entry(j, k).norm() / table.row_abs_sum[j]
                } else {
                    0.5 * self.slack * table.entry(k, j).norm() / table.col_abs_sum[j]
                }
            }
            SchemeKind::Custom => self.custom.get(&(j, k)).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_k b_{jk}` over the window.
    pub fn row_sum(&self, table: &CouplingTable, j: usize) -> f64 {
        (1..table.alphas.len())
            .map(|k| self.weight(table, j, k))
            .sum()
    }

    fn validate(&self, table: &CouplingTable) -> Result<()> {
        if self.kind == SchemeKind::Uniform && table.coupling_terms == 0 && table.has_couplings() {
            return Err(Error::InvalidScheme(
                "uniform weights need finitely many terms".into(),
            ));
        }
        if self.kind == SchemeKind::Custom {
            for j in 1..table.alphas.len() {
                let s = self.row_sum(table, j);
                if s > 1.0 + 1e-12 {
                    return Err(Error::InvalidScheme(format!("row {j} sums to {s} > 1")));
                }
            }
        }
        Ok(())
    }
}

/// Generator matrix elements of a unit-polydisc field over a degree window,
/// plus the absolute row and column sums used by the weight schemes.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    pub max_degree: u32,
    /// `alphas[k] = α(k)`, `k = 0..count`.
    pub alphas: Vec<MultiIndex>,
    /// `⟨L e_k, e_k⟩`.
    pub diagonal: Vec<Complex64>,
    /// Off-diagonal elements inside the window keyed by `(row j, col k)`.
    off_diagonal: HashMap<(usize, usize), Complex64>,
    /// `rows[j]`: columns `k != j` with a nonzero element in row `j`.
    rows: Vec<Vec<usize>>,
    /// `Σ_l |⟨L e_l, e_j⟩|` (finite: only lower degrees feed row `j`).
    pub row_abs_sum: Vec<f64>,
    /// Upper bound on `Σ_l |⟨L e_j, e_l⟩|` over all `l`, window or not.
    pub col_abs_sum: Vec<f64>,
    /// Number of non-self coefficients, or 0 for fields with a tail.
    pub coupling_terms: usize,
}

impl CouplingTable {
    /// `f` must already live on the unit polydisc. For analytic fields the
    /// window may not exceed the stored truncation degree.
    pub fn build(f: &TaylorVectorField, max_degree: u32) -> Result<Self> {
        if max_degree == 0 {
            return Err(Error::Problem("truncation degree must be >= 1".into()));
        }
        if !f.is_polynomial() && max_degree > f.truncation_degree() {
            return Err(Error::Problem(format!(
                "window degree {max_degree} exceeds the stored truncation degree {}",
                f.truncation_degree()
            )));
        }
        let n = f.dim();
        let map = MonomialIndexMap::new(n);
        let alphas = map.alphas_up_to_degree(max_degree);
        let count = alphas.len();
        // Σ_{|β|>N} |a_{p,β}| on the unit polydisc, per component
        let tails: Vec<f64> = (0..n)
            .map(|l| {
                let env = f.tail_of(l);
                env.weighted_tail(n, f.truncation_degree(), 1.0)
                    .ok_or(Error::DivergentTail {
                        component: l + 1,
                        ratio: env.r,
                    })
            })
            .collect::<Result<_>>()?;

        let mut diagonal = vec![Complex64::new(0.0, 0.0); count];
        let mut off_diagonal = HashMap::new();
        let mut rows = vec![Vec::new(); count];
        let mut row_abs_sum = vec![0.0; count];
        let mut col_abs_sum = vec![0.0; count];
        for k in 1..count {
            let image = apply_to_monomial(f, &alphas[k]);
            let mut col = 0.0;
            for (target, value) in image {
                col += value.norm();
                if target.degree() > max_degree {
                    continue;
                }
                let j = map.alpha_to_index(&target)?;
                row_abs_sum[j] += value.norm();
                if j == k {
                    diagonal[k] = value;
                } else {
                    off_diagonal.insert((j, k), value);
                    rows[j].push(k);
                }
            }
            let tail: f64 = (0..n).map(|l| f64::from(alphas[k].get(l)) * tails[l]).sum();
            col_abs_sum[k] = col + tail;
            debug_assert_eq!(diagonal[k], diagonal_entry(f, &alphas[k]));
        }
        for r in &mut rows {
            r.sort_unstable();
        }
        let coupling_terms = if f.has_tail() {
            0
        } else {
            f.terms()
                .filter(|(l, a, _)| a.as_unit() != Some(*l))
                .count()
        };
        Ok(CouplingTable {
            max_degree,
            alphas,
            diagonal,
            off_diagonal,
            rows,
            row_abs_sum,
            col_abs_sum,
            coupling_terms,
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.len() <= 1
    }

    /// `⟨L e_k, e_j⟩` inside the window.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        if j == k {
            return self.diagonal[j];
        }
        self.off_diagonal
            .get(&(j, k))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn coupled(&self, j: usize, k: usize) -> bool {
        self.off_diagonal.contains_key(&(j, k)) || self.off_diagonal.contains_key(&(k, j))
    }

    fn has_couplings(&self) -> bool {
        !self.off_diagonal.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QEntry {
    pub j: usize,
    pub k: usize,
    pub q: f64,
}

/// Nonzero `Q_{jk}` for `k < j`, ordered by `(j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QTable {
    pub len: usize,
    pub entries: Vec<QEntry>,
}

impl QTable {
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.q).fold(0.0, f64::max)
    }

    pub fn row(&self, j: usize) -> &[QEntry] {
        let start = self.entries.partition_point(|e| e.j < j);
        let end = self.entries.partition_point(|e| e.j <= j);
        &self.entries[start..end]
    }
}

/// `Q_{jk} = |⟨L e_k, e_j⟩|² / (4 |Re⟨L e_j, e_j⟩| |Re⟨L e_k, e_k⟩| b_{jk} b_{kj})`
/// over the window of `table`.
pub fn q_sequence(table: &CouplingTable, scheme: &WeightScheme) -> Result<QTable> {
    scheme.validate(table)?;
    let mut entries = Vec::new();
    for j in 2..table.len() {
        for &k in &table.rows[j] {
            if k >= j {
                // same-degree couplings only appear for non-diagonal Jacobians
                return Err(Error::JacobianNotDiagonal(format!(
                    "coupling from index {k} to {j} inside a degree block"
                )));
            }
            let g = table.entry(j, k).norm();
            let dj = table.diagonal[j].re.abs();
            let dk = table.diagonal[k].re.abs();
            let b = scheme.weight(table, j, k) * scheme.weight(table, k, j);
            if dj == 0.0 || dk == 0.0 {
                return Err(Error::InvalidField(
                    "diagonal generator entry with zero real part".into(),
                ));
            }
            if b <= 0.0 {
                return Err(Error::InvalidScheme(format!(
                    "b_jk·b_kj must be positive for the coupled pair ({j}, {k})"
                )));
            }
            entries.push(QEntry {
                j,
                k,
                q: g * g / (4.0 * dj * dk * b),
            });
        }
    }
    Ok(QTable {
        len: table.len(),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonSequence {
    /// `values[k] = ε_k` for `k >= 1`; `values[0]` is unused and zero.
    pub values: Vec<f64>,
    /// Total degree of each index, for the per-degree growth fit.
    pub degrees: Vec<u32>,
    pub slack_delta: f64,
    /// Largest `Q_{jk}` that drove the recursion.
    pub growth_constant: f64,
}

/// `ε_j = max(1, (1+δ) max_{k<j} ε_k Q_{jk})` in enumeration order.
pub fn epsilon_sequence(q: &QTable, degrees: &[u32], slack_delta: f64) -> Result<EpsilonSequence> {
    if !(slack_delta > 0.0 && slack_delta.is_finite()) {
        return Err(Error::Problem(format!(
            "slack delta must be positive, got {slack_delta}"
        )));
    }
    let mut values = vec![0.0; q.len];
    for j in 1..q.len {
        let driving = q
            .row(j)
            .iter()
            .map(|e| values[e.k] * e.q)
            .fold(0.0, f64::max);
        values[j] = if driving == 0.0 {
            1.0
        } else {
            f64::max(1.0, (1.0 + slack_delta) * driving)
        };
    }
    Ok(EpsilonSequence {
        values,
        degrees: degrees.to_vec(),
        slack_delta,
        growth_constant: q.max(),
    })
}

impl EpsilonSequence {
    /// Checks `ε_j > ε_k Q_{jk}` for every stored pair.
    pub fn satisfies_recursion(&self, q: &QTable) -> bool {
        q.entries
            .iter()
            .all(|e| self.values[e.j] > self.values[e.k] * e.q)
            && self.values.iter().skip(1).all(|&v| v > 0.0)
    }

    /// Largest `ε` in each degree block `1..=max_degree` (index 0 ↔ degree 1).
    pub fn block_maxima(&self) -> Vec<f64> {
        let top = self.degrees.iter().copied().max().unwrap_or(0);
        let mut out = vec![0.0f64; top as usize];
        for (k, &d) in self.degrees.iter().enumerate().skip(1) {
            let slot = &mut out[d as usize - 1];
            *slot = slot.max(self.values[k]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceEstimate {
    /// Estimated radius of `Σ |α(k)| ε_k ρ^{2|α(k)|}` (at most 1).
    pub radius: f64,
    /// Fitted per-degree growth `Q̂` of `max ε` (radius `= 1/√Q̂`).
    pub fitted_ratio: f64,
    /// Whether the block ratios settled within 10% over the last blocks.
    pub geometric: bool,
}

/// Root-test style estimate from the per-degree maxima: uses the largest
/// ratio `M_{m+1}/M_m` over the last five blocks (conservative when the
/// ratios have not settled).
pub fn convergence_radius(eps: &EpsilonSequence) -> ConvergenceEstimate {
    let maxima = eps.block_maxima();
    let ratios: Vec<f64> = maxima.windows(2).map(|w| w[1] / w[0]).collect();
    let recent = &ratios[ratios.len().saturating_sub(5)..];
    let (lo, hi) = recent.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| {
        (lo.min(r), hi.max(r))
    });
    let fitted_ratio = if recent.is_empty() {
        maxima.first().copied().unwrap_or(1.0).max(1.0)
    } else {
        hi.max(1.0)
    };
    let geometric = recent.is_empty() || hi <= 1.1 * lo;
    ConvergenceEstimate {
        radius: 1.0 / fitted_ratio.sqrt(),
        fitted_ratio,
        geometric,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovFunction {
    pub n: usize,
    /// Rescaling radius `s`: `V(z) = Σ ε_k |(z/s)^{α(k)}|²`.
    pub scale: f64,
    pub rho: f64,
    pub truncation_degree: u32,
    pub scheme: SchemeKind,
    pub slack: f64,
    #[serde(skip)]
    pub alphas: Vec<MultiIndex>,
    pub epsilon: EpsilonSequence,
    pub convergence: ConvergenceEstimate,
    /// Truncated `Σ |α(k)| ε_k (ρ/s)^{2|α(k)|}`.
    pub series_at_rho: f64,
    /// Estimated remainder of that series beyond the truncation degree.
    pub tail_bound: f64,
}

/// Picks the rescaling radius for the scheme: the uniform scheme keeps
/// every `Q_{jk}` below one on the branch `KS/R < 1`, and works on the given
/// coordinates otherwise; the other schemes rescale by the domain radius.
fn choose_scale(f: &TaylorVectorField, rho: f64, scheme: &WeightScheme) -> Result<f64> {
    match scheme.kind {
        SchemeKind::Uniform => {
            let q = polynomial_quantities(f)?;
            if q.k == 0 {
                return Ok(f.mu());
            }
            let ratio = q.k as f64 * q.s / q.r;
            if ratio >= 1.0 {
                Ok(1.0)
            } else {
                let upper = (scheme.slack / ratio).powf(1.0 / f64::from(q.d - 1));
                if rho >= upper {
                    return Err(Error::InconsistentCertificate(format!(
                        "ρ = {rho} is not below the slack-adjusted bound {upper}"
                    )));
                }
                Ok((rho * upper).sqrt())
            }
        }
        SchemeKind::Proportional | SchemeKind::Custom => Ok(f.mu()),
    }
}

/// Scheme matching a polynomial criterion branch.
pub fn scheme_for(criterion: Option<&PolynomialCriterion>, slack: f64) -> Result<WeightScheme> {
    match criterion.map(|c| c.branch) {
        Some(Branch::Linear | Branch::RatioBelowOne | Branch::RatioAtLeastOne) => {
            WeightScheme::uniform(slack)
        }
        None => WeightScheme::proportional(slack),
    }
}

pub fn build_lyapunov(
    f: &TaylorVectorField,
    rho: f64,
    scheme: &WeightScheme,
    truncation_degree: u32,
    slack_delta: f64,
) -> Result<LyapunovFunction> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Problem(format!(
            "radius must be positive, got {rho}"
        )));
    }
    if !f.check_assumptions().jacobian_diagonal {
        return Err(Error::JacobianNotDiagonal(
            "Lyapunov construction needs a diagonal Jacobian".into(),
        ));
    }
    let scale = choose_scale(f, rho, scheme)?;
    let unit = f.rescale(scale)?;
    let table = CouplingTable::build(&unit, truncation_degree)?;
    let q = q_sequence(&table, scheme)?;
    let degrees: Vec<u32> = table.alphas.iter().map(MultiIndex::degree).collect();
    let epsilon = epsilon_sequence(&q, &degrees, slack_delta)?;
    let convergence = convergence_radius(&epsilon);
    let rho_unit = rho / scale;
    if convergence.radius <= rho_unit {
        return Err(Error::InconsistentCertificate(format!(
            "series radius {} does not exceed the rescaled radius {rho_unit}",
            convergence.radius
        )));
    }
    let x = rho_unit * rho_unit;
    let series_at_rho = (1..table.len())
        .map(|k| f64::from(degrees[k]) * epsilon.values[k] * x.powi(degrees[k] as i32))
        .sum();
    let tail_bound = series_tail(
        f.dim(),
        truncation_degree,
        epsilon.block_maxima().last().copied().unwrap_or(1.0),
        convergence.fitted_ratio,
        x,
    );
    Ok(LyapunovFunction {
        n: f.dim(),
        scale,
        rho,
        truncation_degree,
        scheme: scheme.kind,
        slack: scheme.slack,
        alphas: table.alphas,
        epsilon,
        convergence,
        series_at_rho,
        tail_bound,
    })
}

/// `Σ_{m>N} m · C(m+n−1,n−1) · M_N q̂^{m−N} x^m` with `x q̂ < 1`.
fn series_tail(n: usize, top: u32, last_max: f64, ratio: f64, x: f64) -> f64 {
    let growth = ratio * x;
    if growth >= 1.0 {
        return f64::INFINITY;
    }
    // m·C(m+n−1, n−1) = n·C(m+n−1, n) <= n·C(m+n, n), the (n+1)-variable
    // block count
    let lead = n as f64 * last_max * ratio.powi(-(top as i32));
    lead * block_tail(n + 1, top, growth).unwrap_or(f64::INFINITY)
}

impl LyapunovFunction {
    /// Per-component powers `|z_l/s|^{2e}` up to the truncation degree.
    fn abs_powers(&self, z: &[Complex64]) -> Vec<Vec<f64>> {
        let top = self.truncation_degree as usize;
        z.iter()
            .map(|zi| {
                let a = (zi / self.scale).norm_sqr();
                let mut p = Vec::with_capacity(top + 1);
                let mut v = 1.0;
                for _ in 0..=top {
                    p.push(v);
                    v *= a;
                }
                p
            })
            .collect()
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        let pw = self.abs_powers(z);
        self.alphas
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, alpha)| {
                let m: f64 = alpha
                    .exponents()
                    .iter()
                    .enumerate()
                    .map(|(l, &e)| pw[l][e as usize])
                    .product();
                self.epsilon.values[k] * m
            })
            .sum()
    }

    /// `d/dt V(φ^t(z))` at `t = 0`:
    /// `2 Σ_k ε_k Σ_l α_l(k) |w^{α(k)−e_l}|² Re(w̄_l ẇ_l)` with `w = z/s`, `ẇ = F(z)/s`.
    pub fn derivative(&self, f: &TaylorVectorField, z: &[Complex64]) -> f64 {
        let fz = f.eval_unchecked(z);
        let radial: Vec<f64> = z
            .iter()
            .zip(&fz)
            .map(|(zi, fi)| ((zi / self.scale).conj() * (fi / self.scale)).re)
            .collect();
        let pw = self.abs_powers(z);
        let mut acc = 0.0;
        for (k, alpha) in self.alphas.iter().enumerate().skip(1) {
            let e = alpha.exponents();
            let mut inner = 0.0;
            for l in 0..self.n {
                if e[l] == 0 {
                    continue;
                }
                let mut m = 1.0;
                for (i, &ei) in e.iter().enumerate() {
                    let p = if i == l { ei - 1 } else { ei };
                    m *= pw[i][p as usize];
                }
                inner += f64::from(e[l]) * m * radial[l];
            }
            acc += self.epsilon.values[k] * inner;
        }
        2.0 * acc
    }

    /// The degree-1 block of `V̇` is `2 Σ_l ε_l Re(a_{l,l}) |w_l|²`; it is
    /// negative definite iff every `Re(a_{l,l}) < 0`.
    pub fn linear_block_negative(&self, f: &TaylorVectorField) -> bool {
        (0..self.n).all(|l| self.epsilon.values[l + 1] > 0.0 && f.diagonal(l).re < 0.0)
    }

    /// `(index, α, ε)` triples.
    pub fn table(&self) -> Vec<(usize, MultiIndex, f64)> {
        self.alphas
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| (k, a.clone(), self.epsilon.values[k]))
            .collect()
    }
}
