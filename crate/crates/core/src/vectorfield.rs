//! Vector fields given by Taylor coefficient tables on a polydisc.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::poly::Polynomial;
use crate::series::block_tail;

/// Relative threshold below which coefficients produced by a change of
/// coordinates are treated as cancellation residue.
pub const CANCELLATION_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Polynomial,
    Analytic,
}

/// Geometric envelope `|a_{l,α}| <= c · r^{|α|}` for every `|α|` beyond the
/// stored truncation degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c: f64,
    pub r: f64,
}

impl TailEnvelope {
    pub const NONE: TailEnvelope = TailEnvelope { c: 0.0, r: 0.0 };

    /// Bound on `Σ_{|α|>after} |a_{l,α}| x^{|α|}` in `n` variables.
    pub fn weighted_tail(&self, n: usize, after: u32, x: f64) -> Option<f64> {
        if self.c == 0.0 {
            return Some(0.0);
        }
        block_tail(n, after, self.r * x).map(|t| self.c * t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorVectorField {
    n: usize,
    mu: f64,
    kind: FieldKind,
    truncation_degree: u32,
    /// One coefficient table per component, 0-based.
    components: Vec<BTreeMap<MultiIndex, Complex64>>,
    tail: Option<Vec<TailEnvelope>>,
}

impl TaylorVectorField {
    /// Polynomial field `F_l = Σ a_{l,α} z^α` from `(component, α, a)` triples
    /// with 0-based components.
    pub fn polynomial(
        n: usize,
        mu: f64,
        coefficients: impl IntoIterator<Item = (usize, MultiIndex, Complex64)>,
    ) -> Result<Self> {
        let components = collect_components(n, coefficients)?;
        let d = max_degree(&components).unwrap_or(1);
        Self::build(n, mu, FieldKind::Polynomial, d, components, None)
    }

    /// Analytic field given by its Taylor coefficients up to degree
    /// `truncation_degree` plus an optional per-component tail envelope.
    pub fn analytic(
        n: usize,
        mu: f64,
        truncation_degree: u32,
        coefficients: impl IntoIterator<Item = (usize, MultiIndex, Complex64)>,
        tail: Option<Vec<TailEnvelope>>,
    ) -> Result<Self> {
        let components = collect_components(n, coefficients)?;
        Self::build(
            n,
            mu,
            FieldKind::Analytic,
            truncation_degree,
            components,
            tail,
        )
    }

    /// Polynomial field from one [`Polynomial`] per component.
    pub fn from_polynomials(mu: f64, polys: &[Polynomial]) -> Result<Self> {
        let n = polys.len();
        Self::polynomial(
            n,
            mu,
            polys
                .iter()
                .enumerate()
                .flat_map(|(l, p)| p.terms().map(move |(a, c)| (l, a.clone(), *c))),
        )
    }

    fn build(
        n: usize,
        mu: f64,
        kind: FieldKind,
        truncation_degree: u32,
        components: Vec<BTreeMap<MultiIndex, Complex64>>,
        tail: Option<Vec<TailEnvelope>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidField("dimension must be positive".into()));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidField(format!(
                "radius mu must be positive, got {mu}"
            )));
        }
        if truncation_degree == 0 {
            return Err(Error::InvalidField("truncation degree must be >= 1".into()));
        }
        for (l, comp) in components.iter().enumerate() {
            for (alpha, c) in comp {
                if alpha.degree() > truncation_degree {
                    return Err(Error::InvalidField(format!(
                        "coefficient of component {} at {alpha} exceeds truncation degree {truncation_degree}",
                        l + 1
                    )));
                }
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(Error::InvalidField(format!(
                        "non-finite coefficient in component {} at {alpha}",
                        l + 1
                    )));
                }
            }
        }
        let tail = match (kind, tail) {
            (FieldKind::Polynomial, Some(t)) if t.iter().any(|e| e.c != 0.0) => {
                return Err(Error::InvalidField(
                    "polynomial fields cannot carry a tail envelope".into(),
                ))
            }
            (FieldKind::Polynomial, _) => None,
            (FieldKind::Analytic, Some(t)) => {
                if t.len() != n {
                    return Err(Error::InvalidField(format!(
                        "tail envelope has {} entries for dimension {n}",
                        t.len()
                    )));
                }
                if t.iter()
                    .any(|e| !(e.c >= 0.0 && e.r >= 0.0 && e.c.is_finite() && e.r.is_finite()))
                {
                    return Err(Error::InvalidField(
                        "tail envelope needs C >= 0 and r >= 0".into(),
                    ));
                }
                Some(t)
            }
            (FieldKind::Analytic, None) => None,
        };
        Ok(TaylorVectorField {
            n,
            mu,
            kind,
            truncation_degree,
            components,
            tail,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_polynomial(&self) -> bool {
        self.kind == FieldKind::Polynomial
    }

    pub fn truncation_degree(&self) -> u32 {
        self.truncation_degree
    }

    pub fn tail(&self) -> Option<&[TailEnvelope]> {
        self.tail.as_deref()
    }

    /// Envelope for a 0-based component (zero envelope when absent).
    pub fn tail_of(&self, l: usize) -> TailEnvelope {
        self.tail.as_ref().map_or(TailEnvelope::NONE, |t| t[l])
    }

    pub fn has_tail(&self) -> bool {
        self.tail
            .as_ref()
            .is_some_and(|t| t.iter().any(|e| e.c > 0.0))
    }

    /// Same field with its domain radius replaced.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidField(format!(
                "radius mu must be positive, got {mu}"
            )));
        }
        out.mu = mu;
        Ok(out)
    }

    /// `a_{l,α}` for a 0-based component; zero when not stored.
    pub fn coeff(&self, l: usize, alpha: &MultiIndex) -> Complex64 {
        self.components[l]
            .get(alpha)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn component(&self, l: usize) -> &BTreeMap<MultiIndex, Complex64> {
        &self.components[l]
    }

    /// All stored `(l, α, a)` with nonzero coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &MultiIndex, Complex64)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(l, c)| c.iter().map(move |(a, v)| (l, a, *v)))
    }

    /// Diagonal Jacobian entry `a_{l,e_l}`.
    pub fn diagonal(&self, l: usize) -> Complex64 {
        self.coeff(l, &MultiIndex::unit(self.n, l))
    }

    /// Highest degree carrying a nonzero stored coefficient.
    pub fn max_stored_degree(&self) -> Option<u32> {
        max_degree(&self.components)
    }

    pub fn jacobian(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |l, i| {
            self.coeff(l, &MultiIndex::unit(self.n, i))
        })
    }

    pub fn to_polynomials(&self) -> Vec<Polynomial> {
        self.components
            .iter()
            .map(|c| Polynomial::from_terms(self.n, c.iter().map(|(a, v)| (a.clone(), *v))))
            .collect()
    }

    pub fn check_assumptions(&self) -> AssumptionReport {
        let n = self.n;
        let jacobian_diagonal = (0..n).all(|l| {
            (0..n).all(|i| {
                i == l || self.coeff(l, &MultiIndex::unit(n, i)) == Complex64::new(0.0, 0.0)
            })
        });
        let eigenvalues: Vec<Complex64> = if jacobian_diagonal {
            (0..n).map(|l| self.diagonal(l)).collect()
        } else {
            let schur = nalgebra::Schur::new(self.jacobian());
            schur
                .eigenvalues()
                .map(|v| v.iter().copied().collect())
                .unwrap_or_default()
        };
        let hyperbolic = eigenvalues.len() == n && eigenvalues.iter().all(|l| l.re < 0.0);
        let mut notes =
            vec!["uniqueness of the equilibrium on the domain asserted by user".to_string()];
        if !jacobian_diagonal {
            notes.push("jacobian not diagonal; supply a change of basis".into());
        }
        if !hyperbolic {
            notes.push("some Jacobian eigenvalue has non-negative real part".into());
        }
        AssumptionReport {
            equilibrium_at_origin: true,
            jacobian_diagonal,
            hyperbolic,
            eigenvalues,
            notes,
        }
    }

    /// `ẑ ↦ P⁻¹ F(P ẑ)` re-expanded in monomials of `ẑ`. Exact up to
    /// floating rounding for polynomial fields.
    pub fn change_coordinates(&self, p: &DMatrix<Complex64>) -> Result<Self> {
        let n = self.n;
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.nrows(),
            });
        }
        if self.has_tail() {
            return Err(Error::TailComposition);
        }
        let p_inv = p.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        if p_inv
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::SingularMatrix);
        }
        // z_i = Σ_j P_ij ẑ_j, cached powers per coordinate
        let linear: Vec<Polynomial> = (0..n)
            .map(|i| Polynomial::from_terms(n, (0..n).map(|j| (MultiIndex::unit(n, j), p[(i, j)]))))
            .collect();
        let max_deg = self.max_stored_degree().unwrap_or(1);
        let powers: Vec<Vec<Polynomial>> = linear
            .iter()
            .map(|lin| {
                let mut pw = vec![Polynomial::constant(n, Complex64::new(1.0, 0.0))];
                for e in 1..=max_deg as usize {
                    let next = &pw[e - 1] * lin;
                    pw.push(next);
                }
                pw
            })
            .collect();
        let substituted: Vec<Polynomial> = self
            .components
            .iter()
            .map(|comp| {
                let mut acc = Polynomial::zero(n);
                for (alpha, c) in comp {
                    let mut mono = Polynomial::constant(n, *c);
                    for (i, &e) in alpha.exponents().iter().enumerate() {
                        if e > 0 {
                            mono = &mono * &powers[i][e as usize];
                        }
                    }
                    acc = &acc + &mono;
                }
                acc
            })
            .collect();
        let mut out: Vec<Polynomial> = (0..n)
            .map(|m| {
                let mut acc = Polynomial::zero(n);
                for (l, s) in substituted.iter().enumerate() {
                    let w = p_inv[(m, l)];
                    if w != Complex64::new(0.0, 0.0) {
                        acc = &acc + &s.scale(w);
                    }
                }
                acc
            })
            .collect();
        let scale = out
            .iter()
            .flat_map(|p| p.terms().map(|(_, c)| c.norm()))
            .fold(0.0, f64::max);
        for p in &mut out {
            p.prune_below(CANCELLATION_TOL * scale);
        }
        let coefficients = out
            .iter()
            .enumerate()
            .flat_map(|(l, p)| p.terms().map(move |(a, c)| (l, a.clone(), *c)))
            .collect::<Vec<_>>();
        let components = collect_components(n, coefficients)?;
        let trunc = match self.kind {
            FieldKind::Polynomial => max_degree(&components).unwrap_or(1),
            FieldKind::Analytic => self.truncation_degree,
        };
        Self::build(n, self.mu, self.kind, trunc, components, self.tail.clone())
    }

    /// Dynamics in `z' = z/s`: coefficients `s^{|α|-1} a_{l,α}` on the
    /// polydisc of radius `μ/s`.
    pub fn rescale(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidField(format!(
                "rescaling factor must be positive, got {s}"
            )));
        }
        let components = self
            .components
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|(a, c)| (a.clone(), c * s.powi(a.degree() as i32 - 1)))
                    .collect()
            })
            .collect();
        let tail = self.tail.as_ref().map(|t| {
            t.iter()
                .map(|e| TailEnvelope {
                    c: e.c / s,
                    r: e.r * s,
                })
                .collect()
        });
        Self::build(
            self.n,
            self.mu / s,
            self.kind,
            self.truncation_degree,
            components,
            tail,
        )
    }

    /// Rescaled dynamics on the unit polydisc.
    pub fn rescale_to_unit(&self) -> Result<Self> {
        self.rescale(self.mu)
    }

    /// `F(z)` for `z` in the closed domain polydisc, with a per-component bound
    /// on the omitted Taylor tail (all zeros for polynomial fields).
    pub fn evaluate(&self, z: &[Complex64]) -> Result<Evaluation> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: z.len(),
            });
        }
        let radius = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if radius > self.mu * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain { radius: self.mu });
        }
        let mut tail_bound = vec![0.0; self.n];
        for (l, t) in tail_bound.iter_mut().enumerate() {
            let env = self.tail_of(l);
            *t = env
                .weighted_tail(self.n, self.truncation_degree, radius)
                .ok_or(Error::DivergentTail {
                    component: l + 1,
                    ratio: env.r * radius,
                })?;
        }
        Ok(Evaluation {
            value: self.eval_unchecked(z),
            tail_bound,
        })
    }

    /// Truncated sum without domain checks, for hot loops.
    pub fn eval_unchecked(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.eval_into(z, &mut out);
        out
    }

    pub fn eval_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        let max_deg = self.truncation_degree as usize;
        let one = Complex64::new(1.0, 0.0);
        let mut powers = Vec::with_capacity(self.n * (max_deg + 1));
        for zi in z {
            let mut p = one;
            powers.push(p);
            for _ in 0..max_deg {
                p *= zi;
                powers.push(p);
            }
        }
        for (l, comp) in self.components.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (alpha, c) in comp {
                let mut m = *c;
                for (i, &e) in alpha.exponents().iter().enumerate() {
                    if e > 0 {
                        m *= powers[i * (max_deg + 1) + e as usize];
                    }
                }
                acc += m;
            }
            out[l] = acc;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Vec<Complex64>,
    pub tail_bound: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub equilibrium_at_origin: bool,
    pub jacobian_diagonal: bool,
    pub hyperbolic: bool,
    pub eigenvalues: Vec<Complex64>,
    pub notes: Vec<String>,
}

fn collect_components(
    n: usize,
    coefficients: impl IntoIterator<Item = (usize, MultiIndex, Complex64)>,
) -> Result<Vec<BTreeMap<MultiIndex, Complex64>>> {
    let mut components = vec![BTreeMap::new(); n];
    for (l, alpha, c) in coefficients {
        if l >= n {
            return Err(Error::ComponentOutOfRange {
                component: l + 1,
                n,
            });
        }
        if alpha.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: alpha.dim(),
            });
        }
        if alpha.degree() == 0 {
            return Err(Error::InvalidField(
                "constant terms are not allowed: the equilibrium must sit at the origin".into(),
            ));
        }
        let entry: &mut Complex64 = components[l]
            .entry(alpha)
            .or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
    }
    for comp in &mut components {
        comp.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }
    Ok(components)
}

fn max_degree(components: &[BTreeMap<MultiIndex, Complex64>]) -> Option<u32> {
    components
        .iter()
        .flat_map(|c| c.keys().map(MultiIndex::degree))
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn linear(diag: &[f64], mu: f64) -> TaylorVectorField {
        let n = diag.len();
        TaylorVectorField::polynomial(
            n,
            mu,
            diag.iter()
                .enumerate()
                .map(|(l, &d)| (l, MultiIndex::unit(n, l), c(d))),
        )
        .unwrap()
    }

    #[test]
    fn assumptions_linear() {
        let r = linear(&[-1.0, -1.0], 1.0).check_assumptions();
        assert!(r.jacobian_diagonal && r.hyperbolic && r.equilibrium_at_origin);
        assert_eq!(r.eigenvalues, vec![c(-1.0), c(-1.0)]);
        assert!(!linear(&[1.0, -1.0], 1.0).check_assumptions().hyperbolic);
    }

    #[test]
    fn assumptions_non_diagonal_uses_spectrum() {
        let raw = catalog::example1_raw().unwrap();
        let r = raw.check_assumptions();
        assert!(!r.jacobian_diagonal);
        assert!(r.hyperbolic);
        let mut eig: Vec<f64> = r.eigenvalues.iter().map(|e| e.re).collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 0.375).abs() < 1e-12 && (eig[1] + 0.125).abs() < 1e-12);
    }

    #[test]
    fn constant_terms_rejected() {
        let err = TaylorVectorField::polynomial(1, 1.0, [(0, mi(&[0]), c(1.0))]);
        assert!(matches!(err, Err(Error::InvalidField(_))));
    }

    #[test]
    fn diagonalising_example_one() {
        // The raw field has F_2 ∋ a·b·z_1² = z_1²/200; under z = Pẑ each
        // component of P⁻¹F(Pẑ) picks up (1/400)(ẑ_1 - ẑ_2)².
        let hat = catalog::example1_raw()
            .unwrap()
            .change_coordinates(&catalog::example1_basis())
            .unwrap();
        let r = hat.check_assumptions();
        assert!(r.jacobian_diagonal);
        assert!((hat.diagonal(0) - c(-0.375)).norm() < 1e-15);
        assert!((hat.diagonal(1) - c(-0.125)).norm() < 1e-15);
        for l in 0..2 {
            assert!((hat.coeff(l, &mi(&[2, 0])) - c(1.0 / 400.0)).norm() < 1e-15);
            assert!((hat.coeff(l, &mi(&[1, 1])) - c(-1.0 / 200.0)).norm() < 1e-15);
            assert!((hat.coeff(l, &mi(&[0, 2])) - c(1.0 / 400.0)).norm() < 1e-15);
        }
        assert_eq!(hat.terms().count(), 8);
    }

    #[test]
    fn identity_change_is_noop() {
        let f = catalog::example1_transformed().unwrap();
        let g = f.change_coordinates(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn change_rejects_singular_and_tails() {
        let f = catalog::example1_transformed().unwrap();
        let singular = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            f.change_coordinates(&singular),
            Err(Error::SingularMatrix)
        ));
        let g = catalog::example2(20).unwrap();
        assert!(matches!(
            g.change_coordinates(&DMatrix::identity(2, 2)),
            Err(Error::TailComposition)
        ));
    }

    #[test]
    fn rescale_cases() {
        let f =
            TaylorVectorField::polynomial(1, 2.0, [(0, mi(&[1]), c(-1.0)), (0, mi(&[2]), c(1.0))])
                .unwrap();
        assert_eq!(f.rescale(1.0).unwrap().component(0), f.component(0));
        let g = f.rescale_to_unit().unwrap();
        assert_eq!(g.mu(), 1.0);
        assert_eq!(g.coeff(0, &mi(&[1])), c(-1.0));
        assert_eq!(g.coeff(0, &mi(&[2])), c(2.0));

        let ex2 = catalog::example2(20).unwrap().rescale_to_unit().unwrap();
        assert!((ex2.coeff(0, &mi(&[0, 2])) - c(2.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn evaluate_cases() {
        let f = linear(&[-1.0, -1.0], 1.0);
        let v = f.evaluate(&[c(0.5), Complex64::new(0.0, 0.5)]).unwrap();
        assert_eq!(v.value, vec![c(-0.5), Complex64::new(0.0, -0.5)]);
        assert_eq!(v.tail_bound, vec![0.0, 0.0]);
        assert!(matches!(
            f.evaluate(&[c(2.0), c(0.0)]),
            Err(Error::OutsideDomain { .. })
        ));

        let raw = catalog::example1_raw().unwrap();
        let v = raw.evaluate(&[c(1.0), c(1.0)]).unwrap();
        assert!((v.value[0] - c(-0.375)).norm() < 1e-15);
        // F_2(1,1) = a(1 - 1/(ac) + b) with a = -1/4, ac = -2, b = -1/50
        assert!((v.value[1] - c(-0.25 * (1.0 + 0.5 - 0.02))).norm() < 1e-15);
    }

    #[test]
    fn evaluate_analytic_within_tail_bound() {
        let f = catalog::example2(20).unwrap();
        let z = [c(1.0), c(1.0)];
        let v = f.evaluate(&z).unwrap();
        let exact = catalog::example2_closed_form(&z);
        for l in 0..2 {
            let err = (v.value[l] - exact[l]).norm();
            // rounding of the truncated sum itself is allowed on top of the bound
            assert!(
                err <= v.tail_bound[l] + 1e-14,
                "component {l}: {err} > {}",
                v.tail_bound[l]
            );
        }
        // with r = 1/18 the tail diverges once |z| reaches 18
        assert!(matches!(
            f.with_mu(20.0).unwrap().evaluate(&[c(19.0), c(0.0)]),
            Err(Error::DivergentTail { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_complex() -> impl Strategy<Value = Complex64> {
            (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Complex64::new(a, b))
        }

        fn quadratic_field() -> impl Strategy<Value = TaylorVectorField> {
            (
                prop::collection::vec(-3.0f64..-0.1, 2),
                prop::collection::vec(small_complex(), 6),
            )
                .prop_map(|(diag, quad)| {
                    let mut terms =
                        vec![(0, mi(&[1, 0]), c(diag[0])), (1, mi(&[0, 1]), c(diag[1]))];
                    let qs = [mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])];
                    for (i, q) in quad.into_iter().enumerate() {
                        terms.push((i / 3, qs[i % 3].clone(), q));
                    }
                    TaylorVectorField::polynomial(2, 3.0, terms).unwrap()
                })
        }

        fn invertible() -> impl Strategy<Value = DMatrix<Complex64>> {
            prop::collection::vec(small_complex(), 4)
                .prop_map(|v| DMatrix::from_row_slice(2, 2, &v))
                .prop_filter("well conditioned", |m| m.determinant().norm() > 0.5)
        }

        proptest! {
            #[test]
            fn rescale_matches_flow_correspondence(f in quadratic_field(), re in -1.0f64..1.0, im in -1.0f64..1.0, re2 in -1.0f64..1.0, im2 in -1.0f64..1.0) {
                let g = f.rescale_to_unit().unwrap();
                let zp = [Complex64::new(re, im) * 0.7, Complex64::new(re2, im2) * 0.7];
                let z: Vec<Complex64> = zp.iter().map(|v| v * f.mu()).collect();
                let lhs = g.eval_unchecked(&zp);
                let rhs = f.eval_unchecked(&z);
                for l in 0..2 {
                    let expect = rhs[l] / f.mu();
                    prop_assert!((lhs[l] - expect).norm() <= 1e-10 * expect.norm().max(1e-12));
                }
            }

            #[test]
            fn change_round_trip(f in quadratic_field(), p in invertible()) {
                let p_inv = p.clone().try_inverse().unwrap();
                let back = f.change_coordinates(&p).unwrap().change_coordinates(&p_inv).unwrap();
                // quadratic terms pass through P three times each way
                let cond = p.norm() * p_inv.norm();
                let scale = (0..2)
                    .flat_map(|l| f.component(l).values().map(|c| c.norm()))
                    .fold(1.0, f64::max);
                let tol = 1e-14 * cond.powi(3) * scale;
                for l in 0..2 {
                    for a in [mi(&[1, 0]), mi(&[0, 1]), mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])] {
                        prop_assert!((back.coeff(l, &a) - f.coeff(l, &a)).norm() < tol);
                    }
                }
            }

            #[test]
            fn change_preserves_spectrum(f in quadratic_field(), p in invertible()) {
                // equal spectra ⇔ equal power traces tr(J^k), k = 1..n
                let j0 = f.jacobian();
                let j1 = f.change_coordinates(&p).unwrap().jacobian();
                let (mut a, mut b) = (j0.clone(), j1.clone());
                for _ in 0..2 {
                    prop_assert!((a.trace() - b.trace()).norm() < 1e-10);
                    a = &a * &j0;
                    b = &b * &j1;
                }
            }

            #[test]
            fn polynomial_eval_is_naive_sum(f in quadratic_field(), re in -1.0f64..1.0, im in -1.0f64..1.0) {
                let z = [Complex64::new(re, im), Complex64::new(im, re)];
                let fast = f.eval_unchecked(&z);
                for l in 0..2 {
                    let naive: Complex64 = f.component(l).iter().map(|(a, c)| c * a.eval(&z)).sum();
                    prop_assert!((fast[l] - naive).norm() <= 1e-14 * (1.0 + naive.norm()));
                }
            }
        }
    }
}
