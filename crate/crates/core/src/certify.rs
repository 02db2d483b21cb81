//! Certified radii of global asymptotic stability.
//!
//! Polynomial fields use the coefficient-count criterion built from
//! `(d, K, S, R)`; analytic fields use the discounted coefficient sum `L_μ`.
//! Both bounds are strict: the certificate stores the supremum and certifies
//! only radii strictly below it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{invariance_certificate, sample_boundary_invariance};
use crate::vectorfield::{AssumptionReport, TaylorVectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolynomialQuantities {
    /// Maximal degree of a nonzero coefficient.
    pub d: u32,
    /// Number of nonzero coefficients other than `a_{l,e_l}` in `F_l`.
    pub k: usize,
    /// Largest modulus among those coefficients.
    pub s: f64,
    /// Smallest `|Re a_{l,l}|`.
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "KS/R >= 1")]
    RatioAtLeastOne,
    #[serde(rename = "KS/R < 1")]
    RatioBelowOne,
    /// `K = 0` (equivalently `d = 1`): linear diagonal dynamics.
    #[serde(rename = "linear")]
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialCriterion {
    pub d: u32,
    pub k: usize,
    pub s: f64,
    pub r: f64,
    pub ratio: f64,
    pub branch: Branch,
    /// Supremum given by the criterion alone (infinite for linear fields).
    pub rho_bound: f64,
    /// `min(rho_bound, μ)`: the criterion also needs `ρ < μ`.
    pub rho_sup: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Enclosure {
    pub lower: f64,
    pub upper: f64,
}

impl Enclosure {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticCriterion {
    pub mu: f64,
    pub l_mu: Enclosure,
    /// Externally quoted value of `L_μ`, reported next to the computed one.
    pub reference_l_mu: Option<f64>,
    /// Larger of `l_mu.upper` and the reference value.
    pub l_mu_used: f64,
    pub r: f64,
    pub rho_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Criterion {
    Polynomial(PolynomialCriterion),
    Analytic(AnalyticCriterion),
}

impl Criterion {
    pub fn rho_sup(&self) -> f64 {
        match self {
            Criterion::Polynomial(c) => c.rho_sup,
            Criterion::Analytic(c) => c.rho_sup,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvarianceStatus {
    Certified,
    SampledOnly,
    UserAsserted,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub theorem: u8,
    pub criterion: Criterion,
    pub requested_rho: f64,
    pub certified: bool,
    pub invariance_status: InvarianceStatus,
    /// Per-component slack of the sufficient invariance inequality.
    pub invariance_margins: Vec<f64>,
    pub assumption_report: AssumptionReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub samples_per_face: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Accept forward invariance of `D^n(ρ)` without proof.
    pub assume_invariant: bool,
    /// Boundary sampling used when the sufficient inequality fails.
    pub sampling: Option<Sampling>,
    /// Quoted value of `L_μ` to print alongside the computed enclosure.
    pub reference_l_mu: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            assume_invariant: false,
            sampling: Some(Sampling {
                samples_per_face: 1_000,
                seed: 0,
            }),
            reference_l_mu: None,
        }
    }
}

fn require_diagonal(report: &AssumptionReport) -> Result<()> {
    if report.jacobian_diagonal {
        Ok(())
    } else {
        Err(Error::JacobianNotDiagonal(
            "apply a change of basis that diagonalises JF(0) first".into(),
        ))
    }
}

/// Smallest `|Re a_{l,l}|`.
pub fn min_diagonal_real(f: &TaylorVectorField) -> f64 {
    (0..f.dim())
        .map(|l| f.diagonal(l).re.abs())
        .fold(f64::INFINITY, f64::min)
}

pub fn polynomial_quantities(f: &TaylorVectorField) -> Result<PolynomialQuantities> {
    if !f.is_polynomial() {
        return Err(Error::NotPolynomial);
    }
    require_diagonal(&f.check_assumptions())?;
    let mut d = 1;
    let mut k = 0;
    let mut s = 0.0f64;
    for (l, alpha, a) in f.terms() {
        d = d.max(alpha.degree());
        if alpha.as_unit() == Some(l) {
            continue;
        }
        k += 1;
        s = s.max(a.norm());
    }
    Ok(PolynomialQuantities {
        d,
        k,
        s,
        r: min_diagonal_real(f),
    })
}

pub fn polynomial_criterion(f: &TaylorVectorField) -> Result<PolynomialCriterion> {
    let q = polynomial_quantities(f)?;
    let mu = f.mu();
    if q.k == 0 || q.d == 1 {
        return Ok(PolynomialCriterion {
            d: q.d,
            k: q.k,
            s: q.s,
            r: q.r,
            ratio: 0.0,
            branch: Branch::Linear,
            rho_bound: f64::INFINITY,
            rho_sup: mu,
        });
    }
    let ratio = q.k as f64 * q.s / q.r;
    let (branch, rho_bound) = if ratio >= 1.0 {
        (Branch::RatioAtLeastOne, 1.0 / ratio)
    } else {
        (
            Branch::RatioBelowOne,
            (1.0 / ratio).powf(1.0 / f64::from(q.d - 1)),
        )
    };
    Ok(PolynomialCriterion {
        d: q.d,
        k: q.k,
        s: q.s,
        r: q.r,
        ratio,
        branch,
        rho_bound,
        rho_sup: rho_bound.min(mu),
    })
}

fn invariance_status(
    f: &TaylorVectorField,
    rho: f64,
    opts: &CertifyOptions,
) -> (InvarianceStatus, Vec<f64>) {
    let cert = invariance_certificate(f, rho);
    let margins = cert.as_ref().map(|c| c.margins.clone()).unwrap_or_default();
    if cert.as_ref().is_ok_and(|c| c.holds) {
        return (InvarianceStatus::Certified, margins);
    }
    if opts.assume_invariant {
        return (InvarianceStatus::UserAsserted, margins);
    }
    if let Some(s) = opts.sampling {
        let sampled = sample_boundary_invariance(f, rho, s.samples_per_face, s.seed);
        if sampled.violations == 0 {
            return (InvarianceStatus::SampledOnly, margins);
        }
    }
    (InvarianceStatus::Failed, margins)
}

fn finish(
    theorem: u8,
    criterion: Criterion,
    f: &TaylorVectorField,
    requested_rho: f64,
    report: AssumptionReport,
    opts: &CertifyOptions,
) -> StabilityCertificate {
    let (invariance_status, invariance_margins) = invariance_status(f, requested_rho, opts);
    let certified = requested_rho < criterion.rho_sup()
        && report.hyperbolic
        && report.jacobian_diagonal
        && matches!(
            invariance_status,
            InvarianceStatus::Certified | InvarianceStatus::UserAsserted
        );
    StabilityCertificate {
        theorem,
        criterion,
        requested_rho,
        certified,
        invariance_status,
        invariance_margins,
        assumption_report: report,
    }
}

fn check_rho(rho: f64, mu: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Problem(format!(
            "requested radius must be positive, got {rho}"
        )));
    }
    if mu <= rho {
        return Err(Error::RadiusExceedsDomain { rho, mu });
    }
    Ok(())
}

/// Certificate for a polynomial field on its domain `D^n(μ)`.
pub fn certify_polynomial(
    f: &TaylorVectorField,
    requested_rho: f64,
    opts: &CertifyOptions,
) -> Result<StabilityCertificate> {
    let report = f.check_assumptions();
    require_diagonal(&report)?;
    check_rho(requested_rho, f.mu())?;
    let criterion = polynomial_criterion(f)?;
    Ok(finish(
        1,
        Criterion::Polynomial(criterion),
        f,
        requested_rho,
        report,
        opts,
    ))
}

/// Enclosure of `L_μ = Σ_l Σ_α μ^{|α|} |a_{l,α}|`: stored coefficients plus the
/// tail envelope.
pub fn compute_l_mu(f: &TaylorVectorField, mu: f64) -> Result<Enclosure> {
    let mut lower = 0.0;
    // ascending magnitude keeps the rounding of long analytic tables small
    let mut parts: Vec<f64> = f
        .terms()
        .map(|(_, alpha, a)| mu.powi(alpha.degree() as i32) * a.norm())
        .collect();
    parts.sort_by(f64::total_cmp);
    for p in parts {
        lower += p;
    }
    let mut tail = 0.0;
    for l in 0..f.dim() {
        let env = f.tail_of(l);
        tail += env
            .weighted_tail(f.dim(), f.truncation_degree(), mu)
            .ok_or(Error::DivergentTail {
                component: l + 1,
                ratio: env.r * mu,
            })?;
    }
    Ok(Enclosure {
        lower,
        upper: lower + tail,
    })
}

pub fn analytic_criterion(
    f: &TaylorVectorField,
    mu: f64,
    reference_l_mu: Option<f64>,
) -> Result<AnalyticCriterion> {
    require_diagonal(&f.check_assumptions())?;
    if !(mu > 0.0 && mu <= f.mu() * (1.0 + 1e-12)) {
        return Err(Error::Problem(format!(
            "μ = {mu} must lie in ]0, {}] (the domain radius)",
            f.mu()
        )));
    }
    let l_mu = compute_l_mu(f, mu)?;
    let l_mu_used = reference_l_mu.map_or(l_mu.upper, |r| r.max(l_mu.upper));
    let r = min_diagonal_real(f);
    Ok(AnalyticCriterion {
        mu,
        l_mu,
        reference_l_mu,
        l_mu_used,
        r,
        rho_sup: (mu * r / l_mu_used).min(mu),
    })
}

/// Certificate from the discounted coefficient sum at radius `μ`.
pub fn certify_analytic(
    f: &TaylorVectorField,
    mu: f64,
    requested_rho: f64,
    opts: &CertifyOptions,
) -> Result<StabilityCertificate> {
    let report = f.check_assumptions();
    require_diagonal(&report)?;
    check_rho(requested_rho, mu)?;
    let criterion = analytic_criterion(f, mu, opts.reference_l_mu)?;
    Ok(finish(
        2,
        Criterion::Analytic(criterion),
        f,
        requested_rho,
        report,
        opts,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MuSweepPoint {
    pub mu: f64,
    /// `None` where `L_μ` diverges.
    pub rho_sup: Option<f64>,
}

/// `μR/L_μ` over a grid of radii, for picking a good `μ`.
pub fn sweep_mu(f: &TaylorVectorField, grid: &[f64]) -> Vec<MuSweepPoint> {
    grid.iter()
        .map(|&mu| MuSweepPoint {
            mu,
            rho_sup: analytic_criterion(f, mu, None).ok().map(|c| c.rho_sup),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMargin {
    pub q: usize,
    pub r: usize,
    /// `|Re a_qq||Re a_rr|/D² − |a_qr|²`
    pub product_margin: f64,
    /// `|Re a_qq|/D − |a_qr|`
    pub linear_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub holds: bool,
    /// Number of nonzero strictly-upper entries.
    pub off_diagonal_count: usize,
    pub pairs: Vec<PairMargin>,
}

/// Diagonal dominance conditions for an upper-triangular Jacobian (pairs are
/// 1-based). Vacuous when the matrix is diagonal.
pub fn diagonal_dominance_check(j: &DMatrix<Complex64>) -> Result<DominanceReport> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: j.ncols(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..r {
            if j[(r, c)] != zero {
                return Err(Error::NotTriangular);
            }
        }
    }
    let hurwitz = (0..n).all(|i| j[(i, i)].re < 0.0);
    let d = (0..n)
        .flat_map(|r| (r + 1..n).map(move |c| (r, c)))
        .filter(|&(r, c)| j[(r, c)] != zero)
        .count();
    let mut pairs = Vec::new();
    for q in 0..n {
        for r in q + 1..n {
            let a = j[(q, r)].norm();
            let (dq, dr) = (j[(q, q)].re.abs(), j[(r, r)].re.abs());
            let (product_margin, linear_margin) = if d == 0 {
                (f64::INFINITY, f64::INFINITY)
            } else {
                let dd = d as f64;
                (dq * dr / (dd * dd) - a * a, dq / dd - a)
            };
            pairs.push(PairMargin {
                q: q + 1,
                r: r + 1,
                product_margin,
                linear_margin,
            });
        }
    }
    let holds = hurwitz
        && pairs
            .iter()
            .all(|p| p.product_margin > 0.0 && p.linear_margin > 0.0);
    Ok(DominanceReport {
        holds,
        off_diagonal_count: d,
        pairs,
    })
}
