//! Pipelines behind the command-line front end and their report documents.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::{
    certify_analytic, certify_polynomial, CertifyOptions, Criterion, Sampling, StabilityCertificate,
};
use crate::error::{Error, Result};
use crate::lyapunov::{
    build_lyapunov, ConvergenceEstimate, LyapunovFunction, SchemeKind, WeightScheme, DEFAULT_SLACK,
    DEFAULT_SLACK_DELTA,
};
use crate::multiindex::MultiIndex;
use crate::numerics::{
    validate, FlowIntegrator, Trajectory, ValidationConfig, ValidationReport, DEFAULT_STEP,
};
use crate::problem::{ProblemSpec, SchemeChoice, SCHEMA_VERSION};
use crate::vectorfield::{AssumptionReport, TaylorVectorField};

pub const DEFAULT_LYAPUNOV_DEGREE: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremChoice {
    Polynomial,
    Analytic,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub input_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(input: &[u8], seed: u64) -> Self {
        let digest = Sha256::digest(input);
        Provenance {
            tool: "koopcert",
            version: env!("CARGO_PKG_VERSION"),
            input_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovEntry {
    pub index: usize,
    pub alpha: MultiIndex,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub rho: f64,
    pub scale: f64,
    pub scheme: SchemeKind,
    pub slack: f64,
    pub slack_delta: f64,
    pub truncation_degree: u32,
    pub count: usize,
    pub convergence: ConvergenceEstimate,
    pub series_at_rho: f64,
    pub tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<LyapunovEntry>>,
}

impl LyapunovSummary {
    pub fn new(v: &LyapunovFunction, with_table: bool) -> Self {
        LyapunovSummary {
            rho: v.rho,
            scale: v.scale,
            scheme: v.scheme,
            slack: v.slack,
            slack_delta: v.epsilon.slack_delta,
            truncation_degree: v.truncation_degree,
            count: v.alphas.len() - 1,
            convergence: v.convergence,
            series_at_rho: v.series_at_rho,
            tail_bound: v.tail_bound,
            table: with_table.then(|| {
                v.table()
                    .into_iter()
                    .map(|(index, alpha, epsilon)| LyapunovEntry {
                        index,
                        alpha,
                        epsilon,
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub assumption_report: AssumptionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<StabilityCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `0` when everything asked for holds, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        let certified = self.certificate.as_ref().is_none_or(|c| c.certified);
        let clean = self.validation.as_ref().is_none_or(|v| v.violations() == 0);
        if certified && clean {
            0
        } else {
            2
        }
    }
}

/// A parsed problem with its raw bytes (for the provenance hash).
pub struct Problem {
    pub spec: ProblemSpec,
    pub field: TaylorVectorField,
    input: Vec<u8>,
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec = ProblemSpec::from_json(text)?;
        let field = spec.field()?;
        Ok(Problem {
            spec,
            field,
            input: text.as_bytes().to_vec(),
        })
    }

    pub fn seed(&self, overridden: Option<u64>) -> u64 {
        overridden.or(self.spec.options.seed).unwrap_or(0)
    }

    fn rho(&self, overridden: Option<f64>) -> Result<f64> {
        match overridden {
            Some(r) => Ok(r),
            None => self
                .spec
                .requested_rho()?
                .ok_or_else(|| Error::Problem("no radius: pass --rho or set requested_rho".into())),
        }
    }

    fn certify_options(&self, seed: u64) -> Result<CertifyOptions> {
        Ok(CertifyOptions {
            assume_invariant: self.spec.options.assume_invariant.unwrap_or(false),
            sampling: Some(Sampling {
                samples_per_face: self.spec.options.samples.unwrap_or(1_000),
                seed,
            }),
            reference_l_mu: self.spec.reference_l_mu()?,
        })
    }

    fn report(&self, command: &'static str, seed: u64) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            assumption_report: self.field.check_assumptions(),
            certificate: None,
            lyapunov: None,
            validation: None,
            provenance: Provenance::new(&self.input, seed),
        }
    }

    pub fn certificate(
        &self,
        theorem: TheoremChoice,
        rho: f64,
        seed: u64,
    ) -> Result<StabilityCertificate> {
        let opts = self.certify_options(seed)?;
        let f = &self.field;
        match theorem {
            TheoremChoice::Polynomial => {
                if !f.is_polynomial() {
                    return Err(Error::NotPolynomial);
                }
                certify_polynomial(f, rho, &opts)
            }
            TheoremChoice::Analytic => certify_analytic(f, f.mu(), rho, &opts),
            TheoremChoice::Auto if f.is_polynomial() => certify_polynomial(f, rho, &opts),
            TheoremChoice::Auto => certify_analytic(f, f.mu(), rho, &opts),
        }
    }

    pub fn certify(
        &self,
        theorem: TheoremChoice,
        rho: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Report> {
        let seed = self.seed(seed);
        let mut report = self.report("certify", seed);
        report.certificate = Some(self.certificate(theorem, self.rho(rho)?, seed)?);
        Ok(report)
    }

    fn scheme(&self, cert: &StabilityCertificate) -> Result<WeightScheme> {
        let slack = self.spec.options.slack.unwrap_or(DEFAULT_SLACK);
        match (
            self.spec.options.scheme.unwrap_or_default(),
            &cert.criterion,
        ) {
            (SchemeChoice::Uniform, _) | (SchemeChoice::Auto, Criterion::Polynomial(_)) => {
                WeightScheme::uniform(slack)
            }
            (SchemeChoice::Proportional, _) | (SchemeChoice::Auto, Criterion::Analytic(_)) => {
                WeightScheme::proportional(slack)
            }
        }
    }

    /// Lyapunov function for a certified radius; `None` when the radius is
    /// not certified.
    pub fn lyapunov_function(
        &self,
        cert: &StabilityCertificate,
        degree: Option<u32>,
    ) -> Result<Option<LyapunovFunction>> {
        if !cert.certified {
            return Ok(None);
        }
        let f = &self.field;
        let mut degree = degree
            .or(self.spec.options.truncation_degree)
            .unwrap_or(DEFAULT_LYAPUNOV_DEGREE);
        if !f.is_polynomial() {
            degree = degree.min(f.truncation_degree());
        }
        let delta = self.spec.options.slack_delta.unwrap_or(DEFAULT_SLACK_DELTA);
        build_lyapunov(f, cert.requested_rho, &self.scheme(cert)?, degree, delta).map(Some)
    }

    pub fn lyapunov(
        &self,
        rho: Option<f64>,
        degree: Option<u32>,
        seed: Option<u64>,
    ) -> Result<Report> {
        let seed = self.seed(seed);
        let mut report = self.report("lyapunov", seed);
        let cert = self.certificate(TheoremChoice::Auto, self.rho(rho)?, seed)?;
        report.lyapunov = self
            .lyapunov_function(&cert, degree)?
            .map(|v| LyapunovSummary::new(&v, true));
        report.certificate = Some(cert);
        Ok(report)
    }

    pub fn validation_config(&self, samples: Option<usize>, seed: u64) -> ValidationConfig {
        let o = &self.spec.options;
        let slowest = (0..self.field.dim())
            .map(|l| self.field.diagonal(l).re.abs())
            .fold(f64::INFINITY, f64::min);
        // long enough for the slowest linear mode to contract by ~e^{-40}
        let t_default = if slowest.is_finite() && slowest > 0.0 {
            40.0 / slowest
        } else {
            100.0
        };
        ValidationConfig {
            samples: samples.or(o.samples).unwrap_or(10_000),
            trials: o.trials.unwrap_or(100),
            t_end: o.t_end.unwrap_or(t_default),
            h: o.h.unwrap_or(1e-2),
            seed,
        }
    }

    pub fn validate(
        &self,
        rho: Option<f64>,
        samples: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Report> {
        let seed = self.seed(seed);
        let rho = self.rho(rho)?;
        let mut report = self.report("validate", seed);
        let cert = self.certificate(TheoremChoice::Auto, rho, seed).ok();
        let v = match &cert {
            Some(c) => self.lyapunov_function(c, None).ok().flatten(),
            None => None,
        };
        let cfg = self.validation_config(samples, seed);
        report.validation = Some(validate(&self.field, rho, v.as_ref(), &cfg)?);
        report.lyapunov = v.as_ref().map(|v| LyapunovSummary::new(v, false));
        report.certificate = cert;
        Ok(report)
    }

    /// Trajectory from `z0` in the working coordinates, with the Lyapunov
    /// function at `v_rho` when one is requested and certifiable.
    pub fn simulate(
        &self,
        z0: &[num_complex::Complex64],
        t_end: Option<f64>,
        h: Option<f64>,
        v_rho: Option<f64>,
    ) -> Result<(Trajectory, Option<LyapunovFunction>)> {
        let o = &self.spec.options;
        let h = h.or(o.h).unwrap_or(DEFAULT_STEP);
        let t_end = t_end.or(o.t_end).unwrap_or(10.0);
        let steps = (t_end / h).ceil().max(1.0) as usize;
        let integrator = FlowIntegrator::new(h, t_end)?.recording_every(steps.div_ceil(10_000));
        let traj = integrator.integrate(&self.field, z0)?;
        let v = match v_rho {
            Some(r) => {
                let cert = self.certificate(TheoremChoice::Auto, r, self.seed(None))?;
                Some(self.lyapunov_function(&cert, None)?.ok_or_else(|| {
                    Error::InconsistentCertificate(format!("radius {r} is not certified"))
                })?)
            }
            None => None,
        };
        Ok((traj, v))
    }
}
