//! JSON problem documents: coefficient tables, optional tail envelopes and
//! change of basis, plus pipeline options.
//!
//! Coefficients may be JSON numbers or exact strings such as `"1/800"` or
//! `"-0.02"`; the original spelling is kept so a parsed document serialises
//! back to the same value.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::vectorfield::{FieldKind, TailEnvelope, TaylorVectorField};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(s) => parse_exact(s),
        }
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Float(x)
    }
}

impl Default for Number {
    fn default() -> Self {
        Number::Float(0.0)
    }
}

/// `"p/q"` or a decimal literal. A quotient is rounded once.
fn parse_exact(s: &str) -> Result<f64> {
    let bad = || Error::Problem(format!("cannot read {s:?} as a number"));
    let t = s.trim();
    let v = match t.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            p / q
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// 1-based component index.
    pub component: usize,
    pub alpha: Vec<u32>,
    pub re: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub component: usize,
    #[serde(rename = "C")]
    pub c: Number,
    pub r: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(rename = "L_mu", default, skip_serializing_if = "Option::is_none")]
    pub l_mu: Option<Number>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SchemeChoice {
    #[default]
    Auto,
    Uniform,
    Proportional,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_delta: Option<f64>,
    /// Lyapunov truncation degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assume_invariant: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema_version: u32,
    pub n: usize,
    pub mu: Number,
    pub kind: FieldKind,
    /// Degree of the stored table for analytic fields; defaults to the
    /// largest stored degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_degree: Option<u32>,
    pub coefficients: Vec<CoefficientSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_envelope: Option<Vec<TailSpec>>,
    /// Row-major `n×n` matrix of `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_of_basis: Option<Vec<Vec<[Number; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_rho: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub options: OptionsSpec,
}

impl ProblemSpec {
    /// Parses and validates; the field is built once to surface every
    /// coefficient error at load time.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Problem(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.kind == FieldKind::Polynomial && self.tail_envelope.is_some() {
            return Err(Error::Problem(
                "tail_envelope is only meaningful for analytic fields".into(),
            ));
        }
        self.field().map(|_| ())
    }

    pub fn mu(&self) -> Result<f64> {
        self.mu.value()
    }

    pub fn requested_rho(&self) -> Result<Option<f64>> {
        self.requested_rho.as_ref().map(Number::value).transpose()
    }

    pub fn reference_l_mu(&self) -> Result<Option<f64>> {
        self.reference
            .as_ref()
            .and_then(|r| r.l_mu.as_ref())
            .map(Number::value)
            .transpose()
    }

    fn coefficient_terms(&self) -> Result<Vec<(usize, MultiIndex, Complex64)>> {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.component == 0 || c.component > self.n {
                    return Err(Error::Problem(format!(
                        "coefficients[{i}].component = {} is outside 1..={}",
                        c.component, self.n
                    )));
                }
                if c.alpha.len() != self.n {
                    return Err(Error::Problem(format!(
                        "coefficients[{i}].alpha has length {}, expected {}",
                        c.alpha.len(),
                        self.n
                    )));
                }
                let re = c.re.value()?;
                let im = c.im.as_ref().map(Number::value).transpose()?.unwrap_or(0.0);
                Ok((
                    c.component - 1,
                    MultiIndex::new(c.alpha.clone()),
                    Complex64::new(re, im),
                ))
            })
            .collect()
    }

    /// The field in its given coordinates (before any change of basis).
    pub fn raw_field(&self) -> Result<TaylorVectorField> {
        let mu = self.mu()?;
        let terms = self.coefficient_terms()?;
        match self.kind {
            FieldKind::Polynomial => TaylorVectorField::polynomial(self.n, mu, terms),
            FieldKind::Analytic => {
                let top = terms.iter().map(|t| t.1.degree()).max().unwrap_or(1);
                let degree = self.truncation_degree.unwrap_or(top);
                let tail = match &self.tail_envelope {
                    None => None,
                    Some(list) => {
                        let mut env = vec![TailEnvelope::NONE; self.n];
                        for (i, t) in list.iter().enumerate() {
                            if t.component == 0 || t.component > self.n {
                                return Err(Error::Problem(format!(
                                    "tail_envelope[{i}].component = {} is outside 1..={}",
                                    t.component, self.n
                                )));
                            }
                            env[t.component - 1] = TailEnvelope {
                                c: t.c.value()?,
                                r: t.r.value()?,
                            };
                        }
                        Some(env)
                    }
                };
                TaylorVectorField::analytic(self.n, mu, degree, terms, tail)
            }
        }
    }

    pub fn change_of_basis(&self) -> Result<Option<DMatrix<Complex64>>> {
        let Some(rows) = &self.change_of_basis else {
            return Ok(None);
        };
        if rows.len() != self.n || rows.iter().any(|r| r.len() != self.n) {
            return Err(Error::Problem(format!(
                "change_of_basis must be {0}×{0}",
                self.n
            )));
        }
        let mut entries = Vec::with_capacity(self.n * self.n);
        for row in rows {
            for [re, im] in row {
                entries.push(Complex64::new(re.value()?, im.value()?));
            }
        }
        Ok(Some(DMatrix::from_row_slice(self.n, self.n, &entries)))
    }

    /// The field the pipelines work on: the change of basis applied when
    /// present.
    pub fn field(&self) -> Result<TaylorVectorField> {
        let raw = self.raw_field()?;
        match self.change_of_basis()? {
            Some(p) => raw.change_coordinates(&p),
            None => Ok(raw),
        }
    }
}
