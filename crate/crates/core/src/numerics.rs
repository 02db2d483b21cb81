//! Numerical validation: flow integration, forward-invariance checks,
//! sampled Lyapunov decrease, convergence sweeps and finite-difference
//! generator checks.
//!
//! Every random draw comes from a ChaCha8 stream derived from the master seed
//! and a fixed task index, so results do not depend on the thread count.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lyapunov::LyapunovFunction;
use crate::poly::Polynomial;
use crate::vectorfield::TaylorVectorField;

pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest allowed `‖Δz‖∞ / ‖z‖∞` over a single step.
pub const GROWTH_GUARD: f64 = 0.5;

/// Sample chunk size; fixed so the seed → samples map is thread-independent.
const CHUNK: usize = 1024;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).map(f).collect()
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, TAU * rng.random::<f64>())
}

fn sup_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- invariance

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceCertificate {
    pub holds: bool,
    /// `|Re a_{l,l}| ρ − Σ_{α≠e_l} |a_{l,α}| ρ^{|α|} − tail_l` per component.
    pub margins: Vec<f64>,
}

/// Sufficient condition for forward invariance of `D^n(ρ)`: on each face
/// `|z_l| = ρ` the off-diagonal terms cannot overcome the linear pull, so
/// `Re(z̄_l F_l(z)) < 0`.
pub fn invariance_certificate(f: &TaylorVectorField, rho: f64) -> Result<InvarianceCertificate> {
    if !f.check_assumptions().jacobian_diagonal {
        return Err(Error::JacobianNotDiagonal("invariance certificate".into()));
    }
    let n = f.dim();
    let mut margins = Vec::with_capacity(n);
    for l in 0..n {
        let env = f.tail_of(l);
        let tail =
            env.weighted_tail(n, f.truncation_degree(), rho)
                .ok_or(Error::DivergentTail {
                    component: l + 1,
                    ratio: env.r * rho,
                })?;
        let mut parts: Vec<f64> = f
            .component(l)
            .iter()
            .filter(|(a, _)| a.as_unit() != Some(l))
            .map(|(a, c)| c.norm() * rho.powi(a.degree() as i32))
            .collect();
        parts.sort_by(f64::total_cmp);
        let off: f64 = parts.iter().sum::<f64>() + tail;
        margins.push(-f.diagonal(l).re * rho - off);
    }
    Ok(InvarianceCertificate {
        holds: margins.iter().all(|&m| m > 0.0),
        margins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundarySampling {
    pub violations: usize,
    pub samples: usize,
    pub per_face: Vec<usize>,
}

/// Draws `samples_per_face` points on each face `|z_l| = ρ` (uniform phase,
/// the other coordinates uniform in the disc) and counts
/// `Re(z̄_l F_l(z)) + ρ·tail_l >= 0`.
pub fn sample_boundary_invariance(
    f: &TaylorVectorField,
    rho: f64,
    samples_per_face: usize,
    seed: u64,
) -> BoundarySampling {
    let n = f.dim();
    let per_face = par_map(n, |l| {
        let tail = f
            .tail_of(l)
            .weighted_tail(n, f.truncation_degree(), rho)
            .unwrap_or(f64::INFINITY);
        let mut rng = rng_for(seed, l as u64);
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let mut count = 0;
        for _ in 0..samples_per_face {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = if i == l {
                    Complex64::from_polar(rho, TAU * rng.random::<f64>())
                } else {
                    uniform_in_disc(&mut rng, rho)
                };
            }
            f.eval_into(&z, &mut out);
            if (z[l].conj() * out[l]).re + rho * tail >= 0.0 {
                count += 1;
            }
        }
        count
    });
    BoundarySampling {
        violations: per_face.iter().sum(),
        samples: samples_per_face * n,
        per_face,
    }
}

// ---------------------------------------------------------------- integrator

/// Classical RK4 on `ż = F(z)`; complex arithmetic is the same scheme on the
/// `2n` real coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowIntegrator {
    pub h: f64,
    pub t_end: f64,
    /// Store every `record_every`-th state (the final state is always kept).
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    /// The trajectory left the domain polydisc and was stopped.
    pub exited: bool,
}

impl Trajectory {
    pub fn last(&self) -> &[Complex64] {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn final_norm(&self) -> f64 {
        sup_norm(self.last())
    }
}

struct Rk4Buffers {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Buffers {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Rk4Buffers {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

fn rk4_step_with(f: &TaylorVectorField, z: &mut [Complex64], h: f64, b: &mut Rk4Buffers) {
    let stage = |tmp: &mut [Complex64], z: &[Complex64], k: &[Complex64], w: f64| {
        for ((t, zi), ki) in tmp.iter_mut().zip(z).zip(k) {
            *t = zi + ki * w;
        }
    };
    f.eval_into(z, &mut b.k1);
    stage(&mut b.tmp, z, &b.k1, 0.5 * h);
    f.eval_into(&b.tmp, &mut b.k2);
    stage(&mut b.tmp, z, &b.k2, 0.5 * h);
    f.eval_into(&b.tmp, &mut b.k3);
    stage(&mut b.tmp, z, &b.k3, h);
    f.eval_into(&b.tmp, &mut b.k4);
    for (i, zi) in z.iter_mut().enumerate() {
        *zi += (b.k1[i] + (b.k2[i] + b.k3[i]) * 2.0 + b.k4[i]) * (h / 6.0);
    }
}

/// One RK4 step of size `h` from `z`.
pub fn rk4_step(f: &TaylorVectorField, z: &[Complex64], h: f64) -> Vec<Complex64> {
    let mut out = z.to_vec();
    rk4_step_with(f, &mut out, h, &mut Rk4Buffers::new(z.len()));
    out
}

impl FlowIntegrator {
    pub fn new(h: f64, t_end: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Integration(format!(
                "step must be positive, got {h}"
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Integration(format!(
                "end time must be non-negative, got {t_end}"
            )));
        }
        Ok(FlowIntegrator {
            h,
            t_end,
            record_every: 1,
        })
    }

    pub fn recording_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }

    fn steps(&self) -> usize {
        (self.t_end / self.h - 1e-9).ceil().max(0.0) as usize
    }

    pub fn integrate(&self, f: &TaylorVectorField, z0: &[Complex64]) -> Result<Trajectory> {
        if z0.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: z0.len(),
            });
        }
        let mu = f.mu();
        if sup_norm(z0) > mu * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain { radius: mu });
        }
        let steps = self.steps();
        let mut buf = Rk4Buffers::new(z0.len());
        let mut z = z0.to_vec();
        let mut times = vec![0.0];
        let mut states = vec![z.clone()];
        let mut exited = false;
        let mut t = 0.0;
        for s in 1..=steps {
            let h = if s == steps { self.t_end - t } else { self.h };
            let before = sup_norm(&z);
            let prev = z.clone();
            rk4_step_with(f, &mut z, h, &mut buf);
            t = if s == steps {
                self.t_end
            } else {
                s as f64 * self.h
            };
            let jump = prev
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if !z.iter().all(|c| c.re.is_finite() && c.im.is_finite())
                || jump > GROWTH_GUARD * before.max(f64::MIN_POSITIVE)
            {
                return Err(Error::Integration(format!(
                    "step at t = {t} exceeds the growth guard; reduce the step size"
                )));
            }
            let outside = sup_norm(&z) > mu;
            if s % self.record_every == 0 || s == steps || outside {
                times.push(t);
                states.push(z.clone());
            }
            if outside {
                exited = true;
                break;
            }
        }
        Ok(Trajectory {
            times,
            states,
            exited,
        })
    }
}

/// Trajectory CSV: `t, Re z_1, Im z_1, …` plus `V` when a Lyapunov function
/// is supplied.
pub fn write_trajectory_csv(
    mut w: impl Write,
    traj: &Trajectory,
    lyapunov: Option<&LyapunovFunction>,
) -> std::io::Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("re_z{i}"));
        header.push(format!("im_z{i}"));
    }
    if lyapunov.is_some() {
        header.push("V".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (t, z) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![format!("{t}")];
        for c in z {
            row.push(format!("{}", c.re));
            row.push(format!("{}", c.im));
        }
        if let Some(v) = lyapunov {
            row.push(format!("{}", v.value(z)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

// ------------------------------------------------------------------- sweeps

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub trajectories: usize,
    pub all_converged: bool,
    pub max_final_norm: f64,
    /// `V` non-increasing at every recorded checkpoint (when `V` is given).
    pub lyapunov_monotone: Option<bool>,
    pub exited: usize,
}

pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Integrates `trials` initial conditions drawn uniformly from `D^n(ρ)`.
pub fn convergence_sweep(
    f: &TaylorVectorField,
    rho: f64,
    trials: usize,
    integrator: &FlowIntegrator,
    seed: u64,
    lyapunov: Option<&LyapunovFunction>,
) -> Result<ConvergenceReport> {
    let n = f.dim();
    let runs = par_map(trials, |i| -> Result<(f64, bool, bool)> {
        let mut rng = rng_for(seed, 0x5eed_0000 + i as u64);
        let z0: Vec<Complex64> = (0..n).map(|_| uniform_in_disc(&mut rng, rho)).collect();
        let traj = integrator.integrate(f, &z0)?;
        let monotone = lyapunov.is_none_or(|v| {
            let values: Vec<f64> = traj.states.iter().map(|z| v.value(z)).collect();
            values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
        });
        Ok((traj.final_norm(), monotone, traj.exited))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let max_final_norm = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(ConvergenceReport {
        trajectories: trials,
        all_converged: runs.iter().all(|r| r.0 < CONVERGENCE_TOL && !r.2),
        max_final_norm,
        lyapunov_monotone: lyapunov.map(|_| runs.iter().all(|r| r.1)),
        exited: runs.iter().filter(|r| r.2).count(),
    })
}

// ------------------------------------------------------- generator vs. flow

/// `|(f(φ^Δt(z)) − f(z))/Δt − (F·∇f)(z)|`, with `φ^Δt` from one RK4 step.
pub fn generator_fd_check(
    f: &TaylorVectorField,
    obs: &Polynomial,
    z: &[Complex64],
    dt: f64,
) -> f64 {
    let moved = rk4_step(f, z, dt);
    let fd = (obs.eval(&moved) - obs.eval(z)) / dt;
    (fd - generator_apply(f, obs, z)).norm()
}

/// `(F·∇f)(z)`.
pub fn generator_apply(f: &TaylorVectorField, obs: &Polynomial, z: &[Complex64]) -> Complex64 {
    let fz = f.eval_unchecked(z);
    (0..f.dim())
        .map(|l| fz[l] * obs.derivative(l).eval(z))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorCheck {
    pub dt: f64,
    pub max_error: f64,
    /// `error(Δt) / error(Δt/2)`; close to 2 for a first-order difference.
    pub order_ratio: f64,
}

/// Runs [`generator_fd_check`] at `dt` and `dt/2`.
pub fn generator_fd_order(
    f: &TaylorVectorField,
    obs: &Polynomial,
    z: &[Complex64],
    dt: f64,
) -> GeneratorCheck {
    let e1 = generator_fd_check(f, obs, z, dt);
    let e2 = generator_fd_check(f, obs, z, dt / 2.0);
    GeneratorCheck {
        dt,
        max_error: e1.max(e2),
        order_ratio: e1 / e2,
    }
}

// ----------------------------------------------------------------- decrease

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecreaseReport {
    pub samples: usize,
    /// Samples with `V̇ >= 0`.
    pub violations: usize,
    /// Samples with `V <= 0`.
    pub positivity_violations: usize,
    /// Smallest `−V̇` observed.
    pub min_margin: f64,
    pub exclusion_radius: f64,
    pub linear_block_negative: bool,
}

/// Samples `D^n(radius)` minus the ball `‖z‖∞ < exclusion` and checks `V > 0`
/// and `V̇ < 0`.
pub fn sample_decrease(
    v: &LyapunovFunction,
    f: &TaylorVectorField,
    radius: f64,
    samples: usize,
    seed: u64,
    exclusion: f64,
) -> DecreaseReport {
    let n = f.dim();
    let chunks = samples.div_ceil(CHUNK);
    let parts = par_map(chunks, |c| {
        let mut rng = rng_for(seed, 0xdec0_0000 + c as u64);
        let count = CHUNK.min(samples - c * CHUNK);
        let (mut bad, mut nonpos, mut margin) = (0usize, 0usize, f64::INFINITY);
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..count {
            loop {
                for zi in z.iter_mut() {
                    *zi = uniform_in_disc(&mut rng, radius);
                }
                if sup_norm(&z) >= exclusion {
                    break;
                }
            }
            let d = v.derivative(f, &z);
            if d >= 0.0 {
                bad += 1;
            }
            if v.value(&z) <= 0.0 {
                nonpos += 1;
            }
            margin = margin.min(-d);
        }
        (bad, nonpos, margin)
    });
    DecreaseReport {
        samples,
        violations: parts.iter().map(|p| p.0).sum(),
        positivity_violations: parts.iter().map(|p| p.1).sum(),
        min_margin: parts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
        exclusion_radius: exclusion,
        linear_block_negative: v.linear_block_negative(f),
    }
}

// ------------------------------------------------------------------- report

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceSummary {
    pub certificate: bool,
    pub margins: Vec<f64>,
    pub sampled_violations: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rho: f64,
    pub invariance: InvarianceSummary,
    pub decrease: Option<DecreaseReport>,
    pub convergence: ConvergenceReport,
    pub generator_check: GeneratorCheck,
    pub seed: u64,
}

impl ValidationReport {
    /// Total count of failed checks (invariance samples, decrease samples,
    /// non-converged sweep).
    pub fn violations(&self) -> usize {
        self.invariance.sampled_violations
            + self
                .decrease
                .as_ref()
                .map_or(0, |d| d.violations + d.positivity_violations)
            + usize::from(!self.convergence.all_converged)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationConfig {
    /// Boundary samples per face and interior decrease samples.
    pub samples: usize,
    pub trials: usize,
    pub t_end: f64,
    pub h: f64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            samples: 10_000,
            trials: 100,
            t_end: 300.0,
            h: 1e-2,
            seed: 0,
        }
    }
}

pub const DECREASE_SHRINK: f64 = 0.999;
pub const DECREASE_EXCLUSION: f64 = 1e-6;

pub fn validate(
    f: &TaylorVectorField,
    rho: f64,
    lyapunov: Option<&LyapunovFunction>,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    let n = f.dim();
    let cert = invariance_certificate(f, rho)?;
    let sampled = sample_boundary_invariance(f, rho, cfg.samples, cfg.seed);
    let decrease = lyapunov.map(|v| {
        sample_decrease(
            v,
            f,
            rho * DECREASE_SHRINK,
            cfg.samples,
            cfg.seed,
            DECREASE_EXCLUSION,
        )
    });
    let integrator = FlowIntegrator::new(cfg.h, cfg.t_end)?
        .recording_every(((1.0 / cfg.h).round() as usize).max(1));
    let convergence = convergence_sweep(f, rho, cfg.trials, &integrator, cfg.seed, lyapunov)?;

    // observable Σ z_l² at a seeded point of modulus ρ/2
    let mut rng = rng_for(cfg.seed, 0xfd00);
    let z: Vec<Complex64> = (0..n)
        .map(|_| Complex64::from_polar(rho / 2.0, TAU * rng.random::<f64>()))
        .collect();
    let obs = (0..n).fold(Polynomial::zero(n), |acc, l| {
        &acc + &Polynomial::variable(n, l).pow(2)
    });
    let rate = (0..n)
        .map(|l| f.diagonal(l).norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    let generator_check = generator_fd_order(f, &obs, &z, 1e-3 / rate);

    Ok(ValidationReport {
        rho,
        invariance: InvarianceSummary {
            certificate: cert.holds,
            margins: cert.margins,
            sampled_violations: sampled.violations,
            samples: sampled.samples,
        },
        decrease,
        convergence,
        generator_check,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::koopman::apply_to_monomial;
    use crate::multiindex::{count_up_to_degree, MonomialIndexMap, MultiIndex};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn decay(mu: f64) -> TaylorVectorField {
        TaylorVectorField::polynomial(1, mu, [(0, mi(&[1]), c(-1.0))]).unwrap()
    }

    #[test]
    fn certificate_cases() {
        assert!(invariance_certificate(&decay(1.0), 0.7).unwrap().holds);

        let f = catalog::example1_transformed().unwrap();
        let cert = invariance_certificate(&f, 16.0).unwrap();
        assert!(cert.holds);
        // off-diagonal mass (4/1600)·256 = 0.64 on each face, against 6 and 2
        assert!((cert.margins[0] - 5.36).abs() < 1e-12);
        assert!((cert.margins[1] - 1.36).abs() < 1e-12);

        let g =
            TaylorVectorField::polynomial(1, 2.0, [(0, mi(&[1]), c(-1.0)), (0, mi(&[2]), c(2.0))])
                .unwrap();
        assert!(!invariance_certificate(&g, 1.0).unwrap().holds);

        assert!(matches!(
            invariance_certificate(&catalog::example1_raw().unwrap(), 1.0),
            Err(Error::JacobianNotDiagonal(_))
        ));
    }

    #[test]
    fn sampling_cases() {
        let f = catalog::example1_transformed().unwrap();
        assert_eq!(sample_boundary_invariance(&f, 16.0, 2000, 7).violations, 0);
        let g = catalog::example2(30).unwrap();
        assert_eq!(sample_boundary_invariance(&g, 5.0, 2000, 7).violations, 0);
        let out = TaylorVectorField::polynomial(1, 1.0, [(0, mi(&[1]), c(1.0))]).unwrap();
        let s = sample_boundary_invariance(&out, 1.0, 500, 1);
        assert_eq!(s.violations, 500);
    }

    #[test]
    fn integrator_closed_forms() {
        let traj = FlowIntegrator::new(1e-3, 1.0)
            .unwrap()
            .integrate(&decay(1.0), &[c(0.5)])
            .unwrap();
        assert!((traj.last()[0].re - 0.5 * (-1f64).exp()).abs() < 1e-8);
        assert!((traj.times.last().unwrap() - 1.0).abs() < 1e-15);

        let lin = TaylorVectorField::polynomial(
            2,
            2.0,
            [
                (0, mi(&[1, 0]), c(-3.0 / 8.0)),
                (1, mi(&[0, 1]), c(-1.0 / 8.0)),
            ],
        )
        .unwrap();
        let traj = FlowIntegrator::new(1e-2, 8.0)
            .unwrap()
            .integrate(&lin, &[c(1.0), c(1.0)])
            .unwrap();
        assert!((traj.last()[0].re - (-3f64).exp()).abs() < 1e-9);
        assert!((traj.last()[1].re - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn integrator_order() {
        let err = |h: f64| {
            let t = FlowIntegrator::new(h, 1.0)
                .unwrap()
                .integrate(&decay(1.0), &[c(0.5)])
                .unwrap();
            (t.last()[0].re - 0.5 * (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn integrator_errors_and_exit() {
        assert!(FlowIntegrator::new(0.0, 1.0).is_err());
        assert!(matches!(
            FlowIntegrator::new(1e-3, 1.0)
                .unwrap()
                .integrate(&decay(1.0), &[c(2.0)]),
            Err(Error::OutsideDomain { .. })
        ));
        let out = TaylorVectorField::polynomial(1, 1.0, [(0, mi(&[1]), c(1.0))]).unwrap();
        let t = FlowIntegrator::new(1e-2, 10.0)
            .unwrap()
            .integrate(&out, &[c(0.5)])
            .unwrap();
        assert!(t.exited);
        assert!(t.times.last().unwrap() < &1.0);
        // stiff step trips the guard
        let stiff = TaylorVectorField::polynomial(1, 1.0, [(0, mi(&[1]), c(-100.0))]).unwrap();
        assert!(matches!(
            FlowIntegrator::new(0.1, 1.0)
                .unwrap()
                .integrate(&stiff, &[c(0.5)]),
            Err(Error::Integration(_))
        ));
    }

    #[test]
    fn fd_cases() {
        let f = decay(1.0);
        let z2 = Polynomial::monomial(mi(&[2]), c(1.0));
        assert!((generator_apply(&f, &z2, &[c(0.5)]) - c(-0.5)).norm() < 1e-15);
        let check = generator_fd_order(&f, &z2, &[c(0.5)], 1e-3);
        assert!((1.6..=2.4).contains(&check.order_ratio), "{check:?}");
        assert_eq!(
            generator_fd_check(&f, &Polynomial::constant(1, c(3.0)), &[c(0.5)], 1e-3),
            0.0
        );
    }

    #[test]
    fn fd_against_generator_entries() {
        let f = catalog::example1_transformed().unwrap();
        let map = MonomialIndexMap::new(2);
        let z = [Complex64::new(1.5, -0.5), Complex64::new(-0.7, 1.1)];
        for k in 1..count_up_to_degree(2, 3) {
            let alpha = map.index_to_alpha(k);
            let obs = Polynomial::monomial(alpha.clone(), c(1.0));
            // L e_k = Σ_j G_jk e_j evaluated at z
            let exact: Complex64 = apply_to_monomial(&f, &alpha)
                .iter()
                .map(|(b, g)| g * b.eval(&z))
                .sum();
            assert!((exact - generator_apply(&f, &obs, &z)).norm() < 1e-12);
            let moved = rk4_step(&f, &z, 1e-5);
            let fd = (obs.eval(&moved) - obs.eval(&z)) / 1e-5;
            assert!((fd - exact).norm() < 1e-4, "k={k}");
        }
    }

    #[test]
    fn sweep_linear_field_with_lyapunov() {
        use crate::lyapunov::{build_lyapunov, WeightScheme};
        let f = TaylorVectorField::polynomial(
            2,
            1.0,
            [(0, mi(&[1, 0]), c(-1.0)), (1, mi(&[0, 1]), c(-0.5))],
        )
        .unwrap();
        let v = build_lyapunov(&f, 0.9, &WeightScheme::uniform(0.99).unwrap(), 4, 1e-6).unwrap();
        let integ = FlowIntegrator::new(1e-2, 40.0).unwrap().recording_every(50);
        let r = convergence_sweep(&f, 0.9, 20, &integ, 3, Some(&v)).unwrap();
        assert!(r.all_converged);
        assert_eq!(r.lyapunov_monotone, Some(true));
    }

    #[test]
    fn csv_layout() {
        let t = FlowIntegrator::new(0.5, 1.0)
            .unwrap()
            .integrate(&decay(1.0), &[c(0.5)])
            .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,re_z1,im_z1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.5,0"));
    }

    #[test]
    fn validation_is_deterministic() {
        let f = catalog::example1_transformed().unwrap();
        let cfg = ValidationConfig {
            samples: 500,
            trials: 4,
            t_end: 50.0,
            h: 0.05,
            seed: 11,
        };
        let a = serde_json::to_string(&validate(&f, 16.0, None, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&validate(&f, 16.0, None, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    fn small_field() -> impl Strategy<Value = TaylorVectorField> {
        (1usize..=2).prop_flat_map(|n| {
            let diag = proptest::collection::vec(-2.0f64..-0.1, n);
            let extra = proptest::collection::vec(
                (0..n, proptest::collection::vec(0u32..3, n), -0.3f64..0.3),
                0..6,
            );
            (diag, extra).prop_map(move |(diag, extra)| {
                let mut terms: Vec<_> = diag
                    .iter()
                    .enumerate()
                    .map(|(l, &d)| (l, MultiIndex::unit(n, l), c(d)))
                    .collect();
                for (l, e, v) in extra {
                    let a = MultiIndex::new(e);
                    if a.degree() >= 2 {
                        terms.push((l, a, c(v)));
                    }
                }
                TaylorVectorField::polynomial(n, 2.0, terms).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn certificate_implies_no_sampled_violation(f in small_field(), rho in 0.05f64..2.0, seed in 0u64..1000) {
            let cert = invariance_certificate(&f, rho).unwrap();
            if cert.holds {
                prop_assert_eq!(sample_boundary_invariance(&f, rho, 300, seed).violations, 0);
            }
        }
    }
}
