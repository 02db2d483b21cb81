//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::time::Instant;

use koopcert::catalog::{self, EXAMPLE2_MU, EXAMPLE2_REFERENCE_L_MU};
use koopcert::certify::{
    certify_analytic, certify_polynomial, compute_l_mu, polynomial_criterion, CertifyOptions,
};
use koopcert::koopman::generator_entry;
use koopcert::lyapunov::{
    build_lyapunov, convergence_radius, epsilon_sequence, q_sequence, CouplingTable,
    EpsilonSequence, WeightScheme, DEFAULT_SLACK, DEFAULT_SLACK_DELTA,
};
use koopcert::multiindex::count_up_to_degree;
use koopcert::numerics::{
    convergence_sweep, generator_fd_order, invariance_certificate, sample_boundary_invariance,
    sample_decrease, validate, FlowIntegrator, ValidationConfig,
};
use koopcert::poly::Polynomial;
use koopcert::{MonomialIndexMap, MultiIndex, TaylorVectorField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex::new(v.to_vec())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

struct Outcome {
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

// ------------------------------------------------------------------------ 1

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();

    let raw = catalog::example1_raw().unwrap();
    let derived = raw.change_coordinates(&catalog::example1_basis()).unwrap();
    let printed = catalog::example1_transformed().unwrap();
    let mut worst = 0.0f64;
    for l in 0..2 {
        for a in [
            mi(&[1, 0]),
            mi(&[0, 1]),
            mi(&[2, 0]),
            mi(&[1, 1]),
            mi(&[0, 2]),
        ] {
            worst = worst.max((derived.coeff(l, &a) - printed.coeff(l, &a)).norm());
        }
    }
    o.check(
        format!(
            "raw field through P reproduces the transformed coefficients (max diff {worst:.3e}; derived z1^2 coefficient {}, quoted {})",
            derived.coeff(0, &mi(&[2, 0])).re,
            printed.coeff(0, &mi(&[2, 0])).re
        ),
        worst <= 1e-12,
    );
    let from_raw = polynomial_criterion(&derived).unwrap();
    println!(
        "    info: pipeline from the raw field gives S = {}, KS/R = {}, rho_sup = {}",
        from_raw.s, from_raw.ratio, from_raw.rho_sup
    );

    let crit = polynomial_criterion(&printed).unwrap();
    o.check(format!("d = {}", crit.d), crit.d == 2);
    o.check(format!("K = {}", crit.k), crit.k == 6);
    o.check(format!("S = {}", crit.s), rel(crit.s, 1.0 / 800.0) <= 1e-12);
    o.check(format!("R = {}", crit.r), rel(crit.r, 1.0 / 8.0) <= 1e-12);
    o.check(
        format!("KS/R = {}", crit.ratio),
        rel(crit.ratio, 3.0 / 50.0) <= 1e-9,
    );
    o.check(
        format!("rho_sup = {}", crit.rho_sup),
        rel(crit.rho_sup, 50.0 / 3.0) <= 1e-9,
    );
    let opts = CertifyOptions::default();
    let at16 = certify_polynomial(&printed, 16.0, &opts).unwrap();
    let at17 = certify_polynomial(&printed, 17.0, &opts).unwrap();
    o.check("certifies rho = 16", at16.certified);
    o.check("rejects rho = 17", !at17.certified);
    let elapsed = start.elapsed().as_secs_f64();
    o.check(format!("runtime {elapsed:.3}s < 1s"), elapsed < 1.0);
    o
}

// ------------------------------------------------------------------------ 2

/// `Σ_{m>=2} x^m` and `Σ_{m>=2} (m−1) x^m` in closed form.
fn geometric_from_two(x: f64) -> f64 {
    x * x / (1.0 - x)
}

fn shifted_arithmetic_geometric(x: f64) -> f64 {
    x * x / ((1.0 - x) * (1.0 - x))
}

/// `L_10` of the two displayed series: `10 + 60 Σ_{m>=2} 3^{−m}` and
/// `10 + 4 Σ_{m>=2} (m−1) 2^{−m}`.
fn example2_l_mu_oracle(mu: f64) -> f64 {
    let first = mu + 2.0 * 30.0 * geometric_from_two(mu / 30.0);
    let second = mu + 4.0 * shifted_arithmetic_geometric(mu / 20.0);
    first + second
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let f = catalog::example2(60).unwrap();
    let enc = compute_l_mu(&f, EXAMPLE2_MU).unwrap();
    let oracle = example2_l_mu_oracle(EXAMPLE2_MU);
    o.check(
        format!("enclosure width {:.3e} < 1e-9 at N = 60", enc.width()),
        enc.width() < 1e-9,
    );
    o.check(
        format!(
            "enclosure [{}, {}] contains the closed-form oracle {oracle}",
            enc.lower, enc.upper
        ),
        enc.lower - 1e-12 <= oracle && oracle <= enc.upper + 1e-12,
    );
    let opts = CertifyOptions {
        reference_l_mu: Some(EXAMPLE2_REFERENCE_L_MU),
        ..CertifyOptions::default()
    };
    let cert = certify_analytic(&f, EXAMPLE2_MU, 0.29, &opts).unwrap();
    let json = serde_json::to_string(&cert).unwrap();
    let koopcert::certify::Criterion::Analytic(a) = &cert.criterion else {
        unreachable!()
    };
    o.check(
        format!(
            "report carries the quoted value {} and the computed one {}",
            EXAMPLE2_REFERENCE_L_MU, a.l_mu.upper
        ),
        a.reference_l_mu == Some(EXAMPLE2_REFERENCE_L_MU) && json.contains("reference_l_mu"),
    );
    let conservative = EXAMPLE2_REFERENCE_L_MU.max(enc.upper);
    o.check(
        format!("certification uses the larger L_mu = {}", a.l_mu_used),
        a.l_mu_used == conservative,
    );
    o.check(
        format!("rho_sup = {} = 10/L_mu", a.rho_sup),
        rel(a.rho_sup, EXAMPLE2_MU / conservative) <= 1e-9,
    );
    o.check(
        "certifies rho = 0.29 below the conservative bound",
        cert.certified,
    );
    let elapsed = start.elapsed().as_secs_f64();
    o.check(format!("runtime {elapsed:.3}s < 1s"), elapsed < 1.0);
    o
}

// ------------------------------------------------------------------------ 3

fn random_integer_field(rng: &mut ChaCha8Rng) -> TaylorVectorField {
    let n = rng.random_range(1..=3usize);
    let mut terms: Vec<(usize, MultiIndex, Complex64)> = (0..n)
        .map(|l| {
            (
                l,
                MultiIndex::unit(n, l),
                c(-f64::from(rng.random_range(1..=5))),
            )
        })
        .collect();
    let extra = rng.random_range(0..=(20 - n));
    for _ in 0..extra {
        let degree = rng.random_range(2..=4u32);
        let mut e = vec![0u32; n];
        for _ in 0..degree {
            e[rng.random_range(0..n)] += 1;
        }
        let re = f64::from(rng.random_range(-9..=9));
        let im = f64::from(rng.random_range(-9..=9));
        terms.push((
            rng.random_range(0..n),
            MultiIndex::new(e),
            Complex64::new(re, im),
        ));
    }
    TaylorVectorField::polynomial(n, 1.0, terms).unwrap()
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut mismatches, mut triangular_breaks, mut pairs) = (0usize, 0usize, 0usize);
    for _ in 0..200 {
        let f = random_integer_field(&mut rng);
        let n = f.dim();
        let map = MonomialIndexMap::new(n);
        let count = count_up_to_degree(n, 5);
        let comps = f.to_polynomials();
        for k in 1..count {
            let ak = map.index_to_alpha(k);
            let basis = Polynomial::monomial(ak.clone(), c(1.0));
            let image = comps
                .iter()
                .enumerate()
                .fold(Polynomial::zero(n), |acc, (l, fl)| {
                    &acc + &(fl * &basis.derivative(l))
                });
            for j in 1..count {
                let aj = map.index_to_alpha(j);
                let g = generator_entry(&f, &map, k, j);
                pairs += 1;
                if g != image.coeff(&aj) {
                    mismatches += 1;
                }
                if aj.degree() < ak.degree() && g != c(0.0) {
                    triangular_breaks += 1;
                }
            }
        }
    }
    o.check(
        format!("{pairs} index pairs, {mismatches} mismatches against the expansion oracle"),
        mismatches == 0,
    );
    o.check(
        format!("{triangular_breaks} nonzero entries below the degree diagonal"),
        triangular_breaks == 0,
    );
    let elapsed = start.elapsed().as_secs_f64();
    o.check(format!("runtime {elapsed:.2}s < 30s"), elapsed < 30.0);
    o
}

// ------------------------------------------------------------------------ 4

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let ex1 = catalog::example1_transformed().unwrap();
    let crit = polynomial_criterion(&ex1).unwrap();
    let upper = crit.rho_bound;
    let mut worst_row = 0.0f64;
    let mut recursion = true;
    let mut max_q = 0.0f64;
    let mut all_unit = true;
    for mu in [1.5, 4.0, 8.0, 16.0] {
        assert!(mu > 1.0 && mu < upper);
        let table = CouplingTable::build(&ex1.rescale(mu).unwrap(), 12).unwrap();
        let scheme = WeightScheme::uniform(DEFAULT_SLACK).unwrap();
        for j in 1..table.len() {
            worst_row = worst_row.max(scheme.row_sum(&table, j));
        }
        let q = q_sequence(&table, &scheme).unwrap();
        max_q = max_q.max(q.max());
        let degrees: Vec<u32> = table.alphas.iter().map(MultiIndex::degree).collect();
        let eps = epsilon_sequence(&q, &degrees, DEFAULT_SLACK_DELTA).unwrap();
        recursion &= eps.satisfies_recursion(&q);
        all_unit &= eps.values[1..].iter().all(|&e| e == 1.0);
    }
    let ex2 = catalog::example2(30).unwrap().rescale_to_unit().unwrap();
    let table = CouplingTable::build(&ex2, 12).unwrap();
    let scheme_b = WeightScheme::proportional(DEFAULT_SLACK).unwrap();
    let mut worst_b = 0.0f64;
    for j in 1..table.len() {
        worst_b = worst_b.max(scheme_b.row_sum(&table, j));
    }
    let q = q_sequence(&table, &scheme_b).unwrap();
    let degrees: Vec<u32> = table.alphas.iter().map(MultiIndex::degree).collect();
    recursion &= epsilon_sequence(&q, &degrees, DEFAULT_SLACK_DELTA)
        .unwrap()
        .satisfies_recursion(&q);

    o.check(
        format!("uniform scheme row sums <= 1 (max {worst_row})"),
        worst_row <= 1.0 + 1e-12,
    );
    o.check(
        format!("proportional scheme row sums < 1 (max {worst_b})"),
        worst_b < 1.0,
    );
    o.check(
        "every epsilon sequence satisfies the strict recursion",
        recursion,
    );
    o.check(
        format!("Example 1: all Q < 1 (max {max_q:.3e})"),
        max_q < 1.0,
    );
    o.check("Example 1: epsilon identically 1", all_unit);
    let map = MonomialIndexMap::new(2);
    let alphas = map.alphas_up_to_degree(12);
    let ones = EpsilonSequence {
        values: (0..alphas.len())
            .map(|k| if k == 0 { 0.0 } else { 1.0 })
            .collect(),
        degrees: alphas.iter().map(MultiIndex::degree).collect(),
        slack_delta: DEFAULT_SLACK_DELTA,
        growth_constant: 0.0,
    };
    let r = convergence_radius(&ones).radius;
    o.check(
        format!("convergence radius for unit epsilon = {r}"),
        r >= 0.999,
    );
    o
}

// ------------------------------------------------------------------------ 5

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let f = catalog::example1_transformed().unwrap();
    let scheme = WeightScheme::uniform(DEFAULT_SLACK).unwrap();
    let v = build_lyapunov(&f, 16.0, &scheme, 12, DEFAULT_SLACK_DELTA).unwrap();
    let d = sample_decrease(&v, &f, 16.0 * 0.999, 10_000, 5, 1e-6);
    o.check(
        format!(
            "{} samples, {} with dV/dt >= 0 (min margin {:.3e})",
            d.samples, d.violations, d.min_margin
        ),
        d.violations == 0,
    );
    o.check(
        format!("{} samples with V <= 0", d.positivity_violations),
        d.positivity_violations == 0,
    );
    o.check("degree-1 block negative definite", d.linear_block_negative);
    o
}

// ------------------------------------------------------------------------ 6

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let decay = TaylorVectorField::polynomial(1, 1.0, [(0, mi(&[1]), c(-1.0))]).unwrap();
    let exact = 0.5 * (-1f64).exp();
    let err = |h: f64| {
        let t = FlowIntegrator::new(h, 1.0)
            .unwrap()
            .integrate(&decay, &[c(0.5)])
            .unwrap();
        (t.last()[0] - c(exact)).norm()
    };
    let e = err(1e-3);
    o.check(format!("z(1) error {e:.2e} <= 1e-8 at h = 1e-3"), e <= 1e-8);
    let ratio = err(0.1) / err(0.05);
    o.check(
        format!("order ratio {ratio:.2} in [12, 20]"),
        (12.0..=20.0).contains(&ratio),
    );

    let ex1 = catalog::example1_transformed().unwrap();
    let integ = FlowIntegrator::new(1e-2, 300.0)
        .unwrap()
        .recording_every(100);
    let s1 = convergence_sweep(&ex1, 16.0, 100, &integ, 6, None).unwrap();
    o.check(
        format!(
            "Example 1, rho = 16: 100 trajectories, max final norm {:.2e}",
            s1.max_final_norm
        ),
        s1.all_converged,
    );
    let ex2 = catalog::example2(30).unwrap();
    let integ = FlowIntegrator::new(1e-2, 40.0)
        .unwrap()
        .recording_every(100);
    let s2 = convergence_sweep(&ex2, 0.29, 100, &integ, 6, None).unwrap();
    o.check(
        format!(
            "Example 2, rho = 0.29: 100 trajectories, max final norm {:.2e}",
            s2.max_final_norm
        ),
        s2.all_converged,
    );

    let obs = Polynomial::monomial(mi(&[2, 0]), c(1.0));
    let z = [Complex64::new(3.0, 1.0), Complex64::new(-2.0, 2.0)];
    let g = generator_fd_order(&ex1, &obs, &z, 1e-2);
    o.check(
        format!(
            "generator FD error ratio {:.3} in [1.6, 2.4]",
            g.order_ratio
        ),
        (1.6..=2.4).contains(&g.order_ratio),
    );
    o
}

// ------------------------------------------------------------------------ 7

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let ex1 = catalog::example1_transformed().unwrap();
    let ex2 = catalog::example2(30).unwrap();
    o.check(
        "Example 1 invariance certificate at rho = 16",
        invariance_certificate(&ex1, 16.0).unwrap().holds,
    );
    let b1 = sample_boundary_invariance(&ex1, 16.0, 10_000, 7);
    let b2 = sample_boundary_invariance(&ex2, 0.29, 10_000, 7);
    o.check(
        format!("Example 1 boundary sampling: {} violations", b1.violations),
        b1.violations == 0,
    );
    o.check(
        format!("Example 2 boundary sampling: {} violations", b2.violations),
        b2.violations == 0,
    );

    let v = build_lyapunov(
        &ex1,
        16.0,
        &WeightScheme::uniform(DEFAULT_SLACK).unwrap(),
        12,
        DEFAULT_SLACK_DELTA,
    )
    .unwrap();
    let cfg = ValidationConfig {
        samples: 2_000,
        trials: 8,
        t_end: 100.0,
        h: 0.05,
        seed: 42,
    };
    let a = serde_json::to_string(&validate(&ex1, 16.0, Some(&v), &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&validate(&ex1, 16.0, Some(&v), &cfg).unwrap()).unwrap();
    o.check(
        "identical seeds give byte-identical validation reports",
        a == b,
    );
    o
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("Example 1 end-to-end (polynomial criterion)", criterion_1),
        (
            "Example 2 end-to-end (discounted coefficient sum)",
            criterion_2,
        ),
        ("generator entries equal the expansion oracle", criterion_3),
        ("weights, Q table, epsilon recursion, radius", criterion_4),
        ("sampled Lyapunov decrease for Example 1", criterion_5),
        ("flow integration and sweeps", criterion_6),
        ("forward invariance and determinism", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let verdict = if outcome.passed() { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict}: {name}", i + 1);
        for (what, ok) in &outcome.checks {
            println!("    [{}] {what}", if *ok { "ok" } else { "failed" });
        }
        if !outcome.passed() {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
