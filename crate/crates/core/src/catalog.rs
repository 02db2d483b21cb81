//! The two worked systems used throughout the tests, the CLI samples and the
//! browser demo.
//!
//! * Example 1: `F = (a(z₁ − z₂/(ac)), a(z₂ − z₁/(ac) + b z₁²))` with
//!   `a = −1/4, c = 8, b = −1/50`, diagonalised by `P = [[1, −1], [1, 1]]`.
//! * Example 2: `F = (a(z₁ − 2z₂²/(c − z₂)), a(z₂ − b z₁²/(d − z₁)²))` with
//!   `a = −1, b = 4, c = 30, d = 20` on the bidisc of radius 10.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::multiindex::MultiIndex;
use crate::vectorfield::{TailEnvelope, TaylorVectorField};

const A1: f64 = -0.25;
const C1: f64 = 8.0;
const B1: f64 = -0.02;

/// Domain radius used for Example 1. The second equilibrium sits at
/// `(−75, 150)`, so any radius below 75 keeps the origin isolated.
pub const EXAMPLE1_MU: f64 = 50.0;

pub const EXAMPLE2_MU: f64 = 10.0;

/// Reference value of the discounted coefficient sum quoted for Example 2.
pub const EXAMPLE2_REFERENCE_L_MU: f64 = 73.0 / 3.0;

/// Growth rate used for the second component's tail envelope; anything in
/// `]1/20, 1/10[` gives a convergent bound at radius 10.
pub const EXAMPLE2_TAIL_RATE: f64 = 1.0 / 18.0;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex::new(v.to_vec())
}

/// Example 1 in its original coordinates (non-diagonal Jacobian).
pub fn example1_raw() -> Result<TaylorVectorField> {
    let inv_ac = 1.0 / (A1 * C1);
    TaylorVectorField::polynomial(
        2,
        EXAMPLE1_MU,
        [
            (0, mi(&[1, 0]), c(A1)),
            (0, mi(&[0, 1]), c(-A1 * inv_ac)),
            (1, mi(&[0, 1]), c(A1)),
            (1, mi(&[1, 0]), c(-A1 * inv_ac)),
            (1, mi(&[2, 0]), c(A1 * B1)),
        ],
    )
}

pub fn example1_basis() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(1.0), c(1.0)])
}

/// Example 1 in diagonal coordinates with the quadratic coefficients
/// `(a²b/2)(ẑ₁² − 2ẑ₁ẑ₂ + ẑ₂²)` as they are quoted in the literature.
///
/// Note that [`example1_raw`] pushed through [`example1_basis`] yields
/// `(ab/2)(ẑ₁ − ẑ₂)²` instead; see the acceptance suite.
pub fn example1_transformed() -> Result<TaylorVectorField> {
    let q = A1 * A1 * B1 / 2.0;
    let mut terms = vec![
        (0, mi(&[1, 0]), c(A1 - 1.0 / C1)),
        (1, mi(&[0, 1]), c(A1 + 1.0 / C1)),
    ];
    for l in 0..2 {
        terms.push((l, mi(&[2, 0]), c(q)));
        terms.push((l, mi(&[1, 1]), c(-2.0 * q)));
        terms.push((l, mi(&[0, 2]), c(q)));
    }
    TaylorVectorField::polynomial(2, EXAMPLE1_MU, terms)
}

/// `|a_{2,(m,0)}| = 4(m − 1)/20^m`.
fn example2_second_coeff(m: u32) -> f64 {
    4.0 * f64::from(m - 1) / 20f64.powi(m as i32)
}

/// Smallest `C` with `4(m−1)/20^m <= C · r^m` for all `m > n_trunc`.
fn example2_second_envelope(n_trunc: u32) -> f64 {
    // (m-1)(20r)^{-m} is unimodal in m, so scan until it starts falling
    let ratio = 1.0 / (20.0 * EXAMPLE2_TAIL_RATE);
    let mut best = 0.0f64;
    let mut m = n_trunc.max(1) + 1;
    loop {
        let v = 4.0 * f64::from(m - 1) * ratio.powi(m as i32);
        if v < best {
            break;
        }
        best = v;
        m += 1;
    }
    best
}

/// Example 2 truncated at degree `n_trunc` with geometric tail envelopes
/// `|a_{1,(0,m)}| = 60·(1/30)^m` and the second component bounded at rate
/// [`EXAMPLE2_TAIL_RATE`].
pub fn example2(n_trunc: u32) -> Result<TaylorVectorField> {
    let mut terms = vec![(0, mi(&[1, 0]), c(-1.0)), (1, mi(&[0, 1]), c(-1.0))];
    for m in 2..=n_trunc {
        terms.push((0, mi(&[0, m]), c(2.0 / 30f64.powi(m as i32 - 1))));
        terms.push((1, mi(&[m, 0]), c(example2_second_coeff(m))));
    }
    let tail = vec![
        TailEnvelope {
            c: 60.0,
            r: 1.0 / 30.0,
        },
        TailEnvelope {
            c: example2_second_envelope(n_trunc),
            r: EXAMPLE2_TAIL_RATE,
        },
    ];
    TaylorVectorField::analytic(2, EXAMPLE2_MU, n_trunc, terms, Some(tail))
}

/// The untruncated rational form of Example 2.
pub fn example2_closed_form(z: &[Complex64]) -> Vec<Complex64> {
    let (z1, z2) = (z[0], z[1]);
    vec![
        -(z1 - 2.0 * z2 * z2 / (30.0 - z2)),
        -(z2 - 4.0 * z1 * z1 / ((20.0 - z1) * (20.0 - z1))),
    ]
}
