//! Tail sums of geometric envelopes over monomial degree blocks.

use crate::multiindex::binomial;

/// Upper bound on `Σ_{m > after} C(m+n-1, n-1) · x^m`, the tail of a
/// geometric coefficient envelope summed over all monomials of degree `m`.
///
/// Returns `None` when the series diverges (`x >= 1`).
pub fn block_tail(n: usize, after: u32, x: f64) -> Option<f64> {
    assert!(x >= 0.0 && n >= 1);
    if x == 0.0 {
        return Some(0.0);
    }
    if x >= 1.0 {
        return None;
    }
    let nn = n as f64;
    let mut m = f64::from(after) + 1.0;
    // first term via logs so large degrees neither overflow nor underflow early
    let log_binom = (binomial(after as u64 + n as u64, n as u64 - 1) as f64).ln();
    let mut term = (log_binom + m * x.ln()).exp();
    let mut sum = 0.0;
    for _ in 0..1_000_000 {
        sum += term;
        // ratio of the next term to this one; decreasing in m towards x
        let q = x * (m + nn) / (m + 1.0);
        if q < 1.0 {
            let rest = term * q / (1.0 - q);
            if rest <= 1e-17 * sum || term == 0.0 {
                return Some(sum + rest);
            }
        }
        term *= q;
        m += 1.0;
    }
    Some(sum + term * x / (1.0 - x) * 2.0)
}
