//! Scalar special functions shared across modules: the Gaussian tail and its
//! inverse, binary entropy, `x log2(1/x)`, and the length/entropy map `psi`.

use std::f64::consts::{E, LN_2, PI, SQRT_2};

use libm::erfc;
use num_bigint::BigUint;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Standard Gaussian complementary cdf.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard Gaussian density.
pub fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Functional inverse of [`q_func`] on (0, 1).
pub fn qinv(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon, "(0, 1)"));
    }
    if epsilon == 0.5 {
        return Ok(0.0);
    }
    // Work in the tail where the argument of erfc_inv is small, then reflect.
    let (tail, sign) = if epsilon < 0.5 {
        (epsilon, 1.0)
    } else {
        (1.0 - epsilon, -1.0)
    };
    let mut x = SQRT_2 * erfc_inv(2.0 * tail);
    // Newton polish against the forward map; dQ/dx = -pdf.
    for _ in 0..3 {
        let pdf = gauss_pdf(x);
        if pdf <= 0.0 {
            break;
        }
        let step = (q_func(x) - tail) / pdf;
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

/// `pdf(Q^{-1}(eps))`, extended by continuity to 0 at eps in {0, 1}.
pub fn gauss_pdf_at_qinv(epsilon: f64) -> f64 {
    if epsilon <= 0.0 || epsilon >= 1.0 {
        0.0
    } else {
        gauss_pdf(qinv(epsilon).expect("epsilon checked"))
    }
}

/// `x log2(1/x)` with `phi(0) = 0`.
pub fn phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> f64 {
    phi(x) + phi(1.0 - x)
}

/// `eps log2(e/eps)`, 0 at eps = 0.
pub fn eps_log_e_over_eps(epsilon: f64) -> f64 {
    if epsilon <= 0.0 {
        0.0
    } else {
        epsilon * (E / epsilon).log2()
    }
}

/// `psi(x) = x + (1+x) log2(1+x) - x log2 x`, increasing on x >= 0.
pub fn psi(x: f64) -> f64 {
    x + (1.0 + x) * (1.0 + x).log2() + phi(x)
}

/// Inverse of [`psi`] by bisection; `psi(x) >= x` brackets the root in `[0, y]`.
pub fn psi_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, y);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Natural log of a big unsigned integer (`-inf` for zero).
pub fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        // Exactly representable range of f64 after rounding.
        return big_to_f64(n).ln();
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    big_to_f64(&top).ln() + shift as f64 * LN_2
}

/// Nearest f64 to a big unsigned integer (`inf` beyond range).
pub fn big_to_f64(n: &BigUint) -> f64 {
    use num_traits::ToPrimitive;
    n.to_f64().unwrap_or(f64::INFINITY)
}

/// `log2(1 + x)` written for readability at call sites.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qinv_known_points() {
        assert_eq!(qinv(0.5).unwrap(), 0.0);
        let eps = q_func(1.0);
        assert!((eps - 0.158_655_253_931_457_05).abs() < 1e-15, "{eps:e}");
        assert!((qinv(eps).unwrap() - 1.0).abs() < 1e-12);
        assert!(qinv(0.0).is_err());
        assert!(qinv(1.0).is_err());
    }

    #[test]
    fn qinv_forward_residual_and_monotone() {
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let eps = i as f64 / 1000.0;
            let x = qinv(eps).unwrap();
            assert!((q_func(x) - eps).abs() <= 1e-12, "eps={eps}");
            assert!(x < prev);
            prev = x;
        }
        for &eps in &[1e-3, 1e-6, 1e-9, 1e-12, 1e-15] {
            let x = qinv(eps).unwrap();
            assert!((q_func(x) - eps).abs() <= 1e-12 * eps.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn qinv_inverts_q_on_grid() {
        // For negative x the input Q(x) is near 1 and only known to one ulp;
        // the attainable accuracy there is ulp(Q(x)) / pdf(x).
        for i in -60..=60 {
            let x = i as f64 / 10.0;
            let eps = q_func(x);
            let back = qinv(eps).unwrap();
            let ulp = f64::EPSILON * eps;
            let tol = 1e-10_f64.max(4.0 * ulp / gauss_pdf(x));
            assert!((back - x).abs() <= tol, "x={x} back={back}");
            if x >= 0.0 {
                assert!((back - x).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn psi_inverse_property() {
        for &x in &[0.1, 1.0, 10.0, 100.0] {
            assert!((psi_inv(psi(x)) - x).abs() < 1e-9);
        }
        assert_eq!(psi_inv(0.0), 0.0);
    }

    #[test]
    fn phi_peak() {
        let peak = phi((-1.0_f64).exp());
        assert!((peak - LOG2_E / E).abs() < 1e-15);
        assert!((peak - 0.531).abs() < 1e-3);
        assert_eq!(binary_entropy(0.5), 1.0);
    }

    #[test]
    fn ln_big_matches_small_values() {
        let n = BigUint::from(1_000_000u64);
        assert!((ln_big(&n) - 1e6_f64.ln()).abs() < 1e-12);
        let big = BigUint::from(1u8) << 3000u32;
        assert!((ln_big(&big) - 3000.0 * LN_2).abs() < 1e-9);
    }
}
