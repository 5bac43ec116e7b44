//! Erokhin's function `H(S, eps)`: the least mutual information `I(S; Z)`
//! over channels with `P[S != Z] <= eps`, together with the bounds that tie
//! it to the cutoff of the information and to the optimal average length.

use serde::Serialize;

use crate::blahut::{hamming_matrix, BaOptions, RdProblem};
use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::optcode::{build_code, zero_error_length};
use crate::source::{entropy, Pmf};
use crate::special::{binary_entropy, eps_log_e_over_eps, phi, psi_inv, LOG2_E};

/// Tolerance on the water-level window test.
const WINDOW_TOL: f64 = 1e-13;

/// Parametric solution point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErokhinPoint {
    /// `H(S, eps)` in bits.
    pub value: f64,
    /// Number of symbols the optimal output distribution keeps.
    pub m: usize,
    /// Water level: every kept symbol loses this much mass to errors.
    pub water_level: f64,
    pub epsilon: f64,
}

/// Exact `H(S, eps)` in bits.
///
/// With the top `M` symbols kept and water level `w`,
/// `sum_{m<=M} P(m) = 1 - eps + (M - 1) w` and
/// `H = sum_{m<=M} P(m) log 1/P(m) - (1-eps) log 1/(1-eps) - (M-1) w log 1/w`.
/// `M` is the unique index whose level satisfies `P(M+1) <= w <= P(M)`.
pub fn erokhin_exact(p: &Pmf, epsilon: f64) -> Result<ErokhinPoint> {
    check_epsilon(epsilon)?;
    let ranked = p.ranked_probs();
    let n = ranked.len();
    if epsilon >= 1.0 - ranked[0] {
        return Ok(ErokhinPoint {
            value: 0.0,
            m: 1,
            water_level: 0.0,
            epsilon,
        });
    }
    let mut top = ranked[0];
    let mut head_entropy = phi(ranked[0]);
    for m in 2..=n {
        top += ranked[m - 1];
        head_entropy += phi(ranked[m - 1]);
        let level = (top - (1.0 - epsilon)) / (m - 1) as f64;
        let next = if m < n { ranked[m] } else { 0.0 };
        if level >= next - WINDOW_TOL && level <= ranked[m - 1] + WINDOW_TOL {
            let level = level.max(0.0);
            let value = head_entropy - phi(1.0 - epsilon) - (m - 1) as f64 * phi(level);
            return Ok(ErokhinPoint {
                value: value.max(0.0),
                m,
                water_level: level,
                epsilon,
            });
        }
    }
    Err(Error::NoValidParameter(epsilon))
}

/// Closed form for an equiprobable source on `m` symbols:
/// `log2 m - eps log2(m - 1) - h(eps)` for `eps < 1 - 1/m`, else 0.
pub fn erokhin_equiprobable(m: usize, epsilon: f64) -> f64 {
    let mf = m as f64;
    if m <= 1 || epsilon >= 1.0 - 1.0 / mf {
        return 0.0;
    }
    mf.log2() - epsilon * (mf - 1.0).log2() - binary_entropy(epsilon)
}

/// Constraint used by the iterative oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintForm {
    /// `P[S != Z] = eps`, solved by matching the slope.
    #[default]
    Equality,
    /// `P[S != Z] <= eps`, solved through the dual.
    Inequality,
}

/// Slope used to evaluate the zero-error endpoint with the iterative solver.
const ZERO_ERROR_SLOPE: f64 = 45.0;

/// `H(S, eps)` in bits from the Blahut-Arimoto solver on Hamming distortion.
pub fn erokhin_oracle(p: &Pmf, epsilon: f64) -> Result<f64> {
    erokhin_oracle_with(p, epsilon, ConstraintForm::Equality, BaOptions::default())
}

pub fn erokhin_oracle_with(
    p: &Pmf,
    epsilon: f64,
    form: ConstraintForm,
    opts: BaOptions,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let probs = p.probs();
    let dist = hamming_matrix(probs.len());
    let prob = RdProblem {
        p: probs,
        dist: &dist,
    };
    if probs.len() == 1 {
        return Ok(0.0);
    }
    if epsilon == 0.0 {
        let pt = prob.fixed_point(ZERO_ERROR_SLOPE, None, opts)?;
        return Ok(pt.rate * LOG2_E);
    }
    let nats = match form {
        ConstraintForm::Equality => {
            if epsilon >= prob.d_max() {
                // The inequality-constrained value is 0 from here on.
                return Ok(0.0);
            }
            prob.rate_equality(epsilon, opts)?.0
        }
        ConstraintForm::Inequality => prob.rate_inequality(epsilon, opts)?,
    };
    Ok(nats * LOG2_E)
}

/// Lower and upper bounds on a quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

fn check_below_top(p: &Pmf, epsilon: f64) -> Result<()> {
    if (0.0..1.0 - p.max_prob()).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon, "[0, 1 - P(1))"))
    }
}

/// `E<i(S)>_eps - eps log2(L*(0) + eps) - 2 h(eps) - eps log2(e/eps)
///  <= H(S, eps) <= E<i(S)>_eps`.
pub fn theorem1_bounds(p: &Pmf, epsilon: f64) -> Result<Bounds> {
    check_below_top(p, epsilon)?;
    let upper = solve_cutoff(&p.info_atoms(), epsilon)?.expectation;
    let penalty = if epsilon == 0.0 {
        0.0
    } else {
        epsilon * (zero_error_length(p) + epsilon).log2()
            + 2.0 * binary_entropy(epsilon)
            + eps_log_e_over_eps(epsilon)
    };
    Ok(Bounds {
        lower: upper - penalty,
        upper,
    })
}

/// Bounds on `L*(eps)` in terms of `H(S, eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthFromErokhin {
    /// `H - log2(H + 1) - log2 e`.
    pub lower: f64,
    /// `H + eps log2(H(S) + eps) + eps log2(e/eps) + 2 h(eps)`.
    pub upper: f64,
    /// `psi^{-1}(H)`, never below `lower` and never negative.
    pub psi_lower: f64,
}

pub fn theorem3_bounds(p: &Pmf, epsilon: f64) -> Result<LengthFromErokhin> {
    check_below_top(p, epsilon)?;
    let h = erokhin_exact(p, epsilon)?.value;
    let lower = h - (h + 1.0).log2() - LOG2_E;
    let upper = if epsilon == 0.0 {
        h
    } else {
        h + epsilon * (entropy(p) + epsilon).log2()
            + eps_log_e_over_eps(epsilon)
            + 2.0 * binary_entropy(epsilon)
    };
    Ok(LengthFromErokhin {
        lower,
        upper,
        psi_lower: psi_inv(h),
    })
}

/// `L*(eps) + log2(L*(eps) + 1) + log2 e`, an upper bound on `H(S, eps)`.
pub fn erokhin_upper_from_length(p: &Pmf, epsilon: f64) -> Result<f64> {
    let l = build_code(p, epsilon)?.avg_length;
    Ok(l + (l + 1.0).log2() + LOG2_E)
}

/// Bounds on the smallest entropy of a deterministic function of `S` that
/// equals `S` with probability at least `1 - eps`:
/// `E<i>_eps - phi(max{1-eps, 1/e}) <= H_0 <= E<i>_eps + phi(min{eps, 1/e})`.
pub fn hamming_h0eps_bounds(p: &Pmf, epsilon: f64) -> Result<Bounds> {
    check_epsilon(epsilon)?;
    let inv_e = (-1.0_f64).exp();
    let c = solve_cutoff(&p.info_atoms(), epsilon)?.expectation;
    Ok(Bounds {
        lower: c - phi((1.0 - epsilon).max(inv_e)),
        upper: c + phi(epsilon.min(inv_e)),
    })
}

/// Largest alphabet accepted by [`hamming_h0eps_exact`].
pub const H0EPS_MAX_SYMBOLS: usize = 12;

/// Exhaustive minimum of `H(f(S))` over deterministic `f` with
/// `P[f(S) != S] <= eps`, in bits.
///
/// Every `f` induces a partition of the alphabet; within a block the best
/// label is its most likely member, so the search runs over set partitions.
pub fn hamming_h0eps_exact(p: &Pmf, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let probs = p.probs();
    let n = probs.len();
    if n > H0EPS_MAX_SYMBOLS {
        return Err(Error::ScaleExceeded(format!(
            "{n} symbols exceed the partition search limit {H0EPS_MAX_SYMBOLS}"
        )));
    }
    let mut best = f64::INFINITY;
    let mut block_of = vec![0usize; n];
    let mut mass = vec![0.0_f64; n];
    let mut top = vec![0.0_f64; n];
    partitions(
        0,
        0,
        probs,
        &mut block_of,
        &mut mass,
        &mut top,
        epsilon,
        &mut best,
    );
    Ok(best.max(0.0))
}

#[allow(clippy::too_many_arguments)]
fn partitions(
    i: usize,
    blocks: usize,
    probs: &[f64],
    block_of: &mut [usize],
    mass: &mut [f64],
    top: &mut [f64],
    epsilon: f64,
    best: &mut f64,
) {
    if i == probs.len() {
        let correct: f64 = top[..blocks].iter().sum();
        if 1.0 - correct <= epsilon + 1e-12 {
            let h: f64 = mass[..blocks].iter().map(|&m| phi(m)).sum();
            *best = best.min(h);
        }
        return;
    }
    for b in 0..=blocks {
        let (old_mass, old_top) = (mass[b], top[b]);
        block_of[i] = b;
        mass[b] += probs[i];
        top[b] = top[b].max(probs[i]);
        partitions(
            i + 1,
            blocks.max(b + 1),
            probs,
            block_of,
            mass,
            top,
            epsilon,
            best,
        );
        mass[b] = old_mass;
        top[b] = old_top;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equiprobable_four_quarter() {
        let p = Pmf::uniform(4).unwrap();
        let pt = erokhin_exact(&p, 0.25).unwrap();
        let closed = 2.0 - 0.25 * 3f64.log2() - binary_entropy(0.25);
        assert_eq!(pt.m, 4);
        assert!((pt.water_level - 1.0 / 12.0).abs() < 1e-15);
        assert!((pt.value - closed).abs() < 1e-12);
        assert!((pt.value - 0.79248).abs() < 1e-5);
        assert!((erokhin_equiprobable(4, 0.25) - closed).abs() < 1e-15);
    }

    #[test]
    fn zero_epsilon_is_entropy() {
        let p = Pmf::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert!((erokhin_exact(&p, 0.0).unwrap().value - entropy(&p)).abs() < 1e-12);
    }

    #[test]
    fn window_rule_picks_valid_level() {
        // The first M with a positive level below P(M) is M = 2 here, but that
        // level (0.1) is smaller than P(3) = 0.2.
        let p = Pmf::new(vec![0.5, 0.3, 0.2]).unwrap();
        let pt = erokhin_exact(&p, 0.3).unwrap();
        assert_eq!(pt.m, 3);
        assert!((pt.water_level - 0.15).abs() < 1e-15);
        let oracle = erokhin_oracle(&p, 0.3).unwrap();
        assert!((pt.value - oracle).abs() < 1e-7, "{} vs {oracle}", pt.value);
    }

    #[test]
    fn beyond_top_is_zero() {
        let p = Pmf::new(vec![0.6, 0.4]).unwrap();
        assert_eq!(erokhin_exact(&p, 0.4).unwrap().value, 0.0);
        assert_eq!(erokhin_exact(&p, 0.9).unwrap().value, 0.0);
    }

    #[test]
    fn oracle_matches_binary_closed_form() {
        let p = Pmf::new(vec![0.89, 0.11]).unwrap();
        for &eps in &[0.0, 0.01, 0.05, 0.1] {
            let exact = erokhin_exact(&p, eps).unwrap().value;
            for form in [ConstraintForm::Equality, ConstraintForm::Inequality] {
                let o = erokhin_oracle_with(&p, eps, form, BaOptions::default()).unwrap();
                assert!((exact - o).abs() < 1e-7, "eps={eps} {form:?}");
            }
        }
    }

    #[test]
    fn theorem1_uniform4() {
        let p = Pmf::uniform(4).unwrap();
        let b = theorem1_bounds(&p, 0.25).unwrap();
        assert!((b.upper - 1.5).abs() < 1e-15);
        let h = erokhin_exact(&p, 0.25).unwrap().value;
        assert!(b.lower <= h && h <= b.upper);
        let b0 = theorem1_bounds(&p, 0.0).unwrap();
        assert!((b0.lower - 2.0).abs() < 1e-15 && (b0.upper - 2.0).abs() < 1e-15);
    }

    #[test]
    fn h0eps_uniform4_inside_bounds() {
        let p = Pmf::uniform(4).unwrap();
        let brute = hamming_h0eps_exact(&p, 0.25).unwrap();
        // Merge one symbol into another: {1/2, 1/4, 1/4} has entropy 1.5.
        assert!((brute - 1.5).abs() < 1e-12);
        let b = hamming_h0eps_bounds(&p, 0.25).unwrap();
        assert!(b.lower <= brute && brute <= b.upper);
        let b1 = hamming_h0eps_bounds(&p, 1.0).unwrap();
        assert!(b1.lower <= 0.0 && 0.0 <= b1.upper);
    }
}
