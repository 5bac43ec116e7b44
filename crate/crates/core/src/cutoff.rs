//! The epsilon-cutoff of a discrete random variable.
//!
//! `<X>_eps` keeps `X` below a threshold `eta`, sends everything above it to
//! 0, and at `eta` itself sends a fraction `alpha` of the mass to 0, where
//! `P[X > eta] + alpha P[X = eta] = eps`.

use serde::Serialize;

use crate::error::{check_epsilon, Result};
use crate::source::DiscreteDist;

/// Threshold pair and resulting expectation of `<X>_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSpec {
    /// Threshold atom; `-inf` when all mass is cut.
    pub eta: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// `E[<X>_eps]`.
    pub expectation: f64,
    /// `P[X > eta]`.
    pub mass_above: f64,
    /// `P[X = eta]`.
    pub mass_at: f64,
}

/// Solves for `(eta, alpha)` by scanning atoms from the largest value down.
///
/// At an exact boundary (tail mass equal to `eps` at an atom) the scan moves
/// on to the next atom and returns `alpha = 0` there.
pub fn solve_cutoff(dist: &DiscreteDist, epsilon: f64) -> Result<CutoffSpec> {
    check_epsilon(epsilon)?;
    let atoms = dist.atoms();
    let mut above = 0.0_f64;
    for (i, atom) in atoms.iter().enumerate().rev() {
        if above + atom.prob > epsilon {
            let alpha = ((epsilon - above) / atom.prob).clamp(0.0, 1.0);
            let alpha = if alpha >= 1.0 {
                1.0 - f64::EPSILON
            } else {
                alpha
            };
            let below: f64 = atoms[..i].iter().map(|a| a.value * a.prob).sum();
            let expectation = below + (1.0 - alpha) * atom.value * atom.prob;
            return Ok(CutoffSpec {
                eta: atom.value,
                alpha,
                epsilon,
                expectation,
                mass_above: above,
                mass_at: atom.prob,
            });
        }
        above += atom.prob;
    }
    Ok(CutoffSpec {
        eta: f64::NEG_INFINITY,
        alpha: 0.0,
        epsilon,
        expectation: 0.0,
        mass_above: above,
        mass_at: 0.0,
    })
}

/// `E[<X>_eps]` as the value of the linear program
/// `min E[(1 - e(X)) X]` over error profiles `e: R -> [0, 1]` with
/// `E[e(X)] <= eps`.
///
/// Solved as a fractional knapsack: spend the budget on the atoms with the
/// largest positive values. For nonnegative `X` this equals
/// [`solve_cutoff`]'s expectation.
pub fn cutoff_expectation_variational(dist: &DiscreteDist, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let mut by_value: Vec<(f64, f64)> = dist.atoms().iter().map(|a| (a.value, a.prob)).collect();
    by_value.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut budget = epsilon;
    let mut objective = 0.0;
    for (value, prob) in by_value {
        let erased = if value > 0.0 && budget > 0.0 {
            let e = (budget / prob).min(1.0);
            budget -= e * prob;
            e
        } else {
            0.0
        };
        objective += (1.0 - erased) * value * prob;
    }
    Ok(objective)
}
