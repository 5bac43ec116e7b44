use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::iidlimits::gaussian_main;
use crate::source::{Pmf, DEFAULT_ATOM_CAP};

use super::ball::ball_log_prob;
use super::distortion::DistortionSpec;
use super::rd::rd_solve;

/// Exact cutoff of the block d-tilted information against its Gaussian
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltedPoint {
    pub k: usize,
    /// `E[<sum_i j_S(S_i, d)>_eps]` in bits.
    pub exact: f64,
    /// `(1 - eps) k R(d) - sqrt(k V(d) / 2 pi) exp(-Qinv(eps)^2 / 2)`.
    pub main: f64,
    /// `exact - main`.
    pub remainder: f64,
    /// `-2 log2 k`.
    pub window_low: f64,
    /// `1.5 log2 k`.
    pub window_high: f64,
    /// `R(d)` in bits.
    pub rate: f64,
    /// `V(d)` in bits squared.
    pub dispersion: f64,
}

pub fn tilted_cutoff_expansion(
    base: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
    k_grid: &[usize],
) -> Result<Vec<TiltedPoint>> {
    check_epsilon(epsilon)?;
    let sol = rd_solve(base, dist, d)?;
    let atoms = sol.tilted_dist()?;
    let (rate, v) = (sol.rate, sol.dispersion());
    k_grid
        .iter()
        .map(|&k| {
            let sum = atoms.iid_sum(k, DEFAULT_ATOM_CAP)?;
            let exact = solve_cutoff(&sum, epsilon)?.expectation;
            let main = gaussian_main(k, rate, v, epsilon);
            let lk = (k as f64).log2();
            Ok(TiltedPoint {
                k,
                exact,
                main,
                remainder: exact - main,
                window_low: -2.0 * lk,
                window_high: 1.5 * lk,
                rate,
                dispersion: v,
            })
        })
        .collect()
}

/// Frequency with which the d-ball log-probability exceeds its refined
/// tilted-information upper estimate on random source blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub c1: f64,
    pub c2: f64,
    pub violations: u64,
    pub frequency: f64,
}

/// Samples `trials` blocks `S^k` and counts how often
/// `-log2 P_{Z*^k}(B_d(S^k)) > sum_i j(S_i, d) + log2(k)/2 + c2
///  - k lambda (d - dbar) + k c1 (d - dbar)^2`,
/// where `dbar = (1/k) sum_i E[d(S_i, Z*)]`.
#[allow(clippy::too_many_arguments)]
pub fn lemma3_mc_check(
    base: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    k: usize,
    trials: u64,
    seed: u64,
    c1: f64,
    c2: f64,
) -> Result<Lemma3Report> {
    if k == 0 {
        return Err(Error::InvalidBlockLength);
    }
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let sol = rd_solve(base, dist, d)?;
    let sampler = WeightedIndex::new(base.probs())
        .map_err(|e| Error::InvalidPmf(format!("cannot sample source: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<Vec<u32>, bool> = HashMap::new();
    let kf = k as f64;
    let mut violations = 0;
    for _ in 0..trials {
        let mut counts = vec![0u32; base.len()];
        for _ in 0..k {
            counts[sampler.sample(&mut rng)] += 1;
        }
        let violated = match cache.get(&counts) {
            Some(&v) => v,
            None => {
                let block: Vec<usize> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(a, &n)| std::iter::repeat_n(base.original_index(a), n as usize))
                    .collect();
                let lhs = ball_log_prob(dist, &sol.output_dist, &block, d)?;
                let (mut tilted, mut dsum) = (0.0, 0.0);
                for (a, &n) in counts.iter().enumerate() {
                    tilted += f64::from(n) * sol.tilted[a];
                    dsum += f64::from(n) * sol.expected_distortion[a];
                }
                let gap = d - dsum / kf;
                let rhs = tilted + 0.5 * kf.log2() + c2 - kf * sol.slope_lambda * gap
                    + kf * c1 * gap * gap;
                let v = lhs > rhs + 1e-9;
                cache.insert(counts, v);
                v
            }
        };
        violations += u64::from(violated);
    }
    Ok(Lemma3Report {
        k,
        trials,
        seed,
        c1,
        c2,
        violations,
        frequency: violations as f64 / trials as f64,
    })
}
