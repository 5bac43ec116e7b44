//! Optimal single-shot variable-length code with error probability `eps`.
//!
//! Symbols are ranked by decreasing probability and mapped to the binary
//! strings `"", "0", "1", "00", "01", ...` in that order, so rank `m` gets a
//! codeword of length `floor(log2 m)`. With error budget `eps`, every symbol
//! whose codeword is longer than a threshold length `eta` is sent to the
//! empty string, and within the threshold length class a fraction `alpha` of
//! the mass is sent to the empty string as well. The decoder is the inverse
//! of the zero-error map.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::source::{entropy, DiscreteDist, Pmf};

/// Tolerance used when comparing tail masses against `eps`.
const MASS_TOL: f64 = 1e-15;

/// Binary string, possibly empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Codeword {
    bits: Vec<bool>,
}

impl Codeword {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Codeword at 1-based lexicographic rank (rank 1 is the empty string).
    pub fn from_rank(rank: u128) -> Self {
        assert!(rank >= 1, "ranks start at 1");
        let len = 127 - rank.leading_zeros();
        let offset = rank - (1u128 << len);
        let bits = (0..len).rev().map(|i| (offset >> i) & 1 == 1).collect();
        Self { bits }
    }

    /// 1-based lexicographic rank: `2^len + value(bits)`.
    pub fn rank(&self) -> u128 {
        assert!(self.bits.len() < 127, "codeword too long for a u128 rank");
        self.bits
            .iter()
            .fold(1u128, |acc, &b| (acc << 1) | u128::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return write!(f, "\u{2205}");
        }
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Codeword {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s == "\u{2205}" {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// `floor(log2 rank)` for a 1-based rank.
pub fn codeword_length(rank: usize) -> u32 {
    debug_assert!(rank >= 1);
    usize::BITS - 1 - rank.leading_zeros()
}

/// The single randomized symbol of the boundary length class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundary {
    /// 1-based rank of the randomized symbol.
    pub rank: usize,
    /// Probability that this symbol is sent to the empty string.
    pub erase_prob: f64,
}

/// The optimal `(L, eps)` code for a pmf.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCode {
    pmf: Pmf,
    ranked: Vec<f64>,
    /// Smallest `M` with top-`M` mass at least `1 - eps`.
    pub m: usize,
    /// Threshold length `floor(log2 M)`.
    pub eta: u32,
    /// Erasure probability within the threshold length class.
    pub alpha: f64,
    pub epsilon: f64,
    /// Minimum average length `L*(eps)` in bits.
    pub avg_length: f64,
    /// True when `eps >= 1 - P(1)` and every symbol maps to the empty string.
    pub degenerate: bool,
    pub boundary: Boundary,
}

/// Total mass of ranks `[lo, hi]` (1-based, inclusive, clipped to the support).
fn rank_mass(ranked: &[f64], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(ranked.len());
    if lo > hi {
        return 0.0;
    }
    ranked[lo - 1..hi].iter().rev().sum()
}

/// Distribution of `floor(log2 rank)` for probabilities given in rank order.
pub fn length_distribution(ranked: &[f64]) -> DiscreteDist {
    let n = ranked.len();
    let top = codeword_length(n);
    let pairs = (0..=top)
        .map(|j| {
            let lo = 1usize << j;
            let hi = (1usize << (j + 1)) - 1;
            (j as f64, rank_mass(ranked, lo, hi))
        })
        .collect();
    DiscreteDist::from_pairs(pairs).expect("length classes carry positive mass")
}

/// Builds the optimal code for error probability `epsilon`.
pub fn build_code(p: &Pmf, epsilon: f64) -> Result<OptimalCode> {
    check_epsilon(epsilon)?;
    let ranked = p.ranked_probs();
    let n = ranked.len();

    // tail[m] = mass of ranks strictly greater than m, summed from the bottom.
    let mut tail = vec![0.0_f64; n + 1];
    for m in (0..n).rev() {
        tail[m] = tail[m + 1] + ranked[m];
    }
    let m = (1..=n)
        .find(|&m| tail[m] <= epsilon + MASS_TOL)
        .unwrap_or(n);

    if m == 1 {
        return Ok(OptimalCode {
            pmf: p.clone(),
            ranked,
            m: 1,
            eta: 0,
            alpha: 0.0,
            epsilon,
            avg_length: 0.0,
            degenerate: true,
            boundary: Boundary {
                rank: 1,
                erase_prob: 0.0,
            },
        });
    }

    let eta = codeword_length(m);
    let class_lo = 1usize << eta;
    let class_hi = ((1usize << (eta + 1)) - 1).min(n);
    let mass_class = rank_mass(&ranked, class_lo, class_hi);
    let mass_above = tail[class_hi];
    let mut alpha = ((epsilon - mass_above) / mass_class).clamp(0.0, 1.0);
    if alpha >= 1.0 {
        alpha = 1.0 - f64::EPSILON;
    }

    let below: f64 = (1..eta)
        .map(|j| {
            let lo = 1usize << j;
            j as f64 * rank_mass(&ranked, lo, 2 * lo - 1)
        })
        .sum();
    let avg_length = below + (1.0 - alpha) * eta as f64 * mass_class;

    // Single randomized symbol: smallest m0 in the class whose later class
    // members carry at most alpha of the class mass.
    let target = alpha * mass_class;
    let mut boundary = Boundary {
        rank: class_hi,
        erase_prob: 0.0,
    };
    for m0 in class_lo..=class_hi {
        let after = tail[m0] - tail[class_hi];
        if after <= target + MASS_TOL {
            let erase_prob = ((target - after) / ranked[m0 - 1]).clamp(0.0, 1.0);
            boundary = Boundary {
                rank: m0,
                erase_prob,
            };
            break;
        }
    }

    Ok(OptimalCode {
        pmf: p.clone(),
        ranked,
        m,
        eta,
        alpha,
        epsilon,
        avg_length,
        degenerate: false,
        boundary,
    })
}

impl OptimalCode {
    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    /// Probabilities in rank order.
    pub fn ranked(&self) -> &[f64] {
        &self.ranked
    }

    /// Probability that the codeword of rank `rank` is replaced by the empty
    /// string.
    pub fn erase_prob(&self, rank: usize) -> f64 {
        if self.degenerate {
            return 1.0;
        }
        let len = codeword_length(rank);
        match len.cmp(&self.eta) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => match rank.cmp(&self.boundary.rank) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => self.boundary.erase_prob,
            },
        }
    }

    /// Error probability of the code: erased symbols other than rank 1 are
    /// decoded incorrectly.
    pub fn error_probability(&self) -> f64 {
        (2..=self.ranked.len())
            .map(|r| self.erase_prob(r) * self.ranked[r - 1])
            .sum()
    }

    /// Per-length-class error profile `eps*` (0 below `eta`, `alpha` at
    /// `eta`, 1 above).
    pub fn class_error_profile(&self, rank: usize) -> f64 {
        if self.degenerate {
            return if rank == 1 { 0.0 } else { 1.0 };
        }
        match codeword_length(rank).cmp(&self.eta) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => self.alpha,
            std::cmp::Ordering::Greater => 1.0,
        }
    }

    /// Mean length of the deterministic variant that keeps the boundary
    /// symbol.
    pub fn deterministic_length(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let b = self.boundary;
        self.avg_length + b.erase_prob * self.ranked[b.rank - 1] * self.eta as f64
    }

    /// Encodes a support symbol; `coin` is a uniform draw in `[0, 1)` used
    /// only for the boundary symbol.
    pub fn encode(&self, symbol: usize, coin: f64) -> Result<Codeword> {
        let rank = self.pmf.rank(symbol)?;
        let erase = self.erase_prob(rank);
        if erase >= 1.0 || (erase > 0.0 && coin < erase) {
            Ok(Codeword::empty())
        } else {
            Ok(Codeword::from_rank(rank as u128))
        }
    }

    /// Inverse of the zero-error map.
    pub fn decode(&self, w: &Codeword) -> Result<usize> {
        let rank = w.rank();
        let n = self.ranked.len();
        if rank > n as u128 {
            return Err(Error::RankOutOfSupport { rank, support: n });
        }
        Ok(self
            .pmf
            .symbol_at_rank(rank as usize)
            .expect("rank within support"))
    }
}

/// `L*(0) = sum_i P[rank >= 2^i]`.
pub fn zero_error_length(p: &Pmf) -> f64 {
    let ranked = p.ranked_probs();
    let n = ranked.len();
    let mut total = 0.0;
    let mut i = 1u32;
    while (1usize << i) <= n {
        total += rank_mass(&ranked, 1usize << i, n);
        i += 1;
    }
    total
}

/// Minimum average length without randomization, achieved by keeping the
/// boundary symbol.
pub fn deterministic_length(p: &Pmf, epsilon: f64) -> Result<f64> {
    Ok(build_code(p, epsilon)?.deterministic_length())
}

/// Bounds on `L*(eps)` in terms of the cutoff of the information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `E<i(S)>_eps + L*(0) - H(S) <= L*(eps) <= E<i(S)>_eps`, for
/// `0 <= eps < 1 - P(1)`.
pub fn theorem2_bounds(p: &Pmf, epsilon: f64) -> Result<LengthBounds> {
    if !(0.0..1.0 - p.max_prob()).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon, "[0, 1 - P(1))"));
    }
    let upper = solve_cutoff(&p.info_atoms(), epsilon)?.expectation;
    let lower = upper + zero_error_length(p) - entropy(p);
    Ok(LengthBounds { lower, upper })
}

/// Outcome of simulating a code on its source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub errors: u64,
    pub emp_error: f64,
    pub emp_avg_len: f64,
    /// Three-sigma radius of the error frequency.
    pub error_ci: f64,
    /// Three-sigma radius of the mean length.
    pub len_ci: f64,
    pub expected_error: f64,
    pub expected_avg_len: f64,
    pub error_within_ci: bool,
    pub len_within_ci: bool,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    trials: u64,
    errors: u64,
    len_sum: u64,
    len_sq_sum: u64,
}

/// Samples `trials` symbols, encodes and decodes them, and compares the
/// empirical error rate and mean length with the code's exact values.
///
/// Worker `w` draws from a ChaCha stream keyed by `(seed, w)`; tallies are
/// integer counts, so the report is identical for a fixed worker count.
pub fn mc_validate(code: &OptimalCode, trials: u64, seed: u64, workers: usize) -> Result<McReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let workers = workers.max(1);
    let ranked = code.ranked();
    let mut cdf = Vec::with_capacity(ranked.len());
    let mut acc = 0.0;
    for &q in ranked {
        acc += q;
        cdf.push(acc);
    }
    let per = trials / workers as u64;
    let extra = trials % workers as u64;

    let tallies: Vec<Result<Tally>> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let n = per + u64::from((w as u64) < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut t = Tally::default();
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let rank = cdf.partition_point(|&c| c <= u).min(ranked.len() - 1) + 1;
                let symbol = code.pmf().symbol_at_rank(rank).expect("rank in support");
                let coin: f64 = rng.random();
                let word = code.encode(symbol, coin)?;
                let decoded = code.decode(&word)?;
                let len = word.len() as u64;
                t.trials += 1;
                t.errors += u64::from(decoded != symbol);
                t.len_sum += len;
                t.len_sq_sum += len * len;
            }
            Ok(t)
        })
        .collect();

    let mut total = Tally::default();
    for t in tallies {
        let t = t?;
        total.trials += t.trials;
        total.errors += t.errors;
        total.len_sum += t.len_sum;
        total.len_sq_sum += t.len_sq_sum;
    }
    let n = total.trials as f64;
    let emp_error = total.errors as f64 / n;
    let emp_avg_len = total.len_sum as f64 / n;
    let len_var = (total.len_sq_sum as f64 / n - emp_avg_len * emp_avg_len).max(0.0);
    let error_ci = 3.0 * (emp_error * (1.0 - emp_error) / n).sqrt();
    let len_ci = 3.0 * (len_var / n).sqrt();
    let expected_error = code.error_probability();
    let expected_avg_len = code.avg_length;
    Ok(McReport {
        trials,
        seed,
        workers,
        errors: total.errors,
        emp_error,
        emp_avg_len,
        error_ci,
        len_ci,
        expected_error,
        expected_avg_len,
        error_within_ci: (emp_error - expected_error).abs() <= error_ci + 1e-12,
        len_within_ci: (emp_avg_len - expected_avg_len).abs() <= len_ci + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4() -> Pmf {
        Pmf::uniform(4).unwrap()
    }

    #[test]
    fn codeword_enumeration() {
        let words: Vec<String> = (1..=7)
            .map(|r| Codeword::from_rank(r).to_string())
            .collect();
        assert_eq!(words, ["\u{2205}", "0", "1", "00", "01", "10", "11"]);
        for r in 1..200u128 {
            let w = Codeword::from_rank(r);
            assert_eq!(w.rank(), r);
            assert_eq!(w.len() as u32, codeword_length(r as usize));
        }
        assert_eq!("01".parse::<Codeword>().unwrap().rank(), 5);
    }

    #[test]
    fn uniform4_zero_error() {
        let code = build_code(&uniform4(), 0.0).unwrap();
        let lengths: Vec<u32> = (1..=4).map(codeword_length).collect();
        assert_eq!(lengths, [0, 1, 1, 2]);
        assert!((code.avg_length - 1.0).abs() < 1e-15);
        assert!((zero_error_length(&uniform4()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform4_quarter() {
        let code = build_code(&uniform4(), 0.25).unwrap();
        assert_eq!(code.m, 3);
        assert_eq!(code.eta, 1);
        assert_eq!(code.alpha, 0.0);
        assert!((code.avg_length - 0.5).abs() < 1e-15);
        assert!((deterministic_length(&uniform4(), 0.25).unwrap() - 0.5).abs() < 1e-15);
        // Rank-4 symbol is erased.
        let sym4 = code.pmf().symbol_at_rank(4).unwrap();
        assert!(code.encode(sym4, 0.99).unwrap().is_empty());
    }

    #[test]
    fn degenerate_regime() {
        let p = Pmf::new(vec![0.6, 0.3, 0.1]).unwrap();
        for eps in [0.4, 0.5, 1.0] {
            let code = build_code(&p, eps).unwrap();
            assert!(code.degenerate);
            assert_eq!(code.avg_length, 0.0);
        }
        assert!(!build_code(&p, 0.39).unwrap().degenerate);
    }

    #[test]
    fn zero_error_small_cases() {
        assert_eq!(zero_error_length(&Pmf::new(vec![1.0]).unwrap()), 0.0);
        assert!((zero_error_length(&Pmf::uniform(2).unwrap()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_coin() {
        let p = Pmf::new(vec![0.6, 0.4]).unwrap();
        let code = build_code(&p, 0.2).unwrap();
        assert_eq!(code.eta, 1);
        assert!((code.alpha - 0.5).abs() < 1e-15);
        assert_eq!(code.boundary.rank, 2);
        let sym = code.pmf().symbol_at_rank(2).unwrap();
        assert_eq!(code.encode(sym, 0.7).unwrap().to_string(), "0");
        assert!(code.encode(sym, 0.2).unwrap().is_empty());
    }

    #[test]
    fn rank_one_is_empty_codeword() {
        let p = Pmf::new(vec![0.1, 0.5, 0.4]).unwrap();
        let code = build_code(&p, 0.05).unwrap();
        let w = code.encode(1, 0.3).unwrap();
        assert!(w.is_empty());
        assert_eq!(code.decode(&w).unwrap(), 1);
    }

    #[test]
    fn decode_lexicographic() {
        let p = Pmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let code = build_code(&p, 0.0).unwrap();
        assert_eq!(code.decode(&Codeword::empty()).unwrap(), 3);
        assert_eq!(code.decode(&"0".parse().unwrap()).unwrap(), 2);
        assert_eq!(code.decode(&"1".parse().unwrap()).unwrap(), 1);
        assert_eq!(code.decode(&"00".parse().unwrap()).unwrap(), 0);
        assert!(matches!(
            code.decode(&"01".parse().unwrap()),
            Err(Error::RankOutOfSupport { rank: 5, .. })
        ));
        for s in 0..4 {
            let w = code.encode(s, 0.5).unwrap();
            assert_eq!(code.decode(&w).unwrap(), s);
        }
        assert!(matches!(code.encode(9, 0.5), Err(Error::UnknownSymbol(9))));
    }

    #[test]
    fn error_profile_expectation_is_epsilon() {
        let p = Pmf::new(vec![0.3, 0.25, 0.2, 0.1, 0.08, 0.07]).unwrap();
        for i in 0..30 {
            let eps = i as f64 * 0.01;
            let code = build_code(&p, eps).unwrap();
            if code.degenerate {
                continue;
            }
            let expected: f64 = (1..=p.len())
                .map(|r| code.class_error_profile(r) * code.ranked()[r - 1])
                .sum();
            assert!((expected - eps).abs() < 1e-12, "eps={eps}");
            assert!((code.error_probability() - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn theorem2_uniform4() {
        let b = theorem2_bounds(&uniform4(), 0.25).unwrap();
        assert!((b.upper - 1.5).abs() < 1e-15);
        assert!((b.lower - 0.5).abs() < 1e-15);
        assert!(theorem2_bounds(&uniform4(), 0.75).is_err());
    }

    #[test]
    fn mc_trivial_cases() {
        let code = build_code(&Pmf::new(vec![0.5, 0.3, 0.2]).unwrap(), 0.0).unwrap();
        let r = mc_validate(&code, 10_000, 1, 2).unwrap();
        assert_eq!(r.errors, 0);
        let single = build_code(&Pmf::new(vec![1.0]).unwrap(), 0.0).unwrap();
        let r = mc_validate(&single, 1000, 1, 1).unwrap();
        assert_eq!(r.emp_avg_len, 0.0);
        assert!(mc_validate(&single, 0, 1, 1).is_err());
    }
}
