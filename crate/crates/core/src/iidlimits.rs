//! Exact finite-blocklength limits for memoryless sources and their Gaussian
//! approximation.
//!
//! All strings of one type class are equiprobable, so the rank-ordered
//! product pmf is a sequence of constant-probability runs. Ranks are tracked
//! with big integers and every quantity that depends on individual ranks
//! (codeword lengths, water levels) is evaluated per run in closed form.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::source::{
    composition_count, compositions, entropy, varentropy, DiscreteDist, Pmf, ProductSource,
    DEFAULT_ATOM_CAP,
};
use crate::special::{gauss_pdf_at_qinv, ln_big, LOG2_E};

pub use crate::special::qinv;

/// Default cap on the number of type classes.
pub const DEFAULT_TYPE_CAP: u128 = 2_000_000;

/// One run of equiprobable strings (one or more merged type classes).
#[derive(Debug, Clone, PartialEq)]
pub struct TypeRow {
    /// Symbol counts of the first merged type, indexed like the base pmf.
    pub composition: Vec<u32>,
    /// Natural log of the per-string probability.
    pub log_prob: f64,
    /// Number of strings in the run.
    pub count: BigUint,
    /// First 1-based rank of the run.
    pub rank_start: BigUint,
    /// Last 1-based rank of the run.
    pub rank_end: BigUint,
}

impl TypeRow {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }

    /// Total probability of the run.
    pub fn mass(&self) -> f64 {
        (ln_big(&self.count) + self.log_prob).exp()
    }

    /// Information of each string in the run, bits.
    pub fn information(&self) -> f64 {
        -self.log_prob * LOG2_E
    }
}

/// Rank-ordered runs of a product source.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeTable {
    pub k: usize,
    pub rows: Vec<TypeRow>,
}

fn multinomial(k: usize, comp: &[u32]) -> BigUint {
    // Product of binomials C(k - prefix, n_j).
    let mut acc = BigUint::one();
    let mut remaining = k as u64;
    for &n in comp {
        let n = u64::from(n);
        acc *= binomial(remaining, n);
        remaining -= n;
    }
    acc
}

fn binomial(n: u64, r: u64) -> BigUint {
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn logs_merge(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Builds the run table for `src`, merging type classes of equal per-string
/// probability.
pub fn build_type_table(src: &ProductSource) -> Result<TypeTable> {
    build_type_table_capped(src, DEFAULT_TYPE_CAP)
}

pub fn build_type_table_capped(src: &ProductSource, cap: u128) -> Result<TypeTable> {
    let k = src.k();
    let probs = src.base().probs();
    let types = composition_count(k, probs.len());
    if types > cap {
        return Err(Error::TypeCapExceeded { types, cap });
    }
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut typed: Vec<(f64, Vec<u32>)> = compositions(k, probs.len())
        .into_iter()
        .map(|c| {
            let lp = c
                .iter()
                .zip(&ln_p)
                .map(|(&n, &l)| if n == 0 { 0.0 } else { n as f64 * l })
                .sum();
            (lp, c)
        })
        .collect();
    typed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.cmp(&a.1)));

    let mut rows: Vec<TypeRow> = Vec::new();
    let mut next_rank = BigUint::one();
    for (lp, comp) in typed {
        let count = multinomial(k, &comp);
        match rows.last_mut() {
            Some(last) if logs_merge(last.log_prob, lp) => {
                last.count += &count;
                last.rank_end += &count;
            }
            _ => {
                let rank_end = &next_rank + &count - 1u32;
                rows.push(TypeRow {
                    composition: comp,
                    log_prob: lp,
                    count,
                    rank_start: next_rank.clone(),
                    rank_end,
                });
            }
        }
        next_rank = &rows.last().expect("row pushed").rank_end + 1u32;
    }
    Ok(TypeTable { k, rows })
}

impl TypeTable {
    pub fn total_mass(&self) -> f64 {
        self.rows.iter().map(TypeRow::mass).sum()
    }

    /// Total number of strings.
    pub fn size(&self) -> BigUint {
        self.rows
            .last()
            .map(|r| r.rank_end.clone())
            .unwrap_or_default()
    }

    /// Probability of the most likely string.
    pub fn max_prob(&self) -> f64 {
        self.rows[0].prob()
    }

    /// Mass of each codeword length `j = floor(log2 rank)` of the zero-error
    /// code, computed per run by intersecting rank ranges with the dyadic
    /// blocks `[2^j, 2^{j+1} - 1]`.
    pub fn length_class_masses(&self) -> Vec<f64> {
        let top = self.size().bits().saturating_sub(1) as usize;
        let mut masses = vec![0.0; top + 1];
        for row in &self.rows {
            let j_lo = row.rank_start.bits() - 1;
            let j_hi = row.rank_end.bits() - 1;
            for j in j_lo..=j_hi {
                let block_lo = BigUint::one() << j;
                let block_hi = (BigUint::one() << (j + 1)) - 1u32;
                let lo = if row.rank_start > block_lo {
                    row.rank_start.clone()
                } else {
                    block_lo
                };
                let hi = if row.rank_end < block_hi {
                    row.rank_end.clone()
                } else {
                    block_hi
                };
                let overlap = hi - lo + 1u32;
                masses[j as usize] += (ln_big(&overlap) + row.log_prob).exp();
            }
        }
        masses
    }
}

/// Blockwise optimal code summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCode {
    pub k: usize,
    pub epsilon: f64,
    /// `L*_{S^k}(eps)` in bits.
    pub avg_length: f64,
    /// Threshold codeword length.
    pub eta: u64,
    /// Erasure fraction of the threshold length class.
    pub alpha: f64,
    /// Smallest number of kept strings, as a decimal string.
    pub m: String,
}

/// Exact `L*_{S^k}(eps)` from the run table.
pub fn lstar_exact(src: &ProductSource, epsilon: f64) -> Result<f64> {
    Ok(block_code(&build_type_table(src)?, epsilon)?.avg_length)
}

/// Optimal code statistics from an existing table.
pub fn block_code(table: &TypeTable, epsilon: f64) -> Result<BlockCode> {
    check_epsilon(epsilon)?;
    let masses = table.length_class_masses();
    let dist = DiscreteDist::from_pairs(
        masses
            .iter()
            .enumerate()
            .map(|(j, &m)| (j as f64, m))
            .collect(),
    )?;
    let cut = solve_cutoff(&dist, epsilon)?;
    let eta = cut.eta.max(0.0) as u64;
    Ok(BlockCode {
        k: table.k,
        epsilon,
        avg_length: cut.expectation,
        eta,
        alpha: cut.alpha,
        m: kept_strings(table, epsilon).to_string(),
    })
}

/// Smallest `M` whose top-`M` mass reaches `1 - eps`.
fn kept_strings(table: &TypeTable, epsilon: f64) -> BigUint {
    let need = 1.0 - epsilon;
    let mut cum = 0.0;
    for row in &table.rows {
        let mass = row.mass();
        if cum + mass >= need - 1e-15 {
            let q = row.prob();
            let extra = ((need - cum) / q).ceil().max(1.0);
            let extra = BigUint::from(extra.to_u128().unwrap_or(u128::MAX)).min(row.count.clone());
            return &row.rank_start + extra - 1u32;
        }
        cum += mass;
    }
    table.size()
}

/// `E[<i(S^k)>_eps]` in bits.
pub fn einfo_cutoff_exact(src: &ProductSource, epsilon: f64) -> Result<f64> {
    let dist = src.info_distribution(DEFAULT_ATOM_CAP)?;
    Ok(solve_cutoff(&dist, epsilon)?.expectation)
}

/// Exact blockwise Erokhin function `H(S^k, eps)` in bits, from the run
/// table. The water level can only sit at the end of a run, so only run ends
/// are tested.
pub fn erokhin_block(table: &TypeTable, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon >= 1.0 - table.max_prob() {
        return Ok(0.0);
    }
    let keep = 1.0 - epsilon;
    let mut top = 0.0;
    let mut head_entropy = 0.0;
    let rows = &table.rows;
    for (r, row) in rows.iter().enumerate() {
        let mass = row.mass();
        top += mass;
        head_entropy += mass * row.information();
        if row.rank_end.is_one() {
            continue;
        }
        let spill = top - keep;
        let m_minus_1 = &row.rank_end - 1u32;
        let ln_m1 = ln_big(&m_minus_1);
        let level_ln = spill.ln() - ln_m1;
        let q_here = row.log_prob;
        let q_next = rows.get(r + 1).map_or(f64::NEG_INFINITY, |n| n.log_prob);
        let at_end = r + 1 == rows.len();
        let inside = if spill <= 0.0 {
            at_end && spill > -1e-12
        } else {
            level_ln <= q_here + 1e-12 && level_ln >= q_next - 1e-12
        };
        if inside {
            let spill = spill.max(0.0);
            // (M-1) w log2(1/w) with (M-1) w = spill.
            let water = if spill > 0.0 {
                -spill * level_ln * LOG2_E
            } else {
                0.0
            };
            let tail = if keep > 0.0 { -keep * keep.log2() } else { 0.0 };
            return Ok((head_entropy - tail - water).max(0.0));
        }
    }
    Err(Error::NoValidParameter(epsilon))
}

/// How the remainder of the Gaussian approximation is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum RemainderMode {
    None,
    /// Closed-form remainder for binary sources; `sign` multiplies the
    /// `log2(k)/2` term.
    BinaryRefined {
        sign: f64,
    },
    /// Same as `BinaryRefined { sign: -1.0 }`.
    #[default]
    BinaryRefinedDefault,
}

/// Gaussian approximation of `L*_{S^k}(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussApprox {
    pub k: usize,
    pub epsilon: f64,
    pub entropy: f64,
    pub varentropy: f64,
    /// `(1 - eps) k H - sqrt(k V / 2 pi) exp(-Qinv(eps)^2 / 2)`.
    pub main: f64,
    pub theta: Option<f64>,
    /// True when the varentropy is zero and `main = (1 - eps) k H`.
    pub degenerate_dispersion: bool,
}

impl GaussApprox {
    /// Main term plus remainder when one was requested.
    pub fn total(&self) -> f64 {
        self.main + self.theta.unwrap_or(0.0)
    }
}

/// Gaussian main term for a sum of `k` i.i.d. copies with the given mean and
/// variance.
pub fn gaussian_main(k: usize, mean: f64, variance: f64, epsilon: f64) -> f64 {
    let kf = k as f64;
    (1.0 - epsilon) * kf * mean - (kf * variance).sqrt() * gauss_pdf_at_qinv(epsilon)
}

/// Binary remainder term for bias `p` (folded to `p < 1/2`).
pub fn binary_theta(p: f64, k: usize, epsilon: f64, sign: f64) -> Result<f64> {
    let p = p.min(1.0 - p);
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "binary remainder needs a bias strictly between 0 and 1/2, got {p}"
        )));
    }
    let e = std::f64::consts::E;
    let pi = std::f64::consts::PI;
    let r = 1.0 - 2.0 * p;
    let inner = sign * (k as f64).log2() / 2.0 - 0.5 * (4.0 * e.powi(3) * pi).log2()
        + p / r
        + (1.0 / r).log2()
        + ((1.0 - p) / p).log2() / (2.0 * r);
    Ok((1.0 - epsilon) * inner)
}

pub fn gaussian_approx(
    base: &Pmf,
    k: usize,
    epsilon: f64,
    mode: RemainderMode,
) -> Result<GaussApprox> {
    check_epsilon(epsilon)?;
    if k == 0 {
        return Err(Error::InvalidBlockLength);
    }
    let h = entropy(base);
    let v = varentropy(base);
    let degenerate = v <= 1e-15;
    let main = if degenerate {
        (1.0 - epsilon) * k as f64 * h
    } else {
        gaussian_main(k, h, v, epsilon)
    };
    let sign = match mode {
        RemainderMode::None => None,
        RemainderMode::BinaryRefined { sign } => Some(sign),
        RemainderMode::BinaryRefinedDefault => Some(-1.0),
    };
    let theta = match sign {
        None => None,
        Some(sign) => {
            if base.len() != 2 || degenerate {
                return Err(Error::InvalidArgument(
                    "binary remainder needs a non-uniform two-symbol source".into(),
                ));
            }
            Some(binary_theta(base.probs()[0], k, epsilon, sign)?)
        }
    };
    Ok(GaussApprox {
        k,
        epsilon,
        entropy: h,
        varentropy: v,
        main,
        theta,
        degenerate_dispersion: degenerate,
    })
}

/// Residual of the Gaussian expansion of the cutoff of an i.i.d. sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Point {
    pub k: usize,
    pub exact: f64,
    pub main: f64,
    pub residual: f64,
}

/// `E<sum_{i<=k} X_i>_eps - [(1-eps) k E X - sqrt(k Var X / 2 pi) e^{-Qinv(eps)^2/2}]`
/// for each `k` in the grid.
pub fn lemma1_check(x: &DiscreteDist, epsilon: f64, k_grid: &[usize]) -> Result<Vec<Lemma1Point>> {
    check_epsilon(epsilon)?;
    let (mean, var) = (x.mean(), x.variance());
    k_grid
        .iter()
        .map(|&k| {
            let exact = solve_cutoff(&x.iid_sum(k, DEFAULT_ATOM_CAP)?, epsilon)?.expectation;
            let main = gaussian_main(k, mean, var, epsilon);
            Ok(Lemma1Point {
                k,
                exact,
                main,
                residual: exact - main,
            })
        })
        .collect()
}

/// Small-`eps` behaviour of the dispersion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionRatio {
    pub epsilon: f64,
    /// `e^{-Qinv(eps)^2/2} / sqrt(2 pi)`.
    pub coefficient: f64,
    /// Coefficient over `eps sqrt(2 ln(1/eps))`.
    pub ratio_ln: f64,
    /// Coefficient over `eps sqrt(2 log2(1/eps))`.
    pub ratio_log2: f64,
}

pub fn dispersion_smalleps_check(eps_grid: &[f64]) -> Result<Vec<DispersionRatio>> {
    eps_grid
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidEpsilon(eps, "(0, 1)"));
            }
            let coefficient = gauss_pdf_at_qinv(eps);
            let ln_inv = -eps.ln();
            Ok(DispersionRatio {
                epsilon: eps,
                coefficient,
                ratio_ln: coefficient / (eps * (2.0 * ln_inv).sqrt()),
                ratio_log2: coefficient / (eps * (2.0 * ln_inv * LOG2_E).sqrt()),
            })
        })
        .collect()
}

/// Exact value, bounds and approximation at one block length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub epsilon: f64,
    pub lstar: f64,
    pub lstar_zero: f64,
    pub einfo: f64,
    /// `E<i>_eps + L*(0) - kH`; absent when `eps >= 1 - P(1)`.
    pub t2_lower: Option<f64>,
    pub t2_upper: Option<f64>,
    pub approx: GaussApprox,
}

/// Evaluates everything the `curve` command reports at one `k`.
pub fn curve_point(base: &Pmf, k: usize, epsilon: f64, mode: RemainderMode) -> Result<CurvePoint> {
    let src = ProductSource::new(base.clone(), k)?;
    let table = build_type_table(&src)?;
    let lstar = block_code(&table, epsilon)?.avg_length;
    let lstar_zero = block_code(&table, 0.0)?.avg_length;
    let einfo = einfo_from_table(&table, epsilon)?;
    let in_range = epsilon < 1.0 - table.max_prob();
    let h = entropy(base) * k as f64;
    let mode = if base.len() == 2 && !base.is_uniform() {
        mode
    } else {
        RemainderMode::None
    };
    Ok(CurvePoint {
        k,
        epsilon,
        lstar,
        lstar_zero,
        einfo,
        t2_lower: in_range.then_some(einfo + lstar_zero - h),
        t2_upper: in_range.then_some(einfo),
        approx: gaussian_approx(base, k, epsilon, mode)?,
    })
}

/// `E<i(S^k)>_eps` from the run table (one atom per run).
pub fn einfo_from_table(table: &TypeTable, epsilon: f64) -> Result<f64> {
    let dist = DiscreteDist::from_pairs(
        table
            .rows
            .iter()
            .map(|r| (r.information(), r.mass()))
            .collect(),
    )?;
    Ok(solve_cutoff(&dist, epsilon)?.expectation)
}
