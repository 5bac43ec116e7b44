use serde::Serialize;

use crate::blahut::{corrected_rate, iterate_kernel, match_slope, BaOptions, BaPoint, RdProblem};
use crate::error::{check_epsilon, Error, Result};
use crate::source::{DiscreteDist, Pmf};
use crate::special::LOG2_E;

use super::distortion::{excess_indicator, DistortionSpec};

/// Slope used in place of `+inf` when the excess target sits at its minimum.
const BOUNDARY_SLOPE: f64 = 45.0;
/// Cap on `|A|^k * |B|^k` for the expanded block problem.
const EXPANDED_CAP: usize = 1 << 20;
/// Largest block length for the binary Hamming class reduction.
pub const CLASS_REDUCTION_MAX_K: usize = 500;

/// Solution of the average-distortion rate-distortion problem at level `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdSolution {
    pub d: f64,
    /// `R_S(d)` in bits.
    pub rate: f64,
    /// `-R'_S(d)` in bits per unit distortion.
    pub slope_lambda: f64,
    /// Optimal output distribution `P_Z*` over reproduction symbols.
    pub output_dist: Vec<f64>,
    /// `j_S(s, d)` in bits for each support symbol.
    pub tilted: Vec<f64>,
    /// `J_S(s) = -log2 E[exp(-lambda d(s, Z*))]` for each support symbol
    /// (exponent in nats).
    pub big_j: Vec<f64>,
    /// `E[d(s, Z*)]` for each support symbol.
    pub expected_distortion: Vec<f64>,
    /// `max_z E[exp(J(S) - lambda d(S, z))] - 1`, nats throughout.
    pub csiszar_residual: f64,
    pub probs: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

impl RdSolution {
    /// `E[j_S(S, d)]` in bits.
    pub fn tilted_mean(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.tilted)
            .map(|(&p, &j)| p * j)
            .sum()
    }

    /// Rate-dispersion `V(d) = Var[j_S(S, d)]` in bits squared.
    pub fn dispersion(&self) -> f64 {
        let m = self.tilted_mean();
        self.probs
            .iter()
            .zip(&self.tilted)
            .map(|(&p, &j)| p * (j - m) * (j - m))
            .sum()
    }

    /// Distribution of `j_S(S, d)`.
    pub fn tilted_dist(&self) -> Result<DiscreteDist> {
        DiscreteDist::from_pairs(
            self.tilted
                .iter()
                .copied()
                .zip(self.probs.iter().copied())
                .collect(),
        )
    }

    /// Slope in nats per unit distortion.
    pub fn slope_nats(&self) -> f64 {
        self.slope_lambda / LOG2_E
    }
}

/// `R_S(d)` with its d-tilted information, for `d_min < d < d_max`.
pub fn rd_solve(p: &Pmf, dist: &DistortionSpec, d: f64) -> Result<RdSolution> {
    rd_solve_with(p, dist, d, BaOptions::default())
}

pub fn rd_solve_with(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    opts: BaOptions,
) -> Result<RdSolution> {
    let rows = dist.rows_for(p)?;
    let prob = RdProblem {
        p: p.probs(),
        dist: &rows,
    };
    let (d_min, d_max) = (prob.d_min(), prob.d_max());
    if !(d > d_min && d < d_max) {
        return Err(Error::OutOfRange { d, d_min, d_max });
    }
    let (rate_nats, pt) = prob.rate_equality(d, opts)?;
    let s = pt.slope;
    let q = &pt.q;
    let mut big_j = Vec::with_capacity(rows.len());
    let mut tilted = Vec::with_capacity(rows.len());
    let mut expected_distortion = Vec::with_capacity(rows.len());
    let mut j_nats = Vec::with_capacity(rows.len());
    for row in &rows {
        let shift = row.iter().map(|&v| s * v).fold(f64::INFINITY, f64::min);
        let z: f64 = row
            .iter()
            .zip(q)
            .map(|(&v, &qz)| qz * (shift - s * v).exp())
            .sum();
        let jn = shift - z.ln();
        j_nats.push(jn);
        big_j.push(jn * LOG2_E);
        tilted.push((jn - s * d) * LOG2_E);
        expected_distortion.push(row.iter().zip(q).map(|(&v, &qz)| qz * v).sum());
    }
    let csiszar_residual = (0..q.len())
        .map(|z| {
            p.probs()
                .iter()
                .zip(&rows)
                .zip(&j_nats)
                .map(|((&px, row), &jn)| px * (jn - s * row[z]).exp())
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
        - 1.0;
    Ok(RdSolution {
        d,
        rate: rate_nats * LOG2_E,
        slope_lambda: s * LOG2_E,
        output_dist: pt.q.clone(),
        tilted,
        big_j,
        expected_distortion,
        csiszar_residual,
        probs: p.probs().to_vec(),
        iterations: pt.iterations,
        gap: pt.gap,
    })
}

/// `-(R(d + h) - R(d - h)) / 2h` in bits per unit distortion.
pub fn finite_difference_slope(p: &Pmf, dist: &DistortionSpec, d: f64, h: f64) -> Result<f64> {
    let hi = rd_solve(p, dist, d + h)?.rate;
    let lo = rd_solve(p, dist, d - h)?.rate;
    Ok(-(hi - lo) / (2.0 * h))
}

/// `R_S(d, eps)` in bits: the least mutual information over channels with
/// `P[d(S, Z) > d] <= eps`.
pub fn rd_excess_solve(p: &Pmf, dist: &DistortionSpec, d: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let rows = dist.rows_for(p)?;
    excess_rate_nats(p.probs(), &excess_indicator(&rows, d), epsilon).map(|r| r * LOG2_E)
}

/// Rate of the indicator problem at average level `eps`, in nats.
fn excess_rate_nats(p: &[f64], indicator: &[Vec<f64>], epsilon: f64) -> Result<f64> {
    let prob = RdProblem { p, dist: indicator };
    let (lo, hi) = (prob.d_min(), prob.d_max());
    let opts = BaOptions::default();
    if epsilon >= hi - 1e-15 {
        return Ok(0.0);
    }
    if epsilon < lo - 1e-15 {
        return Err(Error::Infeasible {
            epsilon,
            min_excess: lo,
        });
    }
    if epsilon <= lo + 1e-15 {
        let pt = prob.fixed_point(BOUNDARY_SLOPE, None, opts)?;
        return Ok(corrected_rate(&pt, lo));
    }
    Ok(prob.rate_equality(epsilon, opts)?.0)
}

/// `R_{S^k}(d, eps)` in bits for the memoryless extension with per-letter
/// average distortion.
///
/// Binary Hamming sources use the reduction to weight classes, which is exact
/// because the problem is invariant under coordinate permutations. Other
/// sources are expanded when `|A|^k |B|^k` is small.
pub fn rd_excess_solve_product(
    base: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
    k: usize,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    if k == 0 {
        return Err(Error::InvalidBlockLength);
    }
    let rows = dist.rows_for(base)?;
    if k == 1 {
        return excess_rate_nats(base.probs(), &excess_indicator(&rows, d), epsilon)
            .map(|r| r * LOG2_E);
    }
    if let Some(one) = binary_hamming_one(&rows) {
        if k > CLASS_REDUCTION_MAX_K {
            return Err(Error::ScaleExceeded(format!(
                "class reduction limited to k <= {CLASS_REDUCTION_MAX_K}"
            )));
        }
        let classes = WeightClasses::new(base.probs()[one], k, d);
        return classes.excess_rate_nats(epsilon).map(|r| r * LOG2_E);
    }
    let (n, m) = (rows.len(), rows[0].len());
    let size = n
        .checked_pow(k as u32)
        .and_then(|a| m.checked_pow(k as u32).and_then(|b| a.checked_mul(b)));
    if size.is_none_or(|s| s > EXPANDED_CAP) {
        return Err(Error::ScaleExceeded(format!(
            "expanded problem has {n}^{k} x {m}^{k} entries, cap {EXPANDED_CAP}"
        )));
    }
    let (block_p, block_rows) = expand_problem(base.probs(), &rows, k);
    excess_rate_nats(&block_p, &excess_indicator(&block_rows, d), epsilon).map(|r| r * LOG2_E)
}

/// For a two-symbol support with Hamming distortion (up to relabeling),
/// the index of the support symbol counted by the class weight.
fn binary_hamming_one(rows: &[Vec<f64>]) -> Option<usize> {
    if rows.len() != 2 || rows[0].len() != 2 {
        return None;
    }
    let straight = rows[0] == [0.0, 1.0] && rows[1] == [1.0, 0.0];
    let swapped = rows[0] == [1.0, 0.0] && rows[1] == [0.0, 1.0];
    (straight || swapped).then_some(1)
}

/// Source and distortion of the `k`-fold product, strings in lexicographic
/// order.
fn expand_problem(p: &[f64], rows: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let strings = |alpha: usize| -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..alpha).map(move |a| {
                        let mut t = s.clone();
                        t.push(a);
                        t
                    })
                })
                .collect();
        }
        out
    };
    let xs = strings(p.len());
    let zs = strings(rows[0].len());
    let block_p = xs
        .iter()
        .map(|x| x.iter().map(|&a| p[a]).product())
        .collect();
    let block_rows = xs
        .iter()
        .map(|x| {
            zs.iter()
                .map(|z| x.iter().zip(z).map(|(&a, &b)| rows[a][b]).sum::<f64>() / k as f64)
                .collect()
        })
        .collect();
    (block_p, block_rows)
}

/// Weight-class reduction of the binary Hamming excess problem at block
/// length `k`.
struct WeightClasses {
    /// `P[weight(S^k) = i]`.
    p: Vec<f64>,
    /// `f[i][j]`: fraction of weight-`j` outputs within the distortion ball of
    /// a weight-`i` source string.
    f: Vec<Vec<f64>>,
}

impl WeightClasses {
    fn new(p_one: f64, k: usize, d: f64) -> Self {
        let lnf = crate::source::ln_factorials(k);
        let ln_binom = |n: usize, r: usize| lnf[n] - lnf[r] - lnf[n - r];
        let radius = (k as f64 * d + 1e-9).floor().max(-1.0);
        let p = (0..=k)
            .map(|i| {
                let mut lp = ln_binom(k, i);
                if i > 0 {
                    lp += i as f64 * p_one.ln();
                }
                if i < k {
                    lp += (k - i) as f64 * (1.0 - p_one).ln();
                }
                lp.exp()
            })
            .collect();
        let mut f = vec![vec![0.0; k + 1]; k + 1];
        if radius >= 0.0 {
            let t = radius as usize;
            for (i, fi) in f.iter_mut().enumerate() {
                // a ones of the source turned off, b zeros turned on.
                for a in 0..=i.min(t) {
                    for b in 0..=(k - i).min(t - a) {
                        let j = i - a + b;
                        fi[j] += (ln_binom(i, a) + ln_binom(k - i, b) - ln_binom(k, j)).exp();
                    }
                }
            }
        }
        for fi in &mut f {
            for v in fi.iter_mut() {
                *v = v.min(1.0);
            }
        }
        Self { p, f }
    }

    fn fixed_point(&self, s: f64, q0: Option<&[f64]>, opts: BaOptions) -> Result<BaPoint> {
        let es = (-s).exp();
        let a: Vec<Vec<f64>> = self
            .f
            .iter()
            .map(|fi| fi.iter().map(|&f| f + (1.0 - f) * es).collect())
            .collect();
        let (q, iterations, gap) = iterate_kernel(&self.p, &a, q0, opts)?;
        let mut log_partition = 0.0;
        let mut distortion = 0.0;
        for ((&pi, ai), fi) in self.p.iter().zip(&a).zip(&self.f) {
            let z: f64 = ai.iter().zip(&q).map(|(&x, &qj)| x * qj).sum();
            log_partition -= pi * z.ln();
            let miss: f64 = fi.iter().zip(&q).map(|(&f, &qj)| qj * (1.0 - f) * es).sum();
            distortion += pi * miss / z;
        }
        Ok(BaPoint {
            slope: s,
            rate: (log_partition - s * distortion).max(0.0),
            q,
            distortion,
            log_partition,
            iterations,
            gap,
        })
    }

    fn excess_rate_nats(&self, epsilon: f64) -> Result<f64> {
        let opts = BaOptions::default();
        let hi = (0..self.p.len())
            .map(|j| {
                1.0 - self
                    .p
                    .iter()
                    .zip(&self.f)
                    .map(|(&pi, fi)| pi * fi[j])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if epsilon >= hi - 1e-15 {
            return Ok(0.0);
        }
        if epsilon <= 1e-15 {
            let pt = self.fixed_point(BOUNDARY_SLOPE, None, opts)?;
            return Ok(corrected_rate(&pt, 0.0));
        }
        let best = match_slope(|s, warm| self.fixed_point(s, warm, opts), 1.0, epsilon)?;
        Ok(corrected_rate(&best, epsilon))
    }
}
