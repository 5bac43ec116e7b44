use serde::Serialize;

use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::iidlimits::DEFAULT_TYPE_CAP;
use crate::source::{
    composition_count, compositions, ln_factorials, DiscreteDist, Pmf, ProductSource,
};
use crate::special::LOG2_E;

use super::distortion::DistortionSpec;
use super::rd::{rd_excess_solve_product, rd_solve};

/// Cap on the number of distortion levels tracked by the ball dynamic program.
pub const DP_STATE_CAP: usize = 20_000;
/// Largest denominator tried when fitting distortion values to a lattice.
const LATTICE_MAX_DENOMINATOR: usize = 1000;
/// Coordinate-descent sweeps used by [`rplus_search`].
pub const RPLUS_SWEEPS: usize = 50;

/// `-log2 P_{Z^k}(B_d(s^k))` for i.i.d. `Z_i ~ output`, where `s_block` holds
/// source symbols of the original alphabet and the ball uses the per-letter
/// average distortion. Returns `inf` when the ball has zero probability.
pub fn ball_log_prob(
    dist: &DistortionSpec,
    output: &[f64],
    s_block: &[usize],
    d: f64,
) -> Result<f64> {
    if s_block.is_empty() {
        return Err(Error::InvalidBlockLength);
    }
    check_output(dist, output)?;
    let mut counts = vec![0usize; dist.sources()];
    for &s in s_block {
        if s >= dist.sources() {
            return Err(Error::UnknownSymbol(s));
        }
        counts[s] += 1;
    }
    let rows: Vec<(&[f64], usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| (dist.matrix()[s].as_slice(), n))
        .collect();
    Ok(-ln_ball_prob(&rows, output, d)? * LOG2_E)
}

fn check_output(dist: &DistortionSpec, output: &[f64]) -> Result<()> {
    if output.len() != dist.reproductions() {
        return Err(Error::InvalidArgument(format!(
            "output distribution has {} entries, distortion has {} reproduction symbols",
            output.len(),
            dist.reproductions()
        )));
    }
    let total: f64 = output.iter().sum();
    if output.iter().any(|&q| !q.is_finite() || q < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "output distribution must be nonnegative and sum to 1".into(),
        ));
    }
    Ok(())
}

/// Natural log of the ball probability for a block with `n` copies of each
/// listed row.
fn ln_ball_prob(rows: &[(&[f64], usize)], output: &[f64], d: f64) -> Result<f64> {
    let k: usize = rows.iter().map(|r| r.1).sum();
    let live: Vec<usize> = (0..output.len()).filter(|&z| output[z] > 0.0).collect();
    let worst = rows
        .iter()
        .flat_map(|(row, _)| live.iter().map(move |&z| row[z]))
        .fold(0.0_f64, f64::max);
    if worst <= d + 1e-12 {
        return Ok(0.0);
    }
    let values: Vec<f64> = rows
        .iter()
        .flat_map(|(row, _)| live.iter().map(move |&z| row[z]))
        .collect();
    let Some(unit) = lattice_unit(&values) else {
        return sparse_ln_ball_prob(rows, output, &live, k as f64 * d);
    };
    let top = (k as f64 * d / unit + 1e-9).floor();
    if top < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if top + 1.0 > DP_STATE_CAP as f64 {
        return sparse_ln_ball_prob(rows, output, &live, k as f64 * d);
    }
    let top = top as usize;
    let mut acc = LogVec::point(top);
    for (row, n) in rows {
        let mut letter: Vec<(usize, f64)> = Vec::new();
        for &z in &live {
            let v = (row[z] / unit).round() as usize;
            match letter.iter_mut().find(|e| e.0 == v) {
                Some(e) => e.1 += output[z],
                None => letter.push((v, output[z])),
            }
        }
        letter.sort_by_key(|e| e.0);
        acc = acc.convolve(&n_fold(&letter, *n, top));
        if acc.is_zero() {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(acc.ln_total())
}

/// Ball probability by convolving exact partial sums, for distortions
/// without a common lattice unit. Sums above `budget` are pruned.
fn sparse_ln_ball_prob(
    rows: &[(&[f64], usize)],
    output: &[f64],
    live: &[usize],
    budget: f64,
) -> Result<f64> {
    let limit = budget + 1e-9 * budget.max(1.0);
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for (row, n) in rows {
        for _ in 0..*n {
            let mut next: Vec<(f64, f64)> = acc
                .iter()
                .flat_map(|&(v, lp)| live.iter().map(move |&z| (v + row[z], lp + output[z].ln())))
                .filter(|&(v, _)| v <= limit)
                .collect();
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            acc.clear();
            for (v, lp) in next {
                match acc.last_mut() {
                    Some(last) if v - last.0 <= 1e-12 * v.abs().max(1.0) => {
                        last.1 = ln_add(last.1, lp)
                    }
                    _ => acc.push((v, lp)),
                }
            }
            if acc.is_empty() {
                return Ok(f64::NEG_INFINITY);
            }
            if acc.len() > DP_STATE_CAP {
                return Err(Error::DpStateCapExceeded {
                    states: acc.len(),
                    cap: DP_STATE_CAP,
                });
            }
        }
    }
    Ok(acc
        .iter()
        .fold(f64::NEG_INFINITY, |t, &(_, lp)| ln_add(t, lp)))
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Common unit `u` with every value an integer multiple of `u`, if a small
/// denominator of the smallest positive value works.
fn lattice_unit(values: &[f64]) -> Option<f64> {
    let min_pos = values
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Some(1.0);
    }
    (1..=LATTICE_MAX_DENOMINATOR)
        .map(|m| min_pos / m as f64)
        .find(|&u| {
            values.iter().all(|&v| {
                let r = v / u;
                (r - r.round()).abs() <= 1e-7 * r.max(1.0)
            })
        })
}

/// Log-probabilities on `0..=top`.
#[derive(Clone)]
struct LogVec(Vec<f64>);

impl LogVec {
    fn point(top: usize) -> Self {
        let mut v = vec![f64::NEG_INFINITY; top + 1];
        v[0] = 0.0;
        Self(v)
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == f64::NEG_INFINITY)
    }

    /// Truncated convolution, each output by a max-shifted log-sum-exp.
    fn convolve(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let top = a.len() - 1;
        let live_a: Vec<usize> = (0..=top).filter(|&i| a[i] > f64::NEG_INFINITY).collect();
        let out = (0..=top)
            .map(|t| {
                let terms = live_a
                    .iter()
                    .take_while(|&&i| i <= t)
                    .map(|&i| a[i] + b[t - i]);
                let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return m;
                }
                m + terms.map(|v| (v - m).exp()).sum::<f64>().ln()
            })
            .collect();
        Self(out)
    }

    fn ln_total(&self) -> f64 {
        let m = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + self.0.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
    }
}

/// Distribution of the sum of `n` i.i.d. letters with integer values,
/// truncated to `0..=top`.
fn n_fold(letter: &[(usize, f64)], n: usize, top: usize) -> LogVec {
    if let [(v0, p0), (v1, p1)] = letter {
        // Binomial in the number of copies taking the larger value.
        let lnf = ln_factorials(n);
        let mut ln = vec![f64::NEG_INFINITY; top + 1];
        for m in 0..=n {
            let v = n * v0 + m * (v1 - v0);
            if v > top {
                break;
            }
            ln[v] = lnf[n] - lnf[m] - lnf[n - m] + m as f64 * p1.ln() + (n - m) as f64 * p0.ln();
        }
        return LogVec(ln);
    }
    let mut single = vec![f64::NEG_INFINITY; top + 1];
    for &(v, p) in letter {
        if v <= top {
            single[v] = p.ln();
        }
    }
    let mut base = LogVec(single);
    let mut out = LogVec::point(top);
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            out = out.convolve(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.convolve(&base);
        }
    }
    out
}

/// `E[<-log2 P_{Z^k}(B_d(S^k))>_eps]` with `Z^k` i.i.d. from `output`,
/// computed exactly over type classes of the source.
pub fn rplus(
    src: &ProductSource,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
    output: &[f64],
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_output(dist, output)?;
    let base = src.base();
    let k = src.k();
    let rows = dist.rows_for(base)?;
    let types = composition_count(k, base.len());
    if types > DEFAULT_TYPE_CAP {
        return Err(Error::TypeCapExceeded {
            types,
            cap: DEFAULT_TYPE_CAP,
        });
    }
    let lnf = ln_factorials(k);
    let ln_p: Vec<f64> = base.probs().iter().map(|p| p.ln()).collect();
    let mut finite = Vec::new();
    let mut infinite_mass = 0.0;
    for comp in compositions(k, base.len()) {
        let mut lm = lnf[k];
        let mut block: Vec<(&[f64], usize)> = Vec::new();
        for (a, &n) in comp.iter().enumerate() {
            if n > 0 {
                lm += n as f64 * ln_p[a] - lnf[n as usize];
                block.push((rows[a].as_slice(), n as usize));
            }
        }
        let mass = lm.exp();
        let ln_ball = ln_ball_prob(&block, output, d)?;
        if ln_ball == f64::NEG_INFINITY {
            infinite_mass += mass;
        } else {
            finite.push(((-ln_ball * LOG2_E).max(0.0), mass));
        }
    }
    if infinite_mass > epsilon + 1e-15 {
        return Ok(f64::INFINITY);
    }
    if finite.is_empty() {
        return Ok(0.0);
    }
    let budget = (epsilon - infinite_mass).clamp(0.0, 1.0);
    Ok(solve_cutoff(&DiscreteDist::from_pairs(finite)?, budget)?.expectation)
}

/// Best `rplus` found and the output distribution achieving it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RplusEstimate {
    pub value: f64,
    pub output: Vec<f64>,
}

/// Upper estimate of `R+_{S^k}(d, eps)` over product outputs.
///
/// Candidates are the point masses, the single-letter optimal output of
/// `R_S(d)` (when `d` is inside its range) and `extra`; the best is refined by
/// `sweeps` rounds of line searches toward each reproduction symbol.
pub fn rplus_search(
    src: &ProductSource,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
    extra: &[Vec<f64>],
    sweeps: usize,
) -> Result<RplusEstimate> {
    let m = dist.reproductions();
    let mut candidates: Vec<Vec<f64>> = (0..m)
        .map(|z| (0..m).map(|y| f64::from(u8::from(y == z))).collect())
        .collect();
    if let Ok(sol) = rd_solve(src.base(), dist, d) {
        candidates.push(sol.output_dist);
    }
    candidates.extend(extra.iter().cloned());
    let mut best: Option<RplusEstimate> = None;
    for q in candidates {
        let value = rplus(src, dist, d, epsilon, &q)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(RplusEstimate { value, output: q });
        }
    }
    let mut best = best.expect("at least one candidate");
    if m < 2 || !best.value.is_finite() {
        return Ok(best);
    }
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..sweeps {
        let before = best.value;
        for z in 0..m {
            let mix = |t: f64| -> Vec<f64> {
                best.output
                    .iter()
                    .enumerate()
                    .map(|(y, &q)| (1.0 - t) * q + if y == z { t } else { 0.0 })
                    .collect()
            };
            let eval = |t: f64| rplus(src, dist, d, epsilon, &mix(t));
            let (mut a, mut b) = (0.0_f64, 1.0_f64);
            let mut x1 = b - ratio * (b - a);
            let mut x2 = a + ratio * (b - a);
            let mut f1 = eval(x1)?;
            let mut f2 = eval(x2)?;
            for _ in 0..30 {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - ratio * (b - a);
                    f1 = eval(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + ratio * (b - a);
                    f2 = eval(x2)?;
                }
            }
            let (t, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if f < best.value - 1e-13 {
                best = RplusEstimate {
                    value: f,
                    output: mix(t),
                };
            }
        }
        if best.value >= before - 1e-13 {
            break;
        }
    }
    Ok(best)
}

/// Bounds on the minimum average length under an excess-distortion
/// constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem6Bounds {
    /// `R_{S^k}(d, eps)` in bits.
    pub rate: f64,
    /// `R - log2(R + 1) - log2 e`, clamped at 0.
    pub lower: f64,
    /// `rplus` at the best output found.
    pub upper: f64,
    pub output: Vec<f64>,
}

pub fn theorem6_bounds(
    src: &ProductSource,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
) -> Result<Theorem6Bounds> {
    let rate = rd_excess_solve_product(src.base(), dist, d, epsilon, src.k())?;
    let lower = (rate - (rate + 1.0).log2() - LOG2_E).max(0.0);
    let est = rplus_search(src, dist, d, epsilon, &[], RPLUS_SWEEPS)?;
    Ok(Theorem6Bounds {
        rate,
        lower,
        upper: est.value,
        output: est.output,
    })
}

/// Output distribution equal to the source distribution on a square
/// distortion matrix (zero elsewhere).
pub fn source_as_output(p: &Pmf, dist: &DistortionSpec) -> Vec<f64> {
    let mut q = vec![0.0; dist.reproductions()];
    for (i, &o) in p.original_indices().iter().enumerate() {
        if o < q.len() {
            q[o] = p.prob(i);
        }
    }
    q
}
