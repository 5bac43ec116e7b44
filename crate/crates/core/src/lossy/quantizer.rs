use serde::Serialize;

use crate::cutoff::solve_cutoff;
use crate::error::{check_epsilon, Error, Result};
use crate::optcode::codeword_length;
use crate::source::{DiscreteDist, Pmf, ProductSource};
use crate::special::{binary_entropy, phi, LOG2_E};

use super::ball::{rplus_search, RPLUS_SWEEPS};
use super::distortion::DistortionSpec;
use super::rd::{rd_excess_solve, rd_solve};

/// Largest source alphabet for exhaustive quantizer and code searches.
pub const SEARCH_MAX_SOURCE: usize = 10;
/// Largest reproduction alphabet for exhaustive quantizer and code searches.
pub const SEARCH_MAX_REPRODUCTIONS: usize = 6;
const NODE_BUDGET: u64 = 200_000_000;
const TOL: f64 = 1e-12;

/// Best deterministic quantizer found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerOptimum {
    pub value: f64,
    /// Reproduction symbol for each support symbol.
    pub map: Vec<usize>,
    /// Distribution of the quantizer output over reproduction symbols.
    pub output: Vec<f64>,
    pub excess_probability: f64,
}

/// `H_{d,eps}(S)`: least output entropy (bits) of a quantizer with
/// `P[d(S, f(S)) > d] <= eps`.
pub fn hdeps_exact(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
) -> Result<QuantizerOptimum> {
    search_quantizers(p, dist, d, epsilon, entropy_of)
}

/// Least average length of a deterministic code with
/// `P[d(S, g(f(S))) > d] <= eps`: the zero-error optimal length of the best
/// quantizer output.
pub fn ldet_exact(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
) -> Result<QuantizerOptimum> {
    search_quantizers(p, dist, d, epsilon, zero_error_length_of)
}

fn entropy_of(masses: &[f64]) -> f64 {
    masses.iter().map(|&m| phi(m)).sum()
}

fn zero_error_length_of(masses: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = masses.iter().copied().filter(|&m| m > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .iter()
        .enumerate()
        .map(|(i, &m)| m * f64::from(codeword_length(i + 1)))
        .sum()
}

fn check_scale(p: &Pmf, dist: &DistortionSpec) -> Result<()> {
    if p.len() > SEARCH_MAX_SOURCE || dist.reproductions() > SEARCH_MAX_REPRODUCTIONS {
        return Err(Error::ScaleExceeded(format!(
            "{} source and {} reproduction symbols (limits {SEARCH_MAX_SOURCE} and {SEARCH_MAX_REPRODUCTIONS})",
            p.len(),
            dist.reproductions()
        )));
    }
    Ok(())
}

/// Branch and bound over maps `support -> reproduction`. `objective` must be
/// concave in the cell masses, so moving all unassigned mass into a single
/// cell lower-bounds every completion.
fn search_quantizers(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
    objective: fn(&[f64]) -> f64,
) -> Result<QuantizerOptimum> {
    check_epsilon(epsilon)?;
    check_scale(p, dist)?;
    let rows = dist.rows_for(p)?;
    let order = p.order().to_vec();
    let probs = p.probs();
    let m = dist.reproductions();
    let min_excess: f64 = rows
        .iter()
        .zip(probs)
        .filter(|(row, _)| row.iter().all(|&v| v > d + TOL))
        .map(|(_, &q)| q)
        .sum();
    if min_excess > epsilon + TOL {
        return Err(Error::Infeasible {
            epsilon,
            min_excess,
        });
    }
    let mut remaining = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        remaining[i] = remaining[i + 1] + probs[order[i]];
    }

    struct State<'a> {
        rows: &'a [Vec<f64>],
        probs: &'a [f64],
        order: &'a [usize],
        remaining: &'a [f64],
        d: f64,
        epsilon: f64,
        objective: fn(&[f64]) -> f64,
        masses: Vec<f64>,
        map: Vec<usize>,
        best: f64,
        best_map: Vec<usize>,
        nodes: u64,
    }

    fn lower_bound(st: &State, depth: usize) -> f64 {
        let r = st.remaining[depth];
        let mut tmp = st.masses.clone();
        (0..tmp.len())
            .map(|z| {
                tmp[z] += r;
                let v = (st.objective)(&tmp);
                tmp[z] -= r;
                v
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn dfs(st: &mut State, depth: usize, err: f64) -> Result<()> {
        st.nodes += 1;
        if st.nodes > NODE_BUDGET {
            return Err(Error::ScaleExceeded(format!(
                "quantizer search exceeded {NODE_BUDGET} nodes"
            )));
        }
        if depth == st.order.len() {
            let v = (st.objective)(&st.masses);
            if v < st.best - 1e-15 {
                st.best = v;
                st.best_map = st.map.clone();
            }
            return Ok(());
        }
        if lower_bound(st, depth) >= st.best - 1e-15 {
            return Ok(());
        }
        let s = st.order[depth];
        let q = st.probs[s];
        let mut zs: Vec<usize> = (0..st.masses.len()).collect();
        zs.sort_by(|&a, &b| st.masses[b].total_cmp(&st.masses[a]));
        for z in zs {
            let e = err + if st.rows[s][z] > st.d + TOL { q } else { 0.0 };
            if e > st.epsilon + TOL {
                continue;
            }
            st.masses[z] += q;
            st.map[s] = z;
            dfs(st, depth + 1, e)?;
            st.masses[z] -= q;
        }
        Ok(())
    }

    let mut st = State {
        rows: &rows,
        probs,
        order: &order,
        remaining: &remaining,
        d,
        epsilon,
        objective,
        masses: vec![0.0; m],
        map: vec![0; probs.len()],
        best: f64::INFINITY,
        best_map: Vec::new(),
        nodes: 0,
    };
    dfs(&mut st, 0, 0.0)?;
    let map = st.best_map;
    let mut output = vec![0.0; m];
    let mut excess = 0.0;
    for (s, &z) in map.iter().enumerate() {
        output[z] += probs[s];
        if rows[s][z] > d + TOL {
            excess += probs[s];
        }
    }
    Ok(QuantizerOptimum {
        value: st.best,
        map,
        output,
        excess_probability: excess,
    })
}

/// Exact quantizer entropies and deterministic length with the bounds
/// relating them to `R+` and `R(d, eps)`, for a single-letter source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerBounds {
    /// `H_{d,eps}(S)` in bits.
    pub hdeps: f64,
    /// Least average length over deterministic codes.
    pub l_det: f64,
    /// `H - log2(H + 1) - log2 e`.
    pub t5_lower: f64,
    /// `H`.
    pub t5_upper: f64,
    /// Best `R+` estimate (includes the optimal quantizer outputs).
    pub rplus: f64,
    /// `R+ - phi(max(1 - eps, 1/e))`.
    pub t7_h_lower: f64,
    /// `R+ + log2(R+ + 1 + phi(min(eps, 1/e))) + 1 + phi(min(eps, 1/e))`.
    pub t7_h_upper: f64,
    /// `R_S(d, eps)` in bits.
    pub rate: f64,
    /// `E[<j>_eps] - log2(R(d) + lambda d + 1) - log2 e - h(eps)`, when
    /// `d` lies inside the range of `R_S(d)`.
    pub t7_r_lower: Option<f64>,
    /// `R+`.
    pub t7_r_upper: f64,
}

pub fn theorem5_and_hdeps(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
) -> Result<QuantizerBounds> {
    let h = hdeps_exact(p, dist, d, epsilon)?;
    let l = ldet_exact(p, dist, d, epsilon)?;
    let src = ProductSource::new(p.clone(), 1)?;
    let est = rplus_search(
        &src,
        dist,
        d,
        epsilon,
        &[h.output.clone(), l.output.clone()],
        RPLUS_SWEEPS,
    )?;
    let r = est.value;
    let inv_e = (-1.0_f64).exp();
    let small = phi(epsilon.min(inv_e));
    let hv = h.value;
    let t7_r_lower = match rd_solve(p, dist, d) {
        Ok(sol) => {
            let cut = solve_cutoff(&sol.tilted_dist()?, epsilon)?.expectation;
            Some(
                cut - (sol.rate + sol.slope_lambda * d + 1.0).log2()
                    - LOG2_E
                    - binary_entropy(epsilon),
            )
        }
        Err(Error::OutOfRange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(QuantizerBounds {
        hdeps: hv,
        l_det: l.value,
        t5_lower: hv - (hv + 1.0).log2() - LOG2_E,
        t5_upper: hv,
        rplus: r,
        t7_h_lower: r - phi((1.0 - epsilon).max(inv_e)),
        t7_h_upper: r + (r + 1.0 + small).log2() + 1.0 + small,
        rate: rd_excess_solve(p, dist, d, epsilon)?,
        t7_r_lower,
        t7_r_upper: r,
    })
}

/// `(1 - eps) R(d) - h(eps)`, a lower bound on `R(d, eps)` when the d-tilted
/// information is almost surely constant.
pub fn constant_tilted_lower(rate: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon) * rate - binary_entropy(epsilon)
}

/// Optimal randomized code found by exhaustive search over decoders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeSearch {
    /// Least average length, by per-symbol fractional knapsack.
    pub lstar: f64,
    /// The same optimum computed as the cutoff of the cell-length variable.
    pub lstar_cells: f64,
    /// Least average length of deterministic codes.
    pub l_det: f64,
    /// Reproduction symbols in codeword order for the optimal decoder.
    pub decoder: Vec<usize>,
    /// Source symbols with a fractional encoder at the optimum.
    pub randomized_symbols: usize,
    /// Whether the empty codeword carries the largest probability at the
    /// optimum.
    pub empty_cell_largest: bool,
}

/// Exhaustive search over decoders (ordered lists of distinct reproduction
/// symbols), each paired with its optimal randomized encoder.
pub fn optimal_code_search(
    p: &Pmf,
    dist: &DistortionSpec,
    d: f64,
    epsilon: f64,
) -> Result<CodeSearch> {
    check_epsilon(epsilon)?;
    check_scale(p, dist)?;
    let rows = dist.rows_for(p)?;
    let probs = p.probs();
    let m = dist.reproductions();
    let mut best: Option<(f64, f64, Vec<usize>, usize, bool)> = None;
    let mut decoders: Vec<Vec<usize>> = vec![];
    ordered_subsets(m, &mut vec![], &mut vec![false; m], &mut decoders);
    for g in decoders {
        let rank: Vec<Option<usize>> = rows
            .iter()
            .map(|row| g.iter().position(|&z| row[z] <= d + TOL).map(|i| i + 1))
            .collect();
        let forced: f64 = rank
            .iter()
            .zip(probs)
            .filter(|(r, _)| r.is_none())
            .map(|(_, &q)| q)
            .sum();
        if forced > epsilon + TOL {
            continue;
        }
        let budget = (epsilon - forced).max(0.0);
        // Knapsack: erase the longest codewords first.
        let mut items: Vec<(u32, f64, usize)> = rank
            .iter()
            .zip(probs)
            .enumerate()
            .filter_map(|(s, (r, &q))| r.map(|r| (codeword_length(r), q, s)))
            .collect();
        items.sort_by(|a, b| b.0.cmp(&a.0).then(a.2.cmp(&b.2)));
        let mut left = budget;
        let mut len = 0.0;
        let mut fractional = 0;
        let mut kept_cells = vec![0.0; g.len() + 1];
        let mut empty = forced;
        for &(l, q, s) in &items {
            let e = if l == 0 { 0.0 } else { (left / q).min(1.0) };
            left -= e * q;
            if e > TOL && e < 1.0 - TOL {
                fractional += 1;
            }
            len += (1.0 - e) * q * f64::from(l);
            let r = rank[s].expect("covered");
            if r == 1 {
                empty += q;
            } else {
                kept_cells[r] += (1.0 - e) * q;
                empty += e * q;
            }
        }
        let by_cells = if items.is_empty() {
            0.0
        } else {
            let cells = DiscreteDist::from_pairs(
                items.iter().map(|&(l, q, _)| (f64::from(l), q)).collect(),
            )?;
            solve_cutoff(&cells, budget.min(cells.total_mass()))?.expectation
        };
        let largest = kept_cells.iter().all(|&c| c <= empty + TOL);
        let better = match &best {
            None => true,
            Some((b, _, _, _, bl)) => len < b - TOL || (len <= b + TOL && largest && !bl),
        };
        if better {
            best = Some((len, by_cells, g.clone(), fractional, largest));
        }
    }
    let (lstar, lstar_cells, decoder, randomized_symbols, empty_cell_largest) =
        best.ok_or(Error::Infeasible {
            epsilon,
            min_excess: f64::NAN,
        })?;
    let l_det = ldet_exact(p, dist, d, epsilon)?.value;
    Ok(CodeSearch {
        lstar,
        lstar_cells,
        l_det,
        decoder,
        randomized_symbols,
        empty_cell_largest,
    })
}

fn ordered_subsets(
    m: usize,
    cur: &mut Vec<usize>,
    used: &mut Vec<bool>,
    out: &mut Vec<Vec<usize>>,
) {
    if !cur.is_empty() {
        out.push(cur.clone());
    }
    for z in 0..m {
        if !used[z] {
            used[z] = true;
            cur.push(z);
            ordered_subsets(m, cur, used, out);
            cur.pop();
            used[z] = false;
        }
    }
}
