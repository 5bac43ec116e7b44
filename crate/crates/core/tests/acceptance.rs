//! Acceptance suite: thirteen criteria, each checked against oracles written
//! here independently of the library and timed against its runtime budget.
//!
//! Runs as a plain binary (`harness = false`) so every criterion prints one
//! PASS/FAIL line under `cargo test`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use vlc_limits::erokhin::{
    erokhin_exact, erokhin_oracle, erokhin_upper_from_length, hamming_h0eps_bounds,
    hamming_h0eps_exact, theorem1_bounds, theorem3_bounds,
};
use vlc_limits::iidlimits::{dispersion_smalleps_check, lemma1_check, lstar_exact};
use vlc_limits::lossy::{
    ball_log_prob, rd_excess_solve, rd_solve, rplus, source_as_output, theorem5_and_hdeps,
    theorem6_bounds, DistortionSpec,
};
use vlc_limits::optcode::{build_code, mc_validate, theorem2_bounds};
use vlc_limits::source::{DiscreteDist, Pmf, ProductSource};

type Outcome = std::result::Result<String, String>;

const SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

fn h2(x: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { 0.0 } else { -t * t.log2() };
    f(x) + f(1.0 - x)
}

fn entropy_bits(masses: &[f64]) -> f64 {
    masses
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| -m * m.log2())
        .sum()
}

/// `E<X>_eps` for nonnegative atoms: remove `eps` of mass from the top values.
fn cutoff_mean(mut atoms: Vec<(f64, f64)>, eps: f64) -> f64 {
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut budget = eps;
    let mut total = 0.0;
    for (v, m) in atoms {
        let cut = budget.min(m);
        budget -= cut;
        total += v * (m - cut);
    }
    total
}

/// Information atoms `(-log2 p, p)`.
fn info_atoms(probs: &[f64]) -> Vec<(f64, f64)> {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| (-p.log2(), p))
        .collect()
}

/// Optimal average length: rank `i` costs `floor(log2 i)` and `eps` of mass
/// is erased from the longest codewords first.
fn lstar_oracle(probs: &[f64], eps: f64) -> f64 {
    let mut sorted: Vec<f64> = probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let atoms = sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| (((i + 1) as f64).log2().floor(), p))
        .collect();
    cutoff_mean(atoms, eps)
}

/// Exhaustive search over codes that list distinct symbols at ranks
/// `1..=j`, keep the last one with probability `beta` and send every other
/// symbol to the empty string.
fn code_brute_force(probs: &[f64], eps: f64) -> f64 {
    fn rec(
        probs: &[f64],
        eps: f64,
        used: &mut Vec<bool>,
        listed_mass: f64,
        prefix_len: f64,
        j: usize,
        best: &mut f64,
    ) {
        for s in 0..probs.len() {
            if used[s] {
                continue;
            }
            let pos = j + 1;
            let p = probs[s];
            let ell = (pos as f64).log2().floor();
            let unlisted = (1.0 - listed_mass - p).max(0.0);
            if unlisted <= eps + 1e-15 {
                let length = if pos == 1 {
                    0.0
                } else {
                    let beta = if p > 0.0 {
                        ((unlisted + p - eps) / p).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    prefix_len + beta * p * ell
                };
                *best = best.min(length);
            }
            used[s] = true;
            rec(
                probs,
                eps,
                used,
                listed_mass + p,
                prefix_len + p * ell,
                pos,
                best,
            );
            used[s] = false;
        }
    }
    let mut best = f64::INFINITY;
    rec(
        probs,
        eps,
        &mut vec![false; probs.len()],
        0.0,
        0.0,
        0,
        &mut best,
    );
    best
}

/// Least entropy of `f(S)` over all maps `f: A -> A` with `P[f(S) != S] <= eps`.
fn h0eps_brute_force(probs: &[f64], eps_grid: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let total = n.pow(n as u32);
    let mut best = vec![f64::INFINITY; eps_grid.len()];
    let mut image = vec![0.0; n];
    for code in 0..total {
        image.iter_mut().for_each(|m| *m = 0.0);
        let mut c = code;
        let mut err = 0.0;
        for (s, &p) in probs.iter().enumerate() {
            let z = c % n;
            c /= n;
            image[z] += p;
            if z != s {
                err += p;
            }
        }
        let h = entropy_bits(&image);
        for (b, &eps) in best.iter_mut().zip(eps_grid) {
            if err <= eps + 1e-12 && h < *b {
                *b = h;
            }
        }
    }
    best
}

/// Least output entropy of a quantizer `f` with `P[d(S, f(S)) > d] <= eps`.
fn hdeps_brute_force(probs: &[f64], dist: &[Vec<f64>], d: f64, eps: f64) -> f64 {
    let n = probs.len();
    let m = dist[0].len();
    let mut best = f64::INFINITY;
    let mut image = vec![0.0; m];
    for code in 0..m.pow(n as u32) {
        image.iter_mut().for_each(|x| *x = 0.0);
        let mut c = code;
        let mut excess = 0.0;
        for (s, &p) in probs.iter().enumerate() {
            let z = c % m;
            c /= m;
            image[z] += p;
            if dist[s][z] > d + 1e-12 {
                excess += p;
            }
        }
        if excess <= eps + 1e-12 {
            best = best.min(entropy_bits(&image));
        }
    }
    best
}

fn ln_choose(n: usize, j: usize) -> f64 {
    (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum()
}

/// Atoms of a sum of `k` i.i.d. two-point variables.
fn binomial_sum_atoms(a: f64, pa: f64, b: f64, k: usize) -> Vec<(f64, f64)> {
    (0..=k)
        .map(|j| {
            let ln_m = ln_choose(k, j) + j as f64 * pa.ln() + (k - j) as f64 * (1.0 - pa).ln();
            (j as f64 * a + (k - j) as f64 * b, ln_m.exp())
        })
        .collect()
}

fn product_probs(base: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..k {
        out = out
            .iter()
            .flat_map(|&x| base.iter().map(move |&p| x * p))
            .collect();
    }
    out
}

fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn eps_grid(hi: f64, step: f64) -> Vec<f64> {
    let n = (hi / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn gauss_coefficient(eps: f64) -> f64 {
    let x = -Normal::standard().inverse_cdf(eps);
    (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: vlc_limits::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Sandwich points shared by criteria 1-5
// ---------------------------------------------------------------------------

#[derive(Default)]
struct SandwichPoints(Vec<(Pmf, f64)>);

fn sandwich_violations(p: &Pmf, eps: f64) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    if eps >= 1.0 - p.max_prob() {
        return Ok(out);
    }
    let mut ordered = |what: &str, lo: f64, x: f64, hi: f64| {
        if !(lo <= x + SLACK && x <= hi + SLACK) {
            out.push(format!("{what}: {lo} <= {x} <= {hi} fails at eps={eps}"));
        }
    };
    let h = lib(erokhin_exact(p, eps))?.value;
    let l = lib(build_code(p, eps))?.avg_length;
    let t1 = lib(theorem1_bounds(p, eps))?;
    let t2 = lib(theorem2_bounds(p, eps))?;
    let t3 = lib(theorem3_bounds(p, eps))?;
    ordered("erokhin vs cutoff", t1.lower, h, t1.upper);
    ordered("length vs cutoff", t2.lower, l, t2.upper);
    ordered("length vs erokhin", t3.lower, l, t3.upper);
    ordered("length vs psi inverse", t3.psi_lower, l, f64::INFINITY);
    ordered(
        "erokhin vs length",
        f64::NEG_INFINITY,
        h,
        lib(erokhin_upper_from_length(p, eps))?,
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn c01(points: &mut SandwichPoints) -> Outcome {
    let mut worst: f64 = 0.0;
    for m in [2usize, 4, 16, 256] {
        let p = lib(Pmf::uniform(m))?;
        let mf = m as f64;
        for eps in eps_grid(0.5, 0.05) {
            let closed = if eps < 1.0 - 1.0 / mf {
                mf.log2() - eps * (mf - 1.0).log2() - h2(eps)
            } else {
                0.0
            };
            let got = lib(erokhin_exact(&p, eps))?.value;
            let err = (got - closed).abs();
            worst = worst.max(err);
            check(err <= 1e-9, || {
                format!("M={m} eps={eps}: {got} vs {closed}")
            })?;
            points.0.push((p.clone(), eps));
        }
    }
    Ok(format!("max error {worst:.2e}"))
}

fn c02(points: &mut SandwichPoints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = 2 + i % 7;
        let p = lib(Pmf::new(random_pmf(&mut rng, n)))?;
        for eps in eps_grid(0.5, 0.05) {
            let exact = lib(erokhin_exact(&p, eps))?.value;
            let oracle = lib(erokhin_oracle(&p, eps))?;
            let err = (exact - oracle).abs();
            worst = worst.max(err);
            check(err <= 1e-5, || {
                format!("pmf {i} eps={eps}: {exact} vs {oracle}")
            })?;
            points.0.push((p.clone(), eps));
        }
    }
    Ok(format!("550 points, max error {worst:.2e} bits"))
}

fn c03(points: &mut SandwichPoints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pmfs: Vec<Vec<f64>> = vec![vec![1.0], vec![0.25; 4], vec![0.3, 0.3, 0.2, 0.2]];
    for n in 2..=6 {
        for _ in 0..12 {
            pmfs.push(random_pmf(&mut rng, n));
        }
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for probs in &pmfs {
        let p = lib(Pmf::new(probs.clone()))?;
        for eps in eps_grid(0.6, 0.05) {
            let got = lib(build_code(&p, eps))?.avg_length;
            let brute = code_brute_force(probs, eps);
            let err = (got - brute).abs();
            worst = worst.max(err);
            count += 1;
            check(err <= 1e-12, || {
                format!("{probs:?} eps={eps}: {got} vs {brute}")
            })?;
            points.0.push((p.clone(), eps));
        }
    }
    Ok(format!("{count} points, max error {worst:.2e}"))
}

fn c04(points: &mut SandwichPoints) -> Outcome {
    let base = lib(Pmf::bernoulli(0.11))?;
    let mut worst: f64 = 0.0;
    for k in 1..=16 {
        let src = lib(ProductSource::new(base.clone(), k))?;
        let expanded = lib(src.expand(1 << 16))?;
        let probs = product_probs(&[0.11, 0.89], k);
        for eps in [0.0, 0.01, 0.1, 0.25] {
            let blockwise = lib(lstar_exact(&src, eps))?;
            let code = lib(build_code(&expanded, eps))?.avg_length;
            let oracle = lstar_oracle(&probs, eps);
            let err = (blockwise - code).abs().max((blockwise - oracle).abs());
            worst = worst.max(err);
            check(err <= 1e-9, || {
                format!("k={k} eps={eps}: blockwise {blockwise}, expanded {code}, oracle {oracle}")
            })?;
            points.0.push((expanded.clone(), eps));
        }
    }
    Ok(format!("k=1..16, max error {worst:.2e}"))
}

fn c05(points: &SandwichPoints) -> Outcome {
    let mut violations = Vec::new();
    for (p, eps) in &points.0 {
        violations.extend(sandwich_violations(p, *eps)?);
    }
    check(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    Ok(format!("{} points, 0 violations", points.0.len()))
}

fn c06() -> Outcome {
    let (p, eps) = (0.11_f64, 0.1);
    let h = h2(p);
    let v = p * (1.0 - p) * ((1.0 - p) / p).log2().powi(2);
    let coef = gauss_coefficient(eps);
    let base = lib(Pmf::bernoulli(p))?;
    let mut last = 0.0;
    let (mut lo_margin, mut hi_margin) = (f64::INFINITY, f64::INFINITY);
    for k in (50..=500).step_by(10) {
        let kf = k as f64;
        let exact = lib(lstar_exact(&lib(ProductSource::new(base.clone(), k))?, eps))?;
        let main = (1.0 - eps) * kf * h - (kf * v).sqrt() * coef;
        let theta = exact - main;
        lo_margin = lo_margin.min(theta + kf.log2() + 5.0);
        hi_margin = hi_margin.min(5.0 - theta);
        check(theta >= -kf.log2() - 5.0 && theta <= 5.0, || {
            format!("k={k}: remainder {theta} outside [-log2 k - 5, 5]")
        })?;
        last = theta;
    }
    check(last.abs() / 500.0 <= 0.02, || {
        format!("|remainder|/k = {} at k=500", last.abs() / 500.0)
    })?;
    Ok(format!(
        "remainder(500) = {last:.4}, |remainder|/k = {:.5}, margins {lo_margin:.2}/{hi_margin:.2}",
        last.abs() / 500.0
    ))
}

fn c07() -> Outcome {
    let p = 0.11_f64;
    let (a, b) = (-p.log2(), -(1.0 - p).log2());
    let x = lib(DiscreteDist::from_pairs(vec![(a, p), (b, 1.0 - p)]))?;
    let grid: Vec<usize> = (10..=300).collect();
    let mut summary = Vec::new();
    for eps in [0.1, 0.5] {
        let series = lib(lemma1_check(&x, eps, &grid))?;
        let mut worst: f64 = 0.0;
        for pt in &series {
            let oracle = cutoff_mean(binomial_sum_atoms(a, p, b, pt.k), eps);
            check((pt.exact - oracle).abs() <= 1e-8 * oracle.max(1.0), || {
                format!(
                    "eps={eps} k={}: exact {} vs oracle {oracle}",
                    pt.k, pt.exact
                )
            })?;
            worst = worst.max(pt.residual.abs());
        }
        check(worst <= 3.0, || {
            format!("eps={eps}: max |residual| {worst}")
        })?;
        let tail = &series[series.len() - 100..];
        let xs: Vec<f64> = tail.iter().map(|t| t.k as f64).collect();
        let ys: Vec<f64> = tail.iter().map(|t| t.residual).collect();
        let slope = lsq_slope(&xs, &ys);
        check(slope.abs() <= 0.005, || {
            format!("eps={eps}: tail slope {slope}")
        })?;
        summary.push(format!("eps={eps}: max|r|={worst:.3}, slope={slope:.1e}"));
    }
    Ok(summary.join("; "))
}

fn c08() -> Outcome {
    let grid = [1e-2, 1e-4, 1e-6, 1e-8];
    let series = lib(dispersion_smalleps_check(&grid))?;
    let mut prev_gap = f64::INFINITY;
    let mut ratios = Vec::new();
    for pt in &series {
        let eps = pt.epsilon;
        let oracle = gauss_coefficient(eps) / (eps * (2.0 * (1.0 / eps).ln()).sqrt());
        check((pt.ratio_ln - oracle).abs() <= 1e-6 * oracle, || {
            format!("eps={eps}: ratio {} vs oracle {oracle}", pt.ratio_ln)
        })?;
        let gap = (pt.ratio_ln - 1.0).abs();
        check(gap < prev_gap, || {
            format!("eps={eps}: |ratio - 1| = {gap} did not shrink")
        })?;
        prev_gap = gap;
        ratios.push(format!("{:.4}", pt.ratio_ln));
    }
    check(prev_gap < 0.15, || {
        format!("|ratio - 1| = {prev_gap} at eps=1e-8")
    })?;
    Ok(format!("ratios {}", ratios.join(", ")))
}

fn c09() -> Outcome {
    let ham = DistortionSpec::hamming(2);
    let (mut rate_err, mut resid, mut slope_err): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, 0.0);
    for p in [0.5_f64, 0.11] {
        let pmf = lib(Pmf::bernoulli(p))?;
        for i in 1..10 {
            let d = p * i as f64 / 10.0;
            let sol = lib(rd_solve(&pmf, &ham, d))?;
            let closed = h2(p) - h2(d);
            rate_err = rate_err.max((sol.rate - closed).abs());
            check((sol.rate - closed).abs() <= 1e-6, || {
                format!("p={p} d={d}: rate {} vs {closed}", sol.rate)
            })?;

            let lambda_nats = sol.slope_lambda * std::f64::consts::LN_2;
            let r = (0..2)
                .map(|z| {
                    (0..2)
                        .map(|s| {
                            let j_nats = sol.big_j[s] * std::f64::consts::LN_2;
                            let dsz = if s == z { 0.0 } else { 1.0 };
                            sol.probs[s] * (j_nats - lambda_nats * dsz).exp()
                        })
                        .sum::<f64>()
                        - 1.0
                })
                .fold(f64::NEG_INFINITY, f64::max);
            resid = resid.max(r).max(sol.csiszar_residual);
            check(r <= 1e-7 && sol.csiszar_residual <= 1e-7, || {
                format!("p={p} d={d}: dual residual {r} / {}", sol.csiszar_residual)
            })?;

            let h = 1e-5 * d;
            let up = lib(rd_solve(&pmf, &ham, d + h))?.rate;
            let down = lib(rd_solve(&pmf, &ham, d - h))?.rate;
            let fd = (down - up) / (2.0 * h);
            let rel = (sol.slope_lambda - fd).abs() / fd.abs();
            let closed_slope = ((1.0 - d) / d).log2();
            slope_err = slope_err.max(rel);
            check(
                rel <= 1e-4 && (sol.slope_lambda - closed_slope).abs() <= 1e-4 * closed_slope,
                || {
                    format!(
                        "p={p} d={d}: slope {} vs finite difference {fd}",
                        sol.slope_lambda
                    )
                },
            )?;
        }
    }
    Ok(format!(
        "max rate error {rate_err:.1e}, max dual residual {resid:.1e}, max slope rel error {slope_err:.1e}"
    ))
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid = [0.0, 0.05, 0.1, 0.2, 0.3];
    let (mut e1, mut e2, mut e3): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let n = 4 + i % 3;
        let probs = random_pmf(&mut rng, n);
        let p = lib(Pmf::new(probs.clone()))?;
        let ham = DistortionSpec::hamming(n);
        let output = source_as_output(&p, &ham);
        let h0 = h0eps_brute_force(&probs, &grid);
        for (gi, &eps) in grid.iter().enumerate() {
            let excess = lib(rd_excess_solve(&p, &ham, 0.0, eps))?;
            let erokhin = lib(erokhin_exact(&p, eps))?.value;
            e1 = e1.max((excess - erokhin).abs());
            check((excess - erokhin).abs() <= 1e-6, || {
                format!("n={n} eps={eps}: excess rate {excess} vs erokhin {erokhin}")
            })?;

            for k in 1..=3 {
                let src = lib(ProductSource::new(p.clone(), k))?;
                let block_out: Vec<f64> = output.clone();
                let got = lib(rplus(&src, &ham, 0.0, eps, &block_out))?;
                let oracle = cutoff_mean(info_atoms(&product_probs(&probs, k)), eps);
                e2 = e2.max((got - oracle).abs());
                check((got - oracle).abs() <= 1e-9, || {
                    format!("n={n} k={k} eps={eps}: rplus {got} vs cutoff {oracle}")
                })?;
            }

            let exact = lib(hamming_h0eps_exact(&p, eps))?;
            let bounds = lib(hamming_h0eps_bounds(&p, eps))?;
            e3 = e3.max((exact - h0[gi]).abs());
            check((exact - h0[gi]).abs() <= 1e-9, || {
                format!(
                    "n={n} eps={eps}: partition search {exact} vs brute force {}",
                    h0[gi]
                )
            })?;
            check(
                bounds.lower <= h0[gi] + SLACK && h0[gi] <= bounds.upper + SLACK,
                || {
                    format!(
                        "n={n} eps={eps}: {} <= {} <= {} fails",
                        bounds.lower, h0[gi], bounds.upper
                    )
                },
            )?;
        }
    }
    Ok(format!(
        "excess vs erokhin {e1:.1e}, rplus vs cutoff {e2:.1e}, exact H0 vs brute force {e3:.1e}"
    ))
}

/// `-log2 P[Z^k in B_d(s^k)]` for binary Hamming and a product output,
/// where `s^k` has `ones` ones.
fn binary_ball_bits(q: &[f64], k: usize, ones: usize, d: f64) -> f64 {
    let radius = (k as f64 * d + 1e-9).floor() as usize;
    let mut dp = vec![1.0];
    for i in 0..k {
        let miss = if i < ones { q[0] } else { q[1] };
        let mut next = vec![0.0; dp.len() + 1];
        for (m, &w) in dp.iter().enumerate() {
            next[m] += w * (1.0 - miss);
            next[m + 1] += w * miss;
        }
        dp = next;
    }
    -dp[..=radius.min(k)].iter().sum::<f64>().log2()
}

fn c11() -> Outcome {
    let (p, d) = (0.11_f64, 0.05);
    let base = lib(Pmf::bernoulli(p))?;
    let ham = DistortionSpec::hamming(2);
    let sol = lib(rd_solve(&base, &ham, d))?;
    let q = &sol.output_dist;
    let mut ladder_min_gap = f64::INFINITY;
    let mut tilted_min_gap = f64::INFINITY;
    for eps in [0.05, 0.1] {
        for k in 1..=10 {
            let src = lib(ProductSource::new(base.clone(), k))?;
            let t6 = lib(theorem6_bounds(&src, &ham, d, eps))?;
            ladder_min_gap = ladder_min_gap.min(t6.upper - t6.lower);
            check(t6.lower <= t6.upper + SLACK, || {
                format!("eps={eps} k={k}: lower {} > rplus {}", t6.lower, t6.upper)
            })?;

            let mut atoms = Vec::new();
            for ones in 0..=k {
                let tilted = ones as f64 * sol.tilted[1] + (k - ones) as f64 * sol.tilted[0];
                let ball = binary_ball_bits(q, k, ones, d);
                let block: Vec<usize> = (0..k).map(|i| usize::from(i < ones)).collect();
                let lib_ball = lib(ball_log_prob(&ham, q, &block, d))?;
                check((lib_ball - ball).abs() <= 1e-9 * ball.max(1.0), || {
                    format!("k={k} ones={ones}: ball {lib_ball} vs oracle {ball}")
                })?;
                tilted_min_gap = tilted_min_gap.min(ball - tilted);
                check(tilted <= ball + SLACK, || {
                    format!("k={k} ones={ones}: tilted {tilted} > -log2 P(ball) {ball}")
                })?;
                let mass = (ln_choose(k, ones)
                    + ones as f64 * p.ln()
                    + (k - ones) as f64 * (1.0 - p).ln())
                .exp();
                atoms.push((tilted, ball, mass));
            }
            let cut_tilted = cutoff_mean(atoms.iter().map(|a| (a.0, a.2)).collect(), eps);
            let mean_ball: f64 = atoms.iter().map(|a| a.1 * a.2).sum();
            let at_opt = lib(rplus(&src, &ham, d, eps, q))?;
            let upper = cut_tilted + mean_ball - k as f64 * sol.rate;
            check(
                cut_tilted <= at_opt + SLACK && at_opt <= upper + SLACK,
                || format!("eps={eps} k={k}: {cut_tilted} <= {at_opt} <= {upper} fails"),
            )?;
        }
    }

    let mut tiny = 0;
    let block2 = {
        let m: Vec<Vec<f64>> = (0..4)
            .map(|s: usize| {
                (0..4)
                    .map(|z: usize| (s ^ z).count_ones() as f64 / 2.0)
                    .collect()
            })
            .collect();
        m
    };
    let instances: Vec<(Vec<f64>, Vec<Vec<f64>>, f64)> = vec![
        (vec![p, 1.0 - p], vec![vec![0.0, 1.0], vec![1.0, 0.0]], d),
        (product_probs(&[p, 1.0 - p], 2), block2.clone(), d),
        (product_probs(&[p, 1.0 - p], 2), block2, 0.5),
        (
            vec![0.5, 0.3, 0.2],
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            1.0,
        ),
    ];
    for (probs, matrix, dd) in &instances {
        let pmf = lib(Pmf::new(probs.clone()))?;
        let spec = lib(DistortionSpec::new(matrix.clone()))?;
        for eps in [0.05, 0.1] {
            let brute = hdeps_brute_force(probs, matrix, *dd, eps);
            let b = lib(theorem5_and_hdeps(&pmf, &spec, *dd, eps))?;
            check((b.hdeps - brute).abs() <= 1e-9, || {
                format!(
                    "{probs:?} d={dd} eps={eps}: search {} vs brute force {brute}",
                    b.hdeps
                )
            })?;
            check(
                b.t7_h_lower <= brute + SLACK && brute <= b.t7_h_upper + SLACK,
                || {
                    format!(
                        "{probs:?} d={dd} eps={eps}: {} <= {brute} <= {} fails",
                        b.t7_h_lower, b.t7_h_upper
                    )
                },
            )?;
            check(b.rate <= b.t7_r_upper + 1e-6, || {
                format!(
                    "{probs:?} d={dd} eps={eps}: rate {} > rplus {}",
                    b.rate, b.t7_r_upper
                )
            })?;
            if let Some(lo) = b.t7_r_lower {
                check(lo <= b.rate + 1e-6, || {
                    format!("{probs:?} d={dd} eps={eps}: lower {lo} > rate {}", b.rate)
                })?;
            }
            tiny += 1;
        }
    }
    Ok(format!(
        "20 ladder points, min rplus - lower {ladder_min_gap:.3}, min ball - tilted {tilted_min_gap:.2e}, {tiny} tiny instances"
    ))
}

fn c12() -> Outcome {
    let trials = 1_000_000;
    let seed = 20_240_611;
    let cases = [
        ("uniform-4", lib(Pmf::uniform(4))?, 0.25, vec![0.25; 4]),
        (
            "binary k=12",
            lib(lib(ProductSource::new(lib(Pmf::bernoulli(0.11))?, 12))?.expand(1 << 12))?,
            0.1,
            product_probs(&[0.11, 0.89], 12),
        ),
    ];
    let mut summary = Vec::new();
    for (name, p, eps, probs) in cases {
        let code = lib(build_code(&p, eps))?;
        let exact = lstar_oracle(&probs, eps);
        check((code.avg_length - exact).abs() <= 1e-9, || {
            format!("{name}: code length {} vs oracle {exact}", code.avg_length)
        })?;
        let first = lib(mc_validate(&code, trials, seed, 4))?;
        let second = lib(mc_validate(&code, trials, seed, 4))?;
        check(first == second, || format!("{name}: reruns differ"))?;
        let n = trials as f64;
        let err_sigma = (eps * (1.0 - eps) / n).sqrt();
        check((first.emp_error - eps).abs() <= 3.0 * err_sigma, || {
            format!(
                "{name}: error {} vs {eps} (sigma {err_sigma})",
                first.emp_error
            )
        })?;
        check(first.error_within_ci && first.len_within_ci, || {
            format!(
                "{name}: length {} vs {} (ci {})",
                first.emp_avg_len, first.expected_avg_len, first.len_ci
            )
        })?;
        check((first.expected_avg_len - exact).abs() <= 1e-9, || {
            format!(
                "{name}: reported exact length {} vs {exact}",
                first.expected_avg_len
            )
        })?;
        summary.push(format!(
            "{name}: err {:.5} (exact {eps}), len {:.5} (exact {exact:.5})",
            first.emp_error, first.emp_avg_len
        ));
    }
    Ok(summary.join("; "))
}

fn c13() -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = vlc_limits::cli::run(
        ["vlc-limits", "figures", "--which", "fig3", "--out", "-"],
        &mut out,
        &mut err,
    );
    check(code == 0, || {
        format!("exit {code}: {}", String::from_utf8_lossy(&err))
    })?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty output")?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("missing column {name}"))
    };
    let (ce, ck, cx, ca) = (
        col("eps")?,
        col("k")?,
        col("exact_rate")?,
        col("approx_rate")?,
    );
    let mut prev: Option<(f64, f64)> = None;
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let (eps, k, exact, approx) = (f[ce], f[ck], f[cx], f[ca]);
        if let Some((pe, px)) = prev {
            if pe == eps {
                check(exact >= px - 1e-12, || {
                    format!("eps={eps} k={k}: rate {exact} < {px}")
                })?;
            }
        }
        if k >= 100.0 {
            worst = worst.max((approx - exact).abs());
            check((approx - exact).abs() < 0.05, || {
                format!("eps={eps} k={k}: approx {approx} vs exact {exact}")
            })?;
        }
        prev = Some((eps, exact));
        rows += 1;
    }
    check(rows > 0, || "no rows".into())?;
    Ok(format!(
        "{rows} rows, max |approx - exact| for k >= 100: {worst:.4} bits/symbol"
    ))
}

fn main() -> ExitCode {
    let mut points = SandwichPoints::default();
    let mut results: Vec<(usize, &str, Duration, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, limit: u64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut outcome = f();
        let elapsed = start.elapsed();
        let budget = Duration::from_secs(limit);
        if outcome.is_ok() && elapsed > budget {
            outcome = Err(format!("took {elapsed:.2?}, budget {budget:?}"));
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("criterion {id:>2} [{tag}] {name} ({elapsed:.2?} / {limit} s): {detail}");
        results.push((id, name, elapsed, outcome));
    };
    run(1, "equiprobable closed form", 1, &mut || c01(&mut points));
    run(2, "exact vs iterative solver", 30, &mut || c02(&mut points));
    run(3, "single-letter code optimality", 60, &mut || {
        c03(&mut points)
    });
    run(4, "blockwise exactness", 60, &mut || c04(&mut points));
    run(5, "sandwich orderings", 60, &mut || c05(&points));
    run(6, "remainder window", 300, &mut c06);
    run(7, "cutoff expansion residual", 120, &mut c07);
    run(8, "small-eps dispersion ratio", 1, &mut c08);
    run(9, "rate-distortion solver", 10, &mut c09);
    run(10, "lossless/lossy consistency", 60, &mut c10);
    run(11, "lossy bound ladder", 300, &mut c11);
    run(12, "Monte Carlo closure", 30, &mut c12);
    run(13, "figure reproduction", 120, &mut c13);
    let failed = results.iter().filter(|r| r.3.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
