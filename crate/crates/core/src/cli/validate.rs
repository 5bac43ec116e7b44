use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cutoff::{cutoff_expectation_variational, solve_cutoff};
use crate::erokhin::{
    erokhin_equiprobable, erokhin_exact, erokhin_oracle, hamming_h0eps_bounds, theorem1_bounds,
    theorem3_bounds,
};
use crate::error::Result;
use crate::iidlimits::lstar_exact;
use crate::lossy::{
    hdeps_exact, optimal_code_search, rd_excess_solve, rd_solve, rplus, source_as_output,
    theorem5_and_hdeps, theorem6_bounds, DistortionSpec,
};
use crate::optcode::{build_code, mc_validate, theorem2_bounds};
use crate::source::{DiscreteDist, Pmf, ProductSource};
use crate::special::{binary_entropy, phi};

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

/// `worst` is the largest amount by which a lower side exceeds an upper side;
/// negative values are slack.
fn ordering(name: &str, worst: f64, tol: f64) -> CheckResult {
    let detail = if worst <= 0.0 {
        format!("no violations, least slack {:.3e}", -worst)
    } else {
        format!("largest violation {worst:.3e} (tolerance {tol:.0e})")
    };
    CheckResult {
        name: name.into(),
        passed: worst <= tol,
        detail,
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, max_len: usize) -> Result<Pmf> {
    let n = rng.random_range(2..=max_len);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    Pmf::new(w.iter().map(|v| v / total).collect())
}

fn eps_grid(p: &Pmf, steps: usize) -> Vec<f64> {
    let top = 1.0 - p.max_prob();
    (0..steps).map(|i| top * i as f64 / steps as f64).collect()
}

/// Runs the invariant suite. `quick` shrinks every grid.
pub fn validation_suite(quick: bool, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pmfs = if quick { 6 } else { 40 };
    let pmfs: Vec<Pmf> = (0..n_pmfs)
        .map(|_| random_pmf(&mut rng, 6))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();

    let mut worst = 0.0_f64;
    for m in [2usize, 4, 16] {
        let p = Pmf::uniform(m)?;
        for i in 0..10 {
            let eps = 0.05 * i as f64 * (1.0 - 1.0 / m as f64) / 0.5;
            let eps = eps.min(1.0 - 1.0 / m as f64 - 1e-9);
            let closed = (m as f64).log2() - eps * ((m - 1) as f64).log2() - binary_entropy(eps);
            worst = worst.max((erokhin_exact(&p, eps)?.value - closed).abs());
            worst = worst.max((erokhin_equiprobable(m, eps) - closed).abs());
        }
    }
    out.push(check("erokhin equiprobable closed form", worst, 1e-9));

    let mut worst = 0.0_f64;
    for p in &pmfs {
        for eps in eps_grid(p, 4) {
            worst = worst.max((erokhin_exact(p, eps)?.value - erokhin_oracle(p, eps)?).abs());
        }
    }
    out.push(check(
        "erokhin exact vs alternating minimization",
        worst,
        1e-5,
    ));

    let ham_cache: Vec<DistortionSpec> = (0..=6).map(DistortionSpec::hamming).collect();
    let mut worst = 0.0_f64;
    for p in pmfs.iter().take(if quick { 3 } else { 15 }) {
        for eps in eps_grid(p, 5) {
            let search = optimal_code_search(p, &ham_cache[p.len()], 0.0, eps)?;
            worst = worst.max((build_code(p, eps)?.avg_length - search.lstar).abs());
        }
    }
    out.push(check("single-shot code vs exhaustive search", worst, 1e-12));

    let mut worst = 0.0_f64;
    let base = Pmf::bernoulli(0.11)?;
    for k in 1..=if quick { 8 } else { 14 } {
        let src = ProductSource::new(base.clone(), k)?;
        let expanded = src.expand(1 << 20)?;
        for eps in [0.0, 0.01, 0.1, 0.25] {
            worst =
                worst.max((lstar_exact(&src, eps)? - build_code(&expanded, eps)?.avg_length).abs());
        }
    }
    out.push(check("blockwise exact vs expanded alphabet", worst, 1e-9));

    let mut worst = f64::NEG_INFINITY;
    for p in &pmfs {
        for eps in eps_grid(p, 5) {
            let h = erokhin_exact(p, eps)?.value;
            let l = build_code(p, eps)?;
            let t1 = theorem1_bounds(p, eps)?;
            let t2 = theorem2_bounds(p, eps)?;
            let t3 = theorem3_bounds(p, eps)?;
            let gaps = [
                t1.lower - h,
                h - t1.upper,
                t2.lower - l.avg_length,
                l.avg_length - t2.upper,
                t3.lower - l.avg_length,
                l.avg_length - t3.upper,
                t3.psi_lower - l.avg_length,
                -(l.deterministic_length() - l.avg_length),
                l.deterministic_length() - l.avg_length - phi(eps.min((-1.0_f64).exp())),
            ];
            worst = gaps.iter().copied().fold(worst, f64::max);
        }
    }
    out.push(ordering("lossless sandwich orderings", worst, 1e-9));

    let mut worst = 0.0_f64;
    for p in &pmfs {
        let x = p.info_atoms();
        for eps in [0.0, 0.1, 0.3, 0.7, 1.0] {
            let a = solve_cutoff(&x, eps)?.expectation;
            worst = worst.max((a - cutoff_expectation_variational(&x, eps)?).abs());
        }
    }
    out.push(check("cutoff vs variational form", worst, 1e-12));

    let ham2 = DistortionSpec::hamming(2);
    let (mut worst, mut residual) = (0.0_f64, f64::NEG_INFINITY);
    for bias in [0.5, 0.11] {
        let p = Pmf::bernoulli(bias)?;
        for i in 1..=if quick { 4 } else { 10 } {
            let d = bias * i as f64 / if quick { 5.0 } else { 11.0 };
            let sol = rd_solve(&p, &ham2, d)?;
            worst = worst.max((sol.rate - (binary_entropy(bias) - binary_entropy(d))).abs());
            residual = residual.max(sol.csiszar_residual);
        }
    }
    out.push(check("rate-distortion binary closed form", worst, 1e-6));
    out.push(check(
        "rate-distortion dual constraint residual",
        residual,
        1e-7,
    ));

    let (mut worst, mut worst_rplus, mut h0) = (0.0_f64, 0.0_f64, f64::NEG_INFINITY);
    for p in pmfs.iter().take(if quick { 3 } else { 10 }) {
        let ham = &ham_cache[p.len()];
        let q = source_as_output(p, ham);
        for eps in eps_grid(p, 4) {
            let lossy = rd_excess_solve(p, ham, 0.0, eps)?;
            worst = worst.max((lossy - erokhin_exact(p, eps)?.value).abs());
            let src = ProductSource::new(p.clone(), 1)?;
            let einfo = solve_cutoff(&p.info_atoms(), eps)?.expectation;
            worst_rplus = worst_rplus.max((rplus(&src, ham, 0.0, eps, &q)? - einfo).abs());
            let h = hdeps_exact(p, ham, 0.0, eps)?.value;
            let b = hamming_h0eps_bounds(p, eps)?;
            h0 = h0.max(b.lower - h).max(h - b.upper);
        }
    }
    out.push(check(
        "excess rate at zero distortion vs erokhin",
        worst,
        1e-6,
    ));
    out.push(check(
        "rplus at source output vs lossless cutoff",
        worst_rplus,
        1e-9,
    ));
    out.push(ordering(
        "zero-distortion quantizer entropy bounds",
        h0,
        1e-9,
    ));

    let mut worst = f64::NEG_INFINITY;
    for eps in [0.05, 0.1] {
        for k in 1..=if quick { 4 } else { 10 } {
            let src = ProductSource::new(base.clone(), k)?;
            let b = theorem6_bounds(&src, &ham2, 0.05, eps)?;
            worst = worst.max(b.lower - b.upper);
        }
        let q = theorem5_and_hdeps(&base, &ham2, 0.05, eps)?;
        worst = worst
            .max(q.t5_lower - q.l_det)
            .max(q.l_det - q.t5_upper)
            .max(q.t7_h_lower - q.hdeps)
            .max(q.hdeps - q.t7_h_upper);
    }
    out.push(ordering("lossy bound ladder", worst, 1e-9));

    let trials = if quick { 100_000 } else { 1_000_000 };
    let mut ok = true;
    let mut detail = String::new();
    for (p, eps) in [
        (Pmf::uniform(4)?, 0.25),
        (ProductSource::new(base.clone(), 12)?.expand(1 << 20)?, 0.1),
    ] {
        let code = build_code(&p, eps)?;
        let r = mc_validate(&code, trials, seed, 8)?;
        ok &= r.error_within_ci && r.len_within_ci;
        detail.push_str(&format!(
            "[err {:.5} vs {:.5}, len {:.5} vs {:.5}] ",
            r.emp_error, r.expected_error, r.emp_avg_len, r.expected_avg_len
        ));
    }
    out.push(CheckResult {
        name: "monte carlo closure".into(),
        passed: ok,
        detail: detail.trim_end().into(),
    });

    let atoms = DiscreteDist::from_pairs(vec![(0.0, 0.3), (1.5, 0.5), (4.0, 0.2)])?;
    let c = solve_cutoff(&atoms, 0.25)?;
    out.push(check(
        "cutoff threshold equation",
        (c.mass_above + c.alpha * c.mass_at - 0.25).abs(),
        1e-15,
    ));
    Ok(out)
}
