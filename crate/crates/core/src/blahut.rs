//! Blahut-Arimoto alternating minimization for rate-distortion functions of
//! finite sources, in nats.
//!
//! Two routes to `R(D)` at a target distortion are provided: matching the
//! slope so that the fixed point's distortion equals the target (constraint
//! `E d = D`), and maximizing the concave dual `max_{s>=0} G(s) - s D`
//! (constraint `E d <= D`).

use crate::error::{Error, Result};

/// Iteration controls for the inner fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaOptions {
    /// Stop when `max_z ln c(z) - sum_z q(z) ln c(z)` falls below this (nats).
    pub tol: f64,
    pub max_iter: usize,
    /// Gap (nats) still accepted when `max_iter` is reached.
    pub accept_tol: f64,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 100_000,
            accept_tol: 1e-9,
        }
    }
}

/// Fixed point of the alternating minimization at a given slope.
#[derive(Debug, Clone, PartialEq)]
pub struct BaPoint {
    /// Lagrange multiplier `s` (nats per unit distortion).
    pub slope: f64,
    /// Output distribution.
    pub q: Vec<f64>,
    /// Mutual information of the fixed-point channel, nats.
    pub rate: f64,
    /// Average distortion of the fixed-point channel.
    pub distortion: f64,
    /// `-E[ln sum_z q(z) exp(-s d(S, z))]`, nats.
    pub log_partition: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// Iterates `q(z) <- q(z) sum_x p(x) a(x,z) / sum_z' q(z') a(x,z')` until the
/// optimality gap drops below `opts.tol`. Returns `(q, iterations, gap)`.
pub fn iterate_kernel(
    p: &[f64],
    a: &[Vec<f64>],
    q0: Option<&[f64]>,
    opts: BaOptions,
) -> Result<(Vec<f64>, usize, f64)> {
    let nz = a[0].len();
    let mut q: Vec<f64> = match q0 {
        Some(q0) => {
            // Reseed vanished components so the multiplicative update can
            // revive them.
            let u = 1.0 / nz as f64;
            q0.iter().map(|&v| 0.999 * v + 0.001 * u).collect()
        }
        None => vec![1.0 / nz as f64; nz],
    };
    let mut c = vec![0.0; nz];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        c.iter_mut().for_each(|v| *v = 0.0);
        for (row, &px) in a.iter().zip(p) {
            let zx: f64 = row.iter().zip(&q).map(|(&axz, &qz)| axz * qz).sum();
            let w = px / zx;
            for (cz, &axz) in c.iter_mut().zip(row) {
                *cz += w * axz;
            }
        }
        let mut max_lc = f64::NEG_INFINITY;
        let mut mean_lc = 0.0;
        for (&cz, &qz) in c.iter().zip(&q) {
            if cz > 0.0 {
                let lc = cz.ln();
                max_lc = max_lc.max(lc);
                if qz > 0.0 {
                    mean_lc += qz * lc;
                }
            }
        }
        gap = max_lc - mean_lc;
        for (qz, &cz) in q.iter_mut().zip(&c) {
            *qz *= cz;
        }
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= total);
        if gap <= opts.tol {
            return Ok((q, iterations, gap));
        }
    }
    if gap <= opts.accept_tol {
        return Ok((q, iterations, gap));
    }
    Err(Error::NotConverged {
        iterations,
        residual: gap,
    })
}

/// Finds the slope whose fixed point has distortion `target`, searching
/// `s = sign * t` for `t > 0`, and returns the fixed point closest to the
/// target. `fixed_point(s, warm)` must give distortions that decrease in `s`.
pub fn match_slope<F>(mut fixed_point: F, sign: f64, target: f64) -> Result<BaPoint>
where
    F: FnMut(f64, Option<&[f64]>) -> Result<BaPoint>,
{
    let past = |d: f64| if sign > 0.0 { d < target } else { d > target };
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut best = fixed_point(sign * hi, None)?;
    let mut guard = 0;
    while !past(best.distortion) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::NotConverged {
                iterations: guard,
                residual: (best.distortion - target).abs(),
            });
        }
        best = fixed_point(sign * hi, Some(&best.q))?;
    }
    let mut warm = best.q.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pt = fixed_point(sign * mid, Some(&warm))?;
        warm.clone_from(&pt.q);
        let done = (pt.distortion - target).abs() <= 1e-15;
        if past(pt.distortion) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (pt.distortion - target).abs() < (best.distortion - target).abs() {
            best = pt;
        }
        if done || hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(best)
}

/// Rate at `target` from a nearby fixed point, corrected to first order
/// along the curve (the slope of `R(D)` is `-s`).
pub fn corrected_rate(pt: &BaPoint, target: f64) -> f64 {
    (pt.rate - pt.slope * (target - pt.distortion)).max(0.0)
}

/// A finite rate-distortion problem: source pmf and distortion matrix
/// `dist[x][z]`.
#[derive(Debug, Clone, Copy)]
pub struct RdProblem<'a> {
    pub p: &'a [f64],
    pub dist: &'a [Vec<f64>],
}

impl RdProblem<'_> {
    fn outputs(&self) -> usize {
        self.dist[0].len()
    }

    /// `E[min_z d(S, z)]`.
    pub fn d_min(&self) -> f64 {
        self.p
            .iter()
            .zip(self.dist)
            .map(|(&px, row)| px * row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// `min_z E[d(S, z)]`.
    pub fn d_max(&self) -> f64 {
        (0..self.outputs())
            .map(|z| self.column_mean(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_z E[d(S, z)]`, the end of the zero-rate plateau of the
    /// equality-constrained problem.
    pub fn plateau_end(&self) -> f64 {
        (0..self.outputs())
            .map(|z| self.column_mean(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `E[max_z d(S, z)]`, the largest attainable average distortion.
    pub fn d_ceiling(&self) -> f64 {
        self.p
            .iter()
            .zip(self.dist)
            .map(|(&px, row)| px * row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum()
    }

    fn column_mean(&self, z: usize) -> f64 {
        self.p
            .iter()
            .zip(self.dist)
            .map(|(&px, row)| px * row[z])
            .sum()
    }

    /// Runs the fixed-point iteration at slope `s` from `q0` (uniform when
    /// `None`).
    pub fn fixed_point(&self, s: f64, q0: Option<&[f64]>, opts: BaOptions) -> Result<BaPoint> {
        // a[x][z] = exp(-s d(x,z) + shift_x) with shift_x = min_z s d(x,z).
        let shifts: Vec<f64> = self
            .dist
            .iter()
            .map(|row| row.iter().map(|&d| s * d).fold(f64::INFINITY, f64::min))
            .collect();
        let a: Vec<Vec<f64>> = self
            .dist
            .iter()
            .zip(&shifts)
            .map(|(row, &sh)| row.iter().map(|&d| (-(s * d) + sh).exp()).collect())
            .collect();
        let (q, iterations, gap) = iterate_kernel(self.p, &a, q0, opts)?;
        let mut rate = 0.0;
        let mut distortion = 0.0;
        let mut log_partition = 0.0;
        for (x, row) in a.iter().enumerate() {
            let z: f64 = row.iter().zip(&q).map(|(&axz, &qz)| axz * qz).sum();
            log_partition -= self.p[x] * (z.ln() - shifts[x]);
            for (zi, (&axz, &qz)) in row.iter().zip(&q).enumerate() {
                if qz > 0.0 && axz > 0.0 {
                    let w = qz * axz / z;
                    rate += self.p[x] * w * (axz / z).ln();
                    distortion += self.p[x] * w * self.dist[x][zi];
                }
            }
        }
        Ok(BaPoint {
            slope: s,
            q,
            rate: rate.max(0.0),
            distortion,
            log_partition,
            iterations,
            gap,
        })
    }

    /// `R(D)` in nats under the constraint `E d = target`, by bisection on
    /// the slope (negative slopes when `target` is beyond the zero-rate
    /// plateau). Returns the corrected rate and the final fixed point.
    pub fn rate_equality(&self, target: f64, opts: BaOptions) -> Result<(f64, BaPoint)> {
        let (d_min, d_max, ceiling) = (self.d_min(), self.d_max(), self.d_ceiling());
        if target <= d_min || target >= ceiling {
            return Err(Error::OutOfRange {
                d: target,
                d_min,
                d_max: ceiling,
            });
        }
        let sign = if target < d_max {
            1.0
        } else if target <= self.plateau_end() {
            let q = self.constant_output(target);
            return Ok((0.0, self.zero_rate_point(q)));
        } else {
            -1.0
        };
        let best = match_slope(|s, warm| self.fixed_point(s, warm, opts), sign, target)?;
        Ok((corrected_rate(&best, target), best))
    }

    /// `R(D)` in nats under `E d <= target` via golden-section maximization of
    /// the concave dual `-E[ln sum_z q*_s(z) e^{-s d}] - s D` over `s >= 0`.
    pub fn rate_inequality(&self, target: f64, opts: BaOptions) -> Result<f64> {
        let (d_min, d_max) = (self.d_min(), self.d_max());
        if target >= d_max {
            return Ok(0.0);
        }
        if target <= d_min {
            return Err(Error::OutOfRange {
                d: target,
                d_min,
                d_max,
            });
        }
        let mut warm: Option<Vec<f64>> = None;
        let mut dual = |s: f64| -> Result<(f64, f64)> {
            let pt = self.fixed_point(s, warm.as_deref(), opts)?;
            warm = Some(pt.q.clone());
            Ok((pt.log_partition - s * target, pt.distortion))
        };
        // Expand until the fixed point's distortion drops below the target,
        // which puts the dual maximizer inside [0, hi].
        let mut hi = 1.0_f64;
        let mut guard = 0;
        while dual(hi)?.1 > target {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(Error::NotConverged {
                    iterations: guard,
                    residual: f64::NAN,
                });
            }
        }
        let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0_f64, hi);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let mut f1 = dual(x1)?.0;
        let mut f2 = dual(x2)?.0;
        for _ in 0..200 {
            if b - a <= 1e-12 * b.max(1.0) {
                break;
            }
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = dual(x2)?.0;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = dual(x1)?.0;
            }
        }
        Ok(f1.max(f2).max(0.0))
    }

    /// Output distribution independent of the source achieving `E d = target`
    /// by mixing the least and most distorting constants.
    fn constant_output(&self, target: f64) -> Vec<f64> {
        let nz = self.outputs();
        let means: Vec<f64> = (0..nz).map(|z| self.column_mean(z)).collect();
        let (zlo, zhi) = means.iter().enumerate().fold((0, 0), |(lo, hi), (z, &m)| {
            (
                if m < means[lo] { z } else { lo },
                if m > means[hi] { z } else { hi },
            )
        });
        let mut q = vec![0.0; nz];
        if means[zhi] - means[zlo] <= 0.0 {
            q[zlo] = 1.0;
        } else {
            let t = (target - means[zlo]) / (means[zhi] - means[zlo]);
            q[zlo] += 1.0 - t;
            q[zhi] += t;
        }
        q
    }

    fn zero_rate_point(&self, q: Vec<f64>) -> BaPoint {
        let distortion = self
            .p
            .iter()
            .zip(self.dist)
            .map(|(&px, row)| px * row.iter().zip(&q).map(|(&d, &qz)| d * qz).sum::<f64>())
            .sum();
        BaPoint {
            slope: 0.0,
            q,
            rate: 0.0,
            distortion,
            log_partition: 0.0,
            iterations: 0,
            gap: 0.0,
        }
    }
}

/// Hamming distortion matrix on `n` symbols.
pub fn hamming_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|x| (0..n).map(|z| if x == z { 0.0 } else { 1.0 }).collect())
        .collect()
}
