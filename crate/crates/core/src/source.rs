//! Source models and the scalar information quantities built on them.
//!
//! A [`Pmf`] holds a finite distribution with zero-mass symbols removed and a
//! deterministic probability-descending rank order. [`ProductSource`] is the
//! memoryless extension `P_S x ... x P_S`. [`DiscreteDist`] is a finite
//! real-valued random variable, used for information spectra, code lengths and
//! tilted informations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of atoms produced by [`DiscreteDist::iid_sum`].
pub const DEFAULT_ATOM_CAP: u128 = 10_000_000;

const SUM_TOLERANCE: f64 = 1e-9;

/// On-disk source description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFile {
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Finite probability mass function on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
    labels: Option<Vec<String>>,
    /// Index of each support symbol in the caller's original alphabet.
    original: Vec<usize>,
    /// Support indices sorted by decreasing probability, ties by index.
    order: Vec<usize>,
    /// Inverse of `order` (0-based rank of each support symbol).
    rank_of: Vec<usize>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_labels(probs, None)
    }

    pub fn with_labels(probs: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("probs is empty".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != probs.len() {
                return Err(Error::InvalidPmf(format!(
                    "labels has {} entries but probs has {}",
                    labels.len(),
                    probs.len()
                )));
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPmf(format!(
                    "probs[{i}] = {p} is not a probability"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidPmf(format!("probs sum to {total}, not 1")));
        }
        let mut kept = Vec::new();
        let mut original = Vec::new();
        let mut kept_labels = labels.as_ref().map(|_| Vec::new());
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                kept.push(p / total);
                original.push(i);
                if let (Some(out), Some(src)) = (kept_labels.as_mut(), labels.as_ref()) {
                    out.push(src[i].clone());
                }
            }
        }
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&a, &b| kept[b].total_cmp(&kept[a]).then(a.cmp(&b)));
        let mut rank_of = vec![0; kept.len()];
        for (rank, &sym) in order.iter().enumerate() {
            rank_of[sym] = rank;
        }
        Ok(Self {
            probs: kept,
            labels: kept_labels,
            original,
            order,
            rank_of,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPmf("uniform over an empty alphabet".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Binary source with symbol 1 of probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPmf(format!(
                "bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Self::new(vec![1.0 - p, p])
    }

    pub fn from_file(file: SourceFile) -> Result<Self> {
        Self::with_labels(file.probs, file.labels)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: SourceFile = serde_json::from_str(json)
            .map_err(|e| Error::InvalidPmf(format!("malformed source file: {e}")))?;
        Self::from_file(file)
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidPmf(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Support size.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn original_index(&self, symbol: usize) -> usize {
        self.original[symbol]
    }

    pub fn original_indices(&self) -> &[usize] {
        &self.original
    }

    /// Support indices in probability-descending order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based rank of a support symbol.
    pub fn rank(&self, symbol: usize) -> Result<usize> {
        self.rank_of
            .get(symbol)
            .map(|r| r + 1)
            .ok_or(Error::UnknownSymbol(symbol))
    }

    /// Support symbol holding 1-based rank `rank`.
    pub fn symbol_at_rank(&self, rank: usize) -> Option<usize> {
        rank.checked_sub(1).and_then(|r| self.order.get(r).copied())
    }

    /// Probabilities in rank order.
    pub fn ranked_probs(&self) -> Vec<f64> {
        self.order.iter().map(|&s| self.probs[s]).collect()
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.order[0]]
    }

    /// `-log2 P(symbol)`.
    pub fn information(&self, symbol: usize) -> f64 {
        -self.probs[symbol].log2()
    }

    /// Information spectrum of a single draw.
    pub fn info_atoms(&self) -> DiscreteDist {
        DiscreteDist::from_pairs(
            self.probs
                .iter()
                .map(|&p| (-p.log2(), p))
                .collect::<Vec<_>>(),
        )
        .expect("pmf atoms are valid")
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.probs[0];
        self.probs.iter().all(|&p| (p - first).abs() <= 1e-15)
    }
}

/// Entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    p.probs()
        .iter()
        .map(|&q| -q * q.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Variance of the information `-log2 P(S)`, in bits squared.
pub fn varentropy(p: &Pmf) -> f64 {
    let h = entropy(p);
    p.probs()
        .iter()
        .map(|&q| {
            let dev = -q.log2() - h;
            q * dev * dev
        })
        .sum()
}

/// `E|i(S) - H(S)|^3` in bits cubed.
pub fn third_abs_moment(p: &Pmf) -> f64 {
    let h = entropy(p);
    p.probs()
        .iter()
        .map(|&q| q * (-q.log2() - h).abs().powi(3))
        .sum()
}

/// Memoryless extension of a base pmf to blocks of length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSource {
    base: Pmf,
    k: usize,
}

impl ProductSource {
    pub fn new(base: Pmf, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidBlockLength);
        }
        Ok(Self { base, k })
    }

    pub fn base(&self) -> &Pmf {
        &self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Fully expanded pmf over `|A|^k` strings, in lexicographic order of the
    /// base support indices (first coordinate most significant).
    pub fn expand(&self, cap: usize) -> Result<Pmf> {
        let a = self.base.len();
        let size = (a as u128).checked_pow(self.k as u32).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::ScaleExceeded(format!(
                "expanding {a}^{} = {size} strings exceeds {cap}",
                self.k
            )));
        }
        let mut probs = vec![1.0];
        for _ in 0..self.k {
            let mut next = Vec::with_capacity(probs.len() * a);
            for &p in &probs {
                for &q in self.base.probs() {
                    next.push(p * q);
                }
            }
            probs = next;
        }
        let total: f64 = probs.iter().sum();
        Pmf::new(probs.into_iter().map(|p| p / total).collect())
    }

    /// Information spectrum of a block, `sum_i -log2 P(S_i)`.
    pub fn info_distribution(&self, cap: u128) -> Result<DiscreteDist> {
        self.base.info_atoms().iid_sum(self.k, cap)
    }
}

/// Number of compositions of `k` into `parts` nonnegative parts, saturating.
pub fn composition_count(k: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(k == 0);
    }
    // C(k + parts - 1, parts - 1) computed incrementally.
    let n = (k + parts - 1) as u128;
    let r = (parts - 1).min(k) as u128;
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All compositions of `k` into `parts` parts, in lexicographic order.
pub fn compositions(k: usize, parts: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: usize, slot: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slot + 1 == cur.len() {
            cur[slot] = remaining as u32;
            out.push(cur.clone());
            return;
        }
        for n in (0..=remaining).rev() {
            cur[slot] = n as u32;
            rec(remaining - n, slot + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    let mut cur = vec![0u32; parts];
    rec(k, 0, &mut cur, &mut out);
    out
}

/// Table of `ln n!` for `n <= max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max + 1);
    let mut acc = 0.0_f64;
    table.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        table.push(acc);
    }
    table
}

/// One atom of a discrete real-valued distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Finite discrete distribution on the real line. Atoms are sorted by
/// increasing value, carry positive mass, and have distinct values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<Atom>,
}

fn values_merge(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl DiscreteDist {
    /// Builds a distribution from `(value, prob)` pairs, dropping zero-mass
    /// pairs and merging values that agree to within float noise.
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        for (value, prob) in pairs {
            if !value.is_finite() || !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "atom ({value}, {prob}) is not a finite value with nonnegative mass"
                )));
            }
            if prob > 0.0 {
                atoms.push(Atom { value, prob });
            }
        }
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("distribution has no mass".into()));
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if values_merge(last.value, atom.value) => {
                    // Keep the value of the heavier contributor.
                    if atom.prob > last.prob {
                        last.value = atom.value;
                    }
                    last.prob += atom.prob;
                }
                _ => merged.push(atom),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            atoms: vec![Atom { value, prob: 1.0 }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.value - m) * (a.value - m))
            .sum()
    }

    pub fn third_abs_central_moment(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.value - m).abs().powi(3))
            .sum()
    }

    /// Distribution of the sum of `k` independent copies.
    ///
    /// Atoms of the sum are indexed by the multiset of base atoms that
    /// produced them, so every value is computed once as `sum n_j v_j` and
    /// every mass as a multinomial in the log domain.
    pub fn iid_sum(&self, k: usize, cap: u128) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidBlockLength);
        }
        let parts = self.atoms.len();
        let count = composition_count(k, parts);
        if count > cap {
            return Err(Error::AtomCapExceeded { atoms: count, cap });
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let lnf = ln_factorials(k);
        let ln_p: Vec<f64> = self.atoms.iter().map(|a| a.prob.ln()).collect();
        let mut pairs = Vec::with_capacity(count as usize);
        for comp in compositions(k, parts) {
            let mut value = 0.0;
            let mut lp = lnf[k];
            for (j, &n) in comp.iter().enumerate() {
                if n > 0 {
                    value += n as f64 * self.atoms[j].value;
                    lp += n as f64 * ln_p[j] - lnf[n as usize];
                }
            }
            pairs.push((value, lp.exp()));
        }
        Self::from_pairs(pairs)
    }
}
