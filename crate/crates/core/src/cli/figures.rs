use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::iidlimits::{build_type_table, curve_point, CurvePoint, RemainderMode};
use crate::source::{entropy, Pmf, ProductSource};

use super::{erokhin_table, fmt12, Cell, ErokhinArgs, OutputArgs, SourceArgs, Table};

/// Bias of the binary source used by every figure.
pub const FIGURE_BIAS: f64 = 0.11;

/// Figure data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Figure {
    /// Erokhin's function and its bounds against the error probability.
    Fig1,
    /// Distribution of the per-symbol optimal zero-error length.
    Fig2,
    /// Exact and approximate per-symbol rate against k for two error levels.
    Fig3,
    /// Exact per-symbol rate, bounds and approximation against k.
    Fig4,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

/// Block lengths 1..=100, then every 10 up to 1000.
pub fn figure_k_grid() -> Vec<usize> {
    (1..=100).chain((110..=1000).step_by(10)).collect()
}

/// Error levels of the two-curve figure.
pub const FIG3_EPSILONS: [f64; 2] = [1e-4, 0.1];

pub fn figure_table(fig: Figure) -> Result<(Table, Vec<String>)> {
    let base = Pmf::bernoulli(FIGURE_BIAS)?;
    match fig {
        Figure::Fig1 => erokhin_table(&ErokhinArgs {
            source: SourceArgs {
                source: None,
                bernoulli: Some(FIGURE_BIAS),
                uniform: None,
            },
            eps_grid: "0:0.108:0.002".into(),
            output: OutputArgs {
                out: None,
                format: None,
            },
        }),
        Figure::Fig2 => {
            let mut table = Table::new(&["k", "rate", "mass"]);
            for k in [50, 200, 1000] {
                let t = build_type_table(&ProductSource::new(base.clone(), k)?)?;
                for (len, &mass) in t.length_class_masses().iter().enumerate() {
                    if mass > 0.0 {
                        table.push(
                            vec![k.into(), (len as f64 / k as f64).into(), mass.into()],
                            &format!("k={k}"),
                        );
                    }
                }
            }
            Ok((table, Vec::new()))
        }
        Figure::Fig3 => {
            let h = entropy(&base);
            let points: Vec<(f64, usize)> = FIG3_EPSILONS
                .iter()
                .flat_map(|&e| figure_k_grid().into_iter().map(move |k| (e, k)))
                .collect();
            let curve = curve_points(&base, &points)?;
            let mut table = Table::new(&[
                "eps",
                "k",
                "exact_rate",
                "approx_rate",
                "main_rate",
                "limit_rate",
            ]);
            let mut violations = Vec::new();
            for pt in &curve {
                let kf = pt.k as f64;
                check_curve(pt, &mut violations);
                table.push(
                    vec![
                        pt.epsilon.into(),
                        pt.k.into(),
                        (pt.lstar / kf).into(),
                        (pt.approx.total() / kf).into(),
                        (pt.approx.main / kf).into(),
                        ((1.0 - pt.epsilon) * h).into(),
                    ],
                    &format!("k={}", pt.k),
                );
            }
            Ok((table, violations))
        }
        Figure::Fig4 => {
            let points: Vec<(f64, usize)> = figure_k_grid().into_iter().map(|k| (0.1, k)).collect();
            let curve = curve_points(&base, &points)?;
            let mut table = Table::new(&[
                "k",
                "exact_rate",
                "lower_rate",
                "upper_rate",
                "approx_rate",
                "zero_error_rate",
            ]);
            let mut violations = Vec::new();
            for pt in &curve {
                let kf = pt.k as f64;
                check_curve(pt, &mut violations);
                let label = format!("k={}", pt.k);
                match (pt.t2_lower, pt.t2_upper) {
                    (Some(lo), Some(hi)) => table.push(
                        vec![
                            Cell::from(pt.k),
                            (pt.lstar / kf).into(),
                            (lo / kf).into(),
                            (hi / kf).into(),
                            (pt.approx.total() / kf).into(),
                            (pt.lstar_zero / kf).into(),
                        ],
                        &label,
                    ),
                    _ => table
                        .notes
                        .push(format!("{label}: omitted, bounds undefined")),
                }
            }
            Ok((table, violations))
        }
    }
}

fn curve_points(base: &Pmf, points: &[(f64, usize)]) -> Result<Vec<CurvePoint>> {
    points
        .par_iter()
        .map(|&(eps, k)| curve_point(base, k, eps, RemainderMode::BinaryRefinedDefault))
        .collect()
}

fn check_curve(pt: &CurvePoint, violations: &mut Vec<String>) {
    if let (Some(lo), Some(hi)) = (pt.t2_lower, pt.t2_upper) {
        if !(lo <= pt.lstar + 1e-9 && pt.lstar <= hi + 1e-9) {
            violations.push(format!(
                "k={} eps={}: {lo} <= {} <= {hi} fails",
                pt.k,
                fmt12(pt.epsilon),
                pt.lstar
            ));
        }
    }
}
