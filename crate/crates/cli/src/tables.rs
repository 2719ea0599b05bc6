//! Comparative statics around the reference two-regime model.

use std::io::Write;

use regime_dividends::analytics::single_regime_barrier;
use regime_dividends::format::fmt_sig;
use regime_dividends::model::{reference_model, RegimeParams};
use regime_dividends::two_regime::solve_positive;
use regime_dividends::{RegimeModel, Result};

/// Reference values the regenerated table is compared against.
pub const REFERENCE_CSV: &str = include_str!("../data/sensitivity_reference.csv");

/// Largest deviation a regenerated cell may show.
pub const CELL_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Varied {
    Mu0,
    Sigma0,
    Q00,
    R0,
}

impl Varied {
    pub const ALL: [Varied; 4] = [Varied::Mu0, Varied::Sigma0, Varied::Q00, Varied::R0];

    pub fn name(self) -> &'static str {
        match self {
            Varied::Mu0 => "mu0",
            Varied::Sigma0 => "sigma0",
            Varied::Q00 => "q00",
            Varied::R0 => "r0",
        }
    }

    pub fn values(self) -> [f64; 4] {
        match self {
            Varied::Mu0 => [0.04, 0.08, 0.38, 1.00],
            Varied::Sigma0 => [0.16, 0.20, 0.28, 0.32],
            Varied::Q00 => [-4.0, -3.0, -1.0, -0.01],
            Varied::R0 => [0.02, 0.03, 0.05, 0.06],
        }
    }

    /// The reference model with one regime-0 parameter replaced.
    pub fn model(self, value: f64) -> Result<RegimeModel> {
        let base = reference_model();
        let s0 = *base.state(0);
        let s1 = *base.state(1);
        let (mut q01, q10) = (base.rate(0, 1), base.rate(1, 0));
        let s0 = match self {
            Varied::Mu0 => RegimeParams::new(value, s0.sigma, s0.discount),
            Varied::Sigma0 => RegimeParams::new(s0.mu, value, s0.discount),
            Varied::R0 => RegimeParams::new(s0.mu, s0.sigma, value),
            Varied::Q00 => {
                q01 = -value;
                s0
            }
        };
        RegimeModel::two_state(s0, s1, q01, q10)
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub varied: &'static str,
    pub value: f64,
    /// Single-regime barrier of regime 0 at its own discount rate.
    pub a0_star: Result<f64>,
    pub barriers: Result<[f64; 2]>,
}

pub fn compute_tables(tol: f64) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for v in Varied::ALL {
        for value in v.values() {
            let model = v.model(value);
            let (a0_star, barriers) = match model {
                Ok(m) => {
                    let s = m.state(0);
                    (
                        single_regime_barrier(s.mu, s.sigma, s.discount),
                        solve_positive(&m, tol).map(|sol| sol.barriers),
                    )
                }
                Err(e) => (Err(e.clone()), Err(e)),
            };
            rows.push(TableRow {
                varied: v.name(),
                value,
                a0_star,
                barriers,
            });
        }
    }
    rows
}

fn cell(r: &Result<f64>) -> String {
    match r {
        Ok(x) => fmt_sig(*x),
        Err(_) => "failed".into(),
    }
}

pub fn write_tables<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "varied_param,value,a0_star,b0_star,b1_star")?;
    for r in rows {
        let b = |k: usize| r.barriers.as_ref().map(|b| b[k]).map_err(Clone::clone);
        writeln!(
            out,
            "{},{},{},{},{}",
            r.varied,
            fmt_sig(r.value),
            cell(&r.a0_star),
            cell(&b(0)),
            cell(&b(1))
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub varied: String,
    pub value: f64,
    pub cells: [f64; 3],
}

pub fn reference_rows() -> Vec<ReferenceRow> {
    REFERENCE_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |k: usize| f[k].trim().parse::<f64>().expect("reference table is numeric");
            ReferenceRow {
                varied: f[0].to_string(),
                value: num(1),
                cells: [num(2), num(3), num(4)],
            }
        })
        .collect()
}

/// One cell compared against the reference table.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDeviation {
    pub varied: String,
    pub value: f64,
    pub column: &'static str,
    pub computed: Option<f64>,
    pub reference: f64,
}

impl CellDeviation {
    pub fn deviation(&self) -> f64 {
        self.computed.map_or(f64::INFINITY, |c| (c - self.reference).abs())
    }

    pub fn within_tolerance(&self) -> bool {
        self.deviation() <= CELL_TOLERANCE + 1e-12
    }
}

pub fn compare_with_reference(rows: &[TableRow]) -> Vec<CellDeviation> {
    const COLUMNS: [&str; 3] = ["a0_star", "b0_star", "b1_star"];
    let mut out = Vec::new();
    for r in reference_rows() {
        let computed = rows
            .iter()
            .find(|c| c.varied == r.varied && (c.value - r.value).abs() < 1e-12);
        for (k, column) in COLUMNS.iter().enumerate() {
            let value = computed.and_then(|c| match k {
                0 => c.a0_star.as_ref().ok().copied(),
                _ => c.barriers.as_ref().ok().map(|b| b[k - 1]),
            });
            out.push(CellDeviation {
                varied: r.varied.clone(),
                value: r.value,
                column,
                computed: value,
                reference: r.cells[k],
            });
        }
    }
    out
}
