//! Analytical speed quotient of table lookup over array lookup.
//!
//! A table probe costs `log2 r − 1` positioned reads (binary search) or
//! `log_t((r+1)/2) + 1` (B-tree worst case plus the row read). An array
//! probe costs `k − 1` multiplications plus one positioned read. Only the
//! ratio `p = P/M` of read time to multiplication time matters.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Positioning-and-read time over multiplication time.
    pub p: f64,
    /// B-tree minimal degree.
    pub t: u32,
}

impl CostParams {
    pub fn new(p: f64, t: u32) -> Result<Self> {
        check_p(p)?;
        if t < 2 {
            return Err(Error::param(format!("minimal degree {t} below 2")));
        }
        Ok(CostParams { p, t })
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("p = {p} must be positive and finite")))
    }
}

fn array_cost(k: u32, p: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    check_p(p)?;
    Ok(f64::from(k - 1) / p + 1.0)
}

/// `Q = (log2 r − 1) / ((k − 1)/p + 1)` for binary search over the table.
pub fn q_plain(r: u64, k: u32, p: f64) -> Result<f64> {
    if r < 2 {
        return Err(Error::param(format!("r = {r}, binary-search model needs r >= 2")));
    }
    Ok(((r as f64).log2() - 1.0) / array_cost(k, p)?)
}

/// `Q = (log_t((r+1)/2) + 1) / ((k − 1)/p + 1)` for a B-tree indexed table.
pub fn q_btree(r: u64, k: u32, p: f64, t: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::param("r must be at least 1"));
    }
    if t < 2 {
        return Err(Error::param(format!("minimal degree {t} below 2")));
    }
    let reads = ((r as f64 + 1.0) / 2.0).ln() / f64::from(t).ln() + 1.0;
    Ok(reads / array_cost(k, p)?)
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    BinarySearch,
    BTree { t: u32 },
}

/// One r × k grid of quotients for a fixed p.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub p: f64,
    pub model: Model,
    pub r_values: Vec<u64>,
    pub k_values: Vec<u32>,
    /// Unrounded, row-major by r.
    pub cells: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn compute(p: f64, model: Model, r_values: &[u64], k_values: &[u32]) -> Result<Self> {
        let cells = r_values
            .iter()
            .map(|&r| {
                k_values
                    .iter()
                    .map(|&k| match model {
                        Model::BinarySearch => q_plain(r, k, p),
                        Model::BTree { t } => q_btree(r, k, p, t),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CostTable {
            p,
            model,
            r_values: r_values.to_vec(),
            k_values: k_values.to_vec(),
            cells,
        })
    }

    pub fn title(&self) -> String {
        match self.model {
            Model::BinarySearch => format!("p = {}", self.p),
            Model::BTree { t } => format!("p = {}, t = {t}", self.p),
        }
    }

    pub fn rounded(&self, ri: usize, ki: usize) -> f64 {
        round2(self.cells[ri][ki])
    }

    /// Aligned plain text: r down the side, k across the top.
    pub fn to_text(&self) -> String {
        let r_w = self
            .r_values
            .iter()
            .map(|&r| group_thousands(r).len())
            .max()
            .unwrap_or(1)
            .max(1);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title());
        let _ = write!(out, "{:>r_w$}", "r \\ k");
        for k in &self.k_values {
            let _ = write!(out, " {k:>8}");
        }
        out.push('\n');
        for (ri, &r) in self.r_values.iter().enumerate() {
            let _ = write!(out, "{:>r_w$}", group_thousands(r));
            for ki in 0..self.k_values.len() {
                let _ = write!(out, " {:>8.2}", self.rounded(ri, ki));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with header `r,k=…,k=…`, values rounded to two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r");
        for k in &self.k_values {
            let _ = write!(out, ",k={k}");
        }
        out.push('\n');
        for (ri, r) in self.r_values.iter().enumerate() {
            let _ = write!(out, "{r}");
            for ki in 0..self.k_values.len() {
                let _ = write!(out, ",{:.2}", self.rounded(ri, ki));
            }
            out.push('\n');
        }
        out
    }
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub const DEFAULT_P: [f64; 6] = [1.0, 10.0, 100.0, 500.0, 1000.0, 1500.0];
pub const DEFAULT_R: [u64; 5] = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
pub const DEFAULT_K: [u32; 5] = [5, 10, 15, 20, 25];
pub const DEFAULT_BTREE_P: f64 = 1500.0;
pub const DEFAULT_T: u32 = 89;

/// One binary-search table per p, then one B-tree table at `btree_p`.
pub fn emit_cost_tables(
    p_values: &[f64],
    r_values: &[u64],
    k_values: &[u32],
    btree: Option<(f64, u32)>,
) -> Result<Vec<CostTable>> {
    if p_values.is_empty() || r_values.is_empty() || k_values.is_empty() {
        return Err(Error::param("cost tables need nonempty p, r and k lists"));
    }
    let mut tables = p_values
        .iter()
        .map(|&p| CostTable::compute(p, Model::BinarySearch, r_values, k_values))
        .collect::<Result<Vec<_>>>()?;
    if let Some((p, t)) = btree {
        tables.push(CostTable::compute(p, Model::BTree { t }, r_values, k_values)?);
    }
    Ok(tables)
}

pub fn default_cost_tables() -> Vec<CostTable> {
    emit_cost_tables(
        &DEFAULT_P,
        &DEFAULT_R,
        &DEFAULT_K,
        Some((DEFAULT_BTREE_P, DEFAULT_T)),
    )
    .expect("default parameters are valid")
}
