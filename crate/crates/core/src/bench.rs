//! Synthetic relations and the point-lookup comparison of the two
//! representations.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Uniform
//! integers below `n` are drawn by rejection from `next_u64` (values at or
//! above the largest multiple of `n` are redrawn), so sequences do not
//! depend on any library's range-sampling algorithm.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array_store::ArrayStore;
use crate::cost_model::round2;
use crate::error::{Error, Result};
use crate::linearizer::{LogicalIndex, Shape};
use crate::relation::{
    ColumnType, DimensionDirectory, EncodedRow, MeasureColumn, RelationSchema, PRESENCE_RECORD,
};
use crate::table_store::TableStore;

pub const DEFAULT_SIZES: [usize; 7] = [100, 500, 1_000, 5_000, 10_000, 50_000, 100_000];

/// Coordinate buffers above this many bytes are refused.
const MAX_SAMPLE_BYTES: usize = 1 << 31;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `0..n` by rejection sampling. `n` must be positive.
pub fn uniform_below(rng: &mut impl RngCore, n: u64) -> u64 {
    assert!(n > 0);
    let zone = (u64::MAX / n) * n;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % n;
        }
    }
}

/// `count` distinct values from `0..n`, ascending (Floyd's algorithm).
fn distinct_below(rng: &mut impl RngCore, n: u64, count: u64) -> Vec<u64> {
    if count == n {
        return (0..n).collect();
    }
    let mut chosen = HashSet::with_capacity(count as usize);
    for j in n - count..n {
        let t = uniform_below(rng, j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut out: Vec<u64> = chosen.into_iter().collect();
    out.sort_unstable();
    out
}

/// A generated relation, already encoded and in logical order.
#[derive(Debug, Clone)]
pub struct SyntheticRelation {
    pub schema: RelationSchema,
    pub dirs: Vec<DimensionDirectory>,
    pub rows: Vec<(LogicalIndex, EncodedRow)>,
}

/// Name of value `index` (1-based) of dimension `dim` (1-based). Zero
/// padding keeps bytewise order equal to index order.
pub fn synthetic_value(dim: usize, index: u32, card: u32) -> String {
    let width = card.to_string().len();
    format!("d{dim}_{index:0width$}")
}

/// Picks `⌊ρ·∏c_i⌋` distinct cells uniformly and fills their measures with
/// pseudo-random values.
pub fn generate_synthetic(
    cards: &[u32],
    rho_target: f64,
    measures: &[MeasureColumn],
    seed: u64,
) -> Result<SyntheticRelation> {
    if !(rho_target > 0.0 && rho_target <= 1.0) {
        return Err(Error::param(format!("target density {rho_target} outside (0, 1]")));
    }
    let shape = Shape::new(cards.to_vec())?;
    let total = shape.total();
    let count = ((rho_target * total as f64).floor() as u64).min(total);
    if count > MAX_SAMPLE_BYTES as u64 {
        return Err(Error::Capacity(format!("{count} cells is too many to generate")));
    }
    let key_names = (1..=cards.len()).map(|d| format!("d{d}")).collect();
    let schema = RelationSchema::new("synthetic", key_names, cards.to_vec(), measures.to_vec())?;
    let dirs = cards
        .iter()
        .enumerate()
        .map(|(d, &c)| DimensionDirectory::from_sorted((1..=c).map(|i| synthetic_value(d + 1, i, c)).collect()))
        .collect::<Result<Vec<_>>>()?;

    let mut cell_rng = rng(seed, 0);
    let mut value_rng = rng(seed, 1);
    let rows = distinct_below(&mut cell_rng, total, count)
        .into_iter()
        .map(|zero_based| {
            let i = zero_based + 1;
            let key = shape.delinearize(i)?;
            Ok((i, EncodedRow { key, record: random_record(&mut value_rng, &schema) }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticRelation { schema, dirs, rows })
}

fn random_record(rng: &mut impl RngCore, schema: &RelationSchema) -> Vec<u8> {
    if schema.measures.is_empty() {
        return PRESENCE_RECORD.to_vec();
    }
    let mut out = Vec::with_capacity(schema.record_width());
    for col in &schema.measures {
        match col.ty {
            ColumnType::Int => {
                let v = uniform_below(rng, 2_000_001) as i64 - 1_000_000;
                out.extend_from_slice(&v.to_le_bytes());
            }
            ColumnType::Float => {
                let v = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                out.extend_from_slice(&v.to_le_bytes());
            }
            ColumnType::Text { width } => {
                out.extend((0..width).map(|_| b'a' + uniform_below(rng, 26) as u8));
            }
        }
    }
    out
}

/// `n_samples` i.i.d. uniform row ordinals in `1..=r`.
pub fn draw_sample(r: u64, n_samples: usize, seed: u64) -> Result<Vec<u64>> {
    draw_sample_stream(r, n_samples, seed, 0)
}

pub fn draw_sample_stream(r: u64, n_samples: usize, seed: u64, stream: u64) -> Result<Vec<u64>> {
    if r == 0 {
        return Err(Error::EmptyRelation);
    }
    let mut g = rng(seed, stream);
    Ok((0..n_samples).map(|_| uniform_below(&mut g, r) + 1).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub sample_size: usize,
    pub r: u64,
    /// `100 · size / r`, rounded to two decimals.
    pub sample_pct: f64,
    pub table_ns: u128,
    pub array_ns: u128,
    /// `table_ns / array_ns`.
    pub quotient: f64,
    /// Every sampled lookup agreed across both paths.
    pub correct: bool,
    pub mismatches: usize,
    pub warmup: bool,
    /// FNV-1a over the sampled ordinals; equal digests mean equal samples.
    pub sample_digest: u64,
}

pub fn sample_digest(ordinals: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for o in ordinals {
        for b in o.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub fn sample_percentage(size: usize, r: u64) -> f64 {
    round2(100.0 * size as f64 / r as f64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BenchOptions {
    pub seed: u64,
    pub warmup: bool,
}

/// Times the same sample of point lookups through the B-tree indexed table
/// and through the compressed array.
///
/// Each size draws its own sample (ChaCha stream = sample size). Sampled
/// row ordinals are converted to coordinates before timing; the timed
/// loops include coordinate → key/logical-index encoding on both paths.
pub fn run_benchmark(
    table: &TableStore,
    array: &ArrayStore,
    sizes: &[usize],
    opts: BenchOptions,
) -> Result<Vec<BenchResult>> {
    let r = array.len();
    if table.len() != r {
        return Err(Error::param(format!(
            "table has {} rows, array {} cells",
            table.len(),
            r
        )));
    }
    let k = array.shape().dims();
    let width = array.record_width();
    let mut results = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size.saturating_mul(k * 4 + 8) > MAX_SAMPLE_BYTES {
            return Err(Error::Capacity(format!("sample of {size} does not fit in memory")));
        }
        let ordinals = draw_sample_stream(r, size, opts.seed, size as u64)?;
        let mut coords = Vec::with_capacity(size * k);
        let mut key = vec![0u32; k];
        for &p in &ordinals {
            array.shape().delinearize_into(array.logical_of_physical(p)?, &mut key)?;
            coords.extend_from_slice(&key);
        }

        let mismatches = cross_check(table, array, &ordinals, &coords, k)?;
        if opts.warmup {
            time_table(table, &coords, k, width)?;
            time_array(array, &coords, k, width)?;
        }
        let table_ns = time_table(table, &coords, k, width)?.max(1);
        let array_ns = time_array(array, &coords, k, width)?.max(1);
        results.push(BenchResult {
            sample_size: size,
            r,
            sample_pct: sample_percentage(size, r),
            table_ns,
            array_ns,
            quotient: table_ns as f64 / array_ns as f64,
            correct: mismatches == 0,
            mismatches,
            warmup: opts.warmup,
            sample_digest: sample_digest(&ordinals),
        });
    }
    Ok(results)
}

// Untimed: the table path and the array's direct record read must agree on
// every sampled ordinal, and the coordinate path must land on the same record.
fn cross_check(
    table: &TableStore,
    array: &ArrayStore,
    ordinals: &[u64],
    coords: &[u32],
    k: usize,
) -> Result<usize> {
    let width = array.record_width();
    let mut scratch = table.scratch();
    let (mut via_table, mut direct, mut via_array) = (vec![0; width], vec![0; width], vec![0; width]);
    let mut bad = 0;
    for (&p, key) in ordinals.iter().zip(coords.chunks_exact(k)) {
        array.read_record(p, &mut direct)?;
        let found_t = table.get_record_into(key, &mut scratch, &mut via_table)?;
        let found_a = array.get_cell_into(key, &mut via_array)?;
        if !(found_t && found_a && via_table == direct && via_array == direct) {
            bad += 1;
        }
    }
    Ok(bad)
}

fn time_table(table: &TableStore, coords: &[u32], k: usize, width: usize) -> Result<u128> {
    let mut scratch = table.scratch();
    let mut rec = vec![0u8; width];
    let mut acc = 0u64;
    let start = Instant::now();
    for key in coords.chunks_exact(k) {
        if table.get_record_into(black_box(key), &mut scratch, &mut rec)? {
            acc = acc.wrapping_add(u64::from(rec[0]));
        }
    }
    let elapsed = start.elapsed().as_nanos();
    black_box(acc);
    Ok(elapsed)
}

fn time_array(array: &ArrayStore, coords: &[u32], k: usize, width: usize) -> Result<u128> {
    let mut rec = vec![0u8; width];
    let mut acc = 0u64;
    let start = Instant::now();
    for key in coords.chunks_exact(k) {
        if array.get_cell_into(black_box(key), &mut rec)? {
            acc = acc.wrapping_add(u64::from(rec[0]));
        }
    }
    let elapsed = start.elapsed().as_nanos();
    black_box(acc);
    Ok(elapsed)
}

pub const CSV_HEADER: &str = "sample_size,sample_pct,table_ns,array_ns,quotient";

/// Both views: quotient by sample size and by sample percentage.
pub fn report(results: &[BenchResult]) -> Result<(String, String)> {
    let first = results
        .first()
        .ok_or_else(|| Error::param("no benchmark results to report"))?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "r = {}, warm-up {}",
        first.r,
        if first.warmup { "on" } else { "off" }
    );
    let _ = writeln!(text, "\nQuotient by sample size");
    let _ = writeln!(text, "{:>12} {:>14} {:>14} {:>10}", "sample size", "table ns", "array ns", "quotient");
    for b in results {
        let _ = writeln!(
            text,
            "{:>12} {:>14} {:>14} {:>10.2}",
            b.sample_size, b.table_ns, b.array_ns, b.quotient
        );
    }
    let _ = writeln!(text, "\nSamples");
    for b in results {
        let _ = writeln!(text, "{:>12} digest {:016x}", b.sample_size, b.sample_digest);
    }
    let _ = writeln!(text, "\nQuotient by sample percentage");
    let _ = writeln!(text, "{:>12} {:>10}", "sample %", "quotient");
    for b in results {
        let _ = writeln!(text, "{:>12.2} {:>10.2}", b.sample_pct, b.quotient);
    }
    let checked: usize = results.iter().map(|b| b.sample_size).sum();
    let bad: usize = results.iter().map(|b| b.mismatches).sum();
    let _ = writeln!(
        text,
        "\ncorrectness: {} ({checked} lookups cross-checked, {bad} mismatches)",
        if bad == 0 { "ok" } else { "FAILED" }
    );

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for b in results {
        let _ = writeln!(
            csv,
            "{},{:.2},{},{},{:.4}",
            b.sample_size, b.sample_pct, b.table_ns, b.array_ns, b.quotient
        );
    }
    Ok((text, csv))
}
