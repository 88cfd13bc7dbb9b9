//! Acceptance suite. Each test prints one `PASS`/`FAIL` line, written to the
//! raw stdout handle so it shows up even under the test harness's capture.

use std::io::Write as _;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cubestore::bench::{self, BenchOptions, DEFAULT_SIZES};
use cubestore::cost_model::{self, round2, Model};
use cubestore::dataset::{ARRAY_FILE, INDEX_FILE, TABLE_FILE};
use cubestore::relation::{encode_key, RelationStats, KEY_FIELD_WIDTH};
use cubestore::table_store::{page_read_bound, DEFAULT_PAGE_SIZE};
use cubestore::{
    compress_stream, ArrayStore, BuildTarget, ColumnType, Dataset, EncodedRow, Location, MeasureColumn, RelationSchema,
    RunEntry, Shape, TableStore,
};

fn criterion(n: u32, title: &str, budget: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let ok = outcome.is_ok() && elapsed <= budget;
    let _ = writeln!(
        std::io::stdout(),
        "acceptance {n}: {} {title} ({:.2?}, budget {:.0?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        budget
    );
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
    assert!(elapsed <= budget, "took {elapsed:?}, budget {budget:?}");
}

// ---------------------------------------------------------------------------
// 1. cost tables

const R: [u64; 5] = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
const K: [u32; 5] = [5, 10, 15, 20, 25];

/// Reference quotients, binary search over the table; one block per p.
const REFERENCE_PLAIN: [(f64, [[f64; 5]; 5]); 6] = [
    (
        1.0,
        [
            [1.79, 0.90, 0.60, 0.45, 0.36],
            [2.46, 1.23, 0.82, 0.61, 0.49],
            [3.12, 1.56, 1.04, 0.78, 0.62],
            [3.79, 1.89, 1.26, 0.95, 0.76],
            [4.45, 2.23, 1.48, 1.11, 0.89],
        ],
    ),
    (
        10.0,
        [
            [6.40, 4.72, 3.74, 3.09, 2.64],
            [8.78, 6.47, 5.12, 4.24, 3.61],
            [11.15, 8.22, 6.50, 5.38, 4.59],
            [13.52, 9.96, 7.89, 6.53, 5.57],
            [15.90, 11.71, 9.27, 7.67, 6.55],
        ],
    ),
    (
        100.0,
        [
            [8.62, 8.23, 7.86, 7.53, 7.23],
            [11.82, 11.27, 10.78, 10.33, 9.91],
            [15.01, 14.32, 13.69, 13.12, 12.59],
            [18.20, 17.37, 16.61, 15.91, 15.27],
            [21.40, 20.42, 19.52, 18.70, 17.95],
        ],
    ),
    (
        500.0,
        [
            [8.89, 8.81, 8.72, 8.64, 8.56],
            [12.19, 12.07, 11.95, 11.84, 11.72],
            [15.49, 15.33, 15.18, 15.04, 14.89],
            [18.78, 18.60, 18.42, 18.24, 18.06],
            [22.08, 21.86, 21.65, 21.44, 21.23],
        ],
    ),
    (
        1000.0,
        [
            [8.93, 8.89, 8.84, 8.80, 8.76],
            [12.24, 12.18, 12.12, 12.06, 12.00],
            [15.55, 15.47, 15.39, 15.32, 15.24],
            [18.86, 18.76, 18.67, 18.58, 18.49],
            [22.16, 22.06, 21.95, 21.84, 21.73],
        ],
    ),
    (
        1500.0,
        [
            [8.94, 8.91, 8.88, 8.85, 8.82],
            [12.26, 12.21, 12.17, 12.13, 12.09],
            [15.57, 15.52, 15.47, 15.41, 15.36],
            [18.88, 18.82, 18.76, 18.69, 18.63],
            [22.19, 22.12, 22.05, 21.98, 21.90],
        ],
    ),
];

/// B-tree indexed table, p = 1500, t = 89.
const REFERENCE_BTREE: [[f64; 5]; 5] = [
    [2.38, 2.37, 2.36, 2.35, 2.35],
    [2.89, 2.88, 2.87, 2.86, 2.85],
    [3.40, 3.39, 3.38, 3.37, 3.36],
    [3.91, 3.90, 3.89, 3.87, 3.86],
    [4.42, 4.41, 4.40, 4.38, 4.37],
];

const COST_TOLERANCE: f64 = 0.01 + 1e-9;

#[test]
fn cost_tables_reproduce_reference_values() {
    criterion(1, "default cost tables within 0.01 of all 175 reference values", Duration::from_secs(1), || {
        let tables = cost_model::default_cost_tables();
        assert_eq!(tables.len(), 7);
        let mut checked = 0;
        for (table, (p, expected)) in tables.iter().zip(REFERENCE_PLAIN.iter()) {
            assert_eq!(table.p, *p);
            assert_eq!(table.model, Model::BinarySearch);
            assert_eq!(table.r_values, R);
            assert_eq!(table.k_values, K);
            for ri in 0..5 {
                for ki in 0..5 {
                    let got = table.rounded(ri, ki);
                    let want = expected[ri][ki];
                    assert!(
                        (got - want).abs() <= COST_TOLERANCE,
                        "p={p} r={} k={}: {got} vs {want}",
                        R[ri],
                        K[ki]
                    );
                    checked += 1;
                }
            }
        }
        let btree = &tables[6];
        assert_eq!(btree.model, Model::BTree { t: 89 });
        assert_eq!(btree.p, 1500.0);
        for ri in 0..5 {
            for ki in 0..5 {
                let got = btree.rounded(ri, ki);
                let want = REFERENCE_BTREE[ri][ki];
                assert!((got - want).abs() <= COST_TOLERANCE, "btree r={} k={}: {got} vs {want}", R[ri], K[ki]);
                checked += 1;
            }
        }
        assert_eq!(checked, 175);

        // the CSV carries the same rounded numbers
        let csv = tables[0].to_csv();
        assert!(csv.starts_with("r,k=5,k=10,k=15,k=20,k=25\n1000,1.79,0.90,0.60,0.45,0.36\n"));
        assert_eq!(round2(cost_model::q_plain(1000, 25, 1.0).unwrap()), 0.36);
    });
}

// ---------------------------------------------------------------------------
// 2. linearization

/// All cardinality vectors of length `k` with entries in `1..=max`.
fn boxes(k: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (1..=max).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

/// Walks every coordinate with `i_1` fastest and checks both directions
/// against the running 1-based counter.
fn check_bijection(cards: &[u32]) -> u64 {
    let shape = Shape::new(cards.to_vec()).unwrap();
    let mut coords = vec![1u32; cards.len()];
    let mut out = vec![0u32; cards.len()];
    let total: u64 = cards.iter().map(|&c| u64::from(c)).product();
    assert_eq!(shape.total(), total);
    for expected in 1..=total {
        assert_eq!(shape.linearize(&coords).unwrap(), expected, "{cards:?} {coords:?}");
        shape.delinearize_into(expected, &mut out).unwrap();
        assert_eq!(out, coords, "{cards:?} at {expected}");
        for (d, c) in coords.iter_mut().enumerate() {
            if *c < cards[d] {
                *c += 1;
                break;
            }
            *c = 1;
        }
    }
    assert!(shape.linearize(&vec![1; cards.len()]).is_ok());
    assert!(shape.delinearize(total + 1).is_err());
    assert!(shape.delinearize(0).is_err());
    total
}

#[test]
fn linearization_golden_value_and_bijectivity() {
    criterion(2, "linearize golden value and exhaustive bijectivity up to 10^4 cells, k <= 5", Duration::from_secs(10), || {
        assert_eq!(cubestore::linearize(&[3, 1, 2], &[4, 3, 2]).unwrap(), 15);
        assert_eq!(cubestore::delinearize(15, &[4, 3, 2]).unwrap(), vec![3, 1, 2]);

        // every box with small sides for each k, plus boxes at the 10^4 limit
        let per_k_max = [(1, 2_000), (2, 40), (3, 12), (4, 7), (5, 5)];
        let mut shapes = 0;
        let mut cells = 0;
        for (k, max) in per_k_max {
            for cards in boxes(k, max) {
                if cards.iter().map(|&c| u64::from(c)).product::<u64>() <= 10_000 {
                    cells += check_bijection(&cards);
                    shapes += 1;
                }
            }
        }
        for cards in [
            vec![10_000],
            vec![9_999],
            vec![100, 100],
            vec![10, 1000],
            vec![10, 10, 100],
            vec![2, 5000],
            vec![10, 10, 10, 10],
            vec![4, 5, 5, 5, 20],
            vec![1, 10, 1, 1000, 1],
            vec![2, 2, 2, 2, 625],
        ] {
            cells += check_bijection(&cards);
            shapes += 1;
        }
        let _ = writeln!(std::io::stdout(), "    {shapes} boxes, {cells} cells");
    });
}

// ---------------------------------------------------------------------------
// 3, 4, 8. seeded random relations

struct Case {
    cards: Vec<u32>,
    filled: Vec<bool>,
}

impl Case {
    fn total(&self) -> u64 {
        self.filled.len() as u64
    }

    fn r(&self) -> u64 {
        self.filled.iter().filter(|&&f| f).count() as u64
    }

    /// Record for logical cell `i`; derived from `i` so expected contents
    /// are known without storing them.
    fn record(i: u64) -> [u8; 8] {
        (i.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x5555).to_le_bytes()
    }

    fn cells(&self) -> impl Iterator<Item = (u64, [u8; 8])> + '_ {
        self.filled
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(z, _)| (z as u64 + 1, Case::record(z as u64 + 1)))
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_cards(rng: &mut ChaCha8Rng) -> Vec<u32> {
    let k = 1 + (rng.next_u64() % 5) as usize;
    (0..k).map(|_| 1 + (rng.next_u64() % 6) as u32).collect()
}

/// 1000 random relations plus forced edge cases on 60 more shapes.
fn generated_cases() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cases = Vec::new();
    for _ in 0..1000 {
        let cards = random_cards(&mut rng);
        let total: u32 = cards.iter().product();
        let rho = 1.0 - unit(&mut rng); // (0, 1]
        let filled = (0..total).map(|_| unit(&mut rng) < rho).collect();
        cases.push(Case { cards, filled });
    }
    for n in 0..60 {
        let cards = if n < 6 { vec![n as u32 + 1] } else { random_cards(&mut rng) };
        let total = cards.iter().product::<u32>() as usize;
        let edge = |f: &dyn Fn(usize) -> bool| (0..total).map(f).collect::<Vec<_>>();
        cases.push(Case { cards: cards.clone(), filled: edge(&|_| false) });
        cases.push(Case { cards: cards.clone(), filled: edge(&|_| true) });
        cases.push(Case { cards: cards.clone(), filled: edge(&|z| z + 1 != total) });
        cases.push(Case { cards: cards.clone(), filled: edge(&|z| z != 0) });
        if total > 2 {
            cases.push(Case { cards: cards.clone(), filled: edge(&|z| z == 0 || z + 1 == total) });
            cases.push(Case { cards, filled: edge(&|z| z % 2 == 1) });
        }
    }
    cases
}

/// Header from the fully materialized occupancy vector: one entry at the
/// end of each maximal block of nonempty cells, carrying the empties seen
/// so far, and a final entry at the last cell.
fn oracle_header(filled: &[bool]) -> Vec<RunEntry> {
    let total = filled.len();
    let mut entries = Vec::new();
    let mut empties = 0u64;
    for z in 0..total {
        if !filled[z] {
            empties += 1;
            continue;
        }
        if z + 1 == total || !filled[z + 1] {
            entries.push(RunEntry::new(z as u64 + 1, empties));
        }
    }
    if entries.last().map(|e| e.last) != Some(total as u64) {
        entries.push(RunEntry::new(total as u64, empties));
    }
    entries
}

/// Physical position of every logical cell, by counting.
fn oracle_locations(filled: &[bool]) -> Vec<Location> {
    let mut seen = 0;
    filled
        .iter()
        .map(|&f| {
            if f {
                seen += 1;
                Location::Physical(seen)
            } else {
                Location::Empty
            }
        })
        .collect()
}

#[test]
fn compression_matches_dense_oracle() {
    criterion(3, "one-pass header and locate equal the dense oracle on seeded relations", Duration::from_secs(120), || {
        let cases = generated_cases();
        assert!(cases.len() >= 1000);
        let mut edge = [false; 4];
        for case in &cases {
            let total = case.total();
            let f = &case.filled;
            edge[0] |= f.iter().all(|&x| !x);
            edge[1] |= f.iter().all(|&x| x);
            edge[2] |= total > 1 && !f[f.len() - 1] && f[..f.len() - 1].iter().all(|&x| x);
            edge[3] |= total > 1 && !f[0] && f[1..].iter().all(|&x| x);

            let (bytes, header) = compress_stream(case.cells(), total, 8).unwrap();
            assert_eq!(header.entries(), oracle_header(f), "cards {:?} filled {f:?}", case.cards);
            assert_eq!(header.total_cells(), total);
            assert_eq!(header.nonempty(), case.r());
            assert_eq!(bytes.len() as u64, case.r() * 8);

            let oracle = oracle_locations(f);
            for i in 1..=total {
                let got = header.locate(i).unwrap();
                assert_eq!(got, oracle[i as usize - 1], "cards {:?} filled {f:?} i={i}", case.cards);
                if let Location::Physical(p) = got {
                    assert_eq!(header.logical_of_physical(p).unwrap(), i);
                    let at = (p as usize - 1) * 8;
                    assert_eq!(bytes[at..at + 8], Case::record(i));
                }
            }
            assert!(header.locate(0).is_err());
            assert!(header.locate(total + 1).is_err());
        }
        assert_eq!(edge, [true; 4], "edge cases empty / dense / trailing / leading");
    });
}

/// Page sizes giving t = 2..=5 for k = 5 keys and a default-page run.
const PAGE_SIZES: [usize; 4] = [120, 200, 352, DEFAULT_PAGE_SIZE];

fn build_pair(case: &Case, dir: &Path, page_size: usize) -> (TableStore, ArrayStore) {
    let shape = Shape::new(case.cards.clone()).unwrap();
    let k = case.cards.len();
    let rows = case.cells().map(|(i, rec)| {
        Ok((
            i,
            EncodedRow {
                key: shape.delinearize(i)?,
                record: rec.to_vec(),
            },
        ))
    });
    let table = TableStore::build(rows, k, 8, page_size, &dir.join("t.tbl"), &dir.join("t.btx")).unwrap();
    let cells = case.cells().map(Ok);
    let array = ArrayStore::build(cells, shape, 8, &dir.join("a.arr"), &dir.join("a.hdr")).unwrap();
    (table, array)
}

#[test]
fn table_and_array_lookups_agree() {
    criterion(4, "table and array lookups agree on every coordinate of every seeded relation", Duration::from_secs(120), || {
        let dir = tempfile::tempdir().unwrap();
        let mut lookups = 0u64;
        for (n, case) in generated_cases().iter().enumerate() {
            let (table, array) = build_pair(case, dir.path(), PAGE_SIZES[n % PAGE_SIZES.len()]);
            assert_eq!(table.len(), case.r());
            assert_eq!(array.len(), case.r());
            let shape = array.shape().clone();
            let mut scratch = table.scratch();
            let (mut a, mut b) = ([0u8; 8], [0u8; 8]);
            for i in 1..=case.total() {
                let coords = shape.delinearize(i).unwrap();
                let via_table = table.get_record_into(&coords, &mut scratch, &mut a).unwrap();
                let via_array = array.get_cell_into(&coords, &mut b).unwrap();
                assert_eq!(via_table, case.filled[i as usize - 1], "{:?} {coords:?}", case.cards);
                assert_eq!(via_table, via_array, "{:?} {coords:?}", case.cards);
                if via_table {
                    assert_eq!(a, b);
                    assert_eq!(a, Case::record(i));
                }
                assert_eq!(table.binary_search_lookup(&coords).unwrap().0.is_some(), via_table);
                lookups += 1;
            }
        }
        let _ = writeln!(std::io::stdout(), "    {lookups} coordinates compared");
    });
}

// ---------------------------------------------------------------------------
// 5. round trip

#[test]
fn nonempty_iteration_rebuilds_table_file() {
    criterion(5, "iterating the array's nonempty cells rebuilds the table file byte for byte", Duration::from_secs(10), || {
        let dir = tempfile::tempdir().unwrap();
        let measure_sets: [&[ColumnType]; 3] = [
            &[ColumnType::Int, ColumnType::Float],
            &[ColumnType::Text { width: 7 }],
            &[],
        ];
        for (n, (cards, rho)) in [(vec![30u32, 20, 12], 0.3), (vec![7, 1, 9, 4], 0.9), (vec![50], 0.02)]
            .into_iter()
            .enumerate()
        {
            for (m, types) in measure_sets.iter().enumerate() {
                let measures: Vec<MeasureColumn> = types
                    .iter()
                    .enumerate()
                    .map(|(j, &ty)| MeasureColumn { name: format!("m{j}"), ty })
                    .collect();
                let rel = bench::generate_synthetic(&cards, rho, &measures, 40 + n as u64).unwrap();
                let out = dir.path().join(format!("ds{n}_{m}"));
                let ds = Dataset::from_synthetic(&out, rel).unwrap();
                ds.build(BuildTarget::Both, 256).unwrap();
                let array = ds.open_array().unwrap();

                let mut rebuilt = Vec::new();
                for cell in array.iter_nonempty() {
                    let (key, record) = cell.unwrap();
                    encode_key(&key, &mut rebuilt);
                    rebuilt.extend_from_slice(&record);
                }
                let table = std::fs::read(ds.path(TABLE_FILE)).unwrap();
                assert!(!table.is_empty());
                assert_eq!(rebuilt, table, "{cards:?} with {types:?}");
            }
        }

        // and from the seeded relations, without a dataset directory
        for case in generated_cases().iter().step_by(7) {
            let (table, array) = build_pair(case, dir.path(), 4096);
            let mut rebuilt = Vec::new();
            for cell in array.iter_nonempty() {
                let (key, record) = cell.unwrap();
                encode_key(&key, &mut rebuilt);
                rebuilt.extend_from_slice(&record);
            }
            assert_eq!(rebuilt.len() as u64, table.table_bytes());
            assert_eq!(rebuilt, std::fs::read(dir.path().join("t.tbl")).unwrap());
        }
    });
}

// ---------------------------------------------------------------------------
// 6. space model

#[test]
fn space_model_is_exact() {
    criterion(6, "uncompressed array over table bytes equals data ratio over density; array smaller iff delta < rho", Duration::from_secs(30), || {
        let mut pairs = 0;
        let mut smaller = 0;
        let mut larger = 0;
        let mut equal = 0;
        for cards in [vec![4u32, 5], vec![3, 3, 3], vec![10], vec![2, 2, 2, 2], vec![6, 1, 5]] {
            let total: u64 = cards.iter().map(|&c| u64::from(c)).product();
            let k = cards.len();
            for width in 1..=40u16 {
                let names = (0..k).map(|d| format!("d{d}")).collect();
                let measures = vec![MeasureColumn { name: "m".into(), ty: ColumnType::Text { width } }];
                let schema = RelationSchema::new("grid", names, cards.clone(), measures).unwrap();
                let w = schema.record_width() as u128;
                let s = schema.row_width() as u128;
                assert_eq!(s, (KEY_FIELD_WIDTH * k) as u128 + w);
                for r in 1..=total {
                    let st = RelationStats::new(&schema, r).unwrap();
                    let dense = st.dense_array_bytes(schema.record_width());
                    let table = st.table_bytes();
                    assert_eq!(dense, u128::from(total) * w);
                    assert_eq!(table, u128::from(r) * s);
                    // dense/table == (w/s)/(r/total), cross-multiplied
                    assert_eq!(dense * s * u128::from(r), table * w * u128::from(total));
                    let ratio = st.space_ratio().unwrap();
                    let direct = dense as f64 / table as f64;
                    assert!((ratio - direct).abs() <= 1e-12 * direct, "{ratio} vs {direct}");

                    // the direction, decided in exact integers
                    let delta_vs_rho = (w * u128::from(total)).cmp(&(u128::from(r) * s));
                    match delta_vs_rho {
                        std::cmp::Ordering::Less => {
                            assert!(dense < table);
                            assert!(st.delta < st.rho && ratio < 1.0);
                            smaller += 1;
                        }
                        std::cmp::Ordering::Greater => {
                            assert!(dense > table);
                            assert!(ratio > 1.0);
                            larger += 1;
                        }
                        std::cmp::Ordering::Equal => {
                            assert_eq!(dense, table);
                            equal += 1;
                        }
                    }
                    pairs += 1;
                }
            }
        }
        assert!(smaller > 0 && larger > 0 && equal > 0, "grid must straddle delta = rho");
        let _ = writeln!(
            std::io::stdout(),
            "    {pairs} (delta, rho) pairs: {smaller} array smaller, {larger} larger, {equal} equal"
        );

        // real datasets: built file sizes follow the same fixed widths
        let dir = tempfile::tempdir().unwrap();
        let measures = vec![
            MeasureColumn { name: "a".into(), ty: ColumnType::Int },
            MeasureColumn { name: "b".into(), ty: ColumnType::Text { width: 5 } },
        ];
        for (n, rho) in [0.05, 0.5, 0.95].into_iter().enumerate() {
            let rel = bench::generate_synthetic(&[20, 15, 8], rho, &measures, n as u64).unwrap();
            let ds = Dataset::from_synthetic(&dir.path().join(n.to_string()), rel).unwrap();
            let report = ds.build(BuildTarget::Both, DEFAULT_PAGE_SIZE).unwrap();
            let s = ds.schema();
            assert_eq!(report.table, Some(report.r * s.row_width() as u64));
            assert_eq!(report.array, Some(report.r * s.record_width() as u64));
            assert_eq!(std::fs::metadata(ds.path(ARRAY_FILE)).unwrap().len(), report.r * 13);
            assert!(std::fs::metadata(ds.path(INDEX_FILE)).unwrap().len() > 0);
            let text = report.to_string();
            for label in ["Size of table representation", "Size of array representation", "Compressed array", "Header"] {
                assert!(text.contains(label), "{text}");
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 7, 8. large dataset

fn large_dataset(dir: &Path, page_size: usize) -> Dataset {
    let measures = vec![MeasureColumn { name: "v".into(), ty: ColumnType::Int }];
    let rel = bench::generate_synthetic(&[100, 100, 40], 0.25, &measures, 7).unwrap();
    let ds = Dataset::from_synthetic(dir, rel).unwrap();
    ds.build(BuildTarget::Both, page_size).unwrap();
    ds
}

#[test]
fn benchmark_on_large_dataset() {
    criterion(7, "benchmark on a 3-dimensional dataset with 10^5 rows", Duration::from_secs(300), || {
        let dir = tempfile::tempdir().unwrap();
        let ds = large_dataset(dir.path(), DEFAULT_PAGE_SIZE);
        let table = ds.open_table().unwrap();
        let array = ds.open_array().unwrap();
        let r = array.len();
        assert_eq!(r, 100_000);

        let results = bench::run_benchmark(&table, &array, &DEFAULT_SIZES, BenchOptions { seed: 1, warmup: false }).unwrap();
        assert_eq!(results.len(), DEFAULT_SIZES.len());
        for (b, &size) in results.iter().zip(DEFAULT_SIZES.iter()) {
            assert_eq!(b.sample_size, size);
            assert_eq!(b.r, r);
            let pct = (100.0 * size as f64 / r as f64 * 100.0).round() / 100.0;
            assert_eq!(b.sample_pct, pct);
            assert!(b.table_ns > 0 && b.array_ns > 0);
            assert!(b.quotient > 0.0 && b.quotient.is_finite());
            assert!(b.correct && b.mismatches == 0, "size {size}: {} mismatches", b.mismatches);
        }
        assert_eq!(results[0].sample_pct, 0.1);
        assert_eq!(results[6].sample_pct, 100.0);

        let (text, csv) = bench::report(&results).unwrap();
        assert!(text.contains("Quotient by sample size"));
        assert!(text.contains("Quotient by sample percentage"));
        assert!(text.contains("correctness: ok (166600 lookups cross-checked, 0 mismatches)"), "{text}");
        for pct in ["0.10", "0.50", "1.00", "5.00", "10.00", "50.00", "100.00"] {
            assert!(text.lines().any(|l| l.trim_start().starts_with(pct)), "missing {pct}%");
        }
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], bench::CSV_HEADER);
        assert_eq!(lines.len(), 1 + DEFAULT_SIZES.len());
        assert!(lines[1].starts_with("100,0.10,"));
        let _ = write!(std::io::stdout(), "{text}");
    });
}

fn assert_probes_within_bound(table: &TableStore, coords: impl Iterator<Item = Vec<u32>>) -> u32 {
    let bound = page_read_bound(table.len(), table.index().t());
    let mut page = vec![0; table.index().page_size()];
    let mut worst = 0;
    for key in coords {
        let probe = table.btree_probe(&key, &mut page).unwrap();
        assert!(probe.pages_read <= bound, "{key:?}: {} pages, bound {bound}", probe.pages_read);
        worst = worst.max(probe.pages_read);
    }
    worst
}

#[test]
fn btree_page_reads_within_bound() {
    criterion(8, "B-tree page reads never exceed the worst-case bound", Duration::from_secs(300), || {
        let dir = tempfile::tempdir().unwrap();
        for (n, case) in generated_cases().iter().enumerate() {
            let (table, array) = build_pair(case, dir.path(), PAGE_SIZES[n % PAGE_SIZES.len()]);
            let shape = array.shape().clone();
            table.index().check().unwrap();
            assert_probes_within_bound(&table, (1..=case.total()).map(|i| shape.delinearize(i).unwrap()));
        }

        // 10^5 rows at the default page size and at a tiny one (t = 3)
        for page_size in [DEFAULT_PAGE_SIZE, 128] {
            let sub = dir.path().join(format!("large{page_size}"));
            let ds = large_dataset(&sub, page_size);
            let table = ds.open_table().unwrap();
            let array = ds.open_array().unwrap();
            let shape = table.index().check().unwrap();
            let t = table.index().t();
            assert_eq!(table.len(), 100_000);
            let present = array.iter_nonempty().map(|c| c.unwrap().0);
            let worst = assert_probes_within_bound(&table, present);
            // absent keys too: every cell in the first two planes
            let absent = (1..=2 * 100 * 100).map(|i| array.shape().delinearize(i).unwrap());
            let worst = worst.max(assert_probes_within_bound(&table, absent));
            let bound = page_read_bound(table.len(), t);
            assert_eq!(worst, shape.height);
            let _ = writeln!(
                std::io::stdout(),
                "    page {page_size}: t = {t}, height {}, worst {worst} reads, bound {bound}",
                shape.height
            );
        }
    });
}
