//! `cubestore` command line.
//!
//! Exit codes: 0 success, 1 cell empty / not found, 2 usage or data error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cubestore::bench::{self, BenchOptions};
use cubestore::cost_model::{self, CostTable, Model};
use cubestore::dataset::{page_size_from_env, split_list};
use cubestore::relation::{ColumnType, MeasureColumn};
use cubestore::{BuildTarget, Dataset, Via};

#[derive(Parser)]
#[command(name = "cubestore", version, about = "Table vs. compressed-array storage of one relation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV file (first line = column names) into a dataset directory.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// Key columns in dimension order, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        keys: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Schema name; defaults to the CSV file stem.
        #[arg(long)]
        name: Option<String>,
        /// Measure types, e.g. `volume=int,price=float,label=text:16`.
        #[arg(long, value_delimiter = ',')]
        types: Vec<String>,
    },
    /// Write a synthetic dataset with uniformly chosen nonempty cells.
    Generate {
        /// Cardinalities c_1..c_k.
        #[arg(long, value_delimiter = ',', required = true)]
        cards: Vec<u32>,
        /// Target density in (0, 1].
        #[arg(long)]
        density: f64,
        /// Measure column types (`int`, `float`, `text:W`); none = key-only.
        #[arg(long, value_delimiter = ',', default_value = "int")]
        measures: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the table and/or array representation of a dataset.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        only: Option<Only>,
    },
    /// Point lookup of one cell.
    Query {
        #[arg(long)]
        dataset: PathBuf,
        /// Key values in dimension order, comma separated (`\,` escapes a comma).
        #[arg(long)]
        at: String,
        /// Treat `--at` as 1-based dimension indices instead of values.
        #[arg(long)]
        indices: bool,
        #[arg(long, value_enum, default_value = "array")]
        via: Only,
    },
    /// Density, data ratio and the size verdict; optionally a conjoint fold.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// Fold the first H key dimensions into one conjoint dimension.
        #[arg(long)]
        conjoint: Option<usize>,
        #[arg(long)]
        allow_degenerate: bool,
    },
    /// Print the analytical speed-quotient tables.
    Cost {
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        r: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<u32>,
        /// B-tree minimal degree for the indexed-table table.
        #[arg(long, default_value_t = cost_model::DEFAULT_T)]
        t: u32,
        /// p used for the indexed-table table.
        #[arg(long, default_value_t = cost_model::DEFAULT_BTREE_P)]
        btree_p: f64,
        /// Directory to write one CSV file per table into.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time random point lookups through both representations.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run each lookup loop once untimed first.
        #[arg(long)]
        warmup: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the dataset's rows as CSV (keys first) in logical order.
    Export {
        #[arg(long)]
        dataset: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Only {
    Table,
    Array,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest {
            csv,
            keys,
            out,
            name,
            types,
        } => ingest(&csv, &keys, &out, name, &types),
        Command::Generate {
            cards,
            density,
            measures,
            seed,
            out,
        } => generate(&cards, density, &measures, seed, &out),
        Command::Build { dataset, only } => {
            let ds = Dataset::open(&dataset)?;
            let target = match only {
                None => BuildTarget::Both,
                Some(Only::Table) => BuildTarget::Table,
                Some(Only::Array) => BuildTarget::Array,
            };
            let report = ds.build(target, page_size_from_env()?)?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Query {
            dataset,
            at,
            indices,
            via,
        } => query(&dataset, &at, indices, via),
        Command::Stats {
            dataset,
            conjoint,
            allow_degenerate,
        } => {
            let ds = Dataset::open(&dataset)?;
            let report = ds.stats(conjoint.map(|h| (h, allow_degenerate)))?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Cost {
            p,
            r,
            k,
            t,
            btree_p,
            csv,
        } => cost(p, r, k, t, btree_p, csv.as_deref()),
        Command::Bench {
            dataset,
            sizes,
            seed,
            warmup,
            csv,
        } => {
            let ds = Dataset::open(&dataset)?;
            let table = ds.open_table().context("table representation not built")?;
            let array = ds.open_array().context("array representation not built")?;
            let sizes = if sizes.is_empty() {
                bench::DEFAULT_SIZES.to_vec()
            } else {
                sizes
            };
            let results = bench::run_benchmark(&table, &array, &sizes, BenchOptions { seed, warmup })?;
            let (text, csv_text) = bench::report(&results)?;
            print!("{text}");
            if let Some(path) = csv {
                fs::write(&path, csv_text).with_context(|| format!("writing {}", path.display()))?;
            }
            if results.iter().any(|b| !b.correct) {
                bail!("lookup cross-check failed");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { dataset, out } => {
            let ds = Dataset::open(&dataset)?;
            let rows = ds.export()?;
            let sink: Box<dyn std::io::Write> = match out {
                Some(path) => Box::new(fs::File::create(path)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(ds.column_names())?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn ingest(csv_path: &Path, keys: &[String], out: &Path, name: Option<String>, types: &[String]) -> Result<ExitCode> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(csv_path)
        .with_context(|| format!("opening {}", csv_path.display()))?;
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        bail!("{} is empty", csv_path.display());
    }
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut declared = HashMap::new();
    for spec in types {
        let (col, ty) = spec
            .split_once('=')
            .with_context(|| format!("type spec {spec:?} is not col=type"))?;
        declared.insert(col.to_owned(), ColumnType::parse(ty)?);
    }
    let name = name.unwrap_or_else(|| {
        csv_path
            .file_stem()
            .map_or_else(|| "relation".to_owned(), |s| s.to_string_lossy().into_owned())
    });
    let ds = Dataset::ingest(out, &name, &columns, rows, keys, &declared)?;
    let s = ds.schema();
    println!(
        "ingested {} rows: n={} k={} cards={:?} case {}",
        ds.manifest().r,
        s.n(),
        s.k(),
        s.cards(),
        s.case()
    );
    Ok(ExitCode::SUCCESS)
}

fn generate(cards: &[u32], density: f64, measures: &[String], seed: u64, out: &Path) -> Result<ExitCode> {
    let measures = measures
        .iter()
        .filter(|m| !m.is_empty() && m.as_str() != "none")
        .enumerate()
        .map(|(j, ty)| {
            Ok(MeasureColumn {
                name: format!("m{}", j + 1),
                ty: ColumnType::parse(ty)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rel = bench::generate_synthetic(cards, density, &measures, seed)?;
    let ds = Dataset::from_synthetic(out, rel)?;
    println!(
        "generated {} rows over {} cells (rho = {})",
        ds.manifest().r,
        ds.schema().shape().total(),
        ds.manifest().rho
    );
    Ok(ExitCode::SUCCESS)
}

fn query(dataset: &Path, at: &str, indices: bool, via: Only) -> Result<ExitCode> {
    let ds = Dataset::open(dataset)?;
    let parts = split_list(at)?;
    let coords = if indices {
        parts
            .iter()
            .map(|p| p.trim().parse::<u32>().with_context(|| format!("{p:?} is not an index")))
            .collect::<Result<Vec<_>>>()?
    } else {
        ds.coordinates_of(&parts)?
    };
    let via = match via {
        Only::Table => Via::Table,
        Only::Array => Via::Array,
    };
    match ds.query(&coords, via)? {
        Some(values) => {
            println!("{}", values.join(","));
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("empty");
            Ok(ExitCode::from(1))
        }
    }
}

fn cost(p: Vec<f64>, r: Vec<u64>, k: Vec<u32>, t: u32, btree_p: f64, csv_dir: Option<&Path>) -> Result<ExitCode> {
    let p = or_default(p, &cost_model::DEFAULT_P);
    let r = or_default(r, &cost_model::DEFAULT_R);
    let k = or_default(k, &cost_model::DEFAULT_K);
    let tables = cost_model::emit_cost_tables(&p, &r, &k, Some((btree_p, t)))?;
    for (i, table) in tables.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", table.to_text());
    }
    if let Some(dir) = csv_dir {
        fs::create_dir_all(dir)?;
        for table in &tables {
            let path = dir.join(csv_name(table));
            fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn or_default<T: Clone>(v: Vec<T>, default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v
    }
}

fn csv_name(table: &CostTable) -> String {
    match table.model {
        Model::BinarySearch => format!("cost_p{}.csv", table.p),
        Model::BTree { t } => format!("cost_btree_p{}_t{t}.csv", table.p),
    }
}
