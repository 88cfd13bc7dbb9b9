//! On-disk dataset: a directory holding the manifest, one `.dim` file per key
//! dimension, the sorted staging rows and whichever representations have
//! been built.
//!
//! ```text
//! manifest.txt   key=value lines
//! dimN.dim       values of key dimension N, one per line, line = index
//! data.rows      sorted encoded rows (same layout as the table file)
//! data.tbl/.btx  table representation
//! data.arr/.hdr  array representation
//! ```

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::array_store::ArrayStore;
use crate::bench::SyntheticRelation;
use crate::error::{Error, Result};
use crate::linearizer::{LogicalIndex, Shape};
use crate::relation::{
    build_conjoint, compute_active_domains, decode_key, decode_record, decode_row, encode_row,
    sort_rows, space_ratio, CaseLabel, ColumnType, ConjointResult, DimensionDirectory, EncodedRow,
    MeasureColumn, RelationSchema, RelationStats, KEY_FIELD_WIDTH,
};
use crate::storage::{Blob, RecordFile};
use crate::table_store::{write_rows, TableStore, DEFAULT_PAGE_SIZE};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ROWS_FILE: &str = "data.rows";
pub const TABLE_FILE: &str = "data.tbl";
pub const INDEX_FILE: &str = "data.btx";
pub const ARRAY_FILE: &str = "data.arr";
pub const HEADER_FILE: &str = "data.hdr";
pub const PAGE_SIZE_ENV: &str = "CUBESTORE_PAGE_SIZE";

/// B-tree page size from `CUBESTORE_PAGE_SIZE`, else 4096.
pub fn page_size_from_env() -> Result<usize> {
    match std::env::var(PAGE_SIZE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("{PAGE_SIZE_ENV}={v:?} is not a page size"))),
        Err(_) => Ok(DEFAULT_PAGE_SIZE),
    }
}

fn dim_file(dim: usize) -> String {
    format!("dim{dim}.dim")
}

/// Escapes newline and backslash for one-value-per-line files.
pub fn escape_line(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_line(line: &str) -> Result<String> {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some(',') => out.push(','),
            other => {
                return Err(Error::MalformedInput(format!(
                    "bad escape \\{} in {line:?}",
                    other.map_or(String::new(), String::from)
                )))
            }
        }
    }
    Ok(out)
}

fn escape_item(value: &str) -> String {
    escape_line(value).replace(',', "\\,")
}

/// Splits a comma-separated list where `\,` escapes a comma.
pub fn split_list(value: &str) -> Result<Vec<String>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut escaped = false;
    for ch in value.chars() {
        if escaped {
            cur.push('\\');
            cur.push(ch);
            escaped = false;
        } else if ch == '\\' {
            escaped = true;
        } else if ch == ',' {
            items.push(unescape_line(&cur)?);
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if escaped {
        return Err(Error::MalformedInput(format!("dangling escape in {value:?}")));
    }
    items.push(unescape_line(&cur)?);
    Ok(items)
}

pub fn write_dim_file(path: &Path, dir: &DimensionDirectory) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in dir.values() {
        out.write_all(escape_line(v).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dim_file(path: &Path) -> Result<DimensionDirectory> {
    let text = read_text(path)?;
    let body = text.strip_suffix('\n').unwrap_or(&text);
    let values = if text.is_empty() {
        Vec::new()
    } else {
        body.split('\n').map(unescape_line).collect::<Result<Vec<_>>>()?
    };
    DimensionDirectory::from_sorted(values).map_err(|e| Error::corrupt(path, e.to_string()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(path.to_owned()),
        _ => Error::Io(e),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub schema: RelationSchema,
    pub r: u64,
    pub delta: f64,
    pub rho: f64,
    pub build_timestamp: u64,
    pub rows_file: String,
    pub table_file: String,
    pub index_file: String,
    pub array_file: String,
    pub header_file: String,
    pub dim_files: Vec<String>,
}

impl Manifest {
    pub fn new(schema: RelationSchema, r: u64) -> Result<Self> {
        let stats = RelationStats::new(&schema, r)?;
        let build_timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Ok(Manifest {
            format_version: FORMAT_VERSION,
            dim_files: (1..=schema.k()).map(dim_file).collect(),
            schema,
            r,
            delta: stats.delta,
            rho: stats.rho,
            build_timestamp,
            rows_file: ROWS_FILE.into(),
            table_file: TABLE_FILE.into(),
            index_file: INDEX_FILE.into(),
            array_file: ARRAY_FILE.into(),
            header_file: HEADER_FILE.into(),
        })
    }

    pub fn to_text(&self) -> String {
        let s = &self.schema;
        let join = |items: Vec<String>| items.join(",");
        let nums = |v: Vec<usize>| join(v.iter().map(ToString::to_string).collect());
        let lines = [
            ("format_version", self.format_version.to_string()),
            ("schema_name", escape_line(&s.name)),
            ("n", s.n().to_string()),
            ("k", s.k().to_string()),
            ("key_columns", join(s.key_names.iter().map(|n| escape_item(n)).collect())),
            (
                "measure_columns",
                join(
                    s.measures
                        .iter()
                        .map(|m| escape_item(&format!("{}:{}", m.ty, m.name)))
                        .collect(),
                ),
            ),
            ("cards", join(s.cards().iter().map(ToString::to_string).collect())),
            ("key_widths", nums(s.key_widths())),
            ("measure_widths", nums(s.measure_widths())),
            ("case", s.case().to_string()),
            ("r", self.r.to_string()),
            ("delta", self.delta.to_string()),
            ("rho", self.rho.to_string()),
            ("rows_file", self.rows_file.clone()),
            ("table_file", self.table_file.clone()),
            ("index_file", self.index_file.clone()),
            ("array_file", self.array_file.clone()),
            ("header_file", self.header_file.clone()),
            ("dim_files", join(self.dim_files.iter().map(|n| escape_item(n)).collect())),
            ("build_timestamp", self.build_timestamp.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedInput(format!("manifest line {line:?} has no '='")))?;
            map.insert(k.trim(), v);
        }
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::MalformedInput(format!("manifest lacks {k}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::MalformedInput(format!("manifest {k}={v:?} is not a number")))
        }
        let nums = |k: &str| -> Result<Vec<u64>> {
            split_list(get(k)?)?.iter().map(|v| num(k, v)).collect()
        };

        let format_version: u32 = num("format_version", get("format_version")?)?;
        if format_version != FORMAT_VERSION {
            return Err(Error::MalformedInput(format!(
                "manifest format {format_version} is not supported"
            )));
        }
        let measures = split_list(get("measure_columns")?)?
            .into_iter()
            .map(|item| {
                let (ty, name) = match item.strip_prefix("text:") {
                    Some(rest) => {
                        let (w, name) = rest.split_once(':').unwrap_or((rest, ""));
                        (format!("text:{w}"), name.to_owned())
                    }
                    None => {
                        let (ty, name) = item.split_once(':').unwrap_or((&item, ""));
                        (ty.to_owned(), name.to_owned())
                    }
                };
                Ok(MeasureColumn {
                    name,
                    ty: ColumnType::parse(&ty)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cards = nums("cards")?
            .into_iter()
            .map(|c| u32::try_from(c).map_err(|_| Error::MalformedInput(format!("cardinality {c} too large"))))
            .collect::<Result<Vec<_>>>()?;
        let schema = RelationSchema::new(
            unescape_line(get("schema_name")?)?,
            split_list(get("key_columns")?)?,
            cards,
            measures,
        )?;

        let m = Manifest {
            format_version,
            r: num("r", get("r")?)?,
            delta: num("delta", get("delta")?)?,
            rho: num("rho", get("rho")?)?,
            build_timestamp: num("build_timestamp", get("build_timestamp")?)?,
            rows_file: get("rows_file")?.to_owned(),
            table_file: get("table_file")?.to_owned(),
            index_file: get("index_file")?.to_owned(),
            array_file: get("array_file")?.to_owned(),
            header_file: get("header_file")?.to_owned(),
            dim_files: split_list(get("dim_files")?)?,
            schema,
        };

        // consistency
        let s = &m.schema;
        let inconsistent = |what: &str| Err(Error::MalformedInput(format!("manifest {what} is inconsistent")));
        if num::<usize>("n", get("n")?)? != s.n() {
            return inconsistent("n");
        }
        if num::<usize>("k", get("k")?)? != s.k() {
            return inconsistent("k");
        }
        if nums("key_widths")? != vec![KEY_FIELD_WIDTH as u64; s.k()] {
            return inconsistent("key_widths");
        }
        if nums("measure_widths")? != s.measure_widths().iter().map(|&w| w as u64).collect::<Vec<_>>() {
            return inconsistent("measure_widths");
        }
        if get("case")?.trim() != s.case().as_str() {
            return inconsistent("case");
        }
        if m.dim_files.len() != s.k() {
            return inconsistent("dim_files");
        }
        let stats = RelationStats::new(s, m.r)?;
        if stats.delta != m.delta {
            return inconsistent("delta");
        }
        if stats.rho != m.rho {
            return inconsistent("rho");
        }
        Ok(m)
    }

    pub fn stats(&self) -> RelationStats {
        RelationStats::new(&self.schema, self.r).expect("validated at load")
    }
}

/// Which representation(s) to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildTarget {
    Table,
    Array,
    Both,
}

impl BuildTarget {
    fn table(self) -> bool {
        matches!(self, BuildTarget::Table | BuildTarget::Both)
    }

    fn array(self) -> bool {
        matches!(self, BuildTarget::Array | BuildTarget::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Via {
    Table,
    Array,
}

/// File sizes of both representations; `None` where not built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeReport {
    pub dimensions: usize,
    pub r: u64,
    pub table: Option<u64>,
    pub index: Option<u64>,
    pub array: Option<u64>,
    pub header: Option<u64>,
    pub dimension_values: u64,
}

impl SizeReport {
    pub fn table_total(&self) -> Option<u64> {
        Some(self.table? + self.index?)
    }

    pub fn array_total(&self) -> Option<u64> {
        Some(self.array? + self.header? + self.dimension_values)
    }
}

fn kb(bytes: Option<u64>) -> String {
    bytes.map_or_else(|| "-".to_owned(), |b| format!("{} KB", b.div_ceil(1024)))
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Number of dimensions", self.dimensions.to_string()),
            ("Cardinality of the relation", self.r.to_string()),
            ("Size of table representation", kb(self.table_total())),
            ("  Table", kb(self.table)),
            ("  B-tree index", kb(self.index)),
            ("Size of array representation", kb(self.array_total())),
            ("  Compressed array", kb(self.array)),
            ("  Header", kb(self.header)),
            ("  Dimension values", kb(Some(self.dimension_values))),
        ];
        for (label, value) in rows {
            writeln!(f, "{label:<30} {value:>14}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub stats: RelationStats,
    /// δ/ρ, absent for an empty relation.
    pub space_ratio: Option<f64>,
    pub conjoint: Option<ConjointSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjointSummary {
    pub result: ConjointResult,
    pub conjoint_len: usize,
    pub new_cards: Vec<u32>,
}

impl StatsReport {
    pub fn verdict(&self) -> &'static str {
        match self.space_ratio {
            None => "undefined (empty relation)",
            Some(q) if q < 1.0 => "multidimensional smaller (uncompressed model)",
            Some(q) if q > 1.0 => "table smaller (uncompressed model)",
            Some(_) => "equal size (uncompressed model)",
        }
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.stats;
        writeln!(f, "r              {}", s.r)?;
        writeln!(f, "cells          {}", s.cell_total)?;
        writeln!(f, "row bytes      {}", s.row_bytes)?;
        writeln!(f, "delta          {:.6}", s.delta)?;
        writeln!(f, "rho            {:.6}", s.rho)?;
        match self.space_ratio {
            Some(q) => writeln!(f, "delta/rho      {q:.6}")?,
            None => writeln!(f, "delta/rho      undefined")?,
        }
        writeln!(f, "verdict        {}", self.verdict())?;
        if let Some(c) = &self.conjoint {
            writeln!(f, "conjoint h     {}", c.result.h)?;
            writeln!(f, "|Conjoint|     {}", c.conjoint_len)?;
            writeln!(f, "new cards      {:?}", c.new_cards)?;
            writeln!(f, "cell ratio     {:.6}", c.result.cell_ratio)?;
            writeln!(f, "rho'           {:.6}", c.result.rho_prime)?;
        }
        Ok(())
    }
}

/// Measure types given explicitly, else inferred: int, then float, then
/// text as wide as the longest value.
pub fn infer_type(values: impl Iterator<Item = impl AsRef<str>> + Clone) -> Result<ColumnType> {
    if values.clone().all(|v| v.as_ref().trim().parse::<i64>().is_ok()) {
        return Ok(ColumnType::Int);
    }
    if values.clone().all(|v| v.as_ref().trim().parse::<f64>().is_ok()) {
        return Ok(ColumnType::Float);
    }
    let width = values.map(|v| v.as_ref().len()).max().unwrap_or(1).max(1);
    let width = u16::try_from(width).map_err(|_| Error::Capacity(format!("text value of {width} bytes")))?;
    Ok(ColumnType::Text { width })
}

#[derive(Debug, Clone)]
pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
    dirs: Vec<DimensionDirectory>,
}

impl Dataset {
    /// Ingests raw rows: `columns` names every attribute in row order;
    /// `keys` selects the key attributes in dimension order.
    pub fn ingest(
        out_dir: &Path,
        name: &str,
        columns: &[String],
        rows: Vec<Vec<String>>,
        keys: &[String],
        types: &HashMap<String, ColumnType>,
    ) -> Result<Dataset> {
        if columns.is_empty() {
            return Err(Error::MalformedInput("no columns".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyRelation);
        }
        if keys.is_empty() {
            return Err(Error::param("at least one key column is required"));
        }
        let position = |name: &String| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::MalformedInput(format!("no column named {name:?}")))
        };
        let key_pos = keys.iter().map(position).collect::<Result<Vec<_>>>()?;
        if let Some(dup) = keys.iter().enumerate().find(|(i, k)| keys[..*i].contains(k)) {
            return Err(Error::param(format!("key column {:?} listed twice", dup.1)));
        }
        if let Some(t) = types.keys().find(|t| !columns.contains(t) || keys.contains(t)) {
            return Err(Error::param(format!("type given for {t:?}, which is not a measure column")));
        }
        let measure_pos: Vec<usize> = (0..columns.len()).filter(|i| !key_pos.contains(i)).collect();
        let order: Vec<usize> = key_pos.iter().chain(&measure_pos).copied().collect();

        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(line, row)| {
                if row.len() != columns.len() {
                    return Err(Error::MalformedInput(format!(
                        "record {} has {} fields, expected {}",
                        line + 1,
                        row.len(),
                        columns.len()
                    )));
                }
                Ok(order.iter().map(|&i| row[i].clone()).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;

        let dirs = compute_active_domains(&rows, columns.len())?;
        let k = keys.len();
        let measures = measure_pos
            .iter()
            .enumerate()
            .map(|(j, &col)| {
                let name = &columns[col];
                let ty = match types.get(name) {
                    Some(&ty) => ty,
                    None => infer_type(rows.iter().map(|r| r[k + j].as_str()))?,
                };
                Ok(MeasureColumn { name: name.clone(), ty })
            })
            .collect::<Result<Vec<_>>>()?;
        let cards = dirs[..k].iter().map(|d| d.len() as u32).collect();
        let schema = RelationSchema::new(name, keys.to_vec(), cards, measures)?;

        let encoded = rows
            .iter()
            .map(|row| encode_row(row, &dirs, &schema))
            .collect::<Result<Vec<_>>>()?;
        drop(rows);
        let sorted = sort_rows(encoded, schema.shape())?;
        let mut dirs = dirs;
        dirs.truncate(k);
        Dataset::create(out_dir, schema, dirs, sorted)
    }

    pub fn from_synthetic(out_dir: &Path, rel: SyntheticRelation) -> Result<Dataset> {
        Dataset::create(out_dir, rel.schema, rel.dirs, rel.rows)
    }

    /// Writes manifest, `.dim` files and the staging rows.
    pub fn create(
        out_dir: &Path,
        schema: RelationSchema,
        dirs: Vec<DimensionDirectory>,
        sorted: Vec<(LogicalIndex, EncodedRow)>,
    ) -> Result<Dataset> {
        if dirs.len() != schema.k() || dirs.iter().zip(schema.cards()).any(|(d, &c)| d.len() != c as usize) {
            return Err(Error::param("directories do not match the schema cardinalities"));
        }
        fs::create_dir_all(out_dir)?;
        let manifest = Manifest::new(schema, sorted.len() as u64)?;
        for (d, file) in dirs.iter().zip(&manifest.dim_files) {
            write_dim_file(&out_dir.join(file), d)?;
        }
        let mut out = BufWriter::new(File::create(out_dir.join(&manifest.rows_file))?);
        write_rows(
            sorted.into_iter().map(Ok),
            manifest.schema.k(),
            manifest.schema.record_width(),
            &mut out,
        )?;
        out.flush()?;
        drop(out);
        // stale representations from an earlier ingest
        for f in [
            &manifest.table_file,
            &manifest.index_file,
            &manifest.array_file,
            &manifest.header_file,
        ] {
            match fs::remove_file(out_dir.join(f)) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
        fs::write(out_dir.join(MANIFEST_FILE), manifest.to_text())?;
        Ok(Dataset {
            dir: out_dir.to_owned(),
            manifest,
            dirs,
        })
    }

    pub fn open(dir: &Path) -> Result<Dataset> {
        let manifest = Manifest::parse(&read_text(&dir.join(MANIFEST_FILE))?)?;
        let dirs = manifest
            .dim_files
            .iter()
            .map(|f| read_dim_file(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        for (j, (d, &c)) in dirs.iter().zip(manifest.schema.cards()).enumerate() {
            if d.len() != c as usize {
                return Err(Error::corrupt(
                    dir.join(&manifest.dim_files[j]),
                    format!("{} values, manifest says {c}", d.len()),
                ));
            }
        }
        Ok(Dataset {
            dir: dir.to_owned(),
            manifest,
            dirs,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn schema(&self) -> &RelationSchema {
        &self.manifest.schema
    }

    pub fn directories(&self) -> &[DimensionDirectory] {
        &self.dirs
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn shape(&self) -> &Shape {
        self.schema().shape()
    }

    /// The staged rows in logical order.
    pub fn rows(&self) -> Result<impl Iterator<Item = Result<(LogicalIndex, EncodedRow)>> + '_> {
        let schema = self.schema();
        let file = RecordFile::new(Blob::open(&self.path(&self.manifest.rows_file))?, schema.row_width())?;
        if file.count() != self.manifest.r {
            return Err(Error::corrupt(
                self.path(&self.manifest.rows_file),
                format!("{} rows, manifest says {}", file.count(), self.manifest.r),
            ));
        }
        let key_bytes = schema.key_bytes();
        let mut buf = vec![0; schema.row_width()];
        Ok((1..=file.count()).map(move |recno| {
            file.read(recno, &mut buf)?;
            let key = decode_key(&buf[..key_bytes]);
            let i = self.shape().linearize(&key)?;
            Ok((i, EncodedRow { key, record: buf[key_bytes..].to_vec() }))
        }))
    }

    pub fn build(&self, target: BuildTarget, page_size: usize) -> Result<SizeReport> {
        let schema = self.schema();
        if target.table() {
            TableStore::build(
                self.rows()?,
                schema.k(),
                schema.record_width(),
                page_size,
                &self.path(&self.manifest.table_file),
                &self.path(&self.manifest.index_file),
            )?;
        }
        if target.array() {
            ArrayStore::build(
                self.rows()?.map(|c| c.map(|(i, row)| (i, row.record))),
                self.shape().clone(),
                schema.record_width(),
                &self.path(&self.manifest.array_file),
                &self.path(&self.manifest.header_file),
            )?;
        }
        self.sizes()
    }

    pub fn sizes(&self) -> Result<SizeReport> {
        let size = |f: &str| match fs::metadata(self.path(f)) {
            Ok(m) => Ok(Some(m.len())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::Io(e)),
        };
        let mut dimension_values = 0;
        for f in &self.manifest.dim_files {
            dimension_values += size(f)?.unwrap_or(0);
        }
        Ok(SizeReport {
            dimensions: self.schema().k(),
            r: self.manifest.r,
            table: size(&self.manifest.table_file)?,
            index: size(&self.manifest.index_file)?,
            array: size(&self.manifest.array_file)?,
            header: size(&self.manifest.header_file)?,
            dimension_values,
        })
    }

    pub fn open_table(&self) -> Result<TableStore> {
        let s = self.schema();
        let t = TableStore::open(
            s.k(),
            s.record_width(),
            &self.path(&self.manifest.table_file),
            &self.path(&self.manifest.index_file),
        )?;
        if t.len() != self.manifest.r {
            return Err(Error::corrupt(self.path(&self.manifest.table_file), "row count differs from manifest"));
        }
        Ok(t)
    }

    pub fn open_array(&self) -> Result<ArrayStore> {
        ArrayStore::open(
            self.shape().clone(),
            self.schema().record_width(),
            &self.path(&self.manifest.array_file),
            &self.path(&self.manifest.header_file),
        )
    }

    /// Maps key values (dimension order) to 1-based indices.
    pub fn coordinates_of(&self, values: &[String]) -> Result<Vec<u32>> {
        if values.len() != self.schema().k() {
            return Err(Error::MalformedInput(format!(
                "expected {} coordinates, got {}",
                self.schema().k(),
                values.len()
            )));
        }
        values
            .iter()
            .enumerate()
            .map(|(d, v)| {
                self.dirs[d].index_of(v).ok_or_else(|| Error::UnknownDimensionValue {
                    dimension: d + 1,
                    value: v.clone(),
                })
            })
            .collect()
    }

    /// Point query by 1-based indices. Returns the decoded measures; a
    /// key-only relation answers `["1"]` for a present cell.
    pub fn query(&self, indices: &[u32], via: Via) -> Result<Option<Vec<String>>> {
        // bounds are checked the same way on both paths
        self.shape().linearize(indices)?;
        let record = match via {
            Via::Table => self.open_table()?.get_record(indices)?,
            Via::Array => self.open_array()?.get_cell(indices)?,
        };
        Ok(record.map(|rec| self.render_record(&rec)))
    }

    pub fn render_record(&self, record: &[u8]) -> Vec<String> {
        match self.schema().case() {
            CaseLabel::KeyOnly => vec![record[0].to_string()],
            _ => decode_record(record, self.schema()),
        }
    }

    /// Column names in stored order: keys, then measures.
    pub fn column_names(&self) -> Vec<String> {
        let s = self.schema();
        s.key_names
            .iter()
            .cloned()
            .chain(s.measures.iter().map(|m| m.name.clone()))
            .collect()
    }

    /// Decoded rows in logical order.
    pub fn export(&self) -> Result<Vec<Vec<String>>> {
        self.rows()?
            .map(|cell| {
                let (_, row) = cell?;
                decode_row(&row, &self.dirs, self.schema())
            })
            .collect()
    }

    pub fn stats(&self, conjoint: Option<(usize, bool)>) -> Result<StatsReport> {
        let stats = self.manifest.stats();
        let ratio = match space_ratio(stats.delta, stats.rho) {
            Ok(q) => Some(q),
            Err(Error::UndefinedDensity) => None,
            Err(e) => return Err(e),
        };
        let conjoint = match conjoint {
            None => None,
            Some((h, allow)) => {
                let rows = self.rows()?.map(|c| c.map(|(_, row)| row)).collect::<Result<Vec<_>>>()?;
                let c = build_conjoint(&rows, self.schema().cards(), h, allow)?;
                Some(ConjointSummary {
                    conjoint_len: c.result.conjoint_values.len(),
                    new_cards: c.cards,
                    result: c.result,
                })
            }
        };
        Ok(StatsReport {
            stats,
            space_ratio: ratio,
            conjoint,
        })
    }
}
