//! Relation schema, dimension directories, row encoding and the density /
//! data-ratio statistics that decide which representation is smaller.
//!
//! Attributes are ordered key first: `D_1..D_k` form the unique primary key
//! and `D_{k+1}..D_n` are the measures. Key values are replaced by their
//! 1-based position in the dimension's directory; measures are serialized
//! into one fixed-width record per row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::linearizer::{LogicalIndex, Shape};

/// Bytes per encoded key field (one big-endian `u32` dimension index).
pub const KEY_FIELD_WIDTH: usize = 4;

/// Record stored for every nonempty cell of a key-only relation.
pub const PRESENCE_RECORD: [u8; 1] = [1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    /// 8-byte little-endian two's-complement integer.
    Int,
    /// 8-byte little-endian IEEE-754 double.
    Float,
    /// Fixed-width bytes, zero padded.
    Text { width: u16 },
}

impl ColumnType {
    pub fn width(self) -> usize {
        match self {
            ColumnType::Int | ColumnType::Float => 8,
            ColumnType::Text { width } => usize::from(width),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "int" => Ok(ColumnType::Int),
            "float" => Ok(ColumnType::Float),
            _ => {
                let width = s
                    .strip_prefix("text:")
                    .and_then(|w| w.parse::<u16>().ok())
                    .filter(|&w| w > 0)
                    .ok_or_else(|| Error::param(format!("unknown column type {s:?}")))?;
                Ok(ColumnType::Text { width })
            }
        }
    }

    fn encode(self, value: &str, out: &mut Vec<u8>) -> Result<()> {
        match self {
            ColumnType::Int => {
                let v: i64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedInput(format!("{value:?} is not an integer")))?;
                out.extend_from_slice(&v.to_le_bytes());
            }
            ColumnType::Float => {
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedInput(format!("{value:?} is not a number")))?;
                out.extend_from_slice(&v.to_le_bytes());
            }
            ColumnType::Text { width } => {
                let bytes = value.as_bytes();
                if bytes.len() > usize::from(width) {
                    return Err(Error::MalformedInput(format!(
                        "{value:?} is longer than {width} bytes"
                    )));
                }
                if bytes.contains(&0) {
                    return Err(Error::MalformedInput(format!("{value:?} contains a NUL byte")));
                }
                out.extend_from_slice(bytes);
                out.resize(out.len() + usize::from(width) - bytes.len(), 0);
            }
        }
        Ok(())
    }

    fn decode(self, bytes: &[u8]) -> String {
        match self {
            ColumnType::Int => i64::from_le_bytes(bytes.try_into().unwrap()).to_string(),
            ColumnType::Float => f64::from_le_bytes(bytes.try_into().unwrap()).to_string(),
            ColumnType::Text { .. } => {
                let end = bytes.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
                String::from_utf8_lossy(&bytes[..end]).into_owned()
            }
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int => f.write_str("int"),
            ColumnType::Float => f.write_str("float"),
            ColumnType::Text { width } => write!(f, "text:{width}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureColumn {
    pub name: String,
    pub ty: ColumnType,
}

/// Which construction applies, by the number of non-key attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    /// k = n: every cell holds a presence marker.
    KeyOnly,
    /// k = n − 1: one measure per cell.
    SingleMeasure,
    /// k ≤ n − 2: several measures sharing one sparsity pattern.
    MultiMeasure,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::KeyOnly => "1.1",
            CaseLabel::SingleMeasure => "1.2",
            CaseLabel::MultiMeasure => "1.3",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub key_names: Vec<String>,
    pub measures: Vec<MeasureColumn>,
    shape: Shape,
}

impl RelationSchema {
    pub fn new(
        name: impl Into<String>,
        key_names: Vec<String>,
        cards: Vec<u32>,
        measures: Vec<MeasureColumn>,
    ) -> Result<Self> {
        if key_names.len() != cards.len() {
            return Err(Error::param(format!(
                "{} key names for {} cardinalities",
                key_names.len(),
                cards.len()
            )));
        }
        if let Some(m) = measures.iter().find(|m| m.ty.width() == 0) {
            return Err(Error::param(format!("measure {:?} has zero width", m.name)));
        }
        Ok(RelationSchema {
            name: name.into(),
            key_names,
            measures,
            shape: Shape::new(cards)?,
        })
    }

    /// Total attribute count.
    pub fn n(&self) -> usize {
        self.k() + self.measures.len()
    }

    /// Key length.
    pub fn k(&self) -> usize {
        self.shape.dims()
    }

    pub fn cards(&self) -> &[u32] {
        self.shape.cards()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn case(&self) -> CaseLabel {
        match self.measures.len() {
            0 => CaseLabel::KeyOnly,
            1 => CaseLabel::SingleMeasure,
            _ => CaseLabel::MultiMeasure,
        }
    }

    pub fn key_widths(&self) -> Vec<usize> {
        vec![KEY_FIELD_WIDTH; self.k()]
    }

    pub fn measure_widths(&self) -> Vec<usize> {
        self.measures.iter().map(|m| m.ty.width()).collect()
    }

    pub fn key_bytes(&self) -> usize {
        KEY_FIELD_WIDTH * self.k()
    }

    /// Width of one measure record; the presence byte for key-only relations.
    pub fn record_width(&self) -> usize {
        match self.case() {
            CaseLabel::KeyOnly => PRESENCE_RECORD.len(),
            _ => self.measure_widths().iter().sum(),
        }
    }

    /// Bytes per table row, `S`.
    pub fn row_width(&self) -> usize {
        self.key_bytes() + self.record_width()
    }

    /// Data ratio δ: measure bytes over row bytes.
    pub fn data_ratio(&self) -> f64 {
        self.record_width() as f64 / self.row_width() as f64
    }
}

/// The ordered distinct values of one dimension. Index `j` (1-based) names
/// `values[j - 1]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DimensionDirectory {
    values: Vec<String>,
    positions: HashMap<String, u32>,
}

impl DimensionDirectory {
    pub fn from_values<I, S>(values: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut values: Vec<String> = values.into_iter().map(Into::into).collect();
        values.sort_unstable();
        values.dedup();
        Self::from_sorted(values)
    }

    /// Builds from values that must already be strictly ascending.
    pub fn from_sorted(values: Vec<String>) -> Result<Self> {
        if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::MalformedInput(format!(
                "directory values not strictly ascending at {:?}, {:?}",
                w[0], w[1]
            )));
        }
        if values.len() > u32::MAX as usize {
            return Err(Error::Capacity("more than 2^32-1 dimension values".into()));
        }
        let positions = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32 + 1))
            .collect();
        Ok(DimensionDirectory { values, positions })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn index_of(&self, value: &str) -> Option<u32> {
        self.positions.get(value).copied()
    }

    pub fn value(&self, index: u32) -> Option<&str> {
        let i = usize::try_from(index).ok()?.checked_sub(1)?;
        self.values.get(i).map(String::as_str)
    }
}

/// Collects the active domain of every attribute position.
pub fn compute_active_domains(rows: &[Vec<String>], n: usize) -> Result<Vec<DimensionDirectory>> {
    let mut seen: HashSet<&[String]> = HashSet::with_capacity(rows.len());
    let mut domains: Vec<Vec<&str>> = vec![Vec::new(); n];
    for row in rows {
        if row.len() != n {
            return Err(Error::MalformedInput(format!(
                "row has {} attributes, expected {n}",
                row.len()
            )));
        }
        if !seen.insert(row.as_slice()) {
            return Err(Error::DuplicateRow(row.clone()));
        }
        for (domain, value) in domains.iter_mut().zip(row) {
            domain.push(value);
        }
    }
    domains.into_iter().map(DimensionDirectory::from_values).collect()
}

/// A row with its key replaced by directory indices `(i_1..i_k)` and its
/// measures serialized into one record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedRow {
    pub key: Vec<u32>,
    pub record: Vec<u8>,
}

/// Encodes a raw row laid out as `(key values.., measure values..)`.
/// Only the first k directories are consulted.
pub fn encode_row(
    row: &[String],
    dirs: &[DimensionDirectory],
    schema: &RelationSchema,
) -> Result<EncodedRow> {
    if row.len() != schema.n() {
        return Err(Error::MalformedInput(format!(
            "row has {} attributes, expected {}",
            row.len(),
            schema.n()
        )));
    }
    let (keys, measures) = row.split_at(schema.k());
    let key = keys
        .iter()
        .enumerate()
        .map(|(dim, value)| {
            dirs.get(dim)
                .and_then(|d| d.index_of(value))
                .ok_or_else(|| Error::UnknownDimensionValue {
                    dimension: dim + 1,
                    value: value.clone(),
                })
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(EncodedRow {
        key,
        record: encode_record(measures, schema)?,
    })
}

pub fn encode_record(measures: &[String], schema: &RelationSchema) -> Result<Vec<u8>> {
    if schema.case() == CaseLabel::KeyOnly {
        return Ok(PRESENCE_RECORD.to_vec());
    }
    let mut out = Vec::with_capacity(schema.record_width());
    for (col, value) in schema.measures.iter().zip(measures) {
        col.ty.encode(value, &mut out)?;
    }
    Ok(out)
}

/// Renders a measure record back to text, one string per measure column.
/// Key-only records decode to an empty list.
pub fn decode_record(record: &[u8], schema: &RelationSchema) -> Vec<String> {
    let mut out = Vec::with_capacity(schema.measures.len());
    let mut at = 0;
    for col in &schema.measures {
        let w = col.ty.width();
        out.push(col.ty.decode(&record[at..at + w]));
        at += w;
    }
    out
}

/// Inverse of [`encode_row`].
pub fn decode_row(
    row: &EncodedRow,
    dirs: &[DimensionDirectory],
    schema: &RelationSchema,
) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(schema.n());
    for (dim, &idx) in row.key.iter().enumerate() {
        let value = dirs.get(dim).and_then(|d| d.value(idx)).ok_or(Error::OutOfRange {
            what: "dimension index",
            value: u64::from(idx),
            max: dirs.get(dim).map_or(0, |d| d.len() as u64),
        })?;
        out.push(value.to_owned());
    }
    out.extend(decode_record(&row.record, schema));
    Ok(out)
}

/// Appends the byte form of a key: big-endian `u32` per dimension, `i_k`
/// first, so bytewise order equals logical order.
pub fn encode_key(indices: &[u32], out: &mut Vec<u8>) {
    for &i in indices.iter().rev() {
        out.extend_from_slice(&i.to_be_bytes());
    }
}

pub fn decode_key(bytes: &[u8]) -> Vec<u32> {
    let mut key: Vec<u32> = bytes
        .chunks_exact(KEY_FIELD_WIDTH)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
        .collect();
    key.reverse();
    key
}

/// Sorts encoded rows into logical order, pairing each with its logical
/// index. Two rows on the same cell are a duplicate-key error.
pub fn sort_rows(rows: Vec<EncodedRow>, shape: &Shape) -> Result<Vec<(LogicalIndex, EncodedRow)>> {
    let mut keyed = rows
        .into_iter()
        .map(|row| Ok((shape.linearize(&row.key)?, row)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_unstable_by_key(|(i, _)| *i);
    if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateKey { logical: w[0].0 });
    }
    Ok(keyed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationStats {
    /// Row count.
    pub r: u64,
    /// Bytes per table row.
    pub row_bytes: usize,
    /// Data ratio δ.
    pub delta: f64,
    /// Density ρ.
    pub rho: f64,
    /// `∏c_i`.
    pub cell_total: u64,
}

impl RelationStats {
    pub fn new(schema: &RelationSchema, r: u64) -> Result<Self> {
        Ok(RelationStats {
            r,
            row_bytes: schema.row_width(),
            delta: schema.data_ratio(),
            rho: density(r, schema.cards())?,
            cell_total: schema.shape().total(),
        })
    }

    /// `S_m / S_t` for the uncompressed array.
    pub fn space_ratio(&self) -> Result<f64> {
        space_ratio(self.delta, self.rho)
    }

    /// Uncompressed array bytes, `∏c_i · δS`.
    pub fn dense_array_bytes(&self, record_width: usize) -> u128 {
        u128::from(self.cell_total) * record_width as u128
    }

    pub fn table_bytes(&self) -> u128 {
        u128::from(self.r) * self.row_bytes as u128
    }
}

/// ρ = r / ∏c_i.
pub fn density(r: u64, cards: &[u32]) -> Result<f64> {
    if cards.is_empty() {
        return Err(Error::param("density needs at least one dimension"));
    }
    let cells: u128 = cards.iter().map(|&c| u128::from(c)).product();
    if u128::from(r) > cells {
        return Err(Error::ImpossibleDensity { rows: r, cells });
    }
    if cells == 0 {
        return Err(Error::UndefinedDensity);
    }
    Ok(r as f64 / cells as f64)
}

/// `S_m / S_t = δ / ρ`; below 1 exactly when the array is the smaller form.
pub fn space_ratio(delta: f64, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param(format!("data ratio {delta} outside [0, 1)")));
    }
    if rho == 0.0 {
        return Err(Error::UndefinedDensity);
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param(format!("density {rho} outside (0, 1]")));
    }
    Ok(delta / rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjointResult {
    /// Number of leading key dimensions folded.
    pub h: usize,
    /// Distinct prefixes `(i_1..i_h)` in logical order of the prefix.
    pub conjoint_values: Vec<Vec<u32>>,
    /// `N_R' / N_R = |Conjoint| / (c_1…c_h)`.
    pub cell_ratio: f64,
    pub rho: f64,
    pub rho_prime: f64,
}

/// R' keyed by `(conjoint index, i_{h+1}..i_k)`.
#[derive(Debug, Clone)]
pub struct ConjointRelation {
    pub result: ConjointResult,
    pub cards: Vec<u32>,
    pub rows: Vec<EncodedRow>,
}

impl ConjointRelation {
    /// `N_R' = |Conjoint| · c_{h+1} … c_k`.
    pub fn cell_total(&self) -> u128 {
        self.cards.iter().map(|&c| u128::from(c)).product()
    }
}

/// Folds the first `h` key dimensions into one conjoint dimension made of
/// the prefixes that actually occur. Row order and count are preserved.
pub fn build_conjoint(
    rows: &[EncodedRow],
    cards: &[u32],
    h: usize,
    allow_degenerate: bool,
) -> Result<ConjointRelation> {
    let k = cards.len();
    if h == 0 || h > k {
        return Err(Error::param(format!("conjoint prefix length {h} outside 1..={k}")));
    }
    if h == k && !allow_degenerate {
        return Err(Error::DegenerateConjoint(k));
    }
    if rows.is_empty() {
        return Err(Error::EmptyRelation);
    }
    let prefix_shape = Shape::new(cards[..h].to_vec())?;
    let mut prefixes: BTreeMap<LogicalIndex, Vec<u32>> = BTreeMap::new();
    for row in rows {
        let prefix = &row.key[..h];
        let lin = prefix_shape.linearize(prefix)?;
        prefixes.entry(lin).or_insert_with(|| prefix.to_vec());
    }
    let conj_index: HashMap<LogicalIndex, u32> = prefixes
        .keys()
        .enumerate()
        .map(|(i, &lin)| (lin, i as u32 + 1))
        .collect();

    let remapped = rows
        .iter()
        .map(|row| {
            let lin = prefix_shape.linearize(&row.key[..h])?;
            let mut key = Vec::with_capacity(k - h + 1);
            key.push(conj_index[&lin]);
            key.extend_from_slice(&row.key[h..]);
            Ok(EncodedRow {
                key,
                record: row.record.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let conj_len = prefixes.len();
    let mut new_cards = Vec::with_capacity(k - h + 1);
    new_cards.push(conj_len as u32);
    new_cards.extend_from_slice(&cards[h..]);

    let prefix_cells = prefix_shape.total() as f64;
    let rho = density(rows.len() as u64, cards)?;
    let result = ConjointResult {
        h,
        conjoint_values: prefixes.into_values().collect(),
        cell_ratio: conj_len as f64 / prefix_cells,
        rho,
        rho_prime: prefix_cells / conj_len as f64 * rho,
    };
    Ok(ConjointRelation {
        result,
        cards: new_cards,
        rows: remapped,
    })
}
