//! Table representation: fixed-width rows sorted by key, plus a B-tree from
//! encoded key to record number.
//!
//! A row is the encoded key (see [`crate::relation::encode_key`]) followed
//! by the measure record.

pub mod btree;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linearizer::LogicalIndex;
use crate::relation::{decode_key, encode_key, EncodedRow, KEY_FIELD_WIDTH};
use crate::storage::{Blob, RecordFile};

pub use btree::{page_read_bound, BTreeIndex, Probe, TreeShape, DEFAULT_PAGE_SIZE};

/// 1-based row number in the table file.
pub type RecordNumber = u64;

/// Reusable buffers for repeated lookups.
#[derive(Debug, Clone)]
pub struct Scratch {
    key: Vec<u8>,
    page: Vec<u8>,
    row: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct TableStore {
    key_bytes: usize,
    rows: RecordFile,
    index: BTreeIndex,
}

/// Writes sorted cells as table rows, returning the key bytes of all rows
/// in order. Enforces the same ordering contract as array compression.
pub fn write_rows<I, W>(cells: I, k: usize, record_width: usize, out: &mut W) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Result<(LogicalIndex, EncodedRow)>>,
    W: Write,
{
    let key_bytes = KEY_FIELD_WIDTH * k;
    let mut keys = Vec::new();
    let mut previous = 0;
    for cell in cells {
        let (i, row) = cell?;
        if i == previous {
            return Err(Error::DuplicateKey { logical: i });
        }
        if i < previous {
            return Err(Error::NotSorted {
                previous,
                current: i,
            });
        }
        if row.key.len() != k || row.record.len() != record_width {
            return Err(Error::MalformedInput(format!(
                "row with {} key fields and {} record bytes, expected {k} and {record_width}",
                row.key.len(),
                row.record.len()
            )));
        }
        let start = keys.len();
        encode_key(&row.key, &mut keys);
        out.write_all(&keys[start..start + key_bytes])?;
        out.write_all(&row.record)?;
        previous = i;
    }
    Ok(keys)
}

impl TableStore {
    /// Writes the table file and bulk-loads its index.
    pub fn build<I>(
        cells: I,
        k: usize,
        record_width: usize,
        page_size: usize,
        tbl_path: &Path,
        btx_path: &Path,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = Result<(LogicalIndex, EncodedRow)>>,
    {
        let mut out = BufWriter::new(File::create(tbl_path)?);
        let keys = write_rows(cells, k, record_width, &mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        btree::bulk_load(&keys, KEY_FIELD_WIDTH * k, page_size, btx_path)?;
        TableStore::open(k, record_width, tbl_path, btx_path)
    }

    pub fn open(k: usize, record_width: usize, tbl_path: &Path, btx_path: &Path) -> Result<Self> {
        let key_bytes = KEY_FIELD_WIDTH * k;
        let rows = RecordFile::new(Blob::open(tbl_path)?, key_bytes + record_width)?;
        let index = BTreeIndex::open(btx_path)?;
        if index.meta().key_bytes != key_bytes {
            return Err(Error::corrupt(btx_path, "index key width does not match the table"));
        }
        if index.len() != rows.count() {
            return Err(Error::corrupt(
                btx_path,
                format!("index has {} entries, table {} rows", index.len(), rows.count()),
            ));
        }
        Ok(TableStore {
            key_bytes,
            rows,
            index,
        })
    }

    pub fn index(&self) -> &BTreeIndex {
        &self.index
    }

    pub fn len(&self) -> u64 {
        self.rows.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_width(&self) -> usize {
        self.rows.width()
    }

    pub fn key_bytes(&self) -> usize {
        self.key_bytes
    }

    pub fn table_bytes(&self) -> u64 {
        self.rows.blob().len()
    }

    pub fn btree_lookup(&self, key: &[u32]) -> Result<Option<RecordNumber>> {
        self.index.lookup(&self.key_of(key))
    }

    pub fn btree_probe(&self, key: &[u32], page: &mut [u8]) -> Result<Probe> {
        self.index.probe(&self.key_of(key), page)
    }

    fn key_of(&self, key: &[u32]) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.key_bytes);
        encode_key(key, &mut bytes);
        bytes
    }

    /// Raw row bytes of record `recno` into `buf` (one row wide).
    pub fn read_row_into(&self, recno: RecordNumber, buf: &mut [u8]) -> Result<()> {
        self.rows.read(recno, buf)
    }

    pub fn read_row(&self, recno: RecordNumber) -> Result<EncodedRow> {
        let mut buf = vec![0; self.row_width()];
        self.rows.read(recno, &mut buf)?;
        let record = buf.split_off(self.key_bytes);
        Ok(EncodedRow {
            key: decode_key(&buf),
            record,
        })
    }

    /// Index-free lookup by bisection over the sorted rows. Returns the
    /// record number and the number of rows read.
    pub fn binary_search_lookup(&self, key: &[u32]) -> Result<(Option<RecordNumber>, u32)> {
        let want = self.key_of(key);
        let mut row = vec![0; self.row_width()];
        let (mut lo, mut hi) = (1u64, self.len() + 1);
        let mut reads = 0;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            self.rows.read(mid, &mut row)?;
            reads += 1;
            match row[..self.key_bytes].cmp(&want[..]) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Ok((Some(mid), reads)),
            }
        }
        Ok((None, reads))
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            key: Vec::with_capacity(self.key_bytes),
            page: vec![0; self.index.page_size()],
            row: vec![0; self.row_width()],
        }
    }

    /// Key → index → row, reusing `scratch`; copies the measure record into
    /// `record` and returns whether the key exists.
    pub fn get_record_into(&self, key: &[u32], scratch: &mut Scratch, record: &mut [u8]) -> Result<bool> {
        scratch.key.clear();
        encode_key(key, &mut scratch.key);
        match self.index.probe(&scratch.key, &mut scratch.page)?.recno {
            Some(recno) => {
                self.rows.read(recno, &mut scratch.row)?;
                record.copy_from_slice(&scratch.row[self.key_bytes..]);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn get_record(&self, key: &[u32]) -> Result<Option<Vec<u8>>> {
        match self.btree_lookup(key)? {
            Some(recno) => Ok(Some(self.read_row(recno)?.record)),
            None => Ok(None),
        }
    }
}
