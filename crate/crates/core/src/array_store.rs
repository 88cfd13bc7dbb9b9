//! Header-compressed multidimensional array.
//!
//! The linearized array is a sequence of runs `E*N*`: some empty cells, then
//! some nonempty ones. Only the nonempty cells are stored, densely and in
//! logical order. For each run the header keeps `(L, V)`: the logical
//! position of its last cell and the number of empty cells up to and
//! including the run's leading empties. A virtual `(0, 0)` precedes the
//! first entry and the final entry always ends at `∏c_i`.
//!
//! For a run `j`, cells `L_{j-1}+1 ..= L_{j-1}+(V_j−V_{j-1})` are empty and
//! the rest up to `L_j` are nonempty, so logical `i` in that range lives at
//! physical position `i − V_j`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linearizer::{LogicalIndex, Shape};
use crate::storage::{Blob, RecordFile};

/// Bytes per serialized header entry: two little-endian `u64`.
pub const RUN_ENTRY_BYTES: usize = 16;

/// 1-based position of a record in the compressed array.
pub type PhysicalPosition = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunEntry {
    /// `L_j`: logical position where the run ends.
    pub last: LogicalIndex,
    /// `V_j`: empty cells up to and including this run's leading empties.
    pub empties: u64,
}

impl RunEntry {
    pub const fn new(last: LogicalIndex, empties: u64) -> Self {
        RunEntry { last, empties }
    }

    /// Nonempty cells up to and including `L_j`.
    pub fn filled(self) -> u64 {
        self.last - self.empties
    }
}

impl From<(u64, u64)> for RunEntry {
    fn from((last, empties): (u64, u64)) -> Self {
        RunEntry { last, empties }
    }
}

const SENTINEL: RunEntry = RunEntry::new(0, 0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Empty,
    Physical(PhysicalPosition),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    entries: Vec<RunEntry>,
}

impl Header {
    /// Validates a header read from storage.
    pub fn from_entries(entries: Vec<RunEntry>) -> Result<Self> {
        let bad = |reason: String| Error::corrupt("<header>", reason);
        if entries.is_empty() {
            return Err(bad("header has no entries".into()));
        }
        let mut prev = SENTINEL;
        for (j, &e) in entries.iter().enumerate() {
            if e.last <= prev.last {
                return Err(bad(format!("entry {j}: L not increasing")));
            }
            if e.empties < prev.empties {
                return Err(bad(format!("entry {j}: V decreasing")));
            }
            let span = e.last - prev.last;
            let gap = e.empties - prev.empties;
            if gap > span {
                return Err(bad(format!("entry {j}: more empties than cells")));
            }
            let is_last = j + 1 == entries.len();
            if gap == span && !is_last {
                return Err(bad(format!("entry {j}: run without nonempty cells")));
            }
            prev = e;
        }
        Ok(Header { entries })
    }

    pub fn entries(&self) -> &[RunEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `∏c_i`, the final `L`.
    pub fn total_cells(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.last)
    }

    /// Number of nonempty cells, `r`.
    pub fn nonempty(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.filled())
    }

    /// Logical to physical conversion.
    pub fn locate(&self, i: LogicalIndex) -> Result<Location> {
        let total = self.total_cells();
        if i == 0 || i > total {
            return Err(Error::OutOfRange {
                what: "logical index",
                value: i,
                max: total,
            });
        }
        // first L_j >= i; guaranteed to exist since the final L is the total
        let j = self.entries.partition_point(|e| e.last < i);
        let cur = self.entries[j];
        let prev = if j == 0 { SENTINEL } else { self.entries[j - 1] };
        if prev.last + (cur.empties - prev.empties) < i {
            Ok(Location::Physical(i - cur.empties))
        } else {
            Ok(Location::Empty)
        }
    }

    /// Physical to logical conversion; inverse of [`Header::locate`] on
    /// nonempty cells.
    pub fn logical_of_physical(&self, p: PhysicalPosition) -> Result<LogicalIndex> {
        let r = self.nonempty();
        if p == 0 || p > r {
            return Err(Error::OutOfRange {
                what: "physical position",
                value: p,
                max: r,
            });
        }
        let j = self.entries.partition_point(|e| e.filled() < p);
        Ok(p + self.entries[j].empties)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.entries.len() * RUN_ENTRY_BYTES);
        for e in &self.entries {
            out.extend_from_slice(&e.last.to_le_bytes());
            out.extend_from_slice(&e.empties.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(RUN_ENTRY_BYTES) {
            return Err(Error::corrupt(
                "<header>",
                format!("length {} is not a multiple of {RUN_ENTRY_BYTES}", bytes.len()),
            ));
        }
        let entries = bytes
            .chunks_exact(RUN_ENTRY_BYTES)
            .map(|c| {
                RunEntry::new(
                    u64::from_le_bytes(c[..8].try_into().unwrap()),
                    u64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Header::from_entries(entries)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::Missing(path.to_owned()),
                _ => Error::Io(e),
            })?
            .read_to_end(&mut bytes)?;
        Header::from_bytes(&bytes).map_err(|e| match e {
            Error::Corrupt { reason, .. } => Error::corrupt(path, reason),
            e => e,
        })
    }
}

/// Single-pass compressor: consumes cells in ascending logical order and
/// writes their records straight through to `out`.
pub struct Compressor<W: Write> {
    out: W,
    total_cells: u64,
    record_width: usize,
    previous: LogicalIndex,
    records: u64,
    entries: Vec<RunEntry>,
}

impl<W: Write> Compressor<W> {
    pub fn new(out: W, total_cells: u64, record_width: usize) -> Result<Self> {
        if total_cells == 0 {
            return Err(Error::param("array must have at least one cell"));
        }
        Ok(Compressor {
            out,
            total_cells,
            record_width,
            previous: 0,
            records: 0,
            entries: Vec::new(),
        })
    }

    pub fn push(&mut self, i: LogicalIndex, record: &[u8]) -> Result<()> {
        if i == 0 || i > self.total_cells {
            return Err(Error::OutOfRange {
                what: "logical index",
                value: i,
                max: self.total_cells,
            });
        }
        if i == self.previous {
            return Err(Error::DuplicateKey { logical: i });
        }
        if i < self.previous {
            return Err(Error::NotSorted {
                previous: self.previous,
                current: i,
            });
        }
        if record.len() != self.record_width {
            return Err(Error::MalformedInput(format!(
                "record of {} bytes, expected {}",
                record.len(),
                self.record_width
            )));
        }
        self.out.write_all(record)?;
        // `records` is the count before this row, i.e. its record number − 1
        if self.previous != 0 && i > self.previous + 1 {
            self.entries
                .push(RunEntry::new(self.previous, self.previous - self.records));
        }
        self.previous = i;
        self.records += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(W, Header)> {
        let r = self.records;
        // A trailing gap closes the last nonempty run before the all-empty tail.
        if self.previous != 0 && self.total_cells > self.previous {
            self.entries
                .push(RunEntry::new(self.previous, self.previous - r));
        }
        self.entries
            .push(RunEntry::new(self.total_cells, self.total_cells - r));
        self.out.flush()?;
        Ok((self.out, Header { entries: self.entries }))
    }
}

/// Compresses an in-memory cell stream. Returns the dense record bytes and
/// the header.
pub fn compress_stream<I, R>(cells: I, total_cells: u64, record_width: usize) -> Result<(Vec<u8>, Header)>
where
    I: IntoIterator<Item = (LogicalIndex, R)>,
    R: AsRef<[u8]>,
{
    let mut c = Compressor::new(Vec::new(), total_cells, record_width)?;
    for (i, rec) in cells {
        c.push(i, rec.as_ref())?;
    }
    c.finish()
}

/// The array representation: compressed records plus a cached header.
#[derive(Debug, Clone)]
pub struct ArrayStore {
    shape: Shape,
    header: Header,
    records: RecordFile,
}

impl ArrayStore {
    pub fn new(shape: Shape, header: Header, records: RecordFile) -> Result<Self> {
        if header.total_cells() != shape.total() {
            return Err(Error::corrupt(
                records.blob().path(),
                format!(
                    "header covers {} cells, shape has {}",
                    header.total_cells(),
                    shape.total()
                ),
            ));
        }
        if header.nonempty() != records.count() {
            return Err(Error::corrupt(
                records.blob().path(),
                format!(
                    "header counts {} nonempty cells, array holds {} records",
                    header.nonempty(),
                    records.count()
                ),
            ));
        }
        Ok(ArrayStore {
            shape,
            header,
            records,
        })
    }

    pub fn in_memory(shape: Shape, record_width: usize, bytes: Vec<u8>, header: Header) -> Result<Self> {
        ArrayStore::new(shape, header, RecordFile::new(Blob::memory(bytes), record_width)?)
    }

    /// Compresses `cells` into `arr_path` / `hdr_path` and opens the result.
    pub fn build<I, R>(
        cells: I,
        shape: Shape,
        record_width: usize,
        arr_path: &Path,
        hdr_path: &Path,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = Result<(LogicalIndex, R)>>,
        R: AsRef<[u8]>,
    {
        let out = BufWriter::new(File::create(arr_path)?);
        let mut c = Compressor::new(out, shape.total(), record_width)?;
        for cell in cells {
            let (i, rec) = cell?;
            c.push(i, rec.as_ref())?;
        }
        let (out, header) = c.finish()?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::write(hdr_path, header.to_bytes())?;
        ArrayStore::open(shape, record_width, arr_path, hdr_path)
    }

    pub fn open(shape: Shape, record_width: usize, arr_path: &Path, hdr_path: &Path) -> Result<Self> {
        let header = Header::read_from(hdr_path)?;
        let records = RecordFile::new(Blob::open(arr_path)?, record_width)?;
        ArrayStore::new(shape, header, records)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn record_width(&self) -> usize {
        self.records.width()
    }

    pub fn len(&self) -> u64 {
        self.records.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locate(&self, i: LogicalIndex) -> Result<Location> {
        self.header.locate(i)
    }

    pub fn logical_of_physical(&self, p: PhysicalPosition) -> Result<LogicalIndex> {
        self.header.logical_of_physical(p)
    }

    pub fn read_record(&self, p: PhysicalPosition, buf: &mut [u8]) -> Result<()> {
        self.records.read(p, buf)
    }

    /// Looks up a cell by coordinates; writes its record into `buf` and
    /// returns `true` when the cell is nonempty.
    pub fn get_cell_into(&self, indices: &[u32], buf: &mut [u8]) -> Result<bool> {
        let i = self.shape.linearize(indices)?;
        match self.header.locate(i)? {
            Location::Physical(p) => {
                self.records.read(p, buf)?;
                Ok(true)
            }
            Location::Empty => Ok(false),
        }
    }

    pub fn get_cell(&self, indices: &[u32]) -> Result<Option<Vec<u8>>> {
        let mut buf = vec![0; self.record_width()];
        Ok(self.get_cell_into(indices, &mut buf)?.then_some(buf))
    }

    /// All nonempty cells in ascending logical order.
    pub fn iter_nonempty(&self) -> NonemptyCells<'_> {
        NonemptyCells { store: self, next: 1 }
    }
}

pub struct NonemptyCells<'a> {
    store: &'a ArrayStore,
    next: PhysicalPosition,
}

impl Iterator for NonemptyCells<'_> {
    type Item = Result<(Vec<u32>, Vec<u8>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next > self.store.len() {
            return None;
        }
        let p = self.next;
        self.next += 1;
        let cell = (|| {
            let logical = self.store.logical_of_physical(p)?;
            let key = self.store.shape.delinearize(logical)?;
            let mut rec = vec![0; self.store.record_width()];
            self.store.read_record(p, &mut rec)?;
            Ok((key, rec))
        })();
        Some(cell)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.store.len() + 1 - self.next) as usize;
        (left, Some(left))
    }
}
