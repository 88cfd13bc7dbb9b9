//! Disk B-tree mapping encoded keys to 1-based record numbers.
//!
//! Bulk-loaded from keys in ascending order. Leaves hold `(key, recno)`
//! pairs; internal nodes hold separator keys and child page numbers, where
//! separator `s` is the smallest key of the child to its right. Every node
//! except the root holds between `t − 1` and `2t − 1` keys.
//!
//! Page 0 is metadata, pages `1..` are nodes:
//!
//! ```text
//! meta:  "CBTX" | version u32 | page_size u32 | t u32 | key_bytes u32
//!        | root u64 | entries u64 | height u32 | pages u64
//! node:  kind u8 | 0u8 ×3 | count u32 | body
//!        leaf body:     count × (key | recno u64)
//!        internal body: count × key | (count + 1) × child u64
//! ```
//!
//! All integers little-endian. `root = 0` marks an empty index.

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::storage::Blob;

pub const MAGIC: &[u8; 4] = b"CBTX";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_PAGE_SIZE: usize = 4096;
pub const NODE_HEADER_BYTES: usize = 8;
const META_BYTES: usize = 4 + 4 + 4 + 4 + 4 + 8 + 8 + 4 + 8;
const RECNO_BYTES: usize = 8;
const LEAF: u8 = 1;
const INTERNAL: u8 = 2;

/// Minimal degree that fits a page: each of up to `2t` slots costs a key
/// plus an 8-byte record number or child pointer.
pub fn minimal_degree(page_size: usize, key_bytes: usize) -> Result<usize> {
    let t = page_size.saturating_sub(NODE_HEADER_BYTES) / (2 * (key_bytes + RECNO_BYTES));
    if t < 2 || page_size < META_BYTES {
        return Err(Error::param(format!(
            "page size {page_size} too small for {key_bytes}-byte keys"
        )));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Meta {
    pub page_size: usize,
    pub t: usize,
    pub key_bytes: usize,
    pub root: u64,
    pub entries: u64,
    /// Node levels from root to leaf; 0 when empty.
    pub height: u32,
    pub pages: u64,
}

impl Meta {
    fn to_page(self) -> Vec<u8> {
        let mut p = Vec::with_capacity(self.page_size);
        p.extend_from_slice(MAGIC);
        p.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        p.extend_from_slice(&(self.page_size as u32).to_le_bytes());
        p.extend_from_slice(&(self.t as u32).to_le_bytes());
        p.extend_from_slice(&(self.key_bytes as u32).to_le_bytes());
        p.extend_from_slice(&self.root.to_le_bytes());
        p.extend_from_slice(&self.entries.to_le_bytes());
        p.extend_from_slice(&self.height.to_le_bytes());
        p.extend_from_slice(&self.pages.to_le_bytes());
        p.resize(self.page_size, 0);
        p
    }

    fn parse(b: &[u8], path: &Path) -> Result<Self> {
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if &b[..4] != MAGIC {
            return Err(Error::corrupt(path, "bad magic"));
        }
        if u32_at(4) != FORMAT_VERSION {
            return Err(Error::corrupt(path, format!("unsupported version {}", u32_at(4))));
        }
        let meta = Meta {
            page_size: u32_at(8) as usize,
            t: u32_at(12) as usize,
            key_bytes: u32_at(16) as usize,
            root: u64_at(20),
            entries: u64_at(28),
            height: u32_at(36),
            pages: u64_at(40),
        };
        if meta.t < 2 || meta.t > minimal_degree(meta.page_size, meta.key_bytes)? {
            return Err(Error::corrupt(path, format!("degree {} does not fit the page", meta.t)));
        }
        if meta.root >= meta.pages || (meta.root == 0) != (meta.entries == 0) {
            return Err(Error::corrupt(path, "inconsistent root"));
        }
        Ok(meta)
    }

    fn max_keys(&self) -> usize {
        2 * self.t - 1
    }
}

/// Splits `n` items into groups of at most `max`, rebalancing the last two
/// so none falls below `max / 2` (rounded down).
fn group_sizes(n: usize, max: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let groups = n.div_ceil(max);
    let mut sizes = vec![max; groups];
    let rem = n - max * (groups - 1);
    sizes[groups - 1] = rem;
    if groups > 1 && rem < max / 2 {
        let pair = max + rem;
        sizes[groups - 2] = pair - pair / 2;
        sizes[groups - 1] = pair / 2;
    }
    sizes
}

struct PageWriter<W: Write> {
    out: W,
    page_size: usize,
    next: u64,
    buf: Vec<u8>,
}

impl<W: Write> PageWriter<W> {
    fn write(&mut self, kind: u8, count: usize, fill: impl FnOnce(&mut Vec<u8>)) -> Result<u64> {
        self.buf.clear();
        self.buf.push(kind);
        self.buf.extend_from_slice(&[0; 3]);
        self.buf.extend_from_slice(&(count as u32).to_le_bytes());
        fill(&mut self.buf);
        debug_assert!(self.buf.len() <= self.page_size);
        self.buf.resize(self.page_size, 0);
        self.out.write_all(&self.buf)?;
        let page = self.next;
        self.next += 1;
        Ok(page)
    }
}

/// Bulk-loads an index over `keys`, which must be strictly ascending and of
/// equal length. Key `j` (0-based) maps to record number `j + 1`.
pub fn bulk_load(keys: &[u8], key_bytes: usize, page_size: usize, path: &Path) -> Result<BTreeIndex> {
    let t = minimal_degree(page_size, key_bytes)?;
    let max_keys = 2 * t - 1;
    let n = keys.len() / key_bytes;
    debug_assert_eq!(keys.len() % key_bytes, 0);

    let mut out = BufWriter::new(File::create(path)?);
    // placeholder meta page, rewritten at the end
    out.write_all(&vec![0; page_size])?;
    let mut pw = PageWriter {
        out,
        page_size,
        next: 1,
        buf: Vec::with_capacity(page_size),
    };

    let key = |j: usize| &keys[j * key_bytes..(j + 1) * key_bytes];

    // (first key index, page) for every node of the current level
    let mut level: Vec<(usize, u64)> = Vec::new();
    let mut start = 0;
    for size in group_sizes(n, max_keys) {
        let page = pw.write(LEAF, size, |b| {
            for j in start..start + size {
                b.extend_from_slice(key(j));
                b.extend_from_slice(&(j as u64 + 1).to_le_bytes());
            }
        })?;
        level.push((start, page));
        start += size;
    }
    let mut height = u32::from(!level.is_empty());

    while level.len() > 1 {
        let mut parents = Vec::new();
        let mut start = 0;
        for size in group_sizes(level.len(), 2 * t) {
            let children = &level[start..start + size];
            let page = pw.write(INTERNAL, size - 1, |b| {
                for &(first, _) in &children[1..] {
                    b.extend_from_slice(key(first));
                }
                for &(_, child) in children {
                    b.extend_from_slice(&child.to_le_bytes());
                }
            })?;
            parents.push((children[0].0, page));
            start += size;
        }
        level = parents;
        height += 1;
    }

    let meta = Meta {
        page_size,
        t,
        key_bytes,
        root: level.first().map_or(0, |&(_, p)| p),
        entries: n as u64,
        height,
        pages: pw.next,
    };
    let mut file = pw.out.into_inner().map_err(|e| e.into_error())?;
    file.seek(SeekFrom::Start(0))?;
    file.write_all(&meta.to_page())?;
    file.sync_all()?;
    drop(file);
    BTreeIndex::open(path)
}

/// Result of one index probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub recno: Option<u64>,
    /// Node pages read; the metadata page is cached at open.
    pub pages_read: u32,
}

/// Occupancy summary from [`BTreeIndex::check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TreeShape {
    pub nodes: u64,
    pub leaves: u64,
    pub height: u32,
    pub min_keys_non_root: Option<usize>,
    pub max_keys: usize,
}

#[derive(Debug, Clone)]
pub struct BTreeIndex {
    blob: Blob,
    meta: Meta,
}

impl BTreeIndex {
    pub fn open(path: &Path) -> Result<Self> {
        let blob = Blob::open(path)?;
        if blob.len() < META_BYTES as u64 {
            return Err(Error::corrupt(path, "file shorter than the metadata page"));
        }
        let mut head = [0u8; META_BYTES];
        blob.read_exact_at(&mut head, 0)?;
        let meta = Meta::parse(&head, path)?;
        if blob.len() != meta.pages * meta.page_size as u64 {
            return Err(Error::corrupt(path, "file length does not match page count"));
        }
        Ok(BTreeIndex { blob, meta })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn t(&self) -> usize {
        self.meta.t
    }

    pub fn len(&self) -> u64 {
        self.meta.entries
    }

    pub fn is_empty(&self) -> bool {
        self.meta.entries == 0
    }

    pub fn page_size(&self) -> usize {
        self.meta.page_size
    }

    pub fn file_bytes(&self) -> u64 {
        self.blob.len()
    }

    fn read_page(&self, page: u64, buf: &mut [u8]) -> Result<()> {
        if page == 0 || page >= self.meta.pages {
            return Err(Error::corrupt(self.blob.path(), format!("page {page} out of range")));
        }
        self.blob.read_exact_at(buf, page * self.meta.page_size as u64)
    }

    fn node<'a>(&self, page: &'a [u8]) -> Result<(u8, usize, &'a [u8])> {
        let kind = page[0];
        let count = u32::from_le_bytes(page[4..8].try_into().unwrap()) as usize;
        let kb = self.meta.key_bytes;
        let body_len = match kind {
            LEAF => count * (kb + RECNO_BYTES),
            INTERNAL => count * kb + (count + 1) * RECNO_BYTES,
            _ => return Err(Error::corrupt(self.blob.path(), format!("bad node kind {kind}"))),
        };
        if count == 0 && kind == INTERNAL || NODE_HEADER_BYTES + body_len > page.len() {
            return Err(Error::corrupt(self.blob.path(), "node overflows its page"));
        }
        Ok((kind, count, &page[NODE_HEADER_BYTES..NODE_HEADER_BYTES + body_len]))
    }

    pub fn lookup(&self, key: &[u8]) -> Result<Option<u64>> {
        let mut page = vec![0; self.meta.page_size];
        Ok(self.probe(key, &mut page)?.recno)
    }

    /// Exact-match search. `page` is scratch space of at least one page.
    pub fn probe(&self, key: &[u8], page: &mut [u8]) -> Result<Probe> {
        let kb = self.meta.key_bytes;
        let mut probe = Probe {
            recno: None,
            pages_read: 0,
        };
        if self.meta.root == 0 || key.len() != kb {
            return Ok(probe);
        }
        let page = &mut page[..self.meta.page_size];
        let mut at = self.meta.root;
        loop {
            self.read_page(at, page)?;
            probe.pages_read += 1;
            let (kind, count, body) = self.node(page)?;
            if kind == LEAF {
                let stride = kb + RECNO_BYTES;
                let entry = |j: usize| &body[j * stride..(j + 1) * stride];
                let (mut lo, mut hi) = (0, count);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    match entry(mid)[..kb].cmp(key) {
                        std::cmp::Ordering::Less => lo = mid + 1,
                        std::cmp::Ordering::Greater => hi = mid,
                        std::cmp::Ordering::Equal => {
                            let r = &entry(mid)[kb..];
                            probe.recno = Some(u64::from_le_bytes(r.try_into().unwrap()));
                            return Ok(probe);
                        }
                    }
                }
                return Ok(probe);
            }
            let seps = &body[..count * kb];
            // number of separators <= key
            let (mut lo, mut hi) = (0, count);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if &seps[mid * kb..(mid + 1) * kb] <= key {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            let c = count * kb + lo * RECNO_BYTES;
            at = u64::from_le_bytes(body[c..c + RECNO_BYTES].try_into().unwrap());
        }
    }

    /// Walks the whole tree, checking key order, uniform leaf depth,
    /// occupancy bounds and that leaves enumerate record numbers `1..=r`.
    pub fn check(&self) -> Result<TreeShape> {
        let mut shape = TreeShape::default();
        if self.meta.root == 0 {
            return Ok(shape);
        }
        let mut buf = vec![0; self.meta.page_size];
        let mut last_key: Option<Vec<u8>> = None;
        let mut next_recno = 1u64;
        let mut leaf_depth = None;
        self.check_node(
            self.meta.root,
            1,
            None,
            None,
            &mut buf,
            &mut shape,
            &mut last_key,
            &mut next_recno,
            &mut leaf_depth,
        )?;
        if next_recno - 1 != self.meta.entries {
            return Err(self.bad("leaf entry count differs from metadata"));
        }
        shape.height = leaf_depth.unwrap_or(0);
        if shape.height != self.meta.height {
            return Err(self.bad("height differs from metadata"));
        }
        Ok(shape)
    }

    fn bad(&self, reason: &str) -> Error {
        Error::corrupt(self.blob.path(), reason)
    }

    #[allow(clippy::too_many_arguments)]
    fn check_node(
        &self,
        page_no: u64,
        depth: u32,
        lower: Option<&[u8]>,
        upper: Option<&[u8]>,
        buf: &mut Vec<u8>,
        shape: &mut TreeShape,
        last_key: &mut Option<Vec<u8>>,
        next_recno: &mut u64,
        leaf_depth: &mut Option<u32>,
    ) -> Result<()> {
        let kb = self.meta.key_bytes;
        self.read_page(page_no, buf)?;
        let page = buf.clone();
        let (kind, count, body) = self.node(&page)?;
        shape.nodes += 1;
        shape.max_keys = shape.max_keys.max(count);
        if count > self.meta.max_keys() {
            return Err(self.bad("node above 2t-1 keys"));
        }
        if page_no != self.meta.root {
            if count < self.meta.t - 1 {
                return Err(self.bad("non-root node below t-1 keys"));
            }
            shape.min_keys_non_root = Some(shape.min_keys_non_root.map_or(count, |m| m.min(count)));
        }
        let in_bounds = |k: &[u8]| lower.is_none_or(|l| k >= l) && upper.is_none_or(|u| k < u);
        if kind == LEAF {
            shape.leaves += 1;
            match *leaf_depth {
                None => *leaf_depth = Some(depth),
                Some(d) if d != depth => return Err(self.bad("leaves at different depths")),
                _ => {}
            }
            for j in 0..count {
                let e = &body[j * (kb + RECNO_BYTES)..(j + 1) * (kb + RECNO_BYTES)];
                let (k, r) = e.split_at(kb);
                if !in_bounds(k) || last_key.as_deref().is_some_and(|p| p >= k) {
                    return Err(self.bad("keys out of order"));
                }
                if u64::from_le_bytes(r.try_into().unwrap()) != *next_recno {
                    return Err(self.bad("record numbers not consecutive"));
                }
                *next_recno += 1;
                *last_key = Some(k.to_vec());
            }
            return Ok(());
        }
        let seps: Vec<&[u8]> = (0..count).map(|j| &body[j * kb..(j + 1) * kb]).collect();
        if seps.windows(2).any(|w| w[0] >= w[1]) || !seps.iter().all(|s| in_bounds(s)) {
            return Err(self.bad("separators out of order"));
        }
        for c in 0..=count {
            let off = count * kb + c * RECNO_BYTES;
            let child = u64::from_le_bytes(body[off..off + RECNO_BYTES].try_into().unwrap());
            let lo = if c == 0 { lower } else { Some(seps[c - 1]) };
            let hi = if c == count { upper } else { Some(seps[c]) };
            self.check_node(child, depth + 1, lo, hi, buf, shape, last_key, next_recno, leaf_depth)?;
        }
        Ok(())
    }
}

/// Worst-case node reads for an exact-match probe: `⌈log_t((r+1)/2)⌉ + 1`.
pub fn page_read_bound(r: u64, t: usize) -> u32 {
    // smallest h >= 0 with t^h >= (r+1)/2, in exact integers
    let target = u128::from(r) + 1;
    let mut pow: u128 = 2;
    let mut h = 0;
    while pow < target {
        pow *= t as u128;
        h += 1;
    }
    h + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: u32) -> Vec<u8> {
        (1..=n).flat_map(|i| (i * 3).to_be_bytes()).collect()
    }

    #[test]
    fn degree_from_page_size() {
        assert_eq!(minimal_degree(4096, 12).unwrap(), (4096 - 8) / 40);
        assert_eq!(minimal_degree(72, 8).unwrap(), 2);
        assert!(minimal_degree(64, 8).is_err());
    }

    #[test]
    fn groups_respect_bounds() {
        for max in [3usize, 4, 5, 9] {
            for n in 1..200 {
                let g = group_sizes(n, max);
                assert_eq!(g.iter().sum::<usize>(), n);
                assert!(g.iter().all(|&s| s <= max));
                if g.len() > 1 {
                    assert!(g.iter().all(|&s| s >= max / 2), "{max} {n} {g:?}");
                }
            }
        }
    }

    #[test]
    fn small_pages_build_deep_trees() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.btx");
        // t = 2: nodes hold 1..=3 keys
        for n in [0u32, 1, 2, 3, 4, 7, 8, 50, 333] {
            let k = keys(n);
            let idx = bulk_load(&k, 4, 72, &path).unwrap();
            assert_eq!(idx.t(), 2);
            let shape = idx.check().unwrap();
            if n > 0 {
                assert!(shape.max_keys <= 3);
                if let Some(m) = shape.min_keys_non_root {
                    assert!(m >= 1);
                }
            }
            let mut page = vec![0; 72];
            for j in 1..=n {
                let p = idx.probe(&(j * 3).to_be_bytes(), &mut page).unwrap();
                assert_eq!(p.recno, Some(u64::from(j)));
                assert!(p.pages_read <= page_read_bound(u64::from(n), 2));
                assert_eq!(idx.lookup(&(j * 3 + 1).to_be_bytes()).unwrap(), None);
            }
            assert_eq!(idx.lookup(&0u32.to_be_bytes()).unwrap(), None);
            assert_eq!(idx.lookup(&u32::MAX.to_be_bytes()).unwrap(), None);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.btx");
        bulk_load(&keys(10), 4, 4096, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(BTreeIndex::open(&path), Err(Error::Corrupt { .. })));
        std::fs::write(&path, &bytes[..100]).unwrap();
        assert!(BTreeIndex::open(&path).is_err());
    }

    #[test]
    fn bound_formula() {
        assert_eq!(page_read_bound(0, 89), 1);
        assert_eq!(page_read_bound(1, 89), 1);
        // (r+1)/2 = 89 exactly: log is 1
        assert_eq!(page_read_bound(177, 89), 2);
        assert_eq!(page_read_bound(178, 89), 3);
        assert_eq!(page_read_bound(1_000_000, 89), 4);
    }
}
