//! Positional reads over a file or an in-memory buffer.
//!
//! Readers never share a cursor: every read is an independent `pread`-style
//! call, so one handle can serve several threads.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Backing {
    File(Arc<File>),
    Memory(Arc<[u8]>),
}

/// A read-only byte source addressed by absolute offset.
#[derive(Debug, Clone)]
pub struct Blob {
    backing: Backing,
    len: u64,
    path: PathBuf,
}

impl Blob {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::Missing(path.to_owned()),
            _ => Error::Io(e),
        })?;
        let len = file.metadata()?.len();
        Ok(Blob {
            backing: Backing::File(Arc::new(file)),
            len,
            path: path.to_owned(),
        })
    }

    pub fn memory(bytes: impl Into<Arc<[u8]>>) -> Self {
        let bytes = bytes.into();
        Blob {
            len: bytes.len() as u64,
            backing: Backing::Memory(bytes),
            path: PathBuf::from("<memory>"),
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> Result<()> {
        let end = offset
            .checked_add(buf.len() as u64)
            .filter(|&end| end <= self.len)
            .ok_or_else(|| {
                Error::corrupt(&self.path, format!("read of {} bytes at {offset} past end", buf.len()))
            })?;
        match &self.backing {
            Backing::Memory(bytes) => {
                buf.copy_from_slice(&bytes[offset as usize..end as usize]);
                Ok(())
            }
            Backing::File(file) => read_file_at(file, buf, offset).map_err(Error::Io),
        }
    }
}

#[cfg(unix)]
fn read_file_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_file_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

/// Fixed-width records addressed by 1-based record number.
#[derive(Debug, Clone)]
pub struct RecordFile {
    blob: Blob,
    width: usize,
    count: u64,
}

impl RecordFile {
    pub fn new(blob: Blob, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::param("record width must be positive"));
        }
        if !blob.len().is_multiple_of(width as u64) {
            return Err(Error::corrupt(
                blob.path(),
                format!("length {} is not a multiple of record width {width}", blob.len()),
            ));
        }
        let count = blob.len() / width as u64;
        Ok(RecordFile { blob, width, count })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn blob(&self) -> &Blob {
        &self.blob
    }

    /// Reads record `recno` (1-based) into `buf`, which must be `width` long.
    pub fn read(&self, recno: u64, buf: &mut [u8]) -> Result<()> {
        if recno == 0 || recno > self.count {
            return Err(Error::OutOfRange {
                what: "record number",
                value: recno,
                max: self.count,
            });
        }
        self.blob.read_exact_at(buf, (recno - 1) * self.width as u64)
    }
}
