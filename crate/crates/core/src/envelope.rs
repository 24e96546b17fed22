//! Shared binary envelope of the `.acts`, `.feat` and `.sae` files:
//!
//! ```text
//! magic [4] | version u32 LE | header length u32 LE | header JSON | payload
//! ```
//!
//! Payload arrays are little-endian and row-major. Readers validate the total
//! file size against the header before touching the payload, so truncation
//! is reported with exact byte counts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Version written and accepted by this build.
pub(crate) const FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 1 << 16;

pub(crate) struct EnvelopeWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EnvelopeWriter {
    pub(crate) fn create<H: Serialize>(path: &Path, magic: &[u8; 4], header: &H) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        let json = serde_json::to_vec(header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Overflow("header length"))?;
        w.bytes(magic)?;
        w.bytes(&FORMAT_VERSION.to_le_bytes())?;
        w.bytes(&len.to_le_bytes())?;
        w.bytes(&json)?;
        Ok(w)
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn f32s(&mut self, vals: &[f32]) -> Result<()> {
        let mut buf = Vec::with_capacity(CHUNK * 4);
        for chunk in vals.chunks(CHUNK) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.bytes(&buf)?;
        }
        Ok(())
    }

    pub(crate) fn f64s(&mut self, vals: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(CHUNK * 8);
        for chunk in vals.chunks(CHUNK) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.bytes(&buf)?;
        }
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) struct EnvelopeReader {
    path: PathBuf,
    input: BufReader<File>,
    offset: u64,
    file_len: u64,
}

impl EnvelopeReader {
    /// Opens `path`, checks magic and version, and parses the JSON header.
    pub(crate) fn open<H: DeserializeOwned>(path: &Path, magic: &[u8; 4]) -> Result<(Self, H)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut r = Self {
            path: path.to_path_buf(),
            input: BufReader::new(file),
            offset: 0,
            file_len,
        };
        r.need(12)?;
        let mut found = [0u8; 4];
        r.fill(&mut found)?;
        if &found != magic {
            return Err(Error::BadMagic {
                path: r.path.clone(),
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(&found).into_owned(),
            });
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                path: r.path.clone(),
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let len = u64::from(r.u32()?);
        r.need(len)?;
        let mut json = vec![0u8; len as usize];
        let at = r.offset;
        r.fill(&mut json)?;
        let header = serde_json::from_slice(&json).map_err(|e| r.malformed(at, format!("header JSON: {e}")))?;
        Ok((r, header))
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    pub(crate) fn path(&self) -> &Path {
        &self.path
    }

    pub(crate) fn malformed(&self, offset: u64, message: impl Into<String>) -> Error {
        Error::Malformed {
            path: self.path.clone(),
            offset,
            message: message.into(),
        }
    }

    /// Fails unless at least `bytes` remain.
    fn need(&self, bytes: u64) -> Result<()> {
        let remaining = self.file_len - self.offset;
        if remaining < bytes {
            return Err(Error::Truncated {
                path: self.path.clone(),
                offset: self.offset,
                expected: self.offset + bytes,
                actual: self.file_len,
            });
        }
        Ok(())
    }

    /// Fails unless exactly `bytes` remain; used once the payload size is
    /// known from the header.
    pub(crate) fn expect_remaining(&self, bytes: u64) -> Result<()> {
        let expected = self
            .offset
            .checked_add(bytes)
            .ok_or(Error::Overflow("payload size"))?;
        if expected != self.file_len {
            return Err(Error::Truncated {
                path: self.path.clone(),
                offset: self.offset,
                expected,
                actual: self.file_len,
            });
        }
        Ok(())
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.input
            .read_exact(buf)
            .map_err(|e| Error::io(&self.path, e))?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        self.need(4)?;
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.need(8)?;
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        self.need(count as u64 * 4)?;
        let mut out = Vec::with_capacity(count);
        let mut buf = vec![0u8; CHUNK * 4];
        let mut left = count;
        while left > 0 {
            let take = left.min(CHUNK);
            let bytes = &mut buf[..take * 4];
            self.fill(bytes)?;
            out.extend(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
            left -= take;
        }
        Ok(out)
    }

    pub(crate) fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        self.need(count as u64 * 8)?;
        let mut out = Vec::with_capacity(count);
        let mut buf = vec![0u8; CHUNK * 8];
        let mut left = count;
        while left > 0 {
            let take = left.min(CHUNK);
            let bytes = &mut buf[..take * 8];
            self.fill(bytes)?;
            out.extend(bytes.chunks_exact(8).map(|c| {
                let mut a = [0u8; 8];
                a.copy_from_slice(c);
                f64::from_le_bytes(a)
            }));
            left -= take;
        }
        Ok(out)
    }
}

/// Reads just the magic of a file, for dispatching on file kind.
pub(crate) fn sniff_magic(path: &Path) -> Result<[u8; 4]> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    Ok(magic)
}
