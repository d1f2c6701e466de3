//! Little-endian binary container shared by the model files.
//!
//! A file is an 8-byte magic, a `u32` version, then a flat sequence of
//! fields. Integers are `u32`/`u64` LE, reals are IEEE-754 `f64` LE, strings
//! are a `u32` byte length followed by UTF-8, and a matrix is
//! `rows: u32, cols: u32` followed by `rows * cols` reals in row-major order.
//! Readers reject short input and trailing bytes.

use crate::error::{Error, Result};
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::numerics::Matrix;

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length exceeds u32"));
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn strings<S: AsRef<str>>(&mut self, items: &[S]) {
        self.usize(items.len());
        for s in items {
            self.str(s.as_ref());
        }
    }

    pub fn reals(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }

    pub fn matrix(&mut self, m: &Matrix) {
        self.usize(m.rows());
        self.usize(m.cols());
        for &x in m.data() {
            self.f64(x);
        }
    }

    /// Words, counts, then the vector matrix.
    pub fn table(&mut self, table: &EmbeddingTable) {
        self.strings(table.vocab().words());
        self.usize(table.len());
        for &c in table.vocab().counts() {
            self.u64(c);
        }
        self.matrix(table.vectors());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic and version before handing out the reader.
    pub fn open(buf: &'a [u8], magic: &[u8; 8], version: u32) -> Result<Self> {
        if buf.len() < 12 || &buf[..8] != magic {
            return Err(Error::Format(format!(
                "bad magic bytes, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let mut r = Self { buf, pos: 8 };
        let found = r.u32()?;
        if found != version {
            return Err(Error::Format(format!(
                "unsupported version {found}, expected {version}"
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.usize()?;
        (0..n).map(|_| self.str()).collect()
    }

    pub fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        self.check_room(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        self.check_room(n, 8)?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(rows, cols, data)
    }

    fn check_room(&self, count: usize, width: usize) -> Result<()> {
        match count.checked_mul(width) {
            Some(bytes) if bytes <= self.buf.len() - self.pos => Ok(()),
            _ => Err(Error::Format(format!("truncated at byte {}", self.pos))),
        }
    }

    pub fn table(&mut self) -> Result<EmbeddingTable> {
        let words = self.strings()?;
        let n = self.usize()?;
        let counts = (0..n).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_parts(words, counts)?;
        EmbeddingTable::new(vocab, self.matrix()?)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
