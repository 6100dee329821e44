use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BaselineError, Result};
use crate::numerics::Tensor2D;

const MAGIC: &[u8; 8] = b"ACNNBASE";
const VERSION: u32 = 1;
const MAX_LEN: u64 = 1 << 34;

fn bad(msg: impl Into<String>) -> BaselineError {
    BaselineError::BadModel(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BaselineError + '_ {
    move |source| BaselineError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(kind: &str) -> Self {
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(kind.len() as u8);
        buf.extend_from_slice(kind.as_bytes());
        Self { buf }
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn tensor(&mut self, t: &Tensor2D) {
        self.u64(t.rows() as u64);
        self.u64(t.cols() as u64);
        t.as_slice().iter().for_each(|&x| self.f64(x));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], kind: &str) -> Result<Self> {
        let mut d = Self { buf };
        if d.take(8)? != MAGIC {
            return Err(bad("not a baseline model file"));
        }
        let version = u32::from_le_bytes(d.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = d.take(1)?[0] as usize;
        let found = d.take(len)?;
        if found != kind.as_bytes() {
            return Err(bad(format!(
                "expected a {kind} model, found {}",
                String::from_utf8_lossy(found)
            )));
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(bad("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN || n as usize > self.buf.len() / 8 + 1 {
            return Err(bad("length field exceeds file size"));
        }
        Ok(n as usize)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn tensor(&mut self) -> Result<Tensor2D> {
        let rows = self.len()?;
        let cols = self.len()?;
        let n = rows.checked_mul(cols).ok_or_else(|| bad("tensor too large"))?;
        if n > self.buf.len() / 8 {
            return Err(bad("truncated"));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Tensor2D::from_vec(rows, cols, data)?)
    }

    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(bad("trailing bytes"))
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_end(&mut buf)
        .map_err(io_err(path))?;
    Ok(buf)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
