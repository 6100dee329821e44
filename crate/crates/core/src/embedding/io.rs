//! Vector files: the word2vec text format and a binary checkpoint.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{EmbeddingError, EmbeddingMatrix, Provenance, Result};
use crate::corpus::{Vocabulary, PAD, UNK, UNK_ID};
use crate::numerics::Tensor2D;

const MAGIC: &[u8; 8] = b"ACNNEMB\0";
const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `"<rows> <dim>"` header, then `"<token> <v1> ... <vdim>"` per row.
/// Values use the shortest representation that parses back exactly.
pub fn format_vectors(emb: &EmbeddingMatrix) -> String {
    let mut out = format!("{} {}\n", emb.vocab().len(), emb.dim());
    for (id, (tok, _)) in emb.vocab().entries().iter().enumerate() {
        out.push_str(tok);
        for v in emb.vectors().row(id) {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn save_vectors(emb: &EmbeddingMatrix, path: &Path) -> Result<()> {
    fs::write(path, format_vectors(emb)).map_err(io_err(path))
}

/// Parses the text format. Files without `<pad>`/`<unk>` rows get them
/// prepended as zero vectors. The result is tagged general-pretrained and
/// trainable; callers retag as needed.
pub fn parse_vectors(text: &str) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(EmbeddingError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let bad_header = || EmbeddingError::Parse {
        line: 1,
        message: format!("malformed header `{header}`, expected `<count> <dim>`"),
    };
    let mut parts = header.split_whitespace();
    let count: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
    let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad_header)?;
    if parts.next().is_some() || dim == 0 {
        return Err(bad_header());
    }

    let mut rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(count);
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| EmbeddingError::Parse {
                    line: line_no,
                    message: format!("bad value `{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: "non-finite component".into(),
            });
        }
        if seen.insert(token.clone(), line_no).is_some() {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: format!("duplicate token `{token}`"),
            });
        }
        rows.push((token, values));
    }
    if rows.len() != count {
        return Err(EmbeddingError::Parse {
            line: 1,
            message: format!("header declares {count} rows, file has {}", rows.len()),
        });
    }

    let vocab = Arc::new(Vocabulary::from_ordered(
        rows.iter().map(|(t, _)| (t.clone(), 0)).collect(),
    ));
    let mut vectors = Tensor2D::zeros(vocab.len(), dim);
    for (tok, values) in &rows {
        if tok == PAD {
            continue;
        }
        let id = vocab.id(tok).expect("token was inserted");
        vectors.row_mut(id).copy_from_slice(values);
    }
    debug_assert_eq!(vocab.id(UNK), Some(UNK_ID));
    EmbeddingMatrix::new(vocab, vectors, Provenance::GeneralPretrained, true)
}

pub fn load_vectors(path: &Path) -> Result<EmbeddingMatrix> {
    parse_vectors(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Binary checkpoint: magic, version, provenance, trainable flag, shape,
/// vocabulary block (length-prefixed tokens with counts), then the vectors
/// as little-endian `f64`.
pub fn save_binary(emb: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(emb.provenance().code());
    buf.push(u8::from(emb.trainable()));
    buf.extend_from_slice(&(emb.vocab().len() as u64).to_le_bytes());
    buf.extend_from_slice(&(emb.dim() as u64).to_le_bytes());
    for (tok, count) in emb.vocab().entries() {
        buf.extend_from_slice(&(tok.len() as u32).to_le_bytes());
        buf.extend_from_slice(tok.as_bytes());
        buf.extend_from_slice(&count.to_le_bytes());
    }
    for v in emb.vectors().as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(io_err(path))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            EmbeddingError::BadCheckpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn load_binary(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(EmbeddingError::BadCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(EmbeddingError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let provenance = Provenance::from_code(r.u8()?)
        .ok_or_else(|| EmbeddingError::BadCheckpoint("bad provenance".into()))?;
    let trainable = r.u8()? != 0;
    let rows = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let mut tokens = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = r.u32()? as usize;
        let tok = std::str::from_utf8(r.take(len)?)
            .map_err(|e| EmbeddingError::BadCheckpoint(e.to_string()))?
            .to_string();
        tokens.push((tok, r.u64()?));
    }
    let vocab = Vocabulary::from_ordered(tokens.split_off(2.min(tokens.len())));
    if vocab.len() != rows {
        return Err(EmbeddingError::BadCheckpoint("vocabulary block is inconsistent".into()));
    }
    let data = (0..rows * dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(EmbeddingError::BadCheckpoint("trailing bytes".into()));
    }
    let vectors = Tensor2D::from_vec(rows, dim, data)
        .map_err(|e| EmbeddingError::BadCheckpoint(e.to_string()))?;
    EmbeddingMatrix::new(Arc::new(vocab), vectors, provenance, trainable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn sample() -> EmbeddingMatrix {
        let vocab = Arc::new(Vocabulary::from_ordered(
            (0..8).map(|i| (format!("w{i}"), 10 - i as u64)).collect(),
        ));
        let mut rng = Rng::new(11);
        let v = Tensor2D::random_uniform(10, 8, -3.0, 3.0, &mut rng);
        EmbeddingMatrix::new(vocab, v, Provenance::DomainPretrained, false).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let e = sample();
        let back = parse_vectors(&format_vectors(&e)).unwrap();
        assert_eq!(back.vocab().hash_hex(), e.vocab().hash_hex());
        for (a, b) in back.vectors().as_slice().iter().zip(e.vectors().as_slice()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn header_and_row_errors_carry_line_numbers() {
        let err = parse_vectors("2 3\nx 1 2 3\ny 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            parse_vectors("two 3\n").unwrap_err(),
            EmbeddingError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_vectors("3 2\nx 1 2\n").unwrap_err(),
            EmbeddingError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_vectors("2 1\nx 1\nx 2\n").unwrap_err(),
            EmbeddingError::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn external_file_gets_reserved_rows() {
        let e = parse_vectors("2 3\nthe 1 0 0\ncat 0 1 0\n").unwrap();
        assert_eq!(e.vocab().len(), 4);
        assert_eq!(e.vocab().id("the"), Some(2));
        assert_eq!(e.vector("cat").unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.provenance(), Provenance::GeneralPretrained);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let e = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.bin");
        save_binary(&e, &p).unwrap();
        assert_eq!(load_binary(&p).unwrap(), e);
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_binary(&p), Err(EmbeddingError::BadCheckpoint(_))));
    }
}
