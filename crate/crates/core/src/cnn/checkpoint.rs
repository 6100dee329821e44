use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{CnnConfig, CnnError, CnnModel, FilterBank, Result};
use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingMatrix, Provenance};
use crate::numerics::Tensor2D;

const MAGIC: &[u8; 8] = b"ACNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const MAX_ECHO: usize = 1 << 20;

fn bad(msg: impl Into<String>) -> CnnError {
    CnnError::BadCheckpoint(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CnnError + '_ {
    move |source| CnnError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn echo_text(model: &CnnModel) -> String {
    let mut kv = model.config().to_kv();
    let emb = model.embedding();
    kv.insert("embedding.provenance".into(), emb.provenance().as_str().into());
    kv.insert("embedding.trainable".into(), emb.trainable().to_string());
    kv.insert("embedding.dim".into(), emb.dim().to_string());
    kv.insert("embedding.rows".into(), emb.vocab().len().to_string());
    kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn write_block<W: Write>(w: &mut W, t: &Tensor2D) -> std::io::Result<()> {
    w.write_all(&(t.rows() as u64).to_le_bytes())?;
    w.write_all(&(t.cols() as u64).to_le_bytes())?;
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Serializes the model: magic, version, config echo, vocabulary hash, then
/// the embedding, each filter bank by ascending height, dense and output
/// layers as little-endian f64 blocks.
pub fn write_checkpoint<W: Write>(model: &CnnModel, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let echo = echo_text(model);
    w.write_all(&(echo.len() as u32).to_le_bytes())?;
    w.write_all(echo.as_bytes())?;
    let hash = hex::decode(model.embedding().vocab().hash_hex()).expect("hash is hex");
    w.write_all(&hash)?;
    write_block(&mut w, model.embedding().vectors())?;
    for bank in model.banks() {
        write_block(&mut w, &bank.weights)?;
        write_block(&mut w, &bank.bias)?;
    }
    let (dw, db) = model.dense();
    let (ow, ob) = model.output();
    for t in [dw, db, ow, ob] {
        write_block(&mut w, t)?;
    }
    w.flush()
}

pub fn save_checkpoint(model: &CnnModel, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_checkpoint(model, BufWriter::new(f)).map_err(io_err(path))
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| bad(format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_block<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Tensor2D> {
    let got = (
        u64::from_le_bytes(read_exact(r)?) as usize,
        u64::from_le_bytes(read_exact(r)?) as usize,
    );
    if got != (rows, cols) {
        return Err(bad(format!("block shape {got:?}, expected {:?}", (rows, cols))));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(f64::from_le_bytes(read_exact(r)?));
    }
    Ok(Tensor2D::from_vec(rows, cols, data)?)
}

/// Reads a checkpoint written for `vocab`; a different vocabulary is rejected.
pub fn read_checkpoint<R: Read>(mut r: R, vocab: Arc<Vocabulary>) -> Result<CnnModel> {
    if &read_exact::<_, 8>(&mut r)? != MAGIC {
        return Err(bad("not a classifier checkpoint"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let echo_len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    if echo_len > MAX_ECHO {
        return Err(bad("config header too large"));
    }
    let mut echo = vec![0u8; echo_len];
    r.read_exact(&mut echo).map_err(|e| bad(format!("truncated: {e}")))?;
    let echo = String::from_utf8(echo).map_err(|_| bad("config header is not utf-8"))?;
    let kv: BTreeMap<String, String> = echo
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    let expected = hex::encode(read_exact::<_, 32>(&mut r)?);
    let found = vocab.hash_hex();
    if expected != found {
        return Err(CnnError::VocabHashMismatch { expected, found });
    }

    let config = CnnConfig::from_kv(&kv)?;
    let field = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
    let provenance = Provenance::parse(field("embedding.provenance")?).ok_or_else(|| bad("bad provenance"))?;
    let trainable: bool = field("embedding.trainable")?.parse().map_err(|_| bad("bad trainable flag"))?;
    let dim: usize = field("embedding.dim")?.parse().map_err(|_| bad("bad dim"))?;

    let vectors = read_block(&mut r, vocab.len(), dim)?;
    let embedding = EmbeddingMatrix::new(vocab, vectors, provenance, trainable)?;
    let mut specs = config.filters.clone();
    specs.sort_by_key(|f| f.height);
    let mut banks = Vec::with_capacity(specs.len());
    for s in &specs {
        banks.push(FilterBank {
            height: s.height,
            weights: read_block(&mut r, s.count, s.height * dim)?,
            bias: read_block(&mut r, 1, s.count)?,
            dropout: s.dropout,
        });
    }
    let (f, d) = (config.total_filters(), config.dense_units);
    let dense_w = read_block(&mut r, f, d)?;
    let dense_b = read_block(&mut r, 1, d)?;
    let out_w = read_block(&mut r, d, 1)?;
    let out_b = read_block(&mut r, 1, 1)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| bad(e.to_string()))? != 0 {
        return Err(bad("trailing bytes after output layer"));
    }
    CnnModel::from_parts(config, embedding, banks, dense_w, dense_b, out_w, out_b)
}

pub fn load_checkpoint(path: &Path, vocab: Arc<Vocabulary>) -> Result<CnnModel> {
    let f = File::open(path).map_err(io_err(path))?;
    read_checkpoint(BufReader::new(f), vocab)
}
