use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use abusecnn::cnn::load_checkpoint;
use abusecnn::corpus::{encode, parse_jsonl, Vocabulary, UNK};
use anyhow::{Context, Result};

use super::{CHECKPOINT, VOCAB};

pub fn load_model(dir: &Path) -> Result<abusecnn::cnn::CnnModel> {
    let vocab_path = dir.join(VOCAB);
    let text = std::fs::read_to_string(&vocab_path).with_context(|| format!("reading {}", vocab_path.display()))?;
    let vocab = Arc::new(Vocabulary::from_tsv(&text)?);
    let ckpt = dir.join(CHECKPOINT);
    load_checkpoint(&ckpt, vocab).with_context(|| format!("loading {}", ckpt.display()))
}

/// Scores JSON Lines tweets from `input` and writes `id,probability,label` rows.
pub fn cmd_predict<R: BufRead, W: Write>(model_dir: &Path, input: R, mut output: W) -> Result<()> {
    let model = load_model(model_dir)?;
    let records = parse_jsonl(input).context("reading tweets")?;
    let vocab = model.embedding().vocab().clone();
    let max_len = model.config().max_len;
    writeln!(output, "id,probability,label")?;
    for r in &records {
        let mut tokens = r.tokens();
        if tokens.is_empty() {
            tokens.push(UNK.to_string());
        }
        let (p, label) = model.predict(&encode(&tokens, &vocab, max_len)?)?;
        let id = if r.id.contains([',', '"', '\n']) {
            format!("\"{}\"", r.id.replace('"', "\"\""))
        } else {
            r.id.clone()
        };
        writeln!(output, "{id},{p},{label}")?;
    }
    Ok(())
}
