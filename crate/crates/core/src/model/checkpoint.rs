//! Binary checkpoint container.
//!
//! ```text
//! "DGICKPT1\n"
//! key=value lines (variant, input_dim, hidden_dim, seed, tensors), then "end\n"
//! per tensor: u32 name length, UTF-8 name, u64 rows, u64 cols, rows*cols f64
//! ```
//! All integers and floats are little-endian.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DgiParams, EncoderSpec, EncoderVariant};
use crate::error::{DgiError, Result};
use crate::tensor::DenseMatrix;

const MAGIC: &[u8] = b"DGICKPT1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: DgiParams,
    pub seed: u64,
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &DgiParams, seed: u64) -> Result<()> {
    let spec = params.spec();
    out.write_all(MAGIC)?;
    let names = params.names();
    write!(
        out,
        "variant={}\ninput_dim={}\nhidden_dim={}\nseed={}\ntensors={}\nend\n",
        spec.variant,
        spec.input_dim,
        spec.hidden_dim,
        seed,
        names.len()
    )?;
    for (name, p) in names.iter().zip(params.params()) {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(p.value.rows() as u64).to_le_bytes())?;
        out.write_all(&(p.value.cols() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(p.value.len() * 8);
        for v in p.value.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &DgiParams, seed: u64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(BufWriter::new(file), params, seed)
}

fn bad(msg: impl Into<String>) -> DgiError {
    DgiError::Checkpoint(msg.into())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b).map_err(|_| bad("truncated tensor header"))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 9];
    input.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
    if magic != MAGIC {
        return Err(bad("bad magic; not a checkpoint"));
    }
    let mut header = std::collections::HashMap::new();
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(bad("header not terminated"));
        }
        let line = line.trim_end_matches('\n');
        if line == "end" {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let field = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing header field `{k}`")));
    let num = |k: &str| -> Result<u64> { field(k)?.parse().map_err(|e| bad(format!("header `{k}`: {e}"))) };
    let variant: EncoderVariant = field("variant")?.parse()?;
    let spec = EncoderSpec::new(variant, num("input_dim")? as usize, num("hidden_dim")? as usize)?;
    let seed = num("seed")?;
    let count = num("tensors")? as usize;

    // any initialization works; every tensor is overwritten below
    let mut params = DgiParams::init(spec, &mut ChaCha8Rng::seed_from_u64(0))?;
    let names = params.names();
    if names.len() != count {
        return Err(bad(format!("{count} tensors stored, {} expected for {variant}", names.len())));
    }
    let mut values = Vec::with_capacity(count);
    for expected in &names {
        let mut len = [0u8; 4];
        input.read_exact(&mut len).map_err(|_| bad("truncated tensor name"))?;
        let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut name).map_err(|_| bad("truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        if &name != expected {
            return Err(bad(format!("tensor `{name}` found where `{expected}` was expected")));
        }
        let rows = read_u64(&mut input)? as usize;
        let cols = read_u64(&mut input)? as usize;
        let mut raw = vec![0u8; rows * cols * 8];
        input.read_exact(&mut raw).map_err(|_| bad(format!("tensor `{name}` truncated")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        values.push(DenseMatrix::new(rows, cols, data)?);
    }
    if input.fill_buf()?.first().is_some() {
        return Err(bad("trailing bytes after last tensor"));
    }
    params.set_values(&values).map_err(|e| bad(e.to_string()))?;
    Ok(Checkpoint { params, seed })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(BufReader::new(file))
}
