//! Environment cache files.
//!
//! Layout (little-endian): magic `EENV`, `u32` version, `u64` n, `u64` d,
//! `u32` id length and UTF-8 id bytes, `f64` flip probability, then n·d `f64`
//! features, n `u32` labels, n `u8` spurious bits and n `u64` source rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::EnvironmentDataset;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::nn::checkpoint_reader as Reader;

pub const ENV_MAGIC: &[u8; 4] = b"EENV";
pub const ENV_VERSION: u32 = 1;

pub fn write_env(env: &EnvironmentDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_env(env, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_env(path: impl AsRef<Path>) -> Result<EnvironmentDataset> {
    decode_env(&mut BufReader::new(File::open(path)?))
}

pub fn encode_env<W: Write>(env: &EnvironmentDataset, w: &mut W) -> Result<()> {
    w.write_all(ENV_MAGIC)?;
    w.write_all(&ENV_VERSION.to_le_bytes())?;
    w.write_all(&(env.len() as u64).to_le_bytes())?;
    w.write_all(&(env.feature_dim() as u64).to_le_bytes())?;
    w.write_all(&(env.env_id.len() as u32).to_le_bytes())?;
    w.write_all(env.env_id.as_bytes())?;
    w.write_all(&env.flip_prob.to_le_bytes())?;
    for v in env.features.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &y in &env.labels {
        w.write_all(&(y as u32).to_le_bytes())?;
    }
    for &z in &env.spurious_bits {
        w.write_all(&[u8::from(z)])?;
    }
    for &r in &env.source_rows {
        w.write_all(&(r as u64).to_le_bytes())?;
    }
    Ok(())
}

pub fn decode_env<R: Read>(r: &mut R) -> Result<EnvironmentDataset> {
    let mut rd = Reader { inner: r, offset: 0 };
    if &rd.bytes::<4>()? != ENV_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "bad environment cache magic".into(),
        });
    }
    let version = rd.u32()?;
    if version != ENV_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported environment cache version {version}"),
        });
    }
    let n = rd.u64()? as usize;
    let d = rd.u64()? as usize;
    let id_len = rd.u32()? as usize;
    let mut id = Vec::with_capacity(id_len);
    for _ in 0..id_len {
        id.push(rd.bytes::<1>()?[0]);
    }
    let env_id = String::from_utf8(id).map_err(|_| Error::Format {
        offset: rd.offset,
        msg: "environment id is not UTF-8".into(),
    })?;
    let flip_prob = rd.f64()?;
    let mut features = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        features.push(rd.f64()?);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(rd.u32()? as usize);
    }
    let mut bits = Vec::with_capacity(n);
    for _ in 0..n {
        bits.push(rd.bytes::<1>()?[0] != 0);
    }
    let mut source_rows = Vec::with_capacity(n);
    for _ in 0..n {
        source_rows.push(rd.u64()? as usize);
    }
    Ok(EnvironmentDataset {
        env_id,
        features: Matrix::from_vec(n, d, features)?,
        labels,
        spurious_bits: bits,
        flip_prob,
        source_rows,
    })
}
