//! The `MSNETCKP` checkpoint file.
//!
//! Layout (little-endian): magic, version `u32`, `u64` length of a canonical
//! JSON header `{"config", "epoch", "rng_seed"}` (sorted keys), the header
//! bytes, a `u32` block count, then per parameter block: `u32` name length,
//! name bytes, `u32` rank, rank × `u64` dims and the `f32` values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Checkpoint, MultiScaleNetConfig, ParamSet};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MSNETCKP";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: MultiScaleNetConfig,
    epoch: u32,
    rng_seed: u64,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    ck.params.check_against(&ck.config)?;
    let header = serde_json::to_value(Header {
        config: ck.config.clone(),
        epoch: ck.epoch,
        rng_seed: ck.rng_seed,
    })?;
    // `Value` objects are BTreeMaps, so keys come out sorted.
    let json = serde_json::to_string(&header)?;
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32_le(VERSION);
    w.u64_le(json.len() as u64);
    w.bytes(json.as_bytes());
    w.u32_le(ck.params.len() as u32);
    for (name, t) in ck.params.iter() {
        w.u32_le(name.len() as u32);
        w.bytes(name.as_bytes());
        w.u32_le(t.rank() as u32);
        for &d in t.shape() {
            w.u64_le(d as u64);
        }
        w.f32s_le(t.data());
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(Error::format(8, format!("unsupported checkpoint version {version}")));
    }
    let json_len = r.u64_le("header length")?;
    let at = r.offset();
    let json_len = usize::try_from(json_len).map_err(|_| Error::format(at, "header length overflow"))?;
    let json = r.utf8(json_len, "config header")?;
    let header: Header =
        serde_json::from_str(&json).map_err(|e| Error::format(at, format!("config header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::format(at, format!("config header: {e}")))?;

    let blocks = r.u32_le("block count")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..blocks {
        let at = r.offset();
        let name_len = r.u32_le("name length")? as usize;
        let name = r.utf8(name_len, "parameter name")?;
        let rank = r.u32_le("rank")? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::format(at, format!("parameter {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = r.u64_le("dimension")?;
            shape.push(usize::try_from(d).map_err(|_| Error::format(at, "dimension overflow"))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format(at, "parameter size overflow"))?;
        let data = r.f32s_le(n, "parameter values")?;
        let t = Tensor::new(shape, data).map_err(|e| Error::format(at, e.to_string()))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(Error::format(at, format!("duplicate parameter {name}")));
        }
    }
    r.expect_end()?;
    let params = ParamSet::new(tensors);
    params
        .check_against(&header.config)
        .map_err(|e| Error::format(0, format!("parameters do not match config: {e}")))?;
    Ok(Checkpoint {
        config: header.config,
        params,
        rng_seed: header.rng_seed,
        epoch: header.epoch,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ck)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
