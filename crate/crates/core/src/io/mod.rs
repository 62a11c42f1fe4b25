//! Dataset ingestion and the internal binary containers.
//!
//! Public dataset formats keep their own conventions (IDX headers are
//! big-endian). Every format defined by this crate is little-endian.

mod bytes;
pub mod cifar;
pub mod container;
pub mod idx;
pub mod lists;

pub(crate) use bytes::{ByteReader, ByteWriter};

pub use cifar::parse_cifar10_bin;
pub use container::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use idx::parse_idx;
pub use lists::{parse_ground_truth, parse_pair_lines, parse_triplet_list, GroundTruth};

use std::io::Read;

use crate::error::{Error, Result};

/// Inflates gzip payloads (detected by the `1f 8b` magic); passes others through.
pub fn maybe_gunzip(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::MultiGzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::format(0, format!("gzip: {e}")))?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}
