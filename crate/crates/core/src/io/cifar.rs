//! CIFAR-10 binary batches.

use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RECORD_LEN: usize = 1 + 3 * 32 * 32;

/// Parses concatenated records of one label byte plus 3072 channel-planar
/// (R, G, B) pixel bytes. Pixels are scaled to `value / 255`.
pub fn parse_cifar10_bin(batch_bytes: &[u8]) -> Result<Dataset> {
    if batch_bytes.is_empty() {
        return Err(Error::format(0, "empty CIFAR-10 payload"));
    }
    if !batch_bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::format(
            (batch_bytes.len() - batch_bytes.len() % RECORD_LEN) as u64,
            format!("length {} is not a multiple of {RECORD_LEN}", batch_bytes.len()),
        ));
    }
    let items = batch_bytes
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0];
            if label > 9 {
                return Err(Error::format((i * RECORD_LEN) as u64, format!("label byte {label} > 9")));
            }
            let data = rec[1..].iter().map(|&v| v as f32 / 255.0).collect();
            Ok(Item {
                id: i.to_string(),
                image: Tensor::new([3, 32, 32], data)?,
                class_label: label as i32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(items)
}
