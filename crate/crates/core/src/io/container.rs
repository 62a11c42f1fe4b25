//! The `DSETV001` dataset container.
//!
//! Layout (little-endian): magic, version `u32`, count `u64`, `C, H, W` as
//! `u32`, then per item an `u16`-prefixed UTF-8 id, an `i32` label and
//! `C·H·W` `f32` pixels.

use std::path::Path;

use super::{ByteReader, ByteWriter};
use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"DSETV001";
pub const VERSION: u32 = 1;

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    if dataset.is_empty() {
        return Err(Error::Data("refusing to write an empty dataset".into()));
    }
    let [c, h, w] = dataset.image_shape();
    let mut out = ByteWriter::default();
    out.bytes(MAGIC);
    out.u32_le(VERSION);
    out.u64_le(dataset.len() as u64);
    for d in [c, h, w] {
        out.u32_le(d as u32);
    }
    for item in dataset.items() {
        out.short_str(&item.id)?;
        out.i32_le(item.class_label);
        out.f32s_le(item.image.data());
    }
    Ok(out.buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(Error::format(8, format!("unsupported dataset version {version}")));
    }
    let count = r.u64_le("count")?;
    if count == 0 {
        return Err(Error::format(12, "dataset container holds no items"));
    }
    let c = r.u32_le("channels")? as usize;
    let h = r.u32_le("height")? as usize;
    let w = r.u32_le("width")? as usize;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::format(20, format!("invalid image shape {c}x{h}x{w}")));
    }
    let pixels = c * h * w;
    // Each record needs at least 2 + 4 + 4·pixels bytes.
    let min_record = 6 + 4 * pixels as u64;
    if (r.remaining() as u64) < count.saturating_mul(min_record) {
        return Err(Error::format(
            r.offset(),
            format!("payload of {} bytes cannot hold {count} items of shape {c}x{h}x{w}", r.remaining()),
        ));
    }
    let mut items = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u16_le("id length")? as usize;
        let id = r.utf8(len, "id")?;
        let class_label = r.i32_le("label")?;
        let data = r.f32s_le(pixels, "pixels")?;
        items.push(Item {
            id,
            image: Tensor::new([c, h, w], data)?,
            class_label,
        });
    }
    r.expect_end()?;
    Dataset::new(items)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    std::fs::write(path, encode_dataset(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::toy;

    #[test]
    fn round_trip_bitwise() {
        let (img, lab) = crate::io::idx::encode_idx(&[vec![7, 8, 9, 10], vec![255, 0, 1, 2]], 2, 2, &[1, 5]);
        let d = crate::io::parse_idx(&img, &lab).unwrap();
        let back = decode_dataset(&encode_dataset(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        for (a, b) in back.items().iter().zip(d.items()) {
            let ab: Vec<u32> = a.image.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.image.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn file_round_trip() {
        let d = toy(3, 4, [2, 3, 3]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.dset");
        write_dataset(&p, &d).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), d);
    }

    #[test]
    fn shape_header_mismatch() {
        let d = toy(2, 2, [1, 2, 2]);
        let mut bytes = encode_dataset(&d).unwrap();
        // Claim 3x3 images; payload is too short.
        bytes[24..28].copy_from_slice(&3u32.to_le_bytes());
        bytes[28..32].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format { .. })));
        // Claim 1x1 images; payload has trailing garbage.
        let mut small = encode_dataset(&d).unwrap();
        small[24..28].copy_from_slice(&1u32.to_le_bytes());
        small[28..32].copy_from_slice(&1u32.to_le_bytes());
        assert!(decode_dataset(&small).is_err());
    }

    #[test]
    fn rejects_bad_headers() {
        let d = toy(2, 2, [1, 2, 2]);
        let bytes = encode_dataset(&d).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_dataset(&bad).is_err());
        let mut ver = bytes.clone();
        ver[8] = 2;
        assert!(decode_dataset(&ver).is_err());
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        let mut empty = bytes[..32].to_vec();
        empty[12..20].copy_from_slice(&0u64.to_le_bytes());
        assert!(decode_dataset(&empty).is_err());
    }
}
