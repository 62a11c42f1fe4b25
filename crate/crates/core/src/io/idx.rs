//! IDX files as used by MNIST and Fashion-MNIST.

use super::{maybe_gunzip, ByteReader};
use crate::dataset::{Dataset, Item};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Parses an image file and a label file into a single-channel dataset.
///
/// Header integers are big-endian. Pixels are scaled to `value / 255`, item
/// ids are the zero-based record index, and gzip input is inflated first.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Dataset> {
    let images = maybe_gunzip(image_bytes)?;
    let labels = maybe_gunzip(label_bytes)?;

    let mut img = ByteReader::new(&images);
    let magic = img.u32_be("image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(0, format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = img.u32_be("image count")? as usize;
    let rows = img.u32_be("row count")? as usize;
    let cols = img.u32_be("column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("image size {rows}x{cols}")));
    }

    let mut lab = ByteReader::new(&labels);
    let lmagic = lab.u32_be("label magic")?;
    if lmagic != LABEL_MAGIC {
        return Err(Error::format(0, format!("label magic {lmagic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let lcount = lab.u32_be("label count")? as usize;
    if lcount != count {
        return Err(Error::format(4, format!("{lcount} labels for {count} images")));
    }
    if count == 0 {
        return Err(Error::format(4, "IDX file holds no images"));
    }

    let pixels = rows * cols;
    let mut items = Vec::with_capacity(count);
    for i in 0..count {
        let raw = img.take(pixels, "image pixels")?;
        let label = lab.take(1, "label")?[0];
        let data = raw.iter().map(|&v| v as f32 / 255.0).collect();
        items.push(Item {
            id: i.to_string(),
            image: Tensor::new([1, rows, cols], data)?,
            class_label: label as i32,
        });
    }
    img.expect_end()?;
    lab.expect_end()?;
    Dataset::new(items)
}

#[cfg(test)]
pub(crate) fn encode_idx(images: &[Vec<u8>], rows: u32, cols: u32, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    /// Three 2x3 images written byte by byte.
    fn golden() -> (Vec<u8>, Vec<u8>) {
        let img: Vec<u8> = vec![
            0x00, 0x00, 0x08, 0x03, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 3, // header
            0, 255, 51, 102, 153, 204, // image 0
            1, 2, 3, 4, 5, 6, // image 1
            255, 255, 255, 0, 0, 0, // image 2
        ];
        let lab: Vec<u8> = vec![0x00, 0x00, 0x08, 0x01, 0, 0, 0, 3, 9, 0, 4];
        (img, lab)
    }

    #[test]
    fn golden_fixture() {
        let (img, lab) = golden();
        let d = parse_idx(&img, &lab).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.image_shape(), [1, 2, 3]);
        let labels: Vec<i32> = d.items().iter().map(|i| i.class_label).collect();
        assert_eq!(labels, [9, 0, 4]);
        assert_eq!(d.item(0).image.data(), &[0.0, 1.0, 0.2, 0.4, 0.6, 0.8]);
        assert_eq!(d.item(1).image.data()[5], 6.0f32 / 255.0);
        assert_eq!(d.item(2).id, "2");
    }

    #[test]
    fn gzip_is_transparent() {
        let (img, lab) = golden();
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(&img).unwrap();
        let zipped = gz.finish().unwrap();
        assert_eq!(parse_idx(&zipped, &lab).unwrap(), parse_idx(&img, &lab).unwrap());
    }

    #[test]
    fn count_mismatch() {
        let (img, _) = golden();
        let (_, lab) = encode_idx(&[], 2, 3, &[1, 2]);
        assert!(matches!(parse_idx(&img, &lab), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn truncation_reports_offset() {
        let (img, lab) = golden();
        match parse_idx(&img[..20], &lab) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
        assert!(parse_idx(&img[..10], &lab).is_err());
    }

    #[test]
    fn wrong_magic() {
        let (mut img, lab) = golden();
        img[3] = 0x02;
        assert!(parse_idx(&img, &lab).is_err());
        assert!(parse_idx(&lab, &img).is_err());
    }

    #[test]
    fn all_zero_images() {
        let (img, lab) = encode_idx(&[vec![0; 4], vec![0; 4]], 2, 2, &[3, 3]);
        let d = parse_idx(&img, &lab).unwrap();
        assert!(d.items().iter().all(|i| i.image.data().iter().all(|&v| v == 0.0)));
    }
}
