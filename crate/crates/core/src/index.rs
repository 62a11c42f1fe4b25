//! Exact embedding index and the `EMBIDX01` file format.
//!
//! File layout (little-endian): magic, version `u32`, metric exponent `f64`,
//! dim `u32`, count `u64`, then per record a `u16`-prefixed UTF-8 id, an
//! `i32` class label and `dim` `f32` values.

use std::collections::HashMap;
use std::path::Path;

use crate::distance::{knn, DistanceMetric, Neighbor};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const MAGIC: &[u8; 8] = b"EMBIDX01";
pub const VERSION: u32 = 1;

/// Allowed deviation of a stored vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub class_label: i32,
    pub vector: Vec<f32>,
}

/// Linear-scan index. The metric is stored with the vectors so queries
/// always use the metric the index was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    metric: DistanceMetric,
    records: Vec<EmbeddingRecord>,
    ids: HashMap<String, usize>,
}

impl EmbeddingIndex {
    /// An empty index to be filled with [`push`](Self::push).
    pub fn new(dim: usize, metric: DistanceMetric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("index dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            metric,
            records: Vec::new(),
            ids: HashMap::new(),
        })
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<()> {
        if record.vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "record `{}` has dim {}, index dim is {}",
                record.id,
                record.vector.len(),
                self.dim
            )));
        }
        let norm = record.vector.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(Error::Data(format!("record `{}` has norm {norm}, expected 1", record.id)));
        }
        if self.ids.contains_key(&record.id) {
            return Err(Error::Data(format!("duplicate record id `{}`", record.id)));
        }
        self.ids.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.ids.get(id).map(|&i| &self.records[i])
    }

    /// Top-`k` records closest to `query`, ascending by `(distance, id)`.
    pub fn query_topk(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        if query.len() != self.dim {
            return Err(Error::Dimension(format!(
                "query has dim {}, index dim is {}",
                query.len(),
                self.dim
            )));
        }
        knn(
            query,
            self.records.iter().map(|r| (r.id.as_str(), r.vector.as_slice())),
            k,
            self.metric,
        )
    }
}

/// Builds an index from a non-empty record list; dims come from the first record.
pub fn build_index(records: Vec<EmbeddingRecord>, metric: DistanceMetric) -> Result<EmbeddingIndex> {
    let dim = records
        .first()
        .ok_or_else(|| Error::Data("cannot build an index from zero records".into()))?
        .vector
        .len();
    let mut index = EmbeddingIndex::new(dim, metric)?;
    for r in records {
        index.push(r)?;
    }
    Ok(index)
}

pub fn encode_embeddings(index: &EmbeddingIndex) -> Result<Vec<u8>> {
    if index.is_empty() {
        return Err(Error::Data("refusing to write an empty index".into()));
    }
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32_le(VERSION);
    w.f64_le(index.metric.exponent());
    w.u32_le(index.dim as u32);
    w.u64_le(index.len() as u64);
    for r in &index.records {
        w.short_str(&r.id)?;
        w.i32_le(r.class_label);
        w.f32s_le(&r.vector);
    }
    Ok(w.buf)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingIndex> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(Error::format(8, format!("unsupported index version {version}")));
    }
    let exponent = r.f64_le("metric exponent")?;
    let metric = DistanceMetric::new(exponent).map_err(|e| Error::format(12, e.to_string()))?;
    let dim = r.u32_le("dim")? as usize;
    let count = r.u64_le("count")?;
    if dim == 0 || count == 0 {
        return Err(Error::format(20, format!("index header has dim {dim}, count {count}")));
    }
    let min_record = 6 + 4 * dim as u64;
    if (r.remaining() as u64) < count.saturating_mul(min_record) {
        return Err(Error::format(
            r.offset(),
            format!("payload of {} bytes cannot hold {count} records of dim {dim}", r.remaining()),
        ));
    }
    let mut index = EmbeddingIndex::new(dim, metric)?;
    for _ in 0..count {
        let at = r.offset();
        let id_len = r.u16_le("id length")? as usize;
        let id = r.utf8(id_len, "id")?;
        let class_label = r.i32_le("class label")?;
        let vector = r.f32s_le(dim, "vector")?;
        index
            .push(EmbeddingRecord { id, class_label, vector })
            .map_err(|e| Error::format(at, e.to_string()))?;
    }
    r.expect_end()?;
    Ok(index)
}

pub fn write_embeddings(path: impl AsRef<Path>, index: &EmbeddingIndex) -> Result<()> {
    std::fs::write(path, encode_embeddings(index)?)?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingIndex> {
    decode_embeddings(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn random_records(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| EmbeddingRecord {
                id: format!("r{i}"),
                class_label: (i % 7) as i32,
                vector: unit(&mut rng, dim),
            })
            .collect()
    }

    #[test]
    fn build_validates() {
        let one = build_index(random_records(1, 4, 0), DistanceMetric::euclidean()).unwrap();
        assert_eq!(one.len(), 1);
        let big = build_index(random_records(1000, 8, 1), DistanceMetric::euclidean()).unwrap();
        assert_eq!((big.len(), big.dim()), (1000, 8));

        let mut dup = random_records(3, 4, 0);
        dup[2].id = "r0".into();
        let err = build_index(dup, DistanceMetric::euclidean()).unwrap_err();
        assert!(err.to_string().contains("r0"));

        let mut short = random_records(3, 4, 0);
        short[1].vector.pop();
        let err = build_index(short, DistanceMetric::euclidean()).unwrap_err();
        assert!(err.to_string().contains("r1"));

        let mut unnormalized = random_records(2, 4, 0);
        unnormalized[0].vector[0] += 0.5;
        assert!(build_index(unnormalized, DistanceMetric::euclidean()).is_err());
        assert!(build_index(vec![], DistanceMetric::euclidean()).is_err());
    }

    #[test]
    fn self_query_and_k_zero() {
        let idx = build_index(random_records(50, 6, 3), DistanceMetric::new(0.25).unwrap()).unwrap();
        let q = idx.records()[17].vector.clone();
        let hits = idx.query_topk(&q, 3).unwrap();
        assert_eq!(hits[0].id, "r17");
        assert_eq!(hits[0].distance, 0.0);
        assert!(idx.query_topk(&q, 0).is_err());
        assert!(idx.query_topk(&q[..5], 1).is_err());
    }

    #[test]
    fn round_trip_preserves_records_and_metric() {
        let idx = build_index(random_records(20, 5, 9), DistanceMetric::new(0.25).unwrap()).unwrap();
        let bytes = encode_embeddings(&idx).unwrap();
        let back = decode_embeddings(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.metric().exponent().to_bits(), 0.25f64.to_bits());
        assert_eq!(encode_embeddings(&back).unwrap(), bytes);
        let q = idx.records()[4].vector.clone();
        assert_eq!(idx.query_topk(&q, 20).unwrap(), back.query_topk(&q, 20).unwrap());
    }

    #[test]
    fn corrupt_and_empty() {
        let idx = build_index(random_records(4, 3, 2), DistanceMetric::euclidean()).unwrap();
        let bytes = encode_embeddings(&idx).unwrap();
        for cut in [0, 5, 20, 31, bytes.len() - 1] {
            assert_eq!(decode_embeddings(&bytes[..cut]).unwrap_err().kind(), "format", "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[7] = b'2';
        assert_eq!(decode_embeddings(&bad).unwrap_err().kind(), "format");
        let mut ver = bytes;
        ver[8] = 9;
        assert_eq!(decode_embeddings(&ver).unwrap_err().kind(), "format");

        let empty = EmbeddingIndex::new(3, DistanceMetric::euclidean()).unwrap();
        assert!(encode_embeddings(&empty).is_err());
    }
}
