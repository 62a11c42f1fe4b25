//! Minkowski-family distances, including fractional exponents `0 < k < 1`.
//!
//! For `k < 1` the Lk "distance" violates the triangle inequality; it is used
//! for ranking only. All arithmetic happens in `f64` whatever the storage
//! precision of the vectors.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Below this per-coordinate gap the derivative of `|d|^k` is treated as 0.
pub const COINCIDENCE_GUARD: f64 = 1e-12;

/// Lk metric selector. `k = 2` is Euclidean, `k = 1` Manhattan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DistanceMetric {
    exponent: f64,
}

impl DistanceMetric {
    pub const DEFAULT_FRACTIONAL: f64 = 0.25;

    pub fn new(exponent: f64) -> Result<Self> {
        if exponent > 0.0 && exponent.is_finite() {
            Ok(Self { exponent })
        } else {
            Err(Error::Config(format!("metric exponent k must be > 0, got {exponent}")))
        }
    }

    pub const fn euclidean() -> Self {
        Self { exponent: 2.0 }
    }

    pub const fn manhattan() -> Self {
        Self { exponent: 1.0 }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn is_fractional(&self) -> bool {
        self.exponent < 1.0
    }

    /// `Σ |aᵢ - bᵢ|^k`, which orders pairs exactly like the distance itself.
    pub fn powered_sum<T: Scalar>(&self, a: &[T], b: &[T]) -> f64 {
        let k = self.exponent;
        let iter = a.iter().zip(b).map(|(&x, &y)| (x.as_f64() - y.as_f64()).abs());
        if k == 2.0 {
            iter.map(|d| d * d).sum()
        } else if k == 1.0 {
            iter.sum()
        } else {
            iter.map(|d| d.powf(k)).sum()
        }
    }

    fn root(&self, s: f64) -> f64 {
        if self.exponent == 2.0 {
            s.sqrt()
        } else if self.exponent == 1.0 {
            s
        } else {
            s.powf(1.0 / self.exponent)
        }
    }

    /// Distance without the dimension check.
    pub(crate) fn eval<T: Scalar>(&self, a: &[T], b: &[T]) -> f64 {
        self.root(self.powered_sum(a, b))
    }
}

impl Default for DistanceMetric {
    fn default() -> Self {
        Self {
            exponent: Self::DEFAULT_FRACTIONAL,
        }
    }
}

impl TryFrom<f64> for DistanceMetric {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        Self::new(k)
    }
}

impl From<DistanceMetric> for f64 {
    fn from(m: DistanceMetric) -> f64 {
        m.exponent
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("vectors have dimensions {a} and {b}")));
    }
    Ok(())
}

/// `(Σᵢ |aᵢ − bᵢ|^k)^(1/k)`.
pub fn lk_distance<T: Scalar>(a: &[T], b: &[T], metric: DistanceMetric) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    Ok(metric.eval(a, b))
}

/// `D(a, b)` and `∂D/∂a` (the gradient w.r.t. `b` is its negation).
///
/// Coordinates with `|aᵢ − bᵢ| <` [`COINCIDENCE_GUARD`] contribute zero, as
/// does everything when `a == b`.
pub fn lk_distance_grad(a: &[f64], b: &[f64], metric: DistanceMetric) -> Result<(f64, Vec<f64>)> {
    check_dims(a.len(), b.len())?;
    let k = metric.exponent;
    let s = metric.powered_sum(a, b);
    let d = metric.root(s);
    if s == 0.0 {
        return Ok((0.0, vec![0.0; a.len()]));
    }
    // ∂D/∂aᵢ = S^(1/k − 1) |dᵢ|^(k−1) sign(dᵢ)
    let outer = s.powf(1.0 / k - 1.0);
    Ok((d, coordinate_terms(a, b, k, outer)))
}

/// `D(a, b)²` and its gradient w.r.t. `a`, with the same guard as
/// [`lk_distance_grad`]. For `k = 2` this is the smooth `2(a − b)`.
pub fn squared_lk_distance_grad(a: &[f64], b: &[f64], metric: DistanceMetric) -> Result<(f64, Vec<f64>)> {
    check_dims(a.len(), b.len())?;
    let k = metric.exponent;
    let s = metric.powered_sum(a, b);
    if s == 0.0 {
        return Ok((0.0, vec![0.0; a.len()]));
    }
    let d2 = if k == 2.0 { s } else { s.powf(2.0 / k) };
    // ∂D²/∂aᵢ = 2 S^(2/k − 1) |dᵢ|^(k−1) sign(dᵢ)
    let outer = 2.0 * if k == 2.0 { 1.0 } else { s.powf(2.0 / k - 1.0) };
    Ok((d2, coordinate_terms(a, b, k, outer)))
}

fn coordinate_terms(a: &[f64], b: &[f64], k: f64, outer: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let diff = x - y;
            let mag = diff.abs();
            if mag < COINCIDENCE_GUARD {
                0.0
            } else {
                let p = if k == 2.0 { mag } else if k == 1.0 { 1.0 } else { mag.powf(k - 1.0) };
                outer * p * diff.signum()
            }
        })
        .collect()
}

/// Symmetric `[N, N]` matrix of distances between the rows of `points`.
pub fn pairwise_distances<T: Scalar>(points: &Tensor<T>, metric: DistanceMetric) -> Result<Tensor<f64>> {
    let n = points.rows();
    if points.rank() < 2 || n == 0 {
        return Err(Error::Dimension(format!(
            "pairwise_distances needs [N, D] points, got {:?}",
            points.shape()
        )));
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| metric.eval(points.row(i), points.row(j))).collect())
        .collect();
    let mut out = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    Tensor::new([n, n], out)
}

/// `(Dmax − Dmin) / Dmin` over the distances from `reference` to each row.
///
/// Exact-zero distances are excluded from `Dmin`.
pub fn relative_contrast<T: Scalar>(points: &Tensor<T>, reference: &[T], metric: DistanceMetric) -> Result<f64> {
    if points.rows() < 2 {
        return Err(Error::Degenerate("relative contrast needs at least 2 points".into()));
    }
    check_dims(points.row_len(), reference.len())?;
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..points.rows() {
        let d = metric.eval(points.row(i), reference);
        dmax = dmax.max(d);
        if d > 0.0 {
            dmin = dmin.min(d);
        }
    }
    if !dmin.is_finite() {
        return Err(Error::Degenerate("every point coincides with the reference".into()));
    }
    Ok((dmax - dmin) / dmin)
}

/// A retrieval result.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

pub(crate) fn neighbor_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

/// Exact top-`k` by linear scan, ascending by `(distance, id)`.
///
/// Returns `min(k, candidates)` neighbors.
pub fn knn<'a, T, I>(query: &[T], candidates: I, k: usize, metric: DistanceMetric) -> Result<Vec<Neighbor>>
where
    T: Scalar,
    I: IntoIterator<Item = (&'a str, &'a [T])>,
{
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut scored: Vec<(f64, &str)> = Vec::new();
    for (id, v) in candidates {
        check_dims(query.len(), v.len())?;
        scored.push((metric.eval(query, v), id));
    }
    if scored.is_empty() {
        return Err(Error::Data("nearest-neighbor search over an empty index".into()));
    }
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, neighbor_order);
        scored.truncate(k);
    }
    scored.sort_by(neighbor_order);
    Ok(scored
        .into_iter()
        .map(|(distance, id)| Neighbor {
            id: id.to_string(),
            distance,
        })
        .collect())
}

/// One row of the distance-concentration table.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastRow {
    pub dimension: usize,
    pub k: f64,
    pub contrast_mean: f64,
    pub contrast_std: f64,
    /// Per-trial contrasts, in trial order.
    pub trials: Vec<f64>,
}

/// Relative contrast of `n_points` uniform points in `[0,1]^d` seen from a
/// uniform random reference, for every `(dimension, k)` pair.
///
/// Within one trial all exponents see the same points, so contrasts for
/// different `k` are paired samples.
pub fn contrast_table(
    dims: &[usize],
    ks: &[f64],
    n_points: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ContrastRow>> {
    if n_points < 2 || trials == 0 {
        return Err(Error::Config("need n_points >= 2 and trials >= 1".into()));
    }
    let metrics = ks.iter().map(|&k| DistanceMetric::new(k)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &d in dims {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let per_trial: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((d as u64) << 32) ^ t as u64);
                let pts: Vec<f64> = (0..n_points * d).map(|_| rng.random::<f64>()).collect();
                let reference: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let pts = Tensor::new([n_points, d], pts)?;
                metrics
                    .iter()
                    .map(|&m| relative_contrast(&pts, &reference, m))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (mi, &k) in ks.iter().enumerate() {
            let vals: Vec<f64> = per_trial.iter().map(|v| v[mi]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(ContrastRow {
                dimension: d,
                k,
                contrast_mean: mean,
                contrast_std: std,
                trials: vals,
            });
        }
    }
    Ok(rows)
}

/// Comma-separated rendering with header `dimension,k,contrast_mean,contrast_std`.
pub fn contrast_csv(rows: &[ContrastRow]) -> String {
    let mut s = String::from("dimension,k,contrast_mean,contrast_std\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.dimension, r.k, r.contrast_mean, r.contrast_std));
    }
    s
}
