//! Training pair and triplet generation.
//!
//! The BISS strategy picks positives among the `n_candidates` same-class
//! items that a cheap image-similarity scorer ranks closest to the query,
//! and mixes in-class negatives (same class, outside that candidate set)
//! with out-of-class negatives at a fixed ratio. The random baseline draws
//! same-class positives and cross-class negatives uniformly.

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::{PairLabel, PairSample, TripletSample};
use crate::net::{load_checkpoint, Checkpoint};
use crate::tensor::{Scalar, Tensor};

/// Image-similarity scorer used to rank positive candidates.
#[derive(Clone, Debug)]
pub enum BissScorer {
    /// Histogram of grayscale intensity; RGB inputs use the channel mean.
    IntensityHistogram { bins: usize },
    /// Per-channel histograms, concatenated.
    ColorHistogram { bins: usize },
    /// Euclidean distance between embeddings of a trained network.
    Embedding(Box<Checkpoint>),
}

impl BissScorer {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::IntensityHistogram { bins } | Self::ColorHistogram { bins } if *bins < 2 => {
                Err(Error::Config(format!("histogram scorer needs at least 2 bins, got {bins}")))
            }
            _ => Ok(()),
        }
    }

    /// Feature vectors for `[N, C, H, W]` images.
    fn features(&self, images: &Tensor<f32>) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        match self {
            Self::IntensityHistogram { bins } => Ok((0..images.rows())
                .map(|i| intensity_histogram(images.row(i), images.shape()[1], *bins))
                .collect()),
            Self::ColorHistogram { bins } => Ok((0..images.rows())
                .map(|i| color_histogram(images.row(i), images.shape()[1], *bins))
                .collect()),
            Self::Embedding(ck) => {
                let e = ck.embed(images)?;
                Ok((0..e.rows()).map(|i| e.row(i).iter().map(|v| v.as_f64()).collect()).collect())
            }
        }
    }

    fn compare(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Embedding(_) => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            _ => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Normalized grayscale histogram of one `[C, H, W]` image with values in `[0, 1]`.
fn intensity_histogram(pixels: &[f32], channels: usize, bins: usize) -> Vec<f64> {
    let plane = pixels.len() / channels;
    let mut h = vec![0.0; bins];
    for p in 0..plane {
        let mean = (0..channels).map(|c| f64::from(pixels[c * plane + p])).sum::<f64>() / channels as f64;
        h[bin_of(mean, bins)] += 1.0;
    }
    h.iter_mut().for_each(|v| *v /= plane as f64);
    h
}

/// Per-channel histograms concatenated, normalized to total mass 1.
fn color_histogram(pixels: &[f32], channels: usize, bins: usize) -> Vec<f64> {
    let plane = pixels.len() / channels;
    let mut h = vec![0.0; bins * channels];
    for (i, &v) in pixels.iter().enumerate() {
        h[(i / plane) * bins + bin_of(f64::from(v), bins)] += 1.0;
    }
    h.iter_mut().for_each(|v| *v /= pixels.len() as f64);
    h
}

/// Dissimilarity of two `[C, H, W]` images; lower means more alike.
pub fn biss_score(scorer: &BissScorer, a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    if a.shape() != b.shape() || a.rank() != 3 {
        return Err(Error::Dimension(format!(
            "biss_score needs two [C, H, W] images of one shape, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let f = scorer.features(&Tensor::stack(&[a, b])?)?;
    Ok(scorer.compare(&f[0], &f[1]))
}

/// Serializable description of a [`BissScorer`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerSpec {
    IntensityHistogram { bins: usize },
    ColorHistogram { bins: usize },
    Embedding { checkpoint: PathBuf },
}

impl Default for ScorerSpec {
    fn default() -> Self {
        Self::IntensityHistogram { bins: 16 }
    }
}

impl ScorerSpec {
    pub fn load(&self) -> Result<BissScorer> {
        let s = match self {
            Self::IntensityHistogram { bins } => BissScorer::IntensityHistogram { bins: *bins },
            Self::ColorHistogram { bins } => BissScorer::ColorHistogram { bins: *bins },
            Self::Embedding { checkpoint } => BissScorer::Embedding(Box::new(load_checkpoint(checkpoint)?)),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Biss,
    RandomBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_candidates: usize,
    pub in_class_fraction: f64,
    pub rng_seed: u64,
    pub strategy: Strategy,
    pub scorers: Vec<ScorerSpec>,
    /// Share of positive pairs that are an augmented copy of the query itself.
    pub self_pair_fraction: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_candidates: 100,
            in_class_fraction: 0.3,
            rng_seed: 0,
            strategy: Strategy::Biss,
            scorers: vec![ScorerSpec::default()],
            self_pair_fraction: 0.25,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scorers.is_empty() {
            return Err(Error::Config("at least one scorer is required".into()));
        }
        for s in &self.scorers {
            if let ScorerSpec::IntensityHistogram { bins } | ScorerSpec::ColorHistogram { bins } = s {
                if *bins < 2 {
                    return Err(Error::Config(format!("histogram scorer needs at least 2 bins, got {bins}")));
                }
            }
        }
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        for (name, v) in [
            ("in_class_fraction", self.in_class_fraction),
            ("self_pair_fraction", self.self_pair_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Number of in-class items among `count` negatives.
pub fn in_class_count(count: usize, fraction: f64) -> usize {
    ((count as f64 * fraction).round() as usize).min(count)
}

/// Pair and triplet generator over one dataset.
///
/// Scorer features are computed once at construction. With several scorers
/// the positive candidate set is the union of each scorer's list.
pub struct Sampler<'a> {
    dataset: &'a Dataset,
    cfg: SamplerConfig,
    scorers: Vec<BissScorer>,
    features: Vec<Vec<Vec<f64>>>,
    /// Items whose class has at least one other member.
    queryable: Vec<usize>,
}

impl<'a> Sampler<'a> {
    /// Loads the scorers named in `cfg`.
    pub fn from_config(dataset: &'a Dataset, cfg: SamplerConfig) -> Result<Self> {
        let scorers = cfg.scorers.iter().map(ScorerSpec::load).collect::<Result<_>>()?;
        Self::with_scorers(dataset, scorers, cfg)
    }

    pub fn new(dataset: &'a Dataset, scorer: BissScorer, cfg: SamplerConfig) -> Result<Self> {
        Self::with_scorers(dataset, vec![scorer], cfg)
    }

    pub fn with_scorers(dataset: &'a Dataset, scorers: Vec<BissScorer>, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if scorers.is_empty() {
            return Err(Error::Config("sampler needs at least one scorer".into()));
        }
        let all: Vec<usize> = (0..dataset.len()).collect();
        let images = dataset.batch(&all)?;
        let features = scorers.iter().map(|s| s.features(&images)).collect::<Result<_>>()?;
        let queryable = (0..dataset.len())
            .filter(|&i| dataset.class_members(dataset.item(i).class_label).len() >= 2)
            .collect();
        Ok(Self {
            dataset,
            cfg,
            scorers,
            features,
            queryable,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    fn id(&self, i: usize) -> &'a str {
        &self.dataset.item(i).id
    }

    fn candidate_indices(&self, q: usize) -> Result<Vec<usize>> {
        let class = self.dataset.class_members(self.dataset.item(q).class_label);
        if class.len() < 2 {
            return Err(Error::EmptyCandidates(format!(
                "query `{}` is the only member of its class",
                self.id(q)
            )));
        }
        let mut union: Vec<usize> = Vec::new();
        let mut seen = HashSet::new();
        for (s, feats) in self.scorers.iter().zip(&self.features) {
            let mut scored: Vec<(f64, usize)> = class
                .iter()
                .filter(|&&i| i != q)
                .map(|&i| (s.compare(&feats[q], &feats[i]), i))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| self.id(a.1).cmp(self.id(b.1))));
            for (_, i) in scored.into_iter().take(self.cfg.n_candidates) {
                if seen.insert(i) {
                    union.push(i);
                }
            }
        }
        Ok(union)
    }

    /// Up to `n_candidates` same-class ids, most similar first, query excluded.
    pub fn positive_candidates(&self, query_id: &str) -> Result<Vec<String>> {
        let q = self.dataset.index_of(query_id)?;
        Ok(self
            .candidate_indices(q)?
            .into_iter()
            .map(|i| self.id(i).to_string())
            .collect())
    }

    /// Same-class items outside the candidate set (BISS), excluding the query.
    fn in_class_pool(&self, q: usize) -> Result<Vec<usize>> {
        let candidates: HashSet<usize> = self.candidate_indices(q)?.into_iter().collect();
        Ok(self
            .dataset
            .class_members(self.dataset.item(q).class_label)
            .iter()
            .copied()
            .filter(|i| *i != q && !candidates.contains(i))
            .collect())
    }

    fn out_of_class_pool(&self, q: usize) -> Vec<usize> {
        let label = self.dataset.item(q).class_label;
        self.dataset
            .class_index()
            .iter()
            .filter(|(c, _)| **c != label)
            .flat_map(|(_, m)| m.iter().copied())
            .collect()
    }

    /// `count` distinct negatives for one query: `round(count · in_class_fraction)`
    /// in-class ids first, then out-of-class ids; uniform within each pool.
    pub fn sample_negatives<R: Rng + ?Sized>(
        &self,
        query_id: &str,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<(String, bool)>> {
        let q = self.dataset.index_of(query_id)?;
        if self.dataset.num_classes() < 2 {
            return Err(Error::Data("negatives need at least two classes".into()));
        }
        let n_in = match self.cfg.strategy {
            Strategy::Biss => in_class_count(count, self.cfg.in_class_fraction),
            Strategy::RandomBaseline => 0,
        };
        let mut out = Vec::with_capacity(count);
        if n_in > 0 {
            let pool = self.in_class_pool(q)?;
            out.extend(draw_distinct(&pool, n_in, "in-class", rng)?.into_iter().map(|i| (i, true)));
        }
        let pool = self.out_of_class_pool(q);
        out.extend(
            draw_distinct(&pool, count - n_in, "out-of-class", rng)?
                .into_iter()
                .map(|i| (i, false)),
        );
        Ok(out.into_iter().map(|(i, f)| (self.id(i).to_string(), f)).collect())
    }

    fn random_query<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.queryable
            .choose(rng)
            .copied()
            .ok_or_else(|| Error::EmptyCandidates("every class is a singleton".into()))
    }

    fn draw_positive<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> Result<usize> {
        match self.cfg.strategy {
            Strategy::Biss => Ok(*self
                .candidate_indices(q)?
                .choose(rng)
                .expect("candidate list is non-empty")),
            Strategy::RandomBaseline => {
                let class = self.dataset.class_members(self.dataset.item(q).class_label);
                let others: Vec<usize> = class.iter().copied().filter(|&i| i != q).collect();
                others
                    .choose(rng)
                    .copied()
                    .ok_or_else(|| Error::EmptyCandidates(format!("query `{}` has no class mates", self.id(q))))
            }
        }
    }

    fn draw_negative<R: Rng + ?Sized>(&self, q: usize, in_class: bool, rng: &mut R) -> Result<usize> {
        let (pool, name) = if in_class {
            (self.in_class_pool(q)?, "in-class")
        } else {
            (self.out_of_class_pool(q), "out-of-class")
        };
        Ok(draw_distinct(&pool, 1, name, rng)?[0])
    }

    /// Which of `n` negatives in a batch are in-class: the first
    /// `round(n · in_class_fraction)` before shuffling.
    fn negative_plan(&self, n: usize) -> Vec<bool> {
        let n_in = match self.cfg.strategy {
            Strategy::Biss => in_class_count(n, self.cfg.in_class_fraction),
            Strategy::RandomBaseline => 0,
        };
        (0..n).map(|i| i < n_in).collect()
    }

    /// A shuffled batch of `round(batch_size · pos_fraction)` positive pairs
    /// and the rest negative pairs. No pair appears twice.
    pub fn make_pair_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        pos_fraction: f64,
        rng: &mut R,
    ) -> Result<Vec<PairSample>> {
        if batch_size < 2 {
            return Err(Error::Config(format!("batch_size must be at least 2, got {batch_size}")));
        }
        if !(0.0..=1.0).contains(&pos_fraction) {
            return Err(Error::Config(format!("pos_fraction must be in [0, 1], got {pos_fraction}")));
        }
        let n_pos = ((batch_size as f64 * pos_fraction).round() as usize).min(batch_size);
        let self_pairs = self.cfg.strategy == Strategy::Biss && self.cfg.self_pair_fraction > 0.0;
        let mut seen = BTreeSet::new();
        let mut batch = Vec::with_capacity(batch_size);

        let mut push_unique = |batch: &mut Vec<PairSample>,
                               draw: &mut dyn FnMut() -> Result<(usize, usize, bool)>,
                               label: PairLabel|
         -> Result<()> {
            for _ in 0..MAX_REDRAWS {
                let (q, c, augmented) = draw()?;
                if seen.insert((q, c)) {
                    let mut s = PairSample::new(self.id(q), self.id(c), label);
                    s.augmented_self = augmented;
                    batch.push(s);
                    return Ok(());
                }
            }
            Err(Error::PoolShortfall {
                pool: "distinct pairs",
                requested: batch_size,
                available: batch.len(),
                shortfall: batch_size - batch.len(),
            })
        };

        for _ in 0..n_pos {
            let mut draw = || -> Result<(usize, usize, bool)> {
                let q = self.random_query(rng)?;
                if self_pairs && rng.random::<f64>() < self.cfg.self_pair_fraction {
                    return Ok((q, q, true));
                }
                Ok((q, self.draw_positive(q, rng)?, false))
            };
            push_unique(&mut batch, &mut draw, PairLabel::Similar)?;
        }
        for in_class in self.negative_plan(batch_size - n_pos) {
            let mut draw = || -> Result<(usize, usize, bool)> {
                let q = if in_class {
                    self.random_query(rng)?
                } else {
                    rng.random_range(0..self.dataset.len())
                };
                Ok((q, self.draw_negative(q, in_class, rng)?, false))
            };
            push_unique(&mut batch, &mut draw, PairLabel::Dissimilar)?;
        }
        batch.shuffle(rng);
        Ok(batch)
    }

    /// A shuffled batch of triplets. Anchors are uniform over items with a
    /// class mate; `round(batch_size · in_class_fraction)` triplets carry an
    /// in-class negative, the rest an out-of-class one.
    pub fn make_triplet_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<TripletSample>> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let mut batch = self
            .negative_plan(batch_size)
            .into_iter()
            .map(|in_class| {
                let a = self.random_query(rng)?;
                let p = self.draw_positive(a, rng)?;
                let n = self.draw_negative(a, in_class, rng)?;
                TripletSample::new(self.id(a), self.id(p), self.id(n))
            })
            .collect::<Result<Vec<_>>>()?;
        batch.shuffle(rng);
        Ok(batch)
    }
}

/// Redraws allowed per batch slot before giving up on finding a new pair.
const MAX_REDRAWS: usize = 1000;

fn draw_distinct<R: Rng + ?Sized>(pool: &[usize], n: usize, name: &'static str, rng: &mut R) -> Result<Vec<usize>> {
    if pool.len() < n {
        return Err(Error::PoolShortfall {
            pool: name,
            requested: n,
            available: pool.len(),
            shortfall: n - pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fixtures, Item};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const HIST16: BissScorer = BissScorer::IntensityHistogram { bins: 16 };

    fn cfg(n_candidates: usize) -> SamplerConfig {
        SamplerConfig {
            n_candidates,
            ..SamplerConfig::default()
        }
    }

    /// Images with a two-level pattern so that histograms differ item to item.
    fn graded(classes: usize, per_class: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let items = (0..classes * per_class)
            .map(|i| Item {
                id: format!("g{i:03}"),
                image: Tensor::new([1, 4, 4], (0..16).map(|_| rng.random::<f32>()).collect()).unwrap(),
                class_label: (i % classes) as i32,
            })
            .collect();
        Dataset::new(items).unwrap()
    }

    #[test]
    fn score_examples() {
        let black = Tensor::zeros([1, 4, 4]);
        let white = Tensor::full([1, 4, 4], 1.0f32);
        assert_eq!(biss_score(&HIST16, &black, &white).unwrap(), 2.0);
        assert_eq!(biss_score(&HIST16, &white, &white).unwrap(), 0.0);
        let d = graded(1, 2);
        let (a, b) = (&d.item(0).image, &d.item(1).image);
        assert_eq!(biss_score(&HIST16, a, b).unwrap(), biss_score(&HIST16, b, a).unwrap());
        let color = BissScorer::ColorHistogram { bins: 4 };
        let rgb_black = Tensor::zeros([3, 2, 2]);
        let rgb_white = Tensor::full([3, 2, 2], 1.0f32);
        assert!((biss_score(&color, &rgb_black, &rgb_white).unwrap() - 2.0).abs() < 1e-12);
        assert!(biss_score(&HIST16, &black, &rgb_black).is_err());
        assert!(biss_score(&BissScorer::IntensityHistogram { bins: 1 }, &black, &black).is_err());
    }

    #[test]
    fn candidates_clamped_and_exclude_query() {
        let d = graded(2, 5);
        let s = Sampler::new(&d, HIST16, cfg(100)).unwrap();
        let c = s.positive_candidates("g000").unwrap();
        assert_eq!(c.len(), 4);
        assert!(!c.contains(&"g000".to_string()));
        for id in &c {
            assert_eq!(d.get(id).unwrap().class_label, 0);
        }
    }

    #[test]
    fn duplicate_image_ranks_first() {
        let mut items = graded(1, 6).items().to_vec();
        items[4].image = items[0].image.clone();
        let d = Dataset::new(items).unwrap();
        let s = Sampler::new(&d, HIST16, cfg(3)).unwrap();
        assert_eq!(s.positive_candidates("g000").unwrap()[0], "g004");
    }

    #[test]
    fn candidates_match_full_sort_oracle() {
        let d = graded(1, 20);
        let s = Sampler::new(&d, HIST16, cfg(7)).unwrap();
        let q = &d.item(3).image;
        let mut oracle: Vec<(f64, &str)> = d
            .items()
            .iter()
            .filter(|it| it.id != "g003")
            .map(|it| (biss_score(&HIST16, q, &it.image).unwrap(), it.id.as_str()))
            .collect();
        oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
        let want: Vec<String> = oracle.iter().take(7).map(|(_, id)| id.to_string()).collect();
        assert_eq!(s.positive_candidates("g003").unwrap(), want);
    }

    #[test]
    fn singleton_class() {
        let mut items = graded(2, 3).items().to_vec();
        items[0].class_label = 9;
        let d = Dataset::new(items).unwrap();
        let s = Sampler::new(&d, HIST16, cfg(10)).unwrap();
        assert_eq!(s.positive_candidates("g000").unwrap_err().kind(), "empty_candidates");
    }

    #[test]
    fn negative_composition() {
        let d = fixtures::toy(4, 150, [1, 2, 2]);
        let s = Sampler::new(&d, HIST16, cfg(20)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let negs = s.sample_negatives("item0000", 100, &mut rng).unwrap();
        assert_eq!(negs.iter().filter(|n| n.1).count(), 30);
        let distinct: HashSet<&String> = negs.iter().map(|n| &n.0).collect();
        assert_eq!(distinct.len(), 100);
        let cands: HashSet<String> = s.positive_candidates("item0000").unwrap().into_iter().collect();
        for (id, in_class) in &negs {
            let same = d.get(id).unwrap().class_label == 0;
            assert_eq!(same, *in_class);
            assert!(!cands.contains(id) && id != "item0000");
        }

        let zero = Sampler::new(&d, HIST16, SamplerConfig { in_class_fraction: 0.0, ..cfg(20) }).unwrap();
        let negs = zero.sample_negatives("item0000", 10, &mut rng).unwrap();
        assert!(negs.iter().all(|n| !n.1));

        let a = s.sample_negatives("item0001", 40, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = s.sample_negatives("item0001", 40, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shortfall_is_reported() {
        let d = fixtures::toy(2, 10, [1, 2, 2]);
        let s = Sampler::new(&d, HIST16, cfg(5)).unwrap();
        // 4 in-class items remain outside the 5 candidates; 6 requested.
        let err = s.sample_negatives("item0000", 20, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        match err {
            Error::PoolShortfall { requested, available, shortfall, .. } => {
                assert_eq!((requested, available, shortfall), (6, 4, 2));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn pair_batches() {
        let d = fixtures::toy(3, 40, [1, 2, 2]);
        let s = Sampler::new(&d, HIST16, cfg(10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let all_pos = s.make_pair_batch(12, 1.0, &mut rng).unwrap();
        assert!(all_pos.iter().all(|p| p.label == PairLabel::Similar));
        let half = s.make_pair_batch(10, 0.5, &mut rng).unwrap();
        assert_eq!(half.iter().filter(|p| p.label == PairLabel::Similar).count(), 5);
        for p in &half {
            if p.query_id == p.candidate_id {
                assert!(p.augmented_self);
            }
            let same = d.get(&p.query_id).unwrap().class_label == d.get(&p.candidate_id).unwrap().class_label;
            if p.label == PairLabel::Similar {
                assert!(same);
            }
        }
        assert!(s.make_pair_batch(1, 0.5, &mut rng).is_err());

        let base = Sampler::new(&d, HIST16, SamplerConfig { strategy: Strategy::RandomBaseline, ..cfg(10) }).unwrap();
        let b = base.make_pair_batch(40, 0.5, &mut rng).unwrap();
        for p in &b {
            let same = d.get(&p.query_id).unwrap().class_label == d.get(&p.candidate_id).unwrap().class_label;
            assert_eq!(same, p.label == PairLabel::Similar);
            assert_ne!(p.query_id, p.candidate_id);
        }
    }

    #[test]
    fn triplet_batches() {
        let d = fixtures::toy(3, 40, [1, 2, 2]);
        let s = Sampler::new(&d, HIST16, cfg(10)).unwrap();
        let t = s.make_triplet_batch(20, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let label = |id: &str| d.get(id).unwrap().class_label;
        let mut in_class = 0;
        for x in &t {
            assert_eq!(label(&x.anchor_id), label(&x.positive_id));
            if label(&x.negative_id) == label(&x.anchor_id) {
                in_class += 1;
            }
        }
        assert_eq!(in_class, 6);
        assert_eq!(t, s.make_triplet_batch(20, &mut ChaCha8Rng::seed_from_u64(8)).unwrap());
    }
}
