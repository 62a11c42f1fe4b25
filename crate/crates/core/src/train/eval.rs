use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::dataset::Dataset;
use crate::distance::DistanceMetric;
use crate::error::{Error, Result};
use crate::index::EmbeddingIndex;
use crate::losses::TripletSample;
use crate::net::Checkpoint;
use crate::tensor::Tensor;

/// Fraction of `(anchor, positive, negative)` row triples with
/// `D(a, p) < D(a, n)`. Ties count as incorrect.
pub fn ordering_accuracy(
    embeddings: &Tensor<f32>,
    triplets: &[(usize, usize, usize)],
    metric: DistanceMetric,
) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::Data("triplet accuracy over zero triplets".into()));
    }
    let mut correct = 0usize;
    for &(a, p, n) in triplets {
        if a.max(p).max(n) >= embeddings.rows() {
            return Err(Error::Lookup(format!("triplet row ({a}, {p}, {n})")));
        }
        let (ea, ep, en) = (embeddings.row(a), embeddings.row(p), embeddings.row(n));
        if metric.powered_sum(ea, ep) < metric.powered_sum(ea, en) {
            correct += 1;
        }
    }
    Ok(correct as f64 / triplets.len() as f64)
}

/// Embeds every item the triplets mention (once each) and scores the ordering.
pub fn triplet_accuracy(
    checkpoint: &Checkpoint,
    triplets: &[TripletSample],
    images: &Dataset,
    metric: DistanceMetric,
) -> Result<f64> {
    let mut rows: HashMap<&str, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut row_of = |id: &str| -> Result<usize> {
        if let Some(&r) = rows.get(id) {
            return Ok(r);
        }
        let idx = images.index_of(id)?;
        let item_id = images.item(idx).id.as_str();
        rows.insert(item_id, order.len());
        order.push(idx);
        Ok(order.len() - 1)
    };
    let idx = triplets
        .iter()
        .map(|t| Ok((row_of(&t.anchor_id)?, row_of(&t.positive_id)?, row_of(&t.negative_id)?)))
        .collect::<Result<Vec<_>>>()?;
    if idx.is_empty() {
        return Err(Error::Data("triplet accuracy over zero triplets".into()));
    }
    let emb = checkpoint.embed(&images.batch(&order)?)?;
    ordering_accuracy(&emb, &idx, metric)
}

/// A retrieval query: an image and the catalog ids that count as a hit.
#[derive(Clone, Debug, PartialEq)]
pub struct RecallQuery {
    /// `[C, H, W]`
    pub image: Tensor<f32>,
    pub matches: Vec<String>,
}

/// Fraction of queries with at least one ground-truth id among the `k`
/// nearest catalog entries. `query_embeddings` row `i` belongs to `matches[i]`.
pub fn recall_at_k(
    query_embeddings: &Tensor<f32>,
    matches: &[Vec<String>],
    catalog: &EmbeddingIndex,
    k: usize,
) -> Result<f64> {
    if matches.is_empty() {
        return Err(Error::Data("recall over zero queries".into()));
    }
    if matches.len() != query_embeddings.rows() {
        return Err(Error::Dimension(format!(
            "{} ground-truth lists for {} query embeddings",
            matches.len(),
            query_embeddings.rows()
        )));
    }
    for m in matches {
        if m.is_empty() {
            return Err(Error::Data("query without ground-truth ids".into()));
        }
        if let Some(missing) = m.iter().find(|id| catalog.get(id).is_none()) {
            return Err(Error::Data(format!("ground-truth id `{missing}` is not in the catalog")));
        }
    }
    let mut hits = 0usize;
    for (i, m) in matches.iter().enumerate() {
        let top = catalog.query_topk(query_embeddings.row(i), k)?;
        if top.iter().any(|n| m.contains(&n.id)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / matches.len() as f64)
}

/// Top-`k` recall of `checkpoint` embeddings against a catalog index.
/// Distances use the catalog's metric.
pub fn topk_recall(checkpoint: &Checkpoint, queries: &[RecallQuery], catalog: &EmbeddingIndex, k: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Data("recall over zero queries".into()));
    }
    let images = Tensor::stack(&queries.iter().map(|q| &q.image).collect::<Vec<_>>())?;
    let emb = checkpoint.embed(&images)?;
    let matches: Vec<Vec<String>> = queries.iter().map(|q| q.matches.clone()).collect();
    recall_at_k(&emb, &matches, catalog, k)
}

/// Uniform class triplets: random anchor, a different same-class positive,
/// an other-class negative.
pub fn class_triplets<R: Rng + ?Sized>(dataset: &Dataset, n: usize, rng: &mut R) -> Result<Vec<TripletSample>> {
    let anchors: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.class_members(dataset.item(i).class_label).len() >= 2)
        .collect();
    if anchors.is_empty() || dataset.num_classes() < 2 {
        return Err(Error::Data("class triplets need two classes and a class with two items".into()));
    }
    (0..n)
        .map(|_| {
            let a = *anchors.choose(rng).expect("non-empty");
            let label = dataset.item(a).class_label;
            let class = dataset.class_members(label);
            let p = loop {
                let p = *class.choose(rng).expect("non-empty");
                if p != a {
                    break p;
                }
            };
            let neg = loop {
                let c = rng.random_range(0..dataset.len());
                if dataset.item(c).class_label != label {
                    break c;
                }
            };
            TripletSample::new(&dataset.item(a).id, &dataset.item(p).id, &dataset.item(neg).id)
        })
        .collect()
}

/// Label-agnostic triplets of three distinct uniform items. Positive and
/// negative are exchangeable, so any model scores 0.5 in expectation.
pub fn balanced_random_triplets<R: Rng + ?Sized>(dataset: &Dataset, n: usize, rng: &mut R) -> Result<Vec<TripletSample>> {
    if dataset.len() < 3 {
        return Err(Error::Data("random triplets need at least three items".into()));
    }
    (0..n)
        .map(|_| {
            let picks = rand::seq::index::sample(rng, dataset.len(), 3);
            let id = |j: usize| dataset.item(picks.index(j)).id.as_str();
            TripletSample::new(id(0), id(1), id(2))
        })
        .collect()
}
