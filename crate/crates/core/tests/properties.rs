use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rankembed::dataset::{Dataset, Item};
use rankembed::distance::{knn, DistanceMetric};
use rankembed::index::{build_index, decode_embeddings, encode_embeddings, EmbeddingRecord};
use rankembed::io::{decode_dataset, parse_cifar10_bin, parse_idx};
use rankembed::net::decode_checkpoint;
use rankembed::sampling::{Sampler, SamplerConfig};
use rankembed::tensor::ops::{concat, concat_backward, conv2d, l2_normalize};
use rankembed::tensor::Tensor;
use rankembed::train::recall_at_k;

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-10.0f64..10.0, n).prop_map(move |v| Tensor::new(shape.clone(), v).unwrap())
}

fn unit_records(n: usize, dim: usize) -> impl Strategy<Value = Vec<EmbeddingRecord>> {
    prop::collection::vec(prop::collection::vec(-1.0f32..1.0, dim), n).prop_filter_map("zero vector", |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
                (norm > 1e-3).then(|| EmbeddingRecord {
                    id: format!("id{i:03}"),
                    class_label: (i % 3) as i32,
                    vector: v.iter().map(|x| x / norm).collect(),
                })
            })
            .collect()
    })
}

fn pixel_dataset(pixels: Vec<u8>, classes: usize) -> Dataset {
    let items = pixels
        .chunks_exact(4)
        .enumerate()
        .map(|(i, px)| Item {
            id: format!("img{i}"),
            image: Tensor::new([1, 2, 2], px.iter().map(|&p| p as f32 / 255.0).collect()).unwrap(),
            class_label: (i % classes) as i32,
        })
        .collect();
    Dataset::new(items).unwrap()
}

proptest! {
    #[test]
    fn conv_identity_kernel_is_identity(x in tensor(vec![2, 3, 5, 4])) {
        let mut k = Tensor::zeros([3, 3, 3, 3]);
        for c in 0..3 {
            k.data_mut()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let y = conv2d(&x, &k, &Tensor::zeros([3]), 1, 1).unwrap();
        prop_assert_eq!(y, x);
    }

    #[test]
    fn normalized_rows_have_unit_norm(x in tensor(vec![4, 7])) {
        let y = l2_normalize(&x, 1e-12).unwrap();
        for r in 0..4 {
            if x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt() >= 1e-12 {
                let n = y.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn concat_then_split_reconstructs(a in tensor(vec![3, 2]), b in tensor(vec![3, 5]), c in tensor(vec![3, 1])) {
        let joined = concat(&[&a, &b, &c]).unwrap();
        let parts = concat_backward(&[2, 5, 1], &joined).unwrap();
        prop_assert_eq!(parts, vec![a, b, c]);
    }

    #[test]
    fn knn_is_sorted_prefix_and_stable(records in unit_records(30, 5), k in 1usize..35, exp in prop::sample::select(vec![0.25, 1.0, 2.0])) {
        let metric = DistanceMetric::new(exp).unwrap();
        let query = records[0].vector.clone();
        let cands = || records.iter().map(|r| (r.id.as_str(), r.vector.as_slice()));
        let hits = knn(&query, cands(), k, metric).unwrap();
        let all = knn(&query, cands(), records.len(), metric).unwrap();
        prop_assert_eq!(hits.len(), k.min(records.len()));
        prop_assert_eq!(&all[..hits.len()], &hits[..]);
        for w in all.windows(2) {
            prop_assert!(w[0].distance < w[1].distance || (w[0].distance == w[1].distance && w[0].id < w[1].id));
        }
    }

    #[test]
    fn index_round_trip_preserves_queries(records in unit_records(25, 4), k in 1usize..30) {
        let index = build_index(records.clone(), DistanceMetric::new(0.25).unwrap()).unwrap();
        let before = encode_embeddings(&index).unwrap();
        let back = decode_embeddings(&before).unwrap();
        for r in &records {
            prop_assert_eq!(index.query_topk(&r.vector, k).unwrap(), back.query_topk(&r.vector, k).unwrap());
        }
        prop_assert_eq!(encode_embeddings(&index).unwrap(), before);
    }

    #[test]
    fn recall_never_drops_as_k_grows(records in unit_records(20, 4), seed in any::<u64>()) {
        use rand::Rng;
        let index = build_index(records.clone(), DistanceMetric::euclidean()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f32> = (0..5 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let queries = Tensor::new([5, 4], flat).unwrap();
        let matches: Vec<Vec<String>> = (0..5).map(|_| vec![records[rng.random_range(0..20)].id.clone()]).collect();
        let mut last = 0.0;
        for k in 1..=20 {
            let r = recall_at_k(&queries, &matches, &index, k).unwrap();
            prop_assert!(r >= last);
            last = r;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn candidates_stay_in_class(pixels in prop::collection::vec(any::<u8>(), 4 * 24), n in 1usize..10) {
        let data = pixel_dataset(pixels, 3);
        let sampler = Sampler::from_config(&data, SamplerConfig { n_candidates: n, ..SamplerConfig::default() }).unwrap();
        for item in data.items() {
            let c = sampler.positive_candidates(&item.id).unwrap();
            prop_assert_eq!(c.len(), n.min(7));
            for id in &c {
                prop_assert!(id != &item.id);
                prop_assert_eq!(data.get(id).unwrap().class_label, item.class_label);
            }
            prop_assert_eq!(&c, &sampler.positive_candidates(&item.id).unwrap());
        }
    }

    #[test]
    fn only_flagged_pairs_are_self_pairs(pixels in prop::collection::vec(any::<u8>(), 4 * 40), seed in any::<u64>()) {
        let data = pixel_dataset(pixels, 4);
        let sampler = Sampler::from_config(&data, SamplerConfig { n_candidates: 3, ..SamplerConfig::default() }).unwrap();
        let batch = sampler.make_pair_batch(12, 0.5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for p in batch {
            prop_assert_eq!(p.query_id == p.candidate_id, p.augmented_self);
        }
    }

    #[test]
    fn parsers_never_panic_on_garbage(bytes in prop::collection::vec(any::<u8>(), 0..4000)) {
        // Either a consistent dataset or an error; never a panic.
        if let Ok(d) = parse_idx(&bytes, &bytes) {
            prop_assert!(!d.is_empty());
        }
        if let Ok(d) = parse_cifar10_bin(&bytes) {
            prop_assert_eq!(d.len() * 3073, bytes.len());
        }
        let _ = decode_dataset(&bytes);
        let _ = decode_checkpoint(&bytes);
        let _ = decode_embeddings(&bytes);
    }

    #[test]
    fn truncated_containers_are_rejected(pixels in prop::collection::vec(any::<u8>(), 4 * 6), cut in 1usize..40) {
        let data = pixel_dataset(pixels, 2);
        let bytes = rankembed::io::encode_dataset(&data).unwrap();
        prop_assert!(decode_dataset(&bytes[..bytes.len() - cut.min(bytes.len())]).is_err());
        prop_assert_eq!(decode_dataset(&bytes).unwrap(), data);
    }
}
