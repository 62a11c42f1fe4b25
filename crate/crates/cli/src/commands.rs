use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankembed::config::RunConfig;
use rankembed::dataset::Dataset;
use rankembed::distance::{contrast_csv, contrast_table, DistanceMetric};
use rankembed::index::{build_index, read_embeddings, write_embeddings, EmbeddingIndex, EmbeddingRecord};
use rankembed::io::{parse_cifar10_bin, parse_ground_truth, parse_idx, parse_triplet_list, read_dataset, write_dataset};
use rankembed::net::{load_checkpoint, save_checkpoint, Checkpoint};
use rankembed::sampling::Sampler;
use rankembed::tensor::Tensor;
use rankembed::train::{cross_validate, log_csv, ordering_accuracy, recall_at_k, triplet_accuracy, Trainer};
use rankembed::{Error, Result};

use crate::args::*;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Embed(a) => embed(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::DiagContrast(a) => diag_contrast(a),
        Command::SamplePairs(a) => sample_pairs(a),
    }
}

impl Common {
    /// Config file (or defaults) with flag overrides applied, plus the thread cap.
    fn setup(&self) -> Result<RunConfig> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Config("--threads must be at least 1".into()));
            }
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.train.seed = s;
            cfg.sampler.rng_seed = s;
        }
        if let Some(k) = self.metric_k {
            cfg.metric = DistanceMetric::new(k)?;
        }
        Ok(cfg)
    }

    fn check_output(&self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            return Err(Error::Exists(path.to_path_buf()));
        }
        Ok(())
    }
}

fn print_metrics(common: &Common, metrics: &[(String, String)]) {
    if common.pretty {
        let w = metrics.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in metrics {
            println!("{k:<w$}  {v}");
        }
    } else {
        for (k, v) in metrics {
            println!("{k}={v}");
        }
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    a.common.setup()?;
    a.common.check_output(&a.output)?;
    let dataset = match a.format {
        Format::Idx => {
            let [images, labels] = a.inputs.as_slice() else {
                return Err(Error::Config("idx ingest takes an image file and a label file".into()));
            };
            parse_idx(&fs::read(images)?, &fs::read(labels)?)?
        }
        Format::Cifar10 => {
            // Batches are plain record streams, so concatenation keeps ids unique.
            let mut bytes = Vec::new();
            for p in &a.inputs {
                bytes.extend(fs::read(p)?);
            }
            parse_cifar10_bin(&bytes)?
        }
        Format::Internal => {
            let [input] = a.inputs.as_slice() else {
                return Err(Error::Config("internal ingest takes one container file".into()));
            };
            read_dataset(input)?
        }
    };
    write_dataset(&a.output, &dataset)?;
    let [c, h, w] = dataset.image_shape();
    print_metrics(
        &a.common,
        &[
            ("items".into(), dataset.len().to_string()),
            ("classes".into(), dataset.num_classes().to_string()),
            ("shape".into(), format!("{c}x{h}x{w}")),
        ],
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.common.setup()?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    cfg.validate()?;
    let data = read_dataset(&a.train)?;
    let net = cfg.net_for(data.image_shape())?;

    if let Some(k) = a.folds {
        let reports = cross_validate(&data, k, &net, cfg.sampler, cfg.train)?;
        let mut m = Vec::new();
        for r in &reports {
            m.push((format!("fold{}_val_loss", r.fold), format!("{:.6}", r.validation_loss)));
            m.push((format!("fold{}_triplet_accuracy", r.fold), format!("{:.6}", r.triplet_accuracy)));
        }
        let mean = reports.iter().map(|r| r.triplet_accuracy).sum::<f64>() / reports.len() as f64;
        m.push(("mean_triplet_accuracy".into(), format!("{mean:.6}")));
        print_metrics(&a.common, &m);
        return Ok(());
    }

    let output = a.output.expect("clap requires --output without --folds");
    let log_path = a.log.unwrap_or_else(|| PathBuf::from(format!("{}.log.csv", output.display())));
    a.common.check_output(&output)?;
    a.common.check_output(&log_path)?;
    let (train_set, val_set) = match &a.val {
        Some(p) => (data, read_dataset(p)?),
        None => data.fold(10, 0)?,
    };
    let mut trainer = Trainer::new(&train_set, &val_set, &net, cfg.sampler, cfg.train.clone())?;
    while trainer.checkpoint().epoch < cfg.train.epochs {
        let row = trainer.run_epoch()?;
        eprintln!(
            "epoch {} train_loss={:.6} val_loss={:.6} triplet_acc={:.4} ({:.1}s)",
            row.epoch, row.mean_train_loss, row.validation_loss, row.triplet_accuracy, row.elapsed_seconds
        );
    }
    let out = trainer.finish()?;
    save_checkpoint(&out.best, &output)?;
    fs::write(&log_path, log_csv(&out.log))?;
    let best = out.log.iter().find(|r| r.epoch == out.best.epoch).expect("best epoch logged");
    print_metrics(
        &a.common,
        &[
            ("best_epoch".into(), best.epoch.to_string()),
            ("val_loss".into(), format!("{:.6}", best.validation_loss)),
            ("triplet_accuracy".into(), format!("{:.6}", best.triplet_accuracy)),
        ],
    );
    Ok(())
}

fn embed_dataset(ck: &Checkpoint, data: &Dataset, metric: DistanceMetric) -> Result<EmbeddingIndex> {
    let all: Vec<usize> = (0..data.len()).collect();
    let emb = ck.embed(&data.batch(&all)?)?;
    build_index(
        data.items()
            .iter()
            .enumerate()
            .map(|(i, it)| EmbeddingRecord {
                id: it.id.clone(),
                class_label: it.class_label,
                vector: emb.row(i).to_vec(),
            })
            .collect(),
        metric,
    )
}

fn embed(a: EmbedArgs) -> Result<()> {
    let cfg = a.common.setup()?;
    a.common.check_output(&a.output)?;
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = read_dataset(&a.dataset)?;
    let index = embed_dataset(&ck, &data, cfg.metric)?;
    write_embeddings(&a.output, &index)?;
    print_metrics(
        &a.common,
        &[
            ("records".into(), index.len().to_string()),
            ("dim".into(), index.dim().to_string()),
            ("metric_k".into(), index.metric().exponent().to_string()),
        ],
    );
    Ok(())
}

/// The stored index, re-keyed to `--metric-k` when that flag is given.
fn catalog(path: &Path, common: &Common) -> Result<EmbeddingIndex> {
    let index = read_embeddings(path)?;
    match common.metric_k {
        Some(k) => build_index(index.records().to_vec(), DistanceMetric::new(k)?),
        None => Ok(index),
    }
}

fn query(a: QueryArgs) -> Result<()> {
    a.common.setup()?;
    let index = catalog(&a.embeddings, &a.common)?;
    let vector = match (&a.dataset, &a.checkpoint) {
        (Some(d), Some(c)) => {
            let data = read_dataset(d)?;
            let img = &data.get(&a.id)?.image;
            let ck = load_checkpoint(c)?;
            ck.embed(&Tensor::stack(&[img])?)?.into_data()
        }
        _ => index
            .get(&a.id)
            .ok_or_else(|| Error::Lookup(a.id.clone()))?
            .vector
            .clone(),
    };
    let hits = index.query_topk(&vector, a.k)?;
    let mut out = String::new();
    for (rank, n) in hits.iter().enumerate() {
        if a.common.pretty {
            writeln!(out, "{:>4}  {:<24} {:.6}", rank + 1, n.id, n.distance).expect("string write");
        } else {
            writeln!(out, "{},{},{}", rank + 1, n.id, n.distance).expect("string write");
        }
    }
    print!("{out}");
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = a.common.setup()?;
    let mut metrics = Vec::new();
    let ck = a.checkpoint.as_ref().map(load_checkpoint).transpose()?;
    let data = a.dataset.as_ref().map(read_dataset).transpose()?;
    let cat = a.embeddings.as_ref().map(|p| catalog(p, &a.common)).transpose()?;

    if let Some(t) = &a.triplets {
        let triplets = parse_triplet_list(&fs::read_to_string(t)?)?;
        let acc = match (&ck, &data, &cat) {
            (Some(ck), Some(data), _) => triplet_accuracy(ck, &triplets, data, cfg.metric)?,
            (_, _, Some(cat)) => {
                let rows: std::collections::HashMap<&str, usize> =
                    cat.records().iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
                let row = |id: &str| rows.get(id).copied().ok_or_else(|| Error::Lookup(id.to_string()));
                let idx = triplets
                    .iter()
                    .map(|t| Ok((row(&t.anchor_id)?, row(&t.positive_id)?, row(&t.negative_id)?)))
                    .collect::<Result<Vec<_>>>()?;
                let flat: Vec<f32> = cat.records().iter().flat_map(|r| r.vector.iter().copied()).collect();
                let emb = Tensor::new([cat.len(), cat.dim()], flat)?;
                ordering_accuracy(&emb, &idx, a.common.metric_k.map_or(Ok(cat.metric()), DistanceMetric::new)?)?
            }
            _ => {
                return Err(Error::Config(
                    "--triplets needs --checkpoint with --dataset, or --embeddings".into(),
                ))
            }
        };
        metrics.push(("triplets".into(), triplets.len().to_string()));
        metrics.push(("triplet_accuracy".into(), format!("{acc:.6}")));
    }

    if let Some(gt) = &a.ground_truth {
        let cat = cat.as_ref().expect("clap requires --embeddings");
        let truth = parse_ground_truth(&fs::read_to_string(gt)?)?;
        let queries = match (&a.queries, &ck, &data) {
            (Some(q), _, _) => read_embeddings(q)?,
            (None, Some(ck), Some(d)) => embed_dataset(ck, d, cat.metric())?,
            _ => cat.clone(),
        };
        let mut flat = Vec::with_capacity(truth.len() * cat.dim());
        for t in &truth {
            let r = queries.get(&t.query_id).ok_or_else(|| Error::Lookup(t.query_id.clone()))?;
            flat.extend_from_slice(&r.vector);
        }
        let emb = Tensor::new([truth.len(), queries.dim()], flat)?;
        let matches: Vec<Vec<String>> = truth.into_iter().map(|t| t.match_ids).collect();
        let recall = recall_at_k(&emb, &matches, cat, a.k)?;
        metrics.push(("queries".into(), matches.len().to_string()));
        metrics.push((format!("top{}_recall", a.k), format!("{recall:.6}")));
    }

    if metrics.is_empty() {
        return Err(Error::Config("eval needs --triplets and/or --ground-truth".into()));
    }
    print_metrics(&a.common, &metrics);
    Ok(())
}

fn diag_contrast(a: ContrastArgs) -> Result<()> {
    let cfg = a.common.setup()?;
    let rows = contrast_table(&a.dims, &a.ks, a.points, a.trials, a.common.seed.unwrap_or(cfg.train.seed))?;
    let text = if a.common.pretty {
        let mut s = format!("{:>9} {:>6} {:>14} {:>14}\n", "dimension", "k", "contrast_mean", "contrast_std");
        for r in &rows {
            writeln!(s, "{:>9} {:>6} {:>14.6} {:>14.6}", r.dimension, r.k, r.contrast_mean, r.contrast_std)
                .expect("string write");
        }
        s
    } else {
        contrast_csv(&rows)
    };
    match &a.output {
        Some(p) => {
            a.common.check_output(p)?;
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn sample_pairs(a: SampleArgs) -> Result<()> {
    let cfg = a.common.setup()?;
    let data = read_dataset(&a.dataset)?;
    let sampler = Sampler::from_config(&data, cfg.sampler.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampler.rng_seed);
    let pairs = sampler.make_pair_batch(a.count, a.pos_fraction, &mut rng)?;
    let mut out = String::new();
    for p in pairs {
        writeln!(out, "{},{},{}", p.query_id, p.candidate_id, p.label.y()).expect("string write");
    }
    print!("{out}");
    Ok(())
}
