//! Siamese training with RMSProp, plus the evaluation metrics.
//!
//! Each step draws a batch from the [`Sampler`], augments every image
//! independently, runs each siamese arm through the shared parameters,
//! sums the arms' parameter gradients and applies one RMSProp update.
//! The loss is computed with Euclidean distance; fractional metrics are
//! for ranking only.

mod augment;
mod eval;
mod rmsprop;

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distance::DistanceMetric;
use crate::error::{Error, Result};
use crate::losses::{batch_loss, batch_loss_rows, LossConfig, LossKind, PairSample, RowSample, SampleBatch, TripletSample};
use crate::net::{self, build_network, Checkpoint, MultiScaleNetConfig, ParamSet};
use crate::sampling::{Sampler, SamplerConfig, Strategy};
use crate::tensor::Tensor;

pub use augment::{augment, hflip, rotate, shift, AugmentConfig, Transform, MAX_ROTATION_DEGREES, MAX_SHIFT};
pub use eval::{
    balanced_random_triplets, class_triplets, ordering_accuracy, recall_at_k, topk_recall, triplet_accuracy,
    RecallQuery,
};
pub use rmsprop::{rmsprop_step, RmsPropConfig};

/// Metric used inside the losses during training.
pub const TRAIN_METRIC: DistanceMetric = DistanceMetric::euclidean();

/// Salt mixed into the seed for the fixed validation draws.
const VALIDATION_SALT: u64 = 0x7661_6c69_6461_7465;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub epochs: u32,
    pub batch_size: usize,
    /// Defaults to `ceil(train items / batch_size)`.
    pub steps_per_epoch: Option<usize>,
    /// Share of positive pairs in a contrastive batch.
    pub pos_fraction: f64,
    pub loss: LossConfig,
    pub augmentation: AugmentConfig,
    /// L2 penalty on weight tensors (not biases).
    pub weight_decay: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: Option<f64>,
    pub seed: u64,
    /// Held-out class triplets scored after every epoch.
    pub validation_triplets: usize,
    /// Fixed held-out batches averaged into the validation loss.
    pub validation_batches: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let rms = RmsPropConfig::default();
        Self {
            learning_rate: rms.learning_rate,
            rho: rms.rho,
            epsilon: rms.epsilon,
            epochs: 10,
            batch_size: 32,
            steps_per_epoch: None,
            pos_fraction: 0.5,
            loss: LossConfig::default(),
            augmentation: AugmentConfig::default(),
            weight_decay: 0.0,
            lr_decay: None,
            seed: 0,
            validation_triplets: 500,
            validation_batches: 8,
        }
    }
}

impl TrainConfig {
    pub fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            rho: self.rho,
            epsilon: self.epsilon,
        }
    }

    /// Every violated constraint, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.rmsprop().validate() {
            out.push(e.to_string());
        }
        if self.epochs == 0 {
            out.push("epochs must be at least 1".into());
        }
        if self.batch_size < 2 {
            out.push(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.steps_per_epoch == Some(0) {
            out.push("steps_per_epoch must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.pos_fraction) {
            out.push(format!("pos_fraction must be in [0, 1], got {}", self.pos_fraction));
        }
        if let Err(e) = self.loss.resolve().validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.augmentation.validate() {
            out.push(e.to_string());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            out.push(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                out.push(format!("lr_decay must be in (0, 1], got {d}"));
            }
        }
        if self.validation_triplets == 0 || self.validation_batches == 0 {
            out.push("validation_triplets and validation_batches must be positive".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().as_slice() {
            [] => Ok(()),
            [one] => Err(Error::Config(one.clone())),
            many => Err(Error::ConfigList(many.to_vec())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub epoch: u32,
    pub mean_train_loss: f64,
    pub validation_loss: f64,
    pub triplet_accuracy: f64,
    pub elapsed_seconds: f64,
}

pub const LOG_HEADER: &str = "epoch,train_loss,val_loss,triplet_acc,seconds";

/// The training log as CSV text with a header line.
pub fn log_csv(rows: &[TrainLogRow]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            r.epoch, r.mean_train_loss, r.validation_loss, r.triplet_accuracy, r.elapsed_seconds
        ));
    }
    s
}

enum ValidationBatch {
    Pairs(Vec<PairSample>),
    Triplets(Vec<TripletSample>),
}

/// Result of a full run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub best: Checkpoint,
    /// Parameters after the last epoch.
    pub last: Checkpoint,
    pub log: Vec<TrainLogRow>,
}

/// Stateful training loop over one train/validation split.
pub struct Trainer<'a> {
    train: &'a Dataset,
    val: &'a Dataset,
    sampler: Sampler<'a>,
    cfg: TrainConfig,
    loss: LossKind,
    checkpoint: Checkpoint,
    state: ParamSet<f32>,
    rng: ChaCha8Rng,
    val_batches: Vec<ValidationBatch>,
    val_triplets: Vec<TripletSample>,
    best: Option<(f64, Checkpoint)>,
    last_good: Checkpoint,
    log: Vec<TrainLogRow>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        train: &'a Dataset,
        val: &'a Dataset,
        net_cfg: &MultiScaleNetConfig,
        sampler_cfg: SamplerConfig,
        cfg: TrainConfig,
    ) -> Result<Self> {
        let checkpoint = build_network(net_cfg, cfg.seed)?;
        Self::from_checkpoint(train, val, checkpoint, sampler_cfg, cfg)
    }

    /// Continues training from existing parameters (optimizer state starts at zero).
    pub fn from_checkpoint(
        train: &'a Dataset,
        val: &'a Dataset,
        checkpoint: Checkpoint,
        sampler_cfg: SamplerConfig,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        checkpoint.config.validate()?;
        for (name, d) in [("training", train), ("validation", val)] {
            if d.num_classes() < 2 {
                return Err(Error::Data(format!("{name} data needs at least two classes")));
            }
            if d.image_shape() != checkpoint.config.input_shape {
                return Err(Error::Dimension(format!(
                    "{name} images are {:?}, network expects {:?}",
                    d.image_shape(),
                    checkpoint.config.input_shape
                )));
            }
        }
        let loss = cfg.loss.resolve();
        let sampler = Sampler::from_config(train, sampler_cfg.clone())?;

        // Validation draws are uniform (strategy independent) so runs with
        // different samplers are scored on the same footing.
        let val_sampler = Sampler::from_config(
            val,
            SamplerConfig {
                strategy: Strategy::RandomBaseline,
                ..sampler_cfg
            },
        )?;
        let mut vrng = ChaCha8Rng::seed_from_u64(cfg.seed ^ VALIDATION_SALT);
        let val_batches = (0..cfg.validation_batches)
            .map(|_| match loss {
                LossKind::Contrastive(_) => val_sampler
                    .make_pair_batch(cfg.batch_size, cfg.pos_fraction, &mut vrng)
                    .map(ValidationBatch::Pairs),
                LossKind::Angular(_) => val_sampler
                    .make_triplet_batch(cfg.batch_size, &mut vrng)
                    .map(ValidationBatch::Triplets),
            })
            .collect::<Result<_>>()?;
        let val_triplets = class_triplets(val, cfg.validation_triplets, &mut vrng)?;

        Ok(Self {
            train,
            val,
            sampler,
            state: checkpoint.params.zeros_like(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            loss,
            last_good: checkpoint.clone(),
            checkpoint,
            cfg,
            val_batches,
            val_triplets,
            best: None,
            log: Vec::new(),
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn log(&self) -> &[TrainLogRow] {
        &self.log
    }

    fn diverged(&self, message: String) -> Error {
        Error::Diverged {
            epoch: self.checkpoint.epoch + 1,
            message,
            last_good: Box::new(self.last_good.clone()),
        }
    }

    /// Augmented images for `ids`, stacked.
    fn arm_images(&mut self, ids: &[&str]) -> Result<Tensor<f32>> {
        let imgs = ids
            .iter()
            .map(|id| augment(&self.train.get(id)?.image, &self.cfg.augmentation, &mut self.rng))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&imgs.iter().collect::<Vec<_>>())
    }

    /// One siamese arm in training mode; the arms share `self.checkpoint.params`.
    fn forward_arm(&mut self, images: &Tensor<f32>) -> Result<(Tensor<f32>, net::ForwardCache<f32>)> {
        let ck = &self.checkpoint;
        net::forward(&ck.config, &ck.params, images, Some(&mut self.rng as &mut dyn RngCore))
    }

    /// One optimization step at learning rate `lr`; returns the batch loss.
    pub fn step(&mut self, lr: f64) -> Result<f64> {
        let bs = self.cfg.batch_size;
        let (arms, rows): (Vec<Vec<String>>, Vec<RowSample>) = match self.loss {
            LossKind::Contrastive(_) => {
                let pairs = self.sampler.make_pair_batch(bs, self.cfg.pos_fraction, &mut self.rng)?;
                let n = pairs.len();
                let rows = pairs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| RowSample::Pair {
                        query: i,
                        candidate: n + i,
                        label: p.label,
                    })
                    .collect();
                let q = pairs.iter().map(|p| p.query_id.clone()).collect();
                let c = pairs.into_iter().map(|p| p.candidate_id).collect();
                (vec![q, c], rows)
            }
            LossKind::Angular(_) => {
                let ts = self.sampler.make_triplet_batch(bs, &mut self.rng)?;
                let n = ts.len();
                let rows = (0..n)
                    .map(|i| RowSample::Triplet {
                        anchor: i,
                        positive: n + i,
                        negative: 2 * n + i,
                    })
                    .collect();
                let a = ts.iter().map(|t| t.anchor_id.clone()).collect();
                let p = ts.iter().map(|t| t.positive_id.clone()).collect();
                let neg = ts.into_iter().map(|t| t.negative_id).collect();
                (vec![a, p, neg], rows)
            }
        };

        let mut outs = Vec::with_capacity(arms.len());
        let mut caches = Vec::with_capacity(arms.len());
        for ids in &arms {
            let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
            let images = self.arm_images(&ids)?;
            let (out, cache) = match self.forward_arm(&images) {
                Err(Error::Numeric(m)) => return Err(self.diverged(m)),
                r => r?,
            };
            outs.push(out);
            caches.push(cache);
        }
        let joined = Tensor::concat_rows(&outs.iter().collect::<Vec<_>>())?;
        let bl = batch_loss_rows(&joined, &rows, &self.loss, TRAIN_METRIC)?;
        if !bl.mean_loss.is_finite() {
            return Err(self.diverged(format!("batch loss is {}", bl.mean_loss)));
        }

        let ck = &self.checkpoint;
        let mut grads = ck.params.zeros_like();
        let n = outs[0].rows();
        for (a, cache) in caches.iter().enumerate() {
            let idx: Vec<usize> = (a * n..(a + 1) * n).collect();
            let upstream = bl.grads.select_rows(&idx)?.cast::<f32>();
            grads.accumulate(&net::backward(&ck.config, &ck.params, cache, &upstream)?)?;
        }
        if self.cfg.weight_decay > 0.0 {
            let wd = self.cfg.weight_decay as f32;
            for (name, g) in grads.iter_mut() {
                if name.ends_with(".weight") {
                    let p = ck.params.get(name)?;
                    for (gv, pv) in g.data_mut().iter_mut().zip(p.data()) {
                        *gv += wd * pv;
                    }
                }
            }
        }
        let rms = RmsPropConfig {
            learning_rate: lr,
            ..self.cfg.rmsprop()
        };
        match rmsprop_step(&mut self.checkpoint.params, &grads, &mut self.state, &rms) {
            Err(Error::Numeric(m)) => Err(self.diverged(m)),
            r => r.map(|()| bl.mean_loss),
        }
    }

    /// Mean loss over the fixed validation batches, inference mode.
    pub fn validation_loss(&self) -> Result<f64> {
        let mut total = 0.0;
        for b in &self.val_batches {
            let mut ids: Vec<String> = match b {
                ValidationBatch::Pairs(p) => p.iter().flat_map(|s| [s.query_id.clone(), s.candidate_id.clone()]).collect(),
                ValidationBatch::Triplets(t) => t
                    .iter()
                    .flat_map(|s| [s.anchor_id.clone(), s.positive_id.clone(), s.negative_id.clone()])
                    .collect(),
            };
            ids.sort_unstable();
            ids.dedup();
            let idx = ids.iter().map(|id| self.val.index_of(id)).collect::<Result<Vec<_>>>()?;
            let emb = self.checkpoint.embed(&self.val.batch(&idx)?)?;
            let batch = match b {
                ValidationBatch::Pairs(p) => SampleBatch::Pairs(p),
                ValidationBatch::Triplets(t) => SampleBatch::Triplets(t),
            };
            total += batch_loss(&ids, &emb, batch, &self.loss, TRAIN_METRIC)?.mean_loss;
        }
        Ok(total / self.val_batches.len() as f64)
    }

    /// Runs one epoch, validates, and appends a log row.
    pub fn run_epoch(&mut self) -> Result<TrainLogRow> {
        let start = Instant::now();
        let epoch = self.checkpoint.epoch;
        let lr = self.cfg.learning_rate * self.cfg.lr_decay.unwrap_or(1.0).powi(epoch as i32);
        let steps = self
            .cfg
            .steps_per_epoch
            .unwrap_or_else(|| self.train.len().div_ceil(self.cfg.batch_size));
        let mut total = 0.0;
        for _ in 0..steps {
            total += self.step(lr)?;
        }
        self.checkpoint.epoch = epoch + 1;
        let validation_loss = self.validation_loss()?;
        if !validation_loss.is_finite() {
            return Err(self.diverged(format!("validation loss is {validation_loss}")));
        }
        let acc = triplet_accuracy(&self.checkpoint, &self.val_triplets, self.val, TRAIN_METRIC)?;
        self.last_good = self.checkpoint.clone();
        if self.best.as_ref().is_none_or(|(b, _)| validation_loss < *b) {
            self.best = Some((validation_loss, self.checkpoint.clone()));
        }
        let row = TrainLogRow {
            epoch: epoch + 1,
            mean_train_loss: total / steps as f64,
            validation_loss,
            triplet_accuracy: acc,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        self.log.push(row.clone());
        Ok(row)
    }

    /// Runs the remaining configured epochs.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.checkpoint.epoch < self.cfg.epochs {
            self.run_epoch()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<TrainOutcome> {
        let best = match self.best {
            Some((_, b)) => b,
            None => return Err(Error::Data("no epoch has completed".into())),
        };
        Ok(TrainOutcome {
            best,
            last: self.checkpoint,
            log: self.log,
        })
    }
}

/// Builds a network and trains it for `cfg.epochs` epochs.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    net_cfg: &MultiScaleNetConfig,
    sampler_cfg: SamplerConfig,
    cfg: TrainConfig,
) -> Result<TrainOutcome> {
    Trainer::new(train_set, val_set, net_cfg, sampler_cfg, cfg)?.run()
}

/// Held-out scores of one cross-validation fold, taken at its best epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub best_epoch: u32,
    pub validation_loss: f64,
    pub triplet_accuracy: f64,
}

/// Stratified `folds`-fold cross-validation.
pub fn cross_validate(
    dataset: &Dataset,
    folds: usize,
    net_cfg: &MultiScaleNetConfig,
    sampler_cfg: SamplerConfig,
    cfg: TrainConfig,
) -> Result<Vec<FoldReport>> {
    (0..folds)
        .map(|f| {
            let (tr, va) = dataset.fold(folds, f)?;
            let out = train(&tr, &va, net_cfg, sampler_cfg.clone(), cfg.clone())?;
            let row = out
                .log
                .iter()
                .find(|r| r.epoch == out.best.epoch)
                .expect("best epoch is logged");
            Ok(FoldReport {
                fold: f,
                best_epoch: row.epoch,
                validation_loss: row.validation_loss,
                triplet_accuracy: row.triplet_accuracy,
            })
        })
        .collect()
}
