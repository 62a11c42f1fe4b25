//! Pairwise contrastive loss and triplet angular loss, with gradients
//! w.r.t. the embeddings.

use serde::{Deserialize, Serialize};

use crate::distance::{lk_distance_grad, squared_lk_distance_grad, DistanceMetric};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Pair label: `Y = 0` similar, `Y = 1` dissimilar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    Similar,
    Dissimilar,
}

impl PairLabel {
    /// The numeric `Y` value.
    pub fn y(self) -> u8 {
        match self {
            PairLabel::Similar => 0,
            PairLabel::Dissimilar => 1,
        }
    }

    pub fn from_y(y: u8) -> Result<Self> {
        match y {
            0 => Ok(PairLabel::Similar),
            1 => Ok(PairLabel::Dissimilar),
            other => Err(Error::Data(format!("pair label must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairSample {
    pub query_id: String,
    pub candidate_id: String,
    pub label: PairLabel,
    /// Set when query and candidate are two augmented views of one item.
    pub augmented_self: bool,
}

impl PairSample {
    pub fn new(query_id: impl Into<String>, candidate_id: impl Into<String>, label: PairLabel) -> Self {
        Self {
            query_id: query_id.into(),
            candidate_id: candidate_id.into(),
            label,
            augmented_self: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TripletSample {
    pub anchor_id: String,
    pub positive_id: String,
    pub negative_id: String,
}

impl TripletSample {
    pub fn new(anchor: impl Into<String>, positive: impl Into<String>, negative: impl Into<String>) -> Result<Self> {
        let t = Self {
            anchor_id: anchor.into(),
            positive_id: positive.into(),
            negative_id: negative.into(),
        };
        if t.anchor_id == t.positive_id || t.anchor_id == t.negative_id || t.positive_id == t.negative_id {
            return Err(Error::Data(format!(
                "triplet ids must be pairwise distinct: {},{},{}",
                t.anchor_id, t.positive_id, t.negative_id
            )));
        }
        Ok(t)
    }
}

/// Which hinge the dissimilar branch of the contrastive loss uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HingeVariant {
    /// `½ max(0, m − D²)`
    #[default]
    AsWritten,
    /// `½ max(0, m − D)²`
    SquaredHinge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub margin: f64,
    pub hinge_variant: HingeVariant,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            margin: 1.0,
            hinge_variant: HingeVariant::AsWritten,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin > 0.0 && self.margin.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("contrastive margin must be > 0, got {}", self.margin)))
        }
    }
}

/// Which distance the angular penalty compares against `D(x_a, x_p)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularVariant {
    /// `D(x_n, x_c)`: distance from the negative to the anchor/positive center.
    #[default]
    NegativeToCenter,
    /// `D(x_a, x_c)`; ignores the negative entirely.
    AsWritten,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngularConfig {
    /// Angle bound in degrees, in `(0, 90)`.
    pub alpha_degrees: f64,
    pub formula_variant: AngularVariant,
}

impl Default for AngularConfig {
    fn default() -> Self {
        Self {
            alpha_degrees: 45.0,
            formula_variant: AngularVariant::NegativeToCenter,
        }
    }
}

impl AngularConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_degrees > 0.0 && self.alpha_degrees < 90.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "angular alpha must be in (0, 90) degrees, got {}",
                self.alpha_degrees
            )))
        }
    }

    /// `4 tan²(α)`.
    pub fn penalty_factor(&self) -> f64 {
        let t = self.alpha_degrees.to_radians().tan();
        4.0 * t * t
    }
}

/// Per-pair loss value with gradients for both embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub grad_query: Vec<f64>,
    pub grad_candidate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletLoss {
    pub loss: f64,
    pub grad_anchor: Vec<f64>,
    pub grad_positive: Vec<f64>,
    pub grad_negative: Vec<f64>,
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Contrastive loss for one pair.
///
/// `Y = 0`: `½ D²`. `Y = 1`: `½ max(0, m − D²)` or `½ max(0, m − D)²`.
/// Gradients are exactly zero where the hinge is inactive.
pub fn contrastive_loss(
    query: &[f64],
    candidate: &[f64],
    label: PairLabel,
    cfg: &ContrastiveConfig,
    metric: DistanceMetric,
) -> Result<PairLoss> {
    cfg.validate()?;
    let zeros = || vec![0.0; query.len()];
    let (loss, g) = match (label, cfg.hinge_variant) {
        (PairLabel::Similar, _) => {
            let (d2, g) = squared_lk_distance_grad(query, candidate, metric)?;
            (0.5 * d2, scaled(&g, 0.5))
        }
        (PairLabel::Dissimilar, HingeVariant::AsWritten) => {
            let (d2, g) = squared_lk_distance_grad(query, candidate, metric)?;
            let gap = cfg.margin - d2;
            if gap > 0.0 {
                (0.5 * gap, scaled(&g, -0.5))
            } else {
                (0.0, zeros())
            }
        }
        (PairLabel::Dissimilar, HingeVariant::SquaredHinge) => {
            let (d, g) = lk_distance_grad(query, candidate, metric)?;
            let gap = cfg.margin - d;
            if gap > 0.0 {
                (0.5 * gap * gap, scaled(&g, -gap))
            } else {
                (0.0, zeros())
            }
        }
    };
    Ok(PairLoss {
        loss,
        grad_candidate: neg(&g),
        grad_query: g,
    })
}

/// Angular loss for one triplet, with `x_c = (x_a + x_p) / 2`.
pub fn angular_loss(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    cfg: &AngularConfig,
    metric: DistanceMetric,
) -> Result<TripletLoss> {
    cfg.validate()?;
    if positive.len() != anchor.len() || negative.len() != anchor.len() {
        return Err(Error::Dimension("angular loss embeddings differ in dimension".into()));
    }
    let dim = anchor.len();
    let center: Vec<f64> = anchor.iter().zip(positive).map(|(a, p)| 0.5 * (a + p)).collect();
    let factor = cfg.penalty_factor();
    let (ap2, g_ap) = squared_lk_distance_grad(anchor, positive, metric)?;

    let mut ga = g_ap.clone();
    let mut gp = neg(&g_ap);
    let mut gn = vec![0.0; dim];
    let value = match cfg.formula_variant {
        AngularVariant::NegativeToCenter => {
            let (nc2, g_nc) = squared_lk_distance_grad(negative, &center, metric)?;
            // x_c feeds both x_a and x_p with weight ½.
            for i in 0..dim {
                gn[i] = -factor * g_nc[i];
                ga[i] += 0.5 * factor * g_nc[i];
                gp[i] += 0.5 * factor * g_nc[i];
            }
            ap2 - factor * nc2
        }
        AngularVariant::AsWritten => {
            let (ac2, g_ac) = squared_lk_distance_grad(anchor, &center, metric)?;
            for i in 0..dim {
                ga[i] -= factor * 0.5 * g_ac[i];
                gp[i] += factor * 0.5 * g_ac[i];
            }
            ap2 - factor * ac2
        }
    };
    if value > 0.0 {
        Ok(TripletLoss {
            loss: value,
            grad_anchor: ga,
            grad_positive: gp,
            grad_negative: gn,
        })
    } else {
        Ok(TripletLoss {
            loss: 0.0,
            grad_anchor: vec![0.0; dim],
            grad_positive: vec![0.0; dim],
            grad_negative: vec![0.0; dim],
        })
    }
}

/// Loss selection for a training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Contrastive {
        #[serde(default)]
        margin: Option<f64>,
        #[serde(default)]
        hinge_variant: Option<HingeVariant>,
    },
    Angular {
        #[serde(default)]
        alpha_degrees: Option<f64>,
        #[serde(default)]
        formula_variant: Option<AngularVariant>,
    },
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::Contrastive {
            margin: None,
            hinge_variant: None,
        }
    }
}

/// Resolved loss configuration with defaults filled in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    Contrastive(ContrastiveConfig),
    Angular(AngularConfig),
}

impl LossConfig {
    pub fn resolve(&self) -> LossKind {
        match *self {
            LossConfig::Contrastive { margin, hinge_variant } => {
                let d = ContrastiveConfig::default();
                LossKind::Contrastive(ContrastiveConfig {
                    margin: margin.unwrap_or(d.margin),
                    hinge_variant: hinge_variant.unwrap_or(d.hinge_variant),
                })
            }
            LossConfig::Angular {
                alpha_degrees,
                formula_variant,
            } => {
                let d = AngularConfig::default();
                LossKind::Angular(AngularConfig {
                    alpha_degrees: alpha_degrees.unwrap_or(d.alpha_degrees),
                    formula_variant: formula_variant.unwrap_or(d.formula_variant),
                })
            }
        }
    }
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossKind::Contrastive(c) => c.validate(),
            LossKind::Angular(a) => a.validate(),
        }
    }
}

/// A pair or triplet expressed as embedding row indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSample {
    Pair { query: usize, candidate: usize, label: PairLabel },
    Triplet { anchor: usize, positive: usize, negative: usize },
}

/// Samples addressed by item id.
#[derive(Clone, Copy, Debug)]
pub enum SampleBatch<'a> {
    Pairs(&'a [PairSample]),
    Triplets(&'a [TripletSample]),
}

/// Mean loss over a batch and its gradient for every embedding row.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    pub mean_loss: f64,
    /// `[rows, dim]`, zero for rows no sample touched.
    pub grads: Tensor<f64>,
}

fn row_f64<T: Scalar>(embeddings: &Tensor<T>, i: usize) -> Result<Vec<f64>> {
    if i >= embeddings.rows() {
        return Err(Error::Lookup(format!("row {i}")));
    }
    Ok(embeddings.row(i).iter().map(|v| v.as_f64()).collect())
}

/// Batch loss over row-indexed samples. Gradients are accumulated in
/// sample order and divided by the sample count.
pub fn batch_loss_rows<T: Scalar>(
    embeddings: &Tensor<T>,
    samples: &[RowSample],
    loss: &LossKind,
    metric: DistanceMetric,
) -> Result<BatchLoss> {
    if samples.is_empty() {
        return Err(Error::Data("batch loss over an empty sample list".into()));
    }
    embeddings.expect_rank(2, "batch embeddings")?;
    let dim = embeddings.row_len();
    let mut grads = Tensor::<f64>::zeros([embeddings.rows(), dim]);
    let mut total = 0.0;
    let acc = |grads: &mut Tensor<f64>, row: usize, g: &[f64]| {
        for (a, b) in grads.row_mut(row).iter_mut().zip(g) {
            *a += b;
        }
    };
    for s in samples {
        match (*s, loss) {
            (RowSample::Pair { query, candidate, label }, LossKind::Contrastive(cfg)) => {
                let r = contrastive_loss(
                    &row_f64(embeddings, query)?,
                    &row_f64(embeddings, candidate)?,
                    label,
                    cfg,
                    metric,
                )?;
                total += r.loss;
                acc(&mut grads, query, &r.grad_query);
                acc(&mut grads, candidate, &r.grad_candidate);
            }
            (RowSample::Triplet { anchor, positive, negative }, LossKind::Angular(cfg)) => {
                let r = angular_loss(
                    &row_f64(embeddings, anchor)?,
                    &row_f64(embeddings, positive)?,
                    &row_f64(embeddings, negative)?,
                    cfg,
                    metric,
                )?;
                total += r.loss;
                acc(&mut grads, anchor, &r.grad_anchor);
                acc(&mut grads, positive, &r.grad_positive);
                acc(&mut grads, negative, &r.grad_negative);
            }
            (RowSample::Pair { .. }, LossKind::Angular(_)) => {
                return Err(Error::Config("angular loss needs triplet samples".into()))
            }
            (RowSample::Triplet { .. }, LossKind::Contrastive(_)) => {
                return Err(Error::Config("contrastive loss needs pair samples".into()))
            }
        }
    }
    let n = samples.len() as f64;
    grads.scale(1.0 / n);
    Ok(BatchLoss {
        mean_loss: total / n,
        grads,
    })
}

/// Batch loss over id-addressed samples; `ids[i]` names embedding row `i`.
pub fn batch_loss<T: Scalar>(
    ids: &[String],
    embeddings: &Tensor<T>,
    samples: SampleBatch<'_>,
    loss: &LossKind,
    metric: DistanceMetric,
) -> Result<BatchLoss> {
    if ids.len() != embeddings.rows() {
        return Err(Error::Dimension(format!(
            "{} ids for {} embedding rows",
            ids.len(),
            embeddings.rows()
        )));
    }
    let lookup: std::collections::HashMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let row = |id: &str| lookup.get(id).copied().ok_or_else(|| Error::Lookup(id.to_string()));
    let rows = match samples {
        SampleBatch::Pairs(p) => p
            .iter()
            .map(|s| {
                Ok(RowSample::Pair {
                    query: row(&s.query_id)?,
                    candidate: row(&s.candidate_id)?,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        SampleBatch::Triplets(t) => t
            .iter()
            .map(|s| {
                Ok(RowSample::Triplet {
                    anchor: row(&s.anchor_id)?,
                    positive: row(&s.positive_id)?,
                    negative: row(&s.negative_id)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    batch_loss_rows(embeddings, &rows, loss, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: DistanceMetric = DistanceMetric::euclidean();

    fn contrastive(v: HingeVariant) -> ContrastiveConfig {
        ContrastiveConfig {
            margin: 1.0,
            hinge_variant: v,
        }
    }

    #[test]
    fn similar_pair_values() {
        let r = contrastive_loss(&[1.0, 2.0], &[1.0, 2.0], PairLabel::Similar, &ContrastiveConfig::default(), E).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grad_query.iter().chain(&r.grad_candidate).all(|&g| g == 0.0));
        let r = contrastive_loss(&[0.0, 0.0], &[2.0, 0.0], PairLabel::Similar, &ContrastiveConfig::default(), E).unwrap();
        assert_eq!(r.loss, 2.0);
    }

    #[test]
    fn dissimilar_pair_values() {
        // D² = 1.5 > m: inactive hinge.
        let a = [0.0, 0.0];
        let b = [1.5f64.sqrt(), 0.0];
        let r = contrastive_loss(&a, &b, PairLabel::Dissimilar, &contrastive(HingeVariant::AsWritten), E).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grad_query.iter().all(|&g| g == 0.0));
        for v in [HingeVariant::AsWritten, HingeVariant::SquaredHinge] {
            let r = contrastive_loss(&a, &a, PairLabel::Dissimilar, &contrastive(v), E).unwrap();
            assert_eq!(r.loss, 0.5, "{v:?}");
        }
    }

    #[test]
    fn angular_hand_values() {
        let cfg = AngularConfig::default();
        let r = angular_loss(&[0.0, 0.0], &[2.0, 0.0], &[1.0, 2.0], &cfg, E).unwrap();
        assert_eq!(r.loss, 0.0);
        let r = angular_loss(&[0.0, 0.0], &[2.0, 0.0], &[1.0, 0.5], &cfg, E).unwrap();
        assert!((r.loss - 3.0).abs() < 1e-12, "{}", r.loss);
        let same = angular_loss(&[0.3, 0.1], &[0.3, 0.1], &[5.0, 5.0], &cfg, E).unwrap();
        assert_eq!(same.loss, 0.0);
    }

    #[test]
    fn angular_as_written_vanishes_for_euclidean_45() {
        // D(xa, xc) = D(xa, xp)/2, so the literal form is D²(1 − tan²α) = 0 at 45°.
        let cfg = AngularConfig {
            alpha_degrees: 45.0,
            formula_variant: AngularVariant::AsWritten,
        };
        let r = angular_loss(&[0.0, 1.0], &[3.0, -1.0], &[9.0, 9.0], &cfg, E).unwrap();
        assert!(r.loss.abs() < 1e-12);
        let narrow = AngularConfig { alpha_degrees: 20.0, ..cfg };
        let r = angular_loss(&[0.0, 1.0], &[3.0, -1.0], &[9.0, 9.0], &narrow, E).unwrap();
        assert!(r.loss > 0.0);
        assert!(r.grad_negative.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(ContrastiveConfig { margin: 0.0, ..Default::default() }.validate().is_err());
        assert!(AngularConfig { alpha_degrees: 90.0, ..Default::default() }.validate().is_err());
        assert!(AngularConfig { alpha_degrees: 0.0, ..Default::default() }.validate().is_err());
        assert!(TripletSample::new("a", "a", "b").is_err());
    }

    #[test]
    fn batch_cases() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let emb = Tensor::new([4, 1], vec![0.0f64, 1.0, 0.0, 3f64.sqrt()]).unwrap();
        let cfg = LossKind::Contrastive(ContrastiveConfig::default());
        assert!(batch_loss(&ids, &emb, SampleBatch::Pairs(&[]), &cfg, E).is_err());
        // ½·1 = 0.5 and ½·3 = 1.5 → mean 1.0; then losses 1 and 3 → 2.
        let one = [PairSample::new("a", "b", PairLabel::Similar)];
        let single = batch_loss(&ids, &emb, SampleBatch::Pairs(&one), &cfg, E).unwrap();
        let direct = contrastive_loss(&[0.0], &[1.0], PairLabel::Similar, &ContrastiveConfig::default(), E).unwrap();
        assert_eq!(single.mean_loss, direct.loss);
        assert_eq!(single.grads.row(0), direct.grad_query.as_slice());

        let emb2 = Tensor::new([4, 1], vec![0.0f64, 2f64.sqrt(), 0.0, 6f64.sqrt()]).unwrap();
        let two = [
            PairSample::new("a", "b", PairLabel::Similar),
            PairSample::new("c", "d", PairLabel::Similar),
        ];
        let r = batch_loss(&ids, &emb2, SampleBatch::Pairs(&two), &cfg, E).unwrap();
        assert!((r.mean_loss - 2.0).abs() < 1e-12);

        let bad = [PairSample::new("a", "zz", PairLabel::Similar)];
        assert!(matches!(batch_loss(&ids, &emb, SampleBatch::Pairs(&bad), &cfg, E), Err(Error::Lookup(_))));
    }

    proptest! {
        #[test]
        fn losses_non_negative(
            a in proptest::collection::vec(-2.0f64..2.0, 3),
            b in proptest::collection::vec(-2.0f64..2.0, 3),
            c in proptest::collection::vec(-2.0f64..2.0, 3),
            k in prop_oneof![Just(0.25), Just(1.0), Just(2.0)],
            dissimilar in any::<bool>(),
        ) {
            let m = DistanceMetric::new(k).unwrap();
            let label = if dissimilar { PairLabel::Dissimilar } else { PairLabel::Similar };
            for v in [HingeVariant::AsWritten, HingeVariant::SquaredHinge] {
                let r = contrastive_loss(&a, &b, label, &contrastive(v), m).unwrap();
                prop_assert!(r.loss >= 0.0);
                prop_assert!(r.grad_query.iter().all(|g| g.is_finite()));
            }
            let t = angular_loss(&a, &b, &c, &AngularConfig::default(), m).unwrap();
            prop_assert!(t.loss >= 0.0);
        }

        #[test]
        fn angular_non_increasing_in_negative_distance(
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            p in proptest::collection::vec(-1.0f64..1.0, 3),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
            t1 in 0.0f64..2.0,
            dt in 0.0f64..2.0,
        ) {
            // Move the negative away from the center along a fixed ray.
            let c: Vec<f64> = a.iter().zip(&p).map(|(x, y)| 0.5 * (x + y)).collect();
            let at = |t: f64| -> Vec<f64> { c.iter().zip(&dir).map(|(ci, di)| ci + t * di).collect() };
            let cfg = AngularConfig::default();
            let near = angular_loss(&a, &p, &at(t1), &cfg, E).unwrap().loss;
            let far = angular_loss(&a, &p, &at(t1 + dt), &cfg, E).unwrap().loss;
            prop_assert!(far <= near + 1e-12);
        }

        #[test]
        fn larger_alpha_never_increases_loss(
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            p in proptest::collection::vec(-1.0f64..1.0, 4),
            n in proptest::collection::vec(-1.0f64..1.0, 4),
            lo in 1.0f64..60.0,
            extra in 0.0f64..29.0,
        ) {
            let small = AngularConfig { alpha_degrees: lo, ..Default::default() };
            let big = AngularConfig { alpha_degrees: lo + extra, ..Default::default() };
            let l_small = angular_loss(&a, &p, &n, &small, E).unwrap().loss;
            let l_big = angular_loss(&a, &p, &n, &big, E).unwrap().loss;
            prop_assert!(l_big <= l_small + 1e-12);
        }

        #[test]
        fn inactive_hinge_has_zero_gradient(
            a in proptest::collection::vec(-3.0f64..3.0, 4),
            b in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let d = crate::distance::lk_distance(&a, &b, E).unwrap();
            let aw = contrastive_loss(&a, &b, PairLabel::Dissimilar, &contrastive(HingeVariant::AsWritten), E).unwrap();
            if d * d >= 1.0 {
                prop_assert_eq!(aw.loss, 0.0);
                prop_assert!(aw.grad_query.iter().all(|&g| g == 0.0));
            }
            let sq = contrastive_loss(&a, &b, PairLabel::Dissimilar, &contrastive(HingeVariant::SquaredHinge), E).unwrap();
            if d >= 1.0 {
                prop_assert_eq!(sq.loss, 0.0);
                prop_assert!(sq.grad_candidate.iter().all(|&g| g == 0.0));
            }
        }
    }
}
