//! JSON run configuration shared by the command-line tools.
//!
//! ```json
//! { "net": {...}, "sampler": {...}, "train": {...}, "metric": 0.25 }
//! ```
//!
//! Every section is optional. Loading reports all unknown keys and all
//! invalid values at once instead of stopping at the first.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::distance::DistanceMetric;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::net::MultiScaleNetConfig;
use crate::sampling::{SamplerConfig, ScorerSpec};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` means the desk-scale network for the data's image shape.
    pub net: Option<MultiScaleNetConfig>,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    /// Exponent `k` of the retrieval metric.
    pub metric: DistanceMetric,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            net: None,
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            metric: DistanceMetric::new(DistanceMetric::DEFAULT_FRACTIONAL).expect("valid default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let mut problems = Vec::new();
        unknown_keys(&value, &schema(), "", &mut problems);
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The network for images of `shape`.
    pub fn net_for(&self, shape: [usize; 3]) -> Result<MultiScaleNetConfig> {
        match &self.net {
            Some(n) if n.input_shape != shape => Err(Error::Dimension(format!(
                "config network expects {:?} images, data has {shape:?}",
                n.input_shape
            ))),
            Some(n) => Ok(n.clone()),
            None => Ok(MultiScaleNetConfig::desk_scale(shape)),
        }
    }

    /// Checks every section and reports all problems together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Some(n) = &self.net {
            if let Err(e) = n.validate() {
                problems.push(format!("net: {e}"));
            }
        }
        if let Err(e) = self.sampler.validate() {
            problems.push(format!("sampler: {e}"));
        }
        problems.extend(self.train.problems().into_iter().map(|p| format!("train: {p}")));
        match problems.len() {
            0 => Ok(()),
            _ => Err(Error::ConfigList(problems)),
        }
    }
}

/// Union of the keys every variant of the config can carry.
fn schema() -> Value {
    let mut variants = vec![RunConfig {
        net: Some(MultiScaleNetConfig::default()),
        ..RunConfig::default()
    }];
    let mut alt = variants[0].clone();
    alt.train.loss = LossConfig::Angular {
        alpha_degrees: None,
        formula_variant: None,
    };
    alt.sampler.scorers = vec![
        ScorerSpec::Embedding {
            checkpoint: "x".into(),
        },
        ScorerSpec::ColorHistogram { bins: 2 },
    ];
    alt.train.steps_per_epoch = Some(1);
    alt.train.lr_decay = Some(1.0);
    variants.push(alt);
    let mut out = Value::Null;
    for v in variants {
        merge(&mut out, serde_json::to_value(v).expect("config serializes"));
    }
    out
}

fn merge(into: &mut Value, from: Value) {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k).or_insert(Value::Null), v);
            }
        }
        (a @ Value::Null, b) => *a = b,
        (Value::Array(a), Value::Array(b)) => {
            let mut item = Value::Null;
            for v in a.drain(..).chain(b) {
                merge(&mut item, v);
            }
            a.push(item);
        }
        _ => {}
    }
}

fn unknown_keys(value: &Value, schema: &Value, path: &str, out: &mut Vec<String>) {
    match (value, schema) {
        (Value::Object(v), Value::Object(s)) => check_object(v, s, path, out),
        (Value::Array(v), Value::Array(s)) if !s.is_empty() => {
            for (i, item) in v.iter().enumerate() {
                unknown_keys(item, &s[0], &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn check_object(v: &Map<String, Value>, s: &Map<String, Value>, path: &str, out: &mut Vec<String>) {
    for (k, child) in v {
        let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match s.get(k) {
            Some(sub) => unknown_keys(child, sub, &p, out),
            None => out.push(format!("unknown key `{p}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trips() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections() {
        let c = RunConfig::from_json(
            r#"{"train": {"epochs": 3, "loss": {"kind": "angular", "alpha_degrees": 36}},
                "sampler": {"scorers": [{"kind": "color_histogram", "bins": 8}]},
                "metric": 2}"#,
        )
        .unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.metric, DistanceMetric::euclidean());
        assert_eq!(c.sampler.n_candidates, 100);
    }

    #[test]
    fn reports_every_unknown_key() {
        let err = RunConfig::from_json(
            r#"{"trian": {}, "train": {"epoch": 1, "loss": {"kind": "angular", "alpha": 1}},
                "net": {"branches": [{"conv_layers": [{"filter": 1}]}]}}"#,
        )
        .unwrap_err();
        let Error::ConfigList(list) = err else { panic!("{err}") };
        let joined = list.join("\n");
        for key in ["trian", "train.epoch", "train.loss.alpha", "net.branches[0].conv_layers[0].filter"] {
            assert!(joined.contains(&format!("`{key}`")), "{joined}");
        }
        assert_eq!(list.len(), 4);
    }

    #[test]
    fn reports_every_invalid_value() {
        let err = RunConfig::from_json(
            r#"{"train": {"learning_rate": -1, "epochs": 0, "rho": 2},
                "sampler": {"in_class_fraction": 1.5}}"#,
        )
        .unwrap_err();
        let Error::ConfigList(list) = err else { panic!("{err}") };
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(RunConfig::from_json(r#"{"metric": 0}"#).is_err());
    }

    #[test]
    fn net_shape_must_match_data() {
        let c = RunConfig::default();
        assert_eq!(c.net_for([1, 28, 28]).unwrap().final_embed_dim, 64);
        let fixed = RunConfig {
            net: Some(MultiScaleNetConfig::desk_scale([3, 32, 32])),
            ..RunConfig::default()
        };
        assert!(fixed.net_for([1, 28, 28]).is_err());
    }
}
