use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0, 1), got {}", self.rho)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// One RMSProp update, in place:
/// `s ← ρ·s + (1−ρ)·g²`, `θ ← θ − lr·g/√(s + ε)`.
///
/// Every gradient is checked before anything is modified, so a non-finite
/// gradient leaves `params` and `state` untouched.
pub fn rmsprop_step(
    params: &mut ParamSet<f32>,
    grads: &ParamSet<f32>,
    state: &mut ParamSet<f32>,
    cfg: &RmsPropConfig,
) -> Result<()> {
    for (name, g) in grads.iter() {
        g.check_finite(&format!("gradient of {name}"))
            .map_err(|_| Error::Numeric(format!("non-finite gradient for {name}; step aborted")))?;
        let p = params.get(name)?;
        let s = state.get(name)?;
        if p.shape() != g.shape() || s.shape() != g.shape() {
            return Err(Error::Dimension(format!(
                "{name}: param {:?}, grad {:?}, state {:?}",
                p.shape(),
                g.shape(),
                s.shape()
            )));
        }
    }
    let (lr, rho, eps) = (cfg.learning_rate, cfg.rho, cfg.epsilon);
    for (name, g) in grads.iter() {
        let s = state.get_mut(name).expect("checked above");
        let p = params.get_mut(name).expect("checked above");
        for ((pv, sv), &gv) in p.data_mut().iter_mut().zip(s.data_mut()).zip(g.data()) {
            let gv = f64::from(gv);
            let sn = rho * f64::from(*sv) + (1.0 - rho) * gv * gv;
            *sv = sn as f32;
            if gv != 0.0 {
                *pv = (f64::from(*pv) - lr * gv / (sn + eps).sqrt()) as f32;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use std::collections::BTreeMap;

    fn single(v: f32) -> ParamSet<f32> {
        ParamSet::new(BTreeMap::from([("w".to_string(), Tensor::new([1], vec![v]).unwrap())]))
    }

    fn value(p: &ParamSet<f32>) -> f32 {
        p.get("w").unwrap().data()[0]
    }

    #[test]
    fn first_step_hand_value() {
        let mut p = single(0.0);
        let mut s = single(0.0);
        let cfg = RmsPropConfig {
            learning_rate: 0.01,
            rho: 0.9,
            epsilon: 0.0,
        };
        rmsprop_step(&mut p, &single(1.0), &mut s, &cfg).unwrap();
        // s = 0.1, Δ = 0.01/√0.1
        assert!((value(&p) + 0.031_622_776).abs() < 1e-7, "{}", value(&p));
        assert!((value(&s) - 0.1).abs() < 1e-7);
    }

    #[test]
    fn zero_grad_decays_state_only() {
        let mut p = single(0.7);
        let mut s = single(0.5);
        rmsprop_step(&mut p, &single(0.0), &mut s, &RmsPropConfig::default()).unwrap();
        assert_eq!(value(&p), 0.7);
        assert_eq!(value(&s), (0.9f64 * 0.5) as f32);
    }

    #[test]
    fn deterministic_and_aborts_on_nan() {
        let run = || {
            let mut p = single(0.3);
            let mut s = single(0.2);
            rmsprop_step(&mut p, &single(-0.4), &mut s, &RmsPropConfig::default()).unwrap();
            (value(&p).to_bits(), value(&s).to_bits())
        };
        assert_eq!(run(), run());

        let mut p = single(0.3);
        let mut s = single(0.2);
        let err = rmsprop_step(&mut p, &single(f32::NAN), &mut s, &RmsPropConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "numeric");
        assert_eq!((value(&p), value(&s)), (0.3, 0.2));
    }

    #[test]
    fn validation() {
        let bad = |learning_rate, rho, epsilon| RmsPropConfig { learning_rate, rho, epsilon }.validate().is_err();
        assert!(bad(-1.0, 0.9, 1e-8));
        assert!(bad(1e-3, 1.0, 1e-8));
        assert!(bad(1e-3, 0.0, 1e-8));
        assert!(!bad(0.0, 0.9, 1e-8));
    }
}
