use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Sigmoid,
    Relu,
    Elu { alpha: f64 },
    LeakyRelu { lambda: f64 },
    /// `tansig` is the same function under another name.
    #[serde(alias = "tansig")]
    Tanh,
    Linear,
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::Elu { alpha } if !(alpha > 0.0) => {
                Err(Error::Config(format!("elu alpha {alpha} must be > 0")))
            }
            ActivationKind::LeakyRelu { lambda } if !(lambda > 0.0 && lambda < 1.0) => {
                Err(Error::Config(format!("leaky relu slope {lambda} must be in (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            ActivationKind::Relu => v.max(0.0),
            ActivationKind::Elu { alpha } => {
                if v >= 0.0 {
                    v
                } else {
                    alpha * v.exp_m1()
                }
            }
            ActivationKind::LeakyRelu { lambda } => (lambda * v).max(v),
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Linear => v,
        }
    }

    /// Derivative with respect to the pre-activation `v`, given `out = apply(v)`.
    #[inline]
    pub fn derivative(&self, v: f64, out: f64) -> f64 {
        match *self {
            ActivationKind::Sigmoid => out * (1.0 - out),
            ActivationKind::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Elu { alpha } => {
                if v >= 0.0 {
                    1.0
                } else {
                    out + alpha
                }
            }
            ActivationKind::LeakyRelu { lambda } => {
                if v > 0.0 {
                    1.0
                } else {
                    lambda
                }
            }
            ActivationKind::Tanh => 1.0 - out * out,
            ActivationKind::Linear => 1.0,
        }
    }
}

pub fn activation(kind: ActivationKind, v: f64) -> f64 {
    kind.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(activation(ActivationKind::Tanh, 0.0), 0.0);
        assert_eq!(activation(ActivationKind::Sigmoid, 0.0), 0.5);
        assert_eq!(activation(ActivationKind::Relu, -1.0), 0.0);
        assert!((activation(ActivationKind::LeakyRelu { lambda: 0.01 }, -1.0) + 0.01).abs() < 1e-15);
        let elu = ActivationKind::Elu { alpha: 0.7 };
        assert_eq!(activation(elu, 2.5), 2.5);
        assert!((activation(elu, -1e3) + 0.7).abs() < 1e-12);
        assert_eq!(activation(ActivationKind::Linear, -3.25), -3.25);
    }

    #[test]
    fn tanh_matches_exponential_form() {
        for i in -40..=40 {
            let v = i as f64 * 0.1;
            let e = (2.0 * v).exp();
            assert!((activation(ActivationKind::Tanh, v) - (e - 1.0) / (e + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kinds = [
            ActivationKind::Sigmoid,
            ActivationKind::Tanh,
            ActivationKind::Elu { alpha: 1.3 },
            ActivationKind::LeakyRelu { lambda: 0.2 },
            ActivationKind::Relu,
            ActivationKind::Linear,
        ];
        for kind in kinds {
            for v in [-2.0, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let fd = (kind.apply(v + h) - kind.apply(v - h)) / (2.0 * h);
                let an = kind.derivative(v, kind.apply(v));
                assert!((fd - an).abs() < 1e-8, "{kind:?} at {v}");
            }
        }
    }

    #[test]
    fn parameter_bounds() {
        assert!(ActivationKind::Elu { alpha: 0.0 }.validate().is_err());
        assert!(ActivationKind::LeakyRelu { lambda: 1.0 }.validate().is_err());
        assert!(ActivationKind::LeakyRelu { lambda: 0.3 }.validate().is_ok());
    }

    #[test]
    fn tansig_alias() {
        let k: ActivationKind = serde_json::from_str(r#"{"kind":"tansig"}"#).unwrap();
        assert_eq!(k, ActivationKind::Tanh);
        let k: ActivationKind = serde_json::from_str(r#"{"kind":"elu","alpha":1.0}"#).unwrap();
        assert_eq!(k, ActivationKind::Elu { alpha: 1.0 });
    }
}
