use std::fmt;
use std::str::FromStr;

use super::{missing_cache, Gradients, LayerCache};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pointwise neuron nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Sigmoid,
    Relu,
    Softplus,
    Identity,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Softplus => {
                if x > 30.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            ActivationKind::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation `x`; relu'(0) is 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Softplus => sigmoid(x),
            ActivationKind::Identity => 1.0,
        }
    }

    pub fn forward(self, z: &Tensor) -> Tensor {
        z.map(|x| self.apply(x))
    }

    pub fn forward_cached(self, z: &Tensor, cache: &mut LayerCache) -> Tensor {
        *cache = LayerCache::Input(z.clone());
        self.forward(z)
    }

    pub fn backward(self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        let LayerCache::Input(z) = cache else {
            return Err(missing_cache("activation"));
        };
        let input = z.zip_map(upstream, |x, g| g * self.derivative(x))?;
        Ok(Gradients {
            input,
            params: Vec::new(),
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Identity => "identity",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "relu" => Ok(ActivationKind::Relu),
            "softplus" => Ok(ActivationKind::Softplus),
            "identity" => Ok(ActivationKind::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown activation {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(ActivationKind::Sigmoid.apply(0.0), 0.5);
        let r = ActivationKind::Relu.forward(&Tensor::from_slice(&[-1.0, 0.0, 2.0]));
        assert_eq!(r.data(), &[0.0, 0.0, 2.0]);
        assert!((ActivationKind::Softplus.apply(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn finite_at_extremes() {
        for kind in [
            ActivationKind::Sigmoid,
            ActivationKind::Relu,
            ActivationKind::Softplus,
            ActivationKind::Identity,
        ] {
            for x in [-1e300, -745.0, -40.0, 0.0, 40.0, 745.0, 1e300] {
                assert!(kind.apply(x).is_finite(), "{kind}({x})");
                assert!(kind.derivative(x).is_finite(), "{kind}'({x})");
            }
        }
    }

    #[test]
    fn softplus_branches_meet() {
        let below = 30.0f64.exp().ln_1p();
        let above = 30.0 + (-30.0f64).exp().ln_1p();
        assert!((below - above).abs() < 1e-12);
        assert!((ActivationKind::Softplus.apply(100.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        assert_eq!(ActivationKind::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let err = ActivationKind::Relu
            .backward(&LayerCache::Empty, &Tensor::zeros(&[1, 2]))
            .unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }
}
