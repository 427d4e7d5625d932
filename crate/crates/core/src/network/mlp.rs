use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths of a fully-connected network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    /// Number of fully-connected layers, at least 1. `depth = 1` is a single
    /// affine map from input to output.
    pub depth: usize,
    pub output: usize,
}

impl MlpShape {
    pub fn new(input: usize, hidden: usize, depth: usize, output: usize) -> Self {
        MlpShape {
            input,
            hidden,
            depth,
            output,
        }
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|l| {
                let fin = if l == 0 { self.input } else { self.hidden };
                let fout = if l + 1 == self.depth { self.output } else { self.hidden };
                (fin, fout)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.input == 0 || self.output == 0 {
            return Err(Error::invalid("MLP needs depth, input and output of at least 1"));
        }
        if self.depth > 1 && self.hidden == 0 {
            return Err(Error::invalid("hidden width must be at least 1"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_out x fan_in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Fully-connected network, Softplus on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    shape: MlpShape,
    layers: Vec<Layer>,
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Weights `Normal(0, 2 / fan_in)`, biases zero.
    pub fn init_random<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let layers = shape
            .layer_dims()
            .into_iter()
            .map(|(fin, fout)| {
                let normal = Normal::new(0.0, (2.0 / fin as f64).sqrt()).expect("positive std");
                Layer {
                    weight: Array2::from_shape_simple_fn((fout, fin), || normal.sample(rng)),
                    bias: Array1::zeros(fout),
                }
            })
            .collect();
        Ok(Mlp { shape, layers })
    }

    pub fn zeros(shape: MlpShape) -> Result<Self> {
        shape.validate()?;
        let layers = shape
            .layer_dims()
            .into_iter()
            .map(|(fin, fout)| Layer {
                weight: Array2::zeros((fout, fin)),
                bias: Array1::zeros(fout),
            })
            .collect();
        Ok(Mlp { shape, layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::invalid("MLP needs at least one layer"))?;
        let input = first.weight.ncols();
        let output = layers.last().expect("non-empty").weight.nrows();
        let hidden = if layers.len() > 1 { first.weight.nrows() } else { 0 };
        let shape = MlpShape::new(input, hidden, layers.len(), output);
        for (l, ((fin, fout), layer)) in shape.layer_dims().into_iter().zip(&layers).enumerate() {
            if layer.weight.dim() != (fout, fin) || layer.bias.len() != fout {
                return Err(Error::invalid(format!("layer {l} dimensions do not chain")));
            }
        }
        Ok(Mlp { shape, layers })
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input
    }

    pub fn output_dim(&self) -> usize {
        self.shape.output
    }

    pub fn param_count(&self) -> usize {
        self.shape.param_count()
    }

    /// Per layer: weights row-major, then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.write_params(&mut out);
        out
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} MLP parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let nw = layer.weight.len();
            layer
                .weight
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = layer.bias.len();
            layer
                .bias
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn layer_dims_chain() {
        let s = MlpShape::new(64, 256, 4, 1);
        assert_eq!(s.layer_dims(), vec![(64, 256), (256, 256), (256, 256), (256, 1)]);
        assert_eq!(MlpShape::new(3, 0, 1, 1).layer_dims(), vec![(3, 1)]);
    }

    #[test]
    fn init_is_seeded() {
        let s = MlpShape::new(8, 16, 3, 1);
        let a = Mlp::init_random(s.clone(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = Mlp::init_random(s.clone(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = Mlp::init_random(s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn init_variance_is_fan_in_scaled() {
        let s = MlpShape::new(50, 400, 2, 1);
        let m = Mlp::init_random(s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let w = &m.layers()[0].weight;
        assert!(w.len() >= 10_000);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 2.0 / 50.0;
        assert!((var / target - 1.0).abs() < 0.2, "var {var} target {target}");
    }

    #[test]
    fn params_round_trip() {
        let s = MlpShape::new(4, 5, 3, 2);
        let m = Mlp::init_random(s, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let p = m.params();
        assert_eq!(p.len(), 4 * 5 + 5 + 5 * 5 + 5 + 5 * 2 + 2);
        let mut z = Mlp::zeros(m.shape().clone()).unwrap();
        z.set_params(&p).unwrap();
        assert_eq!(z, m);
        assert!(z.set_params(&p[1..]).is_err());
    }

    #[test]
    fn from_layers_checks_chain() {
        let bad = vec![
            Layer {
                weight: Array2::zeros((4, 3)),
                bias: Array1::zeros(4),
            },
            Layer {
                weight: Array2::zeros((1, 5)),
                bias: Array1::zeros(1),
            },
        ];
        assert!(Mlp::from_layers(bad).is_err());
    }
}
