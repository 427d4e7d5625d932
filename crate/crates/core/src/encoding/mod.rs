//! Positional encoders: the trainable spline encoding plus the identity and
//! random-Fourier baselines.

pub mod basis;
pub mod fourier;
pub mod spline;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use basis::bspline_basis;
pub use fourier::FourierEncoding;
pub use spline::{param_count, EncodingGrads, SplineConfig, SplineEncoding};

use crate::error::{Error, Result};

/// Serializable description of an encoder, excluding trainable values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Spline(SplineConfig),
    Fourier { dim: usize, frequencies: Vec<f64> },
    Identity { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Spline(SplineEncoding),
    Fourier(FourierEncoding),
    Identity { dim: usize },
}

impl Encoder {
    pub fn identity(dim: usize) -> Self {
        Encoder::Identity { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Spline(s) => s.dim(),
            Encoder::Fourier(f) => f.dim(),
            Encoder::Identity { dim } => *dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Encoder::Spline(s) => s.channels(),
            Encoder::Fourier(f) => f.out_dim(),
            Encoder::Identity { dim } => *dim,
        }
    }

    /// Number of trainable values.
    pub fn param_count(&self) -> usize {
        match self {
            Encoder::Spline(s) => s.param_count(),
            _ => 0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Encoder::Spline(_) => "spe",
            Encoder::Fourier(_) => "fpe",
            Encoder::Identity { .. } => "identity",
        }
    }

    pub fn as_spline(&self) -> Option<&SplineEncoding> {
        match self {
            Encoder::Spline(s) => Some(s),
            _ => None,
        }
    }

    pub fn spec(&self) -> EncoderSpec {
        match self {
            Encoder::Spline(s) => EncoderSpec::Spline(s.config().clone()),
            Encoder::Fourier(f) => EncoderSpec::Fourier {
                dim: f.dim(),
                frequencies: f.frequencies().to_vec(),
            },
            Encoder::Identity { dim } => EncoderSpec::Identity { dim: *dim },
        }
    }

    /// Rebuilds an encoder from its spec and trainable values.
    pub fn from_spec(spec: &EncoderSpec, params: &[f64]) -> Result<Self> {
        match spec {
            EncoderSpec::Spline(cfg) => {
                cfg.validate()?;
                let nw = cfg.projections * (cfg.segments + 1) * cfg.channels;
                let na = cfg.projections * (cfg.dim - 1);
                if params.len() != nw + na {
                    return Err(Error::invalid(format!(
                        "spline encoder expects {} parameters, got {}",
                        nw + na,
                        params.len()
                    )));
                }
                Ok(Encoder::Spline(SplineEncoding::from_angles(
                    cfg.clone(),
                    params[..nw].to_vec(),
                    params[nw..].to_vec(),
                )?))
            }
            EncoderSpec::Fourier { dim, frequencies } => {
                expect_no_params(params)?;
                Ok(Encoder::Fourier(FourierEncoding::new(*dim, frequencies.clone())?))
            }
            EncoderSpec::Identity { dim } => {
                expect_no_params(params)?;
                Ok(Encoder::Identity { dim: *dim })
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Encoder::Spline(s) => s.params(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        if let Encoder::Spline(s) = self {
            s.write_params(out);
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        match self {
            Encoder::Spline(s) => s.set_params(params),
            _ => expect_no_params(params),
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Encoder::Spline(s) => s.encode(x),
            Encoder::Fourier(f) => f.encode(x),
            Encoder::Identity { dim } => {
                if x.len() != *dim {
                    return Err(Error::invalid("point dimension does not match encoder"));
                }
                Ok(x.to_vec())
            }
        }
    }

    /// `out_dim x d` Jacobian.
    pub fn encode_jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        match self {
            Encoder::Spline(s) => s.encode_jacobian(x),
            Encoder::Fourier(f) => f.encode_jacobian(x),
            Encoder::Identity { dim } => {
                if x.len() != *dim {
                    return Err(Error::invalid("point dimension does not match encoder"));
                }
                Ok(Array2::eye(*dim))
            }
        }
    }

    /// Encodes a batch of `B` points (`B x d` row-major).
    ///
    /// The result has `B (1 + t)` rows, where `t = d` with tangents and `0`
    /// without: rows `0..B` hold Φ(x_p), rows `(1+j)B..(2+j)B` hold ∂Φ/∂x_j.
    pub fn encode_batch(&self, points: &[f64], tangents: bool) -> Array2<f64> {
        let d = self.dim();
        let b = points.len() / d;
        let o = self.out_dim();
        let blocks = if tangents { 1 + d } else { 1 };
        let mut out = Array2::zeros((b * blocks, o));
        let mut jac = vec![0.0; o * d];
        let mut val = vec![0.0; o];
        for (p, x) in points.chunks_exact(d).enumerate() {
            let jac_buf = tangents.then_some(jac.as_mut_slice());
            match self {
                Encoder::Spline(s) => s.encode_into(x, &mut val, jac_buf),
                Encoder::Fourier(f) => f.encode_into(x, &mut val, jac_buf),
                Encoder::Identity { .. } => {
                    val.copy_from_slice(x);
                    if let Some(j) = jac_buf {
                        j.iter_mut().for_each(|v| *v = 0.0);
                        for i in 0..d {
                            j[i * d + i] = 1.0;
                        }
                    }
                }
            }
            out.row_mut(p).as_slice_mut().expect("contiguous").copy_from_slice(&val);
            if tangents {
                for j in 0..d {
                    let mut row = out.row_mut((1 + j) * b + p);
                    for c in 0..o {
                        row[c] = jac[c * d + j];
                    }
                }
            }
        }
        out
    }

    /// Accumulates the parameter gradient for upstream `grad` laid out as in
    /// [`encode_batch`](Self::encode_batch) into `out`.
    pub fn backward_batch(&self, points: &[f64], grad: &Array2<f64>, tangents: bool, out: &mut [f64]) {
        let Encoder::Spline(s) = self else {
            return;
        };
        let d = s.dim();
        let b = points.len() / d;
        let c = s.channels();
        let mut gj = vec![0.0; c * d];
        for (p, x) in points.chunks_exact(d).enumerate() {
            let gv = grad.row(p);
            let gv = gv.as_slice().expect("contiguous");
            if tangents {
                for j in 0..d {
                    let row = grad.row((1 + j) * b + p);
                    for ch in 0..c {
                        gj[ch * d + j] = row[ch];
                    }
                }
                s.accumulate_backward(x, gv, Some(&gj), out);
            } else {
                s.accumulate_backward(x, gv, None, out);
            }
        }
    }
}

fn expect_no_params(params: &[f64]) -> Result<()> {
    if params.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid("encoder has no trainable parameters"))
    }
}
