use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpShape};
use super::pass::{ForwardPass, SplitGrads};
use crate::encoding::{Encoder, EncoderSpec};
use crate::error::{Error, Result};

/// Architecture of a [`FieldModel`]: everything needed to rebuild it from a
/// flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder: EncoderSpec,
    pub mlp: MlpShape,
}

/// Upstream derivatives for one point of a scalar-output model.
#[derive(Debug, Clone, PartialEq)]
pub struct Upstream {
    pub x: Vec<f64>,
    /// dL/dF.
    pub d_value: f64,
    /// dL/d(∇ₓF), a d-vector.
    pub d_grad: Vec<f64>,
}

/// An encoder followed by an MLP. The flat parameter view lists encoder
/// weights, encoder angles, then each MLP layer's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub encoder: Encoder,
    pub mlp: Mlp,
}

/// A named contiguous block of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FieldModel {
    pub fn new(encoder: Encoder, mlp: Mlp) -> Result<Self> {
        if encoder.out_dim() != mlp.input_dim() {
            return Err(Error::invalid(format!(
                "encoder emits {} features but the MLP expects {}",
                encoder.out_dim(),
                mlp.input_dim()
            )));
        }
        Ok(FieldModel { encoder, mlp })
    }

    pub fn from_spec(spec: &ModelSpec, params: &[f64]) -> Result<Self> {
        let (enc_len, mlp_len) = spec_param_split(spec);
        if params.len() != enc_len + mlp_len {
            return Err(Error::invalid(format!(
                "model expects {} parameters, got {}",
                enc_len + mlp_len,
                params.len()
            )));
        }
        let encoder = Encoder::from_spec(&spec.encoder, &params[..enc_len])?;
        let mut mlp = Mlp::zeros(spec.mlp.clone())?;
        mlp.set_params(&params[enc_len..])?;
        Self::new(encoder, mlp)
    }

    /// Fresh model: random spline weights and directions, fan-in scaled MLP.
    /// Fourier and identity encoders are fully determined by the spec.
    pub fn init_random<R: rand::Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        let encoder = match &spec.encoder {
            EncoderSpec::Spline(cfg) => Encoder::Spline(crate::encoding::SplineEncoding::new(cfg.clone(), rng)?),
            other => Encoder::from_spec(other, &[])?,
        };
        let mlp = Mlp::init_random(spec.mlp.clone(), rng)?;
        Self::new(encoder, mlp)
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            encoder: self.encoder.spec(),
            mlp: self.mlp.shape().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.mlp.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.write_params(&mut out);
        self.mlp.write_params(&mut out);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let n = self.encoder.param_count();
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        self.encoder.set_params(&params[..n])?;
        self.mlp.set_params(&params[n..])
    }

    /// Names and shapes of the flat parameter blocks, in order.
    pub fn param_order(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        if let Some(s) = self.encoder.as_spline() {
            blocks.push(ParamBlock {
                name: "encoder.weights".into(),
                shape: vec![s.projections(), s.segments() + 1, s.channels()],
            });
            blocks.push(ParamBlock {
                name: "encoder.angles".into(),
                shape: vec![s.projections(), s.dim() - 1],
            });
        }
        for (l, (fin, fout)) in self.mlp.shape().layer_dims().into_iter().enumerate() {
            blocks.push(ParamBlock {
                name: format!("mlp.{l}.weight"),
                shape: vec![fout, fin],
            });
            blocks.push(ParamBlock {
                name: format!("mlp.{l}.bias"),
                shape: vec![fout],
            });
        }
        blocks
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_scalar(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::invalid(format!(
                "operation needs a scalar-output model, this one has {} outputs",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let pass = ForwardPass::run(&self.encoder, &self.mlp, x, false);
        Ok(pass.value(0).to_vec())
    }

    /// `(F(x), ∇ₓF(x))` for a scalar field.
    pub fn forward_with_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        self.check_scalar()?;
        let pass = ForwardPass::run(&self.encoder, &self.mlp, x, true);
        let grad = (0..self.dim()).map(|j| pass.input_grad(0, 0, j)).collect();
        Ok((pass.value(0)[0], grad))
    }

    /// Values of a scalar field at many points (`B x d`).
    pub fn forward_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        if points.len() % self.dim() != 0 {
            return Err(Error::invalid("point buffer is not a multiple of the dimension"));
        }
        self.check_scalar()?;
        let mut out = Vec::with_capacity(points.len() / self.dim());
        // Chunked to bound the activation memory.
        for chunk in points.chunks(4096 * self.dim()) {
            let pass = ForwardPass::run(&self.encoder, &self.mlp, chunk, false);
            out.extend(pass.output().column(0).iter());
        }
        Ok(out)
    }

    /// Batched pass for loss evaluation; see [`ForwardPass`].
    pub fn run<'a>(&'a self, points: &'a [f64], tangents: bool) -> ForwardPass<'a> {
        ForwardPass::run(&self.encoder, &self.mlp, points, tangents)
    }

    /// Gradient of `Σ_i [ d_value_i F(x_i) + <d_grad_i, ∇ₓF(x_i)> ]` with
    /// respect to the flat parameter vector.
    pub fn backward(&self, batch: &[Upstream]) -> Result<Vec<f64>> {
        self.check_scalar()?;
        let d = self.dim();
        let b = batch.len();
        if b == 0 {
            return Ok(vec![0.0; self.param_count()]);
        }
        let mut points = Vec::with_capacity(b * d);
        let mut upstream = Array2::zeros((b * (1 + d), 1));
        for (p, u) in batch.iter().enumerate() {
            self.check_point(&u.x)?;
            if u.d_grad.len() != d {
                return Err(Error::invalid(format!(
                    "upstream gradient has {} entries, expected {d}",
                    u.d_grad.len()
                )));
            }
            points.extend_from_slice(&u.x);
            upstream[[p, 0]] = u.d_value;
            for j in 0..d {
                upstream[[(1 + j) * b + p, 0]] = u.d_grad[j];
            }
        }
        let pass = ForwardPass::run(&self.encoder, &self.mlp, &points, true);
        Ok(pass.backward(&upstream).concat())
    }

    /// Backward from a pass produced by [`run`](Self::run).
    pub fn backward_pass(&self, pass: &ForwardPass<'_>, upstream: &Array2<f64>) -> SplitGrads {
        pass.backward(upstream)
    }
}

fn spec_param_split(spec: &ModelSpec) -> (usize, usize) {
    let enc = match &spec.encoder {
        EncoderSpec::Spline(c) => c.projections * ((c.segments + 1) * c.channels + c.dim - 1),
        _ => 0,
    };
    (enc, spec.mlp.param_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{FourierEncoding, SplineConfig, SplineEncoding};
    use crate::network::mlp::{softplus, Layer};
    use ndarray::{arr1, arr2, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spline_model(degree: usize, seed: u64) -> FieldModel {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = SplineConfig::new(3, 8, 6, 3);
        cfg.degree = degree;
        cfg.domain_radius = Some(1.0);
        let mut enc = SplineEncoding::new(cfg, &mut r).unwrap();
        let p: Vec<f64> = enc.params().iter().map(|v| v * 5.0).collect();
        enc.set_params(&p).unwrap();
        let mlp = Mlp::init_random(MlpShape::new(6, 10, 3, 1), &mut r).unwrap();
        FieldModel::new(Encoder::Spline(enc), mlp).unwrap()
    }

    /// Straightforward matrix chain on one point, independent of ForwardPass.
    fn naive_forward(m: &FieldModel, x: &[f64]) -> Vec<f64> {
        let mut a = Array1::from(m.encoder.encode(x).unwrap());
        let n = m.mlp.layers().len();
        for (l, layer) in m.mlp.layers().iter().enumerate() {
            let z = layer.weight.dot(&a) + &layer.bias;
            a = if l + 1 == n { z } else { z.mapv(softplus) };
        }
        a.to_vec()
    }

    fn away_from_knots(m: &FieldModel, x: &[f64]) -> bool {
        let Some(s) = m.encoder.as_spline() else {
            return true;
        };
        let delta = s.knot_spacing();
        (0..s.projections()).all(|k| {
            let t: f64 = s.direction(k).iter().zip(x).map(|(a, b)| a * b).sum();
            let pos = 2.0 * (t + s.domain_radius()) / delta;
            (pos - pos.round()).abs() > 2e-3
        })
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut mlp = Mlp::zeros(MlpShape::new(3, 4, 3, 1)).unwrap();
        mlp.layers_mut()[2].bias[0] = 0.37;
        let m = FieldModel::new(Encoder::identity(3), mlp).unwrap();
        for x in [[0.0, 0.0, 0.0], [0.5, -0.2, 0.9]] {
            assert_eq!(m.forward(&x).unwrap(), vec![0.37]);
            let (_, g) = m.forward_with_input_grad(&x).unwrap();
            assert!(g.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn linear_model_is_exact() {
        let layer = Layer {
            weight: arr2(&[[0.3, -0.4, 0.5]]),
            bias: arr1(&[0.25]),
        };
        let m = FieldModel::new(Encoder::identity(3), Mlp::from_layers(vec![layer]).unwrap()).unwrap();
        let x = [0.2, 0.1, -0.6];
        let (v, g) = m.forward_with_input_grad(&x).unwrap();
        assert!((v - (0.3 * 0.2 - 0.4 * 0.1 + 0.5 * -0.6 + 0.25)).abs() < 1e-15);
        assert_eq!(g, vec![0.3, -0.4, 0.5]);
    }

    #[test]
    fn forward_matches_naive_chain() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let m = spline_model(2, 3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-0.8..0.8)).collect();
            let a = m.forward(&x).unwrap();
            let b = naive_forward(&m, &x);
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_batch_matches_single() {
        let m = spline_model(1, 4);
        let pts = [0.1, 0.2, 0.3, -0.3, 0.0, 0.6, 0.9, -0.9, 0.1];
        let batch = m.forward_batch(&pts).unwrap();
        for p in 0..3 {
            assert_eq!(batch[p], m.forward(&pts[p * 3..p * 3 + 3]).unwrap()[0]);
        }
    }

    #[test]
    fn input_grad_matches_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for degree in [1, 2] {
            let m = spline_model(degree, 10 + degree as u64);
            let h = 1e-6 * 0.25;
            let mut checked = 0;
            while checked < 30 {
                let x: Vec<f64> = (0..3).map(|_| r.random_range(-0.7..0.7)).collect();
                if !away_from_knots(&m, &x) {
                    continue;
                }
                checked += 1;
                let (_, g) = m.forward_with_input_grad(&x).unwrap();
                for j in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let fd = (m.forward(&xp).unwrap()[0] - m.forward(&xm).unwrap()[0]) / (2.0 * h);
                    let err = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-3);
                    assert!(err < 1e-5, "degree {degree}: {} vs {fd}", g[j]);
                }
            }
        }
    }

    #[test]
    fn non_scalar_rejected() {
        let mlp = Mlp::zeros(MlpShape::new(2, 4, 2, 3)).unwrap();
        let m = FieldModel::new(Encoder::identity(2), mlp).unwrap();
        assert!(m.forward_with_input_grad(&[0.0, 0.0]).is_err());
        assert_eq!(m.forward(&[0.0, 0.0]).unwrap().len(), 3);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = spline_model(1, 0);
        assert!(m.forward(&[0.0, 0.0]).is_err());
        let mlp = Mlp::zeros(MlpShape::new(5, 4, 2, 1)).unwrap();
        assert!(FieldModel::new(Encoder::identity(3), mlp).is_err());
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let m = spline_model(1, 5);
        let batch = vec![Upstream {
            x: vec![0.1, 0.2, 0.3],
            d_value: 0.0,
            d_grad: vec![0.0; 3],
        }];
        assert!(m.backward(&batch).unwrap().iter().all(|v| *v == 0.0));
    }

    fn objective(m: &FieldModel, p: &[f64], batch: &[Upstream]) -> f64 {
        let mut mm = m.clone();
        mm.set_params(p).unwrap();
        batch
            .iter()
            .map(|u| {
                let (v, g) = mm.forward_with_input_grad(&u.x).unwrap();
                u.d_value * v + g.iter().zip(&u.d_grad).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum()
    }

    fn check_backward(m: &FieldModel, batch: &[Upstream], tol: f64) {
        let g = m.backward(batch).unwrap();
        let p0 = m.params();
        assert_eq!(g.len(), p0.len());
        let h = 1e-6;
        for i in 0..p0.len() {
            let mut pp = p0.clone();
            let mut pm = p0.clone();
            pp[i] += h;
            pm[i] -= h;
            let fd = (objective(m, &pp, batch) - objective(m, &pm, batch)) / (2.0 * h);
            let err = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-3);
            assert!(err < tol, "param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn backward_value_only_matches_finite_differences() {
        let m = spline_model(1, 6);
        let batch = vec![Upstream {
            x: vec![0.13, -0.21, 0.34],
            d_value: 1.0,
            d_grad: vec![0.0; 3],
        }];
        check_backward(&m, &batch, 1e-5);
    }

    #[test]
    fn backward_second_order_matches_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for degree in [1, 2] {
            let m = spline_model(degree, 20 + degree as u64);
            let mut batch = Vec::new();
            while batch.len() < 4 {
                let x: Vec<f64> = (0..3).map(|_| r.random_range(-0.7..0.7)).collect();
                if away_from_knots(&m, &x) {
                    batch.push(Upstream {
                        x,
                        d_value: r.random_range(-1.0..1.0),
                        d_grad: (0..3).map(|_| r.random_range(-1.0..1.0)).collect(),
                    });
                }
            }
            check_backward(&m, &batch, 1e-4);
        }
    }

    #[test]
    fn fourier_and_identity_backward() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let fe = FourierEncoding::random(3, 4, 1.0, &mut r).unwrap();
        let encoders = [Encoder::Fourier(fe), Encoder::identity(3)];
        for enc in encoders {
            let mlp = Mlp::init_random(MlpShape::new(enc.out_dim(), 7, 3, 1), &mut r).unwrap();
            let m = FieldModel::new(enc, mlp).unwrap();
            let batch: Vec<Upstream> = (0..3)
                .map(|_| Upstream {
                    x: (0..3).map(|_| r.random_range(-0.7..0.7)).collect(),
                    d_value: r.random_range(-1.0..1.0),
                    d_grad: (0..3).map(|_| r.random_range(-1.0..1.0)).collect(),
                })
                .collect();
            check_backward(&m, &batch, 1e-4);
        }
    }

    #[test]
    fn flat_view_round_trip() {
        let m = spline_model(1, 7);
        let p = m.params();
        let order = m.param_order();
        assert_eq!(order.iter().map(ParamBlock::len).sum::<usize>(), p.len());
        let back = FieldModel::from_spec(&m.spec(), &p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.params(), p);
    }
}
