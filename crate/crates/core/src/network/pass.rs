//! Batched forward pass with optional input tangents, and its reverse pass.
//!
//! Each point contributes one value row and, when tangents are requested, one
//! row per input axis carrying ∂/∂x_j. Tangent rows propagate linearly through
//! the weights and are scaled by σ(z) at each Softplus, so the reverse pass over
//! this graph yields parameter gradients of any loss that depends on both
//! F(x) and ∇ₓF(x). The second-order term enters through σ'(z) = σ(1 - σ).

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};

use super::mlp::{sigmoid, softplus, Mlp};
use crate::encoding::Encoder;

pub struct ForwardPass<'a> {
    encoder: &'a Encoder,
    mlp: &'a Mlp,
    points: &'a [f64],
    batch: usize,
    tangents: bool,
    /// Input of each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

/// Gradient split into the encoder part and the MLP part.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGrads {
    pub encoder: Vec<f64>,
    pub mlp: Vec<f64>,
}

impl SplitGrads {
    pub fn concat(mut self) -> Vec<f64> {
        self.encoder.extend(self.mlp);
        self.encoder
    }
}

impl<'a> ForwardPass<'a> {
    /// `points` is `B x d` row-major and must match the encoder dimension.
    pub fn run(encoder: &'a Encoder, mlp: &'a Mlp, points: &'a [f64], tangents: bool) -> Self {
        let d = encoder.dim();
        debug_assert_eq!(points.len() % d, 0);
        debug_assert_eq!(encoder.out_dim(), mlp.input_dim());
        let batch = points.len() / d;
        let mut a = encoder.encode_batch(points, tangents);
        let n_layers = mlp.layers().len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers.saturating_sub(1));
        let mut output = None;
        for (l, layer) in mlp.layers().iter().enumerate() {
            let rows = a.nrows();
            let mut z = Array2::zeros((rows, layer.weight.nrows()));
            general_mat_mul(1.0, &a, &layer.weight.t(), 0.0, &mut z);
            let mut value_rows = z.slice_mut(s![..batch, ..]);
            value_rows += &layer.bias;
            inputs.push(a);
            if l + 1 == n_layers {
                output = Some(z);
                break;
            }
            let width = z.ncols();
            let mut next = Array2::zeros((rows, width));
            {
                let zs = z.as_slice().expect("standard layout");
                let ns = next.as_slice_mut().expect("standard layout");
                let mut sig = vec![0.0; width];
                for p in 0..batch {
                    let zr = &zs[p * width..(p + 1) * width];
                    for (c, &zv) in zr.iter().enumerate() {
                        ns[p * width + c] = softplus(zv);
                        sig[c] = sigmoid(zv);
                    }
                    if tangents {
                        for j in 0..d {
                            let off = ((1 + j) * batch + p) * width;
                            for c in 0..width {
                                ns[off + c] = sig[c] * zs[off + c];
                            }
                        }
                    }
                }
            }
            pre.push(z);
            a = next;
        }
        ForwardPass {
            encoder,
            mlp,
            points,
            batch,
            tangents,
            inputs,
            pre,
            output: output.expect("at least one layer"),
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn has_tangents(&self) -> bool {
        self.tangents
    }

    /// Output rows; value rows first, then tangent blocks.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// `F(x_p)`, all output channels.
    pub fn value(&self, p: usize) -> &[f64] {
        let o = self.output.ncols();
        &self.output.as_slice().expect("standard layout")[p * o..(p + 1) * o]
    }

    /// `∂F_out/∂x_j` at point `p`. Requires tangents.
    pub fn input_grad(&self, p: usize, out: usize, j: usize) -> f64 {
        assert!(self.tangents, "forward pass ran without tangents");
        self.output[[(1 + j) * self.batch + p, out]]
    }

    /// Parameter gradient of `Σ_rows <upstream_row, output_row>`.
    ///
    /// `upstream` has the same shape as [`output`](Self::output): value rows
    /// hold dL/dF, tangent rows hold dL/d(∂F/∂x_j).
    pub fn backward(&self, upstream: &Array2<f64>) -> SplitGrads {
        assert_eq!(upstream.dim(), self.output.dim(), "upstream shape mismatch");
        let b = self.batch;
        let d = self.encoder.dim();
        let layers = self.mlp.layers();
        let mut mlp_grads: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        let mut g = upstream.clone();
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let input = &self.inputs[l];
            let mut gw = Array2::zeros(layer.weight.dim());
            general_mat_mul(1.0, &g.t(), input, 0.0, &mut gw);
            let gb = g.slice(s![..b, ..]).sum_axis(Axis(0));
            let mut block: Vec<f64> = gw.into_raw_vec_and_offset().0;
            block.extend(gb.iter());
            mlp_grads.push(block);

            let mut ga = Array2::zeros((g.nrows(), layer.weight.ncols()));
            general_mat_mul(1.0, &g, &layer.weight, 0.0, &mut ga);
            if l == 0 {
                let mut enc = vec![0.0; self.encoder.param_count()];
                self.encoder.backward_batch(self.points, &ga, self.tangents, &mut enc);
                mlp_grads.reverse();
                return SplitGrads {
                    encoder: enc,
                    mlp: mlp_grads.concat(),
                };
            }
            // Back through the Softplus of layer l-1.
            let z = &self.pre[l - 1];
            let width = z.ncols();
            let zs = z.as_slice().expect("standard layout");
            let gas = ga.as_slice_mut().expect("standard layout");
            let mut sig = vec![0.0; width];
            let mut second = vec![0.0; width];
            for p in 0..b {
                for c in 0..width {
                    sig[c] = sigmoid(zs[p * width + c]);
                }
                second.iter_mut().for_each(|v| *v = 0.0);
                if self.tangents {
                    for j in 0..d {
                        let off = ((1 + j) * b + p) * width;
                        for c in 0..width {
                            // S̄_j ⊙ T_j accumulates the σ' term; T̄_j = S̄_j ⊙ σ.
                            second[c] += gas[off + c] * zs[off + c];
                            gas[off + c] *= sig[c];
                        }
                    }
                }
                let vo = p * width;
                for c in 0..width {
                    let s = sig[c];
                    gas[vo + c] = gas[vo + c] * s + second[c] * s * (1.0 - s);
                }
            }
            g = ga;
        }
        unreachable!("MLP has at least one layer")
    }
}
