//! Training objectives and their upstream derivatives.
//!
//! Each loss is evaluated through one batched [`ForwardPass`]; the upstream
//! matrix it builds has the pass's output shape and feeds straight into the
//! reverse pass.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FieldModel, ForwardPass, SplitGrads, Upstream};

/// Surface samples with normals plus free-space samples for the Eikonal term.
/// All buffers are row-major with `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfBatch {
    pub dim: usize,
    pub surface: Vec<f64>,
    pub normals: Vec<f64>,
    pub domain: Vec<f64>,
}

impl SdfBatch {
    pub fn surface_len(&self) -> usize {
        self.surface.len() / self.dim
    }

    pub fn domain_len(&self) -> usize {
        self.domain.len() / self.dim
    }

    fn validate(&self, model: &FieldModel) -> Result<()> {
        if self.dim != model.dim() {
            return Err(Error::invalid(format!(
                "batch dimension {} does not match model dimension {}",
                self.dim,
                model.dim()
            )));
        }
        if model.output_dim() != 1 {
            return Err(Error::invalid("SDF loss needs a scalar-output model"));
        }
        if self.surface.is_empty() || self.domain.is_empty() {
            return Err(Error::invalid("SDF loss needs non-empty surface and domain batches"));
        }
        if self.surface.len() % self.dim != 0
            || self.domain.len() % self.dim != 0
            || self.normals.len() != self.surface.len()
        {
            return Err(Error::invalid("batch buffers have inconsistent lengths"));
        }
        Ok(())
    }

    fn stacked_points(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.surface.len() + self.domain.len());
        pts.extend_from_slice(&self.surface);
        pts.extend_from_slice(&self.domain);
        pts
    }
}

/// `lambda` weighs the Eikonal term, `tau` the normal term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: 0.1, tau: 1.0 }
    }
}

/// Unweighted terms and the weighted total
/// `fit + tau * normal + lambda * eikonal`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    /// Mean of `F(x)²` over surface points.
    pub fit: f64,
    /// Mean of `‖∇F(x) − n‖²` over surface points.
    pub normal: f64,
    /// Mean of `(‖∇F(x)‖ − 1)²` over domain points.
    pub eikonal: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.fit.is_finite() && self.normal.is_finite() && self.eikonal.is_finite()
    }
}

/// Loss terms and the upstream matrix for a pass over the stacked
/// `[surface; domain]` points.
fn sdf_terms(pass: &ForwardPass<'_>, batch: &SdfBatch, w: &LossWeights) -> (LossTerms, Array2<f64>) {
    let d = batch.dim;
    let ns = batch.surface_len();
    let nd = batch.domain_len();
    let b = pass.batch();
    let out = pass.output();
    let mut up = Array2::zeros(out.dim());
    let mut terms = LossTerms::default();
    let inv_s = 1.0 / ns as f64;
    let inv_d = 1.0 / nd as f64;
    let mut g = vec![0.0; d];
    for p in 0..ns {
        let f = out[[p, 0]];
        terms.fit += f * f * inv_s;
        up[[p, 0]] = 2.0 * f * inv_s;
        for j in 0..d {
            let r = out[[(1 + j) * b + p, 0]] - batch.normals[p * d + j];
            terms.normal += r * r * inv_s;
            up[[(1 + j) * b + p, 0]] = 2.0 * w.tau * r * inv_s;
        }
    }
    for q in 0..nd {
        let p = ns + q;
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = out[[(1 + j) * b + p, 0]];
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e = gn - 1.0;
        terms.eikonal += e * e * inv_d;
        if gn > 0.0 {
            let s = w.lambda * 2.0 * e / gn * inv_d;
            for j in 0..d {
                up[[(1 + j) * b + p, 0]] = s * g[j];
            }
        }
    }
    terms.total = terms.fit + w.tau * terms.normal + w.lambda * terms.eikonal;
    (terms, up)
}

/// The surface/normal/Eikonal objective and its per-point upstream
/// derivatives, surface points first.
pub fn sdf_loss(model: &FieldModel, batch: &SdfBatch, w: &LossWeights) -> Result<(LossTerms, Vec<Upstream>)> {
    batch.validate(model)?;
    let pts = batch.stacked_points();
    let pass = model.run(&pts, true);
    let (terms, up) = sdf_terms(&pass, batch, w);
    let d = batch.dim;
    let b = pass.batch();
    let ups = (0..b)
        .map(|p| Upstream {
            x: pts[p * d..(p + 1) * d].to_vec(),
            d_value: up[[p, 0]],
            d_grad: (0..d).map(|j| up[[(1 + j) * b + p, 0]]).collect(),
        })
        .collect();
    Ok((terms, ups))
}

/// Loss value only.
pub fn sdf_loss_value(model: &FieldModel, batch: &SdfBatch, w: &LossWeights) -> Result<LossTerms> {
    batch.validate(model)?;
    let pts = batch.stacked_points();
    let pass = model.run(&pts, true);
    Ok(sdf_terms(&pass, batch, w).0)
}

/// Loss and its gradient over the flat parameter vector, split into the
/// encoder and MLP parts.
pub fn sdf_loss_grad(model: &FieldModel, batch: &SdfBatch, w: &LossWeights) -> Result<(LossTerms, SplitGrads)> {
    batch.validate(model)?;
    let pts = batch.stacked_points();
    let pass = model.run(&pts, true);
    let (terms, up) = sdf_terms(&pass, batch, w);
    Ok((terms, pass.backward(&up)))
}

fn check_regression(model: &FieldModel, points: &[f64], targets: &[f64]) -> Result<usize> {
    let d = model.dim();
    if points.is_empty() || points.len() % d != 0 {
        return Err(Error::invalid("regression batch must hold at least one point"));
    }
    let b = points.len() / d;
    if targets.len() != b * model.output_dim() {
        return Err(Error::invalid(format!(
            "expected {} targets, got {}",
            b * model.output_dim(),
            targets.len()
        )));
    }
    Ok(b)
}

fn l1_terms(pass: &ForwardPass<'_>, targets: &[f64]) -> (f64, Array2<f64>) {
    let out = pass.output();
    let b = pass.batch();
    let mut up = Array2::zeros(out.dim());
    let mut loss = 0.0;
    for p in 0..b {
        let r = out[[p, 0]] - targets[p];
        loss += r.abs() / b as f64;
        // Subgradient 0 at exact ties.
        up[[p, 0]] = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        } / b as f64;
    }
    (loss, up)
}

/// `mean |F(x) − y|` for a scalar model.
pub fn l1_regression_loss(model: &FieldModel, points: &[f64], targets: &[f64]) -> Result<(f64, Vec<Upstream>)> {
    if model.output_dim() != 1 {
        return Err(Error::invalid("L1 regression needs a scalar-output model"));
    }
    check_regression(model, points, targets)?;
    let d = model.dim();
    let pass = model.run(points, false);
    let (loss, up) = l1_terms(&pass, targets);
    let ups = (0..pass.batch())
        .map(|p| Upstream {
            x: points[p * d..(p + 1) * d].to_vec(),
            d_value: up[[p, 0]],
            d_grad: vec![0.0; d],
        })
        .collect();
    Ok((loss, ups))
}

pub fn l1_regression_grad(model: &FieldModel, points: &[f64], targets: &[f64]) -> Result<(f64, SplitGrads)> {
    if model.output_dim() != 1 {
        return Err(Error::invalid("L1 regression needs a scalar-output model"));
    }
    check_regression(model, points, targets)?;
    let pass = model.run(points, false);
    let (loss, up) = l1_terms(&pass, targets);
    Ok((loss, pass.backward(&up)))
}

fn l2_terms(pass: &ForwardPass<'_>, targets: &[f64]) -> (f64, Array2<f64>) {
    let out = pass.output();
    let n = out.len() as f64;
    let mut up = Array2::zeros(out.dim());
    let mut loss = 0.0;
    for ((u, o), t) in up.iter_mut().zip(out.iter()).zip(targets) {
        let r = o - t;
        loss += r * r / n;
        *u = 2.0 * r / n;
    }
    (loss, up)
}

/// Mean squared error over points and output channels. `targets` is
/// `B x outputs` row-major. Returns the loss and dL/dF with the same layout.
pub fn l2_image_loss(model: &FieldModel, points: &[f64], targets: &[f64]) -> Result<(f64, Array2<f64>)> {
    check_regression(model, points, targets)?;
    let pass = model.run(points, false);
    Ok(l2_terms(&pass, targets))
}

/// Plain squared error regression, also used by sphere pretraining.
pub fn l2_grad(model: &FieldModel, points: &[f64], targets: &[f64]) -> Result<(f64, SplitGrads)> {
    check_regression(model, points, targets)?;
    let pass = model.run(points, false);
    let (loss, up) = l2_terms(&pass, targets);
    Ok((loss, pass.backward(&up)))
}
