//! Spline positional encoding: projections onto trainable directions, each
//! followed by a C-channel uniform B-spline, summed over projections.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::basis::{basis_with_second, support_radius, MAX_DEGREE};
use crate::error::{Error, Result};

/// Standard deviation of the initial knot weights.
pub const WEIGHT_INIT_STD: f64 = 0.1;

/// Shape hyper-parameters of a [`SplineEncoding`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    /// Input dimension, 2 or 3.
    pub dim: usize,
    /// Number of uniform segments K per projection.
    pub segments: usize,
    /// Channels C per knot weight.
    pub channels: usize,
    /// Number of projection directions M.
    pub projections: usize,
    /// Polynomial degree of the B-spline basis (0, 1 or 2).
    pub degree: usize,
    /// Knots span `[-R, R]`. `None` means `sqrt(dim)`.
    pub domain_radius: Option<f64>,
    #[serde(default)]
    pub freeze_directions: bool,
}

impl SplineConfig {
    pub fn new(dim: usize, segments: usize, channels: usize, projections: usize) -> Self {
        SplineConfig {
            dim,
            segments,
            channels,
            projections,
            degree: 1,
            domain_radius: None,
            freeze_directions: false,
        }
    }

    pub fn radius(&self) -> f64 {
        self.domain_radius.unwrap_or((self.dim as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::invalid(format!("input dimension {} not in {{2, 3}}", self.dim)));
        }
        if self.segments == 0 || self.channels == 0 || self.projections == 0 {
            return Err(Error::invalid(
                "spline encoding needs K >= 1, C >= 1 and M >= 1",
            ));
        }
        if self.degree > MAX_DEGREE {
            return Err(Error::invalid(format!(
                "B-spline degree {} not supported (expected 0, 1 or 2)",
                self.degree
            )));
        }
        let r = self.radius();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("domain radius must be positive, got {r}")));
        }
        Ok(())
    }
}

/// Trainable spline positional encoding.
///
/// Weights are stored as `M x (K+1) x C`, row-major. Directions are stored as
/// `d - 1` spherical angles each; the unit vectors are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineEncoding {
    config: SplineConfig,
    radius: f64,
    weights: Vec<f64>,
    angles: Vec<f64>,
    directions: Vec<f64>,
}

/// Parameter gradients of a [`SplineEncoding`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingGrads {
    /// `M x (K+1) x C`, same layout as the encoding weights.
    pub d_weights: Vec<f64>,
    /// `M x (d-1)`.
    pub d_angles: Vec<f64>,
}

fn direction_from_angles(angles: &[f64], out: &mut [f64]) {
    match angles.len() {
        1 => {
            out[0] = angles[0].cos();
            out[1] = angles[0].sin();
        }
        2 => {
            let (st, ct) = angles[0].sin_cos();
            let (sp, cp) = angles[1].sin_cos();
            out[0] = st * cp;
            out[1] = st * sp;
            out[2] = ct;
        }
        _ => unreachable!(),
    }
}

/// Partial derivatives of the direction vector w.r.t. each angle, `(d-1) x d`.
fn direction_angle_jacobian(angles: &[f64]) -> [[f64; 3]; 2] {
    match angles.len() {
        1 => {
            let (s, c) = angles[0].sin_cos();
            [[-s, c, 0.0], [0.0; 3]]
        }
        2 => {
            let (st, ct) = angles[0].sin_cos();
            let (sp, cp) = angles[1].sin_cos();
            [[ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0]]
        }
        _ => unreachable!(),
    }
}

fn angles_from_direction(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::invalid("direction must be a non-zero finite vector"));
    }
    match v.len() {
        2 => Ok(vec![v[1].atan2(v[0])]),
        3 => Ok(vec![(v[2] / n).clamp(-1.0, 1.0).acos(), v[1].atan2(v[0])]),
        d => Err(Error::invalid(format!("direction dimension {d} not in {{2, 3}}"))),
    }
}

impl SplineEncoding {
    /// Random directions (uniform on the sphere) and `Normal(0, 0.1²)` weights.
    pub fn new<R: Rng + ?Sized>(config: SplineConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut dirs = Vec::with_capacity(config.projections * d);
        for _ in 0..config.projections {
            loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-8 {
                    dirs.extend(v.iter().map(|x| x / n));
                    break;
                }
            }
        }
        let normal = Normal::new(0.0, WEIGHT_INIT_STD).expect("valid std");
        let nw = config.projections * (config.segments + 1) * config.channels;
        let weights = (0..nw).map(|_| normal.sample(rng)).collect();
        Self::from_parts(config, weights, &dirs)
    }

    /// Builds an encoding from explicit weights (`M x (K+1) x C`) and direction
    /// vectors (`M x d`, normalized here).
    pub fn from_parts(config: SplineConfig, weights: Vec<f64>, directions: &[f64]) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let m = config.projections;
        let nw = m * (config.segments + 1) * config.channels;
        if weights.len() != nw {
            return Err(Error::invalid(format!(
                "expected {nw} spline weights, got {}",
                weights.len()
            )));
        }
        if directions.len() != m * d {
            return Err(Error::invalid(format!(
                "expected {} direction components, got {}",
                m * d,
                directions.len()
            )));
        }
        let mut angles = Vec::with_capacity(m * (d - 1));
        for k in 0..m {
            angles.extend(angles_from_direction(&directions[k * d..(k + 1) * d])?);
        }
        Self::from_angles(config, weights, angles)
    }

    /// Builds an encoding from its raw trainable parameters.
    pub fn from_angles(config: SplineConfig, weights: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let m = config.projections;
        if weights.len() != m * (config.segments + 1) * config.channels {
            return Err(Error::invalid("spline weight count does not match config"));
        }
        if angles.len() != m * (d - 1) {
            return Err(Error::invalid("direction angle count does not match config"));
        }
        let radius = config.radius();
        let mut enc = SplineEncoding {
            config,
            radius,
            weights,
            angles,
            directions: vec![0.0; m * d],
        };
        enc.refresh_directions();
        Ok(enc)
    }

    /// An encoding whose channels sample `sin(2πf t)` and `cos(2πf t)` at the
    /// knots for every frequency `f`, on axis-aligned frozen directions
    /// (one projection per input axis, degree 1, radius `sqrt(dim)`).
    pub fn from_fourier(frequencies: &[f64], segments: usize, dim: usize) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::invalid("frequency list is empty"));
        }
        let config = SplineConfig {
            dim,
            segments,
            channels: 2 * frequencies.len(),
            projections: dim,
            degree: 1,
            domain_radius: None,
            freeze_directions: true,
        };
        config.validate()?;
        let r = config.radius();
        let delta = 2.0 * r / segments as f64;
        let mut weights = Vec::with_capacity(dim * (segments + 1) * config.channels);
        for _ in 0..dim {
            for i in 0..=segments {
                let c = -r + i as f64 * delta;
                for &f in frequencies {
                    let (s, co) = (2.0 * PI * f * c).sin_cos();
                    weights.push(s);
                    weights.push(co);
                }
            }
        }
        let mut dirs = vec![0.0; dim * dim];
        for k in 0..dim {
            dirs[k * dim + k] = 1.0;
        }
        Self::from_parts(config, weights, &dirs)
    }

    fn refresh_directions(&mut self) {
        let d = self.config.dim;
        for k in 0..self.config.projections {
            let a = &self.angles[k * (d - 1)..(k + 1) * (d - 1)];
            direction_from_angles(a, &mut self.directions[k * d..(k + 1) * d]);
        }
    }

    pub fn config(&self) -> &SplineConfig {
        &self.config
    }
    pub fn dim(&self) -> usize {
        self.config.dim
    }
    pub fn degree(&self) -> usize {
        self.config.degree
    }
    pub fn segments(&self) -> usize {
        self.config.segments
    }
    pub fn channels(&self) -> usize {
        self.config.channels
    }
    pub fn projections(&self) -> usize {
        self.config.projections
    }
    pub fn domain_radius(&self) -> f64 {
        self.radius
    }
    pub fn directions_frozen(&self) -> bool {
        self.config.freeze_directions
    }
    pub fn set_directions_frozen(&mut self, frozen: bool) {
        self.config.freeze_directions = frozen;
    }

    /// Knot spacing δ = 2R/K.
    pub fn knot_spacing(&self) -> f64 {
        2.0 * self.radius / self.config.segments as f64
    }

    /// Location of knot `i`, `c_i = -R + i δ`.
    pub fn knot(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.knot_spacing()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Unit direction of projection `k`.
    pub fn direction(&self, k: usize) -> &[f64] {
        let d = self.config.dim;
        &self.directions[k * d..(k + 1) * d]
    }

    /// `C (K+1) M + (d-1) M`.
    pub fn param_count(&self) -> usize {
        let c = &self.config;
        c.channels * (c.segments + 1) * c.projections + (c.dim - 1) * c.projections
    }

    /// Weights followed by angles.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        self.write_params(&mut p);
        p
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.angles);
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} encoding parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let nw = self.weights.len();
        self.weights.copy_from_slice(&params[..nw]);
        self.angles.copy_from_slice(&params[nw..]);
        self.refresh_directions();
        Ok(())
    }

    /// Range of knot indices whose basis may be non-zero (or carry a one-sided
    /// derivative) at `t`.
    #[inline]
    fn knot_range(&self, t: f64) -> Option<(usize, usize)> {
        let k = self.config.segments as isize;
        let s = support_radius(self.config.degree);
        let pos = (t + self.radius) / self.knot_spacing();
        if !pos.is_finite() {
            return None;
        }
        let lo = (pos - s).floor().max(0.0);
        let hi = (pos + s).ceil().min(k as f64);
        if lo > hi {
            return None;
        }
        Some((lo as usize, hi as usize))
    }

    /// Adds `ψ_k(t)` into `value` and, if given, `ψ_k'(t)` into `deriv`.
    #[inline]
    fn accumulate_spline(&self, k: usize, t: f64, value: &mut [f64], mut deriv: Option<&mut [f64]>) {
        let Some((lo, hi)) = self.knot_range(t) else {
            return;
        };
        let c = self.config.channels;
        let kp1 = self.config.segments + 1;
        let delta = self.knot_spacing();
        let inv = 1.0 / delta;
        for i in lo..=hi {
            let u = (t - self.knot(i)) * inv;
            let (b, b1, _) = basis_with_second(u, self.config.degree);
            if b == 0.0 && b1 == 0.0 {
                continue;
            }
            let w = &self.weights[(k * kp1 + i) * c..(k * kp1 + i + 1) * c];
            if b != 0.0 {
                for (v, wi) in value.iter_mut().zip(w) {
                    *v += wi * b;
                }
            }
            if let Some(dv) = deriv.as_deref_mut() {
                if b1 != 0.0 {
                    let s = b1 * inv;
                    for (v, wi) in dv.iter_mut().zip(w) {
                        *v += wi * s;
                    }
                }
            }
        }
    }

    /// `ψ_k(t)` and `dψ_k/dt`, each a C-vector.
    pub fn spline_eval(&self, k: usize, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if k >= self.config.projections {
            return Err(Error::invalid(format!(
                "projection index {k} out of range (M = {})",
                self.config.projections
            )));
        }
        let c = self.config.channels;
        let mut v = vec![0.0; c];
        let mut d = vec![0.0; c];
        self.accumulate_spline(k, t, &mut v, Some(&mut d));
        Ok((v, d))
    }

    fn project(&self, k: usize, x: &[f64]) -> f64 {
        self.direction(k).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, encoding expects {}",
                x.len(),
                self.config.dim
            )));
        }
        Ok(())
    }

    /// `Φ(x) = Σ_k ψ_k(<x, D_k>)`, a C-vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.config.channels];
        self.encode_into(x, &mut out, None);
        Ok(out)
    }

    /// `∂Φ/∂x`, a `C x d` matrix.
    pub fn encode_jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check_point(x)?;
        let c = self.config.channels;
        let d = self.config.dim;
        let mut v = vec![0.0; c];
        let mut jac = vec![0.0; c * d];
        self.encode_into(x, &mut v, Some(&mut jac));
        Ok(Array2::from_shape_vec((c, d), jac).expect("shape"))
    }

    /// Writes Φ(x) into `value` and, if requested, ∂Φ/∂x (`C x d` row-major)
    /// into `jac`. Both buffers are overwritten.
    pub(crate) fn encode_into(&self, x: &[f64], value: &mut [f64], jac: Option<&mut [f64]>) {
        let c = self.config.channels;
        let d = self.config.dim;
        value.iter_mut().for_each(|v| *v = 0.0);
        match jac {
            None => {
                for k in 0..self.config.projections {
                    let t = self.project(k, x);
                    self.accumulate_spline(k, t, value, None);
                }
            }
            Some(jac) => {
                jac.iter_mut().for_each(|v| *v = 0.0);
                let mut dpsi = vec![0.0; c];
                for k in 0..self.config.projections {
                    let t = self.project(k, x);
                    dpsi.iter_mut().for_each(|v| *v = 0.0);
                    self.accumulate_spline(k, t, value, Some(&mut dpsi));
                    let dir = self.direction(k);
                    for ch in 0..c {
                        let s = dpsi[ch];
                        if s != 0.0 {
                            for j in 0..d {
                                jac[ch * d + j] += s * dir[j];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Gradients of `s = <g_value, Φ(x)> + <g_jacobian, ∂Φ/∂x>` with respect to
    /// the knot weights and the direction angles.
    pub fn encode_backward(
        &self,
        x: &[f64],
        g_value: &[f64],
        g_jacobian: ArrayView2<'_, f64>,
    ) -> Result<EncodingGrads> {
        self.check_point(x)?;
        let c = self.config.channels;
        let d = self.config.dim;
        if g_value.len() != c || g_jacobian.dim() != (c, d) {
            return Err(Error::invalid(format!(
                "upstream shapes ({}, {:?}) do not match encoding (C = {c}, d = {d})",
                g_value.len(),
                g_jacobian.dim()
            )));
        }
        let gj: Vec<f64> = g_jacobian.iter().copied().collect();
        let mut grads = vec![0.0; self.param_count()];
        self.accumulate_backward(x, g_value, Some(&gj), &mut grads);
        let nw = self.weights.len();
        let d_angles = grads.split_off(nw);
        Ok(EncodingGrads {
            d_weights: grads,
            d_angles,
        })
    }

    /// Adds the parameter gradient of `<gv, Φ(x)> + <gj, ∂Φ/∂x>` into `grads`
    /// (weights then angles). `gj` is `C x d` row-major, `None` meaning zero.
    pub(crate) fn accumulate_backward(
        &self,
        x: &[f64],
        gv: &[f64],
        gj: Option<&[f64]>,
        grads: &mut [f64],
    ) {
        let c = self.config.channels;
        let d = self.config.dim;
        let kp1 = self.config.segments + 1;
        let degree = self.config.degree;
        let delta = self.knot_spacing();
        let inv = 1.0 / delta;
        let nw = self.weights.len();
        let trainable_dirs = !self.config.freeze_directions;
        let (gw, ga) = grads.split_at_mut(nw);
        let mut gjd = vec![0.0; c];
        let mut dpsi = vec![0.0; c];

        for k in 0..self.config.projections {
            let dir = self.direction(k);
            let t = self.project(k, x);
            let Some((lo, hi)) = self.knot_range(t) else {
                continue;
            };
            if let Some(gj) = gj {
                for ch in 0..c {
                    gjd[ch] = (0..d).map(|j| gj[ch * d + j] * dir[j]).sum();
                }
            }
            let mut ds_dt = 0.0;
            dpsi.iter_mut().for_each(|v| *v = 0.0);
            for i in lo..=hi {
                let u = (t - self.knot(i)) * inv;
                let (b, b1, b2) = basis_with_second(u, degree);
                if b == 0.0 && b1 == 0.0 && b2 == 0.0 {
                    continue;
                }
                let b1 = b1 * inv;
                let b2 = b2 * inv * inv;
                let base = (k * kp1 + i) * c;
                let w = &self.weights[base..base + c];
                let gwk = &mut gw[base..base + c];
                for ch in 0..c {
                    let mut g = gv[ch] * b;
                    if gj.is_some() {
                        g += gjd[ch] * b1;
                    }
                    gwk[ch] += g;
                }
                if trainable_dirs {
                    for ch in 0..c {
                        let mut s = gv[ch] * b1;
                        if gj.is_some() {
                            s += gjd[ch] * b2;
                            dpsi[ch] += w[ch] * b1;
                        }
                        ds_dt += w[ch] * s;
                    }
                }
            }
            if !trainable_dirs {
                continue;
            }
            // ∂s/∂D_k = (∂s/∂t) x + gjᵀ ψ_k'(t)
            let mut ds_ddir = [0.0f64; 3];
            for j in 0..d {
                ds_ddir[j] = ds_dt * x[j];
                if let Some(gj) = gj {
                    ds_ddir[j] += (0..c).map(|ch| gj[ch * d + j] * dpsi[ch]).sum::<f64>();
                }
            }
            let na = d - 1;
            let jac = direction_angle_jacobian(&self.angles[k * na..(k + 1) * na]);
            for a in 0..na {
                ga[k * na + a] += (0..d).map(|j| jac[a][j] * ds_ddir[j]).sum::<f64>();
            }
        }
    }

    /// Doubles the segment count. Each new knot weight is the old spline
    /// evaluated at that knot; directions and radius are kept.
    pub fn refine(&self) -> SplineEncoding {
        let c = self.config.channels;
        let k2 = self.config.segments * 2;
        let mut config = self.config.clone();
        config.segments = k2;
        let half = self.knot_spacing() / 2.0;
        let mut weights = Vec::with_capacity(self.config.projections * (k2 + 1) * c);
        let mut v = vec![0.0; c];
        for k in 0..self.config.projections {
            for j in 0..=k2 {
                let t = -self.radius + j as f64 * half;
                v.iter_mut().for_each(|x| *x = 0.0);
                self.accumulate_spline(k, t, &mut v, None);
                weights.extend_from_slice(&v);
            }
        }
        let mut out = SplineEncoding {
            config,
            radius: self.radius,
            weights,
            angles: self.angles.clone(),
            directions: self.directions.clone(),
        };
        out.refresh_directions();
        out
    }
}

/// `C (K+1) M + (d-1) M` without building an encoding.
pub fn param_count(segments: usize, channels: usize, projections: usize, dim: usize) -> usize {
    channels * (segments + 1) * projections + dim.saturating_sub(1) * projections
}
