//! Random Fourier feature encoding, used as a comparison baseline.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Default standard deviation of the sampled frequencies.
pub const DEFAULT_SIGMA: f64 = 4.0;

/// `x -> [sin(2π w_1ᵀx), cos(2π w_1ᵀx), ..., sin(2π w_Mᵀx), cos(2π w_Mᵀx)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEncoding {
    dim: usize,
    /// `M_f x d`, row-major.
    frequencies: Vec<f64>,
}

impl FourierEncoding {
    pub fn new(dim: usize, frequencies: Vec<f64>) -> Result<Self> {
        if dim == 0 || frequencies.is_empty() || frequencies.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "frequency matrix of {} entries is not a non-empty multiple of dimension {dim}",
                frequencies.len()
            )));
        }
        Ok(FourierEncoding { dim, frequencies })
    }

    /// Rows drawn from `Normal(0, sigma²)`.
    pub fn random<R: Rng + ?Sized>(dim: usize, count: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::invalid(format!("bad frequency sigma {sigma}: {e}")))?;
        Self::new(dim, (0..count * dim).map(|_| normal.sample(rng)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frequency_count(&self) -> usize {
        self.frequencies.len() / self.dim
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn out_dim(&self) -> usize {
        2 * self.frequency_count()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.out_dim()];
        self.encode_into(x, &mut out, None);
        Ok(out)
    }

    /// `2M_f x d` Jacobian of [`encode`](Self::encode).
    pub fn encode_jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut v = vec![0.0; self.out_dim()];
        let mut j = vec![0.0; self.out_dim() * self.dim];
        self.encode_into(x, &mut v, Some(&mut j));
        Ok(Array2::from_shape_vec((self.out_dim(), self.dim), j).expect("shape"))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, encoding expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_into(&self, x: &[f64], value: &mut [f64], jac: Option<&mut [f64]>) {
        let d = self.dim;
        let mut jac = jac;
        for (j, w) in self.frequencies.chunks_exact(d).enumerate() {
            let arg = 2.0 * PI * w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let (s, c) = arg.sin_cos();
            value[2 * j] = s;
            value[2 * j + 1] = c;
            if let Some(jac) = jac.as_deref_mut() {
                for i in 0..d {
                    jac[2 * j * d + i] = 2.0 * PI * c * w[i];
                    jac[(2 * j + 1) * d + i] = -2.0 * PI * s * w[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_maps_to_zero_one() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let fe = FourierEncoding::random(3, 5, DEFAULT_SIGMA, &mut r).unwrap();
        let e = fe.encode(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.len(), 10);
        for j in 0..5 {
            assert_eq!(e[2 * j], 0.0);
            assert_eq!(e[2 * j + 1], 1.0);
        }
    }

    #[test]
    fn quarter_period() {
        let fe = FourierEncoding::new(3, vec![1.0, 0.0, 0.0]).unwrap();
        let e = fe.encode(&[0.25, 7.0, -2.0]).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15);
        assert!(e[1].abs() < 1e-15);
    }

    #[test]
    fn matches_direct_formula() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let fe = FourierEncoding::random(2, 7, 2.0, &mut r).unwrap();
        let x = [0.31, -0.77];
        let e = fe.encode(&x).unwrap();
        for j in 0..7 {
            let w = &fe.frequencies()[2 * j..2 * j + 2];
            let a = 2.0 * PI * (w[0] * x[0] + w[1] * x[1]);
            assert!((e[2 * j] - a.sin()).abs() < 1e-14);
            assert!((e[2 * j + 1] - a.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let fe = FourierEncoding::random(3, 4, 1.5, &mut r).unwrap();
        let x = [0.1, 0.2, -0.3];
        let j = fe.encode_jacobian(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (fp, fm) = (fe.encode(&xp).unwrap(), fe.encode(&xm).unwrap());
            for o in 0..8 {
                let fd = (fp[o] - fm[o]) / (2.0 * h);
                assert!((j[[o, i]] - fd).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_ragged_matrix() {
        assert!(FourierEncoding::new(3, vec![1.0, 2.0]).is_err());
        assert!(FourierEncoding::new(3, vec![]).is_err());
    }
}
