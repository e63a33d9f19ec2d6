//! Principal component codec for flattened trajectories.

use super::matrix::{symmetric_eigen, Matrix};
use crate::error::{Error, Result};

/// Linear codec onto the top-`k` principal directions of a sample set.
///
/// `components` holds one unit direction per row. Each direction is
/// signed so that its largest-magnitude entry is positive, which makes
/// fitting deterministic for a fixed input order.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCodec {
    mean: Vec<f64>,
    components: Matrix,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

impl PcaCodec {
    pub fn fit(samples: &[Vec<f64>], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidData("latent dimension must be at least 1".into()));
        }
        if samples.len() < k {
            return Err(Error::InsufficientData(format!(
                "{} samples for {k} components",
                samples.len()
            )));
        }
        let dim = samples[0].len();
        if k > dim {
            return Err(Error::InvalidData(format!(
                "latent dimension {k} exceeds ambient dimension {dim}"
            )));
        }
        for s in samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite sample".into()));
            }
        }

        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = Matrix::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for s in samples {
            for (c, (v, m)) in centered.iter_mut().zip(s.iter().zip(&mean)) {
                *c = v - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                let row = cov.row_mut(i);
                for j in i..dim {
                    row[j] += ci * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / n;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let total_variance = (0..dim).map(|i| cov[(i, i)]).sum();

        let (values, vectors) = symmetric_eigen(&cov)?;
        let mut components = Matrix::zeros(k, dim);
        for r in 0..k {
            let v = vectors.row(r);
            let mut lead = 0;
            for (j, x) in v.iter().enumerate() {
                if x.abs() > v[lead].abs() + 1e-12 {
                    lead = j;
                }
            }
            let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
            for (dst, x) in components.row_mut(r).iter_mut().zip(v) {
                *dst = sign * x;
            }
        }
        // Round-off can leave tiny negatives on zero-variance directions.
        let explained_variance = values[..k].iter().map(|v| v.max(0.0)).collect();

        Ok(Self {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    /// Rebuilds a codec; `total_variance` is the trace of the fitted covariance.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Matrix,
        explained_variance: Vec<f64>,
        total_variance: f64,
    ) -> Result<Self> {
        if components.cols() != mean.len() || components.rows() != explained_variance.len() {
            return Err(Error::InvalidData("inconsistent PCA codec shapes".into()));
        }
        if mean.iter().chain(&explained_variance).any(|v| !v.is_finite()) || !total_variance.is_finite() {
            return Err(Error::numeric("PCA codec parameters"));
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.components.rows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Fraction of the sample variance captured by the retained components.
    pub fn retained_variance_ratio(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        self.explained_variance.iter().sum::<f64>() / self.total_variance
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components.matvec(&centered)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                got: z.len(),
            });
        }
        let mut x = self.components.matvec_t(z)?;
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v += m;
        }
        Ok(x)
    }

    /// Pulls an ambient-space gradient back to latent coordinates.
    pub fn pullback(&self, grad_x: &[f64]) -> Result<Vec<f64>> {
        self.components.matvec(grad_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng::RngStream;

    fn random_samples(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = RngStream::new(seed, 0);
        (0..n)
            .map(|_| (0..d).map(|j| r.gaussian() * (1.0 + j as f64)).collect())
            .collect()
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let v = vec![1.5, -2.0, 0.25];
        let codec = PcaCodec::fit(&[v.clone(), v.clone(), v.clone()], 1).unwrap();
        assert_eq!(codec.mean(), &v[..]);
        assert_eq!(codec.explained_variance(), &[0.0]);
    }

    #[test]
    fn symmetric_pair_matches_closed_form_eigensystem() {
        // Covariance of {(1,0), (-1,0)} is diag(1, 0); its top eigenvector
        // is e_1 with eigenvalue 1 (characteristic polynomial λ(λ-1)).
        let codec = PcaCodec::fit(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1).unwrap();
        let c = codec.components().row(0);
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
        assert!((codec.explained_variance()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_basis_round_trips() {
        let samples = random_samples(50, 6, 9);
        let codec = PcaCodec::fit(&samples, 6).unwrap();
        let mut r = RngStream::new(10, 0);
        let x = r.gaussian_vec(6);
        let back = codec.decode(&codec.encode(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn encode_of_mean_and_first_component() {
        let samples = random_samples(40, 5, 2);
        let codec = PcaCodec::fit(&samples, 3).unwrap();
        let z = codec.encode(codec.mean()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        let x: Vec<f64> = codec
            .mean()
            .iter()
            .zip(codec.components().row(0))
            .map(|(m, c)| m + c)
            .collect();
        let z = codec.encode(&x).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10);
        assert!(z[1].abs() < 1e-10 && z[2].abs() < 1e-10);
        assert_eq!(codec.decode(&[0.0; 3]).unwrap(), codec.mean());
    }

    #[test]
    fn variances_sorted_and_components_orthonormal() {
        let samples = random_samples(100, 8, 4);
        let codec = PcaCodec::fit(&samples, 5).unwrap();
        let ev = codec.explained_variance();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        let c = codec.components();
        let g = c.matmul(&c.transpose()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let samples = random_samples(30, 4, 11);
        let codec = PcaCodec::fit(&samples, 4).unwrap();
        for r in 0..4 {
            let row = codec.components().row(r);
            let lead = row
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            PcaCodec::fit(&[vec![0.0, 1.0]], 2),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            PcaCodec::fit(&[vec![0.0, f64::NAN], vec![1.0, 1.0]], 1),
            Err(Error::InvalidData(_))
        ));
        let codec = PcaCodec::fit(&random_samples(10, 3, 1), 2).unwrap();
        assert!(codec.encode(&[0.0; 4]).is_err());
        assert!(codec.decode(&[0.0; 3]).is_err());
    }
}
