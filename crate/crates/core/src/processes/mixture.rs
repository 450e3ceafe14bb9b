//! Half-space split sampler for two-mode targets.

use nalgebra::DMatrix;
use rand::Rng;

use crate::denoisers::GaussianDenoiser;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{dot, sym_eigen};

use super::gaussian::simulate_isotropic;
use super::ChainResult;

/// Split direction and the mass on its nonnegative side.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    /// Unit principal eigenvector of the empirical second-moment matrix.
    pub direction: Vec<f64>,
    /// Fraction of samples with `<x, v> >= 0`.
    pub q_hat: f64,
}

/// Principal direction of `sum_i x_i x_i^T / N` and the split mass.
///
/// The sign of `v` is chosen so that `q_hat >= 1/2`, counting samples on
/// the hyperplane on both sides; exact ties put the first nonzero
/// coordinate of `v` positive.
pub fn estimate_split(samples: &[Vec<f64>]) -> Result<Split> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("estimate_split needs at least one sample".into()))?;
    let n = first.len();
    if samples.iter().any(|x| x.len() != n) {
        return Err(Error::InvalidArgument("samples of unequal dimension".into()));
    }
    if samples.iter().all(|x| x.iter().all(|v| *v == 0.0)) {
        return Err(Error::InvalidArgument("all samples are zero".into()));
    }
    let mut second = DMatrix::<f64>::zeros(n, n);
    for x in samples {
        let v = nalgebra::DVector::from_column_slice(x);
        second.ger(1.0, &v, &v, 1.0);
    }
    second /= samples.len() as f64;
    let eig = sym_eigen(&second)?;
    let top = eig.eigenvalues.imax();
    let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|c| *c /= norm);

    let proj: Vec<f64> = samples.iter().map(|x| dot(x, &v)).collect();
    let plus = proj.iter().filter(|p| **p >= 0.0).count();
    let minus = proj.iter().filter(|p| **p <= 0.0).count();
    let flip = if minus != plus {
        minus > plus
    } else {
        v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
    };
    let q_plus = if flip {
        v.iter_mut().for_each(|c| *c = -*c);
        minus
    } else {
        plus
    };
    Ok(Split { direction: v, q_hat: q_plus as f64 / samples.len() as f64 })
}

/// Draws `S = +1` with probability `q_hat`, then runs the isotropic sampler
/// with the denoiser of that side. Returns the chain and `S`.
pub fn simulate_halfspace_mixture<P, M, R>(
    q_hat: f64,
    plus: &P,
    minus: &M,
    grid: &TimeGrid,
    rng: &mut R,
    snapshot_times: &[f64],
) -> Result<(ChainResult, i8)>
where
    P: GaussianDenoiser + ?Sized,
    M: GaussianDenoiser + ?Sized,
    R: Rng + ?Sized,
{
    if !(0.0..=1.0).contains(&q_hat) {
        return Err(Error::InvalidArgument(format!("q_hat = {q_hat} is not a probability")));
    }
    if plus.dim() != minus.dim() {
        return Err(Error::Dimension { expected: plus.dim(), got: minus.dim() });
    }
    if rng.random::<f64>() < q_hat {
        Ok((simulate_isotropic(plus, grid, rng, snapshot_times)?, 1))
    } else {
        Ok((simulate_isotropic(minus, grid, rng, snapshot_times)?, -1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::IsotropicComponentDenoiser;
    use crate::rng::chain_rng;
    use crate::targets::TwoGaussianMixture;

    #[test]
    fn symmetric_pair_of_atoms() {
        let s = estimate_split(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!((s.direction[0].abs() - 1.0).abs() < 1e-12);
        assert!(s.direction[0] > 0.0);
        assert!(s.q_hat >= 0.5);
    }

    #[test]
    fn single_sample() {
        let s = estimate_split(&[vec![3.0, -4.0]]).unwrap();
        assert!((s.direction[0] - 0.6).abs() < 1e-12);
        assert!((s.direction[1] + 0.8).abs() < 1e-12);
        assert_eq!(s.q_hat, 1.0);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(estimate_split(&[vec![0.0, 0.0]]).is_err());
        assert!(estimate_split(&[]).is_err());
    }

    #[test]
    fn majority_side_is_positive() {
        let samples = vec![vec![-2.0, 0.1], vec![-1.0, 0.0], vec![3.0, 0.0]];
        let s = estimate_split(&samples).unwrap();
        assert!(s.direction[0] < 0.0);
        assert!((s.q_hat - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_mixture_split() {
        let n = 128;
        let mix = TwoGaussianMixture::new(vec![1.0; n], 0.7).unwrap();
        let mut rng = chain_rng(3, 0);
        let samples: Vec<Vec<f64>> = (0..20_000).map(|_| mix.sample(&mut rng)).collect();
        let s = estimate_split(&samples).unwrap();
        let align: f64 = s.direction.iter().sum::<f64>() / (n as f64).sqrt();
        assert!(align * align > 0.95);
        // Population value 0.7 Phi(0.3 sqrt(n)) + 0.3 Phi(-0.7 sqrt(n)) = 0.6998.
        assert!((s.q_hat - 0.6998).abs() < 0.015, "{}", s.q_hat);
    }

    #[test]
    fn q_hat_one_uses_plus_side() {
        let plus = IsotropicComponentDenoiser::new(vec![1.0, 1.0], 0.0).unwrap();
        let minus = IsotropicComponentDenoiser::new(vec![-1.0, -1.0], 0.0).unwrap();
        let grid = TimeGrid::alpha_uniform(20, 10.0).unwrap();
        for i in 0..20 {
            let (r, s) = simulate_halfspace_mixture(1.0, &plus, &minus, &grid, &mut chain_rng(1, i), &[]).unwrap();
            assert_eq!(s, 1);
            assert_eq!(r.sample, vec![1.0, 1.0]);
        }
        assert!(simulate_halfspace_mixture(1.5, &plus, &minus, &grid, &mut chain_rng(1, 0), &[]).is_err());
    }
}
