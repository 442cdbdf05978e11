//! Fixed test and benchmark targets.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{AffineTransform, BenchmarkDensity, DensityError, MixtureOfGaussians};
use crate::rng;

pub const BUNDLED_NAMES: [&str; 8] = [
    "gauss-1d",
    "mog2-1d",
    "corr-2d",
    "mog2-2d",
    "gauss-10d",
    "illcond-10d",
    "mog8-10d",
    "mog4-20d",
];

/// All bundled densities, in [`BUNDLED_NAMES`] order.
pub fn bundled() -> Vec<BenchmarkDensity> {
    BUNDLED_NAMES
        .iter()
        .map(|n| bundled_by_name(n).expect("bundled densities are valid"))
        .collect()
}

pub fn bundled_by_name(name: &str) -> Result<BenchmarkDensity, DensityError> {
    match name {
        "gauss-1d" => standard_normal(name, 1),
        "gauss-10d" => standard_normal(name, 10),
        "mog2-1d" => BenchmarkDensity::new(
            name,
            MixtureOfGaussians::new(
                vec![0.7, 0.3],
                vec![vec![-0.6], vec![1.4]],
                vec![vec![vec![0.5]], vec![vec![0.6]]],
            )?,
            AffineTransform::new(vec![3.0], vec![2.0])?,
        ),
        "corr-2d" => {
            let rho: f64 = 0.9;
            BenchmarkDensity::new(
                name,
                MixtureOfGaussians::new(
                    vec![1.0],
                    vec![vec![0.0, 0.0]],
                    vec![vec![vec![1.0, 0.0], vec![rho, (1.0 - rho * rho).sqrt()]]],
                )?,
                AffineTransform::new(vec![1.0, 4.0], vec![-1.0, 3.0])?,
            )
        }
        "mog2-2d" => BenchmarkDensity::new(
            name,
            MixtureOfGaussians::from_covariances(
                vec![0.6, 0.4],
                vec![vec![-1.2, 0.3], vec![1.3, -0.4]],
                &[
                    DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.4]),
                    DMatrix::from_row_slice(2, 2, &[0.3, -0.1, -0.1, 0.6]),
                ],
            )?,
            AffineTransform::new(vec![2.0, 0.5], vec![1.0, -1.0])?,
        ),
        "illcond-10d" => ill_conditioned(name, 10, 1e4),
        "mog8-10d" => random_mixture(name, 10, 8, 0x10d8),
        "mog4-20d" => random_mixture(name, 20, 4, 0x20d4),
        other => Err(DensityError::UnknownBundled(other.to_string())),
    }
}

fn standard_normal(name: &str, dim: usize) -> Result<BenchmarkDensity, DensityError> {
    let mut chol = vec![vec![0.0; dim]; dim];
    for (i, row) in chol.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    BenchmarkDensity::new(
        name,
        MixtureOfGaussians::new(vec![1.0], vec![vec![0.0; dim]], vec![chol])?,
        AffineTransform::identity(dim),
    )
}

/// Fixed orthogonal matrix from the QR decomposition of a seeded Gaussian matrix.
fn rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::from_seed(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut r));
    g.qr().q()
}

/// Rotated Gaussian whose covariance eigenvalues are log-spaced with the
/// given condition number (geometric mean 1).
fn ill_conditioned(name: &str, dim: usize, condition: f64) -> Result<BenchmarkDensity, DensityError> {
    let q = rotation(dim, 0x111c);
    let half = condition.log10() / 2.0;
    let eig = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| {
        10f64.powf(-half + 2.0 * half * i as f64 / (dim - 1) as f64)
    }));
    let cov = &q * eig * q.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    BenchmarkDensity::new(
        name,
        MixtureOfGaussians::from_covariances(vec![1.0], vec![vec![0.0; dim]], &[cov])?,
        AffineTransform::identity(dim),
    )
}

/// Overlapping mixture with seeded means, random SPD covariances and
/// uneven weights, mapped to a heterogeneous original scale.
fn random_mixture(name: &str, dim: usize, k: usize, seed: u64) -> Result<BenchmarkDensity, DensityError> {
    let mut r = rng::from_seed(seed);
    let raw: Vec<f64> = (0..k).map(|_| 0.5 + r.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    let means = (0..k)
        .map(|_| (0..dim).map(|_| { let z: f64 = StandardNormal.sample(&mut r); 1.2 * z }).collect())
        .collect();
    let covs: Vec<DMatrix<f64>> = (0..k)
        .map(|c| {
            let q = rotation(dim, seed ^ (c as u64 + 1) * 0x9e37);
            let eig = nalgebra::DVector::from_fn(dim, |_, _| 0.3 + 1.2 * r.random::<f64>());
            let cov = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            (&cov + cov.transpose()) * 0.5
        })
        .collect();
    let scale = (0..dim).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (dim - 1) as f64)).collect();
    let shift = (0..dim).map(|i| (i as f64 - dim as f64 / 2.0) * 0.5).collect();
    BenchmarkDensity::new(
        name,
        MixtureOfGaussians::from_covariances(weights, means, &covs)?,
        AffineTransform::new(scale, shift)?,
    )
}
