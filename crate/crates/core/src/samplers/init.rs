use serde::{Deserialize, Serialize};

use super::standard_normal;
use crate::density::BenchmarkDensity;
use crate::rng::Rng;

/// Exact draws used for the diagonal moment-matched fit.
pub const FIT_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Start from exact draws of the target.
    Exact,
    /// Start from a diagonal Gaussian moment-matched to the target.
    Approx,
}

impl std::str::FromStr for InitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "approx" => Ok(Self::Approx),
            other => Err(format!("unknown init mode {other:?} (expected exact or approx)")),
        }
    }
}

/// Starting points plus the per-dimension scale guess handed to samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInit {
    pub points: Vec<Vec<f64>>,
    pub scale_guess: Vec<f64>,
}

/// Harness-side chain initialization. Uses the private face of the density.
///
/// The scale guess is the standard deviation of a diagonal Gaussian fit to
/// [`FIT_DRAWS`] exact draws in both modes. In exact mode the starting
/// points are drawn before the fit, so the first point equals the first row
/// of `sample_exact` on the same stream.
pub fn init_chain(mode: InitMode, density: &BenchmarkDensity, n_points: usize, rng: &mut Rng) -> ChainInit {
    let exact = match mode {
        InitMode::Exact => Some(density.sample_exact(n_points, rng)),
        InitMode::Approx => None,
    };
    let (mean, std) = density.sample_exact(FIT_DRAWS, rng).column_mean_std();
    let points = match exact {
        Some(m) => m.rows().map(<[f64]>::to_vec).collect(),
        None => (0..n_points)
            .map(|_| mean.iter().zip(&std).map(|(m, s)| m + s * standard_normal(rng)).collect())
            .collect(),
    };
    ChainInit {
        points,
        scale_guess: std,
    }
}
