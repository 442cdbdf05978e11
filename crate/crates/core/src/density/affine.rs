use serde::{Deserialize, Serialize};

use super::DensityError;

/// Per-dimension affine map `x = scale * z + shift` from standardized to
/// original coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    scale: Vec<f64>,
    shift: Vec<f64>,
}

impl AffineTransform {
    pub fn new(scale: Vec<f64>, shift: Vec<f64>) -> Result<Self, DensityError> {
        if scale.len() != shift.len() || scale.is_empty() {
            return Err(DensityError::Invalid(format!(
                "affine scale has {} entries but shift has {}",
                scale.len(),
                shift.len()
            )));
        }
        if let Some((d, s)) = scale.iter().enumerate().find(|(_, s)| !(**s > 0.0) || !s.is_finite()) {
            return Err(DensityError::Invalid(format!("affine scale[{d}] = {s} must be positive")));
        }
        if let Some((d, s)) = shift.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(DensityError::Invalid(format!("affine shift[{d}] = {s} must be finite")));
        }
        Ok(Self { scale, shift })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Standardized -> original.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.scale)
            .zip(&self.shift)
            .map(|((z, s), b)| s * z + b)
            .collect()
    }

    /// Original -> standardized.
    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scale)
            .zip(&self.shift)
            .map(|((x, s), b)| (x - b) / s)
            .collect()
    }

    /// `sum(log(scale))`, the log-Jacobian of `apply`.
    pub fn log_jacobian(&self) -> f64 {
        self.scale.iter().map(|s| s.ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(AffineTransform::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(AffineTransform::new(vec![1.0, -2.0], vec![0.0, 0.0]).is_err());
        assert!(AffineTransform::new(vec![1.0], vec![0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn apply_invert_round_trip(
            scale in proptest::collection::vec(0.1f64..10.0, 1..6),
            shift_seed in -10f64..10.0,
            z_seed in -10f64..10.0,
        ) {
            let d = scale.len();
            let shift: Vec<f64> = (0..d).map(|i| shift_seed * (i as f64 + 1.0).sin()).collect();
            let z: Vec<f64> = (0..d).map(|i| z_seed * (i as f64 + 0.5).cos()).collect();
            let t = AffineTransform::new(scale, shift).unwrap();
            let back = t.invert(&t.apply(&z));
            for (a, b) in z.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            let x = t.apply(&z);
            let again = t.apply(&t.invert(&x));
            for (a, b) in x.iter().zip(&again) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
