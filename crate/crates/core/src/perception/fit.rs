use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::{LinearCoeffs, NoiseModel, DEFAULT_STD_FLOOR};
use crate::error::{Error, Result};

/// One calibration frame: regressors, whether the shuttle was detected and, if so, the
/// norm of the position error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub distance: f64,
    pub ang_rate: f64,
    pub detected: bool,
    pub error_norm: Option<f64>,
}

/// How error norms map onto the per-axis standard deviation stored in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNormScale {
    /// Coefficients describe the error norm directly.
    #[default]
    Raw,
    /// Divide by `E|N(0, I3)| = sqrt(8 / pi)` so the coefficients are the per-axis std of
    /// isotropic Gaussian noise.
    IsotropicAxisStd,
}

impl ErrorNormScale {
    fn factor(self) -> f64 {
        match self {
            ErrorNormScale::Raw => 1.0,
            ErrorNormScale::IsotropicAxisStd => (std::f64::consts::PI / 8.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub model: NoiseModel,
    /// Standard errors of (intercept, per_distance, per_angvel).
    pub detect_se: [f64; 3],
    pub noise_std_se: [f64; 3],
    pub n_detect: usize,
    pub n_error: usize,
}

pub fn fit_noise_model(samples: &[FitSample]) -> Result<NoiseFit> {
    fit_noise_model_with(samples, ErrorNormScale::Raw)
}

/// Ordinary least squares of the detection indicator (linear probability model) and of the
/// error norm on `[1, distance, ang_rate]`.
pub fn fit_noise_model_with(samples: &[FitSample], scale: ErrorNormScale) -> Result<NoiseFit> {
    let rows: Vec<([f64; 3], f64)> = samples
        .iter()
        .map(|s| ([1.0, s.distance, s.ang_rate], if s.detected { 1.0 } else { 0.0 }))
        .collect();
    let (detect, detect_se) = ols(&rows).map_err(|e| Error::Fit(format!("detection: {e}")))?;

    let error_rows: Vec<([f64; 3], f64)> = samples
        .iter()
        .filter_map(|s| s.error_norm.map(|e| ([1.0, s.distance, s.ang_rate], e)))
        .collect();
    let (noise, noise_se) =
        ols(&error_rows).map_err(|e| Error::Fit(format!("noise std: {e}")))?;

    let k = scale.factor();
    Ok(NoiseFit {
        model: NoiseModel {
            detect: LinearCoeffs::new(detect[0], detect[1], detect[2]),
            noise_std: LinearCoeffs::new(noise[0] * k, noise[1] * k, noise[2] * k),
            std_floor: DEFAULT_STD_FLOOR,
            range_factor: 1.0,
        },
        detect_se,
        noise_std_se: noise_se.map(|s| s * k),
        n_detect: rows.len(),
        n_error: error_rows.len(),
    })
}

/// Least squares through the SVD of the design matrix; returns coefficients and their
/// homoscedastic standard errors.
fn ols(rows: &[([f64; 3], f64)]) -> std::result::Result<([f64; 3], [f64; 3]), String> {
    let n = rows.len();
    if n < 3 {
        return Err(format!("need at least 3 samples, got {n}"));
    }
    if rows.iter().any(|(x, y)| !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return Err("non-finite sample".into());
    }
    let x = DMatrix::from_fn(n, 3, |i, j| rows[i].0[j]);
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.1));

    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min <= s_max * 1e-10 {
        return Err("design matrix is rank deficient".into());
    }
    let beta = svd
        .solve(&y, 0.0)
        .map_err(|e| format!("least squares solve failed: {e}"))?;

    let resid = &y - &x * &beta;
    let dof = n.saturating_sub(3);
    let sigma2 = if dof > 0 {
        resid.norm_squared() / dof as f64
    } else {
        0.0
    };
    // (X^T X)^-1 = V S^-2 V^T
    let v_t = svd.v_t.as_ref().ok_or("missing V^T")?;
    let mut se = [0.0; 3];
    for (j, out) in se.iter_mut().enumerate() {
        let var: f64 = (0..3)
            .map(|k| (v_t[(k, j)] / svd.singular_values[k]).powi(2))
            .sum();
        *out = (sigma2 * var).sqrt();
    }
    Ok(([beta[0], beta[1], beta[2]], se))
}
