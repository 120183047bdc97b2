//! Camera model and the motion-dependent shuttle perception model.
//!
//! A frame yields a detection with a probability that is a clamped linear function of the
//! camera-to-shuttle distance and the apparent angular rate of the shuttle, provided the
//! shuttle is inside the rectangular field of view. Detected positions carry isotropic
//! Gaussian noise whose standard deviation is linear in the same regressors.

mod camera;
mod color;
mod fit;
mod noise;

pub use camera::{
    line_of_sight_rate, look_rotation, CameraIntrinsics, CameraModel, CameraPose, CameraSample,
    CameraTrack,
};
pub use color::{hsv_gate, HsvThresholds};
pub use fit::{fit_noise_model, fit_noise_model_with, FitSample, NoiseFit, ErrorNormScale};
pub use noise::{
    detection_probability, measurement_std, observe, observe_detailed, LinearCoeffs, Measurement,
    NoiseModel, Observation, RateSource, DEFAULT_STD_FLOOR,
};
