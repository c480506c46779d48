//! Shared fixtures for the criterion benches.

use gmi_core::samples::{generate_gaussian, GaussianSpec};
use gmi_core::PairedSampleSet;

/// Equicorrelated Gaussian sample split evenly into x and y blocks.
pub fn gaussian_sample(d: usize, n: usize, rho: f64, seed: u64) -> PairedSampleSet {
    generate_gaussian(&GaussianSpec::split(d, rho, n, seed)).expect("valid Gaussian fixture")
}

/// Row-major points of a standard normal cloud.
pub fn point_cloud(d: usize, n: usize, seed: u64) -> Vec<f64> {
    generate_gaussian(&GaussianSpec::standard(d, n, seed))
        .expect("valid Gaussian fixture")
        .into_inner()
}
