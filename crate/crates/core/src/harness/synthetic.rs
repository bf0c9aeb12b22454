//! Isotropic Gaussian blobs, one class per center.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};

/// `per_class` points around each center with standard deviation `sigma`
/// on every axis. Sample ids run from 0 in class order.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    per_class: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if centers.is_empty() || per_class == 0 {
        return Err(Error::EmptyDataset);
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidConfig(format!("blob sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(centers.len() * per_class);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let features = center.iter().map(|c| c + normal.sample(&mut rng)).collect();
            samples.push(LabeledSample::new(samples.len() as u64, class as u32, features));
        }
    }
    Dataset::new(samples, centers.len() as u32)
}
