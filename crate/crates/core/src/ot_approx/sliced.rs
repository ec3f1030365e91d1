use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::WeightedPointSet;
use crate::ot_exact::emd_1d_general;

pub const DEFAULT_PROJECTIONS: usize = 10;

/// Unit direction number `index`, uniform on the sphere in `d` dimensions.
///
/// Each direction has its own ChaCha stream keyed by `(seed, index)`, so a
/// direction does not depend on how many others are drawn or in what order.
pub fn projection_direction(d: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Sliced Wasserstein distance: mean 1d EMD over random projections.
pub fn swd(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    num_projections: usize,
    seed: u64,
) -> Result<f64> {
    if num_projections == 0 {
        return Err(Error::InvalidParameter(
            "num_projections must be at least 1".into(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let values = (0..num_projections)
        .into_par_iter()
        .map(|k| {
            let dir = projection_direction(a.dim(), seed, k);
            emd_1d_general(&a.project(&dir)?, &b.project(&dir)?).map(|s| s.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / num_projections as f64)
}
