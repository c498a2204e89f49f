//! Space-filling initial designs.

use crate::error::{Error, Result};
use crate::pareto::{BoxDomain, InputPoint};

/// First `n` points of an Owen-scrambled Sobol sequence over `domain`.
/// Different seeds give independent scramblings.
pub fn sobol_design(domain: &BoxDomain, n: usize, seed: u64) -> Result<Vec<InputPoint>> {
    let d = domain.dim();
    if d > sobol_burley::NUM_DIMENSIONS as usize {
        return Err(Error::Contract(format!(
            "Sobol design supports at most {} dimensions, got {d}",
            sobol_burley::NUM_DIMENSIONS
        )));
    }
    // fold the 64-bit seed into the 32-bit scrambling seed
    let seed = (seed ^ (seed >> 32)) as u32;
    Ok((0..n as u32)
        .map(|i| {
            let u: Vec<f64> = (0..d as u32)
                .map(|j| sobol_burley::sample(i, j, seed) as f64)
                .collect();
            InputPoint(domain.from_unit(&u))
        })
        .collect())
}
