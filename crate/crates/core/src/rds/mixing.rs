use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BaseSequence, Cylinder, RdsError, SkewProduct};

/// `μ_ω(A ∩ T^{−n}B) − μ_ω(A) μ_ω(T^{−n}B)` for a base point with `φ(n, ω) = phi`.
/// On cylinders under the product measure this is exact (dyadic).
pub fn mixing_coefficient_at(
    system: &SkewProduct,
    a: &Cylinder,
    b: &Cylinder,
    phi: i64,
) -> Result<f64, RdsError> {
    let pulled = b.preimage(phi);
    system.check_window(a)?;
    system.check_window(&pulled)?;
    let joint = a.intersect(&pulled).map_or(0.0, |c| c.mass());
    Ok(joint - a.mass() * pulled.mass())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub n: usize,
    pub samples: u64,
    /// Distinct coefficient values with their sample counts, ascending.
    pub distribution: Vec<(f64, u64)>,
    pub mean: f64,
    pub max_abs: f64,
}

/// Empirical distribution over `ω` of the fiber correlation of `A` and `T^{−n}B`.
pub fn relative_mixing_coefficient(
    system: &SkewProduct,
    a: &Cylinder,
    b: &Cylinder,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<MixingReport, RdsError> {
    if samples == 0 {
        return Err(RdsError::Domain("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let phi = BaseSequence::new(rng.next_u64()).cocycle(n);
        values.push(mixing_coefficient_at(system, a, b, phi)?);
    }
    values.sort_by(f64::total_cmp);
    let mut distribution: Vec<(f64, u64)> = Vec::new();
    for &v in &values {
        match distribution.last_mut() {
            Some((last, c)) if *last == v => *c += 1,
            _ => distribution.push((v, 1)),
        }
    }
    Ok(MixingReport {
        n,
        samples,
        mean: values.iter().sum::<f64>() / samples as f64,
        max_abs: values.iter().fold(0.0, |m, v| m.max(v.abs())),
        distribution,
    })
}
