use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RotationPolicy, SeedPlacement, SeedingConfig};
use crate::error::{Error, Result};

// keeps perturbation draws independent of the sampler stream for the same seed
const PERTURB_STREAM: u64 = 1;

/// Applies size jitter, the rotation policy and decoration selection.
///
/// Draws come from a ChaCha8 stream keyed by `config.rng_seed`, consumed per
/// seed in order: scale (when jitter is positive), rotation angle (random
/// policy), then decoration index (when more than one decoration exists).
pub fn perturb_seeds(
    seeds: &[SeedPlacement],
    config: &SeedingConfig,
    decoration_count: usize,
) -> Result<Vec<SeedPlacement>> {
    if decoration_count == 0 {
        return Err(Error::InvalidArgument("at least one decoration is required".into()));
    }
    let jitter = config.size_jitter;
    if !(0.0..=0.1).contains(&jitter) {
        return Err(Error::InvalidArgument(format!("size jitter must be in [0, 0.1], got {jitter}")));
    }
    if config.rotation_policy == RotationPolicy::Alternate180 && seeds.iter().any(|s| s.stripe_uv.is_none()) {
        return Err(Error::MissingStripeCoordinates);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(PERTURB_STREAM);
    let out = seeds
        .iter()
        .map(|seed| {
            let mut s = seed.clone();
            if jitter > 0.0 {
                s.scale *= rng.random_range(1.0 - jitter..=1.0 + jitter);
            }
            match config.rotation_policy {
                RotationPolicy::None | RotationPolicy::FieldAligned => {}
                RotationPolicy::Random => {
                    let angle = rng.random_range(0.0..TAU);
                    let b = s.normal.cross(&s.tangent);
                    s.tangent = (s.tangent * angle.cos() + b * angle.sin()).normalize();
                }
                RotationPolicy::Alternate180 => {
                    let [u, v] = s.stripe_uv.expect("checked above");
                    if (u + v).rem_euclid(2) == 1 {
                        s.tangent = -s.tangent;
                    }
                }
            }
            if decoration_count > 1 {
                s.decoration_index = rng.random_range(0..decoration_count);
            } else {
                s.decoration_index = 0;
            }
            s
        })
        .collect();
    Ok(out)
}
