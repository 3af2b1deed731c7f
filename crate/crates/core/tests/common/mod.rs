#![allow(dead_code)]

use nalgebra::Matrix2;
use nonmarkov_lqg::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random parameter sets inside the physically meaningful range.
pub fn random_params(seed: u64, count: usize) -> Vec<Params> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q11 = rng.random_range(0.2..2.0);
            let q22 = rng.random_range(0.2..2.0);
            Params {
                omega_s: rng.random_range(2.0..20.0),
                omega_0: rng.random_range(2.0..20.0),
                gamma_0: rng.random_range(0.3..3.0),
                gamma_1: rng.random_range(0.3..3.0),
                kappa: rng.random_range(0.5..4.0),
                thermal_n: rng.random_range(0.0..5.0),
                q1: Matrix2::new(q11, 0.0, 0.0, q22),
                q2: rng.random_range(0.02..1.0),
                omega_p: rng.random_range(2.0..20.0),
                ..Params::reference()
            }
        })
        .collect()
}
