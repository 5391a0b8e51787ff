//! Seeded sampling of points in balls.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complexad::CPoint;

/// `count` points drawn uniformly from the open ball of the given radius in ℂⁿ.
///
/// Rejection sampling from the enclosing cube; deterministic for a given seed.
pub fn sample_ball(n: usize, radius: f64, count: usize, seed: u64) -> Vec<CPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)))
            .collect();
        let t: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        if t < radius * radius {
            out.push(CPoint::new(c).expect("finite sample"));
        }
    }
    out
}
