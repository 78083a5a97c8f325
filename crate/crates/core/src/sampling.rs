//! Seeded sample points on a surface.

use rand::Rng;

use crate::error::Result;
use crate::geom::C64;
use crate::surface::{ChartPoint, DelPezzo};

/// Uniform random homogeneous coordinates in the unit polydisc, mapped to
/// their best chart; points with `‖σ‖ < min_norm` are redrawn.
pub fn random_points<R: Rng + ?Sized>(dp: &DelPezzo, rng: &mut R, count: usize, min_norm: f64) -> Result<Vec<ChartPoint>> {
    let slots = dp.kind().slot_count();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<C64> = (0..slots)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let Ok(p) = dp.point(&x) else { continue };
        if dp.section_norm(&p)? >= min_norm {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_filtered() {
        let dp = DelPezzo::e2();
        let a = random_points(&dp, &mut ChaCha8Rng::seed_from_u64(7), 50, 0.05).unwrap();
        let b = random_points(&dp, &mut ChaCha8Rng::seed_from_u64(7), 50, 0.05).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.max_modulus() <= 1.0 + 1e-12);
            assert!(dp.section_norm(p).unwrap() >= 0.05);
        }
    }
}
