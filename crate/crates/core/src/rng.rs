//! Seeded sampling: a splitmix64 generator plus the shell, ball and
//! direction samplers used by the estimators.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::space::{NormKind, Vector};

pub const DEFAULT_SEED: u64 = 42;

/// Splitmix64 (Steele, Lea, Flood). Small state, good enough mixing for
/// sampling, and trivially reproducible across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives an independent stream for a labelled sub-task.
    pub fn derive(seed: u64, label: u64) -> Self {
        let mut g = SplitMix64::new(seed ^ label.wrapping_mul(0xD605_0D2C_EA1A_A6B1));
        g.next_u64();
        g
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Uniform random direction, unit length in `norm`.
pub fn unit_direction(dim: usize, norm: NormKind, rng: &mut impl Rng) -> Vector {
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(u) = norm.normalize(&g) {
            return u;
        }
    }
}

/// Uniform sample from the closed ball (cube for the max norm).
pub fn uniform_in_ball(center: &Vector, radius: f64, norm: NormKind, rng: &mut impl Rng) -> Vector {
    let dim = center.len();
    match norm {
        NormKind::Max => center + Vector::from_fn(dim, |_, _| rng.gen_range(-radius..=radius)),
        NormKind::Euclidean => {
            let u = unit_direction(dim, norm, rng);
            let s: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
            center + u * (radius * s)
        }
    }
}

fn fract(v: f64) -> f64 {
    v - v.floor()
}

/// Points in the annulus r_in < ‖p − center‖ ≤ r_out.
///
/// One dimension: equispaced radii on both sides. Two dimensions: an R2
/// low-discrepancy sequence with a seeded offset. Higher: seeded uniform.
pub fn shell_points(
    center: &Vector,
    r_in: f64,
    r_out: f64,
    count: usize,
    norm: NormKind,
    seed: u64,
) -> Vec<Vector> {
    let dim = center.len();
    let mut rng = SplitMix64::new(seed);
    match dim {
        1 => {
            let per_side = count.div_ceil(2).max(1);
            let mut out = Vec::with_capacity(2 * per_side);
            for k in 0..per_side {
                let r = r_in + (k + 1) as f64 * (r_out - r_in) / per_side as f64;
                out.push(center.add_scalar(r));
                out.push(center.add_scalar(-r));
            }
            out.truncate(count.max(1));
            out
        }
        2 => {
            // Roberts' R2 sequence: additive recurrence with the plastic number.
            let g = 1.324_717_957_244_746_f64;
            let (a1, a2) = (1.0 / g, 1.0 / (g * g));
            let (o1, o2) = (rng.gen::<f64>(), rng.gen::<f64>());
            (0..count)
                .map(|i| {
                    let u1 = fract(o1 + a1 * (i + 1) as f64);
                    let u2 = fract(o2 + a2 * (i + 1) as f64);
                    let r = (r_in * r_in + u1 * (r_out * r_out - r_in * r_in)).sqrt().max(r_in * (1.0 + 1e-12));
                    let theta = std::f64::consts::TAU * u2;
                    let d = Vector::from_column_slice(&[theta.cos(), theta.sin()]);
                    let d = norm.normalize(&d).expect("unit circle point is nonzero");
                    center + d * r
                })
                .collect()
        }
        _ => (0..count)
            .map(|_| {
                let u = unit_direction(dim, norm, &mut rng);
                let r = rng.gen_range(r_in..=r_out).max(r_in * (1.0 + 1e-12));
                center + u * r
            })
            .collect(),
    }
}

/// Unit directions for ball-inclusion tests: ±1 in one dimension, evenly
/// spaced angles (seeded rotation) in two, seeded uniform otherwise.
pub fn directions(dim: usize, count: usize, norm: NormKind, seed: u64) -> Vec<Vector> {
    let mut rng = SplitMix64::new(seed);
    match dim {
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => {
            let offset = rng.gen::<f64>() * std::f64::consts::TAU / count as f64;
            (0..count)
                .map(|k| {
                    let th = offset + std::f64::consts::TAU * k as f64 / count as f64;
                    let d = Vector::from_column_slice(&[th.cos(), th.sin()]);
                    norm.normalize(&d).expect("nonzero")
                })
                .collect()
        }
        _ => (0..count).map(|_| unit_direction(dim, norm, &mut rng)).collect(),
    }
}
