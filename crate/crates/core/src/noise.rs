//! Seeded gradient (Perlin) noise and fractal sums of it.
//!
//! All fields in the simulator, static and dynamic, are sampled from
//! [`GradientNoise`]. A noise instance is fully determined by its seed: the
//! seed drives a Fisher-Yates shuffle of the lattice permutation table.

use rand::Rng as _;

use crate::rng;

/// Octaves summed by [`GradientNoise::fbm2`] / [`GradientNoise::fbm3`].
pub const OCTAVES: u32 = 4;
/// Amplitude ratio between successive octaves.
pub const PERSISTENCE: f64 = 0.5;

/// Divisor mapping a raw fractal sum onto roughly `[-1, 1]` before the
/// final affine map to `[0, 1]`. Raw 2-D Perlin noise with unit gradients is
/// bounded by `sqrt(1/2)`, but fractal sums concentrate well inside their
/// bound; these constants stretch the bulk of the distribution over the unit
/// interval and the tails are clamped.
const SPREAD_2D: f64 = 0.55;
const SPREAD_3D: f64 = 0.65;

const GRAD2: [[f64; 2]; 8] = [
    [1.0, 0.0],
    [-1.0, 0.0],
    [0.0, 1.0],
    [0.0, -1.0],
    [core::f64::consts::FRAC_1_SQRT_2, core::f64::consts::FRAC_1_SQRT_2],
    [-core::f64::consts::FRAC_1_SQRT_2, core::f64::consts::FRAC_1_SQRT_2],
    [core::f64::consts::FRAC_1_SQRT_2, -core::f64::consts::FRAC_1_SQRT_2],
    [-core::f64::consts::FRAC_1_SQRT_2, -core::f64::consts::FRAC_1_SQRT_2],
];

const GRAD3: [[f64; 3]; 16] = [
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [0.0, 1.0, -1.0],
    [0.0, -1.0, -1.0],
    // padding to 16 entries, as in the reference improved-noise table
    [1.0, 1.0, 0.0],
    [0.0, -1.0, 1.0],
    [-1.0, 1.0, 0.0],
    [0.0, -1.0, -1.0],
];

#[derive(Clone)]
pub struct GradientNoise {
    perm: [u8; 512],
}

impl core::fmt::Debug for GradientNoise {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GradientNoise").finish_non_exhaustive()
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(t: f64, a: f64, b: f64) -> f64 {
    a + t * (b - a)
}

impl GradientNoise {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng::stream(seed);
        let mut table = [0u8; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            *slot = i as u8;
        }
        for i in (1..256).rev() {
            let j = rng.random_range(0..=i);
            table.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        Self { perm }
    }

    #[inline]
    fn hash2(&self, x: usize, y: usize) -> usize {
        self.perm[self.perm[x] as usize + y] as usize
    }

    #[inline]
    fn hash3(&self, x: usize, y: usize, z: usize) -> usize {
        self.perm[self.perm[self.perm[x] as usize + y] as usize + z] as usize
    }

    /// Single-octave 2-D noise, roughly in `[-0.71, 0.71]`.
    pub fn noise2(&self, x: f64, y: f64) -> f64 {
        let xf = libm::floor(x);
        let yf = libm::floor(y);
        let xi = (xf as i64 & 255) as usize;
        let yi = (yf as i64 & 255) as usize;
        let dx = x - xf;
        let dy = y - yf;

        let dot = |h: usize, px: f64, py: f64| {
            let g = GRAD2[h & 7];
            g[0] * px + g[1] * py
        };
        let n00 = dot(self.hash2(xi, yi), dx, dy);
        let n10 = dot(self.hash2(xi + 1, yi), dx - 1.0, dy);
        let n01 = dot(self.hash2(xi, yi + 1), dx, dy - 1.0);
        let n11 = dot(self.hash2(xi + 1, yi + 1), dx - 1.0, dy - 1.0);

        let u = fade(dx);
        let v = fade(dy);
        lerp(v, lerp(u, n00, n10), lerp(u, n01, n11))
    }

    /// Single-octave 3-D noise, roughly in `[-1, 1]`.
    pub fn noise3(&self, x: f64, y: f64, z: f64) -> f64 {
        let xf = libm::floor(x);
        let yf = libm::floor(y);
        let zf = libm::floor(z);
        let xi = (xf as i64 & 255) as usize;
        let yi = (yf as i64 & 255) as usize;
        let zi = (zf as i64 & 255) as usize;
        let dx = x - xf;
        let dy = y - yf;
        let dz = z - zf;

        let dot = |h: usize, px: f64, py: f64, pz: f64| {
            let g = GRAD3[h & 15];
            g[0] * px + g[1] * py + g[2] * pz
        };
        let u = fade(dx);
        let v = fade(dy);
        let w = fade(dz);

        let c000 = dot(self.hash3(xi, yi, zi), dx, dy, dz);
        let c100 = dot(self.hash3(xi + 1, yi, zi), dx - 1.0, dy, dz);
        let c010 = dot(self.hash3(xi, yi + 1, zi), dx, dy - 1.0, dz);
        let c110 = dot(self.hash3(xi + 1, yi + 1, zi), dx - 1.0, dy - 1.0, dz);
        let c001 = dot(self.hash3(xi, yi, zi + 1), dx, dy, dz - 1.0);
        let c101 = dot(self.hash3(xi + 1, yi, zi + 1), dx - 1.0, dy, dz - 1.0);
        let c011 = dot(self.hash3(xi, yi + 1, zi + 1), dx, dy - 1.0, dz - 1.0);
        let c111 = dot(self.hash3(xi + 1, yi + 1, zi + 1), dx - 1.0, dy - 1.0, dz - 1.0);

        lerp(
            w,
            lerp(v, lerp(u, c000, c100), lerp(u, c010, c110)),
            lerp(v, lerp(u, c001, c101), lerp(u, c011, c111)),
        )
    }

    /// Four-octave fractal sum of [`noise2`](Self::noise2) mapped to `[0, 1]`.
    pub fn fbm2(&self, x: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        let mut amplitude = 1.0;
        let mut norm = 0.0;
        let mut frequency = 1.0;
        for _ in 0..OCTAVES {
            sum += amplitude * self.noise2(x * frequency, y * frequency);
            norm += amplitude;
            amplitude *= PERSISTENCE;
            frequency *= 2.0;
        }
        to_unit(sum / norm / SPREAD_2D)
    }

    /// Four-octave fractal sum of [`noise3`](Self::noise3) mapped to `[0, 1]`.
    pub fn fbm3(&self, x: f64, y: f64, z: f64) -> f64 {
        let mut sum = 0.0;
        let mut amplitude = 1.0;
        let mut norm = 0.0;
        let mut frequency = 1.0;
        for _ in 0..OCTAVES {
            sum += amplitude * self.noise3(x * frequency, y * frequency, z * frequency);
            norm += amplitude;
            amplitude *= PERSISTENCE;
            frequency *= 2.0;
        }
        to_unit(sum / norm / SPREAD_3D)
    }
}

#[inline]
fn to_unit(v: f64) -> f64 {
    (0.5 + 0.5 * v).clamp(0.0, 1.0)
}

/// Samples the seeded 2-D fractal noise at `(x, y)` (lattice units).
///
/// Total: non-finite input yields a value in `[0, 1]` as well, but carries no
/// meaning.
pub fn sample_noise(x: f64, y: f64, seed: u64) -> f64 {
    GradientNoise::new(seed).fbm2(x, y)
}
