//! Dynamic weather fields sampled from 3-D noise with time as the third axis.

use alloc::vec::Vec;

use crate::noise::GradientNoise;
use crate::rng::{self, tag};
use crate::scenario::cell_of;

pub const TEMPERATURE_MIN: f64 = 10.0;
pub const TEMPERATURE_MAX: f64 = 40.0;
/// Noise units advanced per time step.
const TIME_SCALE: f64 = 0.02;
/// Weather features per world side at the base octave.
const WEATHER_FEATURES: f64 = 2.5;
const WIND_SPEED_MIN: f64 = 1.0;
const WIND_SPEED_MAX: f64 = 10.0;

/// Per-cell weather, row-major like the terrain grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherState {
    pub t: u32,
    pub size: usize,
    pub cell_size: f64,
    /// Unit vector in the `(x, z)` plane.
    pub main_wind_direction: [f64; 2],
    /// m/s in the `(x, z)` plane.
    pub wind_field: Vec<[f64; 2]>,
    pub overcast: Vec<f64>,
    /// Degrees Celsius, in `[TEMPERATURE_MIN, TEMPERATURE_MAX]`.
    pub temperature: Vec<f64>,
    pub humidity: Vec<f64>,
}

impl WeatherState {
    /// Spatially uniform weather; handy for tests and controlled trials.
    pub fn uniform(
        size: usize,
        cell_size: f64,
        wind: [f64; 2],
        overcast: f64,
        temperature: f64,
        humidity: f64,
    ) -> Self {
        let n = size * size;
        let norm = libm::sqrt(wind[0] * wind[0] + wind[1] * wind[1]);
        let dir = if norm > 0.0 {
            [wind[0] / norm, wind[1] / norm]
        } else {
            [1.0, 0.0]
        };
        Self {
            t: 0,
            size,
            cell_size,
            main_wind_direction: dir,
            wind_field: alloc::vec![dir; n],
            overcast: alloc::vec![overcast; n],
            temperature: alloc::vec![temperature; n],
            humidity: alloc::vec![humidity; n],
        }
    }

    pub fn cell_index(&self, x: f64, z: f64) -> usize {
        let (ix, iz) = cell_of(self.size, self.cell_size, x, z);
        iz * self.size + ix
    }

    pub fn overcast_at(&self, x: f64, z: f64) -> f64 {
        self.overcast[self.cell_index(x, z)]
    }

    pub fn temperature_at(&self, x: f64, z: f64) -> f64 {
        self.temperature[self.cell_index(x, z)]
    }

    pub fn humidity_at(&self, x: f64, z: f64) -> f64 {
        self.humidity[self.cell_index(x, z)]
    }

    /// Min and max of the temperature field.
    pub fn temperature_range(&self) -> (f64, f64) {
        self.temperature
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Noise sources for one weather seed; construct once, sample every step.
#[derive(Debug, Clone)]
pub struct WeatherGenerator {
    size: usize,
    cell_size: f64,
    base_angle: f64,
    drift: GradientNoise,
    wind_speed: GradientNoise,
    wind_turn: GradientNoise,
    overcast: GradientNoise,
    temperature: GradientNoise,
    humidity: GradientNoise,
}

impl WeatherGenerator {
    pub fn new(seed: u64, size: usize, cell_size: f64) -> Self {
        let sub = |i| GradientNoise::new(rng::derive_seed(seed, tag::WEATHER, i));
        let angle_seed = rng::derive_seed(seed, tag::WEATHER, 99);
        let base_angle = (angle_seed >> 11) as f64 / (1u64 << 53) as f64 * core::f64::consts::TAU;
        Self {
            size,
            cell_size,
            base_angle,
            drift: sub(0),
            wind_speed: sub(1),
            wind_turn: sub(2),
            overcast: sub(3),
            temperature: sub(4),
            humidity: sub(5),
        }
    }

    /// Weather at `t` with only the main wind set; every cell is unfilled
    /// (NaN) until [`fill_cell`](Self::fill_cell) computes it. Cell values do
    /// not depend on which other cells were filled.
    pub fn begin(&self, t: u32) -> WeatherState {
        let n = self.size * self.size;
        let mut state = WeatherState {
            t,
            size: self.size,
            cell_size: self.cell_size,
            main_wind_direction: [1.0, 0.0],
            wind_field: alloc::vec![[f64::NAN; 2]; n],
            overcast: alloc::vec![f64::NAN; n],
            temperature: alloc::vec![f64::NAN; n],
            humidity: alloc::vec![f64::NAN; n],
        };
        self.begin_into(t, &mut state);
        state
    }

    /// [`begin`](Self::begin) reusing the buffers of `state`.
    pub fn begin_into(&self, t: u32, state: &mut WeatherState) {
        let n = self.size * self.size;
        state.t = t;
        state.size = self.size;
        state.cell_size = self.cell_size;
        let angle = self.main_angle(t);
        state.main_wind_direction = [libm::cos(angle), libm::sin(angle)];
        for v in [&mut state.overcast, &mut state.temperature, &mut state.humidity] {
            v.clear();
            v.resize(n, f64::NAN);
        }
        state.wind_field.clear();
        state.wind_field.resize(n, [f64::NAN; 2]);
    }

    fn main_angle(&self, t: u32) -> f64 {
        let tz = f64::from(t) * TIME_SCALE;
        self.base_angle + core::f64::consts::FRAC_PI_2 * (self.drift.fbm2(tz * 0.5, 0.5) - 0.5)
    }

    fn coords(&self, cell: usize, t: u32) -> (f64, f64, f64) {
        let scale = WEATHER_FEATURES / self.size as f64;
        let ix = cell % self.size;
        let iz = cell / self.size;
        (
            (ix as f64 + 0.5) * scale,
            (iz as f64 + 0.5) * scale,
            f64::from(t) * TIME_SCALE,
        )
    }

    /// Computes overcast, temperature and humidity of `cell` unless present.
    pub fn fill_cell(&self, state: &mut WeatherState, cell: usize) {
        if !state.temperature[cell].is_nan() {
            return;
        }
        let (x, z, tz) = self.coords(cell, state.t);
        // clear sky wherever the raw field falls below 0.4
        state.overcast[cell] = (2.0 * self.overcast.fbm3(x, z, tz) - 0.8).clamp(0.0, 1.0);
        state.temperature[cell] =
            TEMPERATURE_MIN + (TEMPERATURE_MAX - TEMPERATURE_MIN) * self.temperature.fbm3(x, z, tz);
        state.humidity[cell] = self.humidity.fbm3(x, z, tz);
    }

    /// Computes the local wind vector of `cell` unless present.
    pub fn fill_wind(&self, state: &mut WeatherState, cell: usize) {
        if !state.wind_field[cell][0].is_nan() {
            return;
        }
        let (x, z, tz) = self.coords(cell, state.t);
        let angle = self.main_angle(state.t);
        let speed =
            WIND_SPEED_MIN + (WIND_SPEED_MAX - WIND_SPEED_MIN) * self.wind_speed.fbm3(x, z, tz);
        let turn = angle + core::f64::consts::FRAC_PI_2 * (self.wind_turn.fbm3(x, z, tz) - 0.5);
        state.wind_field[cell] = [speed * libm::cos(turn), speed * libm::sin(turn)];
    }

    /// Fills every scalar field; the wind field is left to
    /// [`generate`](Self::generate).
    pub fn fill_all(&self, state: &mut WeatherState) {
        for cell in 0..self.size * self.size {
            self.fill_cell(state, cell);
        }
    }

    /// All fields for step `t`.
    pub fn generate(&self, t: u32) -> WeatherState {
        let mut state = self.begin(t);
        for cell in 0..self.size * self.size {
            self.fill_cell(&mut state, cell);
            self.fill_wind(&mut state, cell);
        }
        state
    }
}

/// Weather for `seed` at step `t` on the default 100x100 grid over 1 km.
pub fn generate_weather(seed: u64, t: u32) -> WeatherState {
    use crate::scenario::{DEFAULT_GRID_SIZE, DEFAULT_WORLD_EXTENT};
    WeatherGenerator::new(seed, DEFAULT_GRID_SIZE, DEFAULT_WORLD_EXTENT / DEFAULT_GRID_SIZE as f64)
        .generate(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(generate_weather(5, 12), generate_weather(5, 12));
    }

    #[test]
    fn ranges_hold() {
        for t in [0, 1, 250, 499] {
            let w = generate_weather(9, t);
            assert_eq!(w.humidity.len(), 10_000);
            assert!(w.humidity.iter().all(|h| (0.0..=1.0).contains(h)));
            assert!(w.overcast.iter().all(|o| (0.0..=1.0).contains(o)));
            assert!(w
                .temperature
                .iter()
                .all(|c| c.is_finite() && (TEMPERATURE_MIN..=TEMPERATURE_MAX).contains(c)));
            let d = w.main_wind_direction;
            assert!((d[0] * d[0] + d[1] * d[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn consecutive_steps_are_close_but_different() {
        let a = generate_weather(3, 40);
        let b = generate_weather(3, 41);
        let mean_diff = |x: &[f64], y: &[f64], range: f64| {
            x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64 / range
        };
        for (x, y, range) in [
            (&a.humidity, &b.humidity, 1.0),
            (&a.overcast, &b.overcast, 1.0),
            (&a.temperature, &b.temperature, TEMPERATURE_MAX - TEMPERATURE_MIN),
        ] {
            let d = mean_diff(x, y, range);
            assert!(d > 0.0 && d < 0.1, "mean diff {d}");
        }
    }

    #[test]
    fn partial_fill_matches_full_generation() {
        let g = WeatherGenerator::new(4, 100, 10.0);
        let full = g.generate(17);
        let mut part = g.begin(17);
        for cell in [0, 57, 4321, 9999] {
            g.fill_cell(&mut part, cell);
            g.fill_wind(&mut part, cell);
            assert_eq!(part.temperature[cell], full.temperature[cell]);
            assert_eq!(part.humidity[cell], full.humidity[cell]);
            assert_eq!(part.overcast[cell], full.overcast[cell]);
            assert_eq!(part.wind_field[cell], full.wind_field[cell]);
        }
        assert!(part.temperature[1].is_nan());
        assert_eq!(part.main_wind_direction, full.main_wind_direction);
    }

    #[test]
    fn thresholds_reachable_from_both_sides() {
        let w = generate_weather(0, 0);
        assert!(w.temperature.iter().any(|&c| c > 21.0));
        assert!(w.temperature.iter().any(|&c| c <= 21.0));
        assert!(w.humidity.iter().any(|&h| h > 0.5));
        assert!(w.humidity.iter().any(|&h| h <= 0.5));
        assert!(w.overcast.iter().any(|&o| o == 0.0));
    }
}
