//! Small summary statistics.

use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            std: sample_std(values),
            n: values.len(),
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std / libm::sqrt(self.n as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_std() {
        assert_eq!(MeanStd::of(&[42.0]), MeanStd { mean: 42.0, std: 0.0, n: 1 });
    }

    #[test]
    fn constant_values() {
        let s = MeanStd::of(&[3.5; 10]);
        assert_eq!((s.mean, s.std), (3.5, 0.0));
    }

    #[test]
    fn two_values() {
        let s = MeanStd::of(&[100.0, 200.0]);
        assert_eq!(s.mean, 150.0);
        assert!((s.std - 70.710_678_118_654_76).abs() < 1e-9);
    }
}
