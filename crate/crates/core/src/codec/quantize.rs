use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{c, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("coordinate {value} outside [0, {extent}]")]
    OutOfRange { value: f64, extent: f64 },
    #[error("extent must be positive, got {0}")]
    BadExtent(f64),
    #[error("bin {bin} outside [1, {bins}]")]
    BadBin { bin: u32, bins: u32 },
}

/// Bin count `m` and the square canvas decoded layouts live on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizerConfig {
    pub bins: u32,
    pub canvas: f64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            bins: 512,
            canvas: 512.0,
        }
    }
}

impl QuantizerConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.bins < 2 {
            return Err(format!("bins must be >= 2, got {}", self.bins));
        }
        if !(self.canvas > 0.0) {
            return Err(format!("canvas must be positive, got {}", self.canvas));
        }
        Ok(())
    }
}

/// Maps `v ∈ [0, extent]` to a bin word in `[1, m]`: `floor(v / extent · m) + 1`,
/// with `v = extent` clamped into the last bin.
pub fn quantize<T: Scalar>(v: T, extent: T, cfg: &QuantizerConfig) -> Result<u32, QuantizeError> {
    if !(extent > T::zero()) || !extent.is_finite() {
        return Err(QuantizeError::BadExtent(extent.to_f64_lossy()));
    }
    if !(v >= T::zero() && v <= extent) {
        return Err(QuantizeError::OutOfRange {
            value: v.to_f64_lossy(),
            extent: extent.to_f64_lossy(),
        });
    }
    let m: T = c(cfg.bins as f64);
    let raw = (v / extent * m).floor() + T::one();
    let bin = raw.to_u32().unwrap_or(cfg.bins);
    Ok(bin.clamp(1, cfg.bins))
}

/// Centre of `bin` in coordinates of `extent`: `(bin − 0.5) / m · extent`.
pub fn dequantize<T: Scalar>(bin: u32, extent: T, cfg: &QuantizerConfig) -> Result<T, QuantizeError> {
    if bin < 1 || bin > cfg.bins {
        return Err(QuantizeError::BadBin {
            bin,
            bins: cfg.bins,
        });
    }
    if !(extent > T::zero()) {
        return Err(QuantizeError::BadExtent(extent.to_f64_lossy()));
    }
    let m: T = c(cfg.bins as f64);
    Ok((c::<T>(bin as f64) - c(0.5)) / m * extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CFG: QuantizerConfig = QuantizerConfig {
        bins: 512,
        canvas: 512.0,
    };

    /// Scans bins by their lower edges; independent of the closed form.
    fn brute_force_bin(v: f64, extent: f64, m: u32) -> u32 {
        let width = extent / m as f64;
        let mut bin = 1;
        for b in 1..=m {
            if v >= (b - 1) as f64 * width {
                bin = b;
            }
        }
        bin
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(quantize(0.0, 1920.0, &CFG).unwrap(), 1);
        assert_eq!(quantize(1920.0, 1920.0, &CFG).unwrap(), 512);
        assert_eq!(quantize(960.0, 1920.0, &CFG).unwrap(), 257);
        assert_eq!(brute_force_bin(960.0, 1920.0, 512), 257);
        assert_eq!(quantize(960.0f32, 1920.0f32, &CFG).unwrap(), 257);
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize(1, 512.0, &CFG).unwrap(), 0.5);
        assert_eq!(dequantize(512, 512.0, &CFG).unwrap(), 511.5);
        let v = 100.3;
        let back: f64 = dequantize(quantize(v, 512.0, &CFG).unwrap(), 512.0, &CFG).unwrap();
        assert!((back - v).abs() <= 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(quantize(-0.1, 10.0, &CFG).is_err());
        assert!(quantize(10.1, 10.0, &CFG).is_err());
        assert!(quantize(1.0, 0.0, &CFG).is_err());
        assert!(dequantize::<f64>(0, 10.0, &CFG).is_err());
        assert!(dequantize::<f64>(513, 10.0, &CFG).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_scan(v in 0.0f64..1920.0) {
            prop_assert_eq!(quantize(v, 1920.0, &CFG).unwrap(), brute_force_bin(v, 1920.0, 512));
        }

        #[test]
        fn monotone_and_bounded(a in 0.0f64..=640.0, b in 0.0f64..=640.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let qlo = quantize(lo, 640.0, &CFG).unwrap();
            let qhi = quantize(hi, 640.0, &CFG).unwrap();
            prop_assert!(qlo <= qhi);
            let back: f64 = dequantize(qlo, 640.0, &CFG).unwrap();
            prop_assert!((back - lo).abs() <= 640.0 / 512.0);
        }

        #[test]
        fn centres_requantize_to_themselves(bin in 1u32..=512, extent in 1.0f64..4000.0) {
            let centre: f64 = dequantize(bin, extent, &CFG).unwrap();
            prop_assert_eq!(quantize(centre, extent, &CFG).unwrap(), bin);
        }
    }
}
