use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::seed;

pub const MAX_JITTER_PERCENT: f64 = 20.0;

/// Per-image resize percentage `r`, shared by all interpolation classes of
/// that image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResizeJitter {
    pub sample_id: String,
    r: f64,
}

impl ResizeJitter {
    pub fn new(sample_id: impl Into<String>, r: f64) -> Result<Self> {
        ensure!(
            r.is_finite() && r.abs() <= MAX_JITTER_PERCENT,
            "resize jitter {r}% is outside ±{MAX_JITTER_PERCENT}%"
        );
        Ok(ResizeJitter {
            sample_id: sample_id.into(),
            r,
        })
    }

    pub fn percent(&self) -> f64 {
        self.r
    }
}

/// Draws `r ~ Uniform[-20, 20]` per id. Each draw depends only on
/// `(seed, id)`, so adding or reordering ids leaves the others unchanged.
pub fn sample_jitters<S: AsRef<str>>(ids: &[S], seed: u64) -> Vec<ResizeJitter> {
    let dist = Uniform::new_inclusive(-MAX_JITTER_PERCENT, MAX_JITTER_PERCENT);
    ids.iter()
        .map(|id| {
            let mut rng = seed::keyed_stream(seed, "resize-jitter", id.as_ref());
            ResizeJitter {
                sample_id: id.as_ref().to_owned(),
                r: dist.sample(&mut rng),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let ids: Vec<String> = (0..50).map(|i| format!("img{i}")).collect();
        assert_eq!(sample_jitters(&ids, 3), sample_jitters(&ids, 3));
        assert_ne!(sample_jitters(&ids, 3), sample_jitters(&ids, 4));
    }

    #[test]
    fn bounded_and_centered() {
        let ids: Vec<String> = (0..10_000).map(|i| format!("img{i}")).collect();
        let jitters = sample_jitters(&ids, 11);
        assert!(jitters.iter().all(|j| j.percent().abs() <= 20.0));
        // Var[U(-20,20)] = 1600/12; σ of the mean over 10k draws ≈ 0.115,
        // so ±0.6 is a > 5σ bound.
        let mean = jitters.iter().map(ResizeJitter::percent).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.6, "mean {mean}");
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(ResizeJitter::new("a", 20.5).is_err());
        assert!(ResizeJitter::new("a", f64::NAN).is_err());
    }
}
