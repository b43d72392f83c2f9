//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;

/// Tuning for [`SliceSampler::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSampler {
    /// Initial interval width.
    pub width: f64,
    /// Cap on the total number of step-out expansions (split randomly
    /// between the two ends).
    pub max_steps_out: u32,
    /// Cap on shrinkage proposals before giving up and staying put.
    pub max_shrinks: u32,
}

impl Default for SliceSampler {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_steps_out: 64,
            max_shrinks: 200,
        }
    }
}

impl SliceSampler {
    /// One slice-sampling update of `current` under `log_density`.
    ///
    /// `log_density(current)` must be finite. The returned point always has
    /// log density at or above the sampled level.
    pub fn step<F, R>(&self, current: f64, mut log_density: F, rng: &mut R) -> f64
    where
        F: FnMut(f64) -> f64,
        R: Rng + ?Sized,
    {
        let current_density = log_density(current);
        if !current_density.is_finite() {
            log::warn!("slice sampler started at a point with log density {current_density}");
            return current;
        }
        // ln U with U in (0, 1]
        let level = current_density + (1.0 - rng.random::<f64>()).ln();
        self.step_with_level(current, level, log_density, rng)
    }

    pub(crate) fn step_with_level<F, R>(
        &self,
        current: f64,
        level: f64,
        mut log_density: F,
        rng: &mut R,
    ) -> f64
    where
        F: FnMut(f64) -> f64,
        R: Rng + ?Sized,
    {
        let w = self.width;
        let mut left = current - w * rng.random::<f64>();
        let mut right = left + w;

        let budget = self.max_steps_out.max(1);
        let mut left_steps = (budget as f64 * rng.random::<f64>()).floor() as u32;
        let mut right_steps = budget - 1 - left_steps.min(budget - 1);
        while left_steps > 0 && log_density(left) >= level {
            left -= w;
            left_steps -= 1;
        }
        while right_steps > 0 && log_density(right) >= level {
            right += w;
            right_steps -= 1;
        }

        let tolerance = 1e-12 * (1.0 + current.abs());
        for _ in 0..self.max_shrinks {
            let candidate = left + (right - left) * rng.random::<f64>();
            if log_density(candidate) >= level {
                return candidate;
            }
            if candidate < current {
                left = candidate;
            } else {
                right = candidate;
            }
            if right - left < tolerance {
                return current;
            }
        }
        log::warn!("slice sampler shrinkage budget exhausted at {current}; keeping current value");
        current
    }
}

/// [`SliceSampler::step`] with default caps and the given width.
pub fn slice_step_univariate<F, R>(current: f64, log_density: F, width: f64, rng: &mut R) -> f64
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    SliceSampler {
        width,
        ..SliceSampler::default()
    }
    .step(current, log_density, rng)
}
