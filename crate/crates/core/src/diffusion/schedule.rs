use crate::{Error, Result, Scalar};

/// Discrete variance schedule over steps `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<F> {
    betas: Vec<F>,
    alpha_bars: Vec<F>,
}

impl<F: Scalar> NoiseSchedule<F> {
    /// Linear ramp of `beta` from `beta_min` to `beta_max` over `steps` steps.
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("schedule needs at least one step"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::config(format!(
                "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
            )));
        }
        let mut betas = Vec::with_capacity(steps);
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut prod = 1.0f64;
        for i in 0..steps {
            let frac = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
            let beta = beta_min + (beta_max - beta_min) * frac;
            prod *= 1.0 - beta;
            betas.push(F::of(beta));
            alpha_bars.push(F::of(prod));
        }
        Ok(Self { betas, alpha_bars })
    }

    /// `T = 1000`, `beta` in `[1e-4, 0.02]`.
    pub fn standard() -> Self {
        Self::linear(1000, 1e-4, 0.02).expect("standard schedule is valid")
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::input(format!("timestep {t} outside [1, {}]", self.steps())));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<F> {
        Ok(self.betas[self.index(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<F> {
        Ok(self.alpha_bars[self.index(t)?])
    }

    pub fn alpha_bars(&self) -> &[F] {
        &self.alpha_bars
    }

    /// Model time for step `t`: `t / T`.
    pub fn normalized(&self, t: usize) -> F {
        F::of(t as f64 / self.steps() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let s = NoiseSchedule::<f64>::linear(1, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha_bar(1).unwrap(), 0.5);
    }

    #[test]
    fn standard_schedule_invariants() {
        let s = NoiseSchedule::<f64>::standard();
        // Independent product: prod_{i=0}^{999} (1 - (1e-4 + i * (0.02 - 1e-4) / 999)).
        let mut oracle = 1.0f64;
        for i in 0..1000 {
            oracle *= 1.0 - (1e-4 + i as f64 * (0.02 - 1e-4) / 999.0);
        }
        let last = s.alpha_bar(1000).unwrap();
        assert!((last - oracle).abs() < 1e-15);
        assert!(last < 0.01);
        assert!((last - 4.0358e-5).abs() < 1e-8, "{last}");
        assert_eq!(s.alpha_bar(1).unwrap(), 1.0 - 1e-4);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        for t in 1..=1000 {
            let b = s.beta(t).unwrap();
            assert!(b > 0.0 && b < 1.0);
        }
    }

    #[test]
    fn bad_ranges_rejected() {
        assert!(NoiseSchedule::<f64>::linear(10, 0.02, 1e-4).is_err());
        assert!(NoiseSchedule::<f64>::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::<f64>::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::<f64>::linear(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn out_of_range_step_is_input_error() {
        let s = NoiseSchedule::<f64>::standard();
        assert!(matches!(s.alpha_bar(0), Err(Error::Input(_))));
        assert!(matches!(s.alpha_bar(1001), Err(Error::Input(_))));
    }
}
