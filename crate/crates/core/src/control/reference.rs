use nalgebra::DVector;

use super::ControlError;
use crate::ocp::Dynamics;

/// Time-stamped states and controls, sampled by interpolation.
///
/// States are interpolated along the tangent space (`x_k ⊕ s·(x_{k+1} ⊖ x_k)`),
/// which moves the base orientation along the shortest arc. Controls are
/// interpolated linearly. Outside the covered interval the end samples are held.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    times: Vec<f64>,
    xs: Vec<DVector<f64>>,
    us: Vec<DVector<f64>>,
}

impl ReferenceTrajectory {
    /// `us` may have one entry fewer than `xs`; the last control is then repeated.
    pub fn new(times: Vec<f64>, xs: Vec<DVector<f64>>, mut us: Vec<DVector<f64>>) -> Result<Self, ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidReference(m.into()));
        if times.is_empty() || times.len() != xs.len() {
            return bad("need one state per timestamp");
        }
        if us.len() + 1 == xs.len() {
            match us.last() {
                Some(u) => us.push(u.clone()),
                None => return bad("need at least one control"),
            }
        }
        if us.len() != xs.len() {
            return bad("need one control per timestamp");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("timestamps must be strictly increasing");
        }
        if times.iter().any(|t| !t.is_finite()) || xs.iter().chain(&us).any(|v| v.iter().any(|x| !x.is_finite())) {
            return bad("non-finite sample");
        }
        Ok(Self { times, xs, us })
    }

    /// Uniform samples starting at `t = 0`.
    pub fn uniform(dt: f64, xs: Vec<DVector<f64>>, us: Vec<DVector<f64>>) -> Result<Self, ControlError> {
        let times = (0..xs.len()).map(|k| k as f64 * dt).collect();
        Self::new(times, xs, us)
    }

    /// A single state and control held forever.
    pub fn constant(x: DVector<f64>, u: DVector<f64>, duration: f64) -> Self {
        let times = vec![0.0, duration.max(f64::EPSILON)];
        Self { times, xs: vec![x.clone(), x], us: vec![u.clone(), u] }
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.xs
    }

    pub fn controls(&self) -> &[DVector<f64>] {
        &self.us
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        (k, (t - self.times[k]) / (self.times[k + 1] - self.times[k]))
    }

    pub fn state(&self, dynamics: &dyn Dynamics, t: f64) -> DVector<f64> {
        if self.xs.len() == 1 {
            return self.xs[0].clone();
        }
        let (k, s) = self.locate(t);
        if s == 0.0 {
            return self.xs[k].clone();
        }
        if s == 1.0 {
            return self.xs[k + 1].clone();
        }
        let dx = dynamics.difference(&self.xs[k], &self.xs[k + 1]);
        dynamics.integrate(&self.xs[k], &(dx * s))
    }

    pub fn control(&self, t: f64) -> DVector<f64> {
        if self.us.len() == 1 {
            return self.us[0].clone();
        }
        let (k, s) = self.locate(t);
        &self.us[k] * (1.0 - s) + &self.us[k + 1] * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::LinearDynamics;
    use nalgebra::DMatrix;

    fn euclid() -> LinearDynamics {
        LinearDynamics { a: DMatrix::identity(2, 2), b: DMatrix::zeros(2, 1) }
    }

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    #[test]
    fn linear_interpolation_and_hold() {
        let r = ReferenceTrajectory::new(
            vec![0.0, 1.0, 3.0],
            vec![v(&[0.0, 0.0]), v(&[1.0, 2.0]), v(&[3.0, 2.0])],
            vec![v(&[0.0]), v(&[4.0])],
        )
        .unwrap();
        let d = euclid();
        assert_eq!(r.state(&d, 0.5), v(&[0.5, 1.0]));
        assert_eq!(r.state(&d, 2.0), v(&[2.0, 2.0]));
        assert_eq!(r.state(&d, -1.0), v(&[0.0, 0.0]));
        assert_eq!(r.state(&d, 10.0), v(&[3.0, 2.0]));
        assert_eq!(r.control(0.25), v(&[1.0]));
        assert_eq!(r.control(2.0), v(&[4.0]));
    }

    #[test]
    fn rejects_non_increasing_times() {
        let xs = vec![v(&[0.0, 0.0]); 2];
        let us = vec![v(&[0.0]); 2];
        assert!(ReferenceTrajectory::new(vec![0.0, 0.0], xs.clone(), us.clone()).is_err());
        assert!(ReferenceTrajectory::new(vec![1.0, 0.0], xs, us).is_err());
    }
}
