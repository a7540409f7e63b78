use crate::error::{Error, Result};
use crate::par::{map_range, Exec};

/// Base step for [`FdStep::Scaled`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdStep {
    /// The same `h` for every coordinate.
    Fixed(f64),
    /// `h · (1 + |x_i|)` for coordinate `i`.
    Scaled(f64),
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep::Scaled(DEFAULT_FD_STEP)
    }
}

impl FdStep {
    fn at(self, xi: f64) -> f64 {
        match self {
            FdStep::Fixed(h) => h,
            FdStep::Scaled(h) => h * (1.0 + xi.abs()),
        }
    }
}

/// Central-difference gradient with a fixed step `h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fd_gradient_with(Exec::default(), f, x, FdStep::Fixed(h))
}

/// Central-difference gradient with the default coordinate-scaled step.
pub fn fd_gradient_scaled<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fd_gradient_with(Exec::default(), f, x, FdStep::default())
}

/// Central-difference gradient; coordinates are evaluated as one batch.
pub fn fd_gradient_with<F>(exec: Exec, f: F, x: &[f64], step: FdStep) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (FdStep::Fixed(h) | FdStep::Scaled(h)) = step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let partials = map_range(exec, x.len(), |i| {
        let h = step.at(x[i]);
        let mut xp = x.to_vec();
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        if fp.is_finite() && fm.is_finite() {
            Ok((fp - fm) / (2.0 * h))
        } else {
            Err(Error::NonFiniteEvaluation { index: i })
        }
    });
    partials.into_iter().collect()
}

/// Five-point central difference, truncation error `O(h⁴)`:
/// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`.
pub fn fd_gradient_fourth_order<F>(exec: Exec, f: F, x: &[f64], step: FdStep) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (FdStep::Fixed(h) | FdStep::Scaled(h)) = step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let partials = map_range(exec, x.len(), |i| {
        let h = step.at(x[i]);
        let mut xp = x.to_vec();
        let mut eval = |offset: f64| {
            xp[i] = x[i] + offset;
            f(&xp)
        };
        let (f2, f1, m1, m2) = (eval(2.0 * h), eval(h), eval(-h), eval(-2.0 * h));
        if [f2, f1, m1, m2].iter().all(|v| v.is_finite()) {
            Ok((-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h))
        } else {
            Err(Error::NonFiniteEvaluation { index: i })
        }
    });
    partials.into_iter().collect()
}
