//! Fixed-step classic Runge–Kutta.

use serde::Serialize;

use super::ModelError;

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dimension(&self) -> usize;
    fn derivatives(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// A component pushed below zero by a step and reset to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampEvent {
    pub t: f64,
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub clamps: Vec<ClampEvent>,
}

fn eval<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), ModelError> {
    sys.derivatives(t, y, dy);
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NumericalBlowup { t })
    }
}

/// One RK4 step of size `h` from `(t, y)`.
///
/// Components that come out negative are clamped to zero and reported.
pub fn rk4_step<S: OdeSystem + ?Sized>(
    sys: &S,
    y: &[f64],
    t: f64,
    h: f64,
) -> Result<Step, ModelError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(ModelError::InvalidStep(h));
    }
    let n = y.len();
    debug_assert_eq!(n, sys.dimension());
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    eval(sys, t, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    eval(sys, t + 0.5 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    eval(sys, t + 0.5 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    eval(sys, t + h, &tmp, &mut k4)?;

    let mut clamps = Vec::new();
    let state = (0..n)
        .map(|i| {
            let v = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if v < 0.0 {
                clamps.push(ClampEvent {
                    t: t + h,
                    component: i,
                    value: v,
                });
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(Step { state, clamps })
}
