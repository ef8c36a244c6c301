//! Dormand–Prince 5(4) with PI step-size control.

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure {
    /// Step size fell below `h_min` at the given time.
    Underflow(f64),
    TooManySteps(f64),
    /// The observer rejected the state; carries its message.
    Observer(f64, String),
}

/// Integrate `y' = f(t, y)` from `t0` to `t1 > t0`, calling `observe` after
/// every accepted step with `(t, y, f(t, y))`. The observer may abort.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    ctl: StepControl,
    mut observe: O,
) -> Result<(), StepFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64], &[f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k1);
    observe(t, &y, &k1).map_err(|m| StepFailure::Observer(t, m))?;

    let mut h = ctl.h_init.min(ctl.h_max).min(t1 - t0);
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0;
    while t < t1 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(StepFailure::TooManySteps(t));
        }
        let last = t + h >= t1 * (1.0 - f64::EPSILON) - f64::EPSILON * t1.abs();
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { t1 } else { t + h };
        f(t_new, &y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            observe(t, &y, &k1).map_err(|m| StepFailure::Observer(t, m))?;
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.14) * err_prev.powf(0.08)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            h = (h * fac).min(ctl.h_max);
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
        }
        if h < ctl.h_min {
            return Err(StepFailure::Underflow(t));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let ctl = StepControl {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.1,
            h_min: 1e-14,
            max_steps: 1_000_000,
        };
        let mut last = vec![];
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            2.0 * std::f64::consts::PI,
            ctl,
            |_, y, _| {
                last = y.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert!((last[0] - 1.0).abs() < 1e-10);
        assert!(last[1].abs() < 1e-10);
    }
}
