//! Radial global solutions of `−ΔU_i = Σ_j a_ij |y|^{2γ} e^{U_j}`.
//!
//! In the variable `s = log r` the radial equation becomes
//!
//! ```text
//! d²U_i/ds² = −Σ_j a_ij e^{2μ s + U_j},    μ = 1 + γ,
//! ```
//!
//! whose right-hand side is smooth; the singular weight `r^{2γ}` is absorbed
//! into `e^{2μ s}`. Integration starts from a short power series in
//! `t = r^{2μ}` at a small radius and runs to `r_max`. Profiles store the
//! accepted steps together with the first three `s`-derivatives so that
//! values and derivatives can be interpolated by quintic Hermite polynomials.

use serde::Serialize;

use crate::algebra::{CoefficientMatrix, SingularityProfile};
use crate::error::{Error, Result};
use crate::ode::{self, StepControl, StepFailure};

/// Default outer radius.
pub const DEFAULT_R_MAX: f64 = 1e4;
/// Default per-step tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Largest starting radius.
pub const R_SERIES: f64 = 1e-6;
/// Abort when any component exceeds this value.
pub const OVERFLOW_GUARD: f64 = 50.0;
/// Largest step in `s`; keeps Hermite interpolation below the step tolerance.
pub const MAX_LOG_STEP: f64 = 0.05;

// Series validity: |β_i| t must stay below this.
const SERIES_LIMIT: f64 = 1e-2;
// Starting point: |β_i| t at most this.
const SERIES_START: f64 = 1e-7;

/// A radial initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub a: CoefficientMatrix,
    pub singularity: SingularityProfile,
    /// `U_i(0)`.
    pub alpha0: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(a: CoefficientMatrix, singularity: SingularityProfile, alpha0: Vec<f64>) -> Result<Self> {
        if alpha0.len() != a.n() {
            return Err(Error::invalid(
                "alpha0",
                format!("length {} does not match matrix size {}", alpha0.len(), a.n()),
            ));
        }
        if alpha0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("alpha0", "non-finite initial value"));
        }
        Ok(ProblemSpec {
            a,
            singularity,
            alpha0,
        })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn mu(&self) -> f64 {
        self.singularity.mu()
    }

    /// Whether `max_i U_i(0) = 0`.
    pub fn is_max_normalized(&self) -> bool {
        self.alpha0.iter().copied().fold(f64::NEG_INFINITY, f64::max) == 0.0
    }

    /// Coefficients `(β, κ)` of `U_i = α_i − β_i t + κ_i t² + O(t³)`.
    fn series_coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mu = self.mu();
        let e: Vec<f64> = self.alpha0.iter().map(|a| a.exp()).collect();
        let beta: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.a.get(i, j) * e[j]).sum::<f64>() / (4.0 * mu * mu))
            .collect();
        let kappa = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.a.get(i, j) * e[j] * beta[j])
                    .sum::<f64>()
                    / (16.0 * mu * mu)
            })
            .collect();
        (beta, kappa)
    }

    fn series_scale(&self) -> f64 {
        let (beta, _) = self.series_coefficients();
        beta.iter().copied().fold(0.0, f64::max)
    }

    /// Right-hand side `d²U/ds²`.
    fn forcing(&self, s: f64, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        let two_mu_s = 2.0 * self.mu() * s;
        for i in 0..n {
            out[i] = -(0..n)
                .map(|j| self.a.get(i, j) * (two_mu_s + u[j]).exp())
                .sum::<f64>();
        }
    }

    /// `d³U/ds³`.
    fn forcing_rate(&self, s: f64, u: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.n();
        let two_mu = 2.0 * self.mu();
        for i in 0..n {
            out[i] = -(0..n)
                .map(|j| self.a.get(i, j) * (two_mu * s + u[j]).exp() * (two_mu + w[j]))
                .sum::<f64>();
        }
    }
}

/// Values and radial derivatives at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPoint {
    pub values: Vec<f64>,
    /// `dU_i/dr`.
    pub derivs: Vec<f64>,
}

/// Local series at the singular origin:
/// `U_i(r) = α_i − β_i r^{2μ} + κ_i r^{4μ} + O(r^{6μ})` with
/// `β_i = Σ_j a_ij e^{α_j}/(2μ)²` and `κ_i = Σ_j a_ij e^{α_j} β_j/(16μ²)`.
pub fn origin_series(spec: &ProblemSpec, r: f64) -> Result<RadialPoint> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    let mu = spec.mu();
    let (beta, kappa) = spec.series_coefficients();
    let t = r.powf(2.0 * mu);
    let bmax = beta.iter().copied().fold(0.0, f64::max);
    if bmax * t > SERIES_LIMIT {
        return Err(Error::Domain(format!(
            "r = {r:e} too large for the origin series (β t = {:e})",
            bmax * t
        )));
    }
    let values = (0..spec.n())
        .map(|i| spec.alpha0[i] - beta[i] * t + kappa[i] * t * t)
        .collect();
    let derivs = (0..spec.n())
        .map(|i| {
            if r == 0.0 {
                // d/dr of −β r^{2μ}.
                match 2.0 * mu - 1.0 {
                    e if e > 0.0 => 0.0,
                    0.0 => -beta[i] * 2.0 * mu,
                    _ => f64::NEG_INFINITY,
                }
            } else {
                2.0 * mu * (-beta[i] * t + 2.0 * kappa[i] * t * t) / r
            }
        })
        .collect();
    Ok(RadialPoint { values, derivs })
}

/// Series value and `s`-derivatives (U, U_s, U_ss) at `s`.
fn series_in_log(spec: &ProblemSpec, s: f64) -> (Vec<f64>, Vec<f64>) {
    let mu = spec.mu();
    let (beta, kappa) = spec.series_coefficients();
    let t = (2.0 * mu * s).exp();
    let u = (0..spec.n())
        .map(|i| spec.alpha0[i] - beta[i] * t + kappa[i] * t * t)
        .collect();
    let w = (0..spec.n())
        .map(|i| 2.0 * mu * (-beta[i] * t + 2.0 * kappa[i] * t * t))
        .collect();
    (u, w)
}

/// A computed radial global solution on a log-radius grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    #[serde(skip)]
    pub spec: ProblemSpec,
    /// Strictly increasing nodes `s_k = log r_k`.
    pub grid: Vec<f64>,
    /// `U_i(s_k)`, indexed `[k][i]`.
    pub values: Vec<Vec<f64>>,
    /// `dU_i/ds` at the nodes.
    pub derivs: Vec<Vec<f64>>,
    /// `d²U_i/ds²` at the nodes (from the equation).
    pub second: Vec<Vec<f64>>,
    /// `d³U_i/ds³` at the nodes (from the equation).
    pub third: Vec<Vec<f64>>,
    pub r_max: f64,
    pub tol: f64,
}

/// Integrate the radial system from the origin to `r_max`.
pub fn integrate(spec: &ProblemSpec, r_max: f64, tol: f64) -> Result<RadialProfile> {
    if !(r_max >= 10.0 && r_max.is_finite()) {
        return Err(Error::invalid("r_max", format!("{r_max} must be >= 10")));
    }
    if !(1e-13..=1e-4).contains(&tol) {
        return Err(Error::invalid(
            "tol",
            format!("{tol:e} outside the supported range [1e-13, 1e-4]"),
        ));
    }
    if let Some(i) = spec.alpha0.iter().position(|a| *a > OVERFLOW_GUARD) {
        return Err(Error::Blowup {
            component: i + 1,
            radius: 0.0,
            limit: OVERFLOW_GUARD,
        });
    }
    let n = spec.n();
    let mu = spec.mu();
    let scale = spec.series_scale().max(1.0);
    let s0 = R_SERIES.ln().min((SERIES_START / scale).ln() / (2.0 * mu));
    let s1 = r_max.ln();

    let (u0, w0) = series_in_log(spec, s0);
    let y0: Vec<f64> = u0.into_iter().chain(w0).collect();

    let ctl = StepControl {
        rtol: tol,
        atol: tol,
        h_init: 1e-3,
        h_max: MAX_LOG_STEP,
        h_min: 1e-12,
        max_steps: 2_000_000,
    };

    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    let mut second = Vec::new();
    let mut third = Vec::new();

    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        dy[..n].copy_from_slice(&y[n..]);
        spec.forcing(s, &y[..n], &mut dy[n..]);
    };
    let result = ode::integrate(rhs, s0, &y0, s1, ctl, |s, y, dy| {
        if let Some(i) = y[..n].iter().position(|u| *u > OVERFLOW_GUARD || !u.is_finite()) {
            return Err(format!("blowup:{i}"));
        }
        let u = &y[..n];
        let w = &y[n..];
        let mut g = vec![0.0; n];
        spec.forcing_rate(s, u, w, &mut g);
        grid.push(s);
        values.push(u.to_vec());
        derivs.push(w.to_vec());
        second.push(dy[n..].to_vec());
        third.push(g);
        Ok(())
    });
    match result {
        Ok(()) => {}
        Err(StepFailure::Observer(s, msg)) => {
            let component = msg
                .strip_prefix("blowup:")
                .and_then(|i| i.parse::<usize>().ok())
                .unwrap_or(0);
            return Err(Error::Blowup {
                component: component + 1,
                radius: s.exp(),
                limit: OVERFLOW_GUARD,
            });
        }
        Err(StepFailure::Underflow(s)) => {
            return Err(Error::Integration {
                last_radius: s.exp(),
                reason: "step size underflow".into(),
            })
        }
        Err(StepFailure::TooManySteps(s)) => {
            return Err(Error::Integration {
                last_radius: s.exp(),
                reason: "step budget exhausted".into(),
            })
        }
    }
    // The last node is pinned to log r_max exactly.
    if let Some(last) = grid.last_mut() {
        *last = s1;
    }
    Ok(RadialProfile {
        spec: spec.clone(),
        grid,
        values,
        derivs,
        second,
        third,
        r_max,
        tol,
    })
}

/// Quintic Hermite interpolation on `[0, h]` at `x = θ h` from value and
/// first two derivatives at both ends.
fn hermite5(theta: f64, h: f64, y0: [f64; 3], y1: [f64; 3]) -> f64 {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    h00 * y0[0] + h01 * y1[0] + h * (h10 * y0[1] + h11 * y1[1]) + h * h * (h20 * y0[2] + h21 * y1[2])
}

impl RadialProfile {
    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn mu(&self) -> f64 {
        self.spec.mu()
    }

    pub fn s_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.iter().map(|s| s.exp())
    }

    /// `U_i(0)`.
    pub fn initial_values(&self) -> &[f64] {
        &self.spec.alpha0
    }

    /// Values and `s`-derivatives at `s ≤ log r_max`.
    pub fn eval_log(&self, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let s_max = self.s_max();
        if s > s_max + 1e-12 * s_max.abs().max(1.0) {
            return Err(Error::OutOfRange {
                r: s.exp(),
                r_max: self.r_max,
            });
        }
        let s = s.min(s_max);
        if s < self.grid[0] {
            return Ok(series_in_log(&self.spec, s));
        }
        let k = self.grid.partition_point(|g| *g <= s).clamp(1, self.grid.len() - 1) - 1;
        let h = self.grid[k + 1] - self.grid[k];
        let theta = (s - self.grid[k]) / h;
        let n = self.n();
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            u[i] = hermite5(
                theta,
                h,
                [self.values[k][i], self.derivs[k][i], self.second[k][i]],
                [self.values[k + 1][i], self.derivs[k + 1][i], self.second[k + 1][i]],
            );
            w[i] = hermite5(
                theta,
                h,
                [self.derivs[k][i], self.second[k][i], self.third[k][i]],
                [self.derivs[k + 1][i], self.second[k + 1][i], self.third[k + 1][i]],
            );
        }
        Ok((u, w))
    }

    /// `−dU_i/ds = −r U_i'(r)` at the outer radius.
    pub fn outer_flux(&self) -> Vec<f64> {
        self.derivs.last().unwrap().iter().map(|w| -w).collect()
    }

    /// `new(s) = self(a s + b) + c` under singularity `singularity`; maps
    /// solutions to solutions when `2 μ_new = 2 μ_old a` and the
    /// constant shift matches (checked by the callers' ODE residuals).
    pub(crate) fn reparametrize(
        &self,
        a: f64,
        b: f64,
        c: f64,
        singularity: SingularityProfile,
    ) -> Result<RadialProfile> {
        let spec = ProblemSpec::new(
            self.spec.a.clone(),
            singularity,
            self.spec.alpha0.iter().map(|v| v + c).collect(),
        )?;
        let map = |rows: &Vec<Vec<f64>>, f: f64, add: f64| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|v| v * f + add).collect())
                .collect()
        };
        let grid = self.grid.iter().map(|s| (s - b) / a).collect::<Vec<_>>();
        let r_max = if a == 1.0 && b == 0.0 {
            self.r_max
        } else {
            grid.last().unwrap().exp()
        };
        Ok(RadialProfile {
            spec,
            grid,
            values: map(&self.values, 1.0, c),
            derivs: map(&self.derivs, a, 0.0),
            second: map(&self.second, a * a, 0.0),
            third: map(&self.third, a * a * a, 0.0),
            r_max,
            tol: self.tol,
        })
    }

    /// Largest relative mismatch between the stored second derivatives and
    /// the equation of this profile's own spec. Zero for integrated profiles;
    /// checks that reparametrized profiles still solve their system.
    pub fn equation_defect(&self) -> f64 {
        let n = self.n();
        let mut f = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for (k, s) in self.grid.iter().enumerate() {
            self.spec.forcing(*s, &self.values[k], &mut f);
            for i in 0..n {
                let d = (f[i] - self.second[k][i]).abs() / f[i].abs().max(1e-300);
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Values and `r`-derivatives at radius `r ∈ [0, r_max]`.
pub fn evaluate(profile: &RadialProfile, r: f64) -> Result<RadialPoint> {
    if !(r >= 0.0) || r > profile.r_max * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            r,
            r_max: profile.r_max,
        });
    }
    let r0 = profile.s_min().exp();
    if r < r0 {
        return origin_series(&profile.spec, r);
    }
    let (values, w) = profile.eval_log(r.ln())?;
    let derivs = w.into_iter().map(|d| d / r).collect();
    Ok(RadialPoint { values, derivs })
}
