//! The shooting map from initial values to masses and its inverse.
//!
//! With `α_1 = 0` fixed, `(α_2, …, α_n) ↦ (σ_2, …, σ_n)` is a
//! diffeomorphism onto the reachable part of the Pohozaev hypersurface.
//! Here `α_i` denotes the initial value `U_i(0)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{CoefficientMatrix, SingularityProfile};
use crate::energy::{extract_summary, SolutionSummary};
use crate::error::{Error, Result};
use crate::radial::{integrate, ProblemSpec, DEFAULT_R_MAX, DEFAULT_TOL};

/// Bound on reduced initial values.
pub const ALPHA_BOUND: f64 = 30.0;
pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const NEWTON_TOL: f64 = 1e-9;
pub const NEWTON_MAX_STEPS: usize = 50;
pub const MAX_HALVINGS: usize = 8;
const ARMIJO: f64 = 1e-4;
const POLISH_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingPoint {
    #[serde(skip)]
    pub a: CoefficientMatrix,
    #[serde(skip)]
    pub singularity: SingularityProfile,
    pub reduced_alpha: Vec<f64>,
    pub full_sigma: Vec<f64>,
    pub reduced_sigma: Vec<f64>,
    /// Constant subtracted from `(0, α_2, …)` before integrating so that
    /// the largest initial value is 0; masses do not depend on it.
    pub shift: f64,
    pub summary: SolutionSummary,
}

fn check_alpha(values: &[f64]) -> Result<()> {
    if let Some(v) = values
        .iter()
        .find(|v| !v.is_finite() || v.abs() > ALPHA_BOUND)
    {
        return Err(Error::invalid(
            "reduced_alpha",
            format!("{v} outside [-{ALPHA_BOUND}, {ALPHA_BOUND}]"),
        ));
    }
    Ok(())
}

/// Masses of the solution with `U(0) = (0, α_2, …, α_n)`.
pub fn alpha_to_sigma(
    a: &CoefficientMatrix,
    singularity: SingularityProfile,
    reduced_alpha: &[f64],
) -> Result<ShootingPoint> {
    if reduced_alpha.len() + 1 != a.n() {
        return Err(Error::invalid(
            "reduced_alpha",
            format!("length {} but matrix size {}", reduced_alpha.len(), a.n()),
        ));
    }
    check_alpha(reduced_alpha)?;
    let full: Vec<f64> = std::iter::once(0.0).chain(reduced_alpha.iter().copied()).collect();
    let shift = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spec = ProblemSpec::new(
        a.clone(),
        singularity,
        full.iter().map(|v| v - shift).collect(),
    )?;
    let profile = integrate(&spec, DEFAULT_R_MAX, DEFAULT_TOL)?;
    let summary = extract_summary(&profile)?;
    Ok(ShootingPoint {
        a: a.clone(),
        singularity,
        reduced_alpha: reduced_alpha.to_vec(),
        full_sigma: summary.sigma.clone(),
        reduced_sigma: summary.sigma[1..].to_vec(),
        shift,
        summary,
    })
}

/// Centered-difference Jacobian `∂σ_{i+1}/∂α_{j+1}`.
pub fn shooting_jacobian(
    a: &CoefficientMatrix,
    singularity: SingularityProfile,
    reduced_alpha: &[f64],
    h: f64,
) -> Result<DMatrix<f64>> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::invalid("h", format!("{h:e} outside [1e-6, 1e-2]")));
    }
    let k = reduced_alpha.len();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut plus = reduced_alpha.to_vec();
        let mut minus = reduced_alpha.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let sp = alpha_to_sigma(a, singularity, &plus)?;
        let sm = alpha_to_sigma(a, singularity, &minus)?;
        for i in 0..k {
            jac[(i, j)] = (sp.reduced_sigma[i] - sm.reduced_sigma[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn residual(p: &ShootingPoint, target: &[f64]) -> Vec<f64> {
    p.reduced_sigma.iter().zip(target).map(|(s, t)| s - t).collect()
}

/// Damped Newton for `σ(α) = target`; returns the converged point.
pub fn invert_sigma(
    a: &CoefficientMatrix,
    singularity: SingularityProfile,
    target: &[f64],
    guess: &[f64],
) -> Result<ShootingPoint> {
    if target.len() + 1 != a.n() || guess.len() != target.len() {
        return Err(Error::invalid(
            "target",
            format!(
                "target/guess lengths {}/{} do not match matrix size {}",
                target.len(),
                guess.len(),
                a.n()
            ),
        ));
    }
    if target.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("target", "non-finite entry"));
    }
    check_alpha(guess)?;

    // Leave room for the difference stencil inside the admissible box.
    let limit = ALPHA_BOUND - DEFAULT_FD_STEP;
    let mut point = alpha_to_sigma(a, singularity, guess)?;
    let mut r = residual(&point, target);
    let mut norm = sup_norm(&r);
    let mut steps = 0;
    while norm >= NEWTON_TOL {
        if steps == NEWTON_MAX_STEPS {
            break;
        }
        steps += 1;
        let jac = shooting_jacobian(a, singularity, &point.reduced_alpha, DEFAULT_FD_STEP)?;
        let rhs = -DVector::from_column_slice(&r);
        let dir = match jac.clone().lu().solve(&rhs) {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            // Singular Jacobian: fall back to steepest descent on ½‖r‖².
            _ => jac.transpose() * &rhs,
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = point
                .reduced_alpha
                .iter()
                .zip(dir.iter())
                .map(|(x, d)| (x + t * d).clamp(-limit, limit))
                .collect();
            if let Ok(p) = alpha_to_sigma(a, singularity, &trial) {
                let rt = residual(&p, target);
                let nt = sup_norm(&rt);
                if nt <= (1.0 - ARMIJO * t) * norm {
                    accepted = Some((p, rt, nt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((p, rt, nt)) => {
                point = p;
                r = rt;
                norm = nt;
            }
            None => break,
        }
    }
    if norm < NEWTON_TOL {
        // A σ-residual of 1e-9 can still leave α off by ‖J⁻¹‖·1e-9 where the
        // map is flat; polish while full steps keep improving it.
        let polish = if target.is_empty() { 0 } else { POLISH_STEPS };
        for _ in 0..polish {
            let jac = shooting_jacobian(a, singularity, &point.reduced_alpha, DEFAULT_FD_STEP)?;
            let Some(dir) = jac.lu().solve(&-DVector::from_column_slice(&r)) else {
                break;
            };
            let trial: Vec<f64> = point
                .reduced_alpha
                .iter()
                .zip(dir.iter())
                .map(|(x, d)| (x + d).clamp(-limit, limit))
                .collect();
            match alpha_to_sigma(a, singularity, &trial) {
                Ok(p) if sup_norm(&residual(&p, target)) < norm => {
                    r = residual(&p, target);
                    norm = sup_norm(&r);
                    point = p;
                }
                _ => break,
            }
        }
        Ok(point)
    } else {
        Err(Error::NonConvergence {
            iterations: steps,
            residual: norm,
            best: point.reduced_alpha,
        })
    }
}
