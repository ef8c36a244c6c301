//! Asymptotic data of a radial solution: masses `σ_i`, flux exponents
//! `m_i = Σ_j a_ij σ_j`, tail constants `D_i` and the Pohozaev identity.
//!
//! All integrals are taken in `s = log r`, where
//! `σ_i = ∫ e^{2μs + U_i} ds` and `D_i = Σ_j a_ij ∫ s e^{2μs + U_j} ds`.
//! The part beyond `r_max` is closed with the leading tail
//! `e^{U_j} ≈ e^{D_j − α_j} r^{−m_j}` and the resulting fixed point is
//! iterated until `σ` settles.

use serde::Serialize;

use crate::algebra::CoefficientMatrix;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::radial::RadialProfile;

/// Successive σ updates below this end the tail iteration.
pub const FIXED_POINT_TOL: f64 = 1e-11;
pub const FIXED_POINT_MAX_ITER: usize = 100;
/// Margin above `2μ` below which the tail model is flagged.
pub const NEAR_BOUNDARY_MARGIN: f64 = 0.01;

// Gauss points per grid interval.
const NODES_PER_STEP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    #[serde(skip)]
    pub a: CoefficientMatrix,
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    /// `α_i = −U_i(0)`.
    pub alpha: Vec<f64>,
    pub mu: f64,
    pub m_min: f64,
    /// Iterations used by the tail fixed point.
    pub iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SolutionSummary {
    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `e^{D_i − α_i}`, the coefficient of `r^{−m_i}` in `e^{U_i}`.
    pub fn tail_coefficient(&self) -> Vec<f64> {
        self.d
            .iter()
            .zip(&self.alpha)
            .map(|(d, a)| (d - a).exp())
            .collect()
    }

    pub fn near_boundary(&self) -> bool {
        self.m_min <= 2.0 * self.mu + NEAR_BOUNDARY_MARGIN
    }
}

/// Per-component `∫_{-∞}^{s_hi} w(s) e^{2μs + U_i(s)} ds` for `w = 1` and
/// `w = s`.
fn log_moments(profile: &RadialProfile, s_hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = profile.n();
    let mu = profile.mu();
    let gl = GaussLegendre::new(NODES_PER_STEP);
    let mut m0 = vec![0.0; n];
    let mut m1 = vec![0.0; n];

    // Below the first node U = α0 − β t + ..., t = e^{2μs}; integrate in t.
    let s0 = profile.s_min().min(s_hi);
    let t0 = (2.0 * mu * s0).exp();
    let (u0, _) = profile.eval_log(s0)?;
    for i in 0..n {
        let a0 = profile.initial_values()[i];
        let beta = (a0 - u0[i]) / t0;
        let e = a0.exp() / (2.0 * mu);
        m0[i] += e * (t0 - 0.5 * beta * t0 * t0);
        // ∫ (log t/2μ) e^{α} (1 − βt) dt/(2μ)
        let lt = t0.ln();
        m1[i] += e / (2.0 * mu)
            * (t0 * (lt - 1.0) - 0.5 * beta * t0 * t0 * (lt - 0.5));
    }
    if s_hi <= profile.s_min() {
        return Ok((m0, m1));
    }

    let mut lo = profile.s_min();
    let mut k = 1;
    while lo < s_hi {
        let hi = profile.grid.get(k).copied().unwrap_or(s_hi).min(s_hi);
        for (s, w) in gl.mapped(lo, hi) {
            let (u, _) = profile.eval_log(s)?;
            for i in 0..n {
                let f = (2.0 * mu * s + u[i]).exp() * w;
                m0[i] += f;
                m1[i] += f * s;
            }
        }
        lo = hi;
        k += 1;
    }
    Ok((m0, m1))
}

fn check_radius(profile: &RadialProfile, r: f64) -> Result<()> {
    if !(r >= 0.0) || r > profile.r_max * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            r,
            r_max: profile.r_max,
        });
    }
    Ok(())
}

/// `σ_iR = (1/2π)∫_{B_R} |y|^{2γ} e^{U_i}`.
pub fn truncated_sigma(profile: &RadialProfile, r: f64) -> Result<Vec<f64>> {
    check_radius(profile, r)?;
    if r == 0.0 {
        return Ok(vec![0.0; profile.n()]);
    }
    Ok(log_moments(profile, r.ln().min(profile.s_max()))?.0)
}

/// Masses, flux exponents and tail constants of an integrated profile.
pub fn extract_summary(profile: &RadialProfile) -> Result<SolutionSummary> {
    let n = profile.n();
    let mu = profile.mu();
    let a = &profile.spec.a;
    let s_r = profile.s_max();
    let big_r = profile.r_max;
    let (sigma_r, moment) = log_moments(profile, s_r)?;
    let d_r = a.apply(&moment);
    let u0 = profile.initial_values().to_vec();

    let mut m = profile.outer_flux();
    let mut d = d_r.clone();
    let mut sigma = sigma_r.clone();
    let mut iterations = 0;
    loop {
        if m.iter().any(|mi| *mi <= 2.0 * mu) {
            return Err(Error::Extraction(format!(
                "flux exponents {m:?} do not exceed 2μ = {}; r_max too small or solution not integrable",
                2.0 * mu
            )));
        }
        let c: Vec<f64> = (0..n).map(|i| d[i] + u0[i]).collect();
        let mut tail_d = vec![0.0; n];
        let mut new_sigma = vec![0.0; n];
        for j in 0..n {
            let k = m[j] - 2.0 * mu;
            let w = c[j].exp() * big_r.powf(-k);
            new_sigma[j] = sigma_r[j] + w / k;
            tail_d[j] = w * (s_r / k + 1.0 / (k * k));
        }
        let change = new_sigma
            .iter()
            .zip(&sigma)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        sigma = new_sigma;
        m = a.apply(&sigma);
        let extra = a.apply(&tail_d);
        d = (0..n).map(|i| d_r[i] + extra[i]).collect();
        iterations += 1;
        if change < FIXED_POINT_TOL && iterations > 1 {
            break;
        }
        if iterations >= FIXED_POINT_MAX_ITER || !change.is_finite() {
            return Err(Error::Extraction(format!(
                "tail fixed point did not settle in {FIXED_POINT_MAX_ITER} iterations (last change {change:e})"
            )));
        }
    }
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    if m_min <= 2.0 * mu + NEAR_BOUNDARY_MARGIN {
        warnings.push(format!(
            "m_min = {m_min} within {NEAR_BOUNDARY_MARGIN} of 2μ = {}; tail model unreliable",
            2.0 * mu
        ));
    }
    Ok(SolutionSummary {
        a: a.clone(),
        sigma,
        m,
        d,
        alpha: u0.iter().map(|v| -v).collect(),
        mu,
        m_min,
        iterations,
        warnings,
    })
}

/// `(Σ a_ij σ_i σ_j − 4μ Σ σ_i)/(4μ Σ σ_i)`.
pub fn pohozaev_residual(summary: &SolutionSummary) -> f64 {
    let total: f64 = summary.sigma.iter().sum();
    let q = summary.a.bilinear(&summary.sigma, &summary.sigma);
    (q - 4.0 * summary.mu * total) / (4.0 * summary.mu * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub r: f64,
    pub defect: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Finite-radius Pohozaev defect against its leading tail prediction.
pub fn pohozaev_tail_table(
    profile: &RadialProfile,
    summary: &SolutionSummary,
    radii: &[f64],
) -> Result<Vec<TailRow>> {
    let mu = summary.mu;
    let coef = summary.tail_coefficient();
    radii
        .iter()
        .map(|&r| {
            if r < 10.0 {
                return Err(Error::invalid("radii", format!("{r} below 10")));
            }
            let s: Vec<f64> = truncated_sigma(profile, r)?.iter().map(|x| x / mu).collect();
            let defect = 4.0 * s.iter().sum::<f64>() - summary.a.bilinear(&s, &s);
            let predicted = 2.0 / (mu * mu)
                * (0..summary.n())
                    .map(|i| coef[i] * r.powf(2.0 * mu - summary.m[i]))
                    .sum::<f64>();
            Ok(TailRow {
                r,
                defect,
                predicted,
                ratio: defect / predicted,
            })
        })
        .collect()
}

/// `U_i(r)` minus the three-term tail
/// `−m_i log r + D_i − α_i − Σ_j a_ij e^{D_j−α_j} r^{2μ−m_j}/(m_j − 2μ)²`.
pub fn asymptotic_fit_error(
    profile: &RadialProfile,
    summary: &SolutionSummary,
    r: f64,
) -> Result<Vec<f64>> {
    if r < 5.0 {
        return Err(Error::invalid("r", format!("{r} below 5")));
    }
    check_radius(profile, r)?;
    let (u, _) = profile.eval_log(r.ln())?;
    let coef = summary.tail_coefficient();
    let mu = summary.mu;
    let corr: Vec<f64> = (0..summary.n())
        .map(|j| {
            let k = summary.m[j] - 2.0 * mu;
            coef[j] * r.powf(-k) / (k * k)
        })
        .collect();
    let corr = summary.a.apply(&corr);
    Ok((0..summary.n())
        .map(|i| u[i] - (-summary.m[i] * r.ln() + summary.d[i] - summary.alpha[i] - corr[i]))
        .collect())
}

/// `−dU_i/ds` at `r_max` with the derivative of the `r^{2μ−m_j}` tail
/// removed; estimates `m_i` independently of the masses.
pub fn corrected_outer_flux(profile: &RadialProfile, summary: &SolutionSummary) -> Vec<f64> {
    let mu = summary.mu;
    let r = profile.r_max;
    let coef = summary.tail_coefficient();
    let corr: Vec<f64> = (0..summary.n())
        .map(|j| {
            let k = summary.m[j] - 2.0 * mu;
            coef[j] * r.powf(-k) / k
        })
        .collect();
    let corr = summary.a.apply(&corr);
    profile
        .outer_flux()
        .iter()
        .zip(&corr)
        .map(|(f, c)| f + c)
        .collect()
}

/// Least-squares slope of `log(σ_i − σ_iR)` against `log R` per component.
pub fn tail_slope(
    profile: &RadialProfile,
    summary: &SolutionSummary,
    radii: &[f64],
) -> Result<Vec<f64>> {
    if radii.len() < 2 {
        return Err(Error::invalid("radii", "need at least two radii"));
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut ys = vec![Vec::with_capacity(radii.len()); summary.n()];
    for &r in radii {
        let sr = truncated_sigma(profile, r)?;
        for i in 0..summary.n() {
            let gap = summary.sigma[i] - sr[i];
            if !(gap > 0.0) {
                return Err(Error::Extraction(format!(
                    "non-positive tail mass {gap:e} at R = {r}"
                )));
            }
            ys[i].push(gap.ln());
        }
    }
    Ok(ys.iter().map(|y| slope(&x, y)).collect())
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `−dU_i/ds` at `R` against `Σ_j a_ij σ_jR`; both equal the enclosed flux.
pub fn flux_mismatch(profile: &RadialProfile, r: f64) -> Result<f64> {
    let sr = truncated_sigma(profile, r)?;
    let flux = profile.spec.a.apply(&sr);
    let (_, w) = profile.eval_log(r.ln())?;
    Ok(flux
        .iter()
        .zip(&w)
        .map(|(f, w)| (f + w).abs())
        .fold(0.0, f64::max))
}
