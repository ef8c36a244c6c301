//! Comparing bubbles of different singular strengths.
//!
//! A profile at strength `μ_q` is carried to strength `μ_p` by
//! `Ṽ(r) = V̄(r^{μ_p/μ_q}) + 2 log(μ_p/μ_q)`, then its height is matched by
//! `V̂(r) = Ṽ(ηr) + 2μ_p log η`. Every step is an affine change of `s = log r`
//! plus a constant shift, so profiles are mapped node by node and stay exact
//! solutions of the target system.

use serde::Serialize;

use crate::algebra::SingularityProfile;
use crate::energy::{extract_summary, SolutionSummary};
use crate::error::{Error, Result};
use crate::radial::RadialProfile;

fn check_mu(name: &'static str, mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain(format!("{name} = {mu} outside (0, 1]")));
    }
    Ok(())
}

/// `Ṽ_i(r) = V̄_i(r^{μ_p/μ_q}) + 2 log(μ_p/μ_q)` at strength `μ_p`.
pub fn mu_transform(profile: &RadialProfile, mu_p: f64) -> Result<RadialProfile> {
    let mu_q = profile.mu();
    check_mu("mu_p", mu_p)?;
    check_mu("mu_q", mu_q)?;
    let a = mu_p / mu_q;
    let target = if a == 1.0 {
        profile.spec.singularity
    } else {
        SingularityProfile::from_mu(mu_p)?
    };
    profile.reparametrize(a, 0.0, 2.0 * a.ln(), target)
}

/// Heights at `p` and `q` and the matching factor `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingHeights {
    pub m_p: f64,
    pub m_q: f64,
    pub mu_p: f64,
    pub mu_q: f64,
    pub eps_p: f64,
    pub eps_q: f64,
    pub eta: f64,
}

impl ScalingHeights {
    /// `2μ_p log η − (μ_p M_p − μ_q M_q − 2 log(μ_p/μ_q))`.
    pub fn defect(&self) -> f64 {
        2.0 * self.mu_p * self.eta.ln()
            - (self.mu_p * self.m_p - self.mu_q * self.m_q - 2.0 * (self.mu_p / self.mu_q).ln())
    }
}

/// `η` from `2μ_p log η = μ_p M_p − μ_q M_q − 2 log(μ_p/μ_q)`.
pub fn height_match(m_p: f64, m_q: f64, mu_p: f64, mu_q: f64) -> Result<ScalingHeights> {
    check_mu("mu_p", mu_p)?;
    check_mu("mu_q", mu_q)?;
    if !(m_p.is_finite() && m_q.is_finite()) {
        return Err(Error::invalid("heights", "non-finite height"));
    }
    let log_eta = (mu_p * m_p - mu_q * m_q - 2.0 * (mu_p / mu_q).ln()) / (2.0 * mu_p);
    Ok(ScalingHeights {
        m_p,
        m_q,
        mu_p,
        mu_q,
        eps_p: (-0.5 * m_p).exp(),
        eps_q: (-0.5 * m_q).exp(),
        eta: log_eta.exp(),
    })
}

/// `V(r) ↦ V(λr) + 2μ log λ`, the scaling symmetry of the radial system.
pub fn rescale(profile: &RadialProfile, lambda: f64) -> Result<RadialProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("scale factor {lambda} must be positive")));
    }
    let l = lambda.ln();
    profile.reparametrize(1.0, l, 2.0 * profile.mu() * l, profile.spec.singularity)
}

/// `V̂_i(r) = Ṽ_i(ηr) + 2μ_p log η`.
pub fn hat_rescale(profile: &RadialProfile, heights: &ScalingHeights) -> Result<RadialProfile> {
    if (profile.mu() - heights.mu_p).abs() > 1e-14 {
        return Err(Error::invalid(
            "heights",
            format!("mu_p = {} but profile has μ = {}", heights.mu_p, profile.mu()),
        ));
    }
    rescale(profile, heights.eta)
}

/// Outcome of the D-relation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DRelation {
    /// `D̂_i` by quadrature of the rescaled profile.
    pub d_hat: Vec<f64>,
    /// `D̄_i + (m̄_i/μ_q) log(μ_p/μ_q)`.
    pub predicted: Vec<f64>,
    pub residual: Vec<f64>,
    /// `−Û_i(0)`.
    pub alpha_hat: Vec<f64>,
    pub heights: ScalingHeights,
}

/// Push the `q`-side solution `Ū` through the chain
/// `V̄ → Ṽ → V̂ → Û` and compare `D̂` with `D̄ + (m̄/μ_q) log(μ_p/μ_q)`.
///
/// `V̄(r) = Ū(r/ε_q) − 2μ_q log ε_q` and `Û(r) = V̂(ε_p r) + 2μ_p log ε_p`.
pub fn d_relation_residual(
    profile_q: &RadialProfile,
    mu_p: f64,
    m_p: f64,
    m_q: f64,
) -> Result<DRelation> {
    let mu_q = profile_q.mu();
    let summary_q = extract_summary(profile_q)?;
    let heights = height_match(m_p, m_q, mu_p, mu_q)?;
    let v_bar = rescale(profile_q, 1.0 / heights.eps_q)?;
    let v_tilde = mu_transform(&v_bar, mu_p)?;
    let v_hat = hat_rescale(&v_tilde, &heights)?;
    let u_hat = rescale(&v_hat, heights.eps_p)?;
    let summary_hat = extract_summary(&u_hat)?;
    let log_ratio = (mu_p / mu_q).ln();
    let predicted: Vec<f64> = summary_q
        .d
        .iter()
        .zip(&summary_q.m)
        .map(|(d, m)| d + m / mu_q * log_ratio)
        .collect();
    let residual = summary_hat
        .d
        .iter()
        .zip(&predicted)
        .map(|(x, y)| x - y)
        .collect();
    Ok(DRelation {
        d_hat: summary_hat.d,
        predicted,
        residual,
        alpha_hat: summary_hat.alpha,
        heights,
    })
}

/// One row of a bubble comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub i: usize,
    pub scaled_p: f64,
    pub scaled_q: f64,
    pub distance: f64,
    /// `ε_p^{m_i − 2μ_p}` when heights are known.
    pub reference: Option<f64>,
}

/// `|σ_i/μ_p − σ̄_i/μ_q|` per component.
pub fn bubble_distance(
    summary_p: &SolutionSummary,
    summary_q: &SolutionSummary,
    heights: Option<&ScalingHeights>,
) -> Result<Vec<ComparisonRow>> {
    if summary_p.n() != summary_q.n() {
        return Err(Error::invalid(
            "summary",
            format!("sizes {} and {} differ", summary_p.n(), summary_q.n()),
        ));
    }
    Ok((0..summary_p.n())
        .map(|i| {
            let scaled_p = summary_p.sigma[i] / summary_p.mu;
            let scaled_q = summary_q.sigma[i] / summary_q.mu;
            ComparisonRow {
                i: i + 1,
                scaled_p,
                scaled_q,
                distance: (scaled_p - scaled_q).abs(),
                reference: heights
                    .map(|h| h.eps_p.powf(summary_p.m[i] - 2.0 * summary_p.mu)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::CoefficientMatrix;
    use crate::radial::{evaluate, integrate, ProblemSpec};
    use approx::assert_relative_eq;

    fn scalar(gamma: f64, r_max: f64) -> RadialProfile {
        let spec = ProblemSpec::new(
            CoefficientMatrix::scalar(1.0).unwrap(),
            SingularityProfile::new(gamma).unwrap(),
            vec![0.0],
        )
        .unwrap();
        integrate(&spec, r_max, 1e-12).unwrap()
    }

    #[test]
    fn f2_to_regular_is_explicit() {
        let t = mu_transform(&scalar(-0.5, 1e4), 1.0).unwrap();
        assert_eq!(t.mu(), 1.0);
        assert_relative_eq!(t.initial_values()[0], 4f64.ln(), epsilon = 1e-15);
        for r in [0.3f64, 1.0, 4.0, 50.0] {
            let want = (4.0f64 / (1.0 + r * r / 2.0).powi(2)).ln();
            assert!((evaluate(&t, r).unwrap().values[0] - want).abs() < 1e-8);
        }
        assert!(t.equation_defect() < 1e-12);
    }

    #[test]
    fn identity_cases() {
        let p = scalar(-0.3, 1e3);
        assert!(mu_transform(&p, p.mu()).unwrap() == p);
        assert!(rescale(&p, 1.0).unwrap() == p);
        assert!(mu_transform(&p, 1.5).is_err());
    }

    #[test]
    fn height_examples() {
        assert_eq!(height_match(3.0, 3.0, 0.6, 0.6).unwrap().eta, 1.0);
        assert_relative_eq!(height_match(10.0, 20.0, 1.0, 0.5).unwrap().eta, 0.5, epsilon = 1e-15);
        assert_relative_eq!(height_match(7.0, 5.0, 1.0, 1.0).unwrap().eta, 1f64.exp(), epsilon = 1e-15);
        let h = height_match(2.3, -1.1, 0.4, 0.9).unwrap();
        assert!(h.defect().abs() < 1e-14);
    }

    #[test]
    fn hat_rescale_keeps_energy() {
        let t = mu_transform(&scalar(-0.5, 1e6), 1.0).unwrap();
        let h = height_match(10.0, 20.0, 1.0, 0.5).unwrap();
        let v = hat_rescale(&t, &h).unwrap();
        assert_relative_eq!(v.initial_values()[0], t.initial_values()[0] + 2.0 * 0.5f64.ln(), epsilon = 1e-14);
        let a = extract_summary(&t).unwrap();
        let b = extract_summary(&v).unwrap();
        assert_relative_eq!(a.sigma[0], b.sigma[0], max_relative = 1e-10);
    }

    #[test]
    fn d_relation_f2() {
        let q = scalar(-0.5, 1e8);
        let x = d_relation_residual(&q, 1.0, 12.0, 30.0).unwrap();
        assert!(x.residual[0].abs() < 1e-6, "{:?}", x.residual);
        assert_relative_eq!(x.d_hat[0], 64f64.ln(), epsilon = 1e-6);
        let y = d_relation_residual(&q, 1.0, 3.0, -4.0).unwrap();
        assert!((x.residual[0] - y.residual[0]).abs() < 1e-9);
        let same = d_relation_residual(&q, 0.5, 1.0, 1.0).unwrap();
        assert!(same.residual[0].abs() < 1e-9);
    }

    #[test]
    fn distances() {
        let f1 = extract_summary(&scalar(0.0, 1e4)).unwrap();
        let f2 = extract_summary(&scalar(-0.5, 1e8)).unwrap();
        let rows = bubble_distance(&f1, &f2, None).unwrap();
        assert!(rows[0].distance < 1e-8);
        assert!(rows[0].reference.is_none());
    }
}
