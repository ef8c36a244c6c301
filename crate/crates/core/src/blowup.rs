//! Leading-order coefficients of `Λ_L(ρ^k)` near the critical hypersurface
//! and the location and coefficient constraints on blowup points.
//!
//! Everything here is formula assembly: Green data comes from
//! [`crate::green`], `D_i − α_i` from an energy summary chosen by the caller.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::algebra::{frak_m, lambda_l, q_point, CoefficientMatrix, FrakM, RhoVector, SingularityProfile};
use crate::error::{Error, Result};
use crate::green::{a_integral, gstar_gradient, gstar_matrix, Point, TorusGreen};

/// `ρ` counts as lying on `Γ_L` when `|Λ_L(ρ)|` is below this.
pub const SURFACE_TOL: f64 = 1e-8;
/// Componentwise tolerance for `ρ = Q`.
pub const Q_TOL: f64 = 1e-8;

/// Coefficient function `h_i` given by a named preset, so that its
/// derivatives are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientField {
    Constant {
        value: f64,
    },
    /// `base + amplitude · sin(2π k·x)`.
    Sinusoidal {
        base: f64,
        amplitude: f64,
        frequency: [f64; 2],
    },
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField::Constant { value }
    }

    fn check(&self) -> Result<()> {
        let (lo, finite) = match *self {
            CoefficientField::Constant { value } => (value, value.is_finite()),
            CoefficientField::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => (
                base - amplitude.abs(),
                base.is_finite() && amplitude.is_finite() && frequency.iter().all(|k| k.is_finite()),
            ),
        };
        if !finite || lo <= 0.0 {
            return Err(Error::invalid("h", format!("{self:?} is not strictly positive")));
        }
        Ok(())
    }

    /// Whether the field is a function on the torus.
    pub fn is_periodic_on(&self, geom: &TorusGreen) -> bool {
        match *self {
            CoefficientField::Constant { .. } => true,
            CoefficientField::Sinusoidal { frequency, .. } => {
                let int = |v: f64| (v - v.round()).abs() < 1e-12;
                int(frequency[0] * geom.lx) && int(frequency[1] * geom.ly)
            }
        }
    }

    fn phase(k: [f64; 2], x: Point) -> f64 {
        2.0 * PI * (k[0] * x[0] + k[1] * x[1])
    }

    pub fn value(&self, x: Point) -> f64 {
        match *self {
            CoefficientField::Constant { value } => value,
            CoefficientField::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => base + amplitude * Self::phase(frequency, x).sin(),
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match *self {
            CoefficientField::Constant { .. } => [0.0, 0.0],
            CoefficientField::Sinusoidal {
                amplitude,
                frequency,
                ..
            } => {
                let c = amplitude * 2.0 * PI * Self::phase(frequency, x).cos();
                [c * frequency[0], c * frequency[1]]
            }
        }
    }

    pub fn laplacian(&self, x: Point) -> f64 {
        match *self {
            CoefficientField::Constant { .. } => 0.0,
            CoefficientField::Sinusoidal {
                amplitude,
                frequency,
                ..
            } => {
                let k2 = frequency[0] * frequency[0] + frequency[1] * frequency[1];
                -amplitude * 4.0 * PI * PI * k2 * Self::phase(frequency, x).sin()
            }
        }
    }

    /// `∇ log h`.
    pub fn grad_log(&self, x: Point) -> Point {
        let h = self.value(x);
        let g = self.gradient(x);
        [g[0] / h, g[1] / h]
    }

    /// `Δ log h = Δh/h − |∇h|²/h²`.
    pub fn lap_log(&self, x: Point) -> f64 {
        let h = self.value(x);
        let g = self.gradient(x);
        self.laplacian(x) / h - (g[0] * g[0] + g[1] * g[1]) / (h * h)
    }
}

/// Reading of the `2πN_L` term in `b_it`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlTerm {
    /// `n_L = Σ_t μ_t`.
    #[default]
    MassSum,
    /// The number of blowup points `N`.
    PointCount,
}

/// Limit data of a blowup sequence on the torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupConfiguration {
    pub points: Vec<Point>,
    pub strengths: Vec<SingularityProfile>,
    #[serde(skip)]
    pub a: CoefficientMatrix,
    pub rho: RhoVector,
    /// One field per component.
    pub h: Vec<CoefficientField>,
    /// `K(p_t)`.
    pub curvature: Vec<f64>,
    /// `D_i`, from an energy summary.
    pub d: Vec<f64>,
    /// `α_i`, from the same summary.
    pub alpha: Vec<f64>,
    pub nl_term: NlTerm,
}

impl BlowupConfiguration {
    /// Flat data (`K = 0`), `D − α` supplied per component as `d`, `alpha`.
    #[allow(clippy::too_many_arguments)]
    pub fn flat(
        points: Vec<Point>,
        strengths: Vec<SingularityProfile>,
        a: CoefficientMatrix,
        rho: RhoVector,
        h: Vec<CoefficientField>,
        d: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let curvature = vec![0.0; points.len()];
        let c = BlowupConfiguration {
            points,
            strengths,
            a,
            rho,
            h,
            curvature,
            d,
            alpha,
            nl_term: NlTerm::MassSum,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let big_n = self.points.len();
        let n = self.a.n();
        if big_n == 0 {
            return Err(Error::invalid("points", "at least one blowup point"));
        }
        if self.strengths.len() != big_n || self.curvature.len() != big_n {
            return Err(Error::invalid(
                "strengths",
                format!(
                    "{} points but {} strengths and {} curvature values",
                    big_n,
                    self.strengths.len(),
                    self.curvature.len()
                ),
            ));
        }
        if self.rho.len() != n || self.h.len() != n || self.d.len() != n || self.alpha.len() != n {
            return Err(Error::invalid(
                "rho",
                format!(
                    "matrix size {n} but rho/h/D/alpha lengths {}/{}/{}/{}",
                    self.rho.len(),
                    self.h.len(),
                    self.d.len(),
                    self.alpha.len()
                ),
            ));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points", "non-finite coordinate"));
        }
        if self.curvature.iter().chain(&self.d).chain(&self.alpha).any(|v| !v.is_finite()) {
            return Err(Error::invalid("D_alpha", "non-finite entry"));
        }
        for h in &self.h {
            h.check()?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// `n_L = Σ_t μ_t`.
    pub fn n_l(&self) -> f64 {
        self.strengths.iter().map(|s| s.mu()).sum()
    }

    pub fn frak_m(&self) -> Result<FrakM> {
        frak_m(&self.rho, &self.a, self.n_l())
    }

    pub fn lambda(&self) -> Result<f64> {
        lambda_l(&self.rho, &self.a, self.n_l())
    }

    /// `I_2`: zero-based indices of regular points.
    pub fn regular_set(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&t| self.strengths[t].is_regular())
            .collect()
    }

    pub fn is_q(&self) -> Result<bool> {
        let q = q_point(&self.a, self.n_l())?;
        Ok(self
            .rho
            .values()
            .iter()
            .zip(q.values())
            .all(|(r, q)| (r - q).abs() <= Q_TOL * q.abs().max(1.0)))
    }

    /// `e^{D_i − α_i}`.
    pub fn limit_factor(&self, i: usize) -> f64 {
        (self.d[i] - self.alpha[i]).exp()
    }

    fn on_surface(&self) -> Result<()> {
        let lam = self.lambda()?;
        if lam.abs() > SURFACE_TOL {
            return Err(Error::Domain(format!(
                "Λ_L(ρ) = {lam:e}; the coefficient formulas need ρ on Γ_L"
            )));
        }
        Ok(())
    }

    fn check_point(&self, t: usize) -> Result<()> {
        if t >= self.points.len() {
            return Err(Error::invalid("t", format!("point {t} out of range")));
        }
        Ok(())
    }

    fn check_regular(&self, t: usize) -> Result<()> {
        self.check_point(t)?;
        if !self.strengths[t].is_regular() {
            return Err(Error::Domain(format!(
                "point {} is singular (γ = {}); the formula needs a regular point",
                t + 1,
                self.strengths[t].gamma()
            )));
        }
        Ok(())
    }
}

/// `Σ_l μ_l ∇_1 G*(p_t, p_l)`.
fn weighted_green_gradient(geom: &TorusGreen, config: &BlowupConfiguration, t: usize) -> Result<Point> {
    let mut g = [0.0, 0.0];
    for (l, s) in config.strengths.iter().enumerate() {
        let d = gstar_gradient(geom, &config.points, t, l)?;
        g[0] += s.mu() * d[0];
        g[1] += s.mu() * d[1];
    }
    Ok(g)
}

/// The terms of `b_it` before summing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BTerms {
    /// `e^{D_i − α_i}`.
    pub prefactor: f64,
    /// `¼ Δ log h_i(p_t)`.
    pub laplacian: f64,
    /// `−K(p_t)/2`.
    pub curvature: f64,
    /// `2π n_L` (or `2πN`).
    pub mass: f64,
    /// `¼ |∇ log h_i(p_t) + 8π Σ_l μ_l ∇_1G*(p_t, p_l)|²`.
    pub gradient: f64,
    pub value: f64,
}

pub fn b_terms(geom: &TorusGreen, config: &BlowupConfiguration, i: usize, t: usize) -> Result<BTerms> {
    config.validate()?;
    config.check_regular(t)?;
    if i >= config.n() {
        return Err(Error::invalid("i", format!("component {i} out of range")));
    }
    let p = config.points[t];
    let h = &config.h[i];
    let gl = h.grad_log(p);
    let gg = weighted_green_gradient(geom, config, t)?;
    let v = [gl[0] + 8.0 * PI * gg[0], gl[1] + 8.0 * PI * gg[1]];
    let n_l = match config.nl_term {
        NlTerm::MassSum => config.n_l(),
        NlTerm::PointCount => config.points.len() as f64,
    };
    let prefactor = config.limit_factor(i);
    let laplacian = 0.25 * h.lap_log(p);
    let curvature = -0.5 * config.curvature[t];
    let mass = 2.0 * PI * n_l;
    let gradient = 0.25 * (v[0] * v[0] + v[1] * v[1]);
    Ok(BTerms {
        prefactor,
        laplacian,
        curvature,
        mass,
        gradient,
        value: prefactor * (laplacian + curvature + mass + gradient),
    })
}

/// `b_it` at a regular point `t`.
pub fn b_coefficient(geom: &TorusGreen, config: &BlowupConfiguration, i: usize, t: usize) -> Result<f64> {
    Ok(b_terms(geom, config, i, t)?.value)
}

/// One δ0-halving row of the general-regime output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub i: usize,
    pub t: usize,
    pub delta0: f64,
    pub a_coarse: f64,
    pub a_fine: f64,
    /// Richardson limit from the two.
    pub limit: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadingTerm {
    #[serde(rename = "D")]
    pub d: f64,
    pub frak_m: f64,
    pub eps: f64,
    pub prediction: f64,
    pub rows: Vec<StabilityRow>,
}

/// `B_it`: reference point `p_1` is `points[0]`.
pub fn b_ratio(geom: &TorusGreen, config: &BlowupConfiguration, i: usize, t: usize) -> Result<f64> {
    config.check_point(t)?;
    let m = config.frak_m()?.min;
    let gstar = gstar_matrix(geom, &config.points)?;
    let sum = |u: usize| -> f64 {
        (0..config.points.len())
            .map(|l| config.strengths[l].mu() * gstar.get(u, l))
            .sum()
    };
    let h = &config.h[i];
    Ok((2.0 * PI * m * (sum(t) - sum(0))).exp() * h.value(config.points[t]) / h.value(config.points[0])
        * config.limit_factor(i))
}

/// `D = Σ_{i∈I_1} Σ_t B_it lim A_{i,δ0}` and `Λ ≈ D ε^{𝔪−2}/n_L`.
///
/// The limit is one Richardson step on `A(δ0)`, `A(δ0/2)`.
pub fn leading_term_general(
    geom: &TorusGreen,
    config: &BlowupConfiguration,
    delta0: f64,
    eps: f64,
) -> Result<LeadingTerm> {
    config.validate()?;
    check_eps(eps)?;
    let fm = config.frak_m()?;
    if fm.min <= 2.0 {
        return Err(Error::Domain(format!("𝔪 = {} must exceed 2", fm.min)));
    }
    config.on_surface()?;
    if config.is_q()? && !config.regular_set().is_empty() {
        return Err(Error::WrongRegime(
            "ρ = Q with a regular blowup point; use leading_term_q".into(),
        ));
    }
    let mut d = 0.0;
    let mut rows = Vec::new();
    for &i in &fm.minimizers {
        for t in 0..config.points.len() {
            let kappa = (2.0 - fm.min) * config.strengths[t].mu();
            let a_coarse = a_integral(geom, config, i, t, delta0)?;
            let a_fine = a_integral(geom, config, i, t, 0.5 * delta0)?;
            let f = 2f64.powf(kappa + 2.0);
            let limit = (f * a_fine - a_coarse) / (f - 1.0);
            let b = b_ratio(geom, config, i, t)?;
            d += b * limit;
            rows.push(StabilityRow {
                i,
                t,
                delta0,
                a_coarse,
                a_fine,
                limit,
                b,
            });
        }
    }
    Ok(LeadingTerm {
        d,
        frak_m: fm.min,
        eps,
        prediction: d * eps.powf(fm.min - 2.0) / config.n_l(),
        rows,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("{eps} outside (0, 1)")));
    }
    Ok(())
}

/// `−4 Σ_i Σ_{t∈I_2} b_it ε² log(1/ε)`.
pub fn leading_term_q(geom: &TorusGreen, config: &BlowupConfiguration, eps: f64) -> Result<f64> {
    config.validate()?;
    check_eps(eps)?;
    if !config.is_q()? {
        return Err(Error::WrongRegime(format!(
            "ρ = {:?} is not Q; use leading_term_general",
            config.rho.values()
        )));
    }
    let regular = config.regular_set();
    if regular.is_empty() {
        return Err(Error::WrongRegime(
            "no regular blowup point; use leading_term_general".into(),
        ));
    }
    let mut b = 0.0;
    for i in 0..config.n() {
        for &t in &regular {
            b += b_coefficient(geom, config, i, t)?;
        }
    }
    Ok(-4.0 * b * eps * eps * (1.0 / eps).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    General,
    Q,
}

/// `Σ_i [∇ log h_i(p_t) + c Σ_s μ_s ∇_1G*(p_t, p_s)] w_i` with
/// `(c, w) = (2π𝔪, ρ)` in the general regime and `(8π, Q)` at `Q`.
pub fn location_residual(
    geom: &TorusGreen,
    config: &BlowupConfiguration,
    t: usize,
    regime: Regime,
) -> Result<Point> {
    config.validate()?;
    config.check_regular(t)?;
    let (c, w) = match regime {
        Regime::General => (2.0 * PI * config.frak_m()?.min, config.rho.clone()),
        Regime::Q => (8.0 * PI, q_point(&config.a, config.n_l())?),
    };
    let gg = weighted_green_gradient(geom, config, t)?;
    let p = config.points[t];
    let mut r = [0.0, 0.0];
    for (h, wi) in config.h.iter().zip(w.values()) {
        let gl = h.grad_log(p);
        r[0] += (gl[0] + c * gg[0]) * wi;
        r[1] += (gl[1] + c * gg[1]) * wi;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationSearch {
    pub point: Point,
    pub residual: Point,
    pub iterations: usize,
}

const LOCATION_TOL: f64 = 1e-10;
const LOCATION_MAX_STEPS: usize = 50;
const LOCATION_FD: f64 = 1e-6;

/// Moves `p_t` by damped Newton until the location residual vanishes.
pub fn locate_regular_point(
    geom: &TorusGreen,
    config: &BlowupConfiguration,
    t: usize,
    regime: Regime,
) -> Result<LocationSearch> {
    let mut cfg = config.clone();
    let eval = |c: &BlowupConfiguration| location_residual(geom, c, t, regime);
    let norm = |r: Point| r[0].hypot(r[1]);
    let mut r = eval(&cfg)?;
    let mut steps = 0;
    while norm(r) >= LOCATION_TOL && steps < LOCATION_MAX_STEPS {
        steps += 1;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut plus = cfg.clone();
            let mut minus = cfg.clone();
            plus.points[t][k] += LOCATION_FD;
            minus.points[t][k] -= LOCATION_FD;
            let (rp, rm) = (eval(&plus)?, eval(&minus)?);
            for row in 0..2 {
                jac[row][k] = (rp[row] - rm[row]) / (2.0 * LOCATION_FD);
            }
        }
        // Minimum-norm step: the residual may not depend on both coordinates.
        let j = Matrix2::new(jac[0][0], jac[0][1], jac[1][0], jac[1][1]);
        let Ok(step) = j.svd(true, true).solve(&Vector2::new(r[0], r[1]), 1e-12) else {
            break;
        };
        let dx = [-step[0], -step[1]];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let mut trial = cfg.clone();
            trial.points[t][0] += lambda * dx[0];
            trial.points[t][1] += lambda * dx[1];
            if let Ok(rt) = eval(&trial) {
                if norm(rt) < norm(r) {
                    cfg = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm(r) < LOCATION_TOL {
        Ok(LocationSearch {
            point: cfg.points[t],
            residual: r,
            iterations: steps,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: steps,
            residual: norm(r),
            best: cfg.points[t].to_vec(),
        })
    }
}

/// `H_it = 2π𝔪_i/(𝔪_i − 2) Σ_l μ_l G*(p_t, p_l) + log(h_i(p_t)/μ_t^{𝔪_i})/(𝔪_i − 2)`.
pub fn h_value(geom: &TorusGreen, config: &BlowupConfiguration, i: usize, t: usize) -> Result<f64> {
    config.check_point(t)?;
    let m = config.frak_m()?.components[i];
    if m <= 2.0 {
        return Err(Error::Domain(format!("𝔪_{} = {m} must exceed 2", i + 1)));
    }
    let gstar = gstar_matrix(geom, &config.points)?;
    let sum: f64 = (0..config.points.len())
        .map(|l| config.strengths[l].mu() * gstar.get(t, l))
        .sum();
    let mu = config.strengths[t].mu();
    let h = config.h[i].value(config.points[t]);
    Ok(2.0 * PI * m / (m - 2.0) * sum + (h / mu.powf(m)).ln() / (m - 2.0))
}

/// `(H_it − H_is) − (H_jt − H_js)`.
pub fn h_relation_residual(
    geom: &TorusGreen,
    config: &BlowupConfiguration,
    i: usize,
    j: usize,
    t: usize,
    s: usize,
) -> Result<f64> {
    config.validate()?;
    if t == s {
        return Err(Error::invalid("s", "t and s must differ"));
    }
    if i >= config.n() || j >= config.n() {
        return Err(Error::invalid("i", format!("components ({i}, {j}) out of range")));
    }
    let h = |k, u| h_value(geom, config, k, u);
    Ok((h(i, t)? - h(i, s)?) - (h(j, t)? - h(j, s)?))
}
