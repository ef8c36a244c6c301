//! Interaction matrices and the closed-form objects of ρ-space.
//!
//! Everything here is algebraic: the structural hypotheses on the
//! interaction matrix, the set of critical values, the quadratic form
//! `Λ_L` whose zero set is the critical hypersurface `Γ_L`, the normal
//! direction data `𝔪_i`, the symmetric point `Q`, and the height quadratic.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIE_RTOL: f64 = 1e-12;
const BOUNDARY_RTOL: f64 = 1e-10;

/// Which structural hypothesis a clause belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Symmetric, nonnegative, irreducible, invertible.
    H1,
    /// Sign pattern of the inverse.
    H2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub hypothesis: Hypothesis,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail of every (H1)/(H2) clause for a candidate matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub clauses: Vec<Clause>,
    /// Inverse, when the matrix is invertible.
    pub inverse: Option<Vec<Vec<f64>>>,
}

impl ValidationReport {
    pub fn h1(&self) -> bool {
        self.passed(Hypothesis::H1)
    }

    pub fn h2(&self) -> bool {
        self.passed(Hypothesis::H2)
    }

    fn passed(&self, h: Hypothesis) -> bool {
        self.clauses
            .iter()
            .filter(|c| c.hypothesis == h)
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> + '_ {
        self.clauses.iter().filter(|c| !c.passed)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("matrix", "empty matrix"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::invalid(
            "matrix",
            format!("row {} has {} entries, expected {n}", i + 1, r.len()),
        ));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "non-finite entry"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn is_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (a[(i, j)] > 0.0 || a[(j, i)] > 0.0) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn build_report(a: &DMatrix<f64>) -> ValidationReport {
    let n = a.nrows();
    let mut clauses = Vec::new();
    let mut push = |hypothesis, name, passed, detail: String| {
        clauses.push(Clause {
            hypothesis,
            name,
            passed,
            detail,
        })
    };

    let scale = a.amax().max(1.0);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - a[(j, i)]).abs())
        .fold(0.0, f64::max);
    push(
        Hypothesis::H1,
        "symmetric",
        asym <= TIE_RTOL * scale,
        format!("max |a_ij - a_ji| = {asym:e}"),
    );
    let min_entry = a.min();
    push(
        Hypothesis::H1,
        "nonnegative",
        min_entry >= 0.0,
        format!("min a_ij = {min_entry}"),
    );
    push(
        Hypothesis::H1,
        "irreducible",
        is_connected(a),
        "positivity graph connectivity".to_string(),
    );

    let inverse = a.clone().try_inverse().filter(|inv| {
        let residual = (inv * a - DMatrix::identity(n, n)).amax();
        residual <= 1e-12 * (1.0 + a.amax() * inv.amax() * n as f64)
    });
    push(
        Hypothesis::H1,
        "invertible",
        inverse.is_some(),
        match &inverse {
            Some(inv) => format!(
                "|A^-1 A - I| = {:e}",
                (inv * a - DMatrix::identity(n, n)).amax()
            ),
            None => "singular".to_string(),
        },
    );

    if let Some(inv) = &inverse {
        let tol = TIE_RTOL * inv.amax().max(1.0);
        let max_diag = (0..n).map(|i| inv[(i, i)]).fold(f64::MIN, f64::max);
        push(
            Hypothesis::H2,
            "diagonal of inverse nonpositive",
            max_diag <= tol,
            format!("max a^ii = {max_diag}"),
        );
        let min_off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| inv[(i, j)])
            .fold(f64::MAX, f64::min);
        push(
            Hypothesis::H2,
            "off-diagonal of inverse nonnegative",
            n == 1 || min_off >= -tol,
            if n == 1 {
                "no off-diagonal entries".to_string()
            } else {
                format!("min a^ij = {min_off}")
            },
        );
        let min_row = (0..n)
            .map(|i| inv.row(i).sum())
            .fold(f64::MAX, f64::min);
        push(
            Hypothesis::H2,
            "row sums of inverse nonnegative",
            min_row >= -tol,
            format!("min sum_j a^ij = {min_row}"),
        );
    } else {
        for name in [
            "diagonal of inverse nonpositive",
            "off-diagonal of inverse nonnegative",
            "row sums of inverse nonnegative",
        ] {
            push(Hypothesis::H2, name, false, "no inverse".to_string());
        }
    }

    ValidationReport {
        clauses,
        inverse: inverse.map(|inv| {
            (0..n)
                .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
                .collect()
        }),
    }
}

/// Evaluate every (H1)/(H2) clause for a raw matrix.
///
/// Only malformed input (non-square, non-finite) is an error; failing
/// clauses are reported.
pub fn validate_structure(rows: &[Vec<f64>]) -> Result<ValidationReport> {
    Ok(build_report(&rows_to_matrix(rows)?))
}

/// An interaction matrix satisfying (H1). (H2) is recorded, not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    report: ValidationReport,
}

impl CoefficientMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let entries = rows_to_matrix(rows)?;
        let report = build_report(&entries);
        if let Some(c) = report
            .failures()
            .find(|c| c.hypothesis == Hypothesis::H1)
        {
            return Err(Error::invalid(
                "matrix",
                format!("(H1) fails: not {} ({})", c.name, c.detail),
            ));
        }
        let inverse = entries
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearSolve("matrix is singular".into()))?;
        Ok(CoefficientMatrix {
            entries,
            inverse,
            report,
        })
    }

    pub fn scalar(a: f64) -> Result<Self> {
        Self::from_rows(&[vec![a]])
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn inverse_entry(&self, i: usize, j: usize) -> f64 {
        self.inverse[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn satisfies_h2(&self) -> bool {
        self.report.h2()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `Σ_ij a_ij x_i y_j`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(self.apply(y))
            .map(|(xi, ayi)| xi * ayi)
            .sum()
    }

    /// Whether `A` is invariant under the index permutation `perm`.
    pub fn is_invariant_under(&self, perm: &[usize]) -> bool {
        let n = self.n();
        perm.len() == n
            && (0..n).all(|i| (0..n).all(|j| self.get(perm[i], perm[j]) == self.get(i, j)))
    }
}

/// Strength of a singular source, `γ ∈ (−1, 0]`, `μ = 1 + γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SingularityProfile {
    gamma: f64,
}

impl SingularityProfile {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > -1.0 && gamma <= 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("{gamma} is outside the valid range (-1, 0]"),
            ));
        }
        Ok(SingularityProfile { gamma })
    }

    pub fn from_mu(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::invalid(
                "mu",
                format!("{mu} is outside the valid range (0, 1]"),
            ));
        }
        Self::new(mu - 1.0)
    }

    pub fn regular() -> Self {
        SingularityProfile { gamma: 0.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        1.0 + self.gamma
    }

    pub fn is_regular(&self) -> bool {
        self.gamma == 0.0
    }
}

impl TryFrom<f64> for SingularityProfile {
    type Error = Error;
    fn try_from(gamma: f64) -> Result<Self> {
        Self::new(gamma)
    }
}

impl From<SingularityProfile> for f64 {
    fn from(s: SingularityProfile) -> f64 {
        s.gamma
    }
}

/// Parameter vector `ρ`, entries finite and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RhoVector(Vec<f64>);

impl RhoVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("rho", "empty vector"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("rho", "entries must be finite and >= 0"));
        }
        Ok(RhoVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl TryFrom<Vec<f64>> for RhoVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RhoVector> for Vec<f64> {
    fn from(r: RhoVector) -> Vec<f64> {
        r.0
    }
}

fn check_dims(rho: &RhoVector, a: &CoefficientMatrix) -> Result<()> {
    if rho.len() != a.n() {
        return Err(Error::invalid(
            "rho",
            format!("length {} does not match matrix size {}", rho.len(), a.n()),
        ));
    }
    Ok(())
}

fn check_nl(n_l: f64) -> Result<()> {
    if !(n_l > 0.0 && n_l.is_finite()) {
        return Err(Error::invalid("n_l", format!("{n_l} must be positive")));
    }
    Ok(())
}

/// Sorted, deduplicated `{8mπ + Σ_{l∈Λ} 8π μ_l} \ {0}` over all subsets `Λ`
/// of the singular points and `0 ≤ m ≤ m_max`.
pub fn critical_values(strengths: &[SingularityProfile], m_max: u32) -> Result<Vec<f64>> {
    if strengths.len() > 24 {
        return Err(Error::invalid(
            "strengths",
            "subset enumeration limited to 24 points",
        ));
    }
    let mut subset_sums = Vec::with_capacity(1 << strengths.len());
    for mask in 0u32..(1u32 << strengths.len()) {
        let s: f64 = strengths
            .iter()
            .enumerate()
            .filter(|(l, _)| mask & (1 << l) != 0)
            .map(|(_, p)| p.mu())
            .sum();
        subset_sums.push(s);
    }
    let mut values: Vec<f64> = (0..=m_max)
        .flat_map(|m| {
            subset_sums
                .iter()
                .map(move |s| 8.0 * PI * (m as f64 + s))
        })
        .filter(|v| *v > 0.0)
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup_by(|b, a| (*b - *a).abs() <= TIE_RTOL * a.abs());
    Ok(values)
}

/// `Λ_L(ρ) = 4 Σ ρ_i/(2π n_L) − Σ a_ij ρ_i ρ_j/(2π n_L)²`.
pub fn lambda_l(rho: &RhoVector, a: &CoefficientMatrix, n_l: f64) -> Result<f64> {
    check_dims(rho, a)?;
    check_nl(n_l)?;
    let scale = 2.0 * PI * n_l;
    let x: Vec<f64> = rho.values().iter().map(|r| r / scale).collect();
    Ok(4.0 * x.iter().sum::<f64>() - a.bilinear(&x, &x))
}

/// The normal-direction data at `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrakM {
    /// `𝔪_i = Σ_j a_ij ρ_j / (2π n_L)`.
    pub components: Vec<f64>,
    pub min: f64,
    /// Zero-based indices attaining the minimum.
    pub minimizers: Vec<usize>,
}

pub fn frak_m(rho: &RhoVector, a: &CoefficientMatrix, n_l: f64) -> Result<FrakM> {
    check_dims(rho, a)?;
    check_nl(n_l)?;
    let scale = 2.0 * PI * n_l;
    let components: Vec<f64> = a.apply(rho.values()).into_iter().map(|v| v / scale).collect();
    let min = components.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers = components
        .iter()
        .enumerate()
        .filter(|(_, v)| (**v - min).abs() <= TIE_RTOL * min.abs().max(f64::MIN_POSITIVE))
        .map(|(i, _)| i)
        .collect();
    Ok(FrakM {
        components,
        min,
        minimizers,
    })
}

/// The point `Q` with `Σ_j a_ij Q_j = 8π n_L` for every `i`.
pub fn q_point(a: &CoefficientMatrix, n_l: f64) -> Result<RhoVector> {
    check_nl(n_l)?;
    let n = a.n();
    let rhs = DVector::from_element(n, 8.0 * PI * n_l);
    let q = a
        .matrix()
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("A is singular".into()))?;
    let residual = (a.matrix() * &q - &rhs).amax();
    if residual >= 1e-10 * rhs[0].max(1.0) {
        return Err(Error::LinearSolve(format!("residual {residual:e}")));
    }
    if q.iter().any(|v| *v < 0.0) {
        return Err(Error::Domain(format!(
            "Q has negative entries {:?}; ρ-space requires Q >= 0",
            q.as_slice()
        )));
    }
    RhoVector::new(q.iter().copied().collect())
}

/// Position of `ρ` relative to the critical hypersurfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    /// Number of critical hypersurfaces strictly below `ρ`: `ρ` lies between
    /// `Γ_L` and `Γ_{L+1}` (in `𝒪_{L+1}`), with `L = 0` meaning below `Γ_1`.
    pub surfaces_below: usize,
    /// `Some(L)` when `ρ` lies on `Γ_L` within the boundary band.
    pub on_surface: Option<usize>,
}

/// Locate `ρ` by comparing `Σ a_ij ρ_i ρ_j` with `8π n_L Σ ρ_i` for each
/// critical value `8π n_L` in `critical` (sorted ascending).
pub fn classify_region(rho: &RhoVector, a: &CoefficientMatrix, critical: &[f64]) -> Result<Region> {
    check_dims(rho, a)?;
    if critical.is_empty() {
        return Err(Error::invalid("sigma_values", "empty critical list"));
    }
    if critical.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sigma_values", "must be strictly increasing"));
    }
    let total: f64 = rho.values().iter().sum();
    if total == 0.0 {
        return Err(Error::UndefinedRegion);
    }
    let quad = a.bilinear(rho.values(), rho.values());
    let ratio = quad / total;
    let mut on_surface = None;
    let mut surfaces_below = 0;
    for (k, c) in critical.iter().enumerate() {
        if (ratio - c).abs() <= BOUNDARY_RTOL * c.abs() {
            on_surface = Some(k + 1);
        } else if *c < ratio {
            surfaces_below = k + 1;
        }
    }
    Ok(Region {
        surfaces_below,
        on_surface,
    })
}

/// `λ² + Bλ + C = 1 + E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightQuadratic {
    pub b: f64,
    pub c: f64,
    pub e: f64,
}

impl HeightQuadratic {
    pub fn discriminant(&self) -> f64 {
        self.b * self.b / 4.0 - (self.c - 1.0 - self.e)
    }
}

/// The root near 1 (the `+` branch).
pub fn solve_height_quadratic(q: HeightQuadratic) -> Result<f64> {
    let disc = q.discriminant();
    if !(disc >= 0.0) {
        return Err(Error::NoRealRoot { discriminant: disc });
    }
    Ok(-q.b / 2.0 + disc.sqrt())
}
