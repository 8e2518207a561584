//! Boundary reconstruction from time-domain scattered traces: per-frequency
//! residuals, shape-derivative matrix assembly, Tikhonov-regularized scaled
//! Newton updates in the trigonometric shape basis, and the frequency-sweeping
//! outer iteration.
//!
//! One outer step at counter `ll` works on the contour frequency l = ⌊ll/loop⌋:
//! solve the field equations on the current curve, measure the relative data
//! residual E, and if it is still above tolerance move the boundary by the
//! regularized least-squares update ξ = ρ·(λ₀Ĩ + Re(B*B))⁻¹ Re(B*ω̃) with the
//! densities held fixed.

use crate::bie::{
    assemble_system, eval_observation, solve_frequency, BieError, BoundaryNodes, DensityPair,
    NystromGrid,
};
use crate::forward::{boundary_rhs_single, rhs_norm, ElasticMedium, Scene, TraceSet};
use crate::geometry::{CurveJson, GeometryError, ObservationCircle, Point, RadialFunction, StarCurve};
use crate::specfun::{self, SpecFunError};
use nalgebra::{Cholesky, DMatrix, DVector, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Smallest admissible regularization weight; keeps the normal equations SPD
/// when the residual norm vanishes.
const LAMBDA0_FLOOR: f64 = 1e-12;

/// Step halvings attempted before an update is dropped entirely.
const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverseError {
    #[error("frequency {l} carries no data (‖v̂‖ = 0); caller must skip it")]
    ZeroData { l: usize },
    #[error(transparent)]
    Solver(#[from] BieError),
    #[error(transparent)]
    Kernel(#[from] SpecFunError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("normal equations not positive definite (lambda0 = {lambda0})")]
    NotPositiveDefinite { lambda0: f64 },
    #[error("time grid: {0}")]
    TimeGrid(#[from] crate::cq::CqError),
    #[error("mismatched lengths: {0}")]
    Shape(String),
}

/// Real update vector ξ = (Δp₁, Δp₂, α₀..α_M, β₁..β_M) encoding the boundary
/// perturbation q(η) = Δp + Δr(η)(cos η, sin η).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeUpdate {
    pub dp: Point,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ShapeUpdate {
    pub fn zeros(degree: usize) -> Self {
        ShapeUpdate {
            dp: Point::zeros(),
            alpha: vec![0.0; degree + 1],
            beta: vec![0.0; degree],
        }
    }

    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn len(&self) -> usize {
        2 * self.degree() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn from_vector(xi: &DVector<f64>) -> Result<Self, InverseError> {
        if xi.len() < 3 || xi.len() % 2 == 0 {
            return Err(InverseError::Shape(format!(
                "update vector length {} is not 2M+3",
                xi.len()
            )));
        }
        let degree = (xi.len() - 3) / 2;
        Ok(ShapeUpdate {
            dp: Point::new(xi[0], xi[1]),
            alpha: xi.as_slice()[2..3 + degree].to_vec(),
            beta: xi.as_slice()[3 + degree..].to_vec(),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.push(self.dp.x);
        out.push(self.dp.y);
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.beta);
        DVector::from_vec(out)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ShapeUpdate {
            dp: self.dp * factor,
            alpha: self.alpha.iter().map(|a| a * factor).collect(),
            beta: self.beta.iter().map(|b| b * factor).collect(),
        }
    }

    /// Radial increment Δr(η).
    pub fn delta_r(&self, eta: f64) -> f64 {
        let mut dr = 0.0;
        for (m, a) in self.alpha.iter().enumerate() {
            dr += a * (m as f64 * eta).cos();
        }
        for (i, b) in self.beta.iter().enumerate() {
            dr += b * ((i + 1) as f64 * eta).sin();
        }
        dr
    }

    /// Boundary perturbation q(η) = Δp + Δr(η)(cos η, sin η).
    pub fn q(&self, eta: f64) -> Point {
        let (sin, cos) = eta.sin_cos();
        self.dp + self.delta_r(eta) * Point::new(cos, sin)
    }
}

/// Diagonal of the H¹ penalty Ĩ = diag(1, 1, 2π, π(1+1²), …, π(1+M²), π(1+1²), …, π(1+M²)).
pub fn penalty_matrix(degree: usize) -> DVector<f64> {
    let mut diag = Vec::with_capacity(2 * degree + 3);
    diag.push(1.0);
    diag.push(1.0);
    diag.push(2.0 * PI);
    for m in 1..=degree {
        diag.push(PI * (1.0 + (m * m) as f64));
    }
    for m in 1..=degree {
        diag.push(PI * (1.0 + (m * m) as f64));
    }
    DVector::from_vec(diag)
}

/// Data minus model at every observation point.
pub fn residual(
    data: &[Vector2<Complex64>],
    model: &[Vector2<Complex64>],
) -> Vec<Vector2<Complex64>> {
    data.iter().zip(model).map(|(d, m)| d - m).collect()
}

fn stacked_norm(values: &[Vector2<Complex64>]) -> f64 {
    values
        .iter()
        .map(|v| v.x.norm_sqr() + v.y.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Relative error estimator E = ‖residual‖ / ‖v̂‖ (discrete L², uniform weight).
pub fn stopping_error(
    residual: &[Vector2<Complex64>],
    data: &[Vector2<Complex64>],
) -> Result<f64, InverseError> {
    let denom = stacked_norm(data);
    if denom == 0.0 {
        return Err(InverseError::ZeroData { l: usize::MAX });
    }
    Ok(stacked_norm(residual) / denom)
}

/// Regularization weight: the residual norm, floored to keep the system SPD.
pub fn choose_lambda0(residual: &[Vector2<Complex64>]) -> f64 {
    stacked_norm(residual).max(LAMBDA0_FLOOR)
}

/// Column of the shape-derivative system the entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateBasis {
    /// Δp₁
    CenterX,
    /// Δp₂
    CenterY,
    /// α_m, radial cos(mη) mode
    RadialCos(usize),
    /// β_m, radial sin(mη) mode
    RadialSin(usize),
}

impl UpdateBasis {
    fn q(&self, eta: f64) -> Point {
        let (sin, cos) = eta.sin_cos();
        match *self {
            UpdateBasis::CenterX => Point::new(1.0, 0.0),
            UpdateBasis::CenterY => Point::new(0.0, 1.0),
            UpdateBasis::RadialCos(m) => (m as f64 * eta).cos() * Point::new(cos, sin),
            UpdateBasis::RadialSin(m) => (m as f64 * eta).sin() * Point::new(cos, sin),
        }
    }

    fn columns(degree: usize) -> Vec<UpdateBasis> {
        let mut cols = vec![UpdateBasis::CenterX, UpdateBasis::CenterY];
        cols.extend((0..=degree).map(UpdateBasis::RadialCos));
        cols.extend((1..=degree).map(UpdateBasis::RadialSin));
        cols
    }
}

/// Frequency-dependent scalars shared by every column of the derivative
/// kernels at one (observation, boundary) point pair:
///
/// ```text
/// A(c) = -i s²/(4c²)·H₀⁽¹⁾(i s ρ/c)/ρ² + s/(2c)·H₁⁽¹⁾(i s ρ/c)/ρ³,
/// G(c) =  s/(4c)·H₁⁽¹⁾(i s ρ/c)/ρ.
/// ```
struct PairTerms {
    a1: Complex64,
    g1: Complex64,
    a2: Complex64,
    g2: Complex64,
    w: Point,
}

fn pair_terms(
    x: Point,
    p: Point,
    s: Complex64,
    medium: &ElasticMedium,
) -> Result<PairTerms, SpecFunError> {
    let w = x - p;
    let rho = w.norm();
    let i = Complex64::new(0.0, 1.0);
    let mut ag = [Complex64::new(0.0, 0.0); 4];
    for (slot, c) in [medium.c1(), medium.c2()].iter().enumerate() {
        let z = s * rho / c;
        let h0 = specfun::hankel1_0_rotated(z)?;
        let h1 = specfun::hankel1_1_rotated(z)?;
        ag[2 * slot] = -i * s * s / (4.0 * c * c) * h0 / (rho * rho)
            + s / (2.0 * c) * h1 / (rho * rho * rho);
        ag[2 * slot + 1] = s / (4.0 * c) * h1 / rho;
    }
    Ok(PairTerms {
        a1: ag[0],
        g1: ag[1],
        a2: ag[2],
        g2: ag[3],
        w,
    })
}

/// Derivative integrand for direction q with densities already multiplied in:
/// [A(c₁)(w·q)w - G(c₁)q]φ₁ + [A(c₂)(w·q)w⊥ + G(c₂)(-q₂, q₁)]φ₂.
fn pair_contribution(
    terms: &PairTerms,
    q: Point,
    phi1: Complex64,
    phi2: Complex64,
) -> Vector2<Complex64> {
    let w = terms.w;
    let wq = w.dot(&q);
    let a1 = terms.a1 * phi1;
    let g1 = terms.g1 * phi1;
    let a2 = terms.a2 * phi2;
    let g2 = terms.g2 * phi2;
    Vector2::new(
        a1 * (wq * w.x) - g1 * q.x + a2 * (wq * w.y) - g2 * q.y,
        a1 * (wq * w.y) - g1 * q.y - a2 * (wq * w.x) + g2 * q.x,
    )
}

/// Shape-derivative integrand (one point pair, one basis column).
#[allow(clippy::too_many_arguments)]
pub fn frechet_row(
    basis: UpdateBasis,
    curve: &StarCurve,
    obs: &ObservationCircle,
    varsigma: f64,
    eta: f64,
    s: Complex64,
    medium: &ElasticMedium,
    phi1: Complex64,
    phi2: Complex64,
) -> Result<Vector2<Complex64>, InverseError> {
    let (sin, cos) = varsigma.sin_cos();
    let x = obs.center + obs.radius * Point::new(cos, sin);
    let p = curve.eval(eta).point;
    let terms = pair_terms(x, p, s, medium)?;
    Ok(pair_contribution(&terms, basis.q(eta), phi1, phi2))
}

/// Dense (4n̄)×(2M+3) derivative matrix: column order (Δp₁, Δp₂, α₀..α_M,
/// β₁..β_M); rows interleave the two field components per observation point;
/// entries are trapezoidal sums (π/ñ)Σ_j of the derivative integrand.
pub fn build_b(
    nodes: &BoundaryNodes,
    grid: &NystromGrid,
    obs: &ObservationCircle,
    s: Complex64,
    medium: &ElasticMedium,
    densities: &DensityPair,
    degree: usize,
) -> Result<DMatrix<Complex64>, InverseError> {
    let columns = UpdateBasis::columns(degree);
    let trapz = grid.smooth_weight();
    let mut b = DMatrix::from_element(
        2 * obs.num_points(),
        columns.len(),
        Complex64::new(0.0, 0.0),
    );
    for i in 0..obs.num_points() {
        let x = obs.point(i);
        for j in 0..nodes.len() {
            let terms = pair_terms(x, nodes.point[j], s, medium)?;
            let eta = nodes.theta[j];
            for (col, basis) in columns.iter().enumerate() {
                let v = pair_contribution(&terms, basis.q(eta), densities.phi1[j], densities.phi2[j]);
                b[(2 * i, col)] += trapz * v.x;
                b[(2 * i + 1, col)] += trapz * v.y;
            }
        }
    }
    Ok(b)
}

fn stack(values: &[Vector2<Complex64>]) -> DVector<Complex64> {
    let mut out = Vec::with_capacity(2 * values.len());
    for v in values {
        out.push(v.x);
        out.push(v.y);
    }
    DVector::from_vec(out)
}

/// Solves (λ₀Ĩ + Re(B*B))ξ = Re(B*ω̃) by Cholesky and scales the update by ρ.
pub fn tikhonov_step(
    b: &DMatrix<Complex64>,
    residual: &[Vector2<Complex64>],
    lambda0: f64,
    penalty: &DVector<f64>,
    rho: f64,
) -> Result<ShapeUpdate, InverseError> {
    let cols = b.ncols();
    if penalty.len() != cols {
        return Err(InverseError::Shape(format!(
            "penalty length {} vs {} columns",
            penalty.len(),
            cols
        )));
    }
    let omega = stack(residual);
    let normal_c = b.adjoint() * b;
    let mut normal = DMatrix::from_fn(cols, cols, |r, c| normal_c[(r, c)].re);
    for k in 0..cols {
        normal[(k, k)] += lambda0 * penalty[k];
    }
    let rhs_c = b.adjoint() * omega;
    let rhs = DVector::from_fn(cols, |r, _| rhs_c[r].re);
    let chol = Cholesky::new(normal).ok_or(InverseError::NotPositiveDefinite { lambda0 })?;
    let xi = chol.solve(&rhs);
    Ok(ShapeUpdate::from_vector(&xi)?.scaled(rho))
}

/// Outcome status of a reconstruction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconStatus {
    /// stopped with E below tolerance
    Success,
    /// ran out of frequencies or iterations
    Exhausted,
}

/// One record per outer iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub ll: usize,
    pub l: usize,
    pub s_l: [f64; 2],
    #[serde(rename = "E")]
    pub error: Option<f64>,
    pub lambda0: Option<f64>,
    pub xi_norm: f64,
    pub skipped: bool,
    pub halvings: u32,
    pub curve: CurveJson,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub history: Vec<IterationRecord>,
    pub final_curve: StarCurve,
    pub status: ReconStatus,
    pub final_error: Option<f64>,
}

/// Reconstruction parameters. `epsilon` is the stopping tolerance on E;
/// `epsilon_tilde` the quiet-frequency threshold on ‖ω_l‖.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseConfig {
    pub n_half: usize,
    pub degree: usize,
    pub rho: f64,
    pub loop_per_freq: usize,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    pub max_ll: usize,
    pub initial_center: Point,
    pub initial_r0: f64,
    /// reject updates that push min r(θ) below this floor
    pub min_radius_floor: f64,
}

impl InverseConfig {
    /// Paper-style defaults for a given noise level and time grid.
    pub fn with_defaults(delta: f64, n_steps: usize) -> Self {
        InverseConfig {
            n_half: 32,
            degree: 3,
            rho: 0.9,
            loop_per_freq: 4,
            epsilon: (2.0 * delta).max(1e-3),
            epsilon_tilde: 1e-6,
            max_ll: (n_steps + 1) * 4,
            initial_center: Point::new(-1.35, -0.35),
            initial_r0: 0.4,
            min_radius_floor: 0.05,
        }
    }
}

/// Frequency-sweeping Newton iteration on the scaled-DFT data of `traces`.
pub fn reconstruct(
    scene: &Scene,
    traces: &TraceSet,
    cfg: &InverseConfig,
) -> Result<ReconstructionResult, InverseError> {
    let grid = scene.grid()?;
    let nystrom = NystromGrid::new(cfg.n_half);
    let medium = scene.medium;
    let (c1, c2) = (medium.c1(), medium.c2());
    let vhat_data = traces.frequency_data(grid.lambda_tilde());

    let mut curve = StarCurve::new(
        cfg.initial_center,
        RadialFunction::circle_as_trig(cfg.initial_r0, cfg.degree),
    )?;
    let penalty = penalty_matrix(cfg.degree);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut ll = 0usize;

    while ll < cfg.max_ll {
        let l = ll / cfg.loop_per_freq;
        if l >= grid.num_freqs() {
            break;
        }
        let s_l = grid.freq(l);
        let nodes = BoundaryNodes::new(&curve, &nystrom);
        let (omega1, omega2) = boundary_rhs_single(&nodes, &scene.wave, &medium, &grid, l);

        let quiet = rhs_norm(&omega1, &omega2, &nystrom) < cfg.epsilon_tilde
            || stacked_norm(&vhat_data[l]) == 0.0;
        if quiet {
            history.push(IterationRecord {
                ll,
                l,
                s_l: [s_l.re, s_l.im],
                error: None,
                lambda0: None,
                xi_norm: 0.0,
                skipped: true,
                halvings: 0,
                curve: CurveJson::from(&curve),
            });
            ll += 1;
            continue;
        }

        let mut sys = assemble_system(&nodes, &nystrom, s_l, c1, c2)?;
        sys.set_rhs(&omega1, &omega2)?;
        let densities = solve_frequency(&sys, l)?;
        let model = eval_observation(&nodes, &nystrom, &scene.obs, s_l, c1, c2, &densities)?;
        let res = residual(&vhat_data[l], &model);
        let e = stopping_error(&res, &vhat_data[l]).map_err(|_| InverseError::ZeroData { l })?;

        if e < cfg.epsilon {
            history.push(IterationRecord {
                ll,
                l,
                s_l: [s_l.re, s_l.im],
                error: Some(e),
                lambda0: None,
                xi_norm: 0.0,
                skipped: false,
                halvings: 0,
                curve: CurveJson::from(&curve),
            });
            return Ok(ReconstructionResult {
                history,
                final_curve: curve,
                status: ReconStatus::Success,
                final_error: Some(e),
            });
        }

        let b = build_b(&nodes, &nystrom, &scene.obs, s_l, &medium, &densities, cfg.degree)?;
        let lambda0 = choose_lambda0(&res);
        let update = tikhonov_step(&b, &res, lambda0, &penalty, cfg.rho)?;

        // reject updates that break star-shapedness; halve until they fit
        let mut applied_norm = 0.0;
        let mut halvings = 0u32;
        let mut factor = 1.0f64;
        while halvings <= MAX_HALVINGS {
            let step = update.scaled(factor);
            let candidate = curve.with_trig_update(step.dp, &step.alpha, &step.beta);
            match candidate {
                Ok(next) if next.min_radius(256).0 >= cfg.min_radius_floor => {
                    applied_norm = update.norm() * factor;
                    curve = next;
                    break;
                }
                _ => {
                    factor /= 2.0;
                    halvings += 1;
                }
            }
        }

        history.push(IterationRecord {
            ll,
            l,
            s_l: [s_l.re, s_l.im],
            error: Some(e),
            lambda0: Some(lambda0),
            xi_norm: applied_norm,
            skipped: false,
            halvings,
            curve: CurveJson::from(&curve),
        });
        ll += 1;
    }

    let final_error = history.iter().rev().find_map(|r| r.error);
    Ok(ReconstructionResult {
        history,
        final_curve: curve,
        status: ReconStatus::Exhausted,
        final_error,
    })
}
