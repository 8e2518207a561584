//! Synthetic data generation: incident plane waves, the full convolution-
//! quadrature forward sweep (time traces at the observation circle), and the
//! multiplicative noise model.

use crate::bie::{
    assemble_system, eval_observation, solve_frequency, BieError, BoundaryNodes, NystromGrid,
};
use crate::cq::{self, CqError, CqGrid};
use crate::geometry::{GeometryError, ObservationCircle, Point, StarCurve};
use nalgebra::Vector2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quiet-frequency threshold: boundary data below this L² size is not solved.
pub const DEFAULT_SKIP_THRESHOLD: f64 = 1e-6;

/// Width of the C² taper closing the profile window.
const TAPER_WIDTH: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForwardError {
    #[error("invalid Lamé constants (need mu > 0 and lambda + mu > 0): lambda={lambda}, mu={mu}")]
    InvalidMedium { lambda: f64, mu: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    TimeGrid(#[from] CqError),
    #[error("frequency solve failed: {0}")]
    Solve(#[from] BieError),
    #[error("time traces are not real: imaginary residue {residue:e} of peak {peak:e}")]
    ImaginaryResidue { residue: f64, peak: f64 },
}

/// Homogeneous isotropic medium with unit mass density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMedium {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticMedium {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, ForwardError> {
        if !(mu > 0.0) || !(lambda + mu > 0.0) {
            return Err(ForwardError::InvalidMedium { lambda, mu });
        }
        Ok(ElasticMedium { lambda, mu })
    }

    /// Compressional speed c₁ = sqrt(λ + 2μ).
    pub fn c1(&self) -> f64 {
        (self.lambda + 2.0 * self.mu).sqrt()
    }

    /// Shear speed c₂ = sqrt(μ).
    pub fn c2(&self) -> f64 {
        self.mu.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    Compressional,
    Shear,
}

/// Causal plane wave: u(x,t) = dir·f(c·t + x·d - R₀) with d = (cos θ, sin θ),
/// dir = d for compressional waves and d⊥ for shear waves.
///
/// The profile is f(τ) = amplitude·sin³(3τ) on (0, window], zero elsewhere,
/// multiplied by a C² taper on [window-0.2, window] so that hard-windowing the
/// support does not introduce a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub kind: WaveKind,
    /// incident angle θ_inc in radians
    pub angle: f64,
    pub amplitude: f64,
    /// phase offset R₀
    pub offset: f64,
    /// support window T_w
    pub window: f64,
}

impl IncidentWave {
    pub fn compressional(angle: f64) -> Self {
        IncidentWave {
            kind: WaveKind::Compressional,
            angle,
            amplitude: 1.0,
            offset: 1.2,
            window: 5.0,
        }
    }

    pub fn direction(&self) -> Point {
        let (sin, cos) = self.angle.sin_cos();
        Point::new(cos, sin)
    }

    fn polarization(&self) -> Point {
        let d = self.direction();
        match self.kind {
            WaveKind::Compressional => d,
            WaveKind::Shear => Point::new(-d.y, d.x),
        }
    }

    pub fn speed(&self, medium: &ElasticMedium) -> f64 {
        match self.kind {
            WaveKind::Compressional => medium.c1(),
            WaveKind::Shear => medium.c2(),
        }
    }

    /// Windowed profile f(τ).
    pub fn profile(&self, tau: f64) -> f64 {
        if tau <= 0.0 || tau >= self.window {
            return 0.0;
        }
        let base = (3.0 * tau).sin().powi(3);
        let taper_start = self.window - TAPER_WIDTH;
        let taper = if tau <= taper_start {
            1.0
        } else {
            let u = (tau - taper_start) / TAPER_WIDTH;
            1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        };
        self.amplitude * base * taper
    }

    /// Incident displacement at point x and time t.
    pub fn eval(&self, medium: &ElasticMedium, x: Point, t: f64) -> Point {
        let tau = self.speed(medium) * t + x.dot(&self.direction()) - self.offset;
        self.polarization() * self.profile(tau)
    }
}

/// Everything that fixes one scattering experiment except the obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub medium: ElasticMedium,
    pub wave: IncidentWave,
    pub obs: ObservationCircle,
    pub t_final: f64,
    pub n_steps: usize,
    /// `None` selects the automatic contour radius.
    pub lambda_tilde: Option<f64>,
}

impl Scene {
    pub fn grid(&self) -> Result<CqGrid, CqError> {
        CqGrid::new(self.t_final, self.n_steps, self.lambda_tilde)
    }
}

/// Per-frequency boundary data ω₁,ₗ(η_j) = -2 n(η_j)·û_l, ω₂,ₗ(η_j) = -2 n⊥(η_j)·û_l,
/// where û_l is the scaled DFT of the incident trace at the node.
#[derive(Debug, Clone)]
pub struct BoundaryRhs {
    /// indexed [l][j]
    pub omega1: Vec<Vec<Complex64>>,
    pub omega2: Vec<Vec<Complex64>>,
}

pub fn boundary_rhs(
    nodes: &BoundaryNodes,
    wave: &IncidentWave,
    medium: &ElasticMedium,
    grid: &CqGrid,
) -> BoundaryRhs {
    let count = grid.num_freqs();
    let mut omega1 = vec![vec![Complex64::new(0.0, 0.0); nodes.len()]; count];
    let mut omega2 = vec![vec![Complex64::new(0.0, 0.0); nodes.len()]; count];
    let times = grid.times();
    for j in 0..nodes.len() {
        let mut ux = Vec::with_capacity(count);
        let mut uy = Vec::with_capacity(count);
        for &t in &times {
            let u = wave.eval(medium, nodes.point[j], t);
            ux.push(u.x);
            uy.push(u.y);
        }
        let ux_hat = cq::scaled_dft_real(&ux, grid.lambda_tilde());
        let uy_hat = cq::scaled_dft_real(&uy, grid.lambda_tilde());
        let n = nodes.normal[j];
        let tang = nodes.tangent[j];
        for l in 0..count {
            omega1[l][j] = -2.0 * (n.x * ux_hat[l] + n.y * uy_hat[l]);
            omega2[l][j] = -2.0 * (tang.x * ux_hat[l] + tang.y * uy_hat[l]);
        }
    }
    BoundaryRhs { omega1, omega2 }
}

/// Boundary data of a single frequency, evaluated by direct summation.
pub fn boundary_rhs_single(
    nodes: &BoundaryNodes,
    wave: &IncidentWave,
    medium: &ElasticMedium,
    grid: &CqGrid,
    l: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let times = grid.times();
    let mut omega1 = Vec::with_capacity(nodes.len());
    let mut omega2 = Vec::with_capacity(nodes.len());
    for j in 0..nodes.len() {
        let mut ux = Vec::with_capacity(times.len());
        let mut uy = Vec::with_capacity(times.len());
        for &t in &times {
            let u = wave.eval(medium, nodes.point[j], t);
            ux.push(u.x);
            uy.push(u.y);
        }
        let ux_hat = cq::scaled_dft_single(&ux, grid.lambda_tilde(), l);
        let uy_hat = cq::scaled_dft_single(&uy, grid.lambda_tilde(), l);
        let n = nodes.normal[j];
        let tang = nodes.tangent[j];
        omega1.push(-2.0 * (n.x * ux_hat + n.y * uy_hat));
        omega2.push(-2.0 * (tang.x * ux_hat + tang.y * uy_hat));
    }
    (omega1, omega2)
}

/// Weighted discrete L² norm of one frequency's boundary data,
/// ‖ω_l‖ = sqrt((π/ñ)·Σ_j (|ω₁|² + |ω₂|²)).
pub fn rhs_norm(omega1: &[Complex64], omega2: &[Complex64], grid: &NystromGrid) -> f64 {
    let sum: f64 = omega1
        .iter()
        .zip(omega2)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .sum();
    (grid.smooth_weight() * sum).sqrt()
}

/// Time-domain scattered-field samples at the observation points, with the
/// frequency-domain companion kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
    /// indexed [n][i]
    pub values: Vec<Vec<Vector2<f64>>>,
    /// indexed [l][i]
    pub vhat: Option<Vec<Vec<Vector2<Complex64>>>>,
}

impl TraceSet {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn num_points(&self) -> usize {
        self.angles.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0, f64::max)
    }

    /// Scaled DFT of the stored traces, indexed [l][i].
    pub fn frequency_data(&self, lambda_tilde: f64) -> Vec<Vec<Vector2<Complex64>>> {
        let count = self.num_times();
        let points = self.num_points();
        let mut out = vec![vec![Vector2::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); points]; count];
        for i in 0..points {
            let vx: Vec<f64> = self.values.iter().map(|row| row[i].x).collect();
            let vy: Vec<f64> = self.values.iter().map(|row| row[i].y).collect();
            let vx_hat = cq::scaled_dft_real(&vx, lambda_tilde);
            let vy_hat = cq::scaled_dft_real(&vy, lambda_tilde);
            for l in 0..count {
                out[l][i] = Vector2::new(vx_hat[l], vy_hat[l]);
            }
        }
        out
    }
}

/// Full forward pipeline: incident trace → per-frequency solves on the
/// conjugate-independent half of the contour → conjugate completion → inverse
/// scaled DFT into real time traces.
pub fn forward_solve(
    scene: &Scene,
    obstacle: &StarCurve,
    n_half: usize,
) -> Result<TraceSet, ForwardError> {
    forward_solve_with_threshold(scene, obstacle, n_half, DEFAULT_SKIP_THRESHOLD)
}

pub fn forward_solve_with_threshold(
    scene: &Scene,
    obstacle: &StarCurve,
    n_half: usize,
    skip_threshold: f64,
) -> Result<TraceSet, ForwardError> {
    scene.obs.check_encloses(obstacle)?;
    let grid = scene.grid()?;
    let nystrom = NystromGrid::new(n_half);
    let nodes = BoundaryNodes::new(obstacle, &nystrom);
    let rhs = boundary_rhs(&nodes, &scene.wave, &scene.medium, &grid);
    let (c1, c2) = (scene.medium.c1(), scene.medium.c2());
    let n_obs = scene.obs.num_points();
    let zero_field = vec![Vector2::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n_obs];

    let half: Vec<Vec<Vector2<Complex64>>> = (0..=grid.half_index())
        .into_par_iter()
        .map(|l| -> Result<Vec<Vector2<Complex64>>, ForwardError> {
            let omega1 = &rhs.omega1[l];
            let omega2 = &rhs.omega2[l];
            if rhs_norm(omega1, omega2, &nystrom) < skip_threshold {
                return Ok(zero_field.clone());
            }
            let mut sys = assemble_system(&nodes, &nystrom, grid.freq(l), c1, c2)?;
            sys.set_rhs(omega1, omega2)?;
            let densities = solve_frequency(&sys, l)?;
            Ok(eval_observation(
                &nodes,
                &nystrom,
                &scene.obs,
                grid.freq(l),
                c1,
                c2,
                &densities,
            )?)
        })
        .collect::<Result<_, _>>()?;

    let vhat = cq::realify(&half, grid.num_freqs());

    let mut values =
        vec![vec![Vector2::new(0.0, 0.0); n_obs]; grid.num_freqs()];
    let mut peak: f64 = 0.0;
    let mut residue: f64 = 0.0;
    for i in 0..n_obs {
        for comp in 0..2 {
            let seq: Vec<Complex64> = vhat.iter().map(|row| row[i][comp]).collect();
            let time_series = cq::inverse_scaled_dft(&seq, grid.lambda_tilde());
            for (n, v) in time_series.iter().enumerate() {
                values[n][i][comp] = v.re;
                peak = peak.max(v.re.abs());
                residue = residue.max(v.im.abs());
            }
        }
    }
    if peak > 0.0 && residue > 1e-6 * peak {
        return Err(ForwardError::ImaginaryResidue { residue, peak });
    }

    Ok(TraceSet {
        times: grid.times(),
        angles: (0..n_obs).map(|i| scene.obs.angle(i)).collect(),
        values,
        vhat: Some(vhat),
    })
}

/// Multiplicative noise v_δ = v·(1 + δΘ) with Θ a standard normal clipped to
/// [-1, 1], drawn from a seeded stream in fixed (time, point, component) order.
pub fn add_noise(traces: &TraceSet, delta: f64, seed: u64) -> TraceSet {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut noisy = traces.clone();
    noisy.vhat = None;
    for row in noisy.values.iter_mut() {
        for v in row.iter_mut() {
            for comp in 0..2 {
                let theta: f64 = StandardNormal.sample(&mut rng);
                let theta = theta.clamp(-1.0, 1.0);
                v[comp] *= 1.0 + delta * theta;
            }
        }
    }
    noisy
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn paper_medium() -> ElasticMedium {
        ElasticMedium::new(3.88, 2.56).unwrap()
    }

    fn small_scene(n_steps: usize, n_bar: usize) -> Scene {
        Scene {
            medium: paper_medium(),
            wave: IncidentWave::compressional(15.0 * PI / 16.0),
            obs: ObservationCircle::new(Point::zeros(), 2.0, n_bar).unwrap(),
            t_final: 10.0,
            n_steps,
            lambda_tilde: None,
        }
    }

    #[test]
    fn paper_wave_speeds_are_exact() {
        let m = paper_medium();
        assert_eq!(m.c1(), 3.0);
        assert_eq!(m.c2(), 1.6);
    }

    #[test]
    fn medium_admissibility() {
        assert!(ElasticMedium::new(1.0, 0.0).is_err());
        assert!(ElasticMedium::new(-2.0, 1.0).is_err());
        assert!(ElasticMedium::new(-0.5, 1.0).is_ok());
    }

    #[test]
    fn incident_peak_causality_and_window() {
        let m = paper_medium();
        let wave = IncidentWave::compressional(0.3);
        let d = wave.direction();

        // τ = π/6 hits the first profile peak, output = d
        let x = d * wave.offset;
        let t = PI / (6.0 * m.c1());
        let u = wave.eval(&m, x, t);
        assert_relative_eq!(u.x, d.x, max_relative = 1e-12);
        assert_relative_eq!(u.y, d.y, max_relative = 1e-12);

        // τ ≤ 0 and τ beyond the window give zero
        assert_eq!(wave.eval(&m, x, 0.0), Point::zeros());
        assert_eq!(wave.eval(&m, x, 6.0 / m.c1()), Point::zeros());
        assert_eq!(wave.profile(-0.1), 0.0);
        assert_eq!(wave.profile(6.0), 0.0);
    }

    #[test]
    fn taper_closes_the_window_continuously() {
        let wave = IncidentWave::compressional(0.0);
        assert_eq!(wave.profile(5.0), 0.0);
        assert_relative_eq!(
            wave.profile(4.8),
            (3.0f64 * 4.8).sin().powi(3),
            max_relative = 1e-12
        );
        // strictly between full profile and zero inside the taper
        let mid = wave.profile(4.9);
        let raw = (3.0f64 * 4.9).sin().powi(3);
        assert!(mid.abs() < raw.abs() && mid.abs() > 0.0);
        // no jump at either taper edge
        assert!((wave.profile(4.8 - 1e-9) - wave.profile(4.8 + 1e-9)).abs() < 1e-8);
        assert!(wave.profile(5.0 - 1e-9).abs() < 1e-8);
    }

    #[test]
    fn shear_wave_uses_perpendicular_polarization() {
        let m = paper_medium();
        let mut wave = IncidentWave::compressional(0.7);
        wave.kind = WaveKind::Shear;
        let d = wave.direction();
        let x = d * wave.offset;
        let t = PI / (6.0 * m.c2());
        let u = wave.eval(&m, x, t);
        assert_relative_eq!(u.x, -d.y, max_relative = 1e-12);
        assert_relative_eq!(u.y, d.x, max_relative = 1e-12);
    }

    #[test]
    fn zero_amplitude_gives_zero_rhs_and_traces() {
        let mut scene = small_scene(16, 3);
        scene.wave.amplitude = 0.0;
        let grid = scene.grid().unwrap();
        let nystrom = NystromGrid::new(8);
        let nodes = BoundaryNodes::new(&StarCurve::apple(), &nystrom);
        let rhs = boundary_rhs(&nodes, &scene.wave, &scene.medium, &grid);
        assert!(rhs
            .omega1
            .iter()
            .flatten()
            .chain(rhs.omega2.iter().flatten())
            .all(|v| v.norm() == 0.0));

        let traces = forward_solve(&scene, &StarCurve::apple(), 8).unwrap();
        assert_eq!(traces.max_abs(), 0.0);
    }

    #[test]
    fn single_frequency_rhs_matches_batch() {
        let scene = small_scene(24, 3);
        let grid = scene.grid().unwrap();
        let nystrom = NystromGrid::new(6);
        let nodes = BoundaryNodes::new(&StarCurve::apple(), &nystrom);
        let batch = boundary_rhs(&nodes, &scene.wave, &scene.medium, &grid);
        for l in [0usize, 5, 24] {
            let (o1, o2) = boundary_rhs_single(&nodes, &scene.wave, &scene.medium, &grid, l);
            for j in 0..nodes.len() {
                assert!((o1[j] - batch.omega1[l][j]).norm() < 1e-11);
                assert!((o2[j] - batch.omega2[l][j]).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn traces_scale_linearly_with_amplitude() {
        let scene = small_scene(32, 2);
        let base = forward_solve(&scene, &StarCurve::apple(), 10).unwrap();
        let mut scaled_scene = scene.clone();
        scaled_scene.wave.amplitude = 2.0;
        // halve the skip threshold so exactly the same frequencies are solved
        let scaled =
            forward_solve_with_threshold(&scaled_scene, &StarCurve::apple(), 10, 2.0 * DEFAULT_SKIP_THRESHOLD)
                .unwrap();
        let peak = base.max_abs();
        for (rb, rs) in base.values.iter().zip(&scaled.values) {
            for (vb, vs) in rb.iter().zip(rs) {
                assert!((vs - vb * 2.0).norm() <= 1e-9 * peak);
            }
        }
    }

    /// Earliest possible signal at an observation point: the incident front
    /// reaches the boundary at (R₀ - p·d)/c₁ and the fastest scattered wave
    /// travels onward at c₁.
    fn first_arrival(curve: &StarCurve, obs_point: Point, wave: &IncidentWave, c1: f64) -> f64 {
        let d = wave.direction();
        curve
            .sample(256)
            .iter()
            .map(|p| (wave.offset - p.dot(&d)) / c1 + (obs_point - p).norm() / c1)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn traces_vanish_before_first_arrival() {
        let scene = small_scene(128, 4);
        let apple = StarCurve::apple();
        let traces = forward_solve(&scene, &apple, 16).unwrap();
        let peak = traces.max_abs();
        assert!(peak > 1e-4, "forward run produced no signal");
        for i in 0..traces.num_points() {
            let arrival = first_arrival(&apple, scene.obs.point(i), &scene.wave, scene.medium.c1());
            for (n, &t) in traces.times.iter().enumerate() {
                if t < arrival - 0.3 {
                    let v = traces.values[n][i];
                    assert!(
                        v.norm() <= 1e-2 * peak,
                        "precursor at t={t}, arrival={arrival}, point {i}: {v:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn forward_traces_self_converge_at_second_order() {
        let apple = StarCurve::apple();
        let run = |n_steps: usize| {
            let scene = small_scene(n_steps, 2);
            forward_solve(&scene, &apple, 12).unwrap()
        };
        let coarse = run(32);
        let mid = run(64);
        let fine = run(128);

        // compare on the coarse time grid (indices scale with refinement)
        let diff = |a: &TraceSet, b: &TraceSet, step: usize| -> f64 {
            let mut err: f64 = 0.0;
            for n in 0..a.num_times() {
                for i in 0..a.num_points() {
                    err = err.max((a.values[n][i] - b.values[n * step][i]).norm());
                }
            }
            err
        };
        let e_coarse = diff(&coarse, &mid, 2);
        let e_mid = diff(&mid, &fine, 2);
        let ratio = e_coarse / e_mid;
        assert!(
            ratio > 4.0 / 1.5 && ratio < 4.0 * 1.5,
            "self-convergence ratio {ratio} (errors {e_coarse:e}, {e_mid:e})"
        );
    }

    #[test]
    fn noise_model_properties() {
        let scene = small_scene(32, 2);
        let traces = forward_solve(&scene, &StarCurve::apple(), 8).unwrap();

        let clean = add_noise(&traces, 0.0, 42);
        assert_eq!(clean.values, traces.values);

        let a = add_noise(&traces, 0.01, 7);
        let b = add_noise(&traces, 0.01, 7);
        assert_eq!(a.values, b.values);
        let c = add_noise(&traces, 0.01, 8);
        assert_ne!(a.values, c.values);

        // multiplicative, clipped: |v_δ/v - 1| ≤ δ
        let mut max_ratio: f64 = 0.0;
        for (row_n, row_c) in traces.values.iter().zip(&a.values) {
            for (v, vn) in row_n.iter().zip(row_c) {
                for comp in 0..2 {
                    if v[comp].abs() > 1e-12 {
                        max_ratio = max_ratio.max((vn[comp] / v[comp] - 1.0).abs());
                    }
                }
            }
        }
        assert!(max_ratio <= 0.01 + 1e-12, "ratio {max_ratio}");
        assert!(max_ratio > 1e-4, "noise appears inactive");
    }
}
