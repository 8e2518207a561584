//! BDF2 convolution-quadrature machinery: the contour frequencies, the scaled
//! discrete Fourier transform pair, and the conjugate-symmetry completion for
//! real data.
//!
//! Time convolutions are never materialized as weight matrices. The pipeline
//! transforms boundary data with [`scaled_dft`], solves one frequency-domain
//! problem per contour frequency s_l, and applies [`inverse_scaled_dft`]; this
//! is the same algebra as the trapezoidal contour weights with O(N) memory.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use thiserror::Error;

/// Accuracy target balanced by the automatic contour-radius policy.
const EPS_ACC: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CqError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// γ(ζ) = (ζ² - 4ζ + 3)/2, the BDF2 generating function.
pub fn bdf2_gamma(zeta: Complex64) -> Complex64 {
    (zeta * zeta - 4.0 * zeta + Complex64::new(3.0, 0.0)) / 2.0
}

/// Contour radius of the automatic policy, λ̃ = ε_acc^(1/(2(N+1))).
pub fn auto_lambda(n_steps: usize) -> f64 {
    EPS_ACC.powf(1.0 / (2.0 * (n_steps as f64 + 1.0)))
}

/// Time grid t_n = nΔt (n = 0..N), contour radius λ̃, and the N+1 contour
/// frequencies s_k = γ(λ̃ ζ^(-k))/Δt with ζ = e^(2πi/(N+1)).
#[derive(Debug, Clone, PartialEq)]
pub struct CqGrid {
    n_steps: usize,
    t_final: f64,
    dt: f64,
    lambda_tilde: f64,
    freqs: Vec<Complex64>,
}

impl CqGrid {
    /// `lambda_tilde = None` selects the automatic radius policy.
    pub fn new(t_final: f64, n_steps: usize, lambda_tilde: Option<f64>) -> Result<Self, CqError> {
        if !(t_final > 0.0) {
            return Err(CqError::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if n_steps < 1 {
            return Err(CqError::InvalidParameter(
                "need at least one time step".into(),
            ));
        }
        let lambda = match lambda_tilde {
            Some(l) if l > 0.0 && l < 1.0 => l,
            Some(l) => {
                return Err(CqError::InvalidParameter(format!(
                    "contour radius must lie in (0,1), got {l}"
                )))
            }
            None => auto_lambda(n_steps),
        };
        let dt = t_final / n_steps as f64;
        let count = n_steps + 1;
        let freqs = (0..count)
            .map(|k| {
                let zeta_mk = Complex64::from_polar(lambda, -2.0 * PI * k as f64 / count as f64);
                bdf2_gamma(zeta_mk) / dt
            })
            .collect();
        Ok(CqGrid {
            n_steps,
            t_final,
            dt,
            lambda_tilde: lambda,
            freqs,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn num_freqs(&self) -> usize {
        self.n_steps + 1
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_tilde
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt * n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.num_freqs()).map(|n| self.time(n)).collect()
    }

    pub fn freq(&self, l: usize) -> Complex64 {
        self.freqs[l]
    }

    pub fn freqs(&self) -> &[Complex64] {
        &self.freqs
    }

    /// Largest index of the conjugate-independent half: ⌊(N+1)/2⌋.
    pub fn half_index(&self) -> usize {
        self.num_freqs() / 2
    }
}

fn fft(values: &mut [Complex64], forward: bool) {
    let mut planner = FftPlanner::new();
    let plan = if forward {
        planner.plan_fft_forward(values.len())
    } else {
        planner.plan_fft_inverse(values.len())
    };
    plan.process(values);
}

/// x̂_l = Σ_n λ̃ⁿ x_n ζ^(-ln).
pub fn scaled_dft(x: &[Complex64], lambda_tilde: f64) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(n, v)| v * lambda_tilde.powi(n as i32))
        .collect();
    if buf.len() > 1 {
        fft(&mut buf, true);
    }
    buf
}

pub fn scaled_dft_real(x: &[f64], lambda_tilde: f64) -> Vec<Complex64> {
    let as_complex: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    scaled_dft(&as_complex, lambda_tilde)
}

/// Single coefficient of the scaled transform, evaluated as a direct sum.
pub fn scaled_dft_single(x: &[f64], lambda_tilde: f64, l: usize) -> Complex64 {
    let count = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 1.0;
    for (n, &v) in x.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -2.0 * PI * (l * n % count) as f64 / count as f64);
        acc += scale * v * phase;
        scale *= lambda_tilde;
    }
    acc
}

/// x_n = λ̃^(-n)/(N+1) Σ_l x̂_l ζ^(nl); exact algebraic inverse of [`scaled_dft`].
pub fn inverse_scaled_dft(xhat: &[Complex64], lambda_tilde: f64) -> Vec<Complex64> {
    let count = xhat.len();
    let mut buf = xhat.to_vec();
    if count > 1 {
        fft(&mut buf, false);
    }
    for (n, v) in buf.iter_mut().enumerate() {
        *v *= lambda_tilde.powi(-(n as i32)) / count as f64;
    }
    buf
}

/// Frequency-domain values that complete to a conjugate-symmetric sequence.
pub trait Conjugable: Clone {
    fn conjugated(&self) -> Self;
}

impl Conjugable for Complex64 {
    fn conjugated(&self) -> Self {
        self.conj()
    }
}

impl Conjugable for nalgebra::Vector2<Complex64> {
    fn conjugated(&self) -> Self {
        nalgebra::Vector2::new(self.x.conj(), self.y.conj())
    }
}

impl<T: Conjugable> Conjugable for Vec<T> {
    fn conjugated(&self) -> Self {
        self.iter().map(Conjugable::conjugated).collect()
    }
}

/// Completes frequency data given on l = 0..⌊(N+1)/2⌋ to all N+1 frequencies
/// using x̂_(N+1-l) = conj(x̂_l), valid for real time-domain data on a real
/// contour radius.
pub fn realify<T: Conjugable>(half: &[T], total: usize) -> Vec<T> {
    assert_eq!(
        half.len(),
        total / 2 + 1,
        "need frequencies 0..=floor(total/2)"
    );
    let mut full = Vec::with_capacity(total);
    full.extend(half.iter().cloned());
    for l in (total / 2 + 1)..total {
        full.push(half[total - l].conjugated());
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gamma_values() {
        assert_eq!(bdf2_gamma(c(1.0, 0.0)), c(0.0, 0.0));
        assert_eq!(bdf2_gamma(c(0.0, 0.0)), c(1.5, 0.0));
        assert_eq!(bdf2_gamma(c(-1.0, 0.0)), c(4.0, 0.0));
    }

    #[test]
    fn single_step_grid() {
        let g = CqGrid::new(10.0, 1, Some(0.5)).unwrap();
        assert_relative_eq!(g.freq(0).re, 0.0625, max_relative = 1e-15);
        assert_relative_eq!(g.freq(0).im, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn grid_invariants_at_n99() {
        let g = CqGrid::new(10.0, 99, None).unwrap();
        for l in 0..g.num_freqs() {
            assert!(g.freq(l).re > 0.0, "Re s_{l} not positive");
        }
        for l in 1..=99 {
            let a = g.freq(100 - l);
            let b = g.freq(l).conj();
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn invalid_grid_parameters() {
        assert!(CqGrid::new(0.0, 8, None).is_err());
        assert!(CqGrid::new(1.0, 0, None).is_err());
        assert!(CqGrid::new(1.0, 8, Some(1.0)).is_err());
        assert!(CqGrid::new(1.0, 8, Some(-0.1)).is_err());
    }

    #[test]
    fn dft_delta_and_length_one() {
        let mut x = vec![c(0.0, 0.0); 8];
        x[0] = c(1.0, 0.0);
        let xh = scaled_dft(&x, 0.9);
        for v in &xh {
            assert!((v - c(1.0, 0.0)).norm() < 1e-14);
        }
        // single-term sum
        let xh = scaled_dft(&[c(2.5, -1.0)], 0.7);
        assert_eq!(xh, vec![c(2.5, -1.0)]);
    }

    #[test]
    fn dft_of_real_input_is_conjugate_symmetric() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xh = scaled_dft_real(&x, 0.95);
        for l in 1..32 {
            let a = xh[32 - l];
            let b = xh[l].conj();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_at_n127() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let lambda = auto_lambda(127);
        let x: Vec<Complex64> = (0..128)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let back = inverse_scaled_dft(&scaled_dft(&x, lambda), lambda);
        let max_x = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() <= 1e-8 * max_x);
        }
    }

    #[test]
    fn inverse_of_constant_matches_direct_sum() {
        let lambda = 0.9;
        let count = 9;
        let xh = vec![c(0.3, 0.7); count];
        let got = inverse_scaled_dft(&xh, lambda);
        for n in 0..count {
            let mut direct = c(0.0, 0.0);
            for (l, v) in xh.iter().enumerate() {
                direct += v * Complex64::from_polar(1.0, 2.0 * PI * (n * l) as f64 / count as f64);
            }
            direct *= lambda.powi(-(n as i32)) / count as f64;
            assert!((got[n] - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
        // zeros map to zeros
        let zeros = inverse_scaled_dft(&vec![c(0.0, 0.0); 5], lambda);
        assert!(zeros.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn scaled_dft_single_matches_full_transform() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..37).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lambda = 0.93;
        let full = scaled_dft_real(&x, lambda);
        for l in [0usize, 1, 17, 36] {
            let single = scaled_dft_single(&x, lambda, l);
            assert!((single - full[l]).norm() < 1e-11);
        }
    }

    #[test]
    fn realify_edges_and_roundtrip() {
        // N = 3 (4 freqs): l=3 is conj of l=1
        let half = vec![c(1.0, 0.0), c(0.5, 0.25), c(-0.5, 0.0)];
        let full = realify(&half, 4);
        assert_eq!(full[3], c(0.5, -0.25));

        // N = 1 (2 freqs): half already covers everything
        let half = vec![c(1.0, 0.0), c(2.0, 0.0)];
        assert_eq!(realify(&half, 2), half);

        // data from a real signal reproduces the signal
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let n_total = 21;
        let lambda = auto_lambda(n_total - 1);
        let x: Vec<f64> = (0..n_total).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xh = scaled_dft_real(&x, lambda);
        let completed = realify(&xh[..=n_total / 2], n_total);
        let back = inverse_scaled_dft(&completed, lambda);
        for (orig, b) in x.iter().zip(&back) {
            assert!((b.re - orig).abs() < 1e-10);
            assert!(b.im.abs() < 1e-10);
        }
    }

    #[test]
    fn conditioning_guard_under_auto_policy() {
        for n in [1usize, 2, 3, 5, 16, 100, 333, 512, 1024] {
            let lambda = auto_lambda(n);
            assert!(lambda.powi(-(n as i32)) * f64::EPSILON < 1e-6, "N={n}");
        }
    }

    /// Convolution weights of Eq-style trapezoidal contour quadrature:
    /// ω_l = λ̃^(-l)/(N+1) Σ_k W(s_k) ζ^(lk). Test-side oracle for the order check.
    fn cq_weights(grid: &CqGrid, w: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        let count = grid.num_freqs();
        let lambda = grid.lambda_tilde();
        (0..count)
            .map(|l| {
                let mut acc = c(0.0, 0.0);
                for k in 0..count {
                    let phase =
                        Complex64::from_polar(1.0, 2.0 * PI * ((l * k) % count) as f64 / count as f64);
                    acc += w(grid.freq(k)) * phase;
                }
                acc * lambda.powi(-(l as i32)) / count as f64
            })
            .collect()
    }

    #[test]
    fn bdf2_cq_is_second_order_on_running_integral() {
        // W(s) = 1/s applied to g(t) = t on [0,1]; exact value at t=1 is 0.5
        let mut errors = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let grid = CqGrid::new(1.0, n, None).unwrap();
            let weights = cq_weights(&grid, |s| 1.0 / s);
            let g: Vec<f64> = grid.times();
            let mut y_end = c(0.0, 0.0);
            for l in 0..=n {
                y_end += weights[n - l] * g[l];
            }
            errors.push((y_end.re - 0.5).abs());
            assert!(y_end.im.abs() < 1e-9);

            // the DFT path is the same algebra
            let ghat = scaled_dft_real(&g, grid.lambda_tilde());
            let yhat: Vec<Complex64> = ghat
                .iter()
                .zip(grid.freqs())
                .map(|(gh, s)| gh / s)
                .collect();
            let y = inverse_scaled_dft(&yhat, grid.lambda_tilde());
            assert!((y[n] - y_end).norm() < 1e-8);
        }
        for pair in errors.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "observed order {order}, errors {errors:?}");
        }
    }

    proptest! {
        #[test]
        fn transform_linearity(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(2usize..40);
            let lambda = 0.9;
            let x: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let y: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let a = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo: Vec<Complex64> = x.iter().zip(&y).map(|(xv, yv)| a * xv + b * yv).collect();
            let lhs = scaled_dft(&combo, lambda);
            let xh = scaled_dft(&x, lambda);
            let yh = scaled_dft(&y, lambda);
            for l in 0..n {
                let rhs = a * xh[l] + b * yh[l];
                prop_assert!((lhs[l] - rhs).norm() < 1e-11);
            }
        }
    }
}
