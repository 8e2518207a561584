//! Star-shaped boundary curves, the observation circle, and pointwise curve
//! geometry (position, derivatives, Jacobian, normal frame).
//!
//! A boundary is written as p(θ) = center + r(θ)(cos θ, sin θ) with a strictly
//! positive radial function r. The catalogue shapes carry hand-differentiated
//! closed forms because the Nyström diagonal terms need the exact second
//! derivative; reconstruction iterates use a trigonometric polynomial radial.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

pub type Point = Vector2<f64>;

/// Angles used when validating star-shapedness at construction time.
const VALIDATION_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("curve is not star-shaped: min sampled radius {min_r} at theta {theta}")]
    NotStarShaped { min_r: f64, theta: f64 },
    #[error("trigonometric radial needs {expected} sine coefficients, got {got}")]
    CoefficientMismatch { expected: usize, got: usize },
    #[error("circle radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("observation circle does not strictly enclose the curve (margin {margin})")]
    NotEnclosing { margin: f64 },
    #[error("unknown curve kind {0:?}")]
    UnknownKind(String),
    #[error("curve kind {kind:?} does not carry trigonometric coefficients")]
    NotTrigPoly { kind: String },
}

/// Radial function r(θ) of a star-shaped curve.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialFunction {
    /// (1 + 0.9 cos θ + 0.1 sin 2θ) / (1 + 0.75 cos θ)
    Apple,
    /// sqrt(0.25 cos²θ + sin²θ)
    Peanut,
    /// constant radius
    Circle(f64),
    /// r(θ) = Σ_{m=0}^{M} α_m cos mθ + Σ_{m=1}^{M} β_m sin mθ
    TrigPoly { alpha: Vec<f64>, beta: Vec<f64> },
}

impl RadialFunction {
    /// Degree-`degree` trigonometric representation of a circle: α₀ = r0, rest 0.
    pub fn circle_as_trig(r0: f64, degree: usize) -> Self {
        let mut alpha = vec![0.0; degree + 1];
        alpha[0] = r0;
        RadialFunction::TrigPoly {
            alpha,
            beta: vec![0.0; degree],
        }
    }

    /// r, r', r'' at θ.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            RadialFunction::Apple => {
                let (sin, cos) = theta.sin_cos();
                let (sin2, cos2) = (2.0 * theta).sin_cos();
                let a = 1.0 + 0.9 * cos + 0.1 * sin2;
                let da = -0.9 * sin + 0.2 * cos2;
                let dda = -0.9 * cos - 0.4 * sin2;
                let b = 1.0 + 0.75 * cos;
                let db = -0.75 * sin;
                let ddb = -0.75 * cos;
                let r = a / b;
                let dr = da / b - a * db / (b * b);
                let ddr = dda / b - 2.0 * da * db / (b * b) - a * ddb / (b * b)
                    + 2.0 * a * db * db / (b * b * b);
                (r, dr, ddr)
            }
            RadialFunction::Peanut => {
                let (sin2, cos2) = (2.0 * theta).sin_cos();
                let g = 0.25 * theta.cos().powi(2) + theta.sin().powi(2);
                let dg = 0.75 * sin2;
                let ddg = 1.5 * cos2;
                let r = g.sqrt();
                let dr = dg / (2.0 * r);
                let ddr = ddg / (2.0 * r) - dg * dg / (4.0 * r * r * r);
                (r, dr, ddr)
            }
            RadialFunction::Circle(r0) => (*r0, 0.0, 0.0),
            RadialFunction::TrigPoly { alpha, beta } => {
                let mut r = 0.0;
                let mut dr = 0.0;
                let mut ddr = 0.0;
                for (m, &am) in alpha.iter().enumerate() {
                    let mf = m as f64;
                    let (sin, cos) = (mf * theta).sin_cos();
                    r += am * cos;
                    dr -= am * mf * sin;
                    ddr -= am * mf * mf * cos;
                }
                for (i, &bm) in beta.iter().enumerate() {
                    let mf = (i + 1) as f64;
                    let (sin, cos) = (mf * theta).sin_cos();
                    r += bm * sin;
                    dr += bm * mf * cos;
                    ddr -= bm * mf * mf * sin;
                }
                (r, dr, ddr)
            }
        }
    }
}

/// Position and exact θ-derivatives of a curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub point: Point,
    pub d1: Point,
    pub d2: Point,
}

/// Jacobian and (unnormalized) frame at a curve point: |n| = |n_perp| = jacobian.
/// `normal` points outward for star-shaped curves; `tangent` is the curve
/// derivative direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFrame {
    pub jacobian: f64,
    pub normal: Point,
    pub tangent: Point,
}

/// Star-shaped boundary curve: center plus positive radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCurve {
    center: Point,
    radial: RadialFunction,
}

impl StarCurve {
    /// Builds a curve, rejecting radial functions that are not strictly
    /// positive (sampled at 256 angles) or inconsistent coefficient lengths.
    pub fn new(center: Point, radial: RadialFunction) -> Result<Self, GeometryError> {
        if let RadialFunction::TrigPoly { alpha, beta } = &radial {
            if alpha.len() != beta.len() + 1 {
                return Err(GeometryError::CoefficientMismatch {
                    expected: alpha.len().saturating_sub(1),
                    got: beta.len(),
                });
            }
        }
        if let RadialFunction::Circle(r0) = radial {
            if !(r0 > 0.0) {
                return Err(GeometryError::NonpositiveRadius(r0));
            }
        }
        let curve = StarCurve { center, radial };
        let (min_r, at) = curve.min_radius(VALIDATION_SAMPLES);
        if !(min_r > 0.0) {
            return Err(GeometryError::NotStarShaped { min_r, theta: at });
        }
        Ok(curve)
    }

    pub fn apple() -> Self {
        StarCurve::new(Point::zeros(), RadialFunction::Apple).unwrap()
    }

    pub fn peanut() -> Self {
        StarCurve::new(Point::zeros(), RadialFunction::Peanut).unwrap()
    }

    pub fn circle(center: Point, r0: f64) -> Result<Self, GeometryError> {
        StarCurve::new(center, RadialFunction::Circle(r0))
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radial(&self) -> &RadialFunction {
        &self.radial
    }

    /// Minimum of r(θ) over `samples` uniform angles, with its location.
    pub fn min_radius(&self, samples: usize) -> (f64, f64) {
        let mut min_r = f64::INFINITY;
        let mut at = 0.0;
        for k in 0..samples {
            let theta = 2.0 * PI * k as f64 / samples as f64;
            let (r, _, _) = self.radial.eval(theta);
            if r < min_r {
                min_r = r;
                at = theta;
            }
        }
        (min_r, at)
    }

    /// p(θ) with exact first and second θ-derivatives.
    pub fn eval(&self, theta: f64) -> CurvePoint {
        let (sin, cos) = theta.sin_cos();
        let dir = Point::new(cos, sin);
        let dir_p = Point::new(-sin, cos);
        let (r, dr, ddr) = self.radial.eval(theta);
        CurvePoint {
            point: self.center + r * dir,
            d1: dr * dir + r * dir_p,
            d2: ddr * dir + 2.0 * dr * dir_p - r * dir,
        }
    }

    /// Jacobian G_r = sqrt(r² + r'²) and the frame n = (p₂', -p₁'),
    /// n_perp = (p₁', p₂').
    pub fn frame(&self, theta: f64) -> CurveFrame {
        let p = self.eval(theta);
        CurveFrame {
            jacobian: p.d1.norm(),
            normal: Point::new(p.d1.y, -p.d1.x),
            tangent: p.d1,
        }
    }

    /// Trig-polynomial coefficients when this curve is a reconstruction iterate.
    pub fn trig_coefficients(&self) -> Option<(&[f64], &[f64])> {
        match &self.radial {
            RadialFunction::TrigPoly { alpha, beta } => Some((alpha, beta)),
            _ => None,
        }
    }

    /// New curve with shifted center and incremented trig coefficients.
    /// Only valid for trig-polynomial iterates; re-validates star-shapedness.
    pub fn with_trig_update(
        &self,
        dp: Point,
        dalpha: &[f64],
        dbeta: &[f64],
    ) -> Result<StarCurve, GeometryError> {
        let (alpha, beta) = self.trig_coefficients().ok_or(GeometryError::NotTrigPoly {
            kind: self.kind_name().to_string(),
        })?;
        if dalpha.len() != alpha.len() || dbeta.len() != beta.len() {
            return Err(GeometryError::CoefficientMismatch {
                expected: alpha.len(),
                got: dalpha.len(),
            });
        }
        let alpha: Vec<f64> = alpha.iter().zip(dalpha).map(|(a, d)| a + d).collect();
        let beta: Vec<f64> = beta.iter().zip(dbeta).map(|(b, d)| b + d).collect();
        StarCurve::new(self.center + dp, RadialFunction::TrigPoly { alpha, beta })
    }

    fn kind_name(&self) -> &'static str {
        match self.radial {
            RadialFunction::Apple => "apple",
            RadialFunction::Peanut => "peanut",
            RadialFunction::Circle(_) => "circle",
            RadialFunction::TrigPoly { .. } => "trig",
        }
    }

    /// Uniformly sampled boundary polyline (open: last point ≠ first).
    pub fn sample(&self, samples: usize) -> Vec<Point> {
        (0..samples)
            .map(|k| self.eval(2.0 * PI * k as f64 / samples as f64).point)
            .collect()
    }
}

/// Symmetric discrete Hausdorff distance over uniformly sampled polylines.
pub fn hausdorff_distance(a: &StarCurve, b: &StarCurve, samples: usize) -> f64 {
    assert!(samples >= 16, "need at least 16 samples");
    let pa = a.sample(samples);
    let pb = b.sample(samples);
    let one_sided = |from: &[Point], to: &[Point]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(&pa, &pb).max(one_sided(&pb, &pa))
}

/// Observation circle p_B(ς) = b + R(cos ς, sin ς) with 2n̄ equispaced points
/// ς_i = πi/n̄.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCircle {
    pub center: Point,
    pub radius: f64,
    pub n_bar: usize,
}

impl ObservationCircle {
    pub fn new(center: Point, radius: f64, n_bar: usize) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonpositiveRadius(radius));
        }
        Ok(ObservationCircle {
            center,
            radius,
            n_bar,
        })
    }

    pub fn num_points(&self) -> usize {
        2 * self.n_bar
    }

    pub fn angle(&self, i: usize) -> f64 {
        PI * i as f64 / self.n_bar as f64
    }

    pub fn point(&self, i: usize) -> Point {
        let (sin, cos) = self.angle(i).sin_cos();
        self.center + self.radius * Point::new(cos, sin)
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.num_points()).map(|i| self.point(i)).collect()
    }

    /// Distance margin by which the circle encloses the curve (negative if it
    /// does not). Sampled at 512 boundary angles.
    pub fn enclosure_margin(&self, curve: &StarCurve) -> f64 {
        curve
            .sample(512)
            .iter()
            .map(|p| self.radius - (p - self.center).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_encloses(&self, curve: &StarCurve) -> Result<(), GeometryError> {
        let margin = self.enclosure_margin(curve);
        if margin <= 0.0 {
            return Err(GeometryError::NotEnclosing { margin });
        }
        Ok(())
    }
}

/// Serialized curve form:
/// `{center: [p1, p2], kind: "trig"|"apple"|"peanut"|"circle", alpha: [...], beta: [...], r0: ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CurveJson {
    pub center: [f64; 2],
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

impl From<&StarCurve> for CurveJson {
    fn from(curve: &StarCurve) -> Self {
        let (alpha, beta, r0) = match &curve.radial {
            RadialFunction::TrigPoly { alpha, beta } => (alpha.clone(), beta.clone(), None),
            RadialFunction::Circle(r0) => (vec![], vec![], Some(*r0)),
            _ => (vec![], vec![], None),
        };
        CurveJson {
            center: [curve.center.x, curve.center.y],
            kind: curve.kind_name().to_string(),
            alpha,
            beta,
            r0,
        }
    }
}

impl TryFrom<&CurveJson> for StarCurve {
    type Error = GeometryError;

    fn try_from(j: &CurveJson) -> Result<Self, GeometryError> {
        let center = Point::new(j.center[0], j.center[1]);
        let radial = match j.kind.as_str() {
            "apple" => RadialFunction::Apple,
            "peanut" => RadialFunction::Peanut,
            "circle" => RadialFunction::Circle(j.r0.unwrap_or(1.0)),
            "trig" => RadialFunction::TrigPoly {
                alpha: j.alpha.clone(),
                beta: j.beta.clone(),
            },
            other => return Err(GeometryError::UnknownKind(other.to_string())),
        };
        StarCurve::new(center, radial)
    }
}

/// Writes a closed polyline CSV (`theta,x,y`; first point repeated last).
pub fn write_polyline_csv<W: Write>(
    curve: &StarCurve,
    samples: usize,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "theta,x,y")?;
    for k in 0..=samples {
        let theta = 2.0 * PI * (k % samples) as f64 / samples as f64;
        let p = curve.eval(theta).point;
        writeln!(out, "{:.16e},{:.16e},{:.16e}", theta, p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn catalogue_values_at_zero() {
        let apple = StarCurve::apple();
        let p = apple.eval(0.0).point;
        assert_relative_eq!(p.x, 1.9 / 1.75, max_relative = 1e-15);
        assert_relative_eq!(p.y, 0.0);

        let peanut = StarCurve::peanut();
        let p = peanut.eval(0.0).point;
        assert_relative_eq!(p.x, 0.5, max_relative = 1e-15);
        assert_relative_eq!(p.y, 0.0);
    }

    #[test]
    fn circle_derivatives() {
        let c = StarCurve::circle(Point::zeros(), 0.4).unwrap();
        let p = c.eval(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(p.point.x, 0.0, epsilon = 1e-16);
        assert_relative_eq!(p.point.y, 0.4, max_relative = 1e-15);
        assert_relative_eq!(p.d1.x, -0.4, max_relative = 1e-15);
        assert_relative_eq!(p.d1.y, 0.0, epsilon = 1e-16);
        assert_relative_eq!(p.d2.x, 0.0, epsilon = 1e-16);
        assert_relative_eq!(p.d2.y, -0.4, max_relative = 1e-15);

        let f = c.frame(1.234);
        assert_relative_eq!(f.jacobian, 0.4, max_relative = 1e-15);
    }

    #[test]
    fn circle_normal_is_radial() {
        let c = StarCurve::circle(Point::zeros(), 1.0).unwrap();
        let f = c.frame(0.0);
        assert_relative_eq!(f.normal.x, 1.0, max_relative = 1e-15);
        assert_relative_eq!(f.normal.y, 0.0, epsilon = 1e-16);
    }

    fn all_kinds() -> Vec<StarCurve> {
        vec![
            StarCurve::apple(),
            StarCurve::peanut(),
            StarCurve::circle(Point::new(0.3, -0.2), 0.7).unwrap(),
            StarCurve::new(
                Point::new(0.1, 0.2),
                RadialFunction::TrigPoly {
                    alpha: vec![0.9, 0.1, -0.05, 0.02],
                    beta: vec![0.08, 0.03, -0.01],
                },
            )
            .unwrap(),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let h = 1e-5;
        for curve in all_kinds() {
            for _ in 0..64 {
                let theta: f64 = rng.gen_range(0.0..2.0 * PI);
                let p = curve.eval(theta);
                let pp = curve.eval(theta + h);
                let pm = curve.eval(theta - h);
                let fd1 = (pp.point - pm.point) / (2.0 * h);
                let fd2 = (pp.point - 2.0 * p.point + pm.point) / (h * h);
                assert!(
                    (fd1 - p.d1).norm() <= 1e-6 * p.d1.norm().max(1.0),
                    "d1 mismatch at {theta}"
                );
                assert!(
                    (fd2 - p.d2).norm() <= 1e-4 * p.d2.norm().max(1.0),
                    "d2 mismatch at {theta}"
                );
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_difference_for_apple_at_pi() {
        let apple = StarCurve::apple();
        let h = 1e-5;
        let fd = (apple.eval(PI + h).point - apple.eval(PI - h).point) / (2.0 * h);
        assert!((fd.norm() - apple.frame(PI).jacobian).abs() < 1e-6);
    }

    #[test]
    fn normal_is_outward() {
        for curve in all_kinds() {
            for k in 0..128 {
                let theta = 2.0 * PI * k as f64 / 128.0;
                let f = curve.frame(theta);
                let radial = curve.eval(theta).point - curve.center();
                assert!(
                    f.normal.dot(&radial) > 0.0,
                    "normal not outward at {theta}"
                );
                // frame invariants
                assert_relative_eq!(f.normal.norm(), f.jacobian, max_relative = 1e-14);
                assert_relative_eq!(f.tangent.norm(), f.jacobian, max_relative = 1e-14);
                assert!(f.normal.dot(&f.tangent).abs() < 1e-14 * f.jacobian.powi(2));
            }
        }
    }

    #[test]
    fn trig_circle_reproduces_builtin_circle() {
        let center = Point::new(0.2, -0.1);
        let circle = StarCurve::circle(center, 0.65).unwrap();
        let trig = StarCurve::new(center, RadialFunction::circle_as_trig(0.65, 3)).unwrap();
        for k in 0..64 {
            let theta = 2.0 * PI * k as f64 / 64.0;
            let a = circle.eval(theta);
            let b = trig.eval(theta);
            assert_eq!(a.point, b.point);
            assert_eq!(a.d1, b.d1);
        }
    }

    #[test]
    fn periodicity_of_radial() {
        for curve in all_kinds() {
            let a = curve.eval(0.0);
            let b = curve.eval(2.0 * PI);
            assert!((a.point - b.point).norm() < 1e-12);
            assert!((a.d1 - b.d1).norm() < 1e-11);
        }
    }

    #[test]
    fn hausdorff_cases() {
        let a = StarCurve::circle(Point::zeros(), 1.0).unwrap();
        assert_eq!(hausdorff_distance(&a, &a, 256), 0.0);

        let b = StarCurve::circle(Point::zeros(), 1.1).unwrap();
        let d = hausdorff_distance(&a, &b, 512);
        assert!((d - 0.1).abs() < 2e-3, "concentric: {d}");

        let c = StarCurve::circle(Point::new(0.3, 0.0), 1.0).unwrap();
        let d = hausdorff_distance(&a, &c, 512);
        assert!((d - 0.3).abs() < 2e-3, "translated: {d}");
    }

    #[test]
    fn rejects_non_star_curves() {
        let err = StarCurve::new(
            Point::zeros(),
            RadialFunction::TrigPoly {
                alpha: vec![0.1, 0.5],
                beta: vec![0.0],
            },
        );
        assert!(matches!(err, Err(GeometryError::NotStarShaped { .. })));
        assert!(StarCurve::circle(Point::zeros(), 0.0).is_err());
    }

    #[test]
    fn curve_json_roundtrip() {
        for curve in all_kinds() {
            let j = CurveJson::from(&curve);
            let text = serde_json::to_string(&j).unwrap();
            let back: CurveJson = serde_json::from_str(&text).unwrap();
            let restored = StarCurve::try_from(&back).unwrap();
            assert_eq!(curve, restored);
        }
    }

    #[test]
    fn polyline_is_closed() {
        let mut buf = Vec::new();
        write_polyline_csv(&StarCurve::apple(), 64, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 66); // header + 64 + repeated first
        let first: Vec<&str> = lines[1].split(',').collect();
        let last: Vec<&str> = lines[65].split(',').collect();
        assert_eq!(first[1..], last[1..]);
    }

    #[test]
    fn observation_circle_points_and_enclosure() {
        let obs = ObservationCircle::new(Point::zeros(), 2.0, 30).unwrap();
        assert_eq!(obs.num_points(), 60);
        assert_relative_eq!(obs.angle(1), PI / 30.0);
        assert!(obs.check_encloses(&StarCurve::apple()).is_ok());
        let big = StarCurve::circle(Point::zeros(), 2.5).unwrap();
        assert!(matches!(
            obs.check_encloses(&big),
            Err(GeometryError::NotEnclosing { .. })
        ));
    }
}
