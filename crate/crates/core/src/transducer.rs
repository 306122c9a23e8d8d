//! Single-element bowl transducers modelled as a cloud of monopoles.
//!
//! The bowl apex sits at the origin and the transducer radiates along +x;
//! the geometric focus is `(l, 0, 0)`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::medium::{Medium, Wavenumber};
use crate::potential::green_at;
use crate::scalar::{czero, distance, Point3, Real};

/// Closer than this to a monopole the field is treated as singular.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

pub const PRESET_NAMES: [&str; 2] = ["H101", "H131"];

/// Serializable transducer description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransducerSpec {
    pub name: String,
    /// Operating frequency, Hz.
    pub f0: f64,
    /// Geometric focal length (radius of curvature), m.
    pub focal_length: f64,
    /// Aperture radius, m.
    pub outer_radius: f64,
    /// Total radiated power, W.
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_power() -> f64 {
    100.0
}

fn default_points() -> usize {
    4096
}

impl TransducerSpec {
    pub fn h101() -> Self {
        Self {
            name: "H101".into(),
            f0: 1.1e6,
            focal_length: 63.2e-3,
            outer_radius: 32e-3,
            power: default_power(),
            n_points: default_points(),
        }
    }

    pub fn h131() -> Self {
        Self {
            name: "H131".into(),
            f0: 1.1e6,
            focal_length: 35e-3,
            outer_radius: 16.5e-3,
            power: default_power(),
            n_points: default_points(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "H101" => Ok(Self::h101()),
            "H131" => Ok(Self::h131()),
            _ => Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            }),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn with_frequency(mut self, f0: f64) -> Self {
        self.f0 = f0;
        self
    }

    pub fn build<T: Real>(&self) -> Result<BowlTransducer<T>> {
        BowlTransducer::new(
            self.name.clone(),
            T::lit(self.f0),
            T::lit(self.focal_length),
            T::lit(self.outer_radius),
            T::lit(self.power),
            self.n_points,
        )
    }
}

#[derive(Debug, Clone)]
pub struct BowlTransducer<T> {
    pub name: String,
    pub f0: T,
    pub focal_length: T,
    pub outer_radius: T,
    /// Prescribed radiated power, W.
    pub power: T,
    pub sources: Vec<Point3<T>>,
}

impl<T: Real> BowlTransducer<T> {
    pub fn new(
        name: impl Into<String>,
        f0: T,
        focal_length: T,
        outer_radius: T,
        power: T,
        n_points: usize,
    ) -> Result<Self> {
        if !(f0 > T::zero()) {
            return Err(Error::InvalidParameter("transducer frequency must be positive".into()));
        }
        if !(power >= T::zero()) {
            return Err(Error::InvalidParameter("radiated power must be non-negative".into()));
        }
        let sources = distribute_points(focal_length, outer_radius, n_points)?;
        Ok(Self { name: name.into(), f0, focal_length, outer_radius, power, sources })
    }

    pub fn spec(&self) -> TransducerSpec {
        TransducerSpec {
            name: self.name.clone(),
            f0: self.f0.as_f64(),
            focal_length: self.focal_length.as_f64(),
            outer_radius: self.outer_radius.as_f64(),
            power: self.power.as_f64(),
            n_points: self.sources.len(),
        }
    }

    pub fn focus(&self) -> Point3<T> {
        [self.focal_length, T::zero(), T::zero()]
    }

    /// Axial depth of the bowl; the rim lies in the plane `x = depth`.
    pub fn depth(&self) -> T {
        cap_depth(self.focal_length, self.outer_radius)
    }

    /// Surface area of the spherical cap, `2πl(l − √(l² − R²))`.
    pub fn area(&self) -> T {
        T::TAU() * self.focal_length * self.depth()
    }

    pub fn n_points(&self) -> usize {
        self.sources.len()
    }

    /// `(A/n_p) Σ G_k(x, r_i)` at every evaluation point.
    pub fn unnormalized_field(&self, points: &[Point3<T>], k: &Wavenumber<T>) -> Result<Vec<Complex<T>>> {
        let weight = self.area() / T::from_usize_lossy(self.sources.len());
        let tiny = T::lit(SINGULAR_DISTANCE);
        points
            .par_iter()
            .map(|x| {
                let mut acc = czero::<T>();
                for r in &self.sources {
                    let d = distance(x, r);
                    if d < tiny {
                        return Err(Error::SingularEvaluation { distance: d.as_f64() });
                    }
                    acc = acc + green_at(d, k.k);
                }
                Ok(acc * weight)
            })
            .collect()
    }

    /// Same as [`Self::unnormalized_field`] with a prescribed radiated power,
    /// computed by integrating over `disc`.
    pub fn incident_field(&self, medium: &Medium<T>, disc: &ApertureDisc<T>) -> Result<IncidentField<T>> {
        let k = medium.wavenumber(self.f0, 1)?;
        let raw = SourceField { values: self.unnormalized_field(&disc.points(), &k)?, scale: T::one() };
        let normalized = normalize_to_power(&raw, disc, self.power, medium)?;
        Ok(IncidentField { transducer: self.clone(), wavenumber: k, scale: normalized.scale })
    }
}

pub(crate) fn cap_depth<T: Real>(l: T, r: T) -> T {
    l - (l * l - r * r).sqrt()
}

/// Near-equal-area monopole layout on the spherical cap of radius of curvature
/// `l` and aperture radius `r`.
///
/// One point sits at the pole and represents a polar cap of area `A/n_p`; the
/// remaining points go on rings of latitude. Ring boundaries are placed so that
/// every ring holds exactly its share of area, and points per ring follow the
/// ring circumference.
pub fn distribute_points<T: Real>(l: T, r: T, n_points: usize) -> Result<Vec<Point3<T>>> {
    if n_points == 0 {
        return Err(Error::InvalidParameter("at least one monopole is required".into()));
    }
    if !(r > T::zero()) || !(r < l) {
        return Err(Error::InvalidParameter(format!(
            "degenerate bowl: need 0 < R < l (R = {r}, l = {l})"
        )));
    }
    let n = n_points;
    // Work in s = 1 - cos(theta); area element is 2π l² ds.
    let s_max = cap_depth(l, r) / l;
    let ds = s_max / T::from_usize_lossy(n);
    let theta_of = |s: T| (T::one() - s).max(-T::one()).min(T::one()).acos();
    let point = |theta: T, phi: T| {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [l - l * ct, l * st * cp, l * st * sp]
    };
    let mut pts = Vec::with_capacity(n);
    pts.push([T::zero(), T::zero(), T::zero()]);
    if n == 1 {
        return Ok(pts);
    }
    let rest = n - 1;
    let theta0 = theta_of(ds);
    let theta_max = theta_of(s_max);
    let spacing = (T::TAU() * l * l * ds).sqrt();
    let rings = ((l * (theta_max - theta0) / spacing).round().to_usize().unwrap_or(1))
        .clamp(1, rest);

    // Provisional rings uniform in theta, then integer counts by largest remainder.
    let dtheta = (theta_max - theta0) / T::from_usize_lossy(rings);
    let mut ideal = Vec::with_capacity(rings);
    for j in 0..rings {
        let a = theta0 + dtheta * T::from_usize_lossy(j);
        let b = a + dtheta;
        ideal.push((a.cos() - b.cos()) / ds);
    }
    let total: T = ideal.iter().fold(T::zero(), |acc, &x| acc + x);
    let scale = T::from_usize_lossy(rest) / total;
    let mut counts: Vec<usize> = ideal
        .iter()
        .map(|&c| (c * scale).floor().to_usize().unwrap_or(0).max(1))
        .collect();
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..rings).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] * scale - T::from_usize_lossy(counts[a]);
        let fb = ideal[b] * scale - T::from_usize_lossy(counts[b]);
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut cursor = 0;
    while assigned < rest {
        counts[order[cursor % rings]] += 1;
        assigned += 1;
        cursor += 1;
    }
    while assigned > rest {
        // Only reachable when the max(1) floor over-assigned; trim the largest ring.
        let j = (0..rings).max_by_key(|&j| (counts[j], j)).unwrap();
        counts[j] -= 1;
        assigned -= 1;
    }

    let mut s_lo = ds;
    for (j, &m) in counts.iter().enumerate() {
        let s_hi = if j + 1 == rings { s_max } else { s_lo + ds * T::from_usize_lossy(m) };
        let theta = (theta_of(s_lo) + theta_of(s_hi)) * T::lit(0.5);
        let offset = if j % 2 == 0 { T::lit(0.5) } else { T::zero() };
        for i in 0..m {
            let phi = T::TAU() * (T::from_usize_lossy(i) + offset) / T::from_usize_lossy(m);
            pts.push(point(theta, phi));
        }
        s_lo = s_hi;
    }
    debug_assert_eq!(pts.len(), n);
    Ok(pts)
}

/// Polar midpoint-rule discretization of the disc closing the bowl.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureDisc<T> {
    /// Plane of the disc, `x = plane_x`.
    pub plane_x: T,
    pub radius: T,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl<T: Real> ApertureDisc<T> {
    /// Disc in the rim plane with cells of roughly `spacing` metres.
    pub fn for_transducer(tr: &BowlTransducer<T>, spacing: T) -> Self {
        let r = tr.outer_radius;
        let n_radial = (r / spacing).ceil().to_usize().unwrap_or(1).max(1);
        let n_angular = (T::TAU() * r / spacing).ceil().to_usize().unwrap_or(8).max(8);
        Self { plane_x: tr.depth(), radius: r, n_radial, n_angular }
    }

    /// Twice as many cells along each polar direction.
    pub fn refined(&self) -> Self {
        Self { n_radial: 2 * self.n_radial, n_angular: 2 * self.n_angular, ..*self }
    }

    fn nodes(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        let dr = self.radius / T::from_usize_lossy(self.n_radial);
        let dt = T::TAU() / T::from_usize_lossy(self.n_angular);
        let h = T::lit(0.5);
        (0..self.n_radial).flat_map(move |i| {
            let r = (T::from_usize_lossy(i) + h) * dr;
            (0..self.n_angular).map(move |j| {
                let t = (T::from_usize_lossy(j) + h) * dt;
                (r, t, r * dr * dt)
            })
        })
    }

    pub fn points(&self) -> Vec<Point3<T>> {
        self.nodes().map(|(r, t, _)| [self.plane_x, r * t.cos(), r * t.sin()]).collect()
    }

    /// Area weights `r Δr Δθ`.
    pub fn weights(&self) -> Vec<T> {
        self.nodes().map(|(_, _, w)| w).collect()
    }

    pub fn len(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Field sampled on an aperture disc together with the scale already applied.
#[derive(Debug, Clone)]
pub struct SourceField<T> {
    pub values: Vec<Complex<T>>,
    pub scale: T,
}

/// Radiated power `∫ |p|² / (2 ρ0 c0) dA` over the disc.
pub fn radiated_power<T: Real>(values: &[Complex<T>], disc: &ApertureDisc<T>, medium: &Medium<T>) -> Result<T> {
    if values.len() != disc.len() {
        return Err(Error::DimensionMismatch { expected: disc.len(), found: values.len() });
    }
    let sum = values
        .iter()
        .zip(disc.weights())
        .fold(T::zero(), |acc, (p, w)| acc + p.norm_sqr() * w);
    Ok(sum / (T::lit(2.0) * medium.rho0 * medium.c0))
}

/// Rescales `field` so that its radiated power equals `power`.
pub fn normalize_to_power<T: Real>(
    field: &SourceField<T>,
    disc: &ApertureDisc<T>,
    power: T,
    medium: &Medium<T>,
) -> Result<SourceField<T>> {
    let current = radiated_power(&field.values, disc, medium)?;
    if !(current > T::zero()) {
        return Err(Error::DegenerateField("radiated power of the unnormalized field is zero".into()));
    }
    let s = (power / current).sqrt();
    Ok(SourceField { values: field.values.iter().map(|p| p * s).collect(), scale: field.scale * s })
}

/// Power-normalized first harmonic of a transducer in a homogeneous medium.
#[derive(Debug, Clone)]
pub struct IncidentField<T> {
    pub transducer: BowlTransducer<T>,
    pub wavenumber: Wavenumber<T>,
    /// `√(Π0 / Π(p̃))`.
    pub scale: T,
}

impl<T: Real> IncidentField<T> {
    pub fn evaluate(&self, points: &[Point3<T>]) -> Result<Vec<Complex<T>>> {
        let mut v = self.transducer.unnormalized_field(points, &self.wavenumber)?;
        v.iter_mut().for_each(|z| *z = *z * self.scale);
        Ok(v)
    }

    /// Field at every voxel centre, x-fastest.
    pub fn evaluate_grid(&self, grid: &VoxelGrid<T>) -> Result<Vec<Complex<T>>> {
        let [nx, ny, nz] = grid.dims;
        let mut out = Vec::with_capacity(grid.len());
        for k in 0..nz {
            let plane: Vec<Point3<T>> =
                (0..ny).flat_map(|j| (0..nx).map(move |i| grid.centre(i, j, k))).collect();
            out.extend(self.evaluate(&plane)?);
        }
        Ok(out)
    }

    /// Same incident field with the amplitude multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self { scale: self.scale * s, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nn_ratio(pts: &[Point3<f64>]) -> f64 {
        let nn: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                pts.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| distance(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let max = nn.iter().cloned().fold(0.0, f64::max);
        let min = nn.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    #[test]
    fn h131_layout_is_even_and_on_sphere() {
        let (l, r): (f64, f64) = (35e-3, 16.5e-3);
        let pts = distribute_points(l, r, 4096).unwrap();
        assert_eq!(pts.len(), 4096);
        let focus = [l, 0.0, 0.0];
        for p in &pts {
            assert!((distance(p, &focus) - l).abs() <= 1e-12 * l);
            // inside the aperture
            assert!((p[1] * p[1] + p[2] * p[2]).sqrt() <= r * (1.0 + 1e-12));
        }
        let ratio = nn_ratio(&pts);
        assert!(ratio < 2.0, "nearest-neighbour ratio {ratio}");
    }

    #[test]
    fn layout_is_deterministic() {
        let a = distribute_points(63.2e-3, 32e-3, 1000).unwrap();
        let b = distribute_points(63.2e-3, 32e-3, 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_is_pole() {
        assert_eq!(distribute_points(1.0, 0.3, 1).unwrap(), vec![[0.0; 3]]);
        for n in 2..40 {
            assert_eq!(distribute_points(1.0, 0.3, n).unwrap().len(), n);
        }
    }

    #[test]
    fn degenerate_cap_rejected() {
        assert!(distribute_points(1.0, 1.0, 10).is_err());
        assert!(distribute_points(1.0, 1.5, 10).is_err());
        assert!(distribute_points(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn cap_area() {
        let t = TransducerSpec::h131().build::<f64>().unwrap();
        let expected = 2.0 * std::f64::consts::PI * 35e-3 * (35e-3 - (35e-3f64.powi(2) - 16.5e-3f64.powi(2)).sqrt());
        assert_relative_eq!(t.area(), expected, max_relative = 1e-15);
    }

    #[test]
    fn single_monopole_magnitude() {
        let mut t = TransducerSpec::h131().with_points(1).build::<f64>().unwrap();
        t.sources = vec![[0.0; 3]];
        let k = 250.0;
        let wn = Wavenumber::real(k);
        let v = t.unnormalized_field(&[[1.0 / k, 0.0, 0.0]], &wn).unwrap()[0];
        let expected = t.area() * k / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(v.norm(), expected, max_relative = 1e-13);
        assert_relative_eq!(v.arg(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn coincident_point_is_an_error() {
        let t = TransducerSpec::h131().with_points(16).build::<f64>().unwrap();
        let k = Wavenumber::real(1000.0);
        let err = t.unnormalized_field(&[t.sources[5]], &k).unwrap_err();
        assert!(matches!(err, Error::SingularEvaluation { .. }));
    }

    /// Closed form of the single-layer potential of a spherical cap on its axis.
    fn cap_axis_oracle(l: f64, r: f64, u: f64, k: Complex<f64>) -> Complex<f64> {
        let cos_max = (1.0 - (r / l).powi(2)).sqrt();
        let r0 = l + u;
        let r1 = (u * u + 2.0 * u * l * cos_max + l * l).sqrt();
        let i = Complex::new(0.0, 1.0);
        l / (2.0 * i * k * u) * ((i * k * r0).exp() - (i * k * r1).exp())
    }

    #[test]
    fn riemann_sum_converges_to_axis_oracle() {
        let w = Medium::<f64>::water();
        let k = w.wavenumber(1.1e6, 1).unwrap();
        let (l, r) = (35e-3, 16.5e-3);
        for u in [-12e-3, -3e-3, 4e-3, 15e-3] {
            let x = [[l + u, 0.0, 0.0]];
            let exact = cap_axis_oracle(l, r, u, k.k);
            let errs: Vec<f64> = [1024, 4096]
                .iter()
                .map(|&n| {
                    let t = TransducerSpec::h131().with_points(n).build::<f64>().unwrap();
                    (t.unnormalized_field(&x, &k).unwrap()[0] - exact).norm() / exact.norm()
                })
                .collect();
            assert!(errs[1] < 1e-2, "u = {u}: {errs:?}");
            assert!(errs[1] < errs[0], "u = {u}: {errs:?}");
        }
    }

    fn small_setup() -> (BowlTransducer<f64>, Medium<f64>, ApertureDisc<f64>, SourceField<f64>) {
        let t = TransducerSpec::h131().with_points(256).with_frequency(0.5e6).build::<f64>().unwrap();
        let m = Medium::water();
        let disc = ApertureDisc::for_transducer(&t, 1e-3);
        let k = m.wavenumber(t.f0, 1).unwrap();
        let f = SourceField { values: t.unnormalized_field(&disc.points(), &k).unwrap(), scale: 1.0 };
        (t, m, disc, f)
    }

    #[test]
    fn normalization_is_scale_invariant_and_idempotent() {
        let (_, m, disc, f) = small_setup();
        let a = normalize_to_power(&f, &disc, 100.0, &m).unwrap();
        let g = SourceField { values: f.values.iter().map(|z| z * 7.5).collect(), scale: 1.0 };
        let b = normalize_to_power(&g, &disc, 100.0, &m).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
        }
        let twice = normalize_to_power(&a, &disc, 100.0, &m).unwrap();
        assert_relative_eq!(twice.scale, a.scale, max_relative = 1e-12);
        assert_relative_eq!(radiated_power(&a.values, &disc, &m).unwrap(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_gives_zero_field() {
        let (_, m, disc, f) = small_setup();
        let z = normalize_to_power(&f, &disc, 0.0, &m).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
        let zero = SourceField { values: vec![Complex::new(0.0, 0.0); disc.len()], scale: 1.0 };
        assert!(normalize_to_power(&zero, &disc, 1.0, &m).is_err());
    }

    #[test]
    fn disc_weights_sum_to_area() {
        let disc = ApertureDisc { plane_x: 0.0, radius: 0.02, n_radial: 17, n_angular: 40 };
        let a: f64 = disc.weights().iter().sum();
        assert_relative_eq!(a, std::f64::consts::PI * 0.02 * 0.02, max_relative = 1e-12);
    }
}
