//! Error metrics, the localisedness map and the convergence studies.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{quadratic_products, rhs_source};
use crate::error::{Error, Result};
use crate::grid::{interpolate_values, DomainBox, HarmonicField, Interpolation, VoxelGrid};
use crate::medium::Medium;
use crate::potential::{potential_at_points, GreenKernel};
use crate::scalar::{Point3, Real};
use crate::transducer::IncidentField;

/// Complex pressure sampled along the axis `y = z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnAxisProfile<T> {
    pub x: Vec<T>,
    pub values: Vec<Complex<T>>,
    pub harmonic: usize,
}

impl<T: Real> OnAxisProfile<T> {
    pub fn new(x: Vec<T>, values: Vec<Complex<T>>, harmonic: usize) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: values.len() });
        }
        if x.is_empty() {
            return Err(Error::InvalidParameter("empty profile".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("profile abscissae must be strictly increasing".into()));
        }
        Ok(Self { x, values, harmonic })
    }

    /// Samples a field on the axis at its x voxel centres; `y` and `z` are
    /// interpolated bilinearly, which averages the straddling columns when
    /// the axis falls between voxels.
    pub fn from_field(field: &HarmonicField<T>) -> Result<Self> {
        let g = &field.grid;
        let line = VoxelGrid::from_parts([g.origin[0], T::zero(), T::zero()], g.delta_x, [g.dims[0], 1, 1], g.harmonic)?;
        let values = interpolate_values(g, &field.values, &line, Interpolation::Trilinear)?;
        Self::new(g.axis_coords(0), values, field.harmonic())
    }

    /// The incident field evaluated directly at `x`.
    pub fn from_incident(incident: &IncidentField<T>, x: Vec<T>) -> Result<Self> {
        let pts: Vec<_> = x.iter().map(|&v| [v, T::zero(), T::zero()]).collect();
        let values = incident.evaluate(&pts)?;
        Self::new(x, values, 1)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn abs(&self) -> Vec<T> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Nodes with `x_min <= x <= x_max`.
    pub fn restrict(&self, x_min: T, x_max: T) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.x[i] >= x_min && self.x[i] <= x_max).collect();
        Self::new(keep.iter().map(|&i| self.x[i]).collect(), keep.iter().map(|&i| self.values[i]).collect(), self.harmonic)
    }

    /// The nodes of `self` that coincide with a node of `other` to within a
    /// millionth of `other`'s spacing.
    pub fn shared_nodes(&self, other: &OnAxisProfile<T>) -> Result<Self> {
        let h = if other.len() > 1 { (other.x[other.len() - 1] - other.x[0]) / T::from_usize_lossy(other.len() - 1) } else { T::one() };
        let tol = h * T::lit(1e-6);
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let j = other.x.partition_point(|&v| v < self.x[i] - tol);
                j < other.len() && (other.x[j] - self.x[i]).abs() <= tol
            })
            .collect();
        if keep.is_empty() {
            return Err(Error::DegenerateField("profiles share no nodes".into()));
        }
        Self::new(keep.iter().map(|&i| self.x[i]).collect(), keep.iter().map(|&i| self.values[i]).collect(), self.harmonic)
    }

    /// Linear interpolation at `xs`. Points up to half a node spacing outside
    /// the profile take the end value; anything farther is an error.
    pub fn resample(&self, xs: &[T]) -> Result<Vec<Complex<T>>> {
        let n = self.len();
        let (lo, hi) = (self.x[0], self.x[n - 1]);
        let slack = if n > 1 { (hi - lo) / T::from_usize_lossy(n - 1) * T::lit(0.5) } else { T::zero() };
        xs.iter()
            .map(|&x| {
                if x < lo - slack || x > hi + slack {
                    return Err(Error::OutOfDomain(format!("x = {x} outside profile [{lo}, {hi}]")));
                }
                if n == 1 || x <= lo {
                    return Ok(self.values[if x <= lo { 0 } else { n - 1 }]);
                }
                if x >= hi {
                    return Ok(self.values[n - 1]);
                }
                let i = self.x.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
                let t = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
                Ok(self.values[i] * (T::one() - t) + self.values[i + 1] * t)
            })
            .collect()
    }
}

/// Midpoint-rule weights with cells bounded halfway between nodes.
fn node_weights<T: Real>(x: &[T]) -> Vec<f64> {
    let x: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i == 0 { x[1] - x[0] } else { x[i] - x[i - 1] };
            let right = if i == n - 1 { x[n - 1] - x[n - 2] } else { x[i + 1] - x[i] };
            0.5 * (left + right)
        })
        .collect()
}

fn weighted_norm<T: Real>(v: &[Complex<T>], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(z, wi)| z.norm_sqr().as_f64() * wi).sum::<f64>().sqrt()
}

/// `100 ‖p − p_ref‖ / ‖normalizer‖` with the reference nodes as quadrature points.
pub fn on_axis_error<T: Real>(
    p: &OnAxisProfile<T>,
    p_ref: &OnAxisProfile<T>,
    normalizer: &OnAxisProfile<T>,
) -> Result<f64> {
    let w = node_weights(&p_ref.x);
    let num = p.resample(&p_ref.x)?;
    let den = normalizer.resample(&p_ref.x)?;
    let diff: Vec<Complex<T>> = num.iter().zip(&p_ref.values).map(|(a, b)| a - b).collect();
    let d = weighted_norm(&den, &w);
    if !(d > 0.0) {
        return Err(Error::DegenerateField("normalizing profile has zero norm".into()));
    }
    Ok(100.0 * weighted_norm(&diff, &w) / d)
}

/// Relative L² norm of a profile on its own nodes, used for diagnostics.
pub fn profile_norm<T: Real>(p: &OnAxisProfile<T>) -> f64 {
    weighted_norm(&p.values, &node_weights(&p.x))
}

/// `Q(x) = log10(|f(x)| / max|f|)`; zeros map to `−∞`.
pub fn localisedness_map<T: Real>(f: &[Complex<T>]) -> Result<Vec<T>> {
    let max = crate::scalar::norm_inf(f);
    if !(max > T::zero()) {
        return Err(Error::DegenerateField("localisedness of an identically zero field".into()));
    }
    Ok(f.par_iter()
        .map(|z| {
            let m = z.norm();
            if m == T::zero() {
                T::neg_infinity()
            } else {
                (m / max).log10()
            }
        })
        .collect())
}

/// One point of a convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub harmonic: usize,
    /// `n_w`, `q0`, `fraction_x` or `fraction_yz`.
    pub control_variable: String,
    pub value: f64,
    pub error_percent: f64,
}

pub fn write_records_csv<W: Write>(records: &[ConvergenceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Least-squares slope and intercept of `log10(y)` against `log10(x)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("a log-log fit needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `n` values from `a` to `b`, equally spaced in logarithm.
pub fn geometric_levels(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Second harmonic on a grid computed from the incident field alone,
/// returned together with the on-axis profile of `p_1`.
pub fn second_harmonic<T: Real>(
    incident: &IncidentField<T>,
    medium: &Medium<T>,
    grid: &VoxelGrid<T>,
) -> Result<(HarmonicField<T>, HarmonicField<T>)> {
    let p1 = HarmonicField::new(grid.clone(), incident.evaluate_grid(grid)?, incident.wavenumber)?;
    let f0 = incident.transducer.f0;
    let omega = T::TAU() * f0;
    let source = rhs_source(2, &[&p1], medium, omega)?;
    let kernel = GreenKernel::new(grid, medium.wavenumber(f0, 2)?)?;
    let mut values = kernel.apply(&source.values)?;
    values.par_iter_mut().for_each(|z| *z = -*z);
    let p2 = HarmonicField::new(grid.clone(), values, kernel.wavenumber)?;
    Ok((p1, p2))
}

/// Quadrature-order study on a fixed box.
#[derive(Debug, Clone)]
pub struct QuadratureStudy<T> {
    pub incident: IncidentField<T>,
    pub medium: Medium<T>,
    /// Tiled exactly by every grid; each edge should be a whole number of
    /// second-harmonic wavelengths.
    pub domain: DomainBox<T>,
    pub n_w_values: Vec<usize>,
    pub n_w_ref: usize,
}

#[derive(Debug, Clone)]
pub struct QuadratureStudyResult {
    pub records: Vec<ConvergenceRecord>,
    pub slope: f64,
    pub intercept: f64,
}

impl<T: Real> QuadratureStudy<T> {
    pub fn grid(&self, n_w: usize) -> Result<VoxelGrid<T>> {
        let lambda2 = self.medium.wavelength(self.incident.transducer.f0, 2);
        VoxelGrid::aligned(self.domain, lambda2 / T::from_usize_lossy(n_w), 2)
    }

    /// Axis sample points shared by every resolution: the interior multiples
    /// of `λ₂/2` from the box face, which are voxel corners for every even `n_w`.
    pub fn axis_targets(&self) -> Vec<T> {
        let half = self.medium.wavelength(self.incident.transducer.f0, 2) * T::lit(0.5);
        let len = self.domain.max[0] - self.domain.min[0];
        let n = (len / half).round().to_usize().unwrap_or(0);
        (1..n.max(2)).map(|i| self.domain.min[0] + T::from_usize_lossy(i) * half).collect()
    }

    /// On-axis `p_2` at resolution `n_w`, from the voxel quadrature evaluated
    /// directly at points on the axis.
    pub fn profile(&self, n_w: usize) -> Result<OnAxisProfile<T>> {
        let grid = self.grid(n_w)?;
        let p1 = HarmonicField::new(grid.clone(), self.incident.evaluate_grid(&grid)?, self.incident.wavenumber)?;
        let f0 = self.incident.transducer.f0;
        let source = rhs_source(2, &[&p1], &self.medium, T::TAU() * f0)?;
        let xs = self.axis_targets();
        let targets: Vec<Point3<T>> = xs.iter().map(|&x| [x, T::zero(), T::zero()]).collect();
        let k2 = self.medium.wavenumber(f0, 2)?;
        let values = potential_at_points(&k2, &grid, &source.values, &targets)?
            .into_iter()
            .map(|z| -z)
            .collect();
        OnAxisProfile::new(xs, values, 2)
    }

    pub fn run(&self) -> Result<QuadratureStudyResult> {
        if self.n_w_values.iter().any(|&n| n >= self.n_w_ref) {
            return Err(Error::InvalidParameter("reference n_w must exceed every studied n_w".into()));
        }
        let reference = self.profile(self.n_w_ref)?;
        let mut records = Vec::with_capacity(self.n_w_values.len());
        for &n_w in &self.n_w_values {
            let p = self.profile(n_w)?;
            let e = on_axis_error(&p, &reference, &reference)?;
            log::info!("n_w = {n_w}: error {e:.4}%");
            records.push(ConvergenceRecord {
                harmonic: 2,
                control_variable: "n_w".into(),
                value: n_w as f64,
                error_percent: e,
            });
        }
        let x: Vec<f64> = records.iter().map(|r| r.value).collect();
        let y: Vec<f64> = records.iter().map(|r| r.error_percent).collect();
        let (slope, intercept) = loglog_fit(&x, &y)?;
        Ok(QuadratureStudyResult { records, slope, intercept })
    }
}

/// How the integration domain of each harmonic's source is cut down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkLevel {
    /// Keep the bounding box of `Q >= q0`.
    Threshold(f64),
    /// Fraction of the grid's extent in front of the focus, full width.
    FractionX(f64),
    /// Fraction of the grid's half-width, full length.
    FractionYz(f64),
}

impl ShrinkLevel {
    pub fn control(&self) -> (&'static str, f64) {
        match *self {
            Self::Threshold(q) => ("q0", q),
            Self::FractionX(f) => ("fraction_x", f),
            Self::FractionYz(f) => ("fraction_yz", f),
        }
    }
}

/// Harmonics on a single reference grid, used as the truth for shrink studies.
#[derive(Debug, Clone)]
pub struct ReferenceHarmonics<T> {
    pub fields: Vec<HarmonicField<T>>,
    pub medium: Medium<T>,
    pub focus_x: T,
}

impl<T: Real> ReferenceHarmonics<T> {
    fn f0(&self) -> T {
        self.fields[0].wavenumber.omega / T::TAU()
    }

    /// Source of harmonic `n` built from the reference lower harmonics.
    pub fn source(&self, n: usize) -> Result<HarmonicField<T>> {
        let refs: Vec<&HarmonicField<T>> = self.fields.iter().take(n - 1).collect();
        rhs_source(n, &refs, &self.medium, T::TAU() * self.f0())
    }

    fn shrunk_box(&self, source: &HarmonicField<T>, level: ShrinkLevel) -> Result<DomainBox<T>> {
        let full = source.grid.bounds();
        Ok(match level {
            ShrinkLevel::Threshold(q0) => crate::grid::shrink_domain_by_threshold(&source.grid, &source.values, T::lit(q0))?,
            ShrinkLevel::FractionX(f) => {
                let mut b = full;
                b.min[0] = self.focus_x - T::lit(f) * (self.focus_x - full.min[0]);
                b
            }
            ShrinkLevel::FractionYz(f) => {
                let mut b = full;
                for a in 1..3 {
                    b.min[a] = T::lit(f) * full.min[a];
                    b.max[a] = T::lit(f) * full.max[a];
                }
                b
            }
        })
    }

    /// On-axis `p_n` when its source is restricted to `level`'s box.
    pub fn shrunk_profile(&self, n: usize, level: ShrinkLevel, kernel: &GreenKernel<T>) -> Result<OnAxisProfile<T>> {
        let source = self.source(n)?;
        let b = self.shrunk_box(&source, level)?;
        let grid = &source.grid;
        let masked: Vec<Complex<T>> = source
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let [a, bb, c] = grid.coords(i);
                if b.contains(&grid.centre(a, bb, c)) {
                    *v
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            })
            .collect();
        let mut values = kernel.apply(&masked)?;
        values.par_iter_mut().for_each(|z| *z = -*z);
        OnAxisProfile::from_field(&HarmonicField::new(grid.clone(), values, kernel.wavenumber)?)
    }

    /// Error of every harmonic `2..=n` at every level, normalized by `‖p_1‖` on the axis.
    pub fn shrink_study(&self, levels: &[ShrinkLevel]) -> Result<Vec<ConvergenceRecord>> {
        let p1 = OnAxisProfile::from_field(&self.fields[0])?;
        let mut out = Vec::new();
        for n in 2..=self.fields.len() {
            let truth = OnAxisProfile::from_field(&self.fields[n - 1])?;
            let kernel = GreenKernel::new(&self.fields[n - 1].grid, self.fields[n - 1].wavenumber)?;
            for &level in levels {
                let p = self.shrunk_profile(n, level, &kernel)?;
                let (name, value) = level.control();
                out.push(ConvergenceRecord {
                    harmonic: n,
                    control_variable: name.into(),
                    value,
                    error_percent: on_axis_error(&p, &truth, &p1)?,
                });
            }
        }
        Ok(out)
    }

    /// Diagnostic `10 (‖p_n‖/‖p_1‖) √|Q0|` on the axis, in percent.
    pub fn trend_percent(&self, n: usize, q0: f64) -> Result<f64> {
        let p1 = profile_norm(&OnAxisProfile::from_field(&self.fields[0])?);
        let pn = profile_norm(&OnAxisProfile::from_field(&self.fields[n - 1])?);
        Ok(10.0 * pn / p1 * q0.abs().sqrt())
    }
}

/// Builds the reference harmonics by running the cascade with every harmonic on `grid`.
pub fn reference_harmonics<T: Real>(
    incident: &IncidentField<T>,
    medium: &Medium<T>,
    grid: &VoxelGrid<T>,
    n_harmonics: usize,
) -> Result<ReferenceHarmonics<T>> {
    if n_harmonics < 2 {
        return Err(Error::InvalidParameter("need at least two harmonics".into()));
    }
    let f0 = incident.transducer.f0;
    let omega = T::TAU() * f0;
    let mut fields = vec![HarmonicField::new(grid.clone(), incident.evaluate_grid(grid)?, incident.wavenumber)?];
    for n in 2..=n_harmonics {
        let refs: Vec<&HarmonicField<T>> = fields.iter().collect();
        let coef = medium.nonlinear_coefficient(omega) * T::from_usize_lossy(n * n);
        let products = quadratic_products(n, &refs, coef);
        let kernel = GreenKernel::new(grid, medium.wavenumber(f0, n)?)?;
        let mut values = kernel.apply(&products)?;
        values.par_iter_mut().for_each(|z| *z = -*z);
        fields.push(HarmonicField::new(grid.clone(), values, kernel.wavenumber)?);
    }
    Ok(ReferenceHarmonics {
        fields,
        medium: medium.clone(),
        focus_x: incident.transducer.focal_length,
    })
}

/// Smallest domain level such that it and every larger studied domain keep
/// the error below `limit` percent. Larger fractions and more negative `q0`
/// mean larger domains.
pub fn crossing_value(records: &[ConvergenceRecord], harmonic: usize, control: &str, limit: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.harmonic == harmonic && r.control_variable == control)
        .map(|r| (r.value, r.error_percent))
        .collect();
    if control == "q0" {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    } else {
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    let mut best = None;
    for (v, e) in pts {
        if e < limit {
            best = Some(v);
        } else {
            break;
        }
    }
    best
}
