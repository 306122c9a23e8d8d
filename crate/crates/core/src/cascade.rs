//! Sequential computation of the harmonics `p_2, …, p_n` on nested meshes.
//!
//! For each harmonic the lower harmonics are brought onto its grid, the
//! quadratic source is assembled and the volume potential applied:
//! `p_n = −V_{k_n}[f_n]` with
//! `f_n = (β ω² / (2 ρ0 c0⁴)) n² Σ_{m=1}^{n−1} p_m p_{n−m}`.

use std::time::{Duration, Instant};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{interpolate, HarmonicField, Interpolation, MeshPlan, VoxelGrid};
use crate::medium::Medium;
use crate::potential::{FftSizing, GreenKernel};
use crate::scalar::{czero, Real};
use crate::transducer::IncidentField;

/// Peak pressure beyond which the truncated cascade is no longer trusted, Pa.
pub const WEAK_NONLINEARITY_LIMIT: f64 = 15e6;

#[derive(Debug, Clone)]
pub struct CascadeConfig<T> {
    pub medium: Medium<T>,
    pub incident: IncidentField<T>,
    pub plan: MeshPlan<T>,
    pub n_harmonics: usize,
    pub interpolation: Interpolation,
    pub fft_sizing: FftSizing,
    /// Evaluate `p_1` from the monopole sum on every grid instead of only the first.
    pub recompute_incident: bool,
}

impl<T: Real> CascadeConfig<T> {
    pub fn new(medium: Medium<T>, incident: IncidentField<T>, plan: MeshPlan<T>) -> Self {
        let n_harmonics = plan.n_harmonics();
        Self {
            medium,
            incident,
            plan,
            n_harmonics,
            interpolation: Interpolation::default(),
            fft_sizing: FftSizing::default(),
            recompute_incident: false,
        }
    }

    pub fn n_w(&self) -> usize {
        self.plan.n_w
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_harmonics < 2 {
            return Err(Error::InvalidParameter("the cascade needs at least two harmonics".into()));
        }
        if self.plan.n_harmonics() < self.n_harmonics {
            return Err(Error::InvalidParameter(format!(
                "mesh plan covers {} harmonics, {} requested",
                self.plan.n_harmonics(),
                self.n_harmonics
            )));
        }
        let rel = ((self.plan.f0 - self.incident.transducer.f0) / self.plan.f0).abs();
        if rel > T::lit(1e-12) {
            return Err(Error::InvalidParameter("mesh plan and transducer disagree on f0".into()));
        }
        Ok(())
    }
}

/// Wall-clock cost of one harmonic, split the way the pipeline is staged.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct StageTimings {
    pub harmonic: usize,
    pub voxels: usize,
    pub meshing: Duration,
    pub interpolation: Duration,
    pub kernel: Duration,
    pub potential: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.meshing + self.interpolation + self.kernel + self.potential
    }
}

/// Renders timings as a fixed-width table, one row per harmonic.
pub fn timing_table(rows: &[StageTimings]) -> String {
    let mut s = format!(
        "{:>8} {:>14} {:>10} {:>16} {:>17} {:>12}\n",
        "harmonic", "voxels", "meshing_s", "interpolation_s", "evaluate_green_s", "compute_p_s"
    );
    for t in rows {
        s.push_str(&format!(
            "{:>8} {:>14} {:>10.3} {:>16.3} {:>17.3} {:>12.3}\n",
            t.harmonic,
            t.voxels,
            t.meshing.as_secs_f64(),
            t.interpolation.as_secs_f64(),
            t.kernel.as_secs_f64(),
            t.potential.as_secs_f64()
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct CascadeResult<T> {
    /// `p_1, …, p_n`; `p_1` lives on the grid of `p_2`.
    pub fields: Vec<HarmonicField<T>>,
    pub timings: Vec<StageTimings>,
    /// Iterative solves, one per harmonic; empty for a homogeneous medium.
    pub solves: Vec<SolveReport>,
    pub incident: IncidentField<T>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolveReport {
    pub harmonic: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl<T: Real> CascadeResult<T> {
    pub fn harmonic(&self, n: usize) -> Option<&HarmonicField<T>> {
        n.checked_sub(1).and_then(|i| self.fields.get(i))
    }

    pub fn n_harmonics(&self) -> usize {
        self.fields.len()
    }
}

/// Quadratic source of harmonic `n` from `lower = [p_1, …, p_{n−1}]`, all on one grid.
///
/// The result carries `k_n`; the harmonic itself is `−V_{k_n}` applied to it.
pub fn rhs_source<T: Real>(
    n: usize,
    lower: &[&HarmonicField<T>],
    medium: &Medium<T>,
    omega: T,
) -> Result<HarmonicField<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("no quadratic source for harmonic {n}")));
    }
    if lower.len() < n - 1 {
        return Err(Error::MissingHarmonic(lower.len() + 1));
    }
    let grid = &lower[0].grid;
    for (m, p) in lower.iter().take(n - 1).enumerate() {
        if p.harmonic() != m + 1 {
            return Err(Error::MissingHarmonic(m + 1));
        }
        if !p.grid.coincides(grid) {
            return Err(Error::GridMismatch(format!("p{} is not on the grid of p1", m + 1)));
        }
    }
    let coef = medium.nonlinear_coefficient(omega) * T::from_usize_lossy(n * n);
    let f0 = omega / T::TAU();
    let values = quadratic_products(n, lower, coef);
    HarmonicField::new(grid.clone(), values, medium.wavenumber(f0, n)?)
}

/// `coef Σ_{m=1}^{n−1} p_m p_{n−m}` pointwise, using the symmetry of the sum.
pub(crate) fn quadratic_products<T: Real>(n: usize, lower: &[&HarmonicField<T>], coef: T) -> Vec<Complex<T>> {
    let len = lower[0].values.len();
    let two = T::lit(2.0);
    (0..len)
        .into_par_iter()
        .map(|v| {
            let mut acc = czero::<T>();
            for m in 1..=(n - 1) / 2 {
                acc = acc + lower[m - 1].values[v] * lower[n - m - 1].values[v] * two;
            }
            if n.is_multiple_of(2) {
                let h = lower[n / 2 - 1].values[v];
                acc = acc + h * h;
            }
            acc * coef
        })
        .collect()
}

/// Runs the cascade up to `config.n_harmonics`.
pub fn run_cascade<T: Real>(config: &CascadeConfig<T>) -> Result<CascadeResult<T>> {
    config.validate()?;
    let omega = T::TAU() * config.plan.f0;
    let mut fields: Vec<HarmonicField<T>> = Vec::with_capacity(config.n_harmonics);
    let mut timings = Vec::with_capacity(config.n_harmonics - 1);

    for n in 2..=config.n_harmonics {
        let t0 = Instant::now();
        let grid = config.plan.mesh(n).ok_or(Error::MissingHarmonic(n))?.grid.clone();
        let kn = config.medium.wavenumber(config.plan.f0, n)?;
        let meshing = t0.elapsed();

        let t0 = Instant::now();
        let lower = lower_on_grid(config, &fields, &grid, n)?;
        if n == 2 {
            fields.push(lower[0].clone());
            check_peak(&lower[0]);
        }
        let interpolation = t0.elapsed();

        let t0 = Instant::now();
        let kernel = GreenKernel::with_sizing(&grid, kn, config.fft_sizing)?;
        let kernel_time = t0.elapsed();

        let t0 = Instant::now();
        let refs: Vec<&HarmonicField<T>> = lower.iter().collect();
        let source = rhs_source(n, &refs, &config.medium, omega)?;
        drop(lower);
        let mut values = kernel.apply(&source.values)?;
        values.par_iter_mut().for_each(|z| *z = -*z);
        let potential = t0.elapsed();

        log::info!(
            "harmonic {n}: {} voxels, max |p| = {:.4e} Pa",
            grid.len(),
            crate::scalar::norm_inf(&values).as_f64()
        );
        timings.push(StageTimings {
            harmonic: n,
            voxels: grid.len(),
            meshing,
            interpolation,
            kernel: kernel_time,
            potential,
        });
        fields.push(HarmonicField::new(grid, values, kn)?);
    }
    Ok(CascadeResult { fields, timings, solves: Vec::new(), incident: config.incident.clone() })
}

pub(crate) fn check_peak<T: Real>(p1: &HarmonicField<T>) {
    let peak = p1.max_abs().as_f64();
    if peak > WEAK_NONLINEARITY_LIMIT {
        log::warn!(
            "peak fundamental pressure {:.2} MPa exceeds {:.0} MPa; the truncated cascade may be inaccurate",
            peak / 1e6,
            WEAK_NONLINEARITY_LIMIT / 1e6
        );
    }
}

/// `p_1, …, p_{n−1}` on `grid`. `p_1` comes from the monopole sum for the
/// first grid (or always, when configured); everything else is interpolated.
pub(crate) fn lower_on_grid<T: Real>(
    config: &CascadeConfig<T>,
    fields: &[HarmonicField<T>],
    grid: &VoxelGrid<T>,
    n: usize,
) -> Result<Vec<HarmonicField<T>>> {
    let mut out = Vec::with_capacity(n - 1);
    for m in 1..n {
        let p = if m == 1 && (fields.is_empty() || config.recompute_incident) {
            let values = config.incident.evaluate_grid(grid)?;
            HarmonicField::new(grid.clone(), values, config.incident.wavenumber)?
        } else {
            let src = fields.get(m - 1).ok_or(Error::MissingHarmonic(m))?;
            interpolate(src, grid, config.interpolation)?
        };
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::plan_nested_meshes;
    use crate::transducer::{ApertureDisc, TransducerSpec};

    fn field(grid: &VoxelGrid<f64>, n: usize, seed: f64) -> HarmonicField<f64> {
        let values = (0..grid.len())
            .map(|i| Complex::new((seed * i as f64 + n as f64).sin(), (seed + 0.1 * i as f64).cos()))
            .collect();
        let k = Wavenumber { k: Complex::new(100.0 * n as f64, 0.0), harmonic: n, omega: 0.0 };
        HarmonicField::new(grid.clone(), values, k).unwrap()
    }

    use crate::medium::Wavenumber;

    #[test]
    fn source_prefactors() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [3, 2, 2], 0).unwrap();
        let w = Medium::<f64>::water();
        let omega = std::f64::consts::TAU * 1.1e6;
        let b = w.nonlinear_coefficient(omega);
        let p: Vec<HarmonicField<f64>> = (1..=4).map(|n| field(&grid, n, 0.3 + n as f64)).collect();
        let refs: Vec<&HarmonicField<f64>> = p.iter().collect();
        for v in 0..grid.len() {
            let [p1, p2, p3, p4] = [0, 1, 2, 3].map(|i| p[i].values[v]);
            let expect = [
                p1 * p1 * (4.0 * b),
                p1 * p2 * (18.0 * b),
                (p2 * p2 + p1 * p3 * 2.0) * (16.0 * b),
                (p1 * p4 + p2 * p3) * (50.0 * b),
            ];
            for n in 2..=5 {
                let f = rhs_source(n, &refs, &w, omega).unwrap();
                let e = expect[n - 2];
                assert!((f.values[v] - e).norm() <= 1e-14 * e.norm(), "n = {n}");
                assert_eq!(f.harmonic(), n);
            }
        }
    }

    #[test]
    fn linear_medium_has_no_source() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [2, 2, 2], 0).unwrap();
        let m = Medium::new("lin", 1000.0, 1500.0, 0.0, 0.0, 1.0).unwrap();
        let p1 = field(&grid, 1, 0.7);
        let f = rhs_source(2, &[&p1], &m, 1e6).unwrap();
        assert!(f.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn source_errors() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [2, 2, 2], 0).unwrap();
        let w = Medium::<f64>::water();
        let p1 = field(&grid, 1, 0.7);
        assert!(matches!(rhs_source(3, &[&p1], &w, 1e6), Err(Error::MissingHarmonic(2))));
        let other = VoxelGrid::from_parts([0.0; 3], 2e-3, [2, 2, 2], 0).unwrap();
        let p2 = field(&other, 2, 0.1);
        assert!(matches!(rhs_source(3, &[&p1, &p2], &w, 1e6), Err(Error::GridMismatch(_))));
        assert!(rhs_source(1, &[&p1], &w, 1e6).is_err());
    }

    fn tiny_config(power: f64) -> CascadeConfig<f64> {
        let medium = Medium::<f64>::water();
        let tr = TransducerSpec::h131().with_frequency(0.12e6).with_power(power).with_points(256).build().unwrap();
        let disc = ApertureDisc::for_transducer(&tr, 5e-4);
        let incident = tr.incident_field(&medium, &disc).unwrap();
        let plan = plan_nested_meshes(&tr, &medium, 10.2e-3, 4, 3).unwrap();
        CascadeConfig::new(medium, incident, plan)
    }

    #[test]
    fn cascade_runs_and_orders_fields() {
        let cfg = tiny_config(50.0);
        let res = run_cascade(&cfg).unwrap();
        assert_eq!(res.n_harmonics(), 3);
        for (i, f) in res.fields.iter().enumerate() {
            assert_eq!(f.harmonic(), i + 1);
        }
        assert!(res.fields[0].grid.coincides(&res.fields[1].grid));
        assert!(res.fields[2].grid.coincides(&cfg.plan.mesh(3).unwrap().grid));
        assert_eq!(res.timings.len(), 2);
        assert!(res.fields[1].max_abs() > 0.0 && res.fields[1].max_abs() < res.fields[0].max_abs());
        let table = timing_table(&res.timings);
        assert!(table.contains("interpolation_s") && table.lines().count() == 3);
    }

    #[test]
    fn cascade_is_homogeneous_in_source_amplitude() {
        let a = run_cascade(&tiny_config(10.0)).unwrap();
        let b = run_cascade(&tiny_config(40.0)).unwrap();
        for n in 1..=3 {
            let s = 2f64.powi(n as i32);
            let pa = &a.fields[n - 1].values;
            let pb = &b.fields[n - 1].values;
            let diff: f64 = pa.iter().zip(pb).map(|(x, y)| (x * s - y).norm_sqr()).sum::<f64>().sqrt();
            assert!(diff <= 1e-10 * crate::scalar::norm2(pb), "harmonic {n}");
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let cfg = tiny_config(20.0);
        let a = run_cascade(&cfg).unwrap();
        let b = run_cascade(&cfg).unwrap();
        for (x, y) in a.fields.iter().zip(&b.fields) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn rejects_short_plans() {
        let mut cfg = tiny_config(20.0);
        cfg.n_harmonics = 4;
        assert!(run_cascade(&cfg).is_err());
        cfg.n_harmonics = 1;
        assert!(run_cascade(&cfg).is_err());
    }
}
