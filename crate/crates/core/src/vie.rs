//! Harmonics in media with spatially varying sound speed and nonlinearity.
//!
//! With `k̄_n` the background wavenumber and `V̄_n` its volume potential,
//! each harmonic solves the second-kind equation
//! `p_n − V̄_n[(k_n(x)² − k̄_n²) p_n] = g_n`, where `g_1` is the incident
//! field and `g_n = −c_n(x) V̄_n[Σ p_m p_{n−m}]` for `n ≥ 2` with
//! `c_n(x) = n² β(x) ω² / (2 ρ0 c(x)⁴)` applied after the convolution.
//! Density is taken to be the background value everywhere.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{check_peak, quadratic_products, CascadeConfig, CascadeResult, SolveReport, StageTimings};
use crate::error::{Error, Result};
use crate::grid::{interpolate, HarmonicField, VoxelGrid};
use crate::krylov::{gmres, GmresOptions};
use crate::medium::{Medium, NEPER_PER_DB};
use crate::potential::GreenKernel;
use crate::scalar::{czero, Real};

/// Material parameters sampled on one voxel grid.
#[derive(Debug, Clone)]
pub struct MediumMap<T> {
    pub background: Medium<T>,
    pub grid: VoxelGrid<T>,
    pub sound_speed: Vec<T>,
    pub beta: Vec<T>,
    pub alpha0: Vec<T>,
    pub eta: Vec<T>,
    /// Voxels whose material differs from the background, ascending.
    pub support: Vec<usize>,
}

impl<T: Real> MediumMap<T> {
    pub fn homogeneous(background: Medium<T>, grid: &VoxelGrid<T>) -> Self {
        let n = grid.len();
        Self {
            sound_speed: vec![background.c0; n],
            beta: vec![background.beta; n],
            alpha0: vec![background.alpha0; n],
            eta: vec![background.eta; n],
            background,
            grid: grid.clone(),
            support: Vec::new(),
        }
    }

    /// Overwrites voxel `idx` with `c`, `β` and the attenuation law of `m`.
    pub fn set(&mut self, idx: usize, c: T, beta: T, alpha0: T, eta: T) {
        self.sound_speed[idx] = c;
        self.beta[idx] = beta;
        self.alpha0[idx] = alpha0;
        self.eta[idx] = eta;
        let bg = &self.background;
        let differs = c != bg.c0 || beta != bg.beta || alpha0 != bg.alpha0 || eta != bg.eta;
        match self.support.binary_search(&idx) {
            Ok(pos) if !differs => {
                self.support.remove(pos);
            }
            Err(pos) if differs => self.support.insert(pos, idx),
            _ => {}
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Local wavenumber of harmonic `n` at voxel `idx` for fundamental `omega`.
    pub fn wavenumber_at(&self, idx: usize, n: usize, omega: T) -> Complex<T> {
        let nf = T::from_usize_lossy(n);
        let re = nf * omega / self.sound_speed[idx];
        let a0 = self.alpha0[idx];
        let im = if a0 == T::zero() {
            T::zero()
        } else {
            let mhz = nf * omega / T::TAU() / T::lit(1e6);
            a0 * mhz.powf(self.eta[idx]) * T::lit(NEPER_PER_DB)
        };
        Complex::new(re, im)
    }

    /// `k_n(x)² − k̄_n²` at every voxel; exactly zero off the support.
    pub fn contrast(&self, n: usize, omega: T) -> Result<Vec<Complex<T>>> {
        let kbar = self.background.wavenumber(omega / T::TAU(), n)?.k;
        let kbar2 = kbar * kbar;
        let mut out = vec![czero::<T>(); self.len()];
        for &i in &self.support {
            let k = self.wavenumber_at(i, n, omega);
            out[i] = k * k - kbar2;
        }
        Ok(out)
    }

    /// `n² β(x) ω² / (2 ρ0 c(x)⁴)` at every voxel.
    pub fn nonlinear_coefficient(&self, n: usize, omega: T) -> Vec<T> {
        let scale = T::from_usize_lossy(n * n) * omega * omega / (T::lit(2.0) * self.background.rho0);
        self.sound_speed
            .par_iter()
            .zip(self.beta.par_iter())
            .map(|(&c, &b)| {
                let c2 = c * c;
                scale * b / (c2 * c2)
            })
            .collect()
    }
}

/// Raster of `(c, β)` pairs with a TOML header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RasterHeader {
    pub dims: [usize; 3],
    pub spacing: f64,
    /// Centre of voxel `(0, 0, 0)`, m.
    pub origin: [f64; 3],
    /// Binary payload, relative to the header's directory.
    pub data: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    pub header: RasterHeader,
    pub sound_speed: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RasterMap {
    pub fn load(header_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(header_path)?;
        let header: RasterHeader = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", header_path.display())))?;
        if header.dims.contains(&0) || !(header.spacing > 0.0) {
            return Err(Error::Config(format!("{}: empty raster", header_path.display())));
        }
        let dir = header_path.parent().unwrap_or(Path::new("."));
        let bytes = std::fs::read(dir.join(&header.data))?;
        let n = header.dims.iter().product::<usize>();
        if bytes.len() != 16 * n {
            return Err(Error::Config(format!(
                "{}: expected {} bytes of (c, beta) pairs, found {}",
                header.data.display(),
                16 * n,
                bytes.len()
            )));
        }
        let mut sound_speed = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for pair in bytes.chunks_exact(16) {
            sound_speed.push(f64::from_le_bytes(pair[..8].try_into().expect("8 bytes")));
            beta.push(f64::from_le_bytes(pair[8..].try_into().expect("8 bytes")));
        }
        if sound_speed.iter().any(|c| !(*c > 0.0)) || beta.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Config(format!("{}: non-physical values", header.data.display())));
        }
        Ok(Self { header, sound_speed, beta })
    }

    /// Writes the header and its payload next to it.
    pub fn save(&self, header_path: &Path) -> Result<()> {
        let dir = header_path.parent().unwrap_or(Path::new("."));
        let mut bytes = Vec::with_capacity(16 * self.sound_speed.len());
        for (c, b) in self.sound_speed.iter().zip(&self.beta) {
            bytes.extend_from_slice(&c.to_le_bytes());
            bytes.extend_from_slice(&b.to_le_bytes());
        }
        std::fs::write(dir.join(&self.header.data), bytes)?;
        let text = toml::to_string(&self.header).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(header_path, text)?;
        Ok(())
    }

    /// Index of the raster voxel containing `p`, if any.
    fn locate(&self, p: [f64; 3]) -> Option<usize> {
        let h = &self.header;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let u = ((p[a] - h.origin[a]) / h.spacing + 0.5).floor();
            if u < 0.0 || u >= h.dims[a] as f64 {
                return None;
            }
            idx[a] = u as usize;
        }
        Some(idx[0] + h.dims[0] * (idx[1] + h.dims[1] * idx[2]))
    }
}

/// Where the material map comes from.
#[derive(Debug, Clone)]
pub enum MediumMapSource<T> {
    Homogeneous,
    /// Layer `|x − centre| < thickness/2` filled with `inclusion` (density excepted).
    Slab { centre: T, thickness: T, inclusion: Medium<T> },
    /// Nearest-voxel sampling of a raster; attenuation follows the background and
    /// points outside the raster take background values.
    Raster(RasterMap),
}

impl<T: Real> MediumMapSource<T> {
    pub fn sample(&self, background: &Medium<T>, grid: &VoxelGrid<T>) -> Result<MediumMap<T>> {
        let mut map = MediumMap::homogeneous(background.clone(), grid);
        let [nx, ny, nz] = grid.dims;
        match self {
            Self::Homogeneous => {}
            Self::Slab { centre, thickness, inclusion } => {
                if !(*thickness > T::zero()) {
                    return Err(Error::InvalidParameter("slab thickness must be positive".into()));
                }
                let half = *thickness / T::lit(2.0);
                let xs = grid.axis_coords(0);
                for k in 0..nz {
                    for j in 0..ny {
                        for (i, &x) in xs.iter().enumerate() {
                            if (x - *centre).abs() < half {
                                map.set(
                                    grid.index(i, j, k),
                                    inclusion.c0,
                                    inclusion.beta,
                                    inclusion.alpha0,
                                    inclusion.eta,
                                );
                            }
                        }
                    }
                }
            }
            Self::Raster(raster) => {
                for k in 0..nz {
                    for j in 0..ny {
                        for i in 0..nx {
                            let p = grid.centre(i, j, k).map(|v| v.as_f64());
                            if let Some(r) = raster.locate(p) {
                                map.set(
                                    grid.index(i, j, k),
                                    T::lit(raster.sound_speed[r]),
                                    T::lit(raster.beta[r]),
                                    background.alpha0,
                                    background.eta,
                                );
                            }
                        }
                    }
                }
            }
        }
        Ok(map)
    }
}

fn check_same_grid<T: Real>(map: &MediumMap<T>, grid: &VoxelGrid<T>, kernel: &GreenKernel<T>) -> Result<()> {
    if !map.grid.coincides(grid) || !kernel.matches(grid) {
        return Err(Error::GridMismatch("field, medium map and kernel must share one grid".into()));
    }
    Ok(())
}

fn apply_with_contrast<T: Real>(
    kernel: &GreenKernel<T>,
    contrast: &[Complex<T>],
    p: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let scattered: Vec<Complex<T>> = contrast.par_iter().zip(p.par_iter()).map(|(c, v)| c * v).collect();
    let mut out = kernel.apply(&scattered)?;
    out.par_iter_mut().zip(p.par_iter()).for_each(|(o, v)| *o = v - *o);
    Ok(out)
}

/// `p − V̄[(k_n² − k̄_n²) p]` with `n` and `k̄_n` taken from the kernel.
pub fn vie_operator_apply<T: Real>(
    field: &HarmonicField<T>,
    map: &MediumMap<T>,
    kernel: &GreenKernel<T>,
) -> Result<HarmonicField<T>> {
    check_same_grid(map, &field.grid, kernel)?;
    let kb = kernel.wavenumber;
    let contrast = map.contrast(kb.harmonic, kb.omega)?;
    let values = apply_with_contrast(kernel, &contrast, &field.values)?;
    HarmonicField::new(field.grid.clone(), values, kb)
}

#[derive(Debug, Clone)]
pub struct VieSolution<T> {
    pub field: HarmonicField<T>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Solves the second-kind equation for the harmonic of `kernel` with right-hand side `rhs`.
pub fn solve_vie<T: Real>(
    rhs: &HarmonicField<T>,
    map: &MediumMap<T>,
    kernel: &GreenKernel<T>,
    opts: GmresOptions,
) -> Result<VieSolution<T>> {
    check_same_grid(map, &rhs.grid, kernel)?;
    let kb = kernel.wavenumber;
    let contrast = map.contrast(kb.harmonic, kb.omega)?;
    let out = gmres(|v| apply_with_contrast(kernel, &contrast, v), &rhs.values, None, opts)?;
    Ok(VieSolution {
        field: HarmonicField::new(rhs.grid.clone(), out.solution, kb)?,
        iterations: out.iterations,
        residual: out.residual,
        history: out.history,
    })
}

/// The cascade in an inhomogeneous medium; `source` is sampled onto every planned grid.
pub fn run_cascade_inhomogeneous<T: Real>(
    config: &CascadeConfig<T>,
    source: &MediumMapSource<T>,
    opts: GmresOptions,
) -> Result<CascadeResult<T>> {
    config.validate()?;
    let omega = T::TAU() * config.plan.f0;
    let mut fields: Vec<HarmonicField<T>> = Vec::with_capacity(config.n_harmonics);
    let mut timings = Vec::new();
    let mut solves = Vec::new();

    for n in 2..=config.n_harmonics {
        let t0 = Instant::now();
        let grid = config.plan.mesh(n).ok_or(Error::MissingHarmonic(n))?.grid.clone();
        let map = source.sample(&config.medium, &grid)?;
        let kn = config.medium.wavenumber(config.plan.f0, n)?;
        let meshing = t0.elapsed();

        let mut interpolation = std::time::Duration::ZERO;
        let mut kernel_time = std::time::Duration::ZERO;
        let mut potential = std::time::Duration::ZERO;

        if n == 2 || config.recompute_incident {
            let t0 = Instant::now();
            let pinc = config.incident.evaluate_grid(&grid)?;
            let pinc = HarmonicField::new(grid.clone(), pinc, config.incident.wavenumber)?;
            interpolation += t0.elapsed();
            let t0 = Instant::now();
            let k1 = GreenKernel::with_sizing(&grid, config.incident.wavenumber, config.fft_sizing)?;
            kernel_time += t0.elapsed();
            let t0 = Instant::now();
            let sol = solve_vie(&pinc, &map, &k1, opts)?;
            potential += t0.elapsed();
            log::info!("p1 on grid {n}: {} GMRES iterations, residual {:.2e}", sol.iterations, sol.residual);
            if n == 2 {
                solves.push(SolveReport { harmonic: 1, iterations: sol.iterations, residual: sol.residual });
                check_peak(&sol.field);
                fields.push(sol.field);
            } else {
                fields[0] = sol.field;
            }
        }

        let t0 = Instant::now();
        let lower: Vec<HarmonicField<T>> = (1..n)
            .map(|m| interpolate(&fields[m - 1], &grid, config.interpolation))
            .collect::<Result<_>>()?;
        interpolation += t0.elapsed();

        let t0 = Instant::now();
        let kernel = GreenKernel::with_sizing(&grid, kn, config.fft_sizing)?;
        kernel_time += t0.elapsed();

        let t0 = Instant::now();
        let refs: Vec<&HarmonicField<T>> = lower.iter().collect();
        let products = quadratic_products(n, &refs, T::one());
        drop(refs);
        drop(lower);
        let coef = map.nonlinear_coefficient(n, omega);
        let mut rhs = kernel.apply(&products)?;
        rhs.par_iter_mut().zip(coef.par_iter()).for_each(|(r, &c)| *r = -(*r * c));
        let rhs = HarmonicField::new(grid.clone(), rhs, kn)?;
        let sol = solve_vie(&rhs, &map, &kernel, opts)?;
        potential += t0.elapsed();
        log::info!("p{n}: {} GMRES iterations, residual {:.2e}", sol.iterations, sol.residual);

        solves.push(SolveReport { harmonic: n, iterations: sol.iterations, residual: sol.residual });
        timings.push(StageTimings { harmonic: n, voxels: grid.len(), meshing, interpolation, kernel: kernel_time, potential });
        fields.push(sol.field);
    }
    Ok(CascadeResult { fields, timings, solves, incident: config.incident.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::run_cascade;
    use crate::grid::plan_nested_meshes;
    use crate::medium::Wavenumber;
    use crate::potential::{green_at, self_weight};
    use crate::scalar::{distance, norm2};
    use crate::transducer::{ApertureDisc, TransducerSpec};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_setup(dims: [usize; 3], seed: u64, amplitude: f64) -> (MediumMap<f64>, GreenKernel<f64>) {
        let w = Medium::<f64>::water();
        let f0 = 0.5e6;
        let k = w.wavenumber(f0, 1).unwrap();
        let grid = VoxelGrid::from_parts([0.0; 3], k.wavelength() / 6.0, dims, 1).unwrap();
        let mut map = MediumMap::homogeneous(w, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..grid.len() {
            let c = 1480.0 * (1.0 + amplitude * rng.random_range(-1.0..1.0));
            map.set(i, c, 3.5, 0.2, 2.0);
        }
        let kernel = GreenKernel::new(&grid, k).unwrap();
        (map, kernel)
    }

    fn random_field(grid: &VoxelGrid<f64>, k: Wavenumber<f64>, seed: u64) -> HarmonicField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len()).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        HarmonicField::new(grid.clone(), v, k).unwrap()
    }

    #[test]
    fn zero_contrast_is_identity() {
        let (mut map, kernel) = small_setup([6, 5, 4], 1, 0.0);
        for i in 0..map.len() {
            map.set(i, 1480.0, 3.5, 0.2, 2.0);
        }
        assert!(map.support.is_empty());
        let p = random_field(&map.grid, kernel.wavenumber, 2);
        let out = vie_operator_apply(&p, &map, &kernel).unwrap();
        assert_eq!(out.values, p.values);
        let sol = solve_vie(&p, &map, &kernel, GmresOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.residual < 1e-14);
    }

    #[test]
    fn single_voxel_contrast() {
        let (mut map, kernel) = small_setup([5, 5, 5], 1, 0.0);
        for i in 0..map.len() {
            map.set(i, 1480.0, 3.5, 0.2, 2.0);
        }
        let s = map.grid.index(2, 1, 3);
        map.set(s, 1600.0, 3.5, 0.2, 2.0);
        assert_eq!(map.support, vec![s]);
        let p = random_field(&map.grid, kernel.wavenumber, 3);
        let out = vie_operator_apply(&p, &map, &kernel).unwrap();
        let c = map.contrast(1, kernel.wavenumber.omega).unwrap()[s];
        let xs = map.grid.centre(2, 1, 3);
        let vol = map.grid.delta_x.powi(3);
        for (i, x) in map.grid.centres().iter().enumerate() {
            let w = if i == s { kernel.self_weight() } else { green_at(distance(x, &xs), kernel.wavenumber.k) * vol };
            let expect = p.values[i] - w * c * p.values[s];
            assert!((out.values[i] - expect).norm() < 1e-13 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn matches_dense_assembly() {
        let (map, kernel) = small_setup([7, 6, 5], 4, 0.05);
        let p = random_field(&map.grid, kernel.wavenumber, 5);
        let fast = vie_operator_apply(&p, &map, &kernel).unwrap();
        let contrast = map.contrast(1, kernel.wavenumber.omega).unwrap();
        let centres = map.grid.centres();
        let sw = self_weight(kernel.wavenumber.k, map.grid.delta_x).unwrap();
        let vol = map.grid.delta_x.powi(3);
        let mut worst: f64 = 0.0;
        for (i, xi) in centres.iter().enumerate() {
            let mut acc = p.values[i];
            for (j, xj) in centres.iter().enumerate() {
                let w = if i == j { sw } else { green_at(distance(xi, xj), kernel.wavenumber.k) * vol };
                acc -= w * contrast[j] * p.values[j];
            }
            worst = worst.max((fast.values[i] - acc).norm());
        }
        assert!(worst < 1e-12 * crate::scalar::norm_inf(&fast.values));
    }

    #[test]
    fn weak_contrast_agrees_with_born() {
        let (map, kernel) = small_setup([8, 8, 8], 6, 1e-3);
        let rhs = random_field(&map.grid, kernel.wavenumber, 7);
        let sol = solve_vie(&rhs, &map, &kernel, GmresOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let contrast = map.contrast(1, kernel.wavenumber.omega).unwrap();
        let scattered: Vec<Complex<f64>> = contrast.iter().zip(&rhs.values).map(|(c, v)| c * v).collect();
        let born: Vec<Complex<f64>> =
            rhs.values.iter().zip(kernel.apply(&scattered).unwrap()).map(|(r, s)| r + s).collect();
        let first = norm2(&sol.field.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect::<Vec<_>>());
        let err = norm2(&sol.field.values.iter().zip(&born).map(|(a, b)| a - b).collect::<Vec<_>>());
        let scale = norm2(&rhs.values);
        // first-order term is O(contrast), the Born remainder O(contrast²)
        assert!(first / scale > 1e-4 && first / scale < 1e-1, "{}", first / scale);
        assert!(err / scale < 10.0 * (first / scale).powi(2), "{} vs {}", err / scale, first / scale);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (map, kernel) = small_setup([4, 4, 4], 1, 0.01);
        let other = VoxelGrid::from_parts([0.0; 3], map.grid.delta_x, [4, 4, 5], 1).unwrap();
        let p = random_field(&other, kernel.wavenumber, 1);
        assert!(matches!(vie_operator_apply(&p, &map, &kernel), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn slab_and_raster_sampling() {
        let w = Medium::<f64>::water();
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [10, 3, 2], 1).unwrap();
        let slab = MediumMapSource::Slab { centre: 4.5e-3, thickness: 4e-3, inclusion: Medium::kidney() };
        let map = slab.sample(&w, &grid).unwrap();
        assert_eq!(map.support.len(), 4 * 3 * 2);
        assert_eq!(map.sound_speed[grid.index(3, 1, 1)], 1570.0);
        assert_eq!(map.sound_speed[grid.index(1, 1, 1)], 1480.0);
        assert_eq!(map.alpha0[grid.index(5, 0, 0)], 10.0);

        let dir = tempfile::tempdir().unwrap();
        let header = RasterHeader { dims: [2, 1, 1], spacing: 2e-3, origin: [1e-3, 0.0, 0.0], data: "m.bin".into() };
        let raster = RasterMap { header, sound_speed: vec![1500.0, 1600.0], beta: vec![4.0, 5.0] };
        let path = dir.path().join("m.toml");
        raster.save(&path).unwrap();
        let loaded = RasterMap::load(&path).unwrap();
        assert_eq!(loaded, raster);
        let map = MediumMapSource::Raster(loaded).sample(&w, &grid).unwrap();
        assert_eq!(map.sound_speed[grid.index(0, 0, 0)], 1500.0);
        assert_eq!(map.sound_speed[grid.index(2, 0, 0)], 1600.0);
        assert_eq!(map.beta[grid.index(3, 0, 0)], 5.0);
        assert_eq!(map.sound_speed[grid.index(0, 2, 0)], 1480.0);
        assert_eq!(map.sound_speed[grid.index(6, 0, 0)], 1480.0);

        std::fs::write(dir.path().join("m.bin"), [0u8; 8]).unwrap();
        assert!(matches!(RasterMap::load(&path), Err(Error::Config(_))));
    }

    fn tiny_config(beta: f64) -> CascadeConfig<f64> {
        let medium = Medium::new("w", 1000.0, 1480.0, beta, 0.2, 2.0).unwrap();
        let tr = TransducerSpec::h131().with_frequency(0.12e6).with_power(30.0).with_points(256).build().unwrap();
        let disc = ApertureDisc::for_transducer(&tr, 5e-4);
        let incident = tr.incident_field(&medium, &disc).unwrap();
        let plan = plan_nested_meshes(&tr, &medium, 10.2e-3, 4, 3).unwrap();
        CascadeConfig::new(medium, incident, plan)
    }

    #[test]
    fn homogeneous_limit_reproduces_cascade() {
        let cfg = tiny_config(3.5);
        let a = run_cascade(&cfg).unwrap();
        let opts = GmresOptions { tol: 1e-8, ..Default::default() };
        let b = run_cascade_inhomogeneous(&cfg, &MediumMapSource::Homogeneous, opts).unwrap();
        assert_eq!(b.solves.len(), 3);
        for (x, y) in a.fields.iter().zip(&b.fields) {
            let d: Vec<Complex<f64>> = x.values.iter().zip(&y.values).map(|(p, q)| p - q).collect();
            assert!(norm2(&d) <= 1e-12 * norm2(&x.values));
        }
    }

    #[test]
    fn linear_medium_scatters_without_harmonics() {
        let cfg = tiny_config(0.0);
        let inclusion = Medium { beta: 0.0, ..Medium::kidney() };
        let slab = MediumMapSource::Slab { centre: 35e-3, thickness: 10e-3, inclusion };
        let opts = GmresOptions { tol: 1e-8, ..Default::default() };
        let res = run_cascade_inhomogeneous(&cfg, &slab, opts).unwrap();
        assert!(res.fields[1..].iter().all(|f| f.max_abs() == 0.0));
        let inc = cfg.incident.evaluate_grid(&res.fields[0].grid).unwrap();
        let d: Vec<Complex<f64>> = inc.iter().zip(&res.fields[0].values).map(|(p, q)| p - q).collect();
        assert!(norm2(&d) > 1e-3 * norm2(&inc));
        assert!(res.solves.iter().all(|s| s.residual <= 1e-8));
    }
}
