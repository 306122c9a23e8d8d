//! Helmholtz volume potential on a voxel grid.
//!
//! The discrete operator is `u_i = Σ_j w_ij f_j` with the midpoint weight
//! `δx³ G_k(x_i, x_j)` off the diagonal and the integral of `G_k` over the
//! equal-volume sphere on it. It is block-Toeplitz, so it is applied by
//! circulant embedding and FFT. No sign or physical constant is folded in.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{smooth_size, Fft3};
use crate::grid::{HarmonicField, VoxelGrid};
use crate::medium::Wavenumber;
use crate::scalar::{czero, distance, Point3, Real};

/// Largest grid accepted by [`direct_potential_oracle`].
pub const DIRECT_LIMIT: usize = 100_000;

/// `e^{ik|x−y|} / (4π|x−y|)`.
pub fn green_function<T: Real>(x: &Point3<T>, y: &Point3<T>, k: &Wavenumber<T>) -> Result<Complex<T>> {
    let r = distance(x, y);
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("Green's function is singular at x = y".into()));
    }
    Ok(green_at(r, k.k))
}

#[inline]
pub(crate) fn green_at<T: Real>(r: T, k: Complex<T>) -> Complex<T> {
    let (s, c) = (k.re * r).sin_cos();
    let m = (-k.im * r).exp() / (T::lit(4.0) * T::PI() * r);
    Complex::new(c * m, s * m)
}

/// Radius of the sphere with the volume of a cube of edge `delta_x`.
pub fn equal_volume_radius<T: Real>(delta_x: T) -> T {
    delta_x * (T::lit(3.0) / (T::lit(4.0) * T::PI())).cbrt()
}

/// `∫_{|y|<a} G_k(0, y) dy = (e^{ika}(1 − ika) − 1)/k²`, `a` the equal-volume radius.
pub fn self_weight<T: Real>(k: Complex<T>, delta_x: T) -> Result<Complex<T>> {
    if !(delta_x > T::zero()) {
        return Err(Error::InvalidParameter("voxel size must be positive".into()));
    }
    let a = equal_volume_radius(delta_x);
    let z = Complex::new(T::zero(), T::one()) * k * a;
    if z.norm() < T::lit(0.1) {
        // a² Σ_{n≥2} (n−1)/n! z^{n−2}; avoids cancellation for small ka.
        let mut term = Complex::new(T::one(), T::zero()); // z^{n-2}/n! * n! bookkeeping below
        let mut fact = T::lit(2.0);
        let mut sum = czero::<T>();
        for n in 2..30usize {
            if n > 2 {
                term = term * z;
                fact = fact * T::from_usize_lossy(n);
            }
            sum = sum + term * (T::from_usize_lossy(n - 1) / fact);
        }
        return Ok(sum * (a * a));
    }
    let one = Complex::new(T::one(), T::zero());
    Ok((z.exp() * (one - z) - one) / (k * k))
}

/// How the circulant embedding is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FftSizing {
    /// Exactly `2N` per axis.
    #[default]
    Exact,
    /// Smallest size `>= 2N − 1` with factors in {2, 3, 5, 7}.
    Smooth,
}

/// Circulant-embedded quadrature kernel and its cached spectrum.
pub struct GreenKernel<T: Real> {
    pub wavenumber: Wavenumber<T>,
    pub delta_x: T,
    pub dims: [usize; 3],
    fft: Fft3<T>,
    /// Spectrum on `[0, m/2]` per axis; the kernel is even so the rest mirrors.
    spectrum: Vec<Complex<T>>,
    half: [usize; 3],
    self_weight: Complex<T>,
}

impl<T: Real> std::fmt::Debug for GreenKernel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("wavenumber", &self.wavenumber)
            .field("delta_x", &self.delta_x)
            .field("dims", &self.dims)
            .field("fft_dims", &self.fft.dims)
            .finish()
    }
}

impl<T: Real> GreenKernel<T> {
    pub fn new(grid: &VoxelGrid<T>, wavenumber: Wavenumber<T>) -> Result<Self> {
        Self::with_sizing(grid, wavenumber, FftSizing::Exact)
    }

    pub fn with_sizing(grid: &VoxelGrid<T>, wavenumber: Wavenumber<T>, sizing: FftSizing) -> Result<Self> {
        let dims = grid.dims;
        let delta_x = grid.delta_x;
        let m: [usize; 3] = std::array::from_fn(|a| match sizing {
            FftSizing::Exact => 2 * dims[a],
            FftSizing::Smooth => smooth_size(2 * dims[a] - 1),
        });
        let fft = Fft3::new(m);
        let sw = self_weight(wavenumber.k, delta_x)?;
        let vol = delta_x * delta_x * delta_x;
        let k = wavenumber.k;

        // Signed offset of circulant index `c`, or None when outside (−N, N).
        let fold = |c: usize, a: usize| -> Option<usize> {
            let d = c.min(m[a] - c);
            (d < dims[a]).then_some(d)
        };
        let folds: Vec<Vec<Option<usize>>> =
            (0..3).map(|a| (0..m[a]).map(|c| fold(c, a)).collect()).collect();

        let mut buf = vec![czero::<T>(); fft.len()];
        buf.par_chunks_mut(m[0] * m[1]).enumerate().for_each(|(c2, plane)| {
            let Some(dz) = folds[2][c2] else { return };
            for (c1, row) in plane.chunks_mut(m[0]).enumerate() {
                let Some(dy) = folds[1][c1] else { continue };
                for (c0, v) in row.iter_mut().enumerate() {
                    let Some(dx) = folds[0][c0] else { continue };
                    *v = if dx == 0 && dy == 0 && dz == 0 {
                        sw
                    } else {
                        let r2 = (dx * dx + dy * dy + dz * dz) as f64;
                        green_at(T::lit(r2.sqrt()) * delta_x, k) * vol
                    };
                }
            }
        });
        fft.forward(&mut buf);

        let half: [usize; 3] = std::array::from_fn(|a| m[a] / 2 + 1);
        let mut spectrum = Vec::with_capacity(half[0] * half[1] * half[2]);
        for c2 in 0..half[2] {
            for c1 in 0..half[1] {
                let base = m[0] * (c1 + m[1] * c2);
                spectrum.extend_from_slice(&buf[base..base + half[0]]);
            }
        }
        drop(buf);
        Ok(Self { wavenumber, delta_x, dims, fft, spectrum, half, self_weight: sw })
    }

    pub fn self_weight(&self) -> Complex<T> {
        self.self_weight
    }

    pub fn fft_dims(&self) -> [usize; 3] {
        self.fft.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matches(&self, grid: &VoxelGrid<T>) -> bool {
        grid.dims == self.dims && (grid.delta_x - self.delta_x).abs() <= self.delta_x * T::lit(1e-12)
    }

    /// `u_i = Σ_j w_ij f_j` for `f` laid out x-fastest on the kernel's grid.
    pub fn apply(&self, f: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f.len() });
        }
        let [n0, n1, n2] = self.dims;
        let m = self.fft.dims;
        let mut buf = vec![czero::<T>(); self.fft.len()];
        buf.par_chunks_mut(m[0] * m[1]).take(n2).enumerate().for_each(|(k, plane)| {
            for j in 0..n1 {
                let src = &f[n0 * (j + n1 * k)..n0 * (j + n1 * k + 1)];
                plane[j * m[0]..j * m[0] + n0].copy_from_slice(src);
            }
        });
        self.fft.forward_pruned(&mut buf, self.dims);

        let mirror: Vec<Vec<usize>> = (0..3).map(|a| (0..m[a]).map(|c| c.min(m[a] - c)).collect()).collect();
        let [h0, h1, _] = self.half;
        buf.par_chunks_mut(m[0] * m[1]).enumerate().for_each(|(c2, plane)| {
            let s2 = mirror[2][c2];
            for (c1, row) in plane.chunks_mut(m[0]).enumerate() {
                let base = h0 * (mirror[1][c1] + h1 * s2);
                for (c0, v) in row.iter_mut().enumerate() {
                    *v = *v * self.spectrum[base + mirror[0][c0]];
                }
            }
        });
        self.fft.inverse_pruned(&mut buf, self.dims);

        let scale = T::one() / T::from_usize_lossy(self.fft.len());
        let mut out = vec![czero::<T>(); n];
        out.par_chunks_mut(n0 * n1).enumerate().for_each(|(k, plane)| {
            for j in 0..n1 {
                let src = &buf[m[0] * (j + m[1] * k)..m[0] * (j + m[1] * k) + n0];
                for (o, s) in plane[j * n0..(j + 1) * n0].iter_mut().zip(src) {
                    *o = s * scale;
                }
            }
        });
        Ok(out)
    }
}

/// Applies the kernel to a source density sampled on the kernel's grid.
/// The result carries the kernel's wavenumber.
pub fn apply_potential<T: Real>(kernel: &GreenKernel<T>, f: &HarmonicField<T>) -> Result<HarmonicField<T>> {
    if !kernel.matches(&f.grid) {
        return Err(Error::GridMismatch(format!(
            "kernel built for {:?} at δx = {}, field on {:?} at δx = {}",
            kernel.dims, kernel.delta_x, f.grid.dims, f.grid.delta_x
        )));
    }
    HarmonicField::new(f.grid.clone(), kernel.apply(&f.values)?, kernel.wavenumber)
}

/// Same quadrature by explicit double loop over voxel pairs.
pub fn direct_potential_oracle<T: Real>(
    k: &Wavenumber<T>,
    grid: &VoxelGrid<T>,
    f: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let n = grid.len();
    if n > DIRECT_LIMIT {
        return Err(Error::TooLarge { voxels: n, limit: DIRECT_LIMIT });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: f.len() });
    }
    let sw = self_weight(k.k, grid.delta_x)?;
    let vol = grid.delta_x * grid.delta_x * grid.delta_x;
    let centres = grid.centres();
    Ok(centres
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut acc = czero::<T>();
            for (j, xj) in centres.iter().enumerate() {
                let w = if i == j { sw } else { green_at(distance(xi, xj), k.k) * vol };
                acc = acc + w * f[j];
            }
            acc
        })
        .collect())
}

/// The same midpoint quadrature evaluated at arbitrary target points.
///
/// A target that coincides with a voxel centre picks up the self weight for
/// that voxel, so targets on the lattice reproduce [`GreenKernel::apply`].
/// Cost is `targets × voxels`.
pub fn potential_at_points<T: Real>(
    k: &Wavenumber<T>,
    grid: &VoxelGrid<T>,
    f: &[Complex<T>],
    targets: &[Point3<T>],
) -> Result<Vec<Complex<T>>> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: f.len() });
    }
    let sw = self_weight(k.k, grid.delta_x)?;
    let vol = grid.delta_x * grid.delta_x * grid.delta_x;
    let tol = grid.delta_x * T::lit(1e-9);
    let centres = grid.centres();
    Ok(targets
        .par_iter()
        .map(|x| {
            let mut acc = czero::<T>();
            for (c, v) in centres.iter().zip(f) {
                let r = distance(x, c);
                let w = if r <= tol { sw } else { green_at(r, k.k) * vol };
                acc = acc + w * *v;
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn rel_inf(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        num / crate::scalar::norm_inf(b)
    }

    #[test]
    fn green_basics() {
        let k = Wavenumber::real(3.7);
        let g = green_function(&[0.0; 3], &[1.0, 0.0, 0.0], &k).unwrap();
        assert_relative_eq!(g.norm(), 1.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-15);
        assert!(green_function(&[0.5; 3], &[0.5; 3], &k).is_err());
        let lossy = Wavenumber { k: Complex::new(10.0, 0.3), harmonic: 1, omega: 0.0 };
        let r: f64 = 2.5;
        let g = green_function(&[0.0; 3], &[0.0, r, 0.0], &lossy).unwrap();
        assert_relative_eq!(g.norm(), (-0.3 * r).exp() / (4.0 * std::f64::consts::PI * r), max_relative = 1e-14);
    }

    #[test]
    fn green_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = Wavenumber { k: Complex::new(40.0, 1.5), harmonic: 1, omega: 0.0 };
        for _ in 0..100 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let y: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            assert_eq!(green_function(&x, &y, &k).unwrap(), green_function(&y, &x, &k).unwrap());
        }
    }

    #[test]
    fn equal_volume_radius_value() {
        assert!((equal_volume_radius(1.0f64) - 0.62035).abs() < 5e-6);
    }

    #[test]
    fn self_weight_small_k_limit() {
        let a = equal_volume_radius(1e-3f64);
        let w = self_weight(Complex::new(0.0, 0.0), 1e-3).unwrap();
        assert_relative_eq!(w.re, a * a / 2.0, max_relative = 1e-15);
        assert_eq!(w.im, 0.0);
        // series and closed form agree across the switch-over
        for ka in [0.099, 0.101, 0.5] {
            let k = Complex::new(ka / a, 0.01 / a);
            let z = Complex::new(0.0, 1.0) * k * a;
            let closed = ((z.exp() * (1.0 - z)) - 1.0) / (k * k);
            assert!((self_weight(k, 1e-3).unwrap() - closed).norm() < 1e-9 * closed.norm());
        }
    }

    /// Gauss–Legendre quadrature of ∫₀^a e^{ikr} r dr on many panels.
    fn self_weight_quadrature(k: Complex<f64>, a: f64) -> Complex<f64> {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = 400;
        let h = a / panels as f64;
        let mut acc = Complex::new(0.0, 0.0);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in nodes {
                let r = mid + 0.5 * h * x;
                acc += (Complex::new(0.0, 1.0) * k * r).exp() * r * (0.5 * h * w);
            }
        }
        acc
    }

    #[test]
    fn self_weight_matches_radial_quadrature() {
        for (kr, ki, dx) in [(4669.6, 0.0279, 1.12e-4), (9339.0, 2.3, 4.5e-5), (300.0, 0.0, 1e-3), (10.0, 5.0, 0.3)] {
            let k = Complex::new(kr, ki);
            let a = equal_volume_radius(dx);
            let exact = self_weight_quadrature(k, a);
            let w = self_weight(k, dx).unwrap();
            assert!((w - exact).norm() <= 1e-10 * exact.norm(), "{w} vs {exact}");
        }
    }

    #[test]
    fn fft_matches_direct_summation() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1.1e-4, [20, 18, 16], 2).unwrap();
        let k = Wavenumber { k: Complex::new(9339.0, 0.11), harmonic: 2, omega: 0.0 };
        let f = random_field(grid.len(), 11);
        let kernel = GreenKernel::new(&grid, k).unwrap();
        let fast = kernel.apply(&f).unwrap();
        let slow = direct_potential_oracle(&k, &grid, &f).unwrap();
        let e = rel_inf(&fast, &slow);
        assert!(e < 1e-12, "relative max-norm error {e}");
    }

    #[test]
    fn smooth_sizing_agrees() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [11, 7, 9], 1).unwrap();
        let k = Wavenumber { k: Complex::new(800.0, 3.0), harmonic: 1, omega: 0.0 };
        let f = random_field(grid.len(), 5);
        let a = GreenKernel::with_sizing(&grid, k, FftSizing::Exact).unwrap().apply(&f).unwrap();
        let smooth = GreenKernel::with_sizing(&grid, k, FftSizing::Smooth).unwrap();
        assert_eq!(smooth.fft_dims(), [21, 14, 18]);
        let b = smooth.apply(&f).unwrap();
        assert!(rel_inf(&b, &a) < 1e-12);
    }

    #[test]
    fn delta_input_gives_kernel_column() {
        let grid = VoxelGrid::from_parts([0.0; 3], 2e-4, [9, 8, 7], 1).unwrap();
        let k = Wavenumber { k: Complex::new(4000.0, 0.5), harmonic: 1, omega: 0.0 };
        let kernel = GreenKernel::new(&grid, k).unwrap();
        let src = grid.index(3, 5, 2);
        let mut f = vec![Complex::new(0.0, 0.0); grid.len()];
        f[src] = Complex::new(1.0, 0.0);
        let u = kernel.apply(&f).unwrap();
        let xs = grid.centre(3, 5, 2);
        let vol = 8e-12;
        for (i, p) in grid.centres().iter().enumerate() {
            let expected = if i == src { kernel.self_weight() } else { green_function(p, &xs, &k).unwrap() * vol };
            assert!((u[i] - expected).norm() < 1e-12 * kernel.self_weight().norm(), "voxel {i}");
        }
        let zero = kernel.apply(&vec![Complex::new(0.0, 0.0); grid.len()]).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn shift_equivariance() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [16, 10, 10], 1).unwrap();
        let k = Wavenumber { k: Complex::new(2000.0, 1.0), harmonic: 1, omega: 0.0 };
        let kernel = GreenKernel::new(&grid, k).unwrap();
        let mut f = vec![Complex::new(0.0, 0.0); grid.len()];
        let mut g = f.clone();
        for k2 in 3..7 {
            for j in 3..7 {
                for i in 4..8 {
                    let v = Complex::new((i + j) as f64, k2 as f64);
                    f[grid.index(i, j, k2)] = v;
                    g[grid.index(i + 1, j, k2)] = v;
                }
            }
        }
        let uf = kernel.apply(&f).unwrap();
        let ug = kernel.apply(&g).unwrap();
        for k2 in 0..10 {
            for j in 0..10 {
                for i in 0..15 {
                    let a = uf[grid.index(i, j, k2)];
                    let b = ug[grid.index(i + 1, j, k2)];
                    assert!((a - b).norm() < 1e-12 * a.norm().max(1e-9));
                }
            }
        }
    }

    #[test]
    fn f32_tracks_f64() {
        let g64 = VoxelGrid::from_parts([0.0; 3], 1e-3, [12, 10, 8], 1).unwrap();
        let g32 = VoxelGrid::<f32>::from_parts([0.0; 3], 1e-3, [12, 10, 8], 1).unwrap();
        let k64 = Wavenumber { k: Complex::new(1500.0, 0.2), harmonic: 1, omega: 0.0 };
        let k32 = Wavenumber { k: Complex::new(1500.0f32, 0.2), harmonic: 1, omega: 0.0 };
        let f64v = random_field(g64.len(), 9);
        let f32v: Vec<Complex<f32>> = f64v.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
        let a = GreenKernel::new(&g64, k64).unwrap().apply(&f64v).unwrap();
        let b = GreenKernel::new(&g32, k32).unwrap().apply(&f32v).unwrap();
        let b64: Vec<Complex<f64>> = b.iter().map(|z| Complex::new(z.re as f64, z.im as f64)).collect();
        assert!(rel_inf(&b64, &a) < 1e-4);
    }

    #[test]
    fn errors() {
        let grid = VoxelGrid::from_parts([0.0; 3], 1e-3, [4, 4, 4], 1).unwrap();
        let k = Wavenumber::real(100.0);
        let kernel = GreenKernel::new(&grid, k).unwrap();
        assert!(kernel.apply(&[Complex::new(1.0, 0.0); 3]).is_err());
        let other = VoxelGrid::from_parts([0.0; 3], 1e-3, [4, 4, 5], 1).unwrap();
        let f = HarmonicField::new(other, vec![Complex::new(0.0, 0.0); 80], k).unwrap();
        assert!(matches!(apply_potential(&kernel, &f), Err(Error::GridMismatch(_))));
        let big = VoxelGrid::from_parts([0.0; 3], 1e-3, [50, 50, 41], 1).unwrap();
        assert!(matches!(
            direct_potential_oracle(&k, &big, &[]),
            Err(Error::TooLarge { .. })
        ));
        assert!(self_weight(Complex::new(1.0, 0.0), 0.0f64).is_err());
    }

    #[test]
    fn point_evaluation_matches_lattice_and_interpolates() {
        let grid = VoxelGrid::from_parts([0.0; 3], 0.1, [9, 8, 7], 0).unwrap();
        let k = Wavenumber { k: Complex::new(9.0, 0.2), harmonic: 1, omega: 0.0 };
        let f = random_field(grid.len(), 11);
        let kernel = GreenKernel::new(&grid, k).unwrap();
        let on_grid = kernel.apply(&f).unwrap();
        let picks = [0usize, 17, 200, grid.len() - 1];
        let targets: Vec<[f64; 3]> = picks.iter().map(|&i| { let [a, b, c] = grid.coords(i); grid.centre(a, b, c) }).collect();
        let direct = potential_at_points(&k, &grid, &f, &targets).unwrap();
        for (d, &i) in direct.iter().zip(&picks) {
            assert!((d - on_grid[i]).norm() < 1e-12 * on_grid[i].norm().max(1.0));
        }
        let outside = potential_at_points(&k, &grid, &f, &[[5.0, 5.0, 5.0]]).unwrap()[0];
        let expected: Complex<f64> = grid.centres().iter().zip(&f).map(|(c, v)| green_at(distance(&[5.0, 5.0, 5.0], c), k.k) * 1e-3 * v).sum();
        assert!((outside - expected).norm() < 1e-14);
        assert!(potential_at_points(&k, &grid, &f[1..], &targets).is_err());
    }
}
