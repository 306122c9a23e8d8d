use num_complex::Complex;
use rayon::prelude::*;

use super::{HarmonicField, VoxelGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interpolation order used when moving fields between nested grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Trilinear,
    /// Three-point Lagrange stencil per axis; falls back to linear on axes
    /// with fewer than three voxels.
    Triquadratic,
}

/// Points may sit up to this many source voxels beyond the outermost centres.
/// Inside that band values are clamped to the boundary.
const REACH: f64 = 1.5;

#[derive(Debug, Clone)]
struct Stencil<T> {
    start: usize,
    weights: [T; 3],
    len: usize,
}

fn axis_stencils<T: Real>(
    src_origin: T,
    src_dx: T,
    n: usize,
    targets: &[T],
    order: Interpolation,
    axis: usize,
) -> Result<Vec<Stencil<T>>> {
    let nf = T::from_usize_lossy(n);
    let reach = T::lit(REACH);
    let snap = T::lit(1e-9);
    targets
        .iter()
        .map(|&x| {
            let mut u = (x - src_origin) / src_dx;
            if u < -reach || u > nf - T::one() + reach {
                return Err(Error::OutOfDomain(format!(
                    "axis {axis}: coordinate {x} is {} voxels from the source grid",
                    if u < T::zero() { -u } else { u - (nf - T::one()) }
                )));
            }
            if (u - u.round()).abs() < snap {
                u = u.round();
            }
            u = u.max(T::zero()).min(nf - T::one());
            if n == 1 {
                return Ok(Stencil { start: 0, weights: [T::one(), T::zero(), T::zero()], len: 1 });
            }
            if order == Interpolation::Triquadratic && n >= 3 {
                let c = u.round().max(T::one()).min(nf - T::lit(2.0));
                let t = u - c;
                let h = T::lit(0.5);
                let ci = c.to_usize().unwrap();
                return Ok(Stencil {
                    start: ci - 1,
                    weights: [h * t * (t - T::one()), T::one() - t * t, h * t * (t + T::one())],
                    len: 3,
                });
            }
            let i0 = u.floor().to_usize().unwrap().min(n - 2);
            let t = u - T::from_usize_lossy(i0);
            Ok(Stencil { start: i0, weights: [T::one() - t, t, T::zero()], len: 2 })
        })
        .collect()
}

/// Resamples `values` (on `source`) at the voxel centres of `target`.
///
/// Real and imaginary parts are interpolated independently, which for a
/// linear scheme is the same as interpolating the complex value.
pub fn interpolate_values<T: Real>(
    source: &VoxelGrid<T>,
    values: &[Complex<T>],
    target: &VoxelGrid<T>,
    order: Interpolation,
) -> Result<Vec<Complex<T>>> {
    if values.len() != source.len() {
        return Err(Error::DimensionMismatch { expected: source.len(), found: values.len() });
    }
    if source.coincides(target) {
        return Ok(values.to_vec());
    }
    let st: Vec<Vec<Stencil<T>>> = (0..3)
        .map(|a| {
            axis_stencils(
                source.origin[a],
                source.delta_x,
                source.dims[a],
                &target.axis_coords(a),
                order,
                a,
            )
        })
        .collect::<Result<_>>()?;
    let [sx, sy, _] = source.dims;
    let [tx, ty, _] = target.dims;
    let mut out = vec![Complex::new(T::zero(), T::zero()); target.len()];
    out.par_chunks_mut(tx * ty).enumerate().for_each(|(k, plane)| {
        let wz = &st[2][k];
        for (j, row) in plane.chunks_mut(tx).enumerate() {
            let wy = &st[1][j];
            for (i, v) in row.iter_mut().enumerate() {
                let wx = &st[0][i];
                let mut acc = Complex::new(T::zero(), T::zero());
                for c in 0..wz.len {
                    let kk = wz.start + c;
                    for b in 0..wy.len {
                        let jj = wy.start + b;
                        let wyz = wz.weights[c] * wy.weights[b];
                        let base = sx * (jj + sy * kk);
                        for a in 0..wx.len {
                            acc = acc + values[base + wx.start + a] * (wyz * wx.weights[a]);
                        }
                    }
                }
                *v = acc;
            }
        }
    });
    Ok(out)
}

/// Interpolates a harmonic field onto `target`, keeping its wavenumber.
pub fn interpolate<T: Real>(
    field: &HarmonicField<T>,
    target: &VoxelGrid<T>,
    order: Interpolation,
) -> Result<HarmonicField<T>> {
    let values = interpolate_values(&field.grid, &field.values, target, order)?;
    HarmonicField::new(target.clone(), values, field.wavenumber)
}
