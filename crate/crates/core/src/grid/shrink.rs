use num_complex::Complex;

use super::{DomainBox, VoxelGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tightest voxel-aligned box holding every voxel with `log10(|f|/max|f|) >= q0`.
///
/// `q0 >= 0` degenerates to the box of the largest-magnitude voxel.
pub fn shrink_domain_by_threshold<T: Real>(
    grid: &VoxelGrid<T>,
    f: &[Complex<T>],
    q0: T,
) -> Result<DomainBox<T>> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: f.len() });
    }
    let (argmax, max) = f
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, T::zero()), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    if !(max > T::zero()) {
        return Err(Error::DegenerateField("cannot threshold an identically zero field".into()));
    }
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut grow = |c: [usize; 3]| {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    };
    if q0 >= T::zero() {
        grow(grid.coords(argmax));
    } else {
        let cut = max * T::lit(10.0).powf(q0);
        for (i, z) in f.iter().enumerate() {
            if z.norm() >= cut {
                grow(grid.coords(i));
            }
        }
    }
    let h = grid.delta_x * T::lit(0.5);
    let a = grid.centre(lo[0], lo[1], lo[2]);
    let b = grid.centre(hi[0], hi[1], hi[2]);
    Ok(DomainBox { min: [a[0] - h, a[1] - h, a[2] - h], max: [b[0] + h, b[1] + h, b[2] + h] })
}
