//! Cuboidal domains, uniform voxel meshes and fields sampled on them.

mod interp;
mod plan;
mod shrink;

pub use interp::{interpolate, interpolate_values, Interpolation};
pub use plan::{
    measured, plan_nested_meshes, plan_single_mesh, plan_with_fractions, prefocal_length, reference_domain,
    DomainFractions,
    MeshPlan, PlannedMesh, STANDOFF,
};
pub use shrink::shrink_domain_by_threshold;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::medium::Wavenumber;
use crate::scalar::{Point3, Real};

/// Axis-aligned box `[min, max]` in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> DomainBox<T> {
    pub fn new(min: Point3<T>, max: Point3<T>) -> Result<Self> {
        for a in 0..3 {
            if !(max[a] > min[a]) {
                return Err(Error::InvalidParameter(format!(
                    "domain box axis {a}: max {} must exceed min {}",
                    max[a], min[a]
                )));
            }
        }
        Ok(Self { min, max })
    }

    /// Box `[x_min, x_max] × [-half_width, half_width]²` around the x-axis.
    pub fn axial(x_min: T, x_max: T, half_width: T) -> Result<Self> {
        Self::new([x_min, -half_width, -half_width], [x_max, half_width, half_width])
    }

    pub fn extents(&self) -> Point3<T> {
        [self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2]]
    }

    pub fn volume(&self) -> T {
        let e = self.extents();
        e[0] * e[1] * e[2]
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// `true` when `other` lies inside `self`, allowing `tol` slack on each face.
    pub fn encloses(&self, other: &DomainBox<T>, tol: T) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] - tol && other.max[a] <= self.max[a] + tol)
    }
}

/// Uniform cubic-voxel mesh. Values are stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    /// Centre of voxel `(0, 0, 0)`.
    pub origin: Point3<T>,
    pub delta_x: T,
    pub dims: [usize; 3],
    /// Harmonic this grid resolves (0 when not tied to one).
    pub harmonic: usize,
    /// Domain the grid was built to cover.
    pub domain: DomainBox<T>,
}

const COVER_TOL: f64 = 1e-9;

impl<T: Real> VoxelGrid<T> {
    /// Grid covering `domain` with `anchor` at an exact voxel centre.
    ///
    /// Each axis gets the smallest run of voxels whose faces enclose the domain,
    /// which is `ceil(extent/δx)` or one more depending on where the anchor falls.
    pub fn anchored(domain: DomainBox<T>, delta_x: T, anchor: Point3<T>, harmonic: usize) -> Result<Self> {
        check_spacing(delta_x)?;
        let half = T::lit(0.5);
        let tol = T::lit(COVER_TOL);
        let mut origin = [T::zero(); 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let lo = ((domain.min[a] - anchor[a]) / delta_x + half + tol).floor();
            let hi = ((domain.max[a] - anchor[a]) / delta_x - half - tol).ceil();
            let n = (hi - lo).to_i64().unwrap_or(0) + 1;
            if n < 1 {
                return Err(Error::InvalidParameter("anchored grid has no voxels".into()));
            }
            dims[a] = n as usize;
            origin[a] = anchor[a] + lo * delta_x;
        }
        Ok(Self { origin, delta_x, dims, harmonic, domain })
    }

    /// Grid whose first voxel face sits on `domain.min`; `ceil(extent/δx)` voxels per axis.
    pub fn aligned(domain: DomainBox<T>, delta_x: T, harmonic: usize) -> Result<Self> {
        check_spacing(delta_x)?;
        let half = T::lit(0.5);
        let ext = domain.extents();
        let mut dims = [0usize; 3];
        let mut origin = [T::zero(); 3];
        for a in 0..3 {
            let n = (ext[a] / delta_x - T::lit(COVER_TOL)).ceil().to_usize().unwrap_or(0).max(1);
            dims[a] = n;
            origin[a] = domain.min[a] + half * delta_x;
        }
        Ok(Self { origin, delta_x, dims, harmonic, domain })
    }

    pub fn from_parts(origin: Point3<T>, delta_x: T, dims: [usize; 3], harmonic: usize) -> Result<Self> {
        check_spacing(delta_x)?;
        if dims.contains(&0) {
            return Err(Error::InvalidParameter("grid dimensions must be non-zero".into()));
        }
        let mut g = Self {
            origin,
            delta_x,
            dims,
            harmonic,
            domain: DomainBox { min: origin, max: origin },
        };
        g.domain = g.bounds();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn centre(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        [
            self.origin[0] + T::from_usize_lossy(i) * self.delta_x,
            self.origin[1] + T::from_usize_lossy(j) * self.delta_x,
            self.origin[2] + T::from_usize_lossy(k) * self.delta_x,
        ]
    }

    /// Voxel-centre coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<T> {
        (0..self.dims[axis])
            .map(|m| self.origin[axis] + T::from_usize_lossy(m) * self.delta_x)
            .collect()
    }

    /// All voxel centres, x-fastest.
    pub fn centres(&self) -> Vec<Point3<T>> {
        let xs = self.axis_coords(0);
        let ys = self.axis_coords(1);
        let zs = self.axis_coords(2);
        let mut out = Vec::with_capacity(self.len());
        for &z in &zs {
            for &y in &ys {
                for &x in &xs {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }

    /// Box covered by the voxels themselves (centres ± δx/2).
    pub fn bounds(&self) -> DomainBox<T> {
        let h = self.delta_x * T::lit(0.5);
        let mut min = [T::zero(); 3];
        let mut max = [T::zero(); 3];
        for a in 0..3 {
            min[a] = self.origin[a] - h;
            max[a] = self.origin[a] + T::from_usize_lossy(self.dims[a] - 1) * self.delta_x + h;
        }
        DomainBox { min, max }
    }

    /// Same lattice: equal dims and spacing, origins within 1e-9 voxel.
    pub fn coincides(&self, other: &VoxelGrid<T>) -> bool {
        let tol = self.delta_x * T::lit(1e-9);
        self.dims == other.dims
            && (self.delta_x - other.delta_x).abs() <= tol
            && (0..3).all(|a| (self.origin[a] - other.origin[a]).abs() <= tol)
    }

    /// Bytes needed for one complex field of this size.
    pub fn field_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<Complex<T>>()
    }
}

fn check_spacing<T: Real>(delta_x: T) -> Result<()> {
    if !(delta_x > T::zero()) || !delta_x.is_finite() {
        return Err(Error::InvalidParameter(format!("voxel size must be positive, got {delta_x}")));
    }
    Ok(())
}

/// Complex amplitude of one harmonic at every voxel centre of a grid.
#[derive(Debug, Clone)]
pub struct HarmonicField<T> {
    pub grid: VoxelGrid<T>,
    pub values: Vec<Complex<T>>,
    pub wavenumber: Wavenumber<T>,
}

impl<T: Real> HarmonicField<T> {
    pub fn new(grid: VoxelGrid<T>, values: Vec<Complex<T>>, wavenumber: Wavenumber<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values, wavenumber })
    }

    pub fn harmonic(&self) -> usize {
        self.wavenumber.harmonic
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::norm_inf(&self.values)
    }
}
