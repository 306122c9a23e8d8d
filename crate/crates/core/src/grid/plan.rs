//! Nested-domain planning: one box and voxel mesh per harmonic.

use std::fmt::Write as _;

use super::{DomainBox, VoxelGrid};
use crate::error::{Error, Result};
use crate::medium::Medium;
use crate::scalar::{Point3, Real};
use crate::transducer::BowlTransducer;

/// Distance kept between the domain and the bowl rim plane, m.
pub const STANDOFF: f64 = 1e-4;

/// Axial length `L = √(l² − R²) − ε` from the focus back towards the bowl.
pub fn prefocal_length<T: Real>(focal_length: T, outer_radius: T) -> T {
    (focal_length * focal_length - outer_radius * outer_radius).sqrt() - T::lit(STANDOFF)
}

/// Default computation box `[l − L, l + d] × [−R, R]²`.
pub fn reference_domain<T: Real>(tr: &BowlTransducer<T>, d: T) -> Result<DomainBox<T>> {
    if !(d >= T::zero()) {
        return Err(Error::InvalidParameter(format!("post-focal distance must be >= 0, got {d}")));
    }
    let l = tr.focal_length;
    let big_l = prefocal_length(l, tr.outer_radius);
    DomainBox::axial(l - big_l, l + d, tr.outer_radius)
}

/// Per-harmonic domain sizes as fractions of the reference box, for
/// harmonics `2..=n`: `L' = x·L` (post-focal `d` untouched) and `w' = yz·w`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFractions<T> {
    pub x: Vec<T>,
    pub yz: Vec<T>,
}

impl<T: Real> DomainFractions<T> {
    /// Length and width scaled by `λ_i/λ_2 = 2/i`.
    pub fn rule_of_thumb(n_harmonics: usize) -> Self {
        let f: Vec<T> = (2..=n_harmonics).map(|i| T::lit(2.0 / i as f64)).collect();
        Self { x: f.clone(), yz: f }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            x: pairs.iter().map(|p| T::lit(p.0)).collect(),
            yz: pairs.iter().map(|p| T::lit(p.1)).collect(),
        }
    }

    pub fn n_harmonics(&self) -> usize {
        self.x.len() + 1
    }
}

/// Measured 1%-error domain fractions for harmonics 2..=5 `(x, y/z)`, and the
/// tabulated rule-of-thumb row they are bounded by.
pub mod measured {
    pub const H131_WATER_100W: [(f64, f64); 4] = [(1.0, 0.74), (0.67, 0.39), (0.47, 0.20), (0.38, 0.13)];
    pub const H131_WATER_150W: [(f64, f64); 4] = [(1.0, 0.71), (0.67, 0.40), (0.58, 0.39), (0.52, 0.21)];
    pub const H131_LIVER_100W: [(f64, f64); 4] = [(1.0, 0.90), (0.56, 0.20), (0.25, 0.05), (0.26, 0.06)];
    pub const RULE_OF_THUMB: [(f64, f64); 4] = [(1.0, 1.0), (0.75, 0.67), (0.65, 0.5), (0.61, 0.4)];

    pub fn by_name(name: &str) -> Option<&'static [(f64, f64); 4]> {
        match name {
            "h131-water-100w" => Some(&H131_WATER_100W),
            "h131-water-150w" => Some(&H131_WATER_150W),
            "h131-liver-100w" => Some(&H131_LIVER_100W),
            "tabulated-rule" => Some(&RULE_OF_THUMB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedMesh<T> {
    pub harmonic: usize,
    pub domain: DomainBox<T>,
    pub grid: VoxelGrid<T>,
}

/// Nested meshes for harmonics `2..=n` plus the single fine reference mesh
/// they replace.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPlan<T> {
    pub meshes: Vec<PlannedMesh<T>>,
    /// Reference domain at the resolution of the highest harmonic.
    pub reference: PlannedMesh<T>,
    pub focus: Point3<T>,
    /// Pre-focal length `L` of the reference domain.
    pub base_length: T,
    /// Post-focal distance `d`.
    pub post_focal: T,
    /// Reference width `w = 2R`.
    pub base_width: T,
    pub n_w: usize,
    pub f0: T,
    pub c0: T,
}

fn check_common(n_w: usize, n_harmonics: usize) -> Result<()> {
    if n_w == 0 {
        return Err(Error::InvalidParameter("n_w must be at least 1".into()));
    }
    if n_harmonics < 2 {
        return Err(Error::InvalidParameter("a mesh plan needs at least two harmonics".into()));
    }
    Ok(())
}

fn spacing<T: Real>(medium: &Medium<T>, f0: T, harmonic: usize, n_w: usize) -> T {
    medium.wavelength(f0, harmonic) / T::from_usize_lossy(n_w)
}

/// Rule-of-thumb plan: harmonic `i` uses `[(λ_i/λ_2)L + d, (λ_i/λ_2)w, (λ_i/λ_2)w]`
/// with `δx = λ_i / n_w`.
pub fn plan_nested_meshes<T: Real>(
    tr: &BowlTransducer<T>,
    medium: &Medium<T>,
    d: T,
    n_w: usize,
    n_harmonics: usize,
) -> Result<MeshPlan<T>> {
    check_common(n_w, n_harmonics)?;
    plan_with_fractions(tr, medium, d, n_w, &DomainFractions::rule_of_thumb(n_harmonics))
}

/// Plan with explicit per-harmonic domain fractions.
pub fn plan_with_fractions<T: Real>(
    tr: &BowlTransducer<T>,
    medium: &Medium<T>,
    d: T,
    n_w: usize,
    fractions: &DomainFractions<T>,
) -> Result<MeshPlan<T>> {
    let n = fractions.n_harmonics();
    check_common(n_w, n)?;
    if fractions.x.len() != fractions.yz.len() {
        return Err(Error::InvalidParameter("fraction lists differ in length".into()));
    }
    let mut plan = base_plan(tr, medium, d, n_w, n)?;
    let l = tr.focal_length;
    for (idx, (&fx, &fyz)) in fractions.x.iter().zip(&fractions.yz).enumerate() {
        let harmonic = idx + 2;
        if !(fx > T::zero() && fx <= T::one() && fyz > T::zero() && fyz <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "harmonic {harmonic}: fractions must lie in (0, 1], got x = {fx}, yz = {fyz}"
            )));
        }
        let domain = DomainBox::axial(l - fx * plan.base_length, l + d, fyz * tr.outer_radius)?;
        let grid = VoxelGrid::anchored(domain, spacing(medium, tr.f0, harmonic, n_w), plan.focus, harmonic)?;
        plan.meshes.push(PlannedMesh { harmonic, domain, grid });
    }
    Ok(plan)
}

/// Every harmonic on the single fine reference mesh.
pub fn plan_single_mesh<T: Real>(
    tr: &BowlTransducer<T>,
    medium: &Medium<T>,
    d: T,
    n_w: usize,
    n_harmonics: usize,
) -> Result<MeshPlan<T>> {
    check_common(n_w, n_harmonics)?;
    let mut plan = base_plan(tr, medium, d, n_w, n_harmonics)?;
    for harmonic in 2..=n_harmonics {
        let mut m = plan.reference.clone();
        m.harmonic = harmonic;
        plan.meshes.push(m);
    }
    Ok(plan)
}

fn base_plan<T: Real>(
    tr: &BowlTransducer<T>,
    medium: &Medium<T>,
    d: T,
    n_w: usize,
    n: usize,
) -> Result<MeshPlan<T>> {
    let domain = reference_domain(tr, d)?;
    let focus = tr.focus();
    let grid = VoxelGrid::anchored(domain, spacing(medium, tr.f0, n, n_w), focus, n)?;
    Ok(MeshPlan {
        meshes: Vec::with_capacity(n - 1),
        reference: PlannedMesh { harmonic: n, domain, grid },
        focus,
        base_length: prefocal_length(tr.focal_length, tr.outer_radius),
        post_focal: d,
        base_width: T::lit(2.0) * tr.outer_radius,
        n_w,
        f0: tr.f0,
        c0: medium.c0,
    })
}

impl<T: Real> MeshPlan<T> {
    pub fn n_harmonics(&self) -> usize {
        self.meshes.len() + 1
    }

    pub fn mesh(&self, harmonic: usize) -> Option<&PlannedMesh<T>> {
        self.meshes.iter().find(|m| m.harmonic == harmonic)
    }

    /// Reference voxel count over the voxel count of harmonic `i`'s mesh.
    pub fn reduction_factor(&self, harmonic: usize) -> Option<f64> {
        self.mesh(harmonic).map(|m| self.reference.grid.len() as f64 / m.grid.len() as f64)
    }

    pub fn nested_voxels(&self) -> usize {
        self.meshes.iter().map(|m| m.grid.len()).sum()
    }

    /// Voxels processed when every harmonic uses the reference mesh.
    pub fn single_mesh_voxels(&self) -> usize {
        self.meshes.len() * self.reference.grid.len()
    }

    pub fn total_reduction(&self) -> f64 {
        self.single_mesh_voxels() as f64 / self.nested_voxels() as f64
    }

    /// Human-readable summary: dims, spacing, voxel counts and memory per mesh.
    pub fn report(&self) -> String {
        const MIB: f64 = 1024.0 * 1024.0;
        let cbytes = 2.0 * std::mem::size_of::<T>() as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "mesh plan: f0 = {:.4} MHz, c0 = {:.1} m/s, n_w = {}, harmonics = {}",
            self.f0.as_f64() / 1e6,
            self.c0.as_f64(),
            self.n_w,
            self.n_harmonics()
        );
        let _ = writeln!(
            s,
            "reference domain: L = {:.3} mm, d = {:.3} mm, w = {:.3} mm",
            self.base_length.as_f64() * 1e3,
            self.post_focal.as_f64() * 1e3,
            self.base_width.as_f64() * 1e3
        );
        let _ = writeln!(
            s,
            "{:<10} {:>9} {:>7} {:>7} {:>7} {:>14} {:>11} {:>11} {:>9}",
            "mesh", "dx_um", "Nx", "Ny", "Nz", "voxels", "field_MiB", "fft_MiB", "reduction"
        );
        let row = |s: &mut String, label: String, g: &VoxelGrid<T>, red: f64| {
            let v = g.len() as f64;
            let _ = writeln!(
                s,
                "{:<10} {:>9.2} {:>7} {:>7} {:>7} {:>14} {:>11.1} {:>11.1} {:>9.2}",
                label,
                g.delta_x.as_f64() * 1e6,
                g.dims[0],
                g.dims[1],
                g.dims[2],
                g.len(),
                v * cbytes / MIB,
                8.0 * v * cbytes / MIB,
                red
            );
        };
        row(&mut s, format!("ref(p{})", self.reference.harmonic), &self.reference.grid, 1.0);
        for m in &self.meshes {
            row(&mut s, format!("p{}", m.harmonic), &m.grid, self.reduction_factor(m.harmonic).unwrap());
        }
        let _ = writeln!(
            s,
            "total voxels: nested {} vs single mesh {} ({} x {}), reduction {:.2}",
            self.nested_voxels(),
            self.single_mesh_voxels(),
            self.meshes.len(),
            self.reference.grid.len(),
            self.total_reduction()
        );
        s
    }
}
