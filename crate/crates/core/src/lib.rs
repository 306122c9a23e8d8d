//! Harmonics of weakly nonlinear focused ultrasound fields.
//!
//! Each harmonic `p_n` is the Helmholtz volume potential of a source built
//! from products of lower harmonics. Potentials are evaluated by FFT on a
//! voxel grid sized to the harmonic's own wavelength, with coarser, larger
//! grids for low harmonics and finer, smaller ones for high harmonics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cascade;
pub mod error;
mod fft;
pub mod grid;
pub mod krylov;
pub mod medium;
pub mod potential;
pub mod scalar;
pub mod transducer;
pub mod vie;

pub use error::{Error, Result};
pub use grid::{DomainBox, HarmonicField, Interpolation, MeshPlan, VoxelGrid};
pub use medium::{Medium, MediumSpec, Wavenumber};
pub use potential::{apply_potential, green_function, potential_at_points, self_weight, FftSizing, GreenKernel};
pub use scalar::{Cplx, Point3, Real};
pub use transducer::{ApertureDisc, BowlTransducer, IncidentField, TransducerSpec};

pub type Medium64 = Medium<f64>;
pub type Medium32 = Medium<f32>;
pub type VoxelGrid64 = VoxelGrid<f64>;
pub type VoxelGrid32 = VoxelGrid<f32>;
pub type HarmonicField64 = HarmonicField<f64>;
pub type HarmonicField32 = HarmonicField<f32>;
pub type BowlTransducer64 = BowlTransducer<f64>;
pub type BowlTransducer32 = BowlTransducer<f32>;
pub type GreenKernel64 = GreenKernel<f64>;
pub type GreenKernel32 = GreenKernel<f32>;
pub type MeshPlan64 = MeshPlan<f64>;
pub type MeshPlan32 = MeshPlan<f32>;
