//! Small self-contained checks behind `nestfus validate`.

use num_complex::Complex;
use nestfus::cascade::{run_cascade, CascadeConfig};
use nestfus::grid::plan_nested_meshes;
use nestfus::potential::{direct_potential_oracle, equal_volume_radius};
use nestfus::scalar::{norm2, norm_inf};
use nestfus::transducer::radiated_power;
use nestfus::vie::{vie_operator_apply, MediumMap};
use nestfus::{self_weight, ApertureDisc, GreenKernel, HarmonicField, Medium, Result, TransducerSpec, VoxelGrid, Wavenumber};

type Outcome = Result<(bool, String)>;

/// Deterministic pseudo-random complex samples.
fn samples(n: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    (0..n).map(|_| Complex::new(next(), next())).collect()
}

fn rel_diff(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let d: Vec<Complex<f64>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm_inf(&d) / norm_inf(b)
}

pub fn fft_direct() -> Outcome {
    let grid = VoxelGrid::from_parts([0.0; 3], 1.1e-4, [20, 18, 16], 2)?;
    let k = Wavenumber { k: Complex::new(9339.0, 0.11), harmonic: 2, omega: 0.0 };
    let f = samples(grid.len(), 1);
    let fast = GreenKernel::new(&grid, k)?.apply(&f)?;
    let slow = direct_potential_oracle(&k, &grid, &f)?;
    let e = rel_diff(&fast, &slow);
    Ok((e < 1e-12, format!("relative max-norm difference {e:.2e}")))
}

pub fn linearity() -> Outcome {
    let grid = VoxelGrid::from_parts([0.0; 3], 2e-4, [17, 12, 9], 1)?;
    let kernel = GreenKernel::new(&grid, Wavenumber { k: Complex::new(4000.0, 2.0), harmonic: 1, omega: 0.0 })?;
    let (f, g) = (samples(grid.len(), 2), samples(grid.len(), 3));
    let (a, b) = (Complex::new(0.3, -1.2), Complex::new(2.0, 0.5));
    let combo: Vec<Complex<f64>> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
    let (uf, ug) = (kernel.apply(&f)?, kernel.apply(&g)?);
    let expect: Vec<Complex<f64>> = uf.iter().zip(&ug).map(|(x, y)| a * x + b * y).collect();
    let e = rel_diff(&kernel.apply(&combo)?, &expect);
    Ok((e < 1e-13, format!("relative difference {e:.2e}")))
}

pub fn self_weight_limit() -> Outcome {
    let dx: f64 = 1e-4;
    let a = equal_volume_radius(dx);
    let w = self_weight(Complex::new(1e-3, 0.0), dx)?;
    let e = (w.re - a * a / 2.0).abs() / (a * a / 2.0);
    Ok((e < 1e-9, format!("relative deviation from a^2/2: {e:.2e}")))
}

pub fn axis_oracle() -> Outcome {
    let w = Medium::<f64>::water();
    let tr = TransducerSpec::h131().with_points(4096).build::<f64>()?;
    let k = w.wavenumber(tr.f0, 1)?;
    let (l, r) = (tr.focal_length, tr.outer_radius);
    let cos_max = (1.0 - (r / l).powi(2)).sqrt();
    let us: Vec<f64> = (0..41).map(|i| -10e-3 + 0.5e-3 * i as f64 + 0.123e-3).collect();
    let pts: Vec<[f64; 3]> = us.iter().map(|u| [l + u, 0.0, 0.0]).collect();
    let sum = tr.unnormalized_field(&pts, &k)?;
    let i = Complex::new(0.0, 1.0);
    let exact: Vec<Complex<f64>> = us
        .iter()
        .map(|&u| {
            let r1 = (u * u + 2.0 * u * l * cos_max + l * l).sqrt();
            l / (2.0 * i * k.k * u) * ((i * k.k * (l + u)).exp() - (i * k.k * r1).exp())
        })
        .collect();
    let num: Vec<Complex<f64>> = sum.iter().zip(&exact).map(|(a, b)| Complex::new(a.norm() - b.norm(), 0.0)).collect();
    let e = norm2(&num) / norm2(&exact);
    Ok((e < 1e-2, format!("relative L2 difference of |p| {e:.2e}")))
}

pub fn power() -> Outcome {
    let w = Medium::<f64>::water();
    let tr = TransducerSpec::h131().with_points(1024).with_power(100.0).build::<f64>()?;
    let disc = ApertureDisc::for_transducer(&tr, 2e-4);
    let inc = tr.incident_field(&w, &disc)?;
    let fine = disc.refined();
    let p = radiated_power(&inc.evaluate(&fine.points())?, &fine, &w)?;
    let e = (p - 100.0).abs() / 100.0;
    Ok((e < 1e-3, format!("re-integrated power {p:.4} W")))
}

fn tiny(power: f64) -> Result<CascadeConfig<f64>> {
    let medium = Medium::<f64>::water();
    let tr = TransducerSpec::h131().with_frequency(0.12e6).with_power(power).with_points(256).build()?;
    let disc = ApertureDisc::for_transducer(&tr, 5e-4);
    let incident = tr.incident_field(&medium, &disc)?;
    let plan = plan_nested_meshes(&tr, &medium, 10.2e-3, 4, 3)?;
    Ok(CascadeConfig::new(medium, incident, plan))
}

pub fn homogeneity() -> Outcome {
    let a = run_cascade(&tiny(10.0)?)?;
    let b = run_cascade(&tiny(40.0)?)?;
    let mut worst: f64 = 0.0;
    for n in 2..=3 {
        let ratio = norm2(&b.fields[n - 1].values) / norm2(&a.fields[n - 1].values);
        worst = worst.max((ratio / 2f64.powi(n as i32) - 1.0).abs());
    }
    Ok((worst < 1e-10, format!("worst relative deviation from 2^n: {worst:.2e}")))
}

pub fn vie_identity() -> Outcome {
    let grid = VoxelGrid::from_parts([0.0; 3], 5e-4, [8, 7, 6], 1)?;
    let w = Medium::<f64>::water();
    let k = w.wavenumber(0.5e6, 1)?;
    let map = MediumMap::homogeneous(w, &grid);
    let kernel = GreenKernel::new(&grid, k)?;
    let p = HarmonicField::new(grid.clone(), samples(grid.len(), 4), k)?;
    let out = vie_operator_apply(&p, &map, &kernel)?;
    let same = out.values == p.values;
    Ok((same, if same { "exact".into() } else { "operator changed the field".into() }))
}
