//! Acoustic media and the power-law attenuating wavenumber.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nepers per decibel for amplitude attenuation, `ln(10)/20`.
pub const NEPER_PER_DB: f64 = std::f64::consts::LN_10 / 20.0;

/// Acoustic material constants.
///
/// `alpha0` is in dB·m⁻¹·MHz⁻η with frequency expressed in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium<T> {
    pub name: String,
    pub rho0: T,
    pub c0: T,
    pub beta: T,
    pub alpha0: T,
    pub eta: T,
}

/// Key-value medium description, as read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub name: String,
    pub rho0: f64,
    pub c0: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub eta: f64,
}

pub const PRESET_NAMES: [&str; 3] = ["water", "liver", "kidney"];

impl<T: Real> Medium<T> {
    pub fn new(name: impl Into<String>, rho0: T, c0: T, beta: T, alpha0: T, eta: T) -> Result<Self> {
        let name = name.into();
        if !(rho0 > T::zero()) || !(c0 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "medium `{name}`: rho0 and c0 must be positive"
            )));
        }
        if !(beta >= T::zero()) || !(alpha0 >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "medium `{name}`: beta and alpha0 must be non-negative"
            )));
        }
        if !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("medium `{name}`: eta must be finite")));
        }
        if eta < T::one() || eta > T::lit(2.0) {
            log::warn!("medium `{name}`: power-law exponent eta = {eta} lies outside [1, 2]");
        }
        Ok(Self { name, rho0, c0, beta, alpha0, eta })
    }

    pub fn water() -> Self {
        Self::from_spec(&MediumSpec::water()).expect("valid preset")
    }

    pub fn liver() -> Self {
        Self::from_spec(&MediumSpec::liver()).expect("valid preset")
    }

    pub fn kidney() -> Self {
        Self::from_spec(&MediumSpec::kidney()).expect("valid preset")
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_spec(&MediumSpec::preset(name)?)
    }

    pub fn from_spec(spec: &MediumSpec) -> Result<Self> {
        Self::new(
            spec.name.clone(),
            T::lit(spec.rho0),
            T::lit(spec.c0),
            T::lit(spec.beta),
            T::lit(spec.alpha0),
            T::lit(spec.eta),
        )
    }

    pub fn to_spec(&self) -> MediumSpec {
        MediumSpec {
            name: self.name.clone(),
            rho0: self.rho0.as_f64(),
            c0: self.c0.as_f64(),
            beta: self.beta.as_f64(),
            alpha0: self.alpha0.as_f64(),
            eta: self.eta.as_f64(),
        }
    }

    /// Amplitude attenuation in Np/m at frequency `freq_hz`.
    pub fn attenuation(&self, freq_hz: T) -> T {
        if self.alpha0 == T::zero() {
            return T::zero();
        }
        let mhz = freq_hz.abs() / T::lit(1e6);
        self.alpha0 * mhz.powf(self.eta) * T::lit(NEPER_PER_DB)
    }

    /// Wavelength of harmonic `n` of fundamental `f0`.
    pub fn wavelength(&self, f0: T, n: usize) -> T {
        self.c0 / (f0 * T::from_usize_lossy(n))
    }

    /// Complex wavenumber `k_n = nω/c0 + iα(nω)`.
    pub fn wavenumber(&self, f0: T, n: usize) -> Result<Wavenumber<T>> {
        if !(f0 > T::zero()) || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "wavenumber requires f0 > 0 and n >= 1 (got f0 = {f0}, n = {n})"
            )));
        }
        let omega = T::TAU() * f0;
        let nf = T::from_usize_lossy(n);
        let re = nf * omega / self.c0;
        let im = self.attenuation(nf * f0);
        let ratio = im / re;
        if ratio >= T::lit(0.1) {
            log::warn!(
                "medium `{}`: attenuation ratio alpha*c0/omega = {ratio} at harmonic {n} exceeds \
                 the power-law validity bound 0.1",
                self.name
            );
        }
        Ok(Wavenumber { k: Complex::new(re, im), harmonic: n, omega })
    }

    /// Quadratic source prefactor `β ω² / (2 ρ0 c0⁴)`.
    pub fn nonlinear_coefficient(&self, omega: T) -> T {
        let c2 = self.c0 * self.c0;
        self.beta * omega * omega / (T::lit(2.0) * self.rho0 * c2 * c2)
    }
}

impl MediumSpec {
    pub fn water() -> Self {
        Self { name: "water".into(), rho0: 1000.0, c0: 1480.0, beta: 3.5, alpha0: 0.2, eta: 2.0 }
    }

    pub fn liver() -> Self {
        Self { name: "liver".into(), rho0: 1060.0, c0: 1590.0, beta: 4.4, alpha0: 90.0, eta: 1.1 }
    }

    pub fn kidney() -> Self {
        Self { name: "kidney".into(), rho0: 1050.0, c0: 1570.0, beta: 4.7, alpha0: 10.0, eta: 1.0 }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "water" => Ok(Self::water()),
            "liver" => Ok(Self::liver()),
            "kidney" => Ok(Self::kidney()),
            _ => Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            }),
        }
    }

    /// Parses a TOML document with keys `name, rho0, c0, beta, alpha0, eta`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Complex wavenumber of one harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber<T> {
    pub k: Complex<T>,
    pub harmonic: usize,
    /// Fundamental angular frequency.
    pub omega: T,
}

impl<T: Real> Wavenumber<T> {
    /// Lossless wavenumber, mostly useful in tests.
    pub fn real(k: T) -> Self {
        Self { k: Complex::new(k, T::zero()), harmonic: 1, omega: T::zero() }
    }

    pub fn wavelength(&self) -> T {
        T::TAU() / self.k.re
    }
}
