//! Unit system, atom presets, and the effective lattice potential.
//!
//! All quantities are dimensionless: lengths in `1/k`, momenta in `hbar*k`,
//! energies/frequencies in the recoil scale `omega_nu = hbar*k^2/2M`. SI
//! conversion is a presentation concern and lives in the CLI.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Physical parameters of the two-level atom behind the dimensionless model.
///
/// Only used for SI conversion of outputs and for the gravity parameter
/// `beta`; the solvers themselves never touch SI values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Transition wavelength lambda (m).
    pub wavelength: f64,
    /// Recoil frequency omega_nu = hbar k^2 / 2M (1/s).
    pub omega_nu: f64,
    /// Spontaneous emission rate gamma (1/s). Carried for completeness; the
    /// model assumes a detuning large enough that it never enters.
    pub gamma: f64,
    /// Dimensionless gravity parameter beta.
    pub beta: f64,
}

/// 2s-2p transition of lithium-7, the atom used for every preset.
pub const LI7_2S2P: AtomParams = AtomParams {
    wavelength: 670.8e-9,
    omega_nu: 3.96e5,
    gamma: 3.72e7,
    beta: 2.93e-4,
};

impl AtomParams {
    /// Checks positivity constraints (`beta` may be zero).
    pub fn validate(&self) -> Result<(), PotentialError> {
        if !(self.wavelength > 0.0) || !(self.omega_nu > 0.0) || !(self.gamma > 0.0) {
            return Err(PotentialError::InvalidAtomParams);
        }
        if !(self.beta >= 0.0) {
            return Err(PotentialError::InvalidAtomParams);
        }
        Ok(())
    }
}

/// Which dressed-state branch the atom follows adiabatically.
///
/// `Plus` keeps the sign in front of the square root positive (repulsive
/// bump, blue detuning), `Minus` negative (attractive well, red detuning).
/// The Taylor form with a signed `eta` is the authoritative path for all
/// reference runs; the exact branches exist for cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSign {
    Plus,
    Minus,
}

/// Form of the effective potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PotentialMode {
    /// Second-order expansion in the coupling: `V = eta * envelope * cos^2`.
    Taylor {
        /// Signed lattice depth `eta = rabi^2 / detuning`.
        eta: f64,
    },
    /// Exact dressed-state potential
    /// `-(beta z) + s/2 * (sqrt(detuning^2 + 4 Omega(z)^2) - |detuning|)`,
    /// shifted so it vanishes far from the beams.
    ExactDressed {
        /// Dimensionless detuning, nonzero.
        detuning: f64,
        /// Dimensionless single-beam Rabi frequency.
        rabi: f64,
        branch: BranchSign,
    },
}

/// Full description of the effective lattice potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Half-angle between the beams, 0 < phi <= pi/2.
    pub phi: f64,
    /// Center of the Gaussian envelope (units of 1/k).
    pub z_c: f64,
    /// Gaussian halfwidth of each beam (units of 1/k).
    pub d: f64,
    /// Dimensionless gravity parameter, >= 0. Zero for all reference runs.
    pub beta: f64,
    pub mode: PotentialMode,
}

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("atom parameters must be positive (beta >= 0)")]
    InvalidAtomParams,
    #[error("beam half-angle phi must satisfy 0 < phi <= pi/2, got {0}")]
    InvalidPhi(f64),
    #[error("Gaussian halfwidth d must be positive, got {0}")]
    InvalidHalfwidth(f64),
    #[error("gravity parameter beta must be >= 0, got {0}")]
    InvalidBeta(f64),
    #[error("exact dressed mode requires a nonzero detuning")]
    ZeroDetuning,
}

impl PotentialSpec {
    /// Builds a Taylor-mode spec, the standard configuration.
    pub fn taylor(eta: f64, phi: f64, z_c: f64, d: f64, beta: f64) -> Result<Self, PotentialError> {
        let spec = PotentialSpec { phi, z_c, d, beta, mode: PotentialMode::Taylor { eta } };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds an exact dressed-state spec.
    pub fn exact_dressed(
        detuning: f64,
        rabi: f64,
        branch: BranchSign,
        phi: f64,
        z_c: f64,
        d: f64,
        beta: f64,
    ) -> Result<Self, PotentialError> {
        let spec = PotentialSpec {
            phi,
            z_c,
            d,
            beta,
            mode: PotentialMode::ExactDressed { detuning, rabi, branch },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        if !(self.phi > 0.0 && self.phi <= PI / 2.0) {
            return Err(PotentialError::InvalidPhi(self.phi));
        }
        if !(self.d > 0.0) {
            return Err(PotentialError::InvalidHalfwidth(self.d));
        }
        if !(self.beta >= 0.0) {
            return Err(PotentialError::InvalidBeta(self.beta));
        }
        if let PotentialMode::ExactDressed { detuning, .. } = self.mode {
            if detuning == 0.0 {
                return Err(PotentialError::ZeroDetuning);
            }
        }
        Ok(())
    }

    /// Non-fatal warnings about parameter regimes, for the CLI to surface.
    pub fn advisories(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let PotentialMode::ExactDressed { detuning, rabi, .. } = self.mode {
            if rabi * rabi >= 0.1 * detuning * detuning {
                notes.push(format!(
                    "rabi^2 = {:.3e} is not small against detuning^2 = {:.3e}; \
                     the adiabatic two-branch picture may be inaccurate",
                    rabi * rabi,
                    detuning * detuning
                ));
            }
        }
        notes
    }

    /// Signed lattice depth. Stored in Taylor mode, derived as
    /// `rabi^2/detuning` in exact dressed mode.
    pub fn eta(&self) -> f64 {
        match self.mode {
            PotentialMode::Taylor { eta } => eta,
            PotentialMode::ExactDressed { detuning, rabi, .. } => rabi * rabi / detuning,
        }
    }

    /// Local lattice amplitude `A(z) = eta * exp(-2 cos^2(phi) (z-z_c)^2 / d^2)`.
    ///
    /// This is the amplitude the spatial gap map feeds into the local band
    /// structure at each position.
    pub fn envelope_amplitude(&self, z: f64) -> f64 {
        let dz = z - self.z_c;
        let c = self.phi.cos();
        self.eta() * (-2.0 * c * c * dz * dz / (self.d * self.d)).exp()
    }

    /// Full effective potential `U(z)`, measured against the conserved
    /// eigenvalue `q^2` (the squared momentum where the field vanishes).
    ///
    /// Taylor mode: `U = A(z) cos^2((z - z_c) sin(phi)) - beta z`.
    /// Exact dressed mode: the branch potential with its asymptotic constant
    /// removed, so `U -> -beta z` far from the beams and scattering boundary
    /// conditions are uniform across modes.
    pub fn effective_potential(&self, z: f64) -> f64 {
        let dz = z - self.z_c;
        match self.mode {
            PotentialMode::Taylor { .. } => {
                let cosine = (dz * self.phi.sin()).cos();
                self.envelope_amplitude(z) * cosine * cosine - self.beta * z
            }
            PotentialMode::ExactDressed { detuning, rabi, branch } => {
                let c = self.phi.cos();
                let env = (-c * c * dz * dz / (self.d * self.d)).exp();
                let omega = rabi * env * (dz * self.phi.sin()).cos();
                let root = (detuning * detuning + 4.0 * omega * omega).sqrt();
                let sign = match branch {
                    BranchSign::Plus => 1.0,
                    BranchSign::Minus => -1.0,
                };
                sign * 0.5 * (root - detuning.abs()) - self.beta * z
            }
        }
    }

    /// Lattice period `pi / sin(phi)`.
    pub fn lattice_period(&self) -> f64 {
        PI / self.phi.sin()
    }

    /// Lattice wavenumber `sin(phi)` of the cosine-squared factor.
    pub fn lattice_wavenumber(&self) -> f64 {
        self.phi.sin()
    }

    /// 1/e full width of the potential envelope, `sqrt(2) d / cos(phi)`.
    pub fn envelope_full_width(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.d / self.phi.cos()
    }
}

/// Geometrical Bragg momenta `q_n = n sin(phi)`, n = 1..n_max: the
/// empty-lattice zone boundary momenta for a lattice of period `pi/sin(phi)`.
pub fn bragg_momenta(spec: &PotentialSpec, n_max: usize) -> Vec<f64> {
    let s = spec.phi.sin();
    (1..=n_max).map(|n| n as f64 * s).collect()
}
