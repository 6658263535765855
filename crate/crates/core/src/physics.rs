//! Pendellösung length and the mapping between physical distance and lattice
//! layers.
//!
//! The coin angle and the layer count are tied by `n * gamma = pi * d / dh`
//! where `dh` is the pendellösung length: `n` layers of a uniform crystal then
//! rotate a plane wave by `pi * d / dh`, so the transmitted/reflected intensity
//! exchange repeats once per `dh`. All lattice geometry is measured in units
//! of `dh`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};

/// Si(220) structure factor magnitude in fm, temperature-corrected, for the
/// 8-atom cubic cell. Chosen so that 0.235 nm neutrons give a pendellösung
/// length of 50.38 µm.
pub const SI_220_STRUCTURE_FACTOR_FM: f64 = 33.61990615700339;

/// Silicon cubic lattice constant in nm.
pub const SI_LATTICE_CONSTANT_NM: f64 = 0.5431020511;

/// Crystal and beam constants entering the pendellösung length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalConstants {
    v_cell: f64,
    lambda: f64,
    theta_b: f64,
    f_h: f64,
}

impl CrystalConstants {
    /// `v_cell` in nm³, `lambda` in nm, `theta_b` in radians, `f_h` in fm.
    pub fn new(v_cell: f64, lambda: f64, theta_b: f64, f_h: f64) -> Result<Self> {
        for (name, v) in [("v_cell", v_cell), ("lambda", lambda), ("f_h", f_h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if !(theta_b > 0.0 && theta_b < FRAC_PI_2) {
            return Err(invalid("theta_b", format!("{theta_b} not in (0, pi/2)")));
        }
        Ok(Self {
            v_cell,
            lambda,
            theta_b,
            f_h,
        })
    }

    /// Silicon (220) reflection at the given wavelength.
    pub fn silicon_220(lambda: f64) -> Result<Self> {
        let a = SI_LATTICE_CONSTANT_NM;
        let d_220 = a / 8f64.sqrt();
        let sin_theta = lambda / (2.0 * d_220);
        if !(sin_theta > 0.0 && sin_theta < 1.0) {
            return Err(invalid(
                "lambda",
                format!("{lambda} nm has no (220) Bragg angle"),
            ));
        }
        Self::new(
            a.powi(3),
            lambda,
            sin_theta.asin(),
            SI_220_STRUCTURE_FACTOR_FM,
        )
    }

    pub fn v_cell(&self) -> f64 {
        self.v_cell
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta_b(&self) -> f64 {
        self.theta_b
    }

    pub fn f_h(&self) -> f64 {
        self.f_h
    }
}

/// Pendellösung length in µm.
pub fn pendellosung_length(c: &CrystalConstants) -> f64 {
    // nm³ / (nm · fm) = 1e-27 / 1e-24 m = 1e-3 m = 1e3 µm
    const UNIT_UM: f64 = 1e3;
    PI * c.v_cell * c.theta_b.cos() / (c.lambda * c.f_h) * UNIT_UM
}

/// Coin angle that covers `d` pendellösung lengths in `n` layers.
pub fn gamma_for(d: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "layer count must be at least 1"));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(invalid("d", format!("{d} must be non-negative")));
    }
    let gamma = PI * d / n as f64;
    if gamma > FRAC_PI_2 {
        return Err(Error::UnderResolved { gamma });
    }
    Ok(gamma)
}

/// Number of layers spanning `d` pendellösung lengths at coin angle `gamma`,
/// rounded to the nearest integer.
pub fn layers_for(d: f64, gamma: f64) -> Result<u64> {
    if !(gamma > 0.0 && gamma <= FRAC_PI_2) {
        return Err(invalid("gamma", format!("{gamma} not in (0, pi/2]")));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(invalid("d", format!("{d} must be non-negative")));
    }
    Ok((PI * d / gamma).round() as u64)
}

/// Distance covered by one layer, in pendellösung lengths.
pub fn distance_per_layer(gamma: f64) -> f64 {
    gamma / PI
}

/// Minimum lattice layers per pendellösung length.
pub const MIN_LAYERS_PER_PENDELLOSUNG: u32 = 4;

/// Lattice density: how many layers (and rows) span one pendellösung length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resolution {
    layers_per_pendellosung: u32,
}

impl Resolution {
    pub fn new(layers_per_pendellosung: u32) -> Result<Self> {
        if layers_per_pendellosung < MIN_LAYERS_PER_PENDELLOSUNG {
            return Err(invalid(
                "layers_per_pendellosung",
                format!(
                    "{layers_per_pendellosung} is below the minimum of {MIN_LAYERS_PER_PENDELLOSUNG}"
                ),
            ));
        }
        Ok(Self {
            layers_per_pendellosung,
        })
    }

    pub fn layers_per_pendellosung(&self) -> u32 {
        self.layers_per_pendellosung
    }

    /// Coin angle of a crystal node at this resolution.
    pub fn gamma(&self) -> f64 {
        gamma_for(1.0, self.layers_per_pendellosung as u64).expect("n >= 4 keeps gamma <= pi/4")
    }

    /// Rounds a length in pendellösung units to whole rows or columns.
    pub fn cells(&self, length: f64) -> usize {
        (length * self.layers_per_pendellosung as f64).round() as usize
    }

    /// Length of `cells` rows or columns in pendellösung units.
    pub fn length(&self, cells: usize) -> f64 {
        cells as f64 / self.layers_per_pendellosung as f64
    }
}
