use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Row-major 2x2 complex matrix acting on `(up, down)` amplitude pairs.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Parameters of the node unitary.
///
/// `gamma` sets the reflection amplitude (`sin gamma`), `xi` and `zeta` are the
/// transmission and reflection phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinParams {
    gamma: f64,
    xi: f64,
    zeta: f64,
}

impl CoinParams {
    /// Validates `gamma` in `[0, pi/2]` and wraps both phases into `(-pi, pi]`.
    pub fn new(gamma: f64, xi: f64, zeta: f64) -> Result<Self> {
        if !gamma.is_finite() || !(0.0..=FRAC_PI_2).contains(&gamma) {
            return Err(invalid("gamma", format!("{gamma} not in [0, pi/2]")));
        }
        if !xi.is_finite() {
            return Err(invalid("xi", "must be finite"));
        }
        if !zeta.is_finite() {
            return Err(invalid("zeta", "must be finite"));
        }
        Ok(Self {
            gamma,
            xi: wrap_phase(xi),
            zeta: wrap_phase(zeta),
        })
    }

    /// Phase-free coin, the usual Bragg node.
    pub fn real(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0, 0.0)
    }

    /// `gamma = xi = zeta = 0`: pure transmission.
    pub const fn identity() -> Self {
        Self {
            gamma: 0.0,
            xi: 0.0,
            zeta: 0.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

/// Maps an angle into `(-pi, pi]`.
pub(crate) fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Builds `[[t_a, r_b], [r_a, t_b]]` so that `(o_a, o_b) = U (a, b)`.
pub fn make_coin(params: CoinParams) -> Matrix2 {
    let (s, c) = params.gamma.sin_cos();
    let t_a = Complex64::from_polar(c, params.xi);
    let r_b = Complex64::from_polar(s, params.zeta);
    let r_a = -Complex64::from_polar(s, -params.zeta);
    let t_b = Complex64::from_polar(c, -params.xi);
    [[t_a, r_b], [r_a, t_b]]
}

/// What occupies a lattice node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Crystal(CoinParams),
    /// Free space: up-movers continue up, down-movers continue down.
    Free,
}

impl NodeKind {
    pub fn coin(&self) -> CoinParams {
        match self {
            NodeKind::Crystal(p) => *p,
            NodeKind::Free => CoinParams::identity(),
        }
    }

    pub fn matrix(&self) -> Matrix2 {
        make_coin(self.coin())
    }

    pub fn is_crystal(&self) -> bool {
        matches!(self, NodeKind::Crystal(_))
    }
}
