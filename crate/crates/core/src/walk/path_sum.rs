//! Brute-force path enumeration over a lattice.
//!
//! Every column offers each walker two exits: leave the node as an up-mover
//! (to row `m + 1`) or as a down-mover (to row `m - 1`). A path is the list of
//! exits taken, and its amplitude is the product of the coin entries met along
//! the way. Summing the amplitudes of every path that ends on a port gives the
//! amplitude the column-by-column propagation must produce there. This module
//! only looks at coin matrices; it never calls the propagation kernel.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::walk::coin::Matrix2;
use crate::walk::state::{ColumnSpec, Mode};

/// Default limit on the number of enumerated paths.
pub const DEFAULT_PATH_BOUND: u128 = 1 << 20;

/// A node input: row index plus the direction the amplitude travels in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    pub node: usize,
    pub mode: Mode,
}

impl Port {
    pub fn new(node: usize, mode: Mode) -> Self {
        Self { node, mode }
    }
}

fn mode_index(mode: Mode) -> usize {
    match mode {
        Mode::Up => 0,
        Mode::Down => 1,
    }
}

/// Sum over all lattice paths from `source` (input to the first column) to
/// `target` (input to the column after the last one).
pub fn path_sum_amplitude(specs: &[ColumnSpec], source: Port, target: Port) -> Result<Complex64> {
    path_sum_amplitude_bounded(specs, source, target, DEFAULT_PATH_BOUND)
}

pub fn path_sum_amplitude_bounded(
    specs: &[ColumnSpec],
    source: Port,
    target: Port,
    bound: u128,
) -> Result<Complex64> {
    let required = 1u128.checked_shl(specs.len() as u32).unwrap_or(u128::MAX);
    if required > bound {
        return Err(Error::PathBoundExceeded { required, bound });
    }
    let height = match specs.first() {
        Some(s) => s.height(),
        None => {
            return Ok(if source == target {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            })
        }
    };
    if specs.iter().any(|s| s.height() != height) {
        return Err(invalid("specs", "columns have different heights"));
    }
    for (what, port) in [("source node", source), ("target node", target)] {
        if port.node >= height {
            return Err(Error::OutOfRange {
                what,
                index: port.node,
                limit: height,
            });
        }
    }

    let matrices: Vec<Vec<Matrix2>> = specs
        .iter()
        .map(|s| s.kinds().iter().map(|k| k.matrix()).collect())
        .collect();

    let n = specs.len();
    let mut total = Complex64::new(0.0, 0.0);
    // Bit `i` of `choice` is the exit taken at column `i` (0 = up, 1 = down).
    'paths: for choice in 0u64..(1u64 << n) {
        let mut node = source.node as isize;
        let mut mode = mode_index(source.mode);
        let mut amp = Complex64::new(1.0, 0.0);
        for (i, column) in matrices.iter().enumerate() {
            let out = ((choice >> i) & 1) as usize;
            amp *= column[node as usize][out][mode];
            node += if out == 0 { 1 } else { -1 };
            if node < 0 || node >= height as isize {
                continue 'paths;
            }
            mode = out;
        }
        if node as usize == target.node && mode == mode_index(target.mode) {
            total += amp;
        }
    }
    Ok(total)
}
