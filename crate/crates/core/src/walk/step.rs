use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::walk::coin::Matrix2;
use crate::walk::state::{ColumnLeak, ColumnSpec, ModePair, WalkState};

#[derive(Debug, Clone, Copy)]
struct NodeCoeffs {
    t_a: Complex64,
    r_b: Complex64,
    r_a: Complex64,
    t_b: Complex64,
}

impl NodeCoeffs {
    fn from_matrix(m: Matrix2) -> Self {
        Self {
            t_a: m[0][0],
            r_b: m[0][1],
            r_a: m[1][0],
            t_b: m[1][1],
        }
    }

    #[inline(always)]
    fn out_up(&self, p: ModePair) -> Complex64 {
        self.t_a * p.up + self.r_b * p.down
    }

    #[inline(always)]
    fn out_down(&self, p: ModePair) -> Complex64 {
        self.r_a * p.up + self.t_b * p.down
    }
}

/// A column compiled to per-node coefficients, reusable across many steps.
///
/// The step is written as a gather: output row `j` reads the up-output of node
/// `j - 1` and the down-output of node `j + 1` from the previous buffer, so
/// rows can be split into independent bands without write hazards.
#[derive(Debug, Clone)]
pub struct Propagator {
    coeffs: Vec<NodeCoeffs>,
}

impl Propagator {
    pub fn new(spec: &ColumnSpec) -> Self {
        Self {
            coeffs: spec
                .kinds()
                .iter()
                .map(|k| NodeCoeffs::from_matrix(k.matrix()))
                .collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.coeffs.len()
    }

    fn check(&self, state: &WalkState) -> Result<()> {
        if state.height() != self.height() {
            return Err(Error::HeightMismatch {
                state: state.height(),
                column: self.height(),
            });
        }
        Ok(())
    }

    #[inline(always)]
    fn gather(&self, old: &[ModePair], j: usize) -> ModePair {
        let h = old.len();
        let up = if j > 0 {
            self.coeffs[j - 1].out_up(old[j - 1])
        } else {
            Complex64::new(0.0, 0.0)
        };
        let down = if j + 1 < h {
            self.coeffs[j + 1].out_down(old[j + 1])
        } else {
            Complex64::new(0.0, 0.0)
        };
        ModePair { up, down }
    }

    fn boundary_leak(&self, old: &[ModePair]) -> ColumnLeak {
        let h = old.len();
        ColumnLeak {
            top: self.coeffs[h - 1].out_up(old[h - 1]).norm_sqr(),
            bottom: self.coeffs[0].out_down(old[0]).norm_sqr(),
        }
    }

    fn finish(&self, state: &mut WalkState, scratch: &mut Vec<ModePair>, leak: ColumnLeak) {
        std::mem::swap(&mut state.amplitudes, scratch);
        state.leak_top += leak.top;
        state.leak_bottom += leak.bottom;
        if let Some(h) = state.history.as_mut() {
            h.push(leak);
        }
    }

    /// Advances `state` by one column. `scratch` is the second buffer of the
    /// double-buffer pair and is resized as needed.
    pub fn step(&self, state: &mut WalkState, scratch: &mut Vec<ModePair>) -> Result<ColumnLeak> {
        self.check(state)?;
        let h = self.height();
        scratch.resize(h, ModePair::default());
        let old = &state.amplitudes;
        let leak = self.boundary_leak(old);
        if h == 1 {
            scratch[0] = ModePair::default();
        } else {
            scratch[0] = ModePair {
                up: Complex64::new(0.0, 0.0),
                down: self.coeffs[1].out_down(old[1]),
            };
            for (j, out) in scratch.iter_mut().enumerate().take(h - 1).skip(1) {
                let below = old[j - 1];
                let above = old[j + 1];
                *out = ModePair {
                    up: self.coeffs[j - 1].out_up(below),
                    down: self.coeffs[j + 1].out_down(above),
                };
            }
            scratch[h - 1] = ModePair {
                up: self.coeffs[h - 2].out_up(old[h - 2]),
                down: Complex64::new(0.0, 0.0),
            };
        }
        self.finish(state, scratch, leak);
        Ok(leak)
    }

    /// Same as [`Propagator::step`] with rows split into bands of `band` rows
    /// processed on the rayon pool. Every output element is computed with the
    /// same arithmetic as the serial path.
    pub fn step_parallel(
        &self,
        state: &mut WalkState,
        scratch: &mut Vec<ModePair>,
        band: usize,
    ) -> Result<ColumnLeak> {
        self.check(state)?;
        let h = self.height();
        scratch.resize(h, ModePair::default());
        let old = &state.amplitudes;
        let leak = self.boundary_leak(old);
        let band = band.max(1);
        scratch
            .par_chunks_mut(band)
            .enumerate()
            .for_each(|(k, chunk)| {
                let base = k * band;
                for (i, out) in chunk.iter_mut().enumerate() {
                    *out = self.gather(old, base + i);
                }
            });
        self.finish(state, scratch, leak);
        Ok(leak)
    }
}

/// Applies one lattice column to `state`, returning the propagated state.
pub fn apply_column(state: &WalkState, spec: &ColumnSpec) -> Result<WalkState> {
    let mut next = state.clone();
    let mut scratch = Vec::with_capacity(state.height());
    Propagator::new(spec).step(&mut next, &mut scratch)?;
    Ok(next)
}
