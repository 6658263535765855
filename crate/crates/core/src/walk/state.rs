use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::walk::coin::NodeKind;

/// Propagation direction of an amplitude entering a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Up,
    Down,
}

/// Inputs `(a_m, b_m)` to one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModePair {
    pub up: Complex64,
    pub down: Complex64,
}

impl ModePair {
    pub fn intensity(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    pub fn get(&self, mode: Mode) -> Complex64 {
        match mode {
            Mode::Up => self.up,
            Mode::Down => self.down,
        }
    }
}

/// Ordered node kinds of one lattice column, bottom row first.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    kinds: Vec<NodeKind>,
}

impl ColumnSpec {
    pub fn new(kinds: Vec<NodeKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(invalid("column height", "must be at least 1"));
        }
        Ok(Self { kinds })
    }

    pub fn uniform(kind: NodeKind, height: usize) -> Result<Self> {
        Self::new(vec![kind; height])
    }

    pub fn height(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, row: usize) -> NodeKind {
        self.kinds[row]
    }
}

/// Probability leaked through each lattice boundary during one column.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ColumnLeak {
    pub top: f64,
    pub bottom: f64,
}

/// Amplitudes on one lattice column plus the probability that has left
/// through the top and bottom boundaries so far.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub(crate) amplitudes: Vec<ModePair>,
    pub(crate) leak_top: f64,
    pub(crate) leak_bottom: f64,
    pub(crate) history: Option<Vec<ColumnLeak>>,
}

impl WalkState {
    pub fn zeros(height: usize) -> Result<Self> {
        if height == 0 {
            return Err(invalid("state height", "must be at least 1"));
        }
        Ok(Self {
            amplitudes: vec![ModePair::default(); height],
            leak_top: 0.0,
            leak_bottom: 0.0,
            history: None,
        })
    }

    /// Single-node excitation.
    pub fn point(height: usize, row: usize, mode: Mode, amplitude: Complex64) -> Result<Self> {
        let mut s = Self::zeros(height)?;
        s.set(row, mode, amplitude)?;
        Ok(s)
    }

    /// Builds a state from explicit pairs with zero leak tallies.
    pub fn from_amplitudes(amplitudes: Vec<ModePair>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("state height", "must be at least 1"));
        }
        Ok(Self {
            amplitudes,
            leak_top: 0.0,
            leak_bottom: 0.0,
            history: None,
        })
    }

    pub(crate) fn from_parts(amplitudes: Vec<ModePair>, leak_top: f64, leak_bottom: f64) -> Self {
        Self {
            amplitudes,
            leak_top,
            leak_bottom,
            history: None,
        }
    }

    /// Turns on per-column leak recording from this point on.
    pub fn with_leak_history(mut self) -> Self {
        self.history.get_or_insert_with(Vec::new);
        self
    }

    pub fn set(&mut self, row: usize, mode: Mode, amplitude: Complex64) -> Result<()> {
        let h = self.height();
        let pair = self.amplitudes.get_mut(row).ok_or(Error::OutOfRange {
            what: "state row",
            index: row,
            limit: h,
        })?;
        match mode {
            Mode::Up => pair.up = amplitude,
            Mode::Down => pair.down = amplitude,
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[ModePair] {
        &self.amplitudes
    }

    pub fn amplitude(&self, row: usize, mode: Mode) -> Complex64 {
        self.amplitudes[row].get(mode)
    }

    pub fn leak_top(&self) -> f64 {
        self.leak_top
    }

    pub fn leak_bottom(&self) -> f64 {
        self.leak_bottom
    }

    pub fn leak_history(&self) -> Option<&[ColumnLeak]> {
        self.history.as_deref()
    }

    /// Probability still on the lattice.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(ModePair::intensity).sum()
    }

    /// Remaining norm plus everything leaked; constant under propagation.
    pub fn total(&self) -> f64 {
        self.norm() + self.leak_top + self.leak_bottom
    }

    pub fn intensity(&self, row: usize) -> f64 {
        self.amplitudes[row].intensity()
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.leak_top.is_finite()
            && self.leak_bottom.is_finite()
            && self
                .amplitudes
                .iter()
                .all(|p| p.up.is_finite() && p.down.is_finite())
    }
}
