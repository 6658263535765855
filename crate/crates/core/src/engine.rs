//! Column loop over a lattice plan and the per-column records it produces.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{build_lattice_plan, column_spec_at, CavityGeometry, LatticePlan};
use crate::physics::Resolution;
use crate::walk::{ModePair, Propagator, WalkState};

/// What to keep while the column loop runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordingOptions {
    /// Keep a downsampled intensity map.
    pub record_map: bool,
    pub map_column_stride: usize,
    pub map_row_stride: usize,
    pub record_surface_trace: bool,
    pub record_exit_traces: bool,
    /// Split each column into row bands of this size and process them on the
    /// rayon pool. `None` runs serially.
    pub row_band: Option<usize>,
}

impl RecordingOptions {
    /// One map sample per pendellösung length in each direction, all traces on.
    pub fn for_resolution(resolution: Resolution) -> Self {
        let n = resolution.layers_per_pendellosung() as usize;
        Self {
            record_map: true,
            map_column_stride: n,
            map_row_stride: n,
            record_surface_trace: true,
            record_exit_traces: true,
            row_band: None,
        }
    }

    /// Only the confined-intensity trace; what a sweep needs.
    pub fn minimal() -> Self {
        Self {
            record_map: false,
            map_column_stride: 1,
            map_row_stride: 1,
            record_surface_trace: false,
            record_exit_traces: false,
            row_band: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.map_column_stride == 0 {
            return Err(invalid("map_column_stride", "must be >= 1"));
        }
        if self.map_row_stride == 0 {
            return Err(invalid("map_row_stride", "must be >= 1"));
        }
        if self.row_band == Some(0) {
            return Err(invalid("row_band", "must be >= 1"));
        }
        Ok(())
    }
}

/// Intensity `|a|² + |b|²` sampled on a (row, column) grid.
///
/// Grid row `i` is lattice row `i * row_stride` (bottom first); grid column
/// `j` belongs to lattice column `c = first_column + j * column_stride`. With
/// `column_stride > 1` a sample is the mean of the states before and after
/// column `c`, so both parity sublattices are represented; with stride 1 it
/// is the state after `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub rows: usize,
    pub columns: usize,
    pub row_stride: usize,
    pub column_stride: usize,
    pub first_column: usize,
    /// Row-major, `rows * columns` values.
    pub data: Vec<f64>,
}

impl IntensityMap {
    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.data[row * self.columns + column]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Lattice column of grid column `j`.
    pub fn lattice_column(&self, j: usize) -> usize {
        self.first_column + j * self.column_stride
    }

    fn from_columns(
        samples: &[Vec<f64>],
        row_stride: usize,
        column_stride: usize,
        first_column: usize,
    ) -> Self {
        let columns = samples.len();
        let rows = samples.first().map_or(0, Vec::len);
        let mut data = vec![0.0; rows * columns];
        for (j, col) in samples.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * columns + j] = *v;
            }
        }
        Self {
            rows,
            columns,
            row_stride,
            column_stride,
            first_column,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    /// First lattice column covered by the per-column traces.
    pub start_column: usize,
    pub layers_per_pendellosung: u32,
    pub initial_norm: f64,
    pub intensity_map: Option<IntensityMap>,
    /// Probability leaving through the top surface, per column.
    pub exit_top: Vec<f64>,
    pub exit_bottom: Vec<f64>,
    /// Probability still on the lattice after each column.
    pub confined: Vec<f64>,
    /// Down-mode intensity on the row just below the top blade, per column.
    pub surface_trace: Vec<f64>,
    pub final_state: WalkState,
}

impl SimulationRecord {
    pub fn final_confined(&self) -> f64 {
        self.final_state.norm()
    }

    pub fn total_leak_top(&self) -> f64 {
        self.final_state.leak_top()
    }

    pub fn total_leak_bottom(&self) -> f64 {
        self.final_state.leak_bottom()
    }

    /// Lattice spacing in pendellösung units.
    pub fn spacing(&self) -> f64 {
        1.0 / self.layers_per_pendellosung as f64
    }
}

/// Runs every column of `plan` starting from its source.
pub fn run_simulation(plan: &LatticePlan, options: &RecordingOptions) -> Result<SimulationRecord> {
    run_from(plan, options, plan.initial_state()?, 0)
}

/// Continues a run from `state`, which has already passed `start_column`
/// columns (e.g. a state restored from a checkpoint).
pub fn run_from(
    plan: &LatticePlan,
    options: &RecordingOptions,
    mut state: WalkState,
    start_column: usize,
) -> Result<SimulationRecord> {
    options.validate()?;
    if state.height() != plan.height() {
        return Err(Error::HeightMismatch {
            state: state.height(),
            column: plan.height(),
        });
    }
    if start_column > plan.columns() {
        return Err(Error::OutOfRange {
            what: "start column",
            index: start_column,
            limit: plan.columns(),
        });
    }
    let n_cols = plan.columns() - start_column;
    let initial_norm = state.total();
    let surface_row = plan.surface_trace_row();

    let mut exit_top = Vec::with_capacity(if options.record_exit_traces {
        n_cols
    } else {
        0
    });
    let mut exit_bottom = Vec::with_capacity(exit_top.capacity());
    let mut confined = Vec::with_capacity(n_cols);
    let mut surface_trace = Vec::with_capacity(if options.record_surface_trace {
        n_cols
    } else {
        0
    });
    let mut map_columns: Vec<Vec<f64>> = Vec::new();

    let mut scratch: Vec<ModePair> = Vec::with_capacity(plan.height());
    // The cavity is uniform along its length: one compiled column serves all.
    let propagator = Propagator::new(column_spec_at(plan, 0)?);

    let sample = |state: &WalkState| -> Vec<f64> {
        state
            .amplitudes()
            .iter()
            .step_by(options.map_row_stride)
            .map(ModePair::intensity)
            .collect()
    };
    let paired = options.map_column_stride > 1;
    let mut before: Vec<f64> = Vec::new();

    for column in start_column..plan.columns() {
        let on_grid = options.record_map && column % options.map_column_stride == 0;
        if on_grid && paired {
            before = sample(&state);
        }
        let leak = match options.row_band {
            Some(band) => propagator.step_parallel(&mut state, &mut scratch, band)?,
            None => propagator.step(&mut state, &mut scratch)?,
        };
        let remaining = state.norm();
        if !(remaining.is_finite() && leak.top.is_finite() && leak.bottom.is_finite()) {
            return Err(Error::NonFinite { column });
        }
        confined.push(remaining);
        if options.record_exit_traces {
            exit_top.push(leak.top);
            exit_bottom.push(leak.bottom);
        }
        if options.record_surface_trace {
            surface_trace.push(state.amplitudes()[surface_row].down.norm_sqr());
        }
        if on_grid {
            let mut after = sample(&state);
            if paired {
                for (a, b) in after.iter_mut().zip(&before) {
                    *a = 0.5 * (*a + b);
                }
            }
            map_columns.push(after);
        }
    }
    if !state.all_finite() {
        return Err(Error::NonFinite {
            column: plan.columns().saturating_sub(1),
        });
    }

    Ok(SimulationRecord {
        start_column,
        layers_per_pendellosung: plan.resolution().layers_per_pendellosung(),
        initial_norm,
        intensity_map: options.record_map.then(|| {
            IntensityMap::from_columns(
                &map_columns,
                options.map_row_stride,
                options.map_column_stride,
                start_column.next_multiple_of(options.map_column_stride),
            )
        }),
        exit_top,
        exit_bottom,
        confined,
        surface_trace,
        final_state: state,
    })
}

/// Outcome of one member of a gap sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gap: f64,
    /// Final confined intensity, or the error annotated with the gap.
    pub result: Result<f64>,
}

/// One independent run per gap value, results in input order. Runs execute
/// on a pool of `workers` threads.
pub fn sweep_gap(
    base: &CavityGeometry,
    gaps: &[f64],
    resolution: Resolution,
    options: &RecordingOptions,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let run_one = |gap: f64| -> Result<f64> {
        let geometry = base.with_gap(gap)?;
        let plan = build_lattice_plan(&geometry, resolution)?;
        Ok(run_simulation(&plan, options)?.final_confined())
    };
    Ok(pool.install(|| {
        gaps.par_iter()
            .map(|&gap| SweepPoint {
                gap,
                result: run_one(gap).map_err(|e| Error::Sweep {
                    gap,
                    source: Box::new(e),
                }),
            })
            .collect()
    }))
}
