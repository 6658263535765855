//! Node coin, single-column propagation with absorbing boundaries, and a
//! path-enumeration oracle.

mod coin;
mod path_sum;
mod state;
mod step;

pub use coin::{make_coin, CoinParams, Matrix2, NodeKind};
pub use path_sum::{path_sum_amplitude, path_sum_amplitude_bounded, Port, DEFAULT_PATH_BOUND};
pub use state::{ColumnLeak, ColumnSpec, Mode, ModePair, WalkState};
pub use step::{apply_column, Propagator};
