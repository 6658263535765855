//! Two-blade cavity laid out on the lattice.
//!
//! Rows are numbered from the bottom: the bottom blade occupies the lowest
//! rows, then the gap, then the top blade. The outer blade surfaces coincide
//! with the lattice edges, so anything crossing them is tallied as leakage.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{invalid, Error, ResourceReport, Result};
use crate::physics::Resolution;
use crate::walk::{CoinParams, ColumnSpec, Mode, ModePair, NodeKind, WalkState};

/// Physical cavity, lengths in pendellösung units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    blade_thickness: f64,
    gap: f64,
    length: f64,
    coin: CoinParams,
}

impl CavityGeometry {
    pub fn new(blade_thickness: f64, gap: f64, length: f64, coin: CoinParams) -> Result<Self> {
        if !(blade_thickness.is_finite() && blade_thickness > 0.0) {
            return Err(invalid(
                "blade_thickness",
                format!("{blade_thickness} must be > 0"),
            ));
        }
        if !(gap.is_finite() && gap >= 0.0) {
            return Err(invalid("gap", format!("{gap} must be >= 0")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length", format!("{length} must be > 0")));
        }
        Ok(Self {
            blade_thickness,
            gap,
            length,
            coin,
        })
    }

    /// Cavity whose crystal coin angle follows from `resolution`.
    pub fn with_resolution(
        blade_thickness: f64,
        gap: f64,
        length: f64,
        resolution: &Resolution,
        xi: f64,
        zeta: f64,
    ) -> Result<Self> {
        Self::new(
            blade_thickness,
            gap,
            length,
            CoinParams::new(resolution.gamma(), xi, zeta)?,
        )
    }

    pub fn blade_thickness(&self) -> f64 {
        self.blade_thickness
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn coin(&self) -> CoinParams {
        self.coin
    }

    pub fn with_gap(&self, gap: f64) -> Result<Self> {
        Self::new(self.blade_thickness, gap, self.length, self.coin)
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.blade_thickness, self.gap, length, self.coin)
    }
}

/// Transverse shape of the injected wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceProfile {
    /// One node: a spherical wave.
    Point,
    /// Gaussian in rows; `sigma_rows` is the rms width of the intensity.
    Gaussian { sigma_rows: f64 },
}

/// Initial excitation fed into the first column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub row: usize,
    pub mode: Mode,
    /// Total amplitude; for a Gaussian profile the state norm is `|amplitude|²`.
    pub amplitude: Complex64,
    pub profile: SourceProfile,
}

impl SourceSpec {
    pub fn point(row: usize, mode: Mode) -> Self {
        Self {
            row,
            mode,
            amplitude: Complex64::new(1.0, 0.0),
            profile: SourceProfile::Point,
        }
    }

    pub fn gaussian(row: usize, mode: Mode, sigma_rows: f64) -> Self {
        Self {
            row,
            mode,
            amplitude: Complex64::new(1.0, 0.0),
            profile: SourceProfile::Gaussian { sigma_rows },
        }
    }

    fn validate(&self, height: usize) -> Result<()> {
        if self.row >= height {
            return Err(Error::OutOfRange {
                what: "source row",
                index: self.row,
                limit: height,
            });
        }
        if !(self.amplitude.is_finite() && self.amplitude.norm_sqr() > 0.0) {
            return Err(invalid("source amplitude", "must be finite and non-zero"));
        }
        if let SourceProfile::Gaussian { sigma_rows } = self.profile {
            if !(sigma_rows.is_finite() && sigma_rows > 0.0) {
                return Err(invalid("source width", format!("{sigma_rows} must be > 0")));
            }
        }
        Ok(())
    }

    /// Builds the state this source produces on a lattice of `height` rows.
    pub fn state(&self, height: usize) -> Result<WalkState> {
        self.validate(height)?;
        match self.profile {
            SourceProfile::Point => WalkState::point(height, self.row, self.mode, self.amplitude),
            SourceProfile::Gaussian { sigma_rows } => {
                let reach = (6.0 * sigma_rows).ceil() as usize;
                let lo = self.row.saturating_sub(reach);
                let hi = (self.row + reach + 1).min(height);
                let weights: Vec<f64> = (lo..hi)
                    .map(|m| {
                        let x = m as f64 - self.row as f64;
                        (-x * x / (4.0 * sigma_rows * sigma_rows)).exp()
                    })
                    .collect();
                let scale = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                let mut pairs = vec![ModePair::default(); height];
                for (m, w) in (lo..hi).zip(&weights) {
                    let amp = self.amplitude * (w / scale);
                    match self.mode {
                        Mode::Up => pairs[m].up = amp,
                        Mode::Down => pairs[m].down = amp,
                    }
                }
                WalkState::from_amplitudes(pairs)
            }
        }
    }
}

/// Limit on `rows * columns` for a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanBudget {
    pub max_node_updates: u64,
}

impl Default for PlanBudget {
    fn default() -> Self {
        Self {
            max_node_updates: 20_000_000_000,
        }
    }
}

/// Row bands and column count realising a cavity on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePlan {
    rows_bottom_blade: usize,
    rows_gap: usize,
    rows_top_blade: usize,
    columns: usize,
    source: SourceSpec,
    resolution: Resolution,
    coin: CoinParams,
    spec: ColumnSpec,
}

pub fn build_lattice_plan(
    geometry: &CavityGeometry,
    resolution: Resolution,
) -> Result<LatticePlan> {
    build_lattice_plan_with_budget(geometry, resolution, PlanBudget::default())
}

pub fn build_lattice_plan_with_budget(
    geometry: &CavityGeometry,
    resolution: Resolution,
    budget: PlanBudget,
) -> Result<LatticePlan> {
    let blade = resolution.cells(geometry.blade_thickness);
    if blade == 0 {
        return Err(invalid(
            "blade_thickness",
            format!(
                "{} rounds to zero rows at {} layers per pendellosung length",
                geometry.blade_thickness,
                resolution.layers_per_pendellosung()
            ),
        ));
    }
    let gap = resolution.cells(geometry.gap);
    let columns = resolution.cells(geometry.length);
    if columns == 0 {
        return Err(invalid("length", "rounds to zero columns"));
    }
    let height = 2 * blade + gap;
    let node_updates = height as u64 * columns as u64;
    if node_updates > budget.max_node_updates {
        return Err(Error::BudgetExceeded(ResourceReport {
            rows: height,
            columns,
            node_updates,
            limit: budget.max_node_updates,
            state_bytes: 2 * height as u64 * std::mem::size_of::<ModePair>() as u64,
        }));
    }

    let crystal = NodeKind::Crystal(geometry.coin);
    let mut kinds = vec![crystal; height];
    for k in &mut kinds[blade..blade + gap] {
        *k = NodeKind::Free;
    }
    Ok(LatticePlan {
        rows_bottom_blade: blade,
        rows_gap: gap,
        rows_top_blade: blade,
        columns,
        // up-mover on the top blade's gap-facing row
        source: SourceSpec::point(blade + gap, Mode::Up),
        resolution,
        coin: geometry.coin,
        spec: ColumnSpec::new(kinds)?,
    })
}

/// The column spec used at `column`. The cavity is uniform along its length,
/// so every column shares one spec.
pub fn column_spec_at(plan: &LatticePlan, column: usize) -> Result<&ColumnSpec> {
    if column >= plan.columns {
        return Err(Error::OutOfRange {
            what: "column",
            index: column,
            limit: plan.columns,
        });
    }
    Ok(&plan.spec)
}

impl LatticePlan {
    pub fn rows_bottom_blade(&self) -> usize {
        self.rows_bottom_blade
    }

    pub fn rows_gap(&self) -> usize {
        self.rows_gap
    }

    pub fn rows_top_blade(&self) -> usize {
        self.rows_top_blade
    }

    pub fn height(&self) -> usize {
        self.rows_bottom_blade + self.rows_gap + self.rows_top_blade
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn coin(&self) -> CoinParams {
        self.coin
    }

    pub fn bottom_blade_rows(&self) -> Range<usize> {
        0..self.rows_bottom_blade
    }

    pub fn gap_rows(&self) -> Range<usize> {
        self.rows_bottom_blade..self.rows_bottom_blade + self.rows_gap
    }

    pub fn top_blade_rows(&self) -> Range<usize> {
        let start = self.rows_bottom_blade + self.rows_gap;
        start..start + self.rows_top_blade
    }

    /// Gap-facing row of the top blade.
    pub fn top_inner_surface_row(&self) -> usize {
        self.top_blade_rows().start
    }

    /// Row just below the top blade, where the surface trace is sampled.
    /// Falls inside the bottom blade when the gap is empty.
    pub fn surface_trace_row(&self) -> usize {
        self.top_inner_surface_row() - 1
    }

    pub fn with_source(mut self, source: SourceSpec) -> Result<Self> {
        source.validate(self.height())?;
        self.source = source;
        Ok(self)
    }

    /// Same plan cut to `columns` columns.
    pub fn with_columns(mut self, columns: usize) -> Result<Self> {
        if columns == 0 {
            return Err(invalid("columns", "must be at least 1"));
        }
        self.columns = columns;
        Ok(self)
    }

    pub fn initial_state(&self) -> Result<WalkState> {
        self.source.state(self.height())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Propagator;
    use approx::assert_relative_eq;

    fn cavity(t: f64, d: f64, l: f64, n: u32) -> LatticePlan {
        let r = Resolution::new(n).unwrap();
        let g = CavityGeometry::with_resolution(t, d, l, &r, 0.0, 0.0).unwrap();
        build_lattice_plan(&g, r).unwrap()
    }

    #[test]
    fn fig3_plan_rows() {
        let p = cavity(87.5, 12.0, 16000.0, 20);
        assert_eq!(
            (p.rows_bottom_blade(), p.rows_gap(), p.rows_top_blade()),
            (1750, 240, 1750)
        );
        assert_eq!(p.height(), 3740);
        assert_eq!(p.columns(), 320_000);
        assert_eq!(p.source().row, 1990);
        assert_eq!(p.source().mode, Mode::Up);
    }

    #[test]
    fn zero_gap_is_a_single_slab() {
        let p = cavity(1.0, 0.0, 1.0, 10);
        assert_eq!(p.rows_gap(), 0);
        assert_eq!(p.height(), 20);
        let spec = column_spec_at(&p, 0).unwrap();
        assert!(spec.kinds().iter().all(NodeKind::is_crystal));
    }

    #[test]
    fn arithmetic_example() {
        let p = cavity(10.0, 4.0, 600.0, 50);
        assert_eq!(p.height(), 1200);
        assert_eq!(p.columns(), 30_000);
    }

    #[test]
    fn column_spec_bands() {
        let p = cavity(10.0, 4.0, 600.0, 20);
        let spec = column_spec_at(&p, 123).unwrap();
        for (m, k) in spec.kinds().iter().enumerate() {
            let in_gap = p.gap_rows().contains(&m);
            assert_eq!(k.is_crystal(), !in_gap, "row {m}");
        }
        assert_eq!(p.gap_rows(), 200..280);
        assert_eq!(p.top_blade_rows(), 280..480);
        assert_eq!(
            column_spec_at(&p, 0).unwrap(),
            column_spec_at(&p, p.columns() - 1).unwrap()
        );
        assert!(column_spec_at(&p, p.columns()).is_err());
    }

    #[test]
    fn invalid_geometry() {
        let c = CoinParams::identity();
        assert!(CavityGeometry::new(0.0, 1.0, 1.0, c).is_err());
        assert!(CavityGeometry::new(-1.0, 1.0, 1.0, c).is_err());
        assert!(CavityGeometry::new(1.0, -0.1, 1.0, c).is_err());
        assert!(CavityGeometry::new(1.0, 1.0, 0.0, c).is_err());
        // positive but below one row
        let r = Resolution::new(4).unwrap();
        let g = CavityGeometry::new(0.1, 1.0, 1.0, c).unwrap();
        assert!(build_lattice_plan(&g, r).is_err());
    }

    #[test]
    fn budget_report() {
        let r = Resolution::new(20).unwrap();
        let g = CavityGeometry::with_resolution(87.5, 12.0, 16000.0, &r, 0.0, 0.0).unwrap();
        let err = build_lattice_plan_with_budget(
            &g,
            r,
            PlanBudget {
                max_node_updates: 1_000_000,
            },
        )
        .unwrap_err();
        match err {
            Error::BudgetExceeded(rep) => {
                assert_eq!(rep.rows, 3740);
                assert_eq!(rep.columns, 320_000);
                assert_eq!(rep.node_updates, 3740 * 320_000);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rounding_within_one_layer() {
        let r = Resolution::new(7).unwrap();
        for &(t, d) in &[(1.23, 0.57), (3.01, 2.99), (0.5, 0.0), (12.34, 5.55)] {
            let g = CavityGeometry::with_resolution(t, d, 3.3, &r, 0.0, 0.0).unwrap();
            let p = build_lattice_plan(&g, r).unwrap();
            assert!((r.length(p.rows_top_blade()) - t).abs() <= 0.5 / 7.0 + 1e-12);
            assert!((r.length(p.rows_gap()) - d).abs() <= 0.5 / 7.0 + 1e-12);
        }
    }

    #[test]
    fn gaussian_source_is_normalised() {
        let s = SourceSpec::gaussian(50, Mode::Up, 4.0).state(100).unwrap();
        assert_relative_eq!(s.norm(), 1.0, max_relative = 1e-14);
        assert!(s.amplitude(50, Mode::Up).re > s.amplitude(54, Mode::Up).re);
        assert_eq!(s.amplitude(50, Mode::Down), Complex64::new(0.0, 0.0));
        // clipped at the lattice edge, still unit norm
        let s = SourceSpec::gaussian(1, Mode::Down, 4.0).state(100).unwrap();
        assert_relative_eq!(s.norm(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn source_outside_lattice_rejected() {
        let p = cavity(1.0, 1.0, 1.0, 10);
        assert!(p
            .clone()
            .with_source(SourceSpec::point(30, Mode::Up))
            .is_err());
        assert!(p.with_source(SourceSpec::point(29, Mode::Down)).is_ok());
    }

    #[test]
    fn zero_gap_steps_like_a_double_thickness_slab() {
        let t = 1.5;
        let p = cavity(t, 0.0, 4.0, 10);
        let r = Resolution::new(10).unwrap();
        let slab = ColumnSpec::uniform(
            NodeKind::Crystal(CoinParams::real(r.gamma()).unwrap()),
            r.cells(2.0 * t),
        )
        .unwrap();
        let a = Propagator::new(column_spec_at(&p, 0).unwrap());
        let b = Propagator::new(&slab);
        let mut s1 = p.initial_state().unwrap();
        let mut s2 = WalkState::point(
            slab.height(),
            r.cells(t),
            Mode::Up,
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for _ in 0..p.columns() {
            a.step(&mut s1, &mut x).unwrap();
            b.step(&mut s2, &mut y).unwrap();
            assert_eq!(s1, s2);
        }
    }
}
