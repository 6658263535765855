//! Run configuration: a TOML file with fixed sections.
//!
//! ```toml
//! [geometry]                 # all lengths in pendellösung lengths
//! blade_thickness = 87.5
//! gap = 12.0
//! bounces = 1000             # or `length = 24000.0`; exactly one of the two
//!
//! [resolution]
//! layers_per_pendellosung = 20
//!
//! [coin]                     # phases in radians; the coin angle follows from the resolution
//! xi = 0.0
//! zeta = 0.0
//!
//! [source]                   # optional; default is a point source, up-moving,
//! position = 87.5            # at the gap-facing row of the top blade
//! mode = "up"
//! width = 0.75               # rms width, turns the source into a Gaussian beam
//!
//! [recording]
//! map = true
//! map_column_stride = 20     # default: one sample per pendellösung length
//! map_row_stride = 20
//! surface_trace = true
//! exit_traces = true
//! ppm = true
//! ppm_cap = 0.001            # intensities above the cap saturate; default: map maximum
//!
//! [output]
//! directory = "out"
//!
//! [analysis]
//! penetration_start_bounce = 110.0
//! reflectivity_window = [500.0, 800.0]
//! spectrum = true
//! merge_sublattices = true
//! peak_threshold = 0.2
//! beam_profile = "beam.txt"
//!
//! [sweep]                    # used by `sweep` only
//! gaps = [0.25, 0.375, 0.5]  # or from / to / step
//!
//! [limits]
//! max_node_updates = 20000000000
//! ```

use std::path::PathBuf;

use bragg_walk::analysis::{length_for_bounces, MODE_PEAK_THRESHOLD};
use bragg_walk::engine::RecordingOptions;
use bragg_walk::geometry::{CavityGeometry, PlanBudget, SourceSpec};
use bragg_walk::physics::{Resolution, MIN_LAYERS_PER_PENDELLOSUNG};
use bragg_walk::walk::Mode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub coin: CoinConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub recording: RecordingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub limits: LimitsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub blade_thickness: f64,
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounces: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    pub layers_per_pendellosung: u32,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            layers_per_pendellosung: 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinConfig {
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Up,
    Down,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Up => Mode::Up,
            ModeName::Down => Mode::Down,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Height above the bottom lattice row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

fn default_mode() -> ModeName {
    ModeName::Up
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingConfig {
    #[serde(default = "yes")]
    pub map: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_column_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_row_stride: Option<usize>,
    #[serde(default = "yes")]
    pub surface_trace: bool,
    #[serde(default = "yes")]
    pub exit_traces: bool,
    #[serde(default = "yes")]
    pub ppm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppm_cap: Option<f64>,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        Self {
            map: true,
            map_column_stride: None,
            map_row_stride: None,
            surface_trace: true,
            exit_traces: true,
            ppm: true,
            ppm_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penetration_start_bounce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectivity_window: Option<[f64; 2]>,
    #[serde(default)]
    pub spectrum: bool,
    #[serde(default = "yes")]
    pub merge_sublattices: bool,
    #[serde(default = "default_threshold")]
    pub peak_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_profile: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    MODE_PEAK_THRESHOLD
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            penetration_start_bounce: None,
            reflectivity_window: None,
            spectrum: false,
            merge_sublattices: true,
            peak_threshold: MODE_PEAK_THRESHOLD,
            beam_profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_node_updates: u64,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            max_node_updates: PlanBudget::default().max_node_updates,
        }
    }
}

/// 1-based line holding byte `offset` of `text`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if present.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut inside = false;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            inside = l == header;
        } else if inside {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl RunConfig {
    /// Parses and validates. `origin` names the file in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            CliError::Config(format!("{origin}:{line}: {}", e.message()))
        })?;
        cfg.validate().map_err(|(section, key, reason)| {
            let at = locate(text, section, key).map_or(String::new(), |l| format!("{l}:"));
            CliError::Config(format!("{origin}:{at} {section}.{key}: {reason}"))
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let g = &self.geometry;
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(g.blade_thickness) {
            return Err((
                "geometry",
                "blade_thickness",
                format!("{} must be > 0", g.blade_thickness),
            ));
        }
        if !(g.gap.is_finite() && g.gap >= 0.0) {
            return Err(("geometry", "gap", format!("{} must be >= 0", g.gap)));
        }
        match (g.length, g.bounces) {
            (Some(_), Some(_)) => {
                return Err((
                    "geometry",
                    "bounces",
                    "give either length or bounces, not both".into(),
                ))
            }
            (None, None) => {
                return Err((
                    "geometry",
                    "length",
                    "one of length or bounces is required".into(),
                ))
            }
            (Some(l), None) if !finite_pos(l) => {
                return Err(("geometry", "length", format!("{l} must be > 0")))
            }
            (None, Some(b)) if !finite_pos(b) => {
                return Err(("geometry", "bounces", format!("{b} must be > 0")))
            }
            (None, Some(_)) if g.gap == 0.0 => {
                return Err(("geometry", "bounces", "bounces need a nonzero gap".into()))
            }
            _ => {}
        }
        let n = self.resolution.layers_per_pendellosung;
        if n < MIN_LAYERS_PER_PENDELLOSUNG {
            return Err((
                "resolution",
                "layers_per_pendellosung",
                format!("{n} is below the minimum of {MIN_LAYERS_PER_PENDELLOSUNG}"),
            ));
        }
        for (key, v) in [("xi", self.coin.xi), ("zeta", self.coin.zeta)] {
            if !v.is_finite() {
                return Err(("coin", key, format!("{v} must be finite")));
            }
        }
        if let Some(s) = &self.source {
            if let Some(p) = s.position {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(("source", "position", format!("{p} must be >= 0")));
                }
                if p > 2.0 * g.blade_thickness + g.gap {
                    return Err(("source", "position", format!("{p} lies above the lattice")));
                }
            }
            if let Some(w) = s.width {
                if !finite_pos(w) {
                    return Err(("source", "width", format!("{w} must be > 0")));
                }
            }
        }
        let r = &self.recording;
        for (key, v) in [
            ("map_column_stride", r.map_column_stride),
            ("map_row_stride", r.map_row_stride),
        ] {
            if v == Some(0) {
                return Err(("recording", key, "must be >= 1".into()));
            }
        }
        if let Some(c) = r.ppm_cap {
            if !finite_pos(c) {
                return Err(("recording", "ppm_cap", format!("{c} must be > 0")));
            }
        }
        let a = &self.analysis;
        if let Some(b) = a.penetration_start_bounce {
            if !(b.is_finite() && b >= 0.0) {
                return Err((
                    "analysis",
                    "penetration_start_bounce",
                    format!("{b} must be >= 0"),
                ));
            }
            if g.gap == 0.0 {
                return Err((
                    "analysis",
                    "penetration_start_bounce",
                    "needs a nonzero gap".into(),
                ));
            }
            if !r.map {
                return Err((
                    "analysis",
                    "penetration_start_bounce",
                    "needs recording.map = true".into(),
                ));
            }
        }
        if let Some([lo, hi]) = a.reflectivity_window {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                return Err((
                    "analysis",
                    "reflectivity_window",
                    format!("[{lo}, {hi}] is not an increasing range"),
                ));
            }
            if g.gap == 0.0 {
                return Err((
                    "analysis",
                    "reflectivity_window",
                    "needs a nonzero gap".into(),
                ));
            }
        }
        if a.spectrum && !r.surface_trace {
            return Err((
                "analysis",
                "spectrum",
                "needs recording.surface_trace = true".into(),
            ));
        }
        if a.beam_profile.is_some() && !r.exit_traces {
            return Err((
                "analysis",
                "beam_profile",
                "needs recording.exit_traces = true".into(),
            ));
        }
        if !(a.peak_threshold.is_finite() && (0.0..=1.0).contains(&a.peak_threshold)) {
            return Err((
                "analysis",
                "peak_threshold",
                format!("{} not in [0, 1]", a.peak_threshold),
            ));
        }
        if let Some(s) = &self.sweep {
            s.gaps_checked()
                .map_err(|(key, reason)| ("sweep", key, reason))?;
        }
        if self.limits.max_node_updates == 0 {
            return Err(("limits", "max_node_updates", "must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.resolution.layers_per_pendellosung).expect("validated")
    }

    pub fn length(&self) -> f64 {
        match (self.geometry.length, self.geometry.bounces) {
            (Some(l), _) => l,
            (None, Some(b)) => length_for_bounces(b, self.geometry.gap).expect("validated"),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn cavity(&self) -> Result<CavityGeometry, CliError> {
        let g = &self.geometry;
        Ok(CavityGeometry::with_resolution(
            g.blade_thickness,
            g.gap,
            self.length(),
            &self.resolution(),
            self.coin.xi,
            self.coin.zeta,
        )?)
    }

    /// Source override; `default_row` is the plan's default source row.
    pub fn source_spec(&self, default_row: usize) -> Option<SourceSpec> {
        let s = self.source.as_ref()?;
        let res = self.resolution();
        let row = s.position.map_or(default_row, |p| res.cells(p));
        Some(match s.width {
            Some(w) => {
                SourceSpec::gaussian(row, s.mode.into(), w * res.layers_per_pendellosung() as f64)
            }
            None => SourceSpec::point(row, s.mode.into()),
        })
    }

    pub fn recording_options(&self) -> RecordingOptions {
        let n = self.resolution.layers_per_pendellosung as usize;
        let r = &self.recording;
        RecordingOptions {
            record_map: r.map,
            map_column_stride: r.map_column_stride.unwrap_or(n),
            map_row_stride: r.map_row_stride.unwrap_or(n),
            record_surface_trace: r.surface_trace,
            record_exit_traces: r.exit_traces,
            row_band: None,
        }
    }

    pub fn budget(&self) -> PlanBudget {
        PlanBudget {
            max_node_updates: self.limits.max_node_updates,
        }
    }
}

impl SweepConfig {
    fn gaps_checked(&self) -> Result<Vec<f64>, (&'static str, String)> {
        let gaps = match (&self.gaps, self.from, self.to, self.step) {
            (Some(g), None, None, None) => g.clone(),
            (None, Some(from), Some(to), Some(step)) => {
                if !(step.is_finite()
                    && step > 0.0
                    && from.is_finite()
                    && to.is_finite()
                    && to >= from)
                {
                    return Err((
                        "step",
                        format!("from {from} to {to} step {step} is not a valid range"),
                    ));
                }
                let count = ((to - from) / step + 1e-9).floor() as usize;
                (0..=count).map(|k| from + k as f64 * step).collect()
            }
            _ => return Err(("gaps", "give either gaps or all of from, to, step".into())),
        };
        if gaps.is_empty() {
            return Err(("gaps", "at least one gap is required".into()));
        }
        if let Some(g) = gaps.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(("gaps", format!("{g} must be >= 0")));
        }
        Ok(gaps)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.gaps_checked().expect("validated")
    }
}
