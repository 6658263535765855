//! Post-processing of simulation records: bounce indexing, penetration
//! profiles, reflectivity fits, spectra, oscillation periods and beam
//! convolution.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::engine::SimulationRecord;
use crate::error::{Error, Result};
use crate::geometry::LatticePlan;
use crate::walk::WalkState;

/// Fraction of the largest non-DC magnitude a spectral peak must exceed to
/// count as a mode.
pub const MODE_PEAK_THRESHOLD: f64 = 0.2;

/// Fewest points `fit_reflectivity` accepts.
pub const MIN_FIT_POINTS: usize = 10;

/// Fewest samples `spectrum` accepts.
pub const MIN_SPECTRUM_SAMPLES: usize = 16;

fn analysis_err(msg: impl Into<String>) -> Error {
    Error::Analysis(msg.into())
}

/// Normalised weights on a uniform position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamProfile {
    /// Grid spacing in pendellösung lengths.
    spacing: f64,
    weights: Vec<f64>,
}

impl BeamProfile {
    pub fn new(spacing: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(analysis_err("beam profile has no samples"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(analysis_err(format!(
                "beam profile spacing {spacing} must be > 0"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(analysis_err(format!(
                "beam profile weight {w} is negative or non-finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(analysis_err("beam profile weights sum to zero"));
        }
        Ok(Self {
            spacing,
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    /// Gaussian of rms width `sigma`, sampled every `spacing` out to 4σ.
    pub fn gaussian(sigma: f64, spacing: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(analysis_err(format!("beam width {sigma} must be > 0")));
        }
        let half = (4.0 * sigma / spacing).ceil() as i64;
        let weights = (-half..=half)
            .map(|k| {
                let x = k as f64 * spacing / sigma;
                (-0.5 * x * x).exp()
            })
            .collect();
        Self::new(spacing, weights)
    }

    /// Parses `position weight` lines; `#` starts a comment. Positions must be
    /// increasing and uniformly spaced; a single line gives a delta profile.
    pub fn parse(text: &str) -> Result<Self> {
        let rows = parse_two_columns(text)?;
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                reason: "no data rows".into(),
            });
        }
        let spacing = if rows.len() == 1 {
            1.0
        } else {
            uniform_spacing(&rows).map_err(|(line, reason)| Error::Parse { line, reason })?
        };
        Self::new(spacing, rows.iter().map(|r| r.2).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Kernel taps on a grid of `spacing`, centred on the middle of the
    /// profile's support, by linear interpolation. Returned taps sum to 1 and
    /// run from offset `-half` to `+half`.
    fn resample(&self, spacing: f64) -> Vec<f64> {
        let extent = (self.weights.len() - 1) as f64 * self.spacing;
        let half = (extent / 2.0 / spacing + 1e-9).floor() as i64;
        let taps: Vec<f64> = (-half..=half)
            .map(|k| {
                let pos = (k as f64 * spacing + extent / 2.0) / self.spacing;
                let i = (pos.floor() as usize).min(self.weights.len() - 1);
                let frac = pos - i as f64;
                let next = self.weights.get(i + 1).copied().unwrap_or(0.0);
                self.weights[i] * (1.0 - frac) + next * frac
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        if sum > 0.0 {
            taps.into_iter().map(|t| t / sum).collect()
        } else {
            vec![1.0]
        }
    }
}

/// Rows of `(line number, x, y)`.
pub fn parse_two_columns(text: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("`{s}` is not a finite number"),
                })
        };
        rows.push((line, num(fields[0])?, num(fields[1])?));
    }
    Ok(rows)
}

/// Common spacing of increasing, uniformly spaced positions, or the line of
/// the first offender.
fn uniform_spacing(rows: &[(usize, f64, f64)]) -> std::result::Result<f64, (usize, String)> {
    let step = rows[1].1 - rows[0].1;
    if step.is_nan() || step <= 0.0 {
        return Err((rows[1].0, "positions must increase".into()));
    }
    for w in rows.windows(2) {
        let d = w[1].1 - w[0].1;
        if (d - step).abs() > 1e-6 * step {
            return Err((w[1].0, format!("spacing {d} differs from {step}")));
        }
    }
    Ok(step)
}

/// Best-fit parameters of `I(b) = i0 * r^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub r: f64,
    pub i0: f64,
    /// RMS deviation of `ln I` from the fitted line.
    pub residual: f64,
    pub points: usize,
}

/// Bounces completed by `column`: one bounce is a gap crossing down and back.
pub fn bounce_index(column: usize, plan: &LatticePlan) -> Result<f64> {
    if plan.rows_gap() == 0 {
        return Err(analysis_err(
            "bounce index undefined for a cavity with no gap",
        ));
    }
    if column > plan.columns() {
        return Err(Error::OutOfRange {
            what: "column",
            index: column,
            limit: plan.columns(),
        });
    }
    Ok(column as f64 / (2 * plan.rows_gap()) as f64)
}

/// Cavity length in pendellösung units that holds `bounces` geometric bounces
/// across a gap of `gap`.
pub fn length_for_bounces(bounces: f64, gap: f64) -> Result<f64> {
    if !(gap.is_finite() && gap > 0.0) {
        return Err(analysis_err(format!(
            "gap {gap} must be > 0 to count bounces"
        )));
    }
    if !(bounces.is_finite() && bounces > 0.0) {
        return Err(analysis_err(format!("bounce count {bounces} must be > 0")));
    }
    Ok(2.0 * gap * bounces)
}

/// Intensity diffracted into the down-moving direction: what is still
/// travelling down plus what left through the bottom face.
pub fn reflected_intensity(state: &WalkState) -> f64 {
    state
        .amplitudes()
        .iter()
        .map(|p| p.down.norm_sqr())
        .sum::<f64>()
        + state.leak_bottom()
}

/// First lattice column at or after `bounce`.
pub fn column_for_bounce(bounce: f64, plan: &LatticePlan) -> Result<usize> {
    if plan.rows_gap() == 0 {
        return Err(analysis_err(
            "bounce index undefined for a cavity with no gap",
        ));
    }
    if !(bounce.is_finite() && bounce >= 0.0) {
        return Err(analysis_err(format!("bounce {bounce} must be >= 0")));
    }
    Ok((bounce * (2 * plan.rows_gap()) as f64).ceil() as usize)
}

/// `(bounce, confined intensity)` at every whole bounce the record covers.
pub fn confined_by_bounce(
    record: &SimulationRecord,
    plan: &LatticePlan,
) -> Result<Vec<(f64, f64)>> {
    if plan.rows_gap() == 0 {
        return Err(analysis_err(
            "bounce index undefined for a cavity with no gap",
        ));
    }
    let cycle = 2 * plan.rows_gap();
    let end = record.start_column + record.confined.len();
    // a bounce at exactly `start_column` predates the record
    Ok((record.start_column / cycle + 1..)
        .map(|b| b * cycle)
        .take_while(|&c| c <= end)
        // confined[k] is the state after column start + k, i.e. c = start + k + 1 columns applied
        .map(|c| {
            (
                c as f64 / cycle as f64,
                record.confined[c - record.start_column - 1],
            )
        })
        .collect())
}

/// Mean intensity per top-blade row over map columns from `start_bounce` on.
/// Returns `(depth, intensity)` with depth 0 at the gap-facing surface.
pub fn penetration_profile(
    record: &SimulationRecord,
    start_bounce: f64,
    plan: &LatticePlan,
) -> Result<Vec<(f64, f64)>> {
    let map = record
        .intensity_map
        .as_ref()
        .ok_or_else(|| analysis_err("record has no intensity map"))?;
    let start = column_for_bounce(start_bounce, plan)?;
    let cols: Vec<usize> = (0..map.columns)
        .filter(|&j| map.lattice_column(j) >= start)
        .collect();
    if cols.is_empty() {
        return Err(analysis_err(format!(
            "start bounce {start_bounce} (column {start}) lies beyond the record"
        )));
    }
    let surface = plan.top_inner_surface_row();
    let spacing = plan.resolution().length(1);
    Ok(plan
        .top_blade_rows()
        .filter(|row| row % map.row_stride == 0)
        .map(|row| {
            let i = row / map.row_stride;
            let mean = cols.iter().map(|&j| map.get(i, j)).sum::<f64>() / cols.len() as f64;
            ((row - surface) as f64 * spacing, mean)
        })
        .collect())
}

/// Share of a profile's integral at depths `<= depth`.
pub fn fraction_within(profile: &[(f64, f64)], depth: f64) -> Result<f64> {
    let total: f64 = profile.iter().map(|p| p.1).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(analysis_err("profile has no intensity"));
    }
    let inner: f64 = profile
        .iter()
        .filter(|p| p.0 <= depth + 1e-12)
        .map(|p| p.1)
        .sum();
    Ok(inner / total)
}

/// Log-linear least squares of `I = i0 * r^b` over points with `b` in
/// `window` (inclusive). A fitted `r` above 1 by no more than rounding is
/// reported as 1.
pub fn fit_reflectivity(trace: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .copied()
        .filter(|(b, _)| *b >= window.0 && *b <= window.1)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(analysis_err(format!(
            "fit window [{}, {}] holds {} points, need {MIN_FIT_POINTS}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((b, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(analysis_err(format!(
            "intensity {v} at bounce {b} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let mb = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sbb: f64 = pts.iter().map(|p| (p.0 - mb).powi(2)).sum();
    let sbl: f64 = pts.iter().map(|p| (p.0 - mb) * (p.1.ln() - ml)).sum();
    if sbb <= 0.0 {
        return Err(analysis_err("fit window holds a single bounce value"));
    }
    let slope = sbl / sbb;
    let intercept = ml - slope * mb;
    let residual = (pts
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut r = slope.exp();
    if r > 1.0 {
        if r - 1.0 > 1e-12 {
            return Err(analysis_err(format!("trace grows: fitted r = {r}")));
        }
        r = 1.0;
    }
    Ok(FitResult {
        r,
        i0: intercept.exp(),
        residual,
        points: pts.len(),
    })
}

/// Magnitude of the DFT of the mean-subtracted, Hann-tapered trace for bins
/// `0..=n/2`, as `(frequency in 1/Δ_H, magnitude)`.
pub fn spectrum(trace: &[f64], spacing: f64) -> Result<Vec<(f64, f64)>> {
    let n = trace.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(analysis_err(format!(
            "spectrum needs {MIN_SPECTRUM_SAMPLES} samples, got {n}"
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(analysis_err(format!(
            "sample spacing {spacing} must be > 0"
        )));
    }
    // shifting by the first sample keeps a constant trace exactly zero
    let x0 = trace[0];
    let mean = x0 + trace.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = trace
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
            Complex64::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * spacing);
    Ok(buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * df, c.norm()))
        .collect())
}

/// Local maxima of a spectrum above `threshold` times the largest non-DC
/// magnitude. Bin 0 is never reported.
pub fn spectral_peaks(spectrum: &[(f64, f64)], threshold: f64) -> Vec<(f64, f64)> {
    spectrum
        .get(1..)
        .map_or_else(Vec::new, |s| find_peaks(s, threshold))
}

/// Local maxima of `series` at or above `threshold` times its largest value.
/// An end sample counts when the series falls away from it. An all-zero or
/// empty series has no peaks.
pub fn find_peaks(series: &[(f64, f64)], threshold: f64) -> Vec<(f64, f64)> {
    let y: Vec<f64> = series.iter().map(|p| p.1).collect();
    let max = y.iter().copied().fold(0.0, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Vec::new();
    }
    let last = y.len() - 1;
    (0..=last)
        .filter(|&k| {
            let left = k == 0 || y[k] > y[k - 1];
            let right = k == last || y[k] >= y[k + 1];
            left && right && y[k] >= threshold * max
        })
        .map(|k| series[k])
        .collect()
}

/// Sums adjacent sample pairs. A point-source walk only fills one parity of
/// `row - column`, so a fixed-row trace alternates with zeros; pairing
/// removes that Nyquist alternation. A trailing odd sample is dropped.
pub fn merge_sublattices(trace: &[f64]) -> Vec<f64> {
    trace.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

/// Mean spacing of the interior local maxima of a uniformly sampled series,
/// each refined by a parabola through its neighbours.
pub fn oscillation_period(series: &[(f64, f64)]) -> Result<f64> {
    let maxima = local_maxima(series)?;
    if maxima.len() < 3 {
        return Err(analysis_err(format!(
            "found {} local maxima, need at least 3",
            maxima.len()
        )));
    }
    Ok((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}

/// Quadratic-interpolated positions of interior local maxima.
pub fn local_maxima(series: &[(f64, f64)]) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(analysis_err("series needs at least 3 samples"));
    }
    let h = series[1].0 - series[0].0;
    if h.is_nan()
        || h <= 0.0
        || series
            .windows(2)
            .any(|w| ((w[1].0 - w[0].0) - h).abs() > 1e-6 * h)
    {
        return Err(analysis_err(
            "series must be uniformly sampled in increasing order",
        ));
    }
    let y: Vec<f64> = series.iter().map(|p| p.1).collect();
    Ok((1..y.len() - 1)
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .map(|k| {
            let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
            let shift = if denom < 0.0 {
                0.5 * (y[k - 1] - y[k + 1]) / denom
            } else {
                0.0
            };
            series[k].0 + shift * h
        })
        .collect())
}

/// Same-size convolution of a trace sampled every `spacing` with the beam
/// profile, zero beyond the edges. The profile is resampled onto the trace
/// grid by linear interpolation and renormalised.
pub fn convolve_beam(trace: &[f64], spacing: f64, profile: &BeamProfile) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(analysis_err("trace is empty"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(analysis_err(format!("trace spacing {spacing} must be > 0")));
    }
    let taps = profile.resample(spacing);
    let half = (taps.len() / 2) as isize;
    let n = trace.len() as isize;
    Ok((0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(t, w)| {
                    let src = i - (t as isize - half);
                    if (0..n).contains(&src) {
                        w * trace[src as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect())
}
