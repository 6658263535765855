//! Subcommand implementations. Each returns the files it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use bragg_walk::analysis::{
    confined_by_bounce, convolve_beam, find_peaks, fit_reflectivity, fraction_within,
    merge_sublattices, oscillation_period, parse_two_columns, penetration_profile, spectral_peaks,
    spectrum, BeamProfile, FitResult,
};
use bragg_walk::checkpoint::{read_checkpoint, write_checkpoint};
use bragg_walk::engine::{run_from, run_simulation, sweep_gap, SimulationRecord};
use bragg_walk::geometry::{build_lattice_plan_with_budget, LatticePlan};
use bragg_walk::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_csv, write_grid, write_json, write_ppm, write_text};
use crate::CliError;

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text, &path.display().to_string())
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

pub fn build_plan(cfg: &RunConfig) -> Result<LatticePlan, CliError> {
    let plan = build_lattice_plan_with_budget(&cfg.cavity()?, cfg.resolution(), cfg.budget())?;
    match cfg.source_spec(plan.source().row) {
        Some(s) => Ok(plan.with_source(s)?),
        None => Ok(plan),
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    r: f64,
    one_minus_r: f64,
    i0: f64,
    residual: f64,
    points: usize,
    window: [f64; 2],
}

impl FitSummary {
    fn new(f: FitResult, window: [f64; 2]) -> Self {
        Self {
            r: f.r,
            one_minus_r: 1.0 - f.r,
            i0: f.i0,
            residual: f.residual,
            points: f.points,
            window,
        }
    }
}

#[derive(Debug, Serialize)]
struct Peak {
    position: f64,
    magnitude: f64,
}

fn peaks_of(p: &[(f64, f64)]) -> Vec<Peak> {
    p.iter()
        .map(|&(position, magnitude)| Peak {
            position,
            magnitude,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    rows: usize,
    columns: usize,
    bottom_blade_rows: usize,
    gap_rows: usize,
    top_blade_rows: usize,
    layers_per_pendellosung: u32,
    coin_angle: f64,
    start_column: usize,
    final_confined: f64,
    leak_top: f64,
    leak_bottom: f64,
    /// Confined intensity at the last whole bounce, when the gap is nonzero.
    plateau: Option<f64>,
    reflectivity: Option<FitSummary>,
    penetration_within_one: Option<f64>,
    surface_peaks: Option<Vec<Peak>>,
    detector_peaks: Option<Vec<Peak>>,
}

/// Runs one configuration and writes its records and analyses under `out`.
pub fn simulate(
    cfg: &RunConfig,
    out: &Path,
    resume: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let plan = build_plan(cfg)?;
    let options = cfg.recording_options();
    let beam = match &cfg.analysis.beam_profile {
        Some(p) => Some(load_beam(p)?),
        None => None,
    };
    let record = match resume {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let (state, column) = read_checkpoint(std::io::BufReader::new(file))?;
            run_from(&plan, &options, state, column)?
        }
        None => run_simulation(&plan, &options)?,
    };

    prepare_dir(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str| {
        let p = out.join(name);
        written.push(p.clone());
        p
    };
    write_text(&put("config.toml"), &cfg.to_toml())?;

    let spacing = record.spacing();
    let position = |k: usize| (record.start_column + k + 1) as f64 * spacing;
    if let Some(map) = &record.intensity_map {
        write_grid(&put("intensity_map.grid"), map)?;
        if cfg.recording.ppm {
            let cap = cfg
                .recording
                .ppm_cap
                .unwrap_or_else(|| map.max().max(f64::MIN_POSITIVE));
            write_ppm(&put("intensity_map.ppm"), map, cap)?;
        }
    }
    if cfg.recording.exit_traces {
        write_csv(
            &put("exit.csv"),
            &[
                ("column", "index"),
                ("position", "pendellosung lengths"),
                ("exit_top", "probability"),
                ("exit_bottom", "probability"),
            ],
            (0..record.exit_top.len()).map(|k| {
                vec![
                    (record.start_column + k) as f64,
                    position(k),
                    record.exit_top[k],
                    record.exit_bottom[k],
                ]
            }),
        )?;
    }
    write_csv(
        &put("confined.csv"),
        &[
            ("column", "index"),
            ("position", "pendellosung lengths"),
            ("confined", "probability"),
        ],
        (0..record.confined.len()).map(|k| {
            vec![
                (record.start_column + k) as f64,
                position(k),
                record.confined[k],
            ]
        }),
    )?;
    if cfg.recording.surface_trace {
        write_csv(
            &put("surface.csv"),
            &[
                ("position", "pendellosung lengths"),
                ("intensity", "probability"),
            ],
            record
                .surface_trace
                .iter()
                .enumerate()
                .map(|(k, v)| vec![position(k), *v]),
        )?;
    }

    let bounces = if plan.rows_gap() > 0 {
        let b = confined_by_bounce(&record, &plan)?;
        write_csv(
            &put("confined_by_bounce.csv"),
            &[("bounce", "count"), ("confined", "probability")],
            b.iter().map(|p| vec![p.0, p.1]),
        )?;
        Some(b)
    } else {
        None
    };
    let reflectivity = match (cfg.analysis.reflectivity_window, &bounces) {
        (Some(w), Some(b)) => Some(FitSummary::new(fit_reflectivity(b, (w[0], w[1]))?, w)),
        _ => None,
    };
    let penetration_within_one = match cfg.analysis.penetration_start_bounce {
        Some(start) => {
            let prof = penetration_profile(&record, start, &plan)?;
            write_csv(
                &put("penetration.csv"),
                &[
                    ("depth", "pendellosung lengths"),
                    ("intensity", "probability per node"),
                ],
                prof.iter().map(|p| vec![p.0, p.1]),
            )?;
            Some(fraction_within(&prof, 1.0)?)
        }
        None => None,
    };
    let surface_peaks = if cfg.analysis.spectrum {
        let (trace, dx) = surface_series(&record, cfg.analysis.merge_sublattices);
        let s = spectrum(&trace, dx)?;
        write_csv(
            &put("spectrum.csv"),
            &[
                ("frequency", "1/pendellosung length"),
                ("magnitude", "arbitrary"),
            ],
            s.iter().map(|p| vec![p.0, p.1]),
        )?;
        Some(peaks_of(&spectral_peaks(&s, cfg.analysis.peak_threshold)))
    } else {
        None
    };
    let detector_peaks = match &beam {
        Some(profile) => {
            let det = convolve_beam(&record.exit_top, spacing, profile)?;
            let series: Vec<(f64, f64)> = det
                .iter()
                .enumerate()
                .map(|(k, v)| (position(k), *v))
                .collect();
            write_csv(
                &put("detector.csv"),
                &[
                    ("position", "pendellosung lengths"),
                    ("intensity", "probability"),
                ],
                series.iter().map(|p| vec![p.0, p.1]),
            )?;
            Some(peaks_of(&find_peaks(&series, cfg.analysis.peak_threshold)))
        }
        None => None,
    };

    let summary = SimulateSummary {
        rows: plan.height(),
        columns: plan.columns(),
        bottom_blade_rows: plan.rows_bottom_blade(),
        gap_rows: plan.rows_gap(),
        top_blade_rows: plan.rows_top_blade(),
        layers_per_pendellosung: plan.resolution().layers_per_pendellosung(),
        coin_angle: plan.coin().gamma(),
        start_column: record.start_column,
        final_confined: record.final_confined(),
        leak_top: record.total_leak_top(),
        leak_bottom: record.total_leak_bottom(),
        plateau: bounces.as_ref().and_then(|b| b.last()).map(|p| p.1),
        reflectivity,
        penetration_within_one,
        surface_peaks,
        detector_peaks,
    };
    write_json(&put("summary.json"), &summary)?;
    if let Some(path) = checkpoint {
        let file = fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        write_checkpoint(
            std::io::BufWriter::new(file),
            &record.final_state,
            plan.columns(),
        )?;
        written.push(path.to_path_buf());
    }
    Ok(written)
}

fn surface_series(record: &SimulationRecord, merge: bool) -> (Vec<f64>, f64) {
    if merge {
        (
            merge_sublattices(&record.surface_trace),
            2.0 * record.spacing(),
        )
    } else {
        (record.surface_trace.clone(), record.spacing())
    }
}

fn load_beam(path: &Path) -> Result<BeamProfile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    BeamProfile::parse(&text).map_err(|e| CliError::Config(format!("{}:{e}", path.display())))
}

#[derive(Debug, Serialize)]
struct SweepFailure {
    gap: f64,
    error: String,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    gaps: usize,
    period: Option<f64>,
    period_error: Option<String>,
    failures: Vec<SweepFailure>,
}

/// Outcome of a sweep: files written plus the first per-gap failure, if any.
pub struct SweepOutcome {
    pub written: Vec<PathBuf>,
    pub failure: Option<CliError>,
}

pub fn sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<SweepOutcome, CliError> {
    let gaps = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: the config has no [sweep] section".into()))?
        .gaps();
    let base = cfg.cavity()?;
    let mut options = cfg.recording_options();
    options.record_map = false;
    options.record_surface_trace = false;
    options.record_exit_traces = false;
    // check every member against the budget before running any of them
    let budget = cfg.budget();
    let points = sweep_gap_budgeted(&base, &gaps, cfg, &options, workers, budget)?;

    prepare_dir(out)?;
    let mut written = vec![
        out.join("config.toml"),
        out.join("sweep.csv"),
        out.join("sweep.json"),
    ];
    write_text(&written[0], &cfg.to_toml())?;
    write_csv(
        &written[1],
        &[
            ("gap", "pendellosung lengths"),
            ("confined", "probability; NaN if the run failed"),
        ],
        points
            .iter()
            .map(|(g, r)| vec![*g, r.as_ref().copied().unwrap_or(f64::NAN)]),
    )?;
    let good: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|(g, r)| r.as_ref().ok().map(|v| (*g, *v)))
        .collect();
    let failures: Vec<SweepFailure> = points
        .iter()
        .filter_map(|(g, r)| {
            r.as_ref().err().map(|e| SweepFailure {
                gap: *g,
                error: e.to_string(),
            })
        })
        .collect();
    let (period, period_error) = if failures.is_empty() {
        match oscillation_period(&good) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("not computed: some gaps failed".to_string()))
    };
    write_json(
        &written[2],
        &SweepSummary {
            gaps: gaps.len(),
            period,
            period_error,
            failures,
        },
    )?;
    let failure = points.into_iter().find_map(|(gap, r)| {
        r.err().map(|e| {
            CliError::from(Error::Sweep {
                gap,
                source: Box::new(e),
            })
        })
    });
    written.sort();
    Ok(SweepOutcome { written, failure })
}

type GapResult = (f64, Result<f64, Error>);

/// Gaps whose plan exceeds the budget are reported as failures without being
/// run; the rest go through the parallel sweep.
fn sweep_gap_budgeted(
    base: &bragg_walk::geometry::CavityGeometry,
    gaps: &[f64],
    cfg: &RunConfig,
    options: &bragg_walk::engine::RecordingOptions,
    workers: usize,
    budget: bragg_walk::geometry::PlanBudget,
) -> Result<Vec<GapResult>, CliError> {
    let res = cfg.resolution();
    let checks: Vec<Result<(), Error>> = gaps
        .iter()
        .map(|&g| {
            let geom = base.with_gap(g)?;
            build_lattice_plan_with_budget(&geom, res, budget).map(|_| ())
        })
        .collect();
    let runnable: Vec<f64> = gaps
        .iter()
        .zip(&checks)
        .filter(|(_, c)| c.is_ok())
        .map(|(g, _)| *g)
        .collect();
    let mut ran = sweep_gap(base, &runnable, res, options, workers)?.into_iter();
    Ok(gaps
        .iter()
        .zip(checks)
        .map(|(&g, c)| match c {
            Err(e) => (g, Err(e)),
            Ok(()) => {
                let p = ran.next().expect("one result per runnable gap");
                // unwrap the per-gap annotation; the caller re-adds it
                let r = p.result.map_err(|e| match e {
                    Error::Sweep { source, .. } => *source,
                    other => other,
                });
                (g, r)
            }
        })
        .collect())
}

fn read_series(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let rows = parse_two_columns(&text)
        .map_err(|e| CliError::Config(format!("{}:{e}", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| (r.1, r.2)).collect())
}

/// Spacing of a uniformly sampled series.
fn series_spacing(path: &Path, s: &[(f64, f64)]) -> Result<f64, CliError> {
    if s.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least 2 rows",
            path.display()
        )));
    }
    let h = s[1].0 - s[0].0;
    if h.is_nan()
        || h <= 0.0
        || s.windows(2)
            .any(|w| ((w[1].0 - w[0].0) - h).abs() > 1e-6 * h)
    {
        return Err(CliError::Config(format!(
            "{}: positions must be increasing and uniformly spaced",
            path.display()
        )));
    }
    Ok(h)
}

#[derive(Debug, Serialize)]
struct SpectrumSummary {
    samples: usize,
    spacing: f64,
    merged_pairs: bool,
    threshold: f64,
    peaks: Vec<Peak>,
}

pub fn spectrum_cmd(
    input: &Path,
    out: &Path,
    threshold: f64,
    merge: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let s = read_series(input)?;
    let dx = series_spacing(input, &s)?;
    let values: Vec<f64> = s.iter().map(|p| p.1).collect();
    let (trace, dx) = if merge {
        (merge_sublattices(&values), 2.0 * dx)
    } else {
        (values, dx)
    };
    let spec =
        spectrum(&trace, dx).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let peaks = spectral_peaks(&spec, threshold);
    prepare_dir(out)?;
    let written = vec![out.join("peaks.json"), out.join("spectrum.csv")];
    write_csv(
        &written[1],
        &[("frequency", "1/position unit"), ("magnitude", "arbitrary")],
        spec.iter().map(|p| vec![p.0, p.1]),
    )?;
    write_json(
        &written[0],
        &SpectrumSummary {
            samples: trace.len(),
            spacing: dx,
            merged_pairs: merge,
            threshold,
            peaks: peaks_of(&peaks),
        },
    )?;
    Ok(written)
}

pub fn fit_cmd(input: &Path, out: &Path, window: [f64; 2]) -> Result<Vec<PathBuf>, CliError> {
    let s = read_series(input)?;
    let fit = fit_reflectivity(&s, (window[0], window[1]))
        .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    prepare_dir(out)?;
    let path = out.join("fit.json");
    write_json(&path, &FitSummary::new(fit, window))?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
struct ConvolveSummary {
    samples: usize,
    spacing: f64,
    threshold: f64,
    peaks: Vec<Peak>,
}

pub fn convolve_cmd(
    input: &Path,
    profile: &Path,
    out: &Path,
    threshold: f64,
) -> Result<Vec<PathBuf>, CliError> {
    let s = read_series(input)?;
    let dx = series_spacing(input, &s)?;
    let beam = load_beam(profile)?;
    let values: Vec<f64> = s.iter().map(|p| p.1).collect();
    let det = convolve_beam(&values, dx, &beam)?;
    let series: Vec<(f64, f64)> = s.iter().zip(&det).map(|(p, v)| (p.0, *v)).collect();
    prepare_dir(out)?;
    let written = vec![out.join("detector.csv"), out.join("detector.json")];
    write_csv(
        &written[0],
        &[
            ("position", "input position unit"),
            ("intensity", "input unit"),
        ],
        series.iter().map(|p| vec![p.0, p.1]),
    )?;
    write_json(
        &written[1],
        &ConvolveSummary {
            samples: det.len(),
            spacing: dx,
            threshold,
            peaks: peaks_of(&find_peaks(&series, threshold)),
        },
    )?;
    Ok(written)
}
