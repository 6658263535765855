//! File writers: grid, PPM, CSV, JSON.
//!
//! Grid file: first line `rows cols row_stride col_stride`, then one line per
//! grid row (bottom lattice row first), values separated by single spaces.
//!
//! PPM: binary P6, one pixel per grid sample, top lattice row at the top of
//! the image. Intensity `v` maps to `x = min(v / cap, 1)` and then through a
//! piecewise-linear colormap with stops
//! black (0), purple (0.25), red (0.5), orange-yellow (0.75), white (1).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bragg_walk::engine::IntensityMap;
use serde::Serialize;

use crate::CliError;

const COLORMAP: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 0.0]),
    (0.25, [80.0, 0.0, 120.0]),
    (0.5, [220.0, 40.0, 40.0]),
    (0.75, [255.0, 200.0, 0.0]),
    (1.0, [255.0, 255.0, 255.0]),
];

/// Colormap lookup for `x` in [0, 1]; values outside are clamped.
pub fn colormap(x: f64) -> [u8; 3] {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    let i = COLORMAP
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(COLORMAP.len() - 2);
    let (x0, c0) = COLORMAP[i];
    let (x1, c1) = COLORMAP[i + 1];
    let f = (x - x0) / (x1 - x0);
    [0, 1, 2].map(|k| (c0[k] + f * (c1[k] - c0[k])).round() as u8)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_grid(path: &Path, map: &IntensityMap) -> Result<(), CliError> {
    let mut s = format!(
        "{} {} {} {}\n",
        map.rows, map.columns, map.row_stride, map.column_stride
    );
    for i in 0..map.rows {
        let row = &map.data[i * map.columns..(i + 1) * map.columns];
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            write!(s, "{v:e}").unwrap();
        }
        s.push('\n');
    }
    write(path, s.as_bytes())
}

pub fn write_ppm(path: &Path, map: &IntensityMap, cap: f64) -> Result<(), CliError> {
    let mut bytes = format!("P6\n{} {}\n255\n", map.columns, map.rows).into_bytes();
    for i in (0..map.rows).rev() {
        for j in 0..map.columns {
            bytes.extend_from_slice(&colormap(map.get(i, j) / cap));
        }
    }
    write(path, &bytes)
}

/// CSV with a `#` comment describing each column and its unit, then a plain
/// header row and data rows.
pub fn write_csv(
    path: &Path,
    columns: &[(&str, &str)],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let mut s = String::from("# ");
    let described: Vec<String> = columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
    s.push_str(&described.join(", "));
    s.push('\n');
    s.push_str(&columns.iter().map(|c| c.0).collect::<Vec<_>>().join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    write(path, s.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("summary serialises");
    s.push('\n');
    write(path, s.as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write(path, text.as_bytes())
}
