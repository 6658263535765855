use std::io::Cursor;

use bragg_walk::analysis::length_for_bounces;
use bragg_walk::checkpoint::{read_checkpoint, write_checkpoint};
use bragg_walk::engine::{run_from, run_simulation, sweep_gap, RecordingOptions};
use bragg_walk::geometry::{build_lattice_plan, CavityGeometry, LatticePlan};
use bragg_walk::physics::Resolution;
use bragg_walk::walk::CoinParams;

fn res(n: u32) -> Resolution {
    Resolution::new(n).unwrap()
}

fn plan(t: f64, d: f64, l: f64, n: u32) -> LatticePlan {
    let g = CavityGeometry::with_resolution(t, d, l, &res(n), 0.0, 0.0).unwrap();
    build_lattice_plan(&g, res(n)).unwrap()
}

#[test]
fn transparent_lattice_leaks_at_the_top_in_one_column() {
    let g = CavityGeometry::new(1.5, 0.5, 10.0, CoinParams::identity()).unwrap();
    let p = build_lattice_plan(&g, res(10)).unwrap();
    let rec = run_simulation(
        &p,
        &RecordingOptions {
            record_exit_traces: true,
            ..RecordingOptions::minimal()
        },
    )
    .unwrap();
    let steps = p.height() - p.source().row;
    let hit: Vec<usize> = (0..rec.exit_top.len())
        .filter(|&c| rec.exit_top[c] != 0.0)
        .collect();
    assert_eq!(hit, vec![steps - 1]);
    assert_eq!(rec.exit_top[steps - 1], 1.0);
    assert_eq!(rec.total_leak_bottom(), 0.0);
}

#[test]
fn bottom_exit_is_exactly_dark_until_reachable() {
    let p = plan(2.0, 1.0, 30.0, 10);
    let rec = run_simulation(
        &p,
        &RecordingOptions {
            record_exit_traces: true,
            ..RecordingOptions::minimal()
        },
    )
    .unwrap();
    // a down-mover from the source row needs one column per row to reach row 0
    let first = p.source().row;
    assert!(rec.exit_bottom[..first].iter().all(|&v| v == 0.0));
    assert!(rec.exit_bottom[first..].iter().any(|&v| v > 0.0));
}

#[test]
fn long_run_keeps_the_ledger() {
    let p = plan(1.0, 0.5, 10_000.0, 10);
    let rec = run_simulation(
        &p,
        &RecordingOptions {
            record_exit_traces: true,
            ..RecordingOptions::minimal()
        },
    )
    .unwrap();
    assert_eq!(rec.confined.len(), 100_000);
    let mut leaked = 0.0;
    for c in 0..rec.confined.len() {
        leaked += rec.exit_top[c] + rec.exit_bottom[c];
        assert!((rec.confined[c] + leaked - 1.0).abs() < 1e-8, "column {c}");
    }
}

#[test]
fn confinement_hugs_the_inner_faces() {
    // cavity of two thick blades, run well past the initial transient
    let n = 20;
    let (t, d) = (87.5, 12.0);
    let p = plan(t, d, length_for_bounces(200.0, d).unwrap(), n);
    let rec = run_simulation(&p, &RecordingOptions::minimal()).unwrap();
    let state = &rec.final_state;
    let band = p.gap_rows().start - n as usize..p.gap_rows().end + n as usize;
    let inside: f64 = band.map(|r| state.intensity(r)).sum();
    let fraction = inside / state.norm();
    assert!(fraction >= 0.9, "{fraction}");
}

#[test]
fn resume_through_a_checkpoint_is_bit_exact() {
    let full = plan(2.0, 1.0, 40.0, 10);
    let half = full.clone().with_columns(full.columns() / 2).unwrap();
    let o = RecordingOptions::for_resolution(full.resolution());
    let first = run_simulation(&half, &o).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &first.final_state, half.columns()).unwrap();
    let (state, column) = read_checkpoint(Cursor::new(bytes)).unwrap();
    let rest = run_from(&full, &o, state, column).unwrap();
    let whole = run_simulation(&full, &o).unwrap();
    assert_eq!(rest.final_state, whole.final_state);
    assert_eq!(rest.confined, whole.confined[column..]);
    assert_eq!(rest.surface_trace, whole.surface_trace[column..]);
}

#[test]
fn sweep_agrees_with_direct_runs_in_any_pool() {
    let base = CavityGeometry::with_resolution(2.0, 1.0, 60.0, &res(10), 0.0, 0.0).unwrap();
    let gaps = [0.5, 2.0, 1.0, 1.5];
    let o = RecordingOptions::minimal();
    let one = sweep_gap(&base, &gaps, res(10), &o, 1).unwrap();
    let three = sweep_gap(&base, &gaps, res(10), &o, 3).unwrap();
    for (a, b) in one.iter().zip(&three) {
        assert_eq!(a, b);
    }
    for (g, point) in gaps.iter().zip(&one) {
        assert_eq!(point.gap, *g);
        let direct = run_simulation(
            &build_lattice_plan(&base.with_gap(*g).unwrap(), res(10)).unwrap(),
            &o,
        )
        .unwrap()
        .final_confined();
        assert_eq!(point.result.as_ref().unwrap(), &direct);
    }
}

#[test]
fn confinement_repeats_with_the_gap_period() {
    let n = 20;
    let base = CavityGeometry::with_resolution(10.0, 3.0, 1000.0, &res(n), 0.0, 0.0).unwrap();
    let gaps = [2.5, 3.5, 3.0, 4.0];
    let out = sweep_gap(&base, &gaps, res(n), &RecordingOptions::minimal(), 2).unwrap();
    let v: Vec<f64> = out.iter().map(|p| *p.result.as_ref().unwrap()).collect();
    for pair in [(0, 1), (2, 3)] {
        let (a, b) = (v[pair.0], v[pair.1]);
        assert!((a - b).abs() <= 0.1 * a.max(b), "{a} vs {b}");
    }
}

#[test]
fn confinement_drops_below_a_quarter_gap() {
    let n = 40;
    let base = CavityGeometry::with_resolution(10.0, 1.0, 1000.0, &res(n), 0.0, 0.0).unwrap();
    let gaps = [0.05, 0.1, 0.15, 0.2, 0.25];
    let out = sweep_gap(&base, &gaps, res(n), &RecordingOptions::minimal(), 2).unwrap();
    let v: Vec<f64> = out.iter().map(|p| *p.result.as_ref().unwrap()).collect();
    assert!(v.windows(2).all(|w| w[0] < w[1]), "{v:?}");
    assert!(v[1] < 0.75 * v[4], "{v:?}");
}
