//! File formats of the command line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use elastocontrol_core::config::RunConfig;
use elastocontrol_core::forward::ForwardSetup;
use elastocontrol_core::objective::{ControlGrid, ControlProblem, Evaluation};

const CONTROL_TIMES: [f64; 16] =
    [0.02, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.46, 7.48];
const STATE_TIMES: [f64; 16] =
    [0.02, 1.0, 2.5, 3.0, 4.0, 5.0, 6.0, 6.3, 7.0, 8.0, 9.0, 10.0, 12.0, 13.0, 14.0, 15.0];

fn uses_reference_horizon(cfg: &RunConfig) -> bool {
    cfg.t_end == RunConfig::default().t_end
}

fn even_times(t_end: f64) -> Vec<f64> {
    (1..=10).map(|i| t_end * i as f64 / 10.0).collect()
}

/// Snapshot times for the control, or `requested` when given.
pub fn control_snapshot_times(cfg: &RunConfig, requested: &[f64]) -> Vec<f64> {
    if !requested.is_empty() {
        requested.to_vec()
    } else if uses_reference_horizon(cfg) {
        CONTROL_TIMES.to_vec()
    } else {
        even_times(cfg.t_end)
    }
}

/// Snapshot times for `u` and `udot`, or `requested` when given.
pub fn state_snapshot_times(cfg: &RunConfig, requested: &[f64]) -> Vec<f64> {
    if !requested.is_empty() {
        requested.to_vec()
    } else if uses_reference_horizon(cfg) {
        STATE_TIMES.to_vec()
    } else {
        even_times(cfg.t_end)
    }
}

fn header(first: &str, times: &[f64]) -> Vec<String> {
    std::iter::once(first.to_string()).chain(times.iter().map(|t| format!("t={t:?}"))).collect()
}

/// Nodal field at the requested times, one row per mesh node including the
/// Dirichlet node; values between time nodes are interpolated linearly.
pub fn write_state_snapshots<W: Write>(out: W, setup: &ForwardSetup, field: &[Vec<f64>], times: &[f64]) -> Result<()> {
    let grid = &setup.grid;
    let mesh = &setup.mesh;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("x", times))?;
    let columns: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let p = grid.position(t.clamp(0.0, grid.t_end()));
            let k = (p.floor() as usize).min(grid.steps().saturating_sub(1));
            let th = p - k as f64;
            let (a, b) = (&field[k], &field[(k + 1).min(field.len() - 1)]);
            (0..mesh.nodes().len()).map(|n| (1.0 - th) * mesh.nodal(a, n) + th * mesh.nodal(b, n)).collect()
        })
        .collect();
    for (n, x) in mesh.nodes().iter().enumerate() {
        let row = std::iter::once(format!("{x:?}")).chain(columns.iter().map(|c| format!("{:?}", c[n])));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn omega_x(setup: &ForwardSetup) -> Vec<f64> {
    setup.mesh.omega_nodes().iter().map(|&k| setup.mesh.nodes()[k]).collect()
}

/// Control on omega at the requested times, taken from the step containing each time.
pub fn write_control_snapshots<W: Write>(out: W, ev: &Evaluation, times: &[f64]) -> Result<()> {
    let grid = &ev.setup.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("x", times))?;
    let cells: Vec<usize> = times.iter().map(|&t| grid.interval(t.clamp(0.0, grid.t_end()))).collect();
    for (i, x) in omega_x(&ev.setup).iter().enumerate() {
        let row = std::iter::once(format!("{x:?}")).chain(cells.iter().map(|&k| format!("{:?}", ev.control[k][i])));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Full control, one row per time step: `step, t_start, t_end, xi@x...`,
/// preceded by a `# tau = ...` line.
pub fn write_control<W: Write>(mut out: W, ev: &Evaluation, tau: f64) -> Result<()> {
    writeln!(out, "# tau = {tau:?}")?;
    let grid = &ev.setup.grid;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["step".to_string(), "t_start".into(), "t_end".into()];
    head.extend(omega_x(&ev.setup).iter().map(|x| format!("x={x:?}")));
    w.write_record(&head)?;
    for (k, row) in ev.control.iter().enumerate() {
        let rec = [k.to_string(), format!("{:?}", grid.time(k)), format!("{:?}", grid.time(k + 1))]
            .into_iter()
            .chain(row.iter().map(|v| format!("{v:?}")));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_control`].
pub fn read_control(path: &Path, problem: &ControlProblem) -> Result<(ControlGrid, Option<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tau = text
        .lines()
        .find_map(|l| l.strip_prefix("# tau ="))
        .map(|v| v.trim().parse::<f64>())
        .transpose()
        .context("parsing the tau line")?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut xi = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(3)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        xi.push(row);
    }
    if xi.len() != problem.cells() || xi.iter().any(|r| r.len() != problem.n_omega()) {
        bail!(
            "{}: expected {} rows of {} values, got {} rows",
            path.display(),
            problem.cells(),
            problem.n_omega(),
            xi.len()
        );
    }
    Ok((xi, tau))
}
