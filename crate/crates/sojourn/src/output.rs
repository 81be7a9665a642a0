//! File outputs: CSV tables plus PGM strategy snapshots. Files land via a
//! temp-sibling write and rename, so an interrupted run never leaves a
//! half-written file under the final name. Floats print through Display
//! (shortest exact round-trip form), which keeps outputs byte-stable.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::CaptureConfig;
use crate::error::{Error, Result};
use crate::evolution::TrajectoryRow;
use crate::experiment::{ExperimentResult, SweepResult};
use crate::payoff::{PayoffLedger, Strategy};
use crate::queueing::{GameTrigger, RoundSchedule};
use crate::topology::{NetworkTopology, NodeId};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp_name = OsString::from(path.as_os_str());
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("replicate,rho_c,exit_step\n");
    for row in &result.summaries {
        let exit = row.exit_step.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", row.replicate, row.rho_c, exit).unwrap();
    }
    writeln!(out, "mean,{},", result.mean_rho_c).unwrap();
    writeln!(out, "std,{},", result.std_rho_c).unwrap();
    out
}

pub fn timeseries_csv(trajectory: &[TrajectoryRow]) -> String {
    let mut out = String::from("step,rho_c,n_c,mean_payoff\n");
    for row in trajectory {
        writeln!(
            out,
            "{},{},{},{}",
            row.step, row.rho_c, row.n_c, row.mean_payoff
        )
        .unwrap();
    }
    out
}

/// Strategy grid as a plain PGM image, maxval 1: cooperators are white
/// (1), defectors black (0). Row-major, matching node numbering.
pub fn snapshot_pgm(side: u32, strategies: &[Strategy]) -> Result<String> {
    let n = (side as usize) * (side as usize);
    if strategies.len() != n {
        return Err(Error::LengthMismatch {
            what: "strategies",
            expected: n,
            actual: strategies.len(),
        });
    }
    let mut out = format!("P2\n{side} {side}\n1\n");
    for row in strategies.chunks(side as usize) {
        for (i, s) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(if s.is_cooperator() { '1' } else { '0' });
        }
        out.push('\n');
    }
    Ok(out)
}

/// Snapshot fallback for non-lattice graphs.
pub fn snapshot_csv(strategies: &[Strategy]) -> String {
    let mut out = String::from("node,strategy\n");
    for (node, s) in strategies.iter().enumerate() {
        writeln!(out, "{},{}", node, s.as_digit()).unwrap();
    }
    out
}

pub fn payoffs_csv(traces: &[(u32, Vec<Strategy>, PayoffLedger)]) -> String {
    let mut out = String::from("round,node,strategy,payoff\n");
    for (round, played, ledger) in traces {
        for (node, s) in played.iter().enumerate() {
            let total = ledger.total(NodeId(node as u32));
            writeln!(out, "{},{},{},{}", round, node, s.as_digit(), total).unwrap();
        }
    }
    out
}

pub fn queue_trace_csv(traces: &[(u32, RoundSchedule)]) -> String {
    let mut out = String::from("round,node,arrival,service_start,departure,W,S,T\n");
    for (round, schedule) in traces {
        for node in 0..schedule.n() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                round,
                node,
                schedule.arrivals()[node],
                schedule.service_starts()[node],
                schedule.departures()[node],
                schedule.waits()[node],
                schedule.services()[node],
                schedule.sojourns()[node],
            )
            .unwrap();
        }
    }
    out
}

pub fn game_trace_csv(traces: &[(u32, Vec<GameTrigger>)]) -> String {
    let mut out = String::from("round,game_index,focal,triggered_by,kind\n");
    for (round, triggers) in traces {
        for t in triggers {
            writeln!(
                out,
                "{},{},{},{},{}",
                round,
                t.game_index,
                t.focal,
                t.triggered_by,
                t.kind.label()
            )
            .unwrap();
        }
    }
    out
}

pub fn histogram_csv(histogram: &[(usize, u64)]) -> String {
    let mut out = String::from("n_c,count\n");
    for (n_c, count) in histogram {
        writeln!(out, "{},{}", n_c, count).unwrap();
    }
    out
}

pub fn edges_csv(topology: &NetworkTopology) -> String {
    let mut buf = Vec::from("u,v\n");
    topology
        .write_edge_list(&mut buf)
        .expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("edge list is ascii")
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("axis1,axis2,mean_rho_c,std_rho_c\n");
    for cell in &result.cells {
        let axis2 = cell.axis2.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            cell.axis1, axis2, cell.mean_rho_c, cell.std_rho_c
        )
        .unwrap();
    }
    out
}

fn emit(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes())?;
    written.push(path);
    Ok(())
}

/// Write every file an experiment produced into `dir` (created if needed)
/// and return the paths in the order written. Lattice snapshots become
/// PGM images; other graphs fall back to node,strategy CSV.
pub fn write_experiment(
    dir: &Path,
    capture: &CaptureConfig,
    topology: &NetworkTopology,
    result: &ExperimentResult,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    emit(dir, "summary.csv", &summary_csv(result), &mut written)?;
    for run in &result.runs {
        let k = run.replicate;
        if capture.timeseries {
            emit(
                dir,
                &format!("timeseries_rep{k}.csv"),
                &timeseries_csv(&run.trajectory),
                &mut written,
            )?;
        }
        for (step, strategies) in &run.snapshots {
            match topology.lattice_side() {
                Some(side) => emit(
                    dir,
                    &format!("snapshot_rep{k}_step{step}.pgm"),
                    &snapshot_pgm(side, strategies)?,
                    &mut written,
                )?,
                None => emit(
                    dir,
                    &format!("snapshot_rep{k}_step{step}.csv"),
                    &snapshot_csv(strategies),
                    &mut written,
                )?,
            }
        }
        if !run.payoff_traces.is_empty() {
            emit(
                dir,
                &format!("payoffs_rep{k}.csv"),
                &payoffs_csv(&run.payoff_traces),
                &mut written,
            )?;
        }
        if !run.queue_traces.is_empty() {
            emit(
                dir,
                &format!("queue_trace_rep{k}.csv"),
                &queue_trace_csv(&run.queue_traces),
                &mut written,
            )?;
        }
        if !run.game_traces.is_empty() {
            emit(
                dir,
                &format!("game_trace_rep{k}.csv"),
                &game_trace_csv(&run.game_traces),
                &mut written,
            )?;
        }
        if !run.cooperator_histogram.is_empty() {
            emit(
                dir,
                &format!("cooperator_histogram_rep{k}.csv"),
                &histogram_csv(&run.cooperator_histogram),
                &mut written,
            )?;
        }
    }
    if capture.edges {
        emit(dir, "edges.csv", &edges_csv(topology), &mut written)?;
    }
    Ok(written)
}

pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("sweep.csv");
    write_atomic(&path, sweep_csv(result).as_bytes())?;
    Ok(path)
}
