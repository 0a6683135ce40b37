//! CSV export of trajectories.

use std::io;

use super::integrate::FlowTrajectory;
use crate::json::format_f64;

/// Header `t, loss, theta_0 … theta_{M−1}, <channels>`.
pub fn csv_header(traj: &FlowTrajectory) -> Vec<String> {
    let m = traj.thetas.first().map_or(0, Vec::len);
    ["t".to_string(), "loss".to_string()]
        .into_iter()
        .chain((0..m).map(|k| format!("theta_{k}")))
        .chain(traj.channels.iter().map(|c| c.name.clone()))
        .collect()
}

pub fn write_csv<W: io::Write>(traj: &FlowTrajectory, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(traj))?;
    for (k, (t, theta)) in traj.times.iter().zip(&traj.thetas).enumerate() {
        let row = [*t, traj.loss_values[k]]
            .into_iter()
            .chain(theta.iter().copied())
            .chain(traj.channels.iter().map(|c| c.values[k]))
            .map(format_f64);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
