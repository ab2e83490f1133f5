use std::io::{self, Write};

use serde::Serialize;

use super::{EpisodeTrace, Outcome};
use crate::geometry::Pose;

#[derive(Serialize)]
struct OutcomeRecord<'a> {
    outcome: Outcome,
    end_t: f64,
    final_pose: &'a Pose,
}

/// One JSON object per tick, then a closing `{"outcome": ...}` record.
pub fn write_trace_jsonl(trace: &EpisodeTrace, out: &mut impl Write) -> io::Result<()> {
    for tick in &trace.ticks {
        serde_json::to_writer(&mut *out, tick)?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(
        &mut *out,
        &OutcomeRecord {
            outcome: trace.outcome,
            end_t: trace.end_t,
            final_pose: &trace.final_pose,
        },
    )?;
    out.write_all(b"\n")
}

/// Trajectory as CSV: `t,x,z,yaw,command`.
pub fn write_trace_csv(trace: &EpisodeTrace, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "t,x,z,yaw,command")?;
    for tick in &trace.ticks {
        writeln!(
            out,
            "{:.2},{:.6},{:.6},{:.6},{:?}",
            tick.t, tick.pose.x, tick.pose.z, tick.pose.yaw, tick.command
        )?;
    }
    Ok(())
}
