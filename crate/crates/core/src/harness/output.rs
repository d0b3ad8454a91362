use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::barrier::{write_barrier_field, FieldRegion};
use crate::gp::Point;

use super::episode::EpisodeResult;

pub type OutputResult<T> = Result<T, Box<dyn std::error::Error>>;

fn create(dir: &Path, name: &str) -> OutputResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> OutputResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes `trajectory.csv`, `metrics.json` and `timing.json`, plus
/// `perception.jsonl` and `barrier_field.csv` when they were captured.
/// Returns the paths written.
pub fn write_episode(dir: &Path, result: &EpisodeResult) -> OutputResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut w = create(dir, "trajectory.csv")?;
    result.log.write_csv(&mut w)?;
    w.flush()?;
    written.push(dir.join("trajectory.csv"));

    write_json(&dir.join("metrics.json"), &result.metrics)?;
    written.push(dir.join("metrics.json"));
    write_json(&dir.join("timing.json"), &result.timing)?;
    written.push(dir.join("timing.json"));

    if !result.perception_lines.is_empty() {
        let mut w = create(dir, "perception.jsonl")?;
        for line in &result.perception_lines {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        written.push(dir.join("perception.jsonl"));
    }

    if let Some(snap) = &result.field {
        let c = snap.robot.position();
        let region = FieldRegion {
            min: c - Point::new(4.0, 4.0),
            max: c + Point::new(4.0, 4.0),
            resolution: 0.1,
        };
        let w = create(dir, "barrier_field.csv")?;
        write_barrier_field(&snap.barrier, &region, w)?;
        written.push(dir.join("barrier_field.csv"));
    }
    Ok(written)
}
