//! Timestamped pose trajectories and their line-delimited JSON file format.
//!
//! One record per line: `{"t": <seconds>, "p": [x, y, z], "q": [w, x, y, z]}`.
//! Floats are written with serde_json's shortest round-trip form, so
//! write-then-read is lossless.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, Pose, Quat, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("trajectory must contain at least one sample")]
    Empty,
    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotonicTimestamps { index: usize },
    #[error("sample {index}: {source}")]
    BadRotation {
        index: usize,
        source: GeomError,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One trajectory sample: a pose observed at `t` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample<T> {
    pub t: T,
    pub pose: Pose<T>,
}

/// Non-empty pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory<T> {
    samples: Vec<PoseSample<T>>,
}

impl<T: Real> PoseTrajectory<T> {
    pub fn new(samples: Vec<PoseSample<T>>) -> Result<Self, TrajError> {
        if samples.is_empty() {
            return Err(TrajError::Empty);
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(TrajError::NonMonotonicTimestamps { index: i + 1 });
            }
        }
        Ok(Self { samples })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn samples(&self) -> &[PoseSample<T>] {
        &self.samples
    }

    #[inline]
    pub fn first(&self) -> &PoseSample<T> {
        &self.samples[0]
    }

    #[inline]
    pub fn last(&self) -> &PoseSample<T> {
        self.samples.last().expect("trajectory is non-empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoseSample<T>> {
        self.samples.iter()
    }

    /// Same timestamps, poses replaced by `f(index, pose)`.
    pub fn map_poses(&self, mut f: impl FnMut(usize, &Pose<T>) -> Pose<T>) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| PoseSample {
                    t: s.t,
                    pose: f(i, &s.pose),
                })
                .collect(),
        }
    }
}

/// Wire form of one trajectory line.
#[derive(Serialize, Deserialize)]
struct TrajRecord {
    t: f64,
    p: [f64; 3],
    q: [f64; 4],
}

/// Serialize one sample as a single JSON line (no trailing newline).
pub fn sample_to_json_line(sample: &PoseSample<f64>) -> String {
    let rec = TrajRecord {
        t: sample.t,
        p: sample.pose.translation().to_array(),
        q: {
            let q = sample.pose.rotation();
            [q.w, q.x, q.y, q.z]
        },
    };
    serde_json::to_string(&rec).expect("trajectory records always serialize")
}

/// Parse one JSON line into a sample, validating the quaternion.
pub fn sample_from_json_line(text: &str, line: usize) -> Result<PoseSample<f64>, TrajError> {
    let rec: TrajRecord =
        serde_json::from_str(text).map_err(|source| TrajError::Json { line, source })?;
    let pose = Pose::try_new(
        Vec3::from_array(rec.p),
        rec.q[0],
        rec.q[1],
        rec.q[2],
        rec.q[3],
    )
    .map_err(|source| TrajError::BadRotation {
        index: line,
        source,
    })?;
    Ok(PoseSample { t: rec.t, pose })
}

pub fn write_jsonl(traj: &PoseTrajectory<f64>, path: &Path) -> Result<(), TrajError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for sample in traj.iter() {
        writeln!(out, "{}", sample_to_json_line(sample))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<PoseTrajectory<f64>, TrajError> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(sample_from_json_line(&line, i)?);
    }
    PoseTrajectory::new(samples)
}

/// A grasp-time transform is stored as one trajectory line with `t` equal to
/// the grasp time; these helpers read and write that single-line file.
pub fn write_single_pose(sample: &PoseSample<f64>, path: &Path) -> Result<(), TrajError> {
    std::fs::write(path, format!("{}\n", sample_to_json_line(sample)))?;
    Ok(())
}

pub fn read_single_pose(path: &Path) -> Result<PoseSample<f64>, TrajError> {
    let text = std::fs::read_to_string(path)?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or(TrajError::Empty)?;
    sample_from_json_line(line, 0)
}

/// Hemisphere-align a quaternion sequence: flip each element that has a
/// negative dot product with its aligned predecessor. Canonical storage only
/// fixes the global sign; consecutive smoothing math needs local continuity.
pub(crate) fn hemisphere_aligned<T: Real>(quats: &[Quat<T>]) -> Vec<Quat<T>> {
    let mut out = Vec::with_capacity(quats.len());
    for (i, &q) in quats.iter().enumerate() {
        if i == 0 {
            out.push(q);
            continue;
        }
        let prev: Quat<T> = out[i - 1];
        if q.dot(prev) < T::zero() {
            out.push(Quat {
                w: -q.w,
                x: -q.x,
                y: -q.y,
                z: -q.z,
            });
        } else {
            out.push(q);
        }
    }
    out
}
