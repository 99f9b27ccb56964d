//! Generation filtering: summarize each generated video for a judge,
//! retry failed generations up to a cap, log every verdict, and compute
//! the statistics the verdict logs support (pass rates, metric-vs-human
//! correlation).

mod frames;
mod judge;

pub use frames::{
    sample_frames, stack_frames, summarize, Frame, FrameSummary, Video, SUMMARY_FRAME_COUNT,
};
pub use judge::{Judge, JudgeTransport, MockJudge, RemoteJudge};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("video has {frames} frames, summaries need at least {need}")]
    TooFewFrames { frames: usize, need: usize },
    #[error("cannot sample {k} frames; a summary needs at least 2")]
    BadSampleCount { k: usize },
    #[error("bad raster: {reason}")]
    BadRaster { reason: String },
    #[error("judge unavailable on attempt {attempt}: {reason}")]
    JudgeUnavailable { attempt: usize, reason: String },
    #[error("judge reply was not Yes or No: {got:?}")]
    MalformedVerdict { got: String },
    #[error("filtering needs at least one attempt")]
    NoAttempts,
    #[error("no first-attempt verdicts to group")]
    EmptyGroup,
    #[error("correlation input is constant")]
    ConstantInput,
    #[error("correlation inputs differ in length: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed verdict record on line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// One judge decision about one generation attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub video: String,
    /// 1-based attempt number within the video's filter run.
    pub attempt: usize,
    pub pass: bool,
    pub judge: String,
    /// Ground-truth label, when a human reviewed the same video.
    pub human: Option<bool>,
}

/// How a filter run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterOutcome {
    /// 1-based attempt whose video goes downstream.
    pub selected_attempt: usize,
    pub passed_filter: bool,
    /// Every attempt failed; the last one is used anyway.
    pub fallback_used: bool,
}

/// Attempt cap used by the pipeline when none is configured.
pub const MAX_FILTER_ATTEMPTS: usize = 5;

/// Generate-judge loop for one command: regenerate until the judge
/// passes a video or the attempt cap is reached, then fall back to the
/// final attempt. The generator is called with the 1-based attempt
/// number (at most `max_attempts` times); the judge is consulted exactly
/// once per generated video. Judge failures abort with the attempt that
/// could not be judged.
pub fn run_filter<G>(
    command: &str,
    mut generate: G,
    judge: &mut dyn Judge,
    max_attempts: usize,
) -> Result<(FilterOutcome, Vec<Verdict>), FilterError>
where
    G: FnMut(usize) -> Result<Video, FilterError>,
{
    if max_attempts == 0 {
        return Err(FilterError::NoAttempts);
    }
    let mut verdicts = Vec::new();
    for attempt in 1..=max_attempts {
        let video = generate(attempt)?;
        let summary = summarize(&video, SUMMARY_FRAME_COUNT)?;
        let pass =
            judge
                .assess(&summary, command)
                .map_err(|e| FilterError::JudgeUnavailable {
                    attempt,
                    reason: e.to_string(),
                })?;
        verdicts.push(Verdict {
            video: video.id().to_string(),
            attempt,
            pass,
            judge: judge.id().to_string(),
            human: None,
        });
        if pass {
            return Ok((
                FilterOutcome {
                    selected_attempt: attempt,
                    passed_filter: true,
                    fallback_used: false,
                },
                verdicts,
            ));
        }
    }
    Ok((
        FilterOutcome {
            selected_attempt: max_attempts,
            passed_filter: false,
            fallback_used: true,
        },
        verdicts,
    ))
}

/// A pass count over a group, kept as the exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassRate {
    pub passes: usize,
    pub total: usize,
}

impl PassRate {
    pub fn fraction(&self) -> f64 {
        self.passes as f64 / self.total as f64
    }
}

/// First-attempt pass fraction per group. Retry verdicts (attempt > 1)
/// measure the protocol, not generation quality, so they are excluded.
pub fn pass_rate<K>(
    verdicts: &[Verdict],
    key: K,
) -> Result<BTreeMap<String, PassRate>, FilterError>
where
    K: Fn(&Verdict) -> String,
{
    let mut groups: BTreeMap<String, PassRate> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| v.attempt == 1) {
        let entry = groups
            .entry(key(v))
            .or_insert(PassRate { passes: 0, total: 0 });
        entry.total += 1;
        entry.passes += v.pass as usize;
    }
    if groups.is_empty() {
        return Err(FilterError::EmptyGroup);
    }
    Ok(groups)
}

/// Sample Pearson correlation coefficient, clamped to [-1, 1] against
/// roundoff. Inputs must have equal length, at least two samples, and
/// variation in both coordinates (a list shorter than two is constant
/// by definition).
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T, FilterError> {
    if x.len() != y.len() {
        return Err(FilterError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(FilterError::ConstantInput);
    }
    let count = T::of(n as f64);
    let mean = |s: &[T]| s.iter().fold(T::zero(), |a, &v| a + v) / count;
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = T::zero();
    let mut syy = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(FilterError::ConstantInput);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.min(T::one()).max(-T::one()))
}

/// Append verdicts as JSON lines.
pub fn write_verdicts<W: Write>(out: &mut W, verdicts: &[Verdict]) -> Result<(), FilterError> {
    for v in verdicts {
        let text = serde_json::to_string(v).map_err(|source| FilterError::Json {
            line: 0,
            source,
        })?;
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a verdict log written by [`write_verdicts`]. Blank lines are
/// skipped; anything else must parse.
pub fn read_verdicts<R: BufRead>(input: R) -> Result<Vec<Verdict>, FilterError> {
    let mut verdicts = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v =
            serde_json::from_str(&line).map_err(|source| FilterError::Json { line: i + 1, source })?;
        verdicts.push(v);
    }
    Ok(verdicts)
}
