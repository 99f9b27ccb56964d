//! The judge interface and its two shipped implementations: a scripted
//! mock for tests and a remote client defined purely by its wire shape.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::frames::FrameSummary;
use super::FilterError;

/// Answers one question: does this summary show the command executed
/// successfully?
pub trait Judge {
    /// Recorded on every verdict, so logs can mix judges.
    fn id(&self) -> &str;
    fn assess(&mut self, summary: &FrameSummary, command: &str) -> Result<bool, FilterError>;
}

/// Deterministic judge for tests: per-video verdict sequences consumed
/// call by call. A video past the end of its sequence repeats the last
/// entry; an unknown video gets the default verdict.
#[derive(Debug, Clone)]
pub struct MockJudge {
    id: String,
    labels: BTreeMap<String, Vec<bool>>,
    default: bool,
    seen: BTreeMap<String, usize>,
    calls: usize,
}

impl MockJudge {
    pub fn new(id: impl Into<String>, default: bool) -> Self {
        Self {
            id: id.into(),
            labels: BTreeMap::new(),
            default,
            seen: BTreeMap::new(),
            calls: 0,
        }
    }

    /// Script the verdicts for one video's successive attempts.
    pub fn label(mut self, video: impl Into<String>, verdicts: Vec<bool>) -> Self {
        self.labels.insert(video.into(), verdicts);
        self
    }

    /// Total assess calls, for call-count audits.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Judge for MockJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn assess(&mut self, summary: &FrameSummary, _command: &str) -> Result<bool, FilterError> {
        self.calls += 1;
        let nth = self.seen.entry(summary.video.clone()).or_insert(0);
        *nth += 1;
        let verdict = match self.labels.get(&summary.video) {
            Some(seq) => seq
                .get(*nth - 1)
                .or(seq.last())
                .copied()
                .unwrap_or(self.default),
            None => self.default,
        };
        Ok(verdict)
    }
}

/// One request over the remote judge wire.
#[derive(Serialize, Deserialize)]
struct WireRequest<'a> {
    command: &'a str,
    summary_png_b64: String,
}

/// Carries request bytes to a judge endpoint and returns its raw reply.
/// Closures work: `|req: &[u8]| -> std::io::Result<Vec<u8>>`.
pub trait JudgeTransport {
    fn round_trip(&mut self, request: &[u8]) -> std::io::Result<Vec<u8>>;
}

impl<F> JudgeTransport for F
where
    F: FnMut(&[u8]) -> std::io::Result<Vec<u8>>,
{
    fn round_trip(&mut self, request: &[u8]) -> std::io::Result<Vec<u8>> {
        self(request)
    }
}

/// Remote judge client. The request is one JSON object with the command
/// string and the stacked summary image as base64 PNG; the reply must be
/// the single token `Yes` or `No` (surrounding whitespace tolerated).
pub struct RemoteJudge<T> {
    id: String,
    transport: T,
}

impl<T: JudgeTransport> RemoteJudge<T> {
    pub fn new(id: impl Into<String>, transport: T) -> Self {
        Self {
            id: id.into(),
            transport,
        }
    }
}

impl<T: JudgeTransport> Judge for RemoteJudge<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn assess(&mut self, summary: &FrameSummary, command: &str) -> Result<bool, FilterError> {
        let request = serde_json::to_vec(&WireRequest {
            command,
            summary_png_b64: BASE64.encode(summary.image.to_png()?),
        })
        .expect("wire request has no unserializable parts");
        let reply = self.transport.round_trip(&request)?;
        let text = std::str::from_utf8(&reply).map_err(|_| FilterError::MalformedVerdict {
            got: format!("{} bytes of non-utf8", reply.len()),
        })?;
        match text.trim() {
            "Yes" => Ok(true),
            "No" => Ok(false),
            other => Err(FilterError::MalformedVerdict {
                got: other.chars().take(40).collect(),
            }),
        }
    }
}
