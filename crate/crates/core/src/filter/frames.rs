//! Video frames and the stacked summaries shown to a judge.

use image::{codecs::png::PngEncoder, ExtendedColorType, ImageEncoder};

use super::FilterError;

/// One RGB8 raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, rgb: Vec<u8>) -> Result<Self, FilterError> {
        if width == 0 || height == 0 {
            return Err(FilterError::BadRaster {
                reason: format!("frame dimensions must be positive, got {width}x{height}"),
            });
        }
        let expected = width as usize * height as usize * 3;
        if rgb.len() != expected {
            return Err(FilterError::BadRaster {
                reason: format!(
                    "{width}x{height} RGB frame needs {expected} bytes, got {}",
                    rgb.len()
                ),
            });
        }
        Ok(Self { width, height, rgb })
    }

    /// A solid-color frame.
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Result<Self, FilterError> {
        let px = width as usize * height as usize;
        let mut rgb = Vec::with_capacity(px * 3);
        for _ in 0..px {
            rgb.extend_from_slice(&color);
        }
        Self::new(width, height, rgb)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    /// Encode as PNG bytes (what goes over the judge wire).
    pub fn to_png(&self) -> Result<Vec<u8>, FilterError> {
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(&self.rgb, self.width, self.height, ExtendedColorType::Rgb8)
            .map_err(|e| FilterError::BadRaster {
                reason: format!("png encoding failed: {e}"),
            })?;
        Ok(out)
    }
}

/// A generated clip: an id and at least one frame, all the same size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Video {
    id: String,
    frames: Vec<Frame>,
}

impl Video {
    pub fn new(id: impl Into<String>, frames: Vec<Frame>) -> Result<Self, FilterError> {
        let id = id.into();
        let Some(first) = frames.first() else {
            return Err(FilterError::BadRaster {
                reason: format!("video {id:?} has no frames"),
            });
        };
        let (w, h) = (first.width(), first.height());
        if let Some(odd) = frames.iter().find(|f| f.width() != w || f.height() != h) {
            return Err(FilterError::BadRaster {
                reason: format!(
                    "video {id:?} mixes {w}x{h} and {}x{} frames",
                    odd.width(),
                    odd.height()
                ),
            });
        }
        Ok(Self { id, frames })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// How many frames a judge summary samples.
pub const SUMMARY_FRAME_COUNT: usize = 4;

/// Evenly spaced frame indices: `round(i * (N-1) / (k-1))` for
/// `i = 0..k`. Always starts at 0 and ends at N-1; strictly increasing
/// because the stride is at least one frame when `N >= k`.
pub fn sample_frames(frame_count: usize, k: usize) -> Result<Vec<usize>, FilterError> {
    if k < 2 {
        return Err(FilterError::BadSampleCount { k });
    }
    if frame_count < k {
        return Err(FilterError::TooFewFrames {
            frames: frame_count,
            need: k,
        });
    }
    Ok((0..k)
        .map(|i| {
            let exact = (i * (frame_count - 1)) as f64 / (k - 1) as f64;
            exact.round() as usize
        })
        .collect())
}

/// Concatenate frames top-to-bottom, unaltered. Widths must match.
pub fn stack_frames(frames: &[&Frame]) -> Result<Frame, FilterError> {
    let Some(first) = frames.first() else {
        return Err(FilterError::BadRaster {
            reason: "nothing to stack".into(),
        });
    };
    let width = first.width();
    let mut height = 0u32;
    let mut rgb = Vec::new();
    for f in frames {
        if f.width() != width {
            return Err(FilterError::BadRaster {
                reason: format!("cannot stack width {} under width {width}", f.width()),
            });
        }
        height += f.height();
        rgb.extend_from_slice(f.rgb());
    }
    Frame::new(width, height, rgb)
}

/// What a judge sees for one video: the sampled frames stacked into a
/// single raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSummary {
    pub video: String,
    pub frame_indices: Vec<usize>,
    pub image: Frame,
}

/// Sample `k` evenly spaced frames from the video and stack them.
pub fn summarize(video: &Video, k: usize) -> Result<FrameSummary, FilterError> {
    let frame_indices = sample_frames(video.frame_count(), k)?;
    let picked: Vec<&Frame> = frame_indices.iter().map(|&i| &video.frames()[i]).collect();
    Ok(FrameSummary {
        video: video.id().to_string(),
        frame_indices,
        image: stack_frames(&picked)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_matches_the_rounding_formula() {
        assert_eq!(sample_frames(4, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(sample_frames(100, 4).unwrap(), vec![0, 33, 66, 99]);
        assert_eq!(sample_frames(5, 4).unwrap(), vec![0, 1, 3, 4]);
        assert_eq!(sample_frames(2, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn sampling_rejects_short_videos_and_degenerate_counts() {
        assert!(matches!(
            sample_frames(3, 4),
            Err(FilterError::TooFewFrames { frames: 3, need: 4 })
        ));
        assert!(matches!(
            sample_frames(10, 1),
            Err(FilterError::BadSampleCount { k: 1 })
        ));
    }

    #[test]
    fn sampled_indices_are_strictly_increasing_with_pinned_endpoints() {
        for n in 4..80 {
            let idx = sample_frames(n, 4).unwrap();
            assert_eq!(idx[0], 0);
            assert_eq!(idx[3], n - 1);
            for w in idx.windows(2) {
                assert!(w[0] < w[1], "n={n}: {idx:?}");
            }
        }
    }

    #[test]
    fn frames_validate_buffer_size() {
        assert!(Frame::new(2, 2, vec![0; 12]).is_ok());
        assert!(matches!(
            Frame::new(2, 2, vec![0; 11]),
            Err(FilterError::BadRaster { .. })
        ));
        assert!(Frame::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn stacking_concatenates_rasters_in_order() {
        let a = Frame::new(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let b = Frame::new(2, 2, vec![10; 12]).unwrap();
        let s = stack_frames(&[&a, &b]).unwrap();
        assert_eq!((s.width(), s.height()), (2, 3));
        assert_eq!(&s.rgb()[..6], &[1, 2, 3, 4, 5, 6]);
        assert_eq!(&s.rgb()[6..], &[10; 12]);

        let wide = Frame::new(3, 1, vec![0; 9]).unwrap();
        assert!(stack_frames(&[&a, &wide]).is_err());
    }

    #[test]
    fn summaries_stack_the_sampled_frames_unaltered() {
        let frames: Vec<Frame> = (0..10u8)
            .map(|i| Frame::filled(2, 1, [i, i, i]).unwrap())
            .collect();
        let video = Video::new("clip", frames).unwrap();
        let s = summarize(&video, 4).unwrap();
        assert_eq!(s.frame_indices, vec![0, 3, 6, 9]);
        assert_eq!(s.image.height(), 4);
        // Row r of the stack is the raster of sampled frame r.
        for (row, &src) in s.frame_indices.iter().enumerate() {
            let bytes = &s.image.rgb()[row * 6..(row + 1) * 6];
            assert!(bytes.iter().all(|&b| b == src as u8));
        }
    }

    #[test]
    fn videos_require_uniform_frame_sizes() {
        let a = Frame::filled(2, 2, [0, 0, 0]).unwrap();
        let b = Frame::filled(3, 2, [0, 0, 0]).unwrap();
        assert!(Video::new("v", vec![a.clone(), b]).is_err());
        assert!(Video::new("v", vec![]).is_err());
        assert!(Video::new("v", vec![a]).is_ok());
    }

    #[test]
    fn png_bytes_decode_back_to_the_same_pixels() {
        let f = Frame::new(2, 2, (0..12u8).collect()).unwrap();
        let png = f.to_png().unwrap();
        let back = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!((back.width(), back.height()), (2, 2));
        assert_eq!(back.as_raw().as_slice(), f.rgb());
    }
}
