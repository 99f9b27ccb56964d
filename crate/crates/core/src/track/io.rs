//! Tracks file: a single JSON object
//! `{"frame_count": N, "tracks": [{"xy": [[u, v], ...], "vis": [...]}]}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::scalar::Real;

use super::{Track, TrackError, TrackSet};

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    xy: Vec<[f64; 2]>,
    vis: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct TrackSetRecord {
    frame_count: usize,
    tracks: Vec<TrackRecord>,
}

pub fn read_tracks_json<T: Real>(path: &Path) -> Result<TrackSet<T>, TrackError> {
    let file = BufReader::new(File::open(path)?);
    let record: TrackSetRecord = serde_json::from_reader(file)?;
    let tracks = record
        .tracks
        .into_iter()
        .map(|t| Track {
            xy: t
                .xy
                .iter()
                .map(|[u, v]| Vec2::new(T::of(*u), T::of(*v)))
                .collect(),
            vis: t.vis,
        })
        .collect();
    TrackSet::new(record.frame_count, tracks)
}

pub fn write_tracks_json<T: Real>(path: &Path, tracks: &TrackSet<T>) -> Result<(), TrackError> {
    let record = TrackSetRecord {
        frame_count: tracks.frame_count(),
        tracks: tracks
            .tracks()
            .iter()
            .map(|t| TrackRecord {
                xy: t.xy.iter().map(|p| [p.x.as_f64(), p.y.as_f64()]).collect(),
                vis: t.vis.clone(),
            })
            .collect(),
    };
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut file, &record)?;
    file.write_all(b"\n")?;
    Ok(())
}
