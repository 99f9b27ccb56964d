//! Seeded synthetic manipulation tasks: a rigid object with known motion,
//! rendered to the same artifacts the real pipeline consumes (frame-0
//! depth, mask, point tracks, distorted predicted depth).
//!
//! Track heads sit on integer pixels so lifting them through the depth
//! raster is bilinear-exact, and the object surface is non-planar so PnP
//! stays well conditioned. Everything is a pure function of (kind, seed,
//! config).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::depth::Mask;
use crate::track::Track;
use crate::{
    CameraIntrinsics, DepthMap, Pose, PoseSample, PoseTrajectory, Quat, TrackSet, Vec2, Vec3,
};

/// The four motion archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    /// Lateral transport plus a 60 degree roll at near-constant camera
    /// depth.
    Pour,
    /// Motion toward the camera: object depth decreases monotonically.
    Lift,
    /// Transport with a scripted partial occlusion of the tracks.
    Place,
    /// Faster lateral transport, also with an occlusion window.
    Sweep,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Pour,
        TaskKind::Lift,
        TaskKind::Place,
        TaskKind::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Pour => "pour",
            TaskKind::Lift => "lift",
            TaskKind::Place => "place",
            TaskKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pour" => Ok(TaskKind::Pour),
            "lift" => Ok(TaskKind::Lift),
            "place" => Ok(TaskKind::Place),
            "sweep" => Ok(TaskKind::Sweep),
            other => Err(format!(
                "unknown task kind {other:?}; expected pour, lift, place, or sweep"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Frames in the clip (at the 15 fps timeline).
    pub frames: usize,
    /// Per-frame flicker std of the predicted depth, meters. Zero keeps
    /// the prediction a pure affine distortion.
    pub flicker_std_m: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames: 30,
            flicker_std_m: 0.005,
        }
    }
}

/// Everything a synthetic episode provides.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    pub seed: u64,
    pub camera: CameraIntrinsics,
    /// Ground-truth object motion, camera frame, identity at frame 0.
    pub object_traj: PoseTrajectory,
    /// True frame-0 depth (object over a background wall), fully valid.
    pub depth0: DepthMap,
    /// Object mask at frame 0.
    pub mask0: Mask,
    /// Per-frame masks; the frame-0 mask repeated.
    pub masks: Vec<Mask>,
    pub tracks: TrackSet,
    /// Affine-distorted, optionally flickering depth prediction per frame:
    /// `pred = (true0 - shift) / scale + flicker`.
    pub pred_depths: Vec<DepthMap>,
    pub true_scale: f64,
    pub true_shift: f64,
    /// Frame range `[start, end)` during which all but 3 tracks are
    /// hidden, if the kind scripts one.
    pub occlusion_window: Option<(usize, usize)>,
}

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const CENTER_U: f64 = 320.0;
const CENTER_V: f64 = 240.0;
const OBJECT_RADIUS_PX: f64 = 90.0;

/// Smoothstep ramp: 0 at 0, 1 at 1, zero slope at both ends.
fn ease(tau: f64) -> f64 {
    tau * tau * (3.0 - 2.0 * tau)
}

/// A synthetic episode with default length and flicker.
pub fn gen_synthetic_task(kind: TaskKind, seed: u64) -> SyntheticTask {
    gen_synthetic_task_with(kind, seed, &SynthConfig::default())
}

pub fn gen_synthetic_task_with(kind: TaskKind, seed: u64, cfg: &SynthConfig) -> SyntheticTask {
    assert!(cfg.frames >= 2, "a clip needs at least two frames");
    assert!(
        cfg.flicker_std_m >= 0.0 && cfg.flicker_std_m.is_finite(),
        "flicker std must be finite and non-negative"
    );
    let kind_tag = match kind {
        TaskKind::Pour => 0x706f_7572u64,
        TaskKind::Lift => 0x6c69_6674,
        TaskKind::Place => 0x706c_6163,
        TaskKind::Sweep => 0x7377_6565,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ kind_tag);
    let camera = CameraIntrinsics::new(525.0, 525.0, CENTER_U, CENTER_V, WIDTH, HEIGHT)
        .expect("fixed intrinsics are valid");

    // Object surface and background wall. Seeded phases decorrelate the
    // relief across seeds; the amplitude keeps PnP away from the
    // near-planar ambiguity.
    let phase_u = rng.gen::<f64>() * std::f64::consts::TAU;
    let phase_v = rng.gen::<f64>() * std::f64::consts::TAU;
    let surface = move |u: f64, v: f64| {
        0.6 + 0.08 * (u * 0.031 + phase_u).sin() * (v * 0.027 + phase_v).cos()
    };
    let background = |u: f64, v: f64| 1.2 + 0.0002 * u - 0.0001 * v;
    let inside = |u: f64, v: f64| {
        let du = u - CENTER_U;
        let dv = v - CENTER_V;
        du * du + dv * dv < OBJECT_RADIUS_PX * OBJECT_RADIUS_PX
    };

    let mut depth_data = Vec::with_capacity((WIDTH * HEIGHT) as usize);
    let mut mask_bits = Vec::with_capacity((WIDTH * HEIGHT) as usize);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let (u, v) = (x as f64, y as f64);
            let on_object = inside(u, v);
            depth_data.push(if on_object {
                surface(u, v)
            } else {
                background(u, v)
            });
            mask_bits.push(on_object);
        }
    }
    let depth0 = DepthMap::new(WIDTH, HEIGHT, depth_data).expect("surface depths are positive");
    let mask0 = Mask::new(WIDTH, HEIGHT, mask_bits).expect("sized to the raster");

    // Integer-pixel track heads on the object, away from the mask rim so
    // small motions keep them over it.
    let mut heads = Vec::new();
    let mut v = 160;
    while v <= 320 {
        let mut u = 240;
        while u <= 400 {
            let (uf, vf) = (u as f64, v as f64);
            let du = uf - CENTER_U;
            let dv = vf - CENTER_V;
            if du * du + dv * dv < (OBJECT_RADIUS_PX - 10.0) * (OBJECT_RADIUS_PX - 10.0) {
                heads.push(Vec2::new(uf, vf));
            }
            u += 20;
        }
        v += 20;
    }
    let points: Vec<Vec3> = heads
        .iter()
        .map(|h| {
            camera
                .backproject(*h, surface(h.x, h.y))
                .expect("positive surface depth")
        })
        .collect();
    let mut centroid = Vec3::zero();
    for p in &points {
        centroid += *p;
    }
    centroid = centroid / points.len() as f64;

    // Motion parameters, jittered 0.9..1.1 per seed.
    let jitter = 0.9 + 0.2 * rng.gen::<f64>();
    let (transport, axis, total_angle_deg, occlusion_window) = match kind {
        // z component exactly zero and the roll axis is the view axis, so
        // the object's camera depth stays constant through the motion.
        TaskKind::Pour => (
            Vec3::new(0.25 * jitter, 0.05 * jitter, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            60.0,
            None,
        ),
        TaskKind::Lift => (
            Vec3::new(0.05 * jitter, 0.02 * jitter, -0.18 * jitter),
            Vec3::new(1.0, 0.0, 0.0),
            10.0,
            None,
        ),
        TaskKind::Place => (
            Vec3::new(0.20 * jitter, 0.08 * jitter, 0.05 * jitter),
            Vec3::new(0.0, 0.0, 1.0),
            20.0,
            Some((12.min(cfg.frames - 1), 20.min(cfg.frames))),
        ),
        TaskKind::Sweep => (
            Vec3::new(0.28 * jitter, -0.02 * jitter, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            15.0,
            Some((8.min(cfg.frames - 1), 14.min(cfg.frames))),
        ),
    };

    let frames = cfg.frames;
    let samples: Vec<PoseSample> = (0..frames)
        .map(|t| {
            let tau = t as f64 / (frames - 1) as f64;
            let a = ease(tau);
            let q = Quat::from_axis_angle(axis, (a * total_angle_deg).to_radians());
            // Rotate about the object centroid, then transport.
            let translation = centroid - q.rotate(centroid) + transport * a;
            PoseSample {
                t: t as f64 / 15.0,
                pose: Pose::new(translation, q),
            }
        })
        .collect();
    let object_traj = PoseTrajectory::new(samples).expect("increasing timestamps");

    let occluded = |frame: usize, track: usize| {
        occlusion_window
            .map(|(s, e)| frame >= s && frame < e && track >= 3)
            .unwrap_or(false)
    };
    let tracks_vec: Vec<Track<f64>> = points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut xy = Vec::with_capacity(frames);
            let mut vis = Vec::with_capacity(frames);
            for (t, s) in object_traj.samples().iter().enumerate() {
                match camera.project(s.pose.apply(*p)) {
                    Ok(px) => {
                        let visible = camera.contains(px) && !occluded(t, j);
                        xy.push(px);
                        vis.push(visible);
                    }
                    Err(_) => {
                        xy.push(Vec2::new(0.0, 0.0));
                        vis.push(false);
                    }
                }
            }
            Track { xy, vis }
        })
        .collect();
    let tracks = TrackSet::new(frames, tracks_vec).expect("tracks span every frame");

    // Predicted depth: one affine distortion for the whole clip plus an
    // optional per-frame flicker offset, mirroring a per-frame monocular
    // estimator that is consistent up to scale/shift but not over time.
    let true_scale = 0.5 + 1.5 * rng.gen::<f64>();
    let true_shift = -0.2 + 0.4 * rng.gen::<f64>();
    let flicker = Normal::new(0.0, cfg.flicker_std_m);
    let pred_depths: Vec<DepthMap> = (0..frames)
        .map(|_| {
            let eta = match &flicker {
                Ok(n) if cfg.flicker_std_m > 0.0 => n.sample(&mut rng),
                _ => 0.0,
            };
            let data: Vec<f64> = depth0
                .data()
                .iter()
                .map(|d| (d - true_shift) / true_scale + eta)
                .collect();
            DepthMap::new(WIDTH, HEIGHT, data).expect("distortion keeps depths positive")
        })
        .collect();
    let masks = vec![mask0.clone(); frames];

    SyntheticTask {
        kind,
        seed,
        camera,
        object_traj,
        depth0,
        mask0,
        masks,
        tracks,
        pred_depths,
        true_scale,
        true_shift,
        occlusion_window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::fit_scale_shift;
    use crate::track::lift_tracks;

    #[test]
    fn lift_depth_decreases_monotonically() {
        for seed in [0, 1, 9] {
            let task = gen_synthetic_task(TaskKind::Lift, seed);
            let mut centroid = Vec3::zero();
            let model = lift_tracks(&task.tracks, &task.depth0, &task.camera).unwrap();
            let n = model.valid_count() as f64;
            for (p, ok) in model.points.iter().zip(&model.valid) {
                if *ok {
                    centroid += *p;
                }
            }
            centroid = centroid / n;
            let depths: Vec<f64> = task
                .object_traj
                .samples()
                .iter()
                .map(|s| s.pose.apply(centroid).z)
                .collect();
            for w in depths.windows(2) {
                assert!(w[1] < w[0], "depth rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn pour_keeps_camera_depth_nearly_constant() {
        for seed in [0, 3] {
            let task = gen_synthetic_task(TaskKind::Pour, seed);
            let model = lift_tracks(&task.tracks, &task.depth0, &task.camera).unwrap();
            let mut centroid = Vec3::zero();
            for (p, ok) in model.points.iter().zip(&model.valid) {
                if *ok {
                    centroid += *p;
                }
            }
            centroid = centroid / model.valid_count() as f64;
            let samples = task.object_traj.samples();
            let z0 = samples[0].pose.apply(centroid).z;
            let travel = (samples[samples.len() - 1].pose.apply(centroid)
                - samples[0].pose.apply(centroid))
            .norm();
            let max_dz = samples
                .iter()
                .map(|s| (s.pose.apply(centroid).z - z0).abs())
                .fold(0.0f64, f64::max);
            assert!(travel > 0.2, "pour should actually move ({travel})");
            assert!(
                max_dz < 0.1 * travel,
                "depth varied {max_dz} over travel {travel}"
            );
        }
    }

    #[test]
    fn place_hides_most_tracks_inside_the_window() {
        let task = gen_synthetic_task(TaskKind::Place, 4);
        let (start, end) = task.occlusion_window.unwrap();
        let total = task.tracks.len();
        for frame in start..end {
            let invisible = task
                .tracks
                .tracks()
                .iter()
                .filter(|t| !t.vis[frame])
                .count();
            assert!(
                invisible as f64 >= 0.4 * total as f64,
                "frame {frame}: only {invisible}/{total} hidden"
            );
            let visible = total - invisible;
            assert!(visible <= 3, "pose solving should be starved, got {visible}");
        }
        // Outside the window everything projects back in view.
        let clear = task.tracks.tracks().iter().filter(|t| t.vis[0]).count();
        assert_eq!(clear, total);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = gen_synthetic_task(TaskKind::Sweep, 11);
        let b = gen_synthetic_task(TaskKind::Sweep, 11);
        assert_eq!(a.tracks, b.tracks);
        assert_eq!(a.object_traj.samples(), b.object_traj.samples());
        assert_eq!(a.true_scale, b.true_scale);
        assert_eq!(a.true_shift, b.true_shift);
        assert_eq!(a.pred_depths[5].data(), b.pred_depths[5].data());
        let c = gen_synthetic_task(TaskKind::Sweep, 12);
        assert_ne!(a.true_scale, c.true_scale);
    }

    #[test]
    fn frame_zero_is_identity_and_lift_finds_enough_points() {
        for kind in TaskKind::ALL {
            let task = gen_synthetic_task(kind, 2);
            assert_eq!(task.object_traj.samples()[0].pose, Pose::identity());
            let model = lift_tracks(&task.tracks, &task.depth0, &task.camera).unwrap();
            assert!(model.valid_count() >= 4);
            assert_eq!(task.masks.len(), task.tracks.frame_count());
            assert_eq!(task.pred_depths.len(), task.tracks.frame_count());
        }
    }

    #[test]
    fn flicker_free_prediction_recovers_the_exact_affine_distortion() {
        let cfg = SynthConfig {
            frames: 6,
            flicker_std_m: 0.0,
        };
        let task = gen_synthetic_task_with(TaskKind::Pour, 8, &cfg);
        for pred in &task.pred_depths {
            let fit = fit_scale_shift(pred, &task.depth0, &task.mask0, 4).unwrap();
            assert!((fit.scale - task.true_scale).abs() < 1e-9);
            assert!((fit.shift - task.true_shift).abs() < 1e-9);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in TaskKind::ALL {
            assert_eq!(kind.name().parse::<TaskKind>().unwrap(), kind);
        }
        assert!("tickle".parse::<TaskKind>().is_err());
    }
}
