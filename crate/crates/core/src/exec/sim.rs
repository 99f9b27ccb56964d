//! Kinematic stand-in for the arm and camera: speed-clamped pose stepping,
//! scripted perturbations, seeded observation noise.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{Quat, RotVec};
use crate::{Pose, Vec3};

use super::ExecError;

/// What a scripted perturbation does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// World-frame bump of the end-effector.
    EeImpulse,
    /// The object shifts inside the gripper; the in-hand transform
    /// recomposes and stays shifted.
    GraspSlip,
    /// Gaussian noise on observed object poses from the trigger onward.
    ObservationNoise,
}

/// When a perturbation fires: the first tick the executor targets the
/// given waypoint, or an absolute tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Waypoint(usize),
    Tick(usize),
}

/// Pose delta for impulses and slips, noise levels for observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Magnitude {
    PoseDelta { p: [f64; 3], q: [f64; 4] },
    NoiseStd { std_m: f64, std_deg: f64 },
}

/// One scripted disturbance. Fires at most once per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub trigger: Trigger,
    pub magnitude: Magnitude,
    pub seed: u64,
}

impl Perturbation {
    pub(super) fn validate(&self, index: usize, plan_len: usize) -> Result<(), ExecError> {
        if let Trigger::Waypoint(w) = self.trigger {
            if w >= plan_len {
                return Err(ExecError::InvalidPerturbation {
                    index,
                    reason: format!("waypoint trigger {w} outside plan of {plan_len}"),
                });
            }
        }
        match (self.kind, self.magnitude) {
            (PerturbationKind::EeImpulse | PerturbationKind::GraspSlip, Magnitude::PoseDelta { p, q }) => {
                let finite = p.iter().chain(q.iter()).all(|v| v.is_finite());
                if !finite {
                    return Err(ExecError::InvalidPerturbation {
                        index,
                        reason: "pose delta must be finite".into(),
                    });
                }
                if Quat::try_new(q[0], q[1], q[2], q[3]).is_err() {
                    return Err(ExecError::InvalidPerturbation {
                        index,
                        reason: "pose delta rotation is not a unit quaternion".into(),
                    });
                }
                Ok(())
            }
            (PerturbationKind::ObservationNoise, Magnitude::NoiseStd { std_m, std_deg }) => {
                if std_m.is_finite() && std_deg.is_finite() && std_m >= 0.0 && std_deg >= 0.0 {
                    Ok(())
                } else {
                    Err(ExecError::InvalidPerturbation {
                        index,
                        reason: "noise stds must be finite and non-negative".into(),
                    })
                }
            }
            _ => Err(ExecError::InvalidPerturbation {
                index,
                reason: "magnitude shape does not match kind".into(),
            }),
        }
    }

    fn pose_delta(&self) -> Pose {
        match self.magnitude {
            Magnitude::PoseDelta { p, q } => Pose::new(
                Vec3::new(p[0], p[1], p[2]),
                Quat::try_new(q[0], q[1], q[2], q[3]).expect("validated"),
            ),
            Magnitude::NoiseStd { .. } => unreachable!("validated against kind"),
        }
    }
}

/// Simulator state: the true end-effector pose, the true in-hand
/// transform, speed limits, and the observation noise channel. The
/// in-hand transform changes only through scripted slips.
#[derive(Debug, Clone)]
pub struct SimState {
    ee: Pose,
    attach: Pose,
    max_step_m: f64,
    max_step_deg: f64,
    noise_std_m: f64,
    noise_std_deg: f64,
    rng: ChaCha8Rng,
}

impl SimState {
    /// `seed` drives observation noise only; noiseless runs never draw
    /// from it.
    pub fn new(
        ee: Pose,
        attach: Pose,
        max_step_m: f64,
        max_step_deg: f64,
        seed: u64,
    ) -> Result<Self, ExecError> {
        if !(max_step_m > 0.0) || !(max_step_deg > 0.0) {
            return Err(ExecError::InvalidSim {
                reason: "speed limits must be positive",
            });
        }
        Ok(Self {
            ee,
            attach,
            max_step_m,
            max_step_deg,
            noise_std_m: 0.0,
            noise_std_deg: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// True end-effector pose; a real arm knows this from forward
    /// kinematics, so the executor may read it too.
    #[inline]
    pub fn ee_pose(&self) -> Pose {
        self.ee
    }

    /// True in-hand transform (test introspection; the executor must not
    /// use this).
    #[inline]
    pub fn attach(&self) -> &Pose {
        &self.attach
    }

    /// Move toward `cmd`, clamped by the per-tick limits. Lands exactly on
    /// the target once it is within reach on both axes.
    fn step_toward(&mut self, cmd: &Pose) {
        let to_target = cmd.translation() - self.ee.translation();
        let dist = to_target.norm();
        let t = if dist <= self.max_step_m {
            cmd.translation()
        } else {
            self.ee.translation() + to_target * (self.max_step_m / dist)
        };
        let rel = self.ee.rotation().conjugate() * cmd.rotation();
        let rv = rel.to_rotvec();
        let angle_deg = rv.angle().to_degrees();
        let q = if angle_deg <= self.max_step_deg {
            cmd.rotation()
        } else {
            let frac = self.max_step_deg / angle_deg;
            self.ee.rotation()
                * Quat::from_rotvec(RotVec::new(rv.0.x * frac, rv.0.y * frac, rv.0.z * frac))
        };
        self.ee = Pose::new(t, q);
    }

    /// Observed object pose: the truth, plus Gaussian noise once a noise
    /// perturbation armed it. Noise draws happen only when a std is
    /// strictly positive, so noiseless runs are bit-reproducible without
    /// touching the RNG.
    fn observe(&mut self) -> Pose {
        let truth = self.ee.compose(&self.attach);
        let mut t = truth.translation();
        let mut q = truth.rotation();
        if self.noise_std_m > 0.0 {
            let n = Normal::new(0.0, self.noise_std_m).expect("validated std");
            t = Vec3::new(
                t.x + n.sample(&mut self.rng),
                t.y + n.sample(&mut self.rng),
                t.z + n.sample(&mut self.rng),
            );
        }
        if self.noise_std_deg > 0.0 {
            let axis = loop {
                let n = Normal::new(0.0, 1.0).unwrap();
                let v = Vec3::new(
                    n.sample(&mut self.rng),
                    n.sample(&mut self.rng),
                    n.sample(&mut self.rng),
                );
                if let Some(unit) = v.normalized() {
                    break unit;
                }
            };
            let n = Normal::new(0.0, self.noise_std_deg.to_radians()).expect("validated std");
            let angle: f64 = n.sample(&mut self.rng);
            q = q * Quat::from_axis_angle(axis, angle);
        }
        Pose::new(t, q)
    }
}

/// Advance the simulator one tick: move toward `cmd`, apply the
/// perturbations firing this tick, return the observed object pose.
/// Deterministic for fixed seeds.
pub fn sim_step(state: &mut SimState, cmd: &Pose, firing: &[&Perturbation]) -> Pose {
    state.step_toward(cmd);
    for p in firing {
        match p.kind {
            PerturbationKind::EeImpulse => {
                state.ee = p.pose_delta().compose(&state.ee);
            }
            PerturbationKind::GraspSlip => {
                state.attach = state.attach.compose(&p.pose_delta());
            }
            PerturbationKind::ObservationNoise => {
                if let Magnitude::NoiseStd { std_m, std_deg } = p.magnitude {
                    state.noise_std_m = std_m;
                    state.noise_std_deg = std_deg;
                    state.rng = ChaCha8Rng::seed_from_u64(p.seed);
                }
            }
        }
    }
    state.observe()
}

/// Perturbation script: one JSON record per line.
pub fn write_perturbation_script<W: Write>(
    out: &mut W,
    script: &[Perturbation],
) -> Result<(), ExecError> {
    for p in script {
        let line = serde_json::to_string(p).map_err(|source| ExecError::Json { line: 0, source })?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_perturbation_script<R: BufRead>(input: R) -> Result<Vec<Perturbation>, ExecError> {
    let mut script = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Perturbation =
            serde_json::from_str(&line).map_err(|source| ExecError::Json { line: i + 1, source })?;
        script.push(p);
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_sim(ee: Pose) -> SimState {
        SimState::new(ee, Pose::identity(), 0.01, 5.0, 0).unwrap()
    }

    #[test]
    fn observation_is_ee_composed_with_attach_when_quiet() {
        let attach = Pose::from_translation(Vec3::new(0.0, 0.0, 0.05));
        let ee = Pose::from_translation(Vec3::new(0.1, 0.2, 0.3));
        let mut sim = SimState::new(ee, attach, 0.01, 5.0, 0).unwrap();
        // Command the current pose: nothing moves, nothing fires.
        let obs = sim_step(&mut sim, &ee, &[]);
        assert_eq!(obs, ee.compose(&attach));
    }

    #[test]
    fn speed_limit_one_centimetre_covers_five_in_five_ticks() {
        let start = Pose::from_translation(Vec3::new(0.0, 0.0, 0.0));
        let target = Pose::from_translation(Vec3::new(0.05, 0.0, 0.0));
        let mut sim = plain_sim(start);
        let mut ticks = 0;
        while (sim.ee_pose().translation() - target.translation()).norm() > 0.0 {
            sim_step(&mut sim, &target, &[]);
            ticks += 1;
            assert!(ticks < 100, "never settled");
        }
        assert_eq!(ticks, 5);
    }

    #[test]
    fn rotation_steps_are_clamped_and_land_exactly() {
        let start = Pose::identity();
        let target = Pose::from_rotation(Quat::from_axis_angle(
            Vec3::new(0.0, 0.0, 1.0),
            12f64.to_radians(),
        ));
        let mut sim = plain_sim(start);
        sim_step(&mut sim, &target, &[]);
        assert!((sim.ee_pose().rotation_angle_to_deg(&start) - 5.0).abs() < 1e-9);
        sim_step(&mut sim, &target, &[]);
        sim_step(&mut sim, &target, &[]);
        assert!(sim.ee_pose().rotation_angle_to_deg(&target) < 1e-12);
    }

    #[test]
    fn grasp_slip_jumps_the_observation_by_its_magnitude() {
        let ee = Pose::from_translation(Vec3::new(0.2, 0.0, 0.3));
        let mut sim = SimState::new(ee, Pose::identity(), 0.01, 5.0, 0).unwrap();
        let before = sim_step(&mut sim, &ee, &[]);
        let slip = Perturbation {
            kind: PerturbationKind::GraspSlip,
            trigger: Trigger::Tick(10),
            magnitude: Magnitude::PoseDelta {
                p: [0.04, 0.0, 0.0],
                q: [1.0, 0.0, 0.0, 0.0],
            },
            seed: 0,
        };
        let after = sim_step(&mut sim, &ee, &[&slip]);
        let jump = (after.translation() - before.translation()).norm();
        assert!((jump - 0.04).abs() < 1e-12);
        // The slip persists.
        let later = sim_step(&mut sim, &ee, &[]);
        assert_eq!(later, after);
    }

    #[test]
    fn noise_is_seeded_and_only_drawn_when_armed() {
        let ee = Pose::from_translation(Vec3::new(0.1, 0.0, 0.2));
        let noise = Perturbation {
            kind: PerturbationKind::ObservationNoise,
            trigger: Trigger::Tick(0),
            magnitude: Magnitude::NoiseStd {
                std_m: 0.001,
                std_deg: 0.1,
            },
            seed: 42,
        };
        let run = |arm: bool| {
            let mut sim = SimState::new(ee, Pose::identity(), 0.01, 5.0, 7).unwrap();
            let firing: Vec<&Perturbation> = if arm { vec![&noise] } else { vec![] };
            let first = sim_step(&mut sim, &ee, &firing);
            let second = sim_step(&mut sim, &ee, &[]);
            (first, second)
        };
        let (a1, a2) = run(true);
        let (b1, b2) = run(true);
        assert_eq!(a1, b1);
        assert_eq!(a2, b2);
        // Different samples tick to tick.
        assert_ne!(a1, a2);
        // Unarmed: exact truth, regardless of the state seed.
        let (q1, q2) = run(false);
        assert_eq!(q1, ee);
        assert_eq!(q2, q1);
        // Noise magnitude is in the right ballpark (not a unit mixup).
        assert!((a1.translation() - ee.translation()).norm() < 0.01);
    }

    #[test]
    fn script_round_trips_through_jsonl() {
        let script = vec![
            Perturbation {
                kind: PerturbationKind::GraspSlip,
                trigger: Trigger::Waypoint(5),
                magnitude: Magnitude::PoseDelta {
                    p: [0.04, 0.0, 0.0],
                    q: [1.0, 0.0, 0.0, 0.0],
                },
                seed: 7,
            },
            Perturbation {
                kind: PerturbationKind::ObservationNoise,
                trigger: Trigger::Tick(12),
                magnitude: Magnitude::NoiseStd {
                    std_m: 0.002,
                    std_deg: 0.25,
                },
                seed: 3,
            },
        ];
        let mut buf = Vec::new();
        write_perturbation_script(&mut buf, &script).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "{\"kind\":\"grasp_slip\",\"trigger\":{\"waypoint\":5},\"magnitude\":{\"p\":[0.04,0.0,0.0],\"q\":[1.0,0.0,0.0,0.0]},\"seed\":7}"
        );
        let back = read_perturbation_script(&buf[..]).unwrap();
        assert_eq!(back, script);
    }

    #[test]
    fn bad_script_lines_are_reported_with_numbers() {
        let text = "{\"kind\":\"grasp_slip\",\"trigger\":{\"waypoint\":1},\"magnitude\":{\"p\":[0.0,0.0,0.0],\"q\":[1.0,0.0,0.0,0.0]},\"seed\":1}\nnot json\n";
        match read_perturbation_script(text.as_bytes()) {
            Err(ExecError::Json { line: 2, .. }) => {}
            other => panic!("expected line-2 error, got {other:?}"),
        }
    }
}
