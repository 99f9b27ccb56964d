//! Damped Gauss-Newton PnP with an optional RANSAC wrapper.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{CameraIntrinsics, Pose, Quat, RotVec, Vec2, Vec3};
use crate::scalar::Real;

use super::{ModelPoints, PnPResult, TrackError};

/// Iteration cap for one refinement.
pub const MAX_REFINE_ITERATIONS: usize = 100;
/// Convergence threshold on the update step norm.
pub const STEP_TOLERANCE: f64 = 1e-10;

/// Parameters for [`pnp_ransac`].
#[derive(Debug, Clone)]
pub struct PnPConfig<T> {
    /// RANSAC rounds.
    pub iterations: usize,
    /// Inlier reprojection threshold, pixels.
    pub threshold_px: T,
    /// Fewer consensus inliers than this fails with `NoConsensus` (the
    /// minimal-sample size of 4 is enforced regardless).
    pub min_inliers: usize,
    /// Seed for the sampling RNG; fixed seed, fixed result.
    pub seed: u64,
    /// Warm start. `None` uses [`centroid_init`].
    pub init: Option<Pose<T>>,
}

impl<T: Real> Default for PnPConfig<T> {
    fn default() -> Self {
        Self {
            iterations: 200,
            threshold_px: T::of(3.0),
            min_inliers: 4,
            seed: 0,
            init: None,
        }
    }
}

fn usable_indices<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
) -> Result<Vec<usize>, TrackError> {
    if obs.len() != model.len() {
        return Err(TrackError::ObsLengthMismatch {
            observations: obs.len(),
            points: model.points.len(),
        });
    }
    Ok((0..model.len())
        .filter(|&i| model.valid[i] && obs[i].is_some())
        .collect())
}

/// Initial pose guess: identity rotation, translation placing the model
/// centroid at the back-projection of the mean observed pixel at the mean
/// model depth. Cheap, and close enough for Gauss-Newton on the moderate
/// rotations the solver is specified for.
pub fn centroid_init<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
) -> Result<Pose<T>, TrackError> {
    let indices = usable_indices(model, obs)?;
    if indices.len() < 4 {
        return Err(TrackError::TooFewPoints {
            found: indices.len(),
            need: 4,
        });
    }
    let n = T::of(indices.len() as f64);
    let mut centroid = Vec3::zero();
    let mut mean_px = Vec2::new(T::zero(), T::zero());
    for &i in &indices {
        centroid += model.points[i];
        let u = obs[i].unwrap();
        mean_px = Vec2::new(mean_px.x + u.x, mean_px.y + u.y);
    }
    centroid = centroid / n;
    mean_px = Vec2::new(mean_px.x / n, mean_px.y / n);
    let depth = if centroid.z > T::zero() {
        centroid.z
    } else {
        T::one()
    };
    let target = k
        .backproject(mean_px, depth)
        .expect("positive mean depth backprojects");
    Ok(Pose::from_translation(target - centroid))
}

/// Sum of squared reprojection errors at `pose`, or `None` when any used
/// point lands at non-positive depth or the total stops being finite.
fn reprojection_cost<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    indices: &[usize],
    pose: &Pose<T>,
) -> Option<T> {
    let mut cost = T::zero();
    for &i in indices {
        let pc = pose.apply(model.points[i]);
        let px = k.project(pc).ok()?;
        let u = obs[i].unwrap();
        let dx = px.x - u.x;
        let dy = px.y - u.y;
        cost += dx * dx + dy * dy;
    }
    if cost.is_finite() {
        Some(cost)
    } else {
        None
    }
}

fn mean_reproj_px<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    indices: &[usize],
    pose: &Pose<T>,
) -> T {
    if indices.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for &i in indices {
        sum += reproj_err_px(model, obs, k, i, pose).unwrap_or_else(T::infinity);
    }
    sum / T::of(indices.len() as f64)
}

fn reproj_err_px<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    index: usize,
    pose: &Pose<T>,
) -> Option<T> {
    let pc = pose.apply(model.points[index]);
    let px = k.project(pc).ok()?;
    let u = obs[index].unwrap();
    let dx = px.x - u.x;
    let dy = px.y - u.y;
    Some((dx * dx + dy * dy).sqrt())
}

/// Solve `a x = b` for a 6x6 system by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
fn solve6<T: Real>(mut a: [[T; 6]; 6], mut b: [T; 6]) -> Option<[T; 6]> {
    for col in 0..6 {
        let mut pivot = col;
        for row in col + 1..6 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < T::of(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [T::zero(); 6];
    for col in (0..6).rev() {
        let mut acc = b[col];
        for k in col + 1..6 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Rows (du/d twist, dv/d twist) of the reprojection Jacobian for one
/// camera-frame point under a left-multiplicative twist `(dt, dw)`: the
/// point Jacobian `[I | -skew(pc)]` composed with the pinhole projection
/// Jacobian. Caller guarantees `pc.z > 0`.
fn point_jacobian<T: Real>(k: &CameraIntrinsics<T>, pc: Vec3<T>) -> ([T; 6], [T; 6]) {
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let inv_z = T::one() / z;
    let inv_z2 = inv_z * inv_z;
    // Rows of d(projection)/d(camera point).
    let du = [k.fx * inv_z, T::zero(), -k.fx * x * inv_z2];
    let dv = [T::zero(), k.fy * inv_z, -k.fy * y * inv_z2];
    let mut ju = [T::zero(); 6];
    let mut jv = [T::zero(); 6];
    for c in 0..3 {
        ju[c] = du[c];
        jv[c] = dv[c];
    }
    // Columns of -skew(pc): (0, -z, y), (z, 0, -x), (-y, x, 0).
    let cols = [
        [T::zero(), -z, y],
        [z, T::zero(), -x],
        [-y, x, T::zero()],
    ];
    for c in 0..3 {
        ju[3 + c] = du[0] * cols[c][0] + du[1] * cols[c][1] + du[2] * cols[c][2];
        jv[3 + c] = dv[0] * cols[c][0] + dv[1] * cols[c][1] + dv[2] * cols[c][2];
    }
    (ju, jv)
}

/// One Levenberg-damped Gauss-Newton descent over the given correspondence
/// subset.
fn refine_over<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    indices: &[usize],
    init: &Pose<T>,
) -> Result<(Pose<T>, usize, Vec<T>), TrackError> {
    let mut pose = *init;
    let mut cost = match reprojection_cost(model, obs, k, indices, &pose) {
        Some(c) => c,
        None => return Err(TrackError::Diverged { iterations: 0 }),
    };
    let mut lambda = T::of(1e-3);
    let mut accepted = vec![cost];
    let mut iterations = 0;
    for iter in 1..=MAX_REFINE_ITERATIONS {
        iterations = iter;
        let mut jtj = [[T::zero(); 6]; 6];
        let mut jtr = [T::zero(); 6];
        for &i in indices {
            let pc = pose.apply(model.points[i]);
            let (ju, jv) = point_jacobian(k, pc);
            let px = k.project(pc).expect("finite cost implies z > 0");
            let u = obs[i].unwrap();
            let ru = px.x - u.x;
            let rv = px.y - u.y;
            for r in 0..6 {
                for c in 0..6 {
                    jtj[r][c] += ju[r] * ju[c] + jv[r] * jv[c];
                }
                jtr[r] += ju[r] * ru + jv[r] * rv;
            }
        }
        let mut damped = jtj;
        for d in 0..6 {
            damped[d][d] += lambda;
        }
        let rhs = {
            let mut r = [T::zero(); 6];
            for d in 0..6 {
                r[d] = -jtr[d];
            }
            r
        };
        let step = match solve6(damped, rhs) {
            Some(s) => s,
            None => {
                lambda *= T::of(10.0);
                continue;
            }
        };
        let step_norm = step.iter().fold(T::zero(), |acc, s| acc + *s * *s).sqrt();
        if step_norm < T::of(STEP_TOLERANCE) {
            break;
        }
        let delta = Pose::new(
            Vec3::new(step[0], step[1], step[2]),
            Quat::from_rotvec(RotVec::new(step[3], step[4], step[5])),
        );
        let candidate = delta.compose(&pose);
        match reprojection_cost(model, obs, k, indices, &candidate) {
            Some(c) if c <= cost => {
                pose = candidate;
                cost = c;
                lambda *= T::of(0.1);
                accepted.push(c);
            }
            _ => {
                // Behind-camera or worse candidates are rejected, never
                // fatal; more damping shortens the next step.
                lambda *= T::of(10.0);
            }
        }
    }
    Ok((pose, iterations, accepted))
}

/// Refine a pose against every usable correspondence (valid model point
/// with a visible observation), starting from `init`.
///
/// Runs until the update step norm drops below [`STEP_TOLERANCE`] or
/// [`MAX_REFINE_ITERATIONS`] is reached. Fails with `TooFewPoints` below 4
/// correspondences and `Diverged` when the initial reprojection error is
/// non-finite (points behind the camera).
pub fn pnp_refine<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    init: &Pose<T>,
) -> Result<PnPResult<T>, TrackError> {
    let indices = usable_indices(model, obs)?;
    if indices.len() < 4 {
        return Err(TrackError::TooFewPoints {
            found: indices.len(),
            need: 4,
        });
    }
    let (pose, iterations, accepted_costs) = refine_over(model, obs, k, &indices, init)?;
    let mut inlier_flags = vec![false; model.len()];
    for &i in &indices {
        inlier_flags[i] = true;
    }
    Ok(PnPResult {
        mean_reproj_px: mean_reproj_px(model, obs, k, &indices, &pose),
        pose,
        inlier_flags,
        iterations,
        accepted_costs,
    })
}

/// Robust PnP: RANSAC over 4-point minimal samples, then a final
/// refinement on the best consensus set.
///
/// Every round refines a minimal sample from the same initial pose
/// (`cfg.init` or [`centroid_init`]) and scores it by inliers within
/// `cfg.threshold_px`. Ties prefer the lower mean inlier error. Fails with
/// `NoConsensus` when the best set is smaller than `max(4,
/// cfg.min_inliers)`. Outlier-free input refines to the same minimum as
/// [`pnp_refine`].
pub fn pnp_ransac<T: Real>(
    model: &ModelPoints<T>,
    obs: &[Option<Vec2<T>>],
    k: &CameraIntrinsics<T>,
    cfg: &PnPConfig<T>,
) -> Result<PnPResult<T>, TrackError> {
    let indices = usable_indices(model, obs)?;
    if indices.len() < 4 {
        return Err(TrackError::TooFewPoints {
            found: indices.len(),
            need: 4,
        });
    }
    let init = match cfg.init {
        Some(p) => p,
        None => centroid_init(model, obs, k)?,
    };
    let need = cfg.min_inliers.max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, T, Vec<usize>)> = None;
    for _ in 0..cfg.iterations {
        let pick = rand::seq::index::sample(&mut rng, indices.len(), 4);
        let sample: Vec<usize> = pick.iter().map(|j| indices[j]).collect();
        let Ok((pose, _, _)) = refine_over(model, obs, k, &sample, &init) else {
            continue;
        };
        let mut inliers = Vec::new();
        let mut err_sum = T::zero();
        for &i in &indices {
            if let Some(e) = reproj_err_px(model, obs, k, i, &pose) {
                if e <= cfg.threshold_px {
                    inliers.push(i);
                    err_sum += e;
                }
            }
        }
        if inliers.len() < 4 {
            continue;
        }
        let mean_err = err_sum / T::of(inliers.len() as f64);
        let better = match &best {
            None => true,
            Some((count, err, _)) => {
                inliers.len() > *count || (inliers.len() == *count && mean_err < *err)
            }
        };
        if better {
            best = Some((inliers.len(), mean_err, inliers));
        }
    }
    let Some((count, _, inliers)) = best else {
        return Err(TrackError::NoConsensus { best: 0, need });
    };
    if count < need {
        return Err(TrackError::NoConsensus { best: count, need });
    }
    let (pose, iterations, accepted_costs) = refine_over(model, obs, k, &inliers, &init)?;
    let mut inlier_flags = vec![false; model.len()];
    for &i in &inliers {
        inlier_flags[i] = true;
    }
    Ok(PnPResult {
        mean_reproj_px: mean_reproj_px(model, obs, k, &inliers, &pose),
        pose,
        inlier_flags,
        iterations,
        accepted_costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation_angle_deg;

    fn test_camera() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(525.0, 525.0, 320.0, 240.0, 640, 480).unwrap()
    }

    /// A slightly non-planar grid of model points around z = 0.6 m.
    fn test_model(n_side: usize) -> ModelPoints<f64> {
        let mut points = Vec::new();
        for r in 0..n_side {
            for c in 0..n_side {
                let x = (c as f64 / (n_side - 1) as f64 - 0.5) * 0.2;
                let y = (r as f64 / (n_side - 1) as f64 - 0.5) * 0.2;
                let z = 0.6 + 0.15 * (x * 8.0).sin() * (y * 8.0).cos();
                points.push(Vec3::new(x, y, z));
            }
        }
        let valid = vec![true; points.len()];
        ModelPoints { points, valid }
    }

    fn project_all(
        model: &ModelPoints<f64>,
        k: &CameraIntrinsics<f64>,
        pose: &Pose<f64>,
    ) -> Vec<Option<Vec2<f64>>> {
        model
            .points
            .iter()
            .map(|p| k.project(pose.apply(*p)).ok())
            .collect()
    }

    fn ground_truth() -> Pose<f64> {
        Pose::new(
            Vec3::new(0.03, -0.02, 0.65),
            Quat::from_axis_angle(Vec3::new(0.2, 1.0, 0.3), 0.4),
        )
    }

    #[test]
    fn refine_recovers_exact_pose_from_clean_observations() {
        let k = test_camera();
        let model = test_model(5);
        let truth = ground_truth();
        // Model points already carry depth; pose the observations relative
        // to the model's own frame.
        let obs = project_all(&model, &k, &truth);
        let result = pnp_refine(&model, &obs, &k, &Pose::identity()).unwrap();
        assert!((result.pose.translation() - truth.translation()).norm() < 1e-9);
        assert!(result.pose.rotation_angle_to_deg(&truth) < 1e-7);
        assert!(result.mean_reproj_px < 1e-8);
        assert_eq!(result.inlier_flags, vec![true; model.len()]);
    }

    #[test]
    fn refine_costs_never_increase() {
        let k = test_camera();
        let model = test_model(5);
        let obs = project_all(&model, &k, &ground_truth());
        let result = pnp_refine(&model, &obs, &k, &Pose::identity()).unwrap();
        for w in result.accepted_costs.windows(2) {
            assert!(w[1] <= w[0], "accepted cost rose: {} -> {}", w[0], w[1]);
        }
        assert!(result.iterations <= MAX_REFINE_ITERATIONS);
    }

    #[test]
    fn refine_needs_four_points() {
        let k = test_camera();
        let mut model = test_model(3);
        for v in model.valid.iter_mut().skip(3) {
            *v = false;
        }
        let obs = project_all(&model, &k, &ground_truth());
        assert!(matches!(
            pnp_refine(&model, &obs, &k, &Pose::identity()),
            Err(TrackError::TooFewPoints { found: 3, need: 4 })
        ));
    }

    #[test]
    fn refine_rejects_mismatched_observation_length() {
        let k = test_camera();
        let model = test_model(3);
        let obs = vec![Some(Vec2::new(0.0, 0.0)); 2];
        assert!(matches!(
            pnp_refine(&model, &obs, &k, &Pose::identity()),
            Err(TrackError::ObsLengthMismatch { observations: 2, points: 9 })
        ));
    }

    #[test]
    fn refine_diverges_when_init_puts_points_behind_camera() {
        let k = test_camera();
        let model = test_model(3);
        let obs = project_all(&model, &k, &ground_truth());
        let behind = Pose::from_translation(Vec3::new(0.0, 0.0, -5.0));
        assert!(matches!(
            pnp_refine(&model, &obs, &k, &behind),
            Err(TrackError::Diverged { iterations: 0 })
        ));
    }

    #[test]
    fn centroid_init_lands_in_front_of_camera() {
        let k = test_camera();
        let model = test_model(4);
        let obs = project_all(&model, &k, &ground_truth());
        let init = centroid_init(&model, &obs, &k).unwrap();
        let mut mean = Vec3::zero();
        for p in &model.points {
            mean += init.apply(*p);
        }
        mean = mean / model.points.len() as f64;
        assert!(mean.z > 0.0);
        // The initial cost must be finite so refinement can start.
        let result = pnp_refine(&model, &obs, &k, &init).unwrap();
        assert!(result.mean_reproj_px < 1e-8);
    }

    #[test]
    fn ransac_matches_refine_on_clean_data() {
        let k = test_camera();
        let model = test_model(5);
        let obs = project_all(&model, &k, &ground_truth());
        let refined = pnp_refine(&model, &obs, &k, &Pose::identity()).unwrap();
        let cfg = PnPConfig {
            init: Some(Pose::identity()),
            ..PnPConfig::default()
        };
        let robust = pnp_ransac(&model, &obs, &k, &cfg).unwrap();
        let dt = (robust.pose.translation() - refined.pose.translation()).norm();
        assert!(dt < 1e-9, "translation gap {dt}");
        assert!(robust.pose.rotation_angle_to_deg(&refined.pose) < 1e-7);
        assert_eq!(robust.inlier_flags, vec![true; model.len()]);
    }

    #[test]
    fn ransac_shrugs_off_a_third_of_outliers() {
        let k = test_camera();
        let model = test_model(6);
        let truth = ground_truth();
        let mut obs = project_all(&model, &k, &truth);
        let n = obs.len();
        // Corrupt every third observation with a gross offset.
        let mut corrupted = 0;
        for i in (0..n).step_by(3) {
            if let Some(u) = obs[i] {
                obs[i] = Some(Vec2::new(u.x + 80.0 + i as f64, u.y - 60.0));
                corrupted += 1;
            }
        }
        assert!(corrupted * 10 >= n * 3);
        let cfg = PnPConfig::default();
        let result = pnp_ransac(&model, &obs, &k, &cfg).unwrap();
        assert!((result.pose.translation() - truth.translation()).norm() < 1e-6);
        assert!(result.pose.rotation_angle_to_deg(&truth) < 1e-4);
        // Outliers must be flagged out.
        for i in (0..n).step_by(3) {
            assert!(!result.inlier_flags[i], "outlier {i} kept as inlier");
        }
    }

    #[test]
    fn ransac_reports_no_consensus_on_garbage() {
        let k = test_camera();
        let model = test_model(4);
        // Observations unrelated to any rigid motion of the model.
        let obs: Vec<Option<Vec2<f64>>> = (0..model.len())
            .map(|i| {
                Some(Vec2::new(
                    ((i * 2654435761) % 640) as f64,
                    ((i * 40503) % 480) as f64,
                ))
            })
            .collect();
        let cfg = PnPConfig {
            min_inliers: 12,
            ..PnPConfig::default()
        };
        match pnp_ransac(&model, &obs, &k, &cfg) {
            Err(TrackError::NoConsensus { best, need: 12 }) => assert!(best < 12),
            other => panic!("expected NoConsensus, got {other:?}"),
        }
    }

    #[test]
    fn ransac_is_deterministic_per_seed() {
        let k = test_camera();
        let model = test_model(5);
        let mut obs = project_all(&model, &k, &ground_truth());
        obs[7] = Some(Vec2::new(10.0, 10.0));
        let cfg = PnPConfig::default();
        let a = pnp_ransac(&model, &obs, &k, &cfg).unwrap();
        let b = pnp_ransac(&model, &obs, &k, &cfg).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.inlier_flags, b.inlier_flags);
        let other = pnp_ransac(
            &model,
            &obs,
            &k,
            &PnPConfig {
                seed: 99,
                ..PnPConfig::default()
            },
        )
        .unwrap();
        // Same consensus regardless of seed on this easy problem.
        assert_eq!(a.inlier_flags, other.inlier_flags);
    }

    #[test]
    fn point_jacobian_matches_finite_differences() {
        let k = test_camera();
        let pose = ground_truth();
        let point = Vec3::new(0.07, -0.04, 0.61);
        let pc = pose.apply(point);
        let (ju, jv) = point_jacobian(&k, pc);
        let h = 1e-7;
        for axis in 0..6 {
            let perturbed = |sign: f64| {
                let mut step = [0.0; 6];
                step[axis] = sign * h;
                let delta = Pose::new(
                    Vec3::new(step[0], step[1], step[2]),
                    Quat::from_rotvec(RotVec::new(step[3], step[4], step[5])),
                );
                k.project(delta.compose(&pose).apply(point)).unwrap()
            };
            let plus = perturbed(1.0);
            let minus = perturbed(-1.0);
            let num_u = (plus.x - minus.x) / (2.0 * h);
            let num_v = (plus.y - minus.y) / (2.0 * h);
            assert!(
                (num_u - ju[axis]).abs() < 1e-3 * (1.0 + ju[axis].abs()),
                "du axis {axis}: numeric {num_u}, analytic {}",
                ju[axis]
            );
            assert!(
                (num_v - jv[axis]).abs() < 1e-3 * (1.0 + jv[axis].abs()),
                "dv axis {axis}: numeric {num_v}, analytic {}",
                jv[axis]
            );
        }
    }

    #[test]
    fn solve6_handles_permuted_diagonal_and_rejects_singular() {
        let mut a = [[0.0f64; 6]; 6];
        // Permutation matrix scaled by 2: needs pivoting.
        for i in 0..6 {
            a[i][(i + 1) % 6] = 2.0;
        }
        let b = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let x = solve6(a, b).unwrap();
        for i in 0..6 {
            assert!((x[(i + 1) % 6] - b[i] / 2.0).abs() < 1e-12);
        }
        let singular = [[0.0f64; 6]; 6];
        assert!(solve6(singular, b).is_none());
    }

    #[test]
    fn refine_converges_from_sixty_degree_rotation_offset() {
        let k = test_camera();
        let model = test_model(5);
        let truth = Pose::new(
            Vec3::new(0.05, 0.0, 0.7),
            Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.2), 60f64.to_radians()),
        );
        let obs = project_all(&model, &k, &truth);
        let init = centroid_init(&model, &obs, &k).unwrap();
        assert!(rotation_angle_deg(init.rotation(), truth.rotation()) > 59.0);
        let result = pnp_refine(&model, &obs, &k, &init).unwrap();
        assert!((result.pose.translation() - truth.translation()).norm() < 1e-6);
        assert!(result.pose.rotation_angle_to_deg(&truth) < 1e-4);
    }
}
