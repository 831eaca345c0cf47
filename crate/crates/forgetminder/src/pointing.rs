//! Simulated pan/tilt pointing.
//!
//! One fixed observer camera and one pan/tilt camera both watch a planar
//! scene (the wall z = 0). A box detected in the observer view is mapped
//! into the pan/tilt view through the plane-induced homography, and a
//! proportional controller turns the head until its crosshair sits on the
//! box. The homography used for control can be perturbed to mimic an
//! estimated rather than exact calibration.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::path::Path;

use crate::error::{write_string, Error, Result};
use crate::geom::Rect;

pub const PAN_LIMIT: f64 = FRAC_PI_2;
pub const TILT_LIMIT: f64 = FRAC_PI_3;

/// 3x3 projective map between image planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn identity() -> Homography {
        Homography(Matrix3::identity())
    }

    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let v = self.0 * Vector3::new(x, y, 1.0);
        if v.z.abs() < 1e-9 {
            return Err(Error::runtime("point maps to infinity"));
        }
        Ok((v.x / v.z, v.y / v.z))
    }

    /// Axis-aligned bounds of the mapped rectangle corners. Fails when a
    /// corner sits on or behind the camera plane (w near zero or corners on
    /// both sides).
    pub fn map_rect(&self, r: &Rect) -> Result<Rect> {
        let corners = [
            (r.x, r.y),
            (r.x + r.w, r.y),
            (r.x, r.y + r.h),
            (r.x + r.w, r.y + r.h),
        ];
        let mut sign = 0.0f64;
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 4];
        for (i, &(cx, cy)) in corners.iter().enumerate() {
            let v = self.0 * Vector3::new(cx, cy, 1.0);
            if v.z.abs() < 1e-9 {
                return Err(Error::runtime("rectangle corner maps to infinity"));
            }
            if i == 0 {
                sign = v.z.signum();
            } else if v.z.signum() != sign {
                return Err(Error::runtime("rectangle crosses the camera plane"));
            }
            xs[i] = v.x / v.z;
            ys[i] = v.y / v.z;
        }
        let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
        let (y0, y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
        Ok(Rect {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    pub fn invert(&self) -> Result<Homography> {
        self.0
            .try_inverse()
            .map(Homography)
            .ok_or_else(|| Error::invalid("singular homography"))
    }

    pub fn compose(&self, other: &Homography) -> Homography {
        Homography(self.0 * other.0)
    }
}

/// Pinhole camera with square pixels. `rotation` is camera-to-world: its
/// columns are the camera's right, down and forward axes in world
/// coordinates (image y runs downward).
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl PinholeCamera {
    /// Camera at `eye` looking toward `target`, image y aligned with world y.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], focal: f64, cx: f64, cy: f64) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = Vector3::from(target) - eye;
        if forward.norm() < 1e-9 {
            return Err(Error::invalid("camera eye and target coincide"));
        }
        let z = forward.normalize();
        let y_hint = Vector3::new(0.0, 1.0, 0.0);
        let x = y_hint.cross(&z);
        if x.norm() < 1e-9 {
            return Err(Error::invalid("viewing direction parallel to image y"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        Ok(PinholeCamera {
            focal,
            cx,
            cy,
            position: eye,
            rotation: Matrix3::from_columns(&[x, y, z]),
        })
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.focal, 0.0, self.cx, 0.0, self.focal, self.cy, 0.0, 0.0, 1.0)
    }

    /// Projects a world point; errors when it is not in front of the camera.
    pub fn project(&self, world: [f64; 3]) -> Result<(f64, f64)> {
        let pc = self.rotation.transpose() * (Vector3::from(world) - self.position);
        if pc.z < 1e-9 {
            return Err(Error::runtime("point behind the camera"));
        }
        Ok((
            self.focal * pc.x / pc.z + self.cx,
            self.focal * pc.y / pc.z + self.cy,
        ))
    }

    /// Homography from wall coordinates (X, Y on z = 0) to pixels.
    pub fn plane_homography(&self) -> Homography {
        let rt = self.rotation.transpose();
        let t = -(rt * self.position);
        let m = Matrix3::from_columns(&[rt.column(0).clone_owned(), rt.column(1).clone_owned(), t]);
        Homography(self.intrinsics() * m)
    }
}

/// A camera on a pan/tilt head. Positive pan turns the view toward image
/// right, positive tilt toward image down; both are clamped to fixed limits.
#[derive(Debug, Clone, PartialEq)]
pub struct PanTiltCamera {
    pub base: PinholeCamera,
    pub pan: f64,
    pub tilt: f64,
}

impl PanTiltCamera {
    pub fn camera(&self) -> PinholeCamera {
        let (sp, cp) = self.pan.sin_cos();
        let (st, ct) = self.tilt.sin_cos();
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        // Rotation about x by -tilt, so that positive tilt pitches the view
        // toward +y (downward in the image).
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ct, st, 0.0, -st, ct);
        PinholeCamera {
            rotation: self.base.rotation * ry * rx,
            ..self.base.clone()
        }
    }
}

/// One proportional controller update from a pixel offset, clamped to the
/// head limits.
pub fn controller_step(
    pan: f64,
    tilt: f64,
    offset_x: f64,
    offset_y: f64,
    focal: f64,
    gain: f64,
) -> (f64, f64) {
    let new_pan = (pan + gain * (offset_x / focal).atan()).clamp(-PAN_LIMIT, PAN_LIMIT);
    let new_tilt = (tilt + gain * (offset_y / focal).atan()).clamp(-TILT_LIMIT, TILT_LIMIT);
    (new_pan, new_tilt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOptions {
    pub gain: f64,
    /// Standard deviation of the perturbation applied to the normalized
    /// homography entries each iteration; 0 uses the exact homography.
    pub noise_sd: f64,
    pub max_iters: usize,
    /// Stop when the crosshair is inside the box and within this fraction of
    /// the box's short side from its center.
    pub stop_radius_frac: f64,
    pub view_width: f64,
    pub view_height: f64,
}

impl Default for PointOptions {
    fn default() -> Self {
        PointOptions {
            gain: 0.5,
            noise_sd: 0.0,
            max_iters: 50,
            stop_radius_frac: 0.25,
            view_width: 640.0,
            view_height: 480.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointingScene {
    pub observer: PinholeCamera,
    pub pt: PanTiltCamera,
    /// Target box in observer pixels.
    pub target_obs: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub iter: usize,
    pub pan: f64,
    pub tilt: f64,
    pub bbox: Rect,
    pub offset_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointingTrace {
    pub steps: Vec<TraceStep>,
    pub converged: bool,
    pub iterations: usize,
    pub failure: Option<String>,
}

/// Perturbs the observer-to-head homography in normalized (intrinsics-free)
/// coordinates: scale to unit lower-right entry, add Gaussian noise to all
/// nine entries, renormalize, and convert back to pixel coordinates.
fn estimate_homography(
    gt: &Homography,
    obs: &PinholeCamera,
    pt: &PinholeCamera,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Homography> {
    if noise_sd == 0.0 {
        return Ok(gt.clone());
    }
    let k_pt_inv = pt
        .intrinsics()
        .try_inverse()
        .ok_or_else(|| Error::runtime("singular intrinsics"))?;
    let k_obs = obs.intrinsics();
    let mut hn = k_pt_inv * gt.0 * k_obs;
    let s = hn[(2, 2)];
    if s.abs() < 1e-12 {
        return Err(Error::runtime("degenerate homography normalization"));
    }
    hn /= s;
    for i in 0..3 {
        for j in 0..3 {
            hn[(i, j)] += noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let s = hn[(2, 2)];
    if s.abs() < 1e-9 {
        return Err(Error::runtime("noise destroyed the homography"));
    }
    hn /= s;
    let k_obs_inv = k_obs
        .try_inverse()
        .ok_or_else(|| Error::runtime("singular intrinsics"))?;
    Ok(Homography(pt.intrinsics() * hn * k_obs_inv))
}

/// Runs the pointing loop. Each iteration recomputes the true homography
/// from the current head pose, perturbs it into the estimate, maps the
/// target box, checks the stop condition, and otherwise steps the
/// controller. Pose or mapping degeneracies are recorded as failures, not
/// errors.
pub fn point_at(scene: &PointingScene, opts: &PointOptions, rng: &mut ChaCha8Rng) -> PointingTrace {
    let mut head = scene.pt.clone();
    let anchor = (head.base.cx, head.base.cy);
    let obs_plane = scene.observer.plane_homography();
    let fail = |reason: &str| PointingTrace {
        steps: Vec::new(),
        converged: false,
        iterations: 0,
        failure: Some(reason.into()),
    };
    let obs_inv = match obs_plane.invert() {
        Ok(h) => h,
        Err(_) => return fail("observer-homography-singular"),
    };
    // Where the target actually sits on the wall; used only for the
    // ground-truth visibility check (a box behind the head still maps to a
    // coherent mirror image under the homography, so depth must be checked
    // through the camera, not the projective map).
    let wall = match obs_inv.map_rect(&scene.target_obs) {
        Ok(b) => b,
        Err(_) => return fail("observer-homography-singular"),
    };
    let wall_corners = [
        [wall.x, wall.y, 0.0],
        [wall.x + wall.w, wall.y, 0.0],
        [wall.x, wall.y + wall.h, 0.0],
        [wall.x + wall.w, wall.y + wall.h, 0.0],
    ];
    let mut steps = Vec::new();
    let mut failure = None;
    let mut converged = false;
    let mut iterations = opts.max_iters;
    for iter in 0..opts.max_iters {
        let cam = head.camera();
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut behind = false;
        for c in &wall_corners {
            match cam.project(*c) {
                Ok((x, y)) => {
                    lo = (lo.0.min(x), lo.1.min(y));
                    hi = (hi.0.max(x), hi.1.max(y));
                }
                Err(_) => {
                    behind = true;
                    break;
                }
            }
        }
        if behind {
            failure = Some("target-behind-head".into());
            break;
        }
        let true_box = Rect {
            x: lo.0,
            y: lo.1,
            w: hi.0 - lo.0,
            h: hi.1 - lo.1,
        };
        let view = Rect {
            x: 0.0,
            y: 0.0,
            w: opts.view_width,
            h: opts.view_height,
        };
        if true_box.intersection_area(&view) <= 0.0 {
            failure = Some("target-left-view".into());
            break;
        }
        let gt = cam.plane_homography().compose(&obs_inv);
        let est = match estimate_homography(&gt, &scene.observer, &cam, opts.noise_sd, rng) {
            Ok(h) => h,
            Err(_) => {
                failure = Some("degenerate-estimate".into());
                break;
            }
        };
        let bbox = match est.map_rect(&scene.target_obs) {
            Ok(b) => b,
            Err(_) => {
                failure = Some("degenerate-estimate".into());
                break;
            }
        };
        let center = bbox.center();
        let (ox, oy) = (center.0 - anchor.0, center.1 - anchor.1);
        let offset_norm = (ox * ox + oy * oy).sqrt();
        steps.push(TraceStep {
            iter,
            pan: head.pan,
            tilt: head.tilt,
            bbox,
            offset_norm,
        });
        let inside = bbox.contains_point(anchor.0, anchor.1);
        if inside && offset_norm <= opts.stop_radius_frac * bbox.w.min(bbox.h) {
            converged = true;
            iterations = iter;
            break;
        }
        let (pan, tilt) =
            controller_step(head.pan, head.tilt, ox, oy, head.base.focal, opts.gain);
        head.pan = pan;
        head.tilt = tilt;
    }
    PointingTrace {
        steps,
        converged,
        iterations,
        failure,
    }
}

/// Draws a random scene: observer and head in front of the wall with mild
/// pose jitter, and a target rectangle on the wall that is guaranteed to
/// fall inside the observer view.
pub fn random_scene(rng: &mut ChaCha8Rng) -> Result<PointingScene> {
    let (focal, cx, cy) = (500.0, 320.0, 240.0);
    let jitter = |rng: &mut ChaCha8Rng, s: f64| (rng.gen::<f64>() * 2.0 - 1.0) * s;
    let obs_eye = [jitter(rng, 1.0), jitter(rng, 0.5), -5.0 + jitter(rng, 0.5)];
    let obs_aim = [jitter(rng, 0.3), jitter(rng, 0.3), 0.0];
    let observer = PinholeCamera::look_at(obs_eye, obs_aim, focal, cx, cy)?;
    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let pt_eye = [
        side * (1.5 + jitter(rng, 0.5)),
        jitter(rng, 0.4),
        -4.5 + jitter(rng, 0.5),
    ];
    let pt_base = PinholeCamera::look_at(pt_eye, [0.0, 0.0, 0.0], focal, cx, cy)?;
    let mut w = 0.3 + rng.gen::<f64>() * 0.5;
    let mut h = 0.3 + rng.gen::<f64>() * 0.5;
    let mut cx_w = jitter(rng, 1.2);
    let mut cy_w = jitter(rng, 0.8);
    // Shrink toward the wall center until the box projects fully inside the
    // observer view with a margin; deterministic, no extra randomness.
    let obs_h = observer.plane_homography();
    for _ in 0..12 {
        let rect = Rect {
            x: cx_w - w / 2.0,
            y: cy_w - h / 2.0,
            w,
            h,
        };
        if let Ok(mapped) = obs_h.map_rect(&rect) {
            let inside = mapped.x >= 20.0
                && mapped.y >= 20.0
                && mapped.x + mapped.w <= 620.0
                && mapped.y + mapped.h <= 460.0;
            if inside {
                return Ok(PointingScene {
                    observer,
                    pt: PanTiltCamera {
                        base: pt_base,
                        pan: 0.0,
                        tilt: 0.0,
                    },
                    target_obs: mapped,
                });
            }
        }
        cx_w *= 0.6;
        cy_w *= 0.6;
        w = (w * 0.8).max(0.2);
        h = (h * 0.8).max(0.2);
    }
    Err(Error::runtime("could not place a visible target"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneResult {
    pub scene: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_offset: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub scenes: usize,
    pub converged: usize,
    pub rate: f64,
    pub results: Vec<SceneResult>,
}

/// Runs the pointing loop over many random scenes with one seeded stream.
pub fn monte_carlo(n_scenes: usize, opts: &PointOptions, seed: u64) -> Result<McSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(n_scenes);
    let mut converged = 0;
    for scene_idx in 0..n_scenes {
        let scene = random_scene(&mut rng)?;
        let trace = point_at(&scene, opts, &mut rng);
        if trace.converged {
            converged += 1;
        }
        results.push(SceneResult {
            scene: scene_idx,
            converged: trace.converged,
            iterations: trace.iterations,
            final_offset: trace.steps.last().map_or(f64::NAN, |s| s.offset_norm),
            failure: trace.failure,
        });
    }
    Ok(McSummary {
        scenes: n_scenes,
        converged,
        rate: if n_scenes > 0 {
            converged as f64 / n_scenes as f64
        } else {
            0.0
        },
        results,
    })
}

/// Writes per-scene outcomes as CSV.
pub fn write_mc_csv(summary: &McSummary, path: &Path) -> Result<()> {
    let mut out = String::from("scene,converged,iterations,final_offset,failure\n");
    for r in &summary.results {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scene,
            r.converged,
            r.iterations,
            r.final_offset,
            r.failure.as_deref().unwrap_or("")
        ));
    }
    write_string(path, &out)
}
