//! Deterministic 1D ray-cast cameras and observation assembly.
//!
//! Each camera produces a row of pixels; a pixel is `[color_id / ID_MAX,
//! min(1, 0.2 / distance)]`, background `[0, 0]`. The scene is described to
//! the ray caster in arm-base-relative coordinates, with every endpoint
//! derived as `(scene anchor - base) + local offset`. Because the shift
//! cancels in the anchor subtraction before any other arithmetic, wrist
//! cameras — which translate with the end-effector — render bit-identically
//! under any rigid translation of scene plus base. The overhead camera is
//! bolted to the room, so its image does change; that asymmetry is the
//! whole point.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;

use crate::sim::{WorldState, WALL_THICKNESS};

/// Pixels per camera.
pub const N_PIXELS: usize = 64;
/// Inverse-depth scale, meters: a hit at this distance maps to 1.0, and the
/// channel saturates for anything closer. 0.05 keeps the whole manipulation
/// band (gripper 5-30 cm from the scene) in the responsive part of [0, 1].
pub const INV_DEPTH_SCALE: f64 = 0.05;
/// Wrist cameras sit this far from the end-effector along the gripper axis.
pub const WRIST_CAM_OFFSET: f64 = 0.04;
/// The top wrist camera is tilted this much off the gripper axis.
pub const WRIST_TOP_TILT_DEG: f64 = 35.0;
/// Overhead camera: fixed room position, looking straight down.
pub const OVERHEAD_POS: (f64, f64) = (0.6, 1.6);
pub const OVERHEAD_FOV_DEG: f64 = 90.0;
/// Wrist field-of-view variants.
pub const NORMAL_FOV_DEG: f64 = 87.0;
pub const WIDE_FOV_DEG: f64 = 120.0;
/// Table surface half-span around the holder.
pub const TABLE_HALF_SPAN: f64 = 0.55;

/// Segment color ids. 0 is background; the ordering puts the task-critical
/// objects at the extremes of the normalized channel (block at 1.0, holder
/// floor just below), which keeps them cheap to separate from clutter.
pub const COLOR_TABLE: u8 = 1;
pub const COLOR_ARM: u8 = 2;
pub const COLOR_GRIPPER: u8 = 3;
pub const COLOR_WALL: u8 = 4;
pub const COLOR_FLOOR: u8 = 5;
pub const COLOR_BLOCK: u8 = 6;
pub const ID_MAX: u8 = 6;

/// Gripper fingertip pads: short segments perpendicular to the gripper
/// axis, sitting just behind the grasp point. The top wrist camera sees
/// them face-on, so their lateral separation makes the open/closed state
/// plainly visible in the image.
const PAD_BACK: f64 = 0.008;
const PAD_HALF_WIDTH: f64 = 0.004;
const PAD_GAP_OPEN: f64 = 0.018;
const PAD_GAP_CLOSED: f64 = 0.006;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub n_pixels: usize,
    pub fov_deg: f64,
}

impl CameraIntrinsics {
    pub fn new(n_pixels: usize, fov_deg: f64) -> Self {
        assert!(n_pixels >= 8, "need at least 8 pixels");
        assert!(fov_deg > 0.0 && fov_deg < 180.0, "fov out of range");
        CameraIntrinsics { n_pixels, fov_deg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MountKind {
    /// Fixed in the room at (x, z), optical axis at `view_angle`.
    OverheadFixed { x: f64, z: f64, view_angle: f64 },
    /// On the wrist, offset back along the gripper axis, tilted off it.
    WristTop,
    /// On the wrist, offset past the gripper tip, looking along the axis.
    WristBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMount {
    pub kind: MountKind,
    pub intrinsics: CameraIntrinsics,
}

impl CameraMount {
    pub fn overhead() -> Self {
        CameraMount {
            kind: MountKind::OverheadFixed {
                x: OVERHEAD_POS.0,
                z: OVERHEAD_POS.1,
                view_angle: -FRAC_PI_2,
            },
            intrinsics: CameraIntrinsics::new(N_PIXELS, OVERHEAD_FOV_DEG),
        }
    }

    pub fn wrist_top(fov_deg: f64) -> Self {
        CameraMount {
            kind: MountKind::WristTop,
            intrinsics: CameraIntrinsics::new(N_PIXELS, fov_deg),
        }
    }

    pub fn wrist_bottom(fov_deg: f64) -> Self {
        CameraMount {
            kind: MountKind::WristBottom,
            intrinsics: CameraIntrinsics::new(N_PIXELS, fov_deg),
        }
    }
}

/// Named camera sets, ordered from narrowest to fullest task coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraPreset {
    Overhead,
    OverheadWristNormal,
    OverheadDualNormal,
    OverheadWristWide,
    OverheadDualWide,
    DualWideOnly,
}

impl CameraPreset {
    pub const ALL: [CameraPreset; 6] = [
        CameraPreset::Overhead,
        CameraPreset::OverheadWristNormal,
        CameraPreset::OverheadDualNormal,
        CameraPreset::OverheadWristWide,
        CameraPreset::OverheadDualWide,
        CameraPreset::DualWideOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CameraPreset::Overhead => "overhead",
            CameraPreset::OverheadWristNormal => "overhead+wrist-normal",
            CameraPreset::OverheadDualNormal => "overhead+dual-normal",
            CameraPreset::OverheadWristWide => "overhead+wrist-wide",
            CameraPreset::OverheadDualWide => "overhead+dual-wide",
            CameraPreset::DualWideOnly => "dual-wide",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }

    pub fn mounts(&self) -> Vec<CameraMount> {
        match self {
            CameraPreset::Overhead => vec![CameraMount::overhead()],
            CameraPreset::OverheadWristNormal => {
                vec![CameraMount::overhead(), CameraMount::wrist_top(NORMAL_FOV_DEG)]
            }
            CameraPreset::OverheadDualNormal => vec![
                CameraMount::overhead(),
                CameraMount::wrist_top(NORMAL_FOV_DEG),
                CameraMount::wrist_bottom(NORMAL_FOV_DEG),
            ],
            CameraPreset::OverheadWristWide => {
                vec![CameraMount::overhead(), CameraMount::wrist_top(WIDE_FOV_DEG)]
            }
            CameraPreset::OverheadDualWide => vec![
                CameraMount::overhead(),
                CameraMount::wrist_top(WIDE_FOV_DEG),
                CameraMount::wrist_bottom(WIDE_FOV_DEG),
            ],
            CameraPreset::DualWideOnly => vec![
                CameraMount::wrist_top(WIDE_FOV_DEG),
                CameraMount::wrist_bottom(WIDE_FOV_DEG),
            ],
        }
    }
}

/// What proprioceptive signal, if any, rides along with the pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateMode {
    None,
    EEFPose,
    Joints,
}

impl StateMode {
    pub fn label(&self) -> &'static str {
        match self {
            StateMode::None => "none",
            StateMode::EEFPose => "eef-pose",
            StateMode::Joints => "joints",
        }
    }

    pub fn state_len(&self, dof: usize) -> usize {
        match self {
            StateMode::None => 0,
            StateMode::EEFPose => 3,
            StateMode::Joints => dof,
        }
    }
}

/// Cameras plus the state channel configuration.
///
/// `state_noise_z` is a training-time augmentation half-range on the state
/// height; `state_hack_dz` is an evaluation-time additive shift on the same
/// component. Both only act on the `EEFPose` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub cameras: Vec<CameraMount>,
    pub state_mode: StateMode,
    pub state_noise_z: f64,
    pub state_hack_dz: f64,
}

impl ObservationConfig {
    pub fn new(preset: CameraPreset, state_mode: StateMode) -> Self {
        ObservationConfig {
            cameras: preset.mounts(),
            state_mode,
            state_noise_z: 0.0,
            state_hack_dz: 0.0,
        }
    }

    pub fn with_state_noise(mut self, noise_z: f64) -> Self {
        assert!(noise_z >= 0.0);
        self.state_noise_z = noise_z;
        self
    }

    pub fn with_state_hack(mut self, dz: f64) -> Self {
        self.state_hack_dz = dz;
        self
    }

    pub fn pixel_len(&self) -> usize {
        self.cameras.iter().map(|c| 2 * c.intrinsics.n_pixels).sum()
    }

    pub fn obs_len(&self, dof: usize) -> usize {
        self.pixel_len() + self.state_mode.state_len(dof)
    }

    /// Same sensors: identical cameras and state kind. Noise and hack are
    /// runtime toggles, not part of the sensor identity.
    pub fn compatible_with(&self, other: &ObservationConfig) -> bool {
        self.cameras == other.cameras && self.state_mode == other.state_mode
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pixels: Vec<f64>,
    pub state: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.pixels.len() + self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat input vector: pixels first, then state.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.pixels);
        v.extend_from_slice(&self.state);
        v
    }
}

/// A colored segment in base-relative coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub x1: f64,
    pub z1: f64,
    pub x2: f64,
    pub z2: f64,
    pub color: u8,
}

/// Build the renderable scene, base-relative. Every endpoint is computed as
/// `(anchor - base) + constant` so rigid scene+base shifts cancel exactly.
pub fn scene_segments(world: &WorldState) -> Vec<Segment> {
    let scene = &world.scene;
    let arm = &scene.arm;
    let mut segs = Vec::with_capacity(24);

    let tz = scene.table_z - arm.base_z;
    let hx = scene.holder_x - arm.base_x;
    let half_w = scene.holder_w / 2.0;
    let wall_h = scene.holder_wall_h;

    // table top, split around the holder footprint
    segs.push(Segment {
        x1: hx - TABLE_HALF_SPAN,
        z1: tz,
        x2: hx - half_w - WALL_THICKNESS,
        z2: tz,
        color: COLOR_TABLE,
    });
    segs.push(Segment {
        x1: hx + half_w + WALL_THICKNESS,
        z1: tz,
        x2: hx + TABLE_HALF_SPAN,
        z2: tz,
        color: COLOR_TABLE,
    });
    // holder floor
    segs.push(Segment { x1: hx - half_w, z1: tz, x2: hx + half_w, z2: tz, color: COLOR_FLOOR });
    // holder walls: inner face, outer face, top cap
    for side in [-1.0, 1.0] {
        let inner = hx + side * half_w;
        let outer = hx + side * (half_w + WALL_THICKNESS);
        segs.push(Segment { x1: inner, z1: tz, x2: inner, z2: tz + wall_h, color: COLOR_WALL });
        segs.push(Segment { x1: outer, z1: tz, x2: outer, z2: tz + wall_h, color: COLOR_WALL });
        segs.push(Segment {
            x1: inner,
            z1: tz + wall_h,
            x2: outer,
            z2: tz + wall_h,
            color: COLOR_WALL,
        });
    }

    // block rectangle
    let bx = world.block_pose.0 - arm.base_x;
    let bz = world.block_pose.1 - arm.base_z;
    let (w2, h2) = (scene.block_w / 2.0, scene.block_h / 2.0);
    let corners = [
        (bx - w2, bz - h2),
        (bx + w2, bz - h2),
        (bx + w2, bz + h2),
        (bx - w2, bz + h2),
    ];
    for i in 0..4 {
        let (x1, z1) = corners[i];
        let (x2, z2) = corners[(i + 1) % 4];
        segs.push(Segment { x1, z1, x2, z2, color: COLOR_BLOCK });
    }

    // arm links from the chain accumulation (base-relative by construction)
    let mut cum = 0.0;
    let (mut px, mut pz) = (0.0, 0.0);
    for (l, a) in arm.link_lengths.iter().zip(&world.joints.angles) {
        cum += a;
        let nx = px + l * cum.cos();
        let nz = pz + l * cum.sin();
        segs.push(Segment { x1: px, z1: pz, x2: nx, z2: nz, color: COLOR_ARM });
        px = nx;
        pz = nz;
    }

    // fingertip pads near the tip; their lateral gap encodes open/closed
    let theta = cum;
    let (hx_dir, hz_dir) = (theta.cos(), theta.sin());
    let (px_dir, pz_dir) = (-theta.sin(), theta.cos());
    let gap = if world.gripper_closed { PAD_GAP_CLOSED } else { PAD_GAP_OPEN };
    let (cx, cz) = (px - PAD_BACK * hx_dir, pz - PAD_BACK * hz_dir);
    for side in [-1.0, 1.0] {
        let (ox, oz) = (side * gap * px_dir, side * gap * pz_dir);
        segs.push(Segment {
            x1: cx + ox - PAD_HALF_WIDTH * px_dir,
            z1: cz + oz - PAD_HALF_WIDTH * pz_dir,
            x2: cx + ox + PAD_HALF_WIDTH * px_dir,
            z2: cz + oz + PAD_HALF_WIDTH * pz_dir,
            color: COLOR_GRIPPER,
        });
    }

    segs
}

/// Camera origin (base-relative) and optical-axis angle for a mount.
fn camera_pose(world: &WorldState, mount: &CameraMount) -> (f64, f64, f64) {
    match mount.kind {
        MountKind::OverheadFixed { x, z, view_angle } => {
            (x - world.scene.arm.base_x, z - world.scene.arm.base_z, view_angle)
        }
        MountKind::WristTop => {
            let (ex, ez, theta) = world.scene.arm.chain_offset(&world.joints);
            let tilt = WRIST_TOP_TILT_DEG * PI / 180.0;
            (
                ex - WRIST_CAM_OFFSET * theta.cos(),
                ez - WRIST_CAM_OFFSET * theta.sin(),
                theta + tilt,
            )
        }
        MountKind::WristBottom => {
            let (ex, ez, theta) = world.scene.arm.chain_offset(&world.joints);
            (
                ex + WRIST_CAM_OFFSET * theta.cos(),
                ez + WRIST_CAM_OFFSET * theta.sin(),
                theta,
            )
        }
    }
}

/// Nearest intersection of the ray from `(ox, oz)` along `(dx, dz)` (unit)
/// with a segment. Returns the distance.
fn ray_segment(ox: f64, oz: f64, dx: f64, dz: f64, seg: &Segment) -> Option<f64> {
    let ex = seg.x2 - seg.x1;
    let ez = seg.z2 - seg.z1;
    let det = ex * dz - ez * dx;
    if det.abs() < 1e-15 {
        return None;
    }
    let wx = seg.x1 - ox;
    let wz = seg.z1 - oz;
    let t = (ex * wz - ez * wx) / det;
    let s = (dx * wz - dz * wx) / det;
    if t > 1e-9 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Render one camera: `2 * n_pixels` values, `[color, inv_depth]` per pixel.
pub fn render(world: &WorldState, mount: &CameraMount) -> Vec<f64> {
    let segs = scene_segments(world);
    render_segments(&segs, world, mount)
}

fn render_segments(segs: &[Segment], world: &WorldState, mount: &CameraMount) -> Vec<f64> {
    let (ox, oz, view) = camera_pose(world, mount);
    let n = mount.intrinsics.n_pixels;
    let fov = mount.intrinsics.fov_deg * PI / 180.0;
    let mut img = vec![0.0; 2 * n];
    for i in 0..n {
        let alpha = view + fov * ((i as f64 + 0.5) / n as f64 - 0.5);
        let (dx, dz) = (alpha.cos(), alpha.sin());
        let mut best: Option<(f64, u8)> = None;
        for seg in segs {
            if let Some(t) = ray_segment(ox, oz, dx, dz, seg) {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, seg.color));
                }
            }
        }
        if let Some((t, color)) = best {
            img[2 * i] = color as f64 / ID_MAX as f64;
            img[2 * i + 1] = (INV_DEPTH_SCALE / t).min(1.0);
        }
    }
    img
}

/// Assemble the full observation: camera renders in declared order, then the
/// state vector. Training noise draws from `rng`; the evaluation-time state
/// hack is applied whenever `state_hack_dz` is set.
pub fn observe(
    world: &WorldState,
    cfg: &ObservationConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Observation {
    let mut pixels = Vec::with_capacity(cfg.pixel_len());
    for cam in &cfg.cameras {
        pixels.extend(render(world, cam));
    }
    let mut state = match cfg.state_mode {
        StateMode::None => Vec::new(),
        StateMode::EEFPose => world.eef().as_array().to_vec(),
        StateMode::Joints => world.joints.angles.clone(),
    };
    if cfg.state_mode == StateMode::EEFPose {
        if cfg.state_noise_z > 0.0 {
            if let Some(rng) = rng {
                state[1] += rng.gen_range(-cfg.state_noise_z..=cfg.state_noise_z);
            }
        }
        state[1] += cfg.state_hack_dz;
    }
    Observation { pixels, state }
}

/// Dump one camera image as CSV rows `index,color,inv_depth`.
pub fn write_debug_csv(path: &Path, image: &[f64]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "index,color,inv_depth")?;
    for i in 0..image.len() / 2 {
        writeln!(f, "{},{},{}", i, image[2 * i], image[2 * i + 1])?;
    }
    Ok(())
}

/// Dump one channel of a camera image as a 1-row grayscale PGM.
pub fn write_debug_pgm(path: &Path, image: &[f64], channel: usize) -> std::io::Result<()> {
    assert!(channel < 2);
    let n = image.len() / 2;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "P2\n{n} 1\n255")?;
    let row: Vec<String> = (0..n)
        .map(|i| format!("{}", (image[2 * i + channel].clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    writeln!(f, "{}", row.join(" "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngstream::stream;
    use crate::sim::{arm_a, Scene, WorldState};

    fn scene(block_x: f64) -> Scene {
        Scene {
            table_z: 0.80,
            block_x,
            block_w: 0.03,
            block_h: 0.04,
            holder_x: 0.60,
            holder_w: 0.07,
            holder_wall_h: 0.05,
            arm: arm_a(),
        }
    }

    fn world() -> WorldState {
        WorldState::init(scene(0.42)).unwrap()
    }

    /// Independent intersection oracle: project onto the segment normal
    /// instead of solving the 2x2 system.
    fn oracle_ray_segment(ox: f64, oz: f64, dx: f64, dz: f64, seg: &Segment) -> Option<f64> {
        let ex = seg.x2 - seg.x1;
        let ez = seg.z2 - seg.z1;
        let (nx, nz) = (-ez, ex); // segment normal
        let denom = dx * nx + dz * nz;
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = ((seg.x1 - ox) * nx + (seg.z1 - oz) * nz) / denom;
        if t <= 1e-9 {
            return None;
        }
        let hx = ox + t * dx - seg.x1;
        let hz = oz + t * dz - seg.z1;
        let s = (hx * ex + hz * ez) / (ex * ex + ez * ez);
        if (0.0..=1.0).contains(&s) {
            Some(t)
        } else {
            None
        }
    }

    #[test]
    fn empty_scene_renders_background() {
        let w = world();
        // point the overhead camera up at nothing
        let mount = CameraMount {
            kind: MountKind::OverheadFixed { x: 0.6, z: 1.6, view_angle: FRAC_PI_2 },
            intrinsics: CameraIntrinsics::new(16, 60.0),
        };
        let img = render(&w, &mount);
        assert!(img.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn on_axis_target_lands_in_center_pixel() {
        // a small target exactly on the optical axis must land in the pixels
        // whose angular bins border the axis: i = N/2 (and its neighbor by
        // symmetry) for even N
        let w = world();
        let segs = vec![Segment { x1: -0.01, z1: -0.8, x2: 0.01, z2: -0.8, color: COLOR_BLOCK }];
        let mount = CameraMount {
            kind: MountKind::OverheadFixed {
                x: w.scene.arm.base_x,
                z: w.scene.arm.base_z,
                view_angle: -FRAC_PI_2,
            },
            intrinsics: CameraIntrinsics::new(64, 90.0),
        };
        let img = render_segments(&segs, &w, &mount);
        let n = mount.intrinsics.n_pixels;
        let block_val = COLOR_BLOCK as f64 / ID_MAX as f64;
        assert_eq!(img[2 * (n / 2)], block_val, "center-right pixel sees the target");
        assert_eq!(img[2 * (n / 2 - 1)], block_val, "symmetric neighbor too");
        // far-off pixels see background
        assert_eq!(img[0], 0.0);
        assert_eq!(img[2 * (n - 1)], 0.0);
    }

    #[test]
    fn renderer_is_deterministic() {
        let w = world();
        for mount in CameraPreset::OverheadDualWide.mounts() {
            assert_eq!(render(&w, &mount), render(&w, &mount));
        }
    }

    #[test]
    fn occlusion_nearest_segment_wins() {
        // hand-built three-segment stack under a downward camera
        let w = world();
        let segs = vec![
            Segment { x1: -0.5, z1: -0.9, x2: 0.5, z2: -0.9, color: COLOR_TABLE },
            Segment { x1: -0.1, z1: -0.7, x2: 0.1, z2: -0.7, color: COLOR_BLOCK },
            Segment { x1: -0.3, z1: -0.5, x2: -0.05, z2: -0.5, color: COLOR_WALL },
        ];
        let mount = CameraMount {
            kind: MountKind::OverheadFixed {
                x: w.scene.arm.base_x,
                z: w.scene.arm.base_z,
                view_angle: -FRAC_PI_2,
            },
            intrinsics: CameraIntrinsics::new(64, 100.0),
        };
        let img = render_segments(&segs, &w, &mount);
        // oracle: brute-force all intersections with the projection formula
        let n = mount.intrinsics.n_pixels;
        let fov = mount.intrinsics.fov_deg * PI / 180.0;
        for i in 0..n {
            let alpha = -FRAC_PI_2 + fov * ((i as f64 + 0.5) / n as f64 - 0.5);
            let (dx, dz) = (alpha.cos(), alpha.sin());
            let mut best: Option<(f64, u8)> = None;
            for seg in &segs {
                if let Some(t) = oracle_ray_segment(0.0, 0.0, dx, dz, seg) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, seg.color));
                    }
                }
            }
            match best {
                None => assert_eq!(img[2 * i], 0.0, "pixel {i}"),
                Some((t, c)) => {
                    assert_eq!(img[2 * i], c as f64 / ID_MAX as f64, "pixel {i}");
                    assert!((img[2 * i + 1] - (INV_DEPTH_SCALE / t).min(1.0)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn wrist_renders_are_translation_invariant_bit_exact() {
        // Rigid shift of scene + base by a dyadic delta: every shifted field
        // addition is exact, so the anchor subtractions cancel exactly and
        // the wrist images must be bit-identical. The overhead camera stays
        // bolted to the room and must see a different image.
        let dx = 0.0625;
        let dz = 0.0625;
        let base = world();
        let mut shifted = base.clone();
        shifted.scene.table_z += dz;
        shifted.scene.block_x += dx;
        shifted.scene.holder_x += dx;
        shifted.scene.arm.base_x += dx;
        shifted.scene.arm.base_z += dz;
        shifted.block_pose.0 += dx;
        shifted.block_pose.1 += dz;
        // exactness guard: if any of these additions rounded, the premise
        // of the bit-exact comparison would not hold
        assert_eq!(shifted.scene.table_z - base.scene.table_z, dz);
        assert_eq!(shifted.scene.arm.base_z - base.scene.arm.base_z, dz);
        assert_eq!(shifted.scene.holder_x - base.scene.holder_x, dx);
        assert_eq!(shifted.block_pose.0 - base.block_pose.0, dx);

        for fov in [NORMAL_FOV_DEG, WIDE_FOV_DEG] {
            for mount in [CameraMount::wrist_top(fov), CameraMount::wrist_bottom(fov)] {
                let a = render(&base, &mount);
                let b = render(&shifted, &mount);
                assert_eq!(a, b, "wrist render changed under translation");
            }
        }
        let overhead = CameraMount::overhead();
        assert_ne!(render(&base, &overhead), render(&shifted, &overhead));
    }

    #[test]
    fn wrist_cameras_see_the_block_during_approach() {
        let mut w = world();
        // hover: gripper well above the block
        let hover = crate::kinematics::Pose::new(0.42, w.scene.table_z + 0.14, -FRAC_PI_2);
        w.joints = crate::kinematics::ik_solve(&w.scene.arm, hover, &w.joints).unwrap();
        let block_val = COLOR_BLOCK as f64 / ID_MAX as f64;
        for mount in [
            CameraMount::wrist_top(WIDE_FOV_DEG),
            CameraMount::wrist_bottom(WIDE_FOV_DEG),
        ] {
            let img = render(&w, &mount);
            let hits = (0..N_PIXELS).filter(|&i| img[2 * i] == block_val).count();
            assert!(hits >= 2, "block invisible from {mount:?}");
        }
    }

    #[test]
    fn observation_layout_and_state_modes() {
        let w = world();
        for preset in CameraPreset::ALL {
            let cfg = ObservationConfig::new(preset, StateMode::None);
            let obs = observe(&w, &cfg, None);
            assert_eq!(obs.pixels.len(), cfg.pixel_len());
            assert_eq!(obs.pixels.len(), 2 * N_PIXELS * preset.mounts().len());
            assert!(obs.state.is_empty());
            assert!(obs.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let cfg = ObservationConfig::new(CameraPreset::DualWideOnly, StateMode::EEFPose);
        let obs = observe(&w, &cfg, None);
        assert_eq!(obs.state.len(), 3);
        let eef = w.eef();
        assert_eq!(obs.state, vec![eef.x, eef.z, eef.theta]);

        let cfg = ObservationConfig::new(CameraPreset::DualWideOnly, StateMode::Joints);
        assert_eq!(observe(&w, &cfg, None).state, w.joints.angles);
    }

    #[test]
    fn state_noise_statistics() {
        let w = world();
        let cfg = ObservationConfig::new(CameraPreset::Overhead, StateMode::EEFPose)
            .with_state_noise(0.05);
        let true_z = w.eef().z;
        let mut rng = stream(4, 0);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let obs = observe(&w, &cfg, Some(&mut rng));
            let noise = obs.state[1] - true_z;
            assert!((-0.05..=0.05).contains(&noise));
            sum += noise;
        }
        assert!((sum / n as f64).abs() < 0.002, "mean {}", sum / n as f64);
    }

    #[test]
    fn state_hack_shifts_reported_height() {
        let mut w = world();
        // put the end-effector at z = 0.90 exactly
        let target = crate::kinematics::Pose::new(0.5, 0.90, -FRAC_PI_2);
        w.joints = crate::kinematics::ik_solve(&w.scene.arm, target, &w.joints).unwrap();
        let cfg = ObservationConfig::new(CameraPreset::Overhead, StateMode::EEFPose)
            .with_state_hack(-0.08);
        let obs = observe(&w, &cfg, None);
        assert!((obs.state[1] - 0.82).abs() < 1e-6, "got {}", obs.state[1]);
    }

    #[test]
    fn debug_dumps_write_expected_formats() {
        let dir = tempfile::tempdir().unwrap();
        let w = world();
        let img = render(&w, &CameraMount::overhead());
        let csv = dir.path().join("cam.csv");
        let pgm = dir.path().join("cam.pgm");
        write_debug_csv(&csv, &img).unwrap();
        write_debug_pgm(&pgm, &img, 0).unwrap();
        let csv_text = std::fs::read_to_string(&csv).unwrap();
        assert!(csv_text.starts_with("index,color,inv_depth"));
        assert_eq!(csv_text.lines().count(), 1 + N_PIXELS);
        let pgm_text = std::fs::read_to_string(&pgm).unwrap();
        assert!(pgm_text.starts_with("P2\n64 1\n255"));
    }
}
