//! FMCW SAR simulation.
//!
//! A virtual 2D aperture is swept in front of the scene (columns =
//! horizontal slider positions, rows = vertical). At every aperture position
//! a fan of rays finds the surfaces that reflect back towards the sensor;
//! each such hit becomes a point scatterer with amplitude
//! `cos(incidence) / d²`, and the dechirped IF signal is
//!
//! ```text
//! s(t) = Σ_k a_k · exp(j·2π·(f_c·τ_k + S·t·τ_k)),   τ_k = 2·d_k / c
//! ```
//!
//! sampled at `t = n / f_s`. A 3D FFT over (fast time, columns, rows) turns
//! the raw cube into a range × azimuth × elevation intensity volume. Hover
//! vibration displaces the true aperture positions while the FFT still
//! assumes the ideal grid, which smears the angular spectra.

mod heatmap;

pub use heatmap::{max_projection, peak_to_background, read_heatmap, write_heatmap, HeatmapMeta, HeatmapVolume, ProjectionAxis};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};
use crate::raycast::Bvh;
use crate::scene::Scene;
use crate::seed;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirp parameters. `bandwidth = slope · samples / sample_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub slope_hz_per_s: f64,
    pub samples_per_chirp: usize,
    pub sample_rate_hz: f64,
}

impl Default for RadarConfig {
    /// 60 GHz carrier, 3.2 GHz sweep over 256 samples at 5 MS/s.
    fn default() -> Self {
        Self::with_bandwidth(60e9, 3.2e9, 256, 5e6)
    }
}

impl RadarConfig {
    /// Derives the slope from the other parameters.
    pub fn with_bandwidth(carrier_hz: f64, bandwidth_hz: f64, samples_per_chirp: usize, sample_rate_hz: f64) -> Self {
        Self {
            carrier_hz,
            bandwidth_hz,
            slope_hz_per_s: bandwidth_hz * sample_rate_hz / samples_per_chirp as f64,
            samples_per_chirp,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.carrier_hz, self.bandwidth_hz, self.slope_hz_per_s, self.sample_rate_hz];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.samples_per_chirp == 0 {
            return Err(Error::invalid("radar parameters must be positive"));
        }
        let swept = self.slope_hz_per_s * self.samples_per_chirp as f64 / self.sample_rate_hz;
        if ((swept - self.bandwidth_hz) / self.bandwidth_hz).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "bandwidth {} Hz disagrees with slope × chirp duration = {swept} Hz",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    /// Δr = c / 2B.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Largest range representable without aliasing (complex sampling).
    pub fn max_range(&self) -> f64 {
        self.samples_per_chirp as f64 * self.range_resolution()
    }
}

/// Aperture grid. `pose` maps the aperture frame to the world: local x runs
/// along columns, local y along rows (downwards), local z is the boresight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureConfig {
    pub width: usize,
    pub height: usize,
    pub spacing_h: f64,
    pub spacing_v: f64,
    pub pose: RigidPose,
}

impl Default for ApertureConfig {
    /// 64 × 16 positions at half-wavelength spacing of the default radar.
    fn default() -> Self {
        let half = RadarConfig::default().wavelength() / 2.0;
        Self {
            width: 64,
            height: 16,
            spacing_h: half,
            spacing_v: half,
            pose: RigidPose::identity(),
        }
    }
}

impl ApertureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("aperture needs at least one position per axis"));
        }
        if !(self.spacing_h > 0.0 && self.spacing_v > 0.0) {
            return Err(Error::invalid("aperture spacing must be positive"));
        }
        Ok(())
    }

    /// Same grid, centered at `center` and facing `target`.
    pub fn facing(self, center: Vec3, target: Vec3) -> Result<Self> {
        Ok(Self {
            pose: RigidPose::looking_at(center, target, Vec3::z())?,
            ..self
        })
    }

    pub fn boresight(&self) -> Vec3 {
        self.pose.rotate(&Vec3::z())
    }

    /// Ideal positions, row-major (`row * width + column`).
    pub fn ideal_positions(&self) -> Vec<Vec3> {
        let (cw, ch) = ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0);
        (0..self.height)
            .flat_map(|r| {
                (0..self.width).map(move |c| {
                    self.pose.apply(&Vec3::new(
                        (c as f64 - cw) * self.spacing_h,
                        (r as f64 - ch) * self.spacing_v,
                        0.0,
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VibrationMode {
    /// Independent offset at every aperture position.
    #[default]
    PerPosition,
    /// One offset shared by each slider row.
    PerRow,
}

/// Hover deviation: zero-mean Gaussian offsets along world x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationModel {
    pub sigma: [f64; 3],
    pub mode: VibrationMode,
    pub seed: u64,
}

impl Default for VibrationModel {
    /// 5 mm per axis. Placeholder: no measured deviation statistics are available.
    fn default() -> Self {
        Self {
            sigma: [0.005; 3],
            mode: VibrationMode::PerPosition,
            seed: 0,
        }
    }
}

impl VibrationModel {
    pub fn none() -> Self {
        Self {
            sigma: [0.0; 3],
            ..Self::default()
        }
    }
}

pub fn perturb_aperture(aperture: &ApertureConfig, vibration: &VibrationModel) -> Result<Vec<Vec3>> {
    aperture.validate()?;
    if vibration.sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::invalid("vibration sigma must be non-negative"));
    }
    let mut positions = aperture.ideal_positions();
    if vibration.sigma == [0.0; 3] {
        return Ok(positions);
    }
    let mut rng = seed::rng(vibration.seed);
    let axes = vibration.sigma.map(|s| Normal::new(0.0, s).expect("sigma validated"));
    let mut draw = || Vec3::new(axes[0].sample(&mut rng), axes[1].sample(&mut rng), axes[2].sample(&mut rng));
    match vibration.mode {
        VibrationMode::PerPosition => positions.iter_mut().for_each(|p| *p += draw()),
        VibrationMode::PerRow => {
            for row in positions.chunks_mut(aperture.width) {
                let off = draw();
                row.iter_mut().for_each(|p| *p += off);
            }
        }
    }
    Ok(positions)
}

/// Ray fan used to find scatterers at each aperture position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterOptions {
    /// Half-width of the fan around the boresight, (azimuth, elevation), degrees.
    pub fan_half_angle_deg: [f64; 2],
    /// Rays per axis, (azimuth, elevation).
    pub fan_rays: [usize; 2],
    /// Hits with larger incidence angle do not return energy.
    pub specular_threshold_deg: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            fan_half_angle_deg: [35.0, 35.0],
            fan_rays: [48, 48],
            specular_threshold_deg: 45.0,
        }
    }
}

/// Zero-padding factor per axis: (range, azimuth, elevation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FftOptions {
    pub padding: [usize; 3],
}

impl Default for FftOptions {
    fn default() -> Self {
        Self { padding: [2, 2, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Vec3,
    pub amplitude: f64,
}

/// Complex IF samples indexed `[row][column][sample]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCube {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub data: Vec<Complex64>,
    /// Positions actually used, row-major.
    pub positions: Vec<Vec3>,
    pub radar: RadarConfig,
    pub aperture: ApertureConfig,
}

impl RawCube {
    pub fn at(&self, row: usize, col: usize) -> &[Complex64] {
        let start = (row * self.cols + col) * self.samples;
        &self.data[start..start + self.samples]
    }
}

/// Dechirped IF samples at one position for a set of point scatterers.
pub fn synthesize_if(scatterers: &[Scatterer], position: &Vec3, radar: &RadarConfig) -> Vec<Complex64> {
    let n = radar.samples_per_chirp;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let two_pi = 2.0 * std::f64::consts::PI;
    for s in scatterers {
        let tau = 2.0 * (s.position - position).norm() / SPEED_OF_LIGHT;
        // carrier phase reduced mod 1 cycle before scaling keeps precision at 60 GHz
        let carrier_cycles = (radar.carrier_hz * tau).fract();
        let mut z = Complex64::from_polar(s.amplitude, two_pi * carrier_cycles);
        let step = Complex64::from_polar(1.0, two_pi * radar.slope_hz_per_s * tau / radar.sample_rate_hz);
        for o in out.iter_mut() {
            *o += z;
            z *= step;
        }
    }
    out
}

/// Surfaces hit by the fan from `position` that satisfy the specular condition.
pub fn find_scatterers(bvh: &Bvh, position: &Vec3, orientation: &RigidPose, opts: &ScatterOptions) -> Vec<Scatterer> {
    let [na, ne] = opts.fan_rays;
    let [ha, he] = opts.fan_half_angle_deg.map(f64::to_radians);
    let cos_limit = opts.specular_threshold_deg.to_radians().cos();
    let angle = |i: usize, n: usize, half: f64| {
        if n <= 1 {
            0.0
        } else {
            -half + 2.0 * half * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::new();
    if bvh.is_empty() {
        return out;
    }
    for e in 0..ne {
        let el = angle(e, ne, he);
        for a in 0..na {
            let az = angle(a, na, ha);
            let local = Vec3::new(az.sin() * el.cos(), el.sin(), az.cos() * el.cos());
            let dir = orientation.rotate(&local);
            if let Some(hit) = bvh.intersect(position, &dir, 1e-9) {
                let cos_inc = hit.normal.dot(&dir).abs();
                if cos_inc >= cos_limit {
                    let d = hit.t;
                    out.push(Scatterer {
                        position: position + dir * d,
                        amplitude: cos_inc / (d * d),
                    });
                }
            }
        }
    }
    out
}

/// Ray-traced IF cube for a scene observed from `positions`.
pub fn simulate_returns(
    scene: &Scene,
    aperture: &ApertureConfig,
    positions: &[Vec3],
    radar: &RadarConfig,
    opts: &ScatterOptions,
) -> Result<RawCube> {
    check_positions(aperture, positions)?;
    radar.validate()?;
    let bvh = Bvh::from_scene(scene);
    let rows: Vec<Vec<Complex64>> = positions
        .par_iter()
        .map(|p| synthesize_if(&find_scatterers(&bvh, p, &aperture.pose, opts), p, radar))
        .collect();
    Ok(assemble(rows, aperture, positions, radar))
}

/// IF cube for explicit point scatterers (no ray casting).
pub fn simulate_point_scatterers(
    scatterers: &[Scatterer],
    aperture: &ApertureConfig,
    positions: &[Vec3],
    radar: &RadarConfig,
) -> Result<RawCube> {
    check_positions(aperture, positions)?;
    radar.validate()?;
    let rows = positions.iter().map(|p| synthesize_if(scatterers, p, radar)).collect();
    Ok(assemble(rows, aperture, positions, radar))
}

fn check_positions(aperture: &ApertureConfig, positions: &[Vec3]) -> Result<()> {
    aperture.validate()?;
    if positions.is_empty() {
        return Err(Error::invalid("need at least one aperture position"));
    }
    if positions.len() != aperture.width * aperture.height {
        return Err(Error::invalid(format!(
            "{} positions for a {}×{} aperture",
            positions.len(),
            aperture.height,
            aperture.width
        )));
    }
    Ok(())
}

fn assemble(rows: Vec<Vec<Complex64>>, aperture: &ApertureConfig, positions: &[Vec3], radar: &RadarConfig) -> RawCube {
    RawCube {
        rows: aperture.height,
        cols: aperture.width,
        samples: radar.samples_per_chirp,
        data: rows.into_iter().flatten().collect(),
        positions: positions.to_vec(),
        radar: *radar,
        aperture: *aperture,
    }
}

/// Complex 3D spectrum indexed `[range][azimuth][elevation]`; the angular
/// axes are shifted so that broadside sits at bin `n / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    pub dims: [usize; 3],
    pub data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn at(&self, r: usize, a: usize, e: usize) -> Complex64 {
        self.data[(r * self.dims[1] + a) * self.dims[2] + e]
    }
}

pub fn complex_spectrum(raw: &RawCube, fft: &FftOptions) -> Result<ComplexVolume> {
    if fft.padding.contains(&0) {
        return Err(Error::invalid("padding factors must be at least 1"));
    }
    if raw.data.len() != raw.rows * raw.cols * raw.samples {
        return Err(Error::invalid("raw cube size does not match its dimensions"));
    }
    let np = raw.samples * fft.padding[0];
    let wp = raw.cols * fft.padding[1];
    let hp = raw.rows * fft.padding[2];
    // working layout [row][col][sample]
    let mut buf = vec![Complex64::new(0.0, 0.0); hp * wp * np];
    for r in 0..raw.rows {
        for c in 0..raw.cols {
            let dst = (r * wp + c) * np;
            buf[dst..dst + raw.samples].copy_from_slice(raw.at(r, c));
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft_n = planner.plan_fft_forward(np);
    for line in buf.chunks_exact_mut(np) {
        fft_n.process(line);
    }
    let fft_w = planner.plan_fft_forward(wp);
    let mut tmp = vec![Complex64::new(0.0, 0.0); wp.max(hp)];
    for r in 0..hp {
        for k in 0..np {
            for c in 0..wp {
                tmp[c] = buf[(r * wp + c) * np + k];
            }
            fft_w.process(&mut tmp[..wp]);
            for c in 0..wp {
                buf[(r * wp + c) * np + k] = tmp[c];
            }
        }
    }
    let fft_h = planner.plan_fft_forward(hp);
    for c in 0..wp {
        for k in 0..np {
            for r in 0..hp {
                tmp[r] = buf[(r * wp + c) * np + k];
            }
            fft_h.process(&mut tmp[..hp]);
            for r in 0..hp {
                buf[(r * wp + c) * np + k] = tmp[r];
            }
        }
    }
    let mut data = vec![Complex64::new(0.0, 0.0); np * wp * hp];
    for k in 0..np {
        for a in 0..wp {
            let c = (a + wp / 2) % wp;
            for e in 0..hp {
                let r = (e + hp / 2) % hp;
                data[(k * wp + a) * hp + e] = buf[(r * wp + c) * np + k];
            }
        }
    }
    Ok(ComplexVolume { dims: [np, wp, hp], data })
}

/// Magnitude of the 3D spectrum plus bin-to-coordinate metadata.
pub fn fft_heatmap(raw: &RawCube, fft: &FftOptions) -> Result<HeatmapVolume> {
    let spec = complex_spectrum(raw, fft)?;
    let [np, wp, hp] = spec.dims;
    let lambda = raw.radar.wavelength();
    Ok(HeatmapVolume {
        dims: spec.dims,
        data: spec.data.iter().map(|z| z.norm() as f32).collect(),
        meta: HeatmapMeta {
            range_bin_m: raw.radar.range_resolution() / fft.padding[0] as f64,
            azimuth_sin_per_bin: -lambda / (2.0 * raw.aperture.spacing_h * wp as f64),
            elevation_sin_per_bin: -lambda / (2.0 * raw.aperture.spacing_v * hp as f64),
            padding: fft.padding,
            raw_dims: [raw.samples, raw.cols, raw.rows],
        },
    })
    .inspect(|h| debug_assert_eq!(h.data.len(), np * wp * hp))
}

/// Heatmaps of the same scene from an ideal aperture and a vibrating one.
pub fn compare_modes(
    scene: &Scene,
    aperture: &ApertureConfig,
    radar: &RadarConfig,
    vibration: &VibrationModel,
    scatter: &ScatterOptions,
    fft: &FftOptions,
) -> Result<(HeatmapVolume, HeatmapVolume)> {
    let ideal = perturb_aperture(aperture, &VibrationModel::none())?;
    let shaken = perturb_aperture(aperture, vibration)?;
    let normal = fft_heatmap(&simulate_returns(scene, aperture, &ideal, radar, scatter)?, fft)?;
    let vibrating = if shaken == ideal {
        normal.clone()
    } else {
        fft_heatmap(&simulate_returns(scene, aperture, &shaken, radar, scatter)?, fft)?
    };
    Ok((normal, vibrating))
}
