use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MMHM";
const VERSION: u32 = 1;

/// Bin-to-coordinate mapping. Range of bin `k` is `k · range_bin_m`;
/// `sin θ` of angular bin `s` is `(s - n/2) · sin_per_bin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub range_bin_m: f64,
    pub azimuth_sin_per_bin: f64,
    pub elevation_sin_per_bin: f64,
    pub padding: [usize; 3],
    /// (samples, columns, rows) before padding.
    pub raw_dims: [usize; 3],
}

/// Intensities indexed `[range][azimuth][elevation]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapVolume {
    pub dims: [usize; 3],
    pub data: Vec<f32>,
    pub meta: HeatmapMeta,
}

impl HeatmapVolume {
    pub fn index(&self, r: usize, a: usize, e: usize) -> usize {
        (r * self.dims[1] + a) * self.dims[2] + e
    }

    pub fn get(&self, r: usize, a: usize, e: usize) -> f32 {
        self.data[self.index(r, a, e)]
    }

    /// Brightest bin; the first one wins ties.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        let e = best % self.dims[2];
        let a = (best / self.dims[2]) % self.dims[1];
        (best / (self.dims[1] * self.dims[2]), a, e)
    }

    pub fn range_of(&self, r: usize) -> f64 {
        r as f64 * self.meta.range_bin_m
    }
}

/// Peak energy over the mean energy of all other bins.
/// An all-zero volume has ratio 0; a single nonzero bin has ratio ∞.
pub fn peak_to_background(h: &HeatmapVolume) -> f64 {
    let energies: Vec<f64> = h.data.iter().map(|&v| f64::from(v) * f64::from(v)).collect();
    let (peak_i, peak) = energies
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    if peak == 0.0 || energies.len() < 2 {
        return 0.0;
    }
    let rest: f64 = energies.iter().enumerate().filter(|(i, _)| *i != peak_i).map(|(_, e)| e).sum();
    let mean = rest / (energies.len() - 1) as f64;
    if mean == 0.0 {
        f64::INFINITY
    } else {
        peak / mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionAxis {
    /// Collapse range: azimuth × elevation image.
    Range,
    /// Collapse azimuth: range × elevation image.
    Azimuth,
    /// Collapse elevation: range × azimuth image.
    Elevation,
}

/// Maximum projection along one axis as a `(width, height, values)` image.
pub fn max_projection(h: &HeatmapVolume, axis: ProjectionAxis) -> (usize, usize, Vec<f64>) {
    let [nr, na, ne] = h.dims;
    let (w, ht) = match axis {
        ProjectionAxis::Range => (na, ne),
        ProjectionAxis::Azimuth => (nr, ne),
        ProjectionAxis::Elevation => (nr, na),
    };
    let mut img = vec![0.0f64; w * ht];
    for r in 0..nr {
        for a in 0..na {
            for e in 0..ne {
                let (x, y) = match axis {
                    ProjectionAxis::Range => (a, e),
                    ProjectionAxis::Azimuth => (r, e),
                    ProjectionAxis::Elevation => (r, a),
                };
                let v = f64::from(h.get(r, a, e));
                let slot = &mut img[y * w + x];
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    (w, ht, img)
}

/// Binary volume plus a `<path>.json` sidecar describing the bins.
pub fn write_heatmap(h: &HeatmapVolume, sidecar: &serde_json::Value, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 4 * h.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in h.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for m in [h.meta.range_bin_m, h.meta.azimuth_sin_per_bin, h.meta.elevation_sin_per_bin] {
        buf.extend_from_slice(&m.to_le_bytes());
    }
    for d in h.meta.padding.iter().chain(&h.meta.raw_dims) {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for v in &h.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    let side = serde_json::json!({ "meta": h.meta, "dims": h.dims, "config": sidecar });
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side).expect("json"))?;
    Ok(())
}

pub fn read_heatmap(path: &Path) -> Result<HeatmapVolume> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, at: 0, path };
    if cur.take(4)? != MAGIC {
        return Err(Error::parse(path, 0, "not a heatmap file"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::parse(path, 0, format!("unsupported version {version}")));
    }
    let dims = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let (range_bin_m, azimuth_sin_per_bin, elevation_sin_per_bin) = (cur.f64()?, cur.f64()?, cur.f64()?);
    let padding = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let raw_dims = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let n = dims.iter().product::<usize>();
    if bytes.len() - cur.at != 4 * n {
        return Err(Error::parse(path, 0, format!("expected {n} intensities")));
    }
    let data = bytes[cur.at..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(HeatmapVolume {
        dims,
        data,
        meta: HeatmapMeta {
            range_bin_m,
            azimuth_sin_per_bin,
            elevation_sin_per_bin,
            padding,
            raw_dims,
        },
    })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::parse(self.path, 0, "truncated header"))?;
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
