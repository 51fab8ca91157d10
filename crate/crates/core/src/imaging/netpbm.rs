//! Netpbm files: 16-bit PGM depth maps with a millimeter scale sidecar,
//! 8-bit PGM previews and binary PPM annotation images.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{AnnotationImage, CameraModel, DepthImage, SegmentationMask};

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Parses a binary Netpbm header, returning (magic, width, height, maxval, payload offset).
fn header(bytes: &[u8], path: &Path) -> Result<(String, usize, usize, usize, usize)> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::parse(path, 1, "truncated Netpbm header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, 1, format!("bad header field `{s}`")));
    // exactly one whitespace byte separates the header from the raster
    Ok((fields[0].clone(), num(&fields[1])?, num(&fields[2])?, num(&fields[3])?, i + 1))
}

/// Depth in millimeters as 16-bit big-endian P5. The sidecar records the
/// scale (meters per count) and the camera.
pub fn write_depth_pgm(depth: &DepthImage, path: &Path) -> Result<()> {
    const SCALE: f64 = 1e-3;
    let mut buf = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
    for &d in &depth.data {
        let counts = (d / SCALE).round().clamp(0.0, 65535.0) as u16;
        buf.extend_from_slice(&counts.to_be_bytes());
    }
    std::fs::write(path, buf)?;
    let c = &depth.camera;
    let pose = serde_json::to_string(&c.pose).expect("pose serializes");
    std::fs::write(
        sidecar(path),
        format!(
            "scale_m_per_count = {SCALE}\nwidth = {}\nheight = {}\nfocal = {:?}\ncx = {:?}\ncy = {:?}\npose = {pose}\n",
            c.width, c.height, c.focal, c.cx, c.cy
        ),
    )?;
    Ok(())
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthImage> {
    let bytes = std::fs::read(path)?;
    let (magic, w, h, maxval, off) = header(&bytes, path)?;
    if magic != "P5" || maxval != 65535 {
        return Err(Error::parse(path, 1, "expected a 16-bit P5 image"));
    }
    if bytes.len() < off + 2 * w * h {
        return Err(Error::parse(path, 1, "raster truncated"));
    }
    let side_path = sidecar(path);
    let side = std::fs::read_to_string(&side_path)?;
    let get = |key: &str| {
        side.lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim().to_string()))
            .ok_or_else(|| Error::parse(&side_path, 0, format!("missing `{key}`")))
    };
    let f = |key: &str| -> Result<f64> {
        get(key)?.parse().map_err(|_| Error::parse(&side_path, 0, format!("bad `{key}`")))
    };
    let pose = serde_json::from_str(&get("pose")?).map_err(|e| Error::parse(&side_path, 0, e.to_string()))?;
    let camera = CameraModel::new(w, h, f("focal")?, f("cx")?, f("cy")?, pose)?;
    let scale = f("scale_m_per_count")?;
    let data = bytes[off..off + 2 * w * h]
        .chunks_exact(2)
        .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) * scale)
        .collect();
    Ok(DepthImage { width: w, height: h, data, camera })
}

/// 8-bit grayscale preview; `values` are linearly mapped from [0, max] to [0, 255].
pub fn write_gray_pgm(width: usize, height: usize, values: &[f64], path: &Path) -> Result<()> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend(values.iter().map(|&v| if max > 0.0 { (v / max * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 }));
    std::fs::write(path, buf)?;
    Ok(())
}

/// Labels as raw 8-bit gray levels (labels above 255 saturate).
pub fn write_mask_pgm(mask: &SegmentationMask, path: &Path) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    buf.extend(mask.labels.iter().map(|&l| l.min(255) as u8));
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_ppm(image: &AnnotationImage, path: &Path) -> Result<()> {
    let mut buf = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    for c in &image.rgb {
        buf.extend_from_slice(c);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<AnnotationImage> {
    let bytes = std::fs::read(path)?;
    let (magic, w, h, maxval, off) = header(&bytes, path)?;
    if magic != "P6" || maxval != 255 {
        return Err(Error::parse(path, 1, "expected an 8-bit P6 image"));
    }
    if bytes.len() < off + 3 * w * h {
        return Err(Error::parse(path, 1, "raster truncated"));
    }
    let rgb = bytes[off..off + 3 * w * h].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(AnnotationImage { width: w, height: h, rgb })
}
