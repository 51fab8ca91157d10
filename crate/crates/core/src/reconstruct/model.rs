use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::pointcloud::{PointCloud, REFINED_POINTS};
use crate::seed;

const MAGIC: &[u8; 4] = b"MMRF";
const VERSION: u32 = 2;

/// Layer widths. The encoder starts at 3 and is max-pooled; the decoder
/// starts at the encoder's last width and ends in a linear layer with
/// `3 · output_points` outputs. With `normalize`, the model sees the coarse
/// cloud mapped into its bounding box `[-1, 1]³` and its output is mapped back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub encoder: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub output_points: usize,
    pub normalize: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            encoder: vec![3, 64, 128, 256],
            decoder_hidden: vec![512, 1024],
            output_points: REFINED_POINTS,
            normalize: true,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.encoder.len() < 2 || self.encoder[0] != 3 {
            return Err(Error::invalid("encoder widths must start at 3 and have at least one layer"));
        }
        if self.encoder.iter().chain(&self.decoder_hidden).any(|&w| w == 0) || self.output_points == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    fn layers(&self) -> (Vec<Layer>, Vec<Layer>) {
        let mut off = 0;
        let mut make = |widths: &[usize]| {
            widths
                .windows(2)
                .map(|w| {
                    let l = Layer { inputs: w[0], outputs: w[1], offset: off };
                    off += w[0] * w[1] + w[1];
                    l
                })
                .collect::<Vec<_>>()
        };
        let enc = make(&self.encoder);
        let mut dec_widths = vec![*self.encoder.last().expect("validated")];
        dec_widths.extend(&self.decoder_hidden);
        dec_widths.push(3 * self.output_points);
        let dec = make(&dec_widths);
        (enc, dec)
    }

    pub fn parameter_count(&self) -> usize {
        let (enc, dec) = self.layers();
        enc.iter().chain(&dec).map(|l| l.inputs * l.outputs + l.outputs).sum()
    }

    pub fn latent(&self) -> usize {
        *self.encoder.last().expect("validated")
    }
}

/// Weights stored row-major `[inputs][outputs]`, then the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Layer {
    fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.offset..self.offset + self.inputs * self.outputs]
    }

    fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        let b = self.offset + self.inputs * self.outputs;
        &p[b..b + self.outputs]
    }

    /// `out = x · W + b`, summing over inputs in a fixed order.
    fn apply(&self, p: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.bias(p));
        let w = self.weights(p);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                let row = &w[k * self.outputs..(k + 1) * self.outputs];
                out.iter_mut().zip(row).for_each(|(o, wk)| *o += xk * wk);
            }
        }
    }

    /// Accumulates parameter gradients for one input row and returns
    /// `dL/dx` when `want_input` is set.
    fn backward(&self, p: &[f64], grad: &mut [f64], x: &[f64], dy: &[f64], want_input: bool) -> Vec<f64> {
        let n = self.outputs;
        let (gw, gb) = grad[self.offset..self.offset + self.inputs * n + n].split_at_mut(self.inputs * n);
        gb.iter_mut().zip(dy).for_each(|(g, d)| *g += d);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                gw[k * n..(k + 1) * n].iter_mut().zip(dy).for_each(|(g, d)| *g += xk * d);
            }
        }
        if !want_input {
            return Vec::new();
        }
        let w = self.weights(p);
        (0..self.inputs)
            .map(|k| w[k * n..(k + 1) * n].iter().zip(dy).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn box_frame(points: &[Vec3]) -> (Vec3, Vec3) {
    let (lo, hi) = points.iter().fold((points[0], points[0]), |(lo, hi), q| (lo.inf(q), hi.sup(q)));
    ((lo + hi) / 2.0, ((hi - lo) / 2.0).map(|h| h.max(1e-6)))
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}

/// Permutation-invariant coarse-to-fine point generator.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseDecoderModel {
    arch: Architecture,
    params: Vec<f64>,
}

/// Intermediate values needed for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Per encoder layer, post-activation rows `[points][width]`.
    input: Vec<f64>,
    /// Bounding-box center and half extents, or the identity frame.
    frame: (Vec3, Vec3),
    encoder: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    /// Latent vector followed by each decoder activation.
    decoder: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl CoarseDecoderModel {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let (enc, dec) = arch.layers();
        let mut params = vec![0.0; arch.parameter_count()];
        for l in enc.iter().chain(&dec) {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for p in &mut params[l.offset..l.offset + l.inputs * l.outputs + l.outputs] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self { arch, params })
    }

    pub fn from_parameters(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.parameter_count() {
            return Err(Error::invalid(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                arch.parameter_count()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trace(&self, coarse: &[Vec3]) -> Result<ForwardTrace> {
        if coarse.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let (enc, dec) = self.arch.layers();
        let p = &self.params;
        let frame = if self.arch.normalize { box_frame(coarse) } else { (Vec3::zeros(), Vec3::repeat(1.0)) };
        let (center, half) = frame;
        let input: Vec<f64> = coarse
            .iter()
            .flat_map(|q| {
                let n = (q - center).component_div(&half);
                [n.x, n.y, n.z]
            })
            .collect();
        let mut encoder: Vec<Vec<f64>> = Vec::with_capacity(enc.len());
        let mut buf = Vec::new();
        for (li, l) in enc.iter().enumerate() {
            let mut out = Vec::with_capacity(coarse.len() * l.outputs);
            for i in 0..coarse.len() {
                let x: &[f64] = if li == 0 {
                    &input[i * 3..i * 3 + 3]
                } else {
                    &encoder[li - 1][i * l.inputs..(i + 1) * l.inputs]
                };
                l.apply(p, x, &mut buf);
                relu(&mut buf);
                out.extend_from_slice(&buf);
            }
            encoder.push(out);
        }
        let width = self.arch.latent();
        let last = encoder.last().expect("non-empty encoder");
        let mut latent = last[..width].to_vec();
        let mut argmax = vec![0; width];
        for i in 1..coarse.len() {
            for (c, v) in last[i * width..(i + 1) * width].iter().enumerate() {
                if *v > latent[c] {
                    latent[c] = *v;
                    argmax[c] = i;
                }
            }
        }
        let mut decoder = vec![latent];
        for (li, l) in dec.iter().enumerate() {
            let mut out = Vec::new();
            l.apply(p, &decoder[li], &mut out);
            if li + 1 < dec.len() {
                relu(&mut out);
            }
            decoder.push(out);
        }
        let mut output = decoder.pop().expect("decoder output");
        for q in output.chunks_exact_mut(3) {
            for k in 0..3 {
                q[k] = center[k] + half[k] * q[k];
            }
        }
        Ok(ForwardTrace { input, frame, encoder, argmax, decoder, output })
    }

    pub fn forward(&self, coarse: &PointCloud) -> Result<PointCloud> {
        Ok(PointCloud::from_flat(&self.trace(&coarse.points)?.output))
    }

    /// Adds `dL/dθ` to `grad` given `dL/d(output)`.
    pub fn backward(&self, trace: &ForwardTrace, d_output: &[f64], grad: &mut [f64]) {
        let (enc, dec) = self.arch.layers();
        let p = &self.params;
        let half = trace.frame.1;
        let mut dy: Vec<f64> = d_output.iter().enumerate().map(|(i, d)| d * half[i % 3]).collect();
        for (li, l) in dec.iter().enumerate().rev() {
            let x = &trace.decoder[li];
            let mut dx = l.backward(p, grad, x, &dy, true);
            // post-ReLU activations: zero output means inactive (subgradient 0)
            if li > 0 {
                dx.iter_mut().zip(x).for_each(|(d, a)| {
                    if *a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            dy = dx;
        }
        let d_latent = dy;
        let width = self.arch.latent();
        let mut points: Vec<usize> = trace.argmax.clone();
        points.sort_unstable();
        points.dedup();
        for &i in &points {
            let mut d: Vec<f64> = (0..width)
                .map(|c| if trace.argmax[c] == i { d_latent[c] } else { 0.0 })
                .collect();
            for (li, l) in enc.iter().enumerate().rev() {
                let act = &trace.encoder[li][i * l.outputs..(i + 1) * l.outputs];
                d.iter_mut().zip(act).for_each(|(g, a)| {
                    if *a <= 0.0 {
                        *g = 0.0
                    }
                });
                let x: &[f64] = if li == 0 {
                    &trace.input[i * 3..i * 3 + 3]
                } else {
                    &trace.encoder[li - 1][i * l.inputs..(i + 1) * l.inputs]
                };
                d = l.backward(p, grad, x, &d, li > 0);
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let mut put = |widths: &[usize]| {
            buf.extend_from_slice(&(widths.len() as u32).to_le_bytes());
            for w in widths {
                buf.extend_from_slice(&(*w as u32).to_le_bytes());
            }
        };
        put(&self.arch.encoder);
        put(&self.arch.decoder_hidden);
        buf.extend_from_slice(&(self.arch.output_points as u32).to_le_bytes());
        buf.push(self.arch.normalize as u8);
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingCheckpoint(path.to_path_buf()),
            _ => e.into(),
        })?;
        let mut r = Reader { bytes: &bytes, at: 0, path };
        if r.take(4)? != MAGIC {
            return Err(Error::parse(path, 0, "not a model checkpoint"));
        }
        if r.u32()? != VERSION {
            return Err(Error::parse(path, 0, "unsupported checkpoint version"));
        }
        let encoder = r.widths()?;
        let decoder_hidden = r.widths()?;
        let output_points = r.u32()? as usize;
        let normalize = r.take(1)?[0] != 0;
        let count = r.u64()? as usize;
        let body = r.take(count.checked_mul(8).ok_or_else(|| Error::parse(path, 0, "bad parameter count"))?)?;
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_parameters(Architecture { encoder, decoder_hidden, output_points, normalize }, params)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::parse(self.path, 0, "truncated checkpoint"))?;
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn widths(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.u32().map(|v| v as usize)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Architecture {
        Architecture { encoder: vec![3, 8, 16], decoder_hidden: vec![12], output_points: 20, normalize: true }
    }

    fn cloud(n: usize, s: u64) -> PointCloud {
        let mut rng = seed::rng(s);
        PointCloud::new((0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect())
    }

    #[test]
    fn shapes_and_counts() {
        let a = Architecture::default();
        assert_eq!(
            a.parameter_count(),
            (3 * 64 + 64) + (64 * 128 + 128) + (128 * 256 + 256) + (256 * 512 + 512) + (512 * 1024 + 1024) + (1024 * 12288 + 12288)
        );
        let m = CoarseDecoderModel::new(tiny(), 1).unwrap();
        assert_eq!(m.forward(&cloud(30, 2)).unwrap().len(), 20);
        assert!(CoarseDecoderModel::new(Architecture { encoder: vec![2, 4], ..tiny() }, 1).is_err());
    }

    #[test]
    fn permutation_invariant_bitwise() {
        let m = CoarseDecoderModel::new(tiny(), 3).unwrap();
        let c = cloud(50, 4);
        let mut rev = c.clone();
        rev.points.reverse();
        assert_eq!(m.forward(&c).unwrap(), m.forward(&rev).unwrap());
        let other = CoarseDecoderModel::new(tiny(), 5).unwrap();
        assert_ne!(m.forward(&c).unwrap(), other.forward(&c).unwrap());
    }

    #[test]
    fn backward_matches_finite_differences_of_linear_functional() {
        let m = CoarseDecoderModel::new(tiny(), 6).unwrap();
        let c = cloud(25, 7);
        let weights: Vec<f64> = (0..60).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let f = |m: &CoarseDecoderModel| -> f64 {
            m.trace(&c.points).unwrap().output.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let tr = m.trace(&c.points).unwrap();
        let mut g = vec![0.0; m.parameters().len()];
        m.backward(&tr, &weights, &mut g);
        for idx in (0..g.len()).step_by(17) {
            let mut plus = m.clone();
            plus.parameters_mut()[idx] += 1e-6;
            let mut minus = m.clone();
            minus.parameters_mut()[idx] -= 1e-6;
            let fd = (f(&plus) - f(&minus)) / 2e-6;
            assert!((fd - g[idx]).abs() <= 1e-6 * fd.abs().max(1.0), "param {idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = CoarseDecoderModel::new(tiny(), 8).unwrap();
        m.save(&p).unwrap();
        assert_eq!(CoarseDecoderModel::load(&p).unwrap(), m);
        assert!(matches!(CoarseDecoderModel::load(&dir.path().join("none")), Err(Error::MissingCheckpoint(_))));
        fs::write(&p, b"MMRF\x01\0\0\0").unwrap();
        assert!(CoarseDecoderModel::load(&p).is_err());
    }
}
