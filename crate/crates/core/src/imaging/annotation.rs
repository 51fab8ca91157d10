use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SegmentationMask;

/// Object colors: `colors[l - 1]` is the color of label `l`. Black is
/// reserved for background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    colors: Vec<[u8; 3]>,
}

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        for (i, c) in colors.iter().enumerate() {
            if *c == [0, 0, 0] {
                return Err(Error::invalid(format!("label {} is assigned black", i + 1)));
            }
            if colors[..i].contains(c) {
                return Err(Error::invalid(format!("color {c:?} used by two labels")));
            }
        }
        Ok(Self { colors })
    }

    /// Distinct saturated colors for labels `1..=m`.
    pub fn distinct(m: usize) -> Self {
        const BASE: [[u8; 3]; 8] = [
            [230, 25, 75],
            [60, 180, 75],
            [0, 130, 200],
            [255, 225, 25],
            [145, 30, 180],
            [70, 240, 240],
            [245, 130, 48],
            [240, 50, 230],
        ];
        let colors = (0..m)
            .map(|i| {
                if i < BASE.len() {
                    BASE[i]
                } else {
                    // unique, never black: encode the index in the low bits
                    let k = i as u32 + 1;
                    [(k >> 16) as u8 | 1, (k >> 8) as u8, k as u8]
                }
            })
            .collect();
        Self::new(colors).expect("generated palette is valid")
    }

    pub fn color(&self, label: u32) -> Option<[u8; 3]> {
        self.colors.get(label.checked_sub(1)? as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[u8; 3]>,
}

pub fn encode_annotation(mask: &SegmentationMask, palette: &Palette) -> Result<AnnotationImage> {
    let rgb = mask
        .labels
        .iter()
        .map(|&l| {
            if l == 0 {
                Ok([0, 0, 0])
            } else {
                palette
                    .color(l)
                    .ok_or_else(|| Error::invalid(format!("palette has no color for label {l}")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(AnnotationImage {
        width: mask.width,
        height: mask.height,
        rgb,
    })
}

pub fn decode_annotation(image: &AnnotationImage, palette: &Palette) -> Result<SegmentationMask> {
    let lookup: HashMap<[u8; 3], u32> = palette
        .colors
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, i as u32 + 1))
        .collect();
    let labels = image
        .rgb
        .iter()
        .enumerate()
        .map(|(pixel, c)| {
            if *c == [0, 0, 0] {
                Ok(0)
            } else {
                lookup
                    .get(c)
                    .copied()
                    .ok_or(Error::UnknownColor { pixel, color: *c })
            }
        })
        .collect::<Result<_>>()?;
    Ok(SegmentationMask {
        width: image.width,
        height: image.height,
        labels,
    })
}
