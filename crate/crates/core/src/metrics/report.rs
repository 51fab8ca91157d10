use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::mean_std;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Joint reconstruction of all objects.
    Model1,
    /// Segment, reconstruct each object, merge.
    Model2,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Model1 => "Model 1",
            Self::Model2 => "Model 2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossType {
    #[default]
    Cd,
    Emd,
}

impl fmt::Display for LossType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cd => "CD",
            Self::Emd => "EMD",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scene_id: String,
    pub scene_type: String,
    pub variant: ModelVariant,
    pub loss: LossType,
    pub cd: f64,
    pub emd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub scene_type: String,
    pub variant: ModelVariant,
    pub loss: LossType,
    pub count: usize,
    pub cd_avg: f64,
    pub cd_std: f64,
    pub emd_avg: f64,
    pub emd_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<Record>,
    pub groups: Vec<GroupStats>,
}

const SCALE_NOTE: &str = "CD and EMD are means of non-squared Euclidean distances in meters; \
std is the sample std (N-1), 0 for a single record.";

/// Groups records by (scene type, variant, loss) in sorted order.
pub fn aggregate(records: &[Record]) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyGroup("no records to aggregate".into()));
    }
    let mut groups: BTreeMap<(String, ModelVariant, LossType), Vec<&Record>> = BTreeMap::new();
    for r in records {
        if !(r.cd.is_finite() && r.emd.is_finite()) {
            return Err(Error::invalid(format!("non-finite metric for scene {}", r.scene_id)));
        }
        groups.entry((r.scene_type.clone(), r.variant, r.loss)).or_default().push(r);
    }
    let groups = groups
        .into_iter()
        .map(|((scene_type, variant, loss), rs)| {
            let cd: Vec<f64> = rs.iter().map(|r| r.cd).collect();
            let emd: Vec<f64> = rs.iter().map(|r| r.emd).collect();
            let (cd_avg, cd_std) = mean_std(&cd);
            let (emd_avg, emd_std) = mean_std(&emd);
            GroupStats { scene_type, variant, loss, count: rs.len(), cd_avg, cd_std, emd_avg, emd_std }
        })
        .collect();
    Ok(MetricsReport { records: records.to_vec(), groups })
}

/// Up to four significant digits, trailing zeros removed.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = (3 - v.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{v:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One compact row, e.g. `Model 1 (CD): CD 0.2/0.06, EMD 2.74/0.8`.
pub fn render_row(variant: ModelVariant, loss: LossType, cd: (f64, f64), emd: (f64, f64)) -> String {
    format!(
        "{variant} ({loss}): CD {}/{}, EMD {}/{}",
        format_number(cd.0),
        format_number(cd.1),
        format_number(emd.0),
        format_number(emd.1)
    )
}

impl MetricsReport {
    pub fn group(&self, scene_type: &str, variant: ModelVariant, loss: LossType) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.scene_type == scene_type && g.variant == variant && g.loss == loss)
    }

    /// Aligned table: one block per scene type, rows variant × loss.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for g in &self.groups {
            if current != Some(g.scene_type.as_str()) {
                if current.is_some() {
                    out.push('\n');
                }
                out.push_str(&format!("scene: {}\n", g.scene_type));
                out.push_str(&format!(
                    "{:<16} {:>10} {:>10} {:>10} {:>10} {:>4}\n",
                    "setting", "CD avg", "CD std", "EMD avg", "EMD std", "n"
                ));
                current = Some(&g.scene_type);
            }
            out.push_str(&format!(
                "{:<16} {:>10} {:>10} {:>10} {:>10} {:>4}\n",
                format!("{} ({})", g.variant, g.loss),
                format_number(g.cd_avg),
                format_number(g.cd_std),
                format_number(g.emd_avg),
                format_number(g.emd_std),
                g.count
            ));
        }
        out.push_str(&format!("\nnote: {SCALE_NOTE}\n"));
        out
    }

    pub fn rows(&self) -> Vec<String> {
        self.groups
            .iter()
            .map(|g| render_row(g.variant, g.loss, (g.cd_avg, g.cd_std), (g.emd_avg, g.emd_std)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene_id,scene_type,variant,loss,cd,emd\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{:?},{:?}\n",
                r.scene_id,
                r.scene_type,
                match r.variant {
                    ModelVariant::Model1 => "model1",
                    ModelVariant::Model2 => "model2",
                },
                r.loss,
                r.cd,
                r.emd
            ));
        }
        out
    }
}
