//! TOML layout files.
//!
//! ```toml
//! name = "fig1"
//! arms = [
//!   [ { direction = [0.866025403784, 0.5, 0.0], fraction = 0.666666666667 },
//!     { direction = [0.0, -1.0, 0.0],           fraction = 0.333333333333 } ],
//!   [ { direction = [0.866025403784, -0.5, 0.0], fraction = 0.666666666667 },
//!     { direction = [0.0, 1.0, 0.0],             fraction = 0.333333333333 } ],
//! ]
//! ```
//!
//! The first arm is the upper one. Directions are normalized on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Layout, Segment};

/// Direction norms further than this from 1 produce a load warning.
pub const NORMALIZATION_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentEntry {
    direction: [f64; 3],
    fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutEntry {
    name: String,
    arms: Vec<Vec<SegmentEntry>>,
}

/// A parsed layout plus any non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedLayout {
    pub layout: Layout,
    pub warnings: Vec<String>,
}

fn build_arm(label: &str, entries: &[SegmentEntry], warnings: &mut Vec<String>) -> Result<Vec<Segment>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let norm = e.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::LayoutFile(format!("{label} arm segment {i}: direction has zero length")));
            }
            if (norm - 1.0).abs() > NORMALIZATION_WARNING {
                warnings.push(format!(
                    "{label} arm segment {i}: direction norm {norm:.9} normalized to 1"
                ));
            }
            Segment::new(e.direction.map(|x| x / norm), e.fraction)
                .map_err(|err| Error::LayoutFile(format!("{label} arm segment {i}: {err}")))
        })
        .collect()
}

pub fn parse_layout(text: &str) -> Result<LoadedLayout> {
    let entry: LayoutEntry = toml::from_str(text).map_err(|e| Error::LayoutFile(e.to_string()))?;
    if entry.arms.len() != 2 {
        return Err(Error::LayoutFile(format!("expected 2 arms, found {}", entry.arms.len())));
    }
    let mut warnings = Vec::new();
    let upper = build_arm("upper", &entry.arms[0], &mut warnings)?;
    let lower = build_arm("lower", &entry.arms[1], &mut warnings)?;
    let layout = Layout::new(entry.name, upper, lower).map_err(|e| Error::LayoutFile(e.to_string()))?;
    Ok(LoadedLayout { layout, warnings })
}

pub fn load_layout(path: &Path) -> Result<LoadedLayout> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::LayoutFile(format!("cannot read {}: {e}", path.display())))?;
    parse_layout(&text).map_err(|e| match e {
        Error::LayoutFile(msg) => Error::LayoutFile(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn layout_to_toml(layout: &Layout) -> String {
    let arm = |segments: &[Segment]| {
        segments
            .iter()
            .map(|s| SegmentEntry { direction: s.direction(), fraction: s.fraction() })
            .collect()
    };
    let entry = LayoutEntry {
        name: layout.name().to_string(),
        arms: vec![arm(layout.arm_upper()), arm(layout.arm_lower())],
    };
    toml::to_string(&entry).expect("layout serializes")
}
