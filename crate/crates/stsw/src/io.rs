//! File formats: point-cloud CSV, spherical-tree JSON, trajectory CSV,
//! and the run manifest that makes every CLI invocation replayable.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowRecord;
use crate::sphere::{norm, DiscreteMeasure, UnitVector};
use crate::tree::SphericalTree;

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::FileFormat {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Loads a point cloud: one row per support, `d+1` coordinate columns and
/// an optional trailing `weight` column (named in the header). Headerless
/// numeric files are accepted and read as coordinates with uniform
/// weights. Non-unit rows are renormalized with a logged warning; missing
/// weights mean uniform `1/n`; present weights are rescaled to sum to one.
pub fn load_point_cloud(path: &Path) -> Result<DiscreteMeasure> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let first = lines
        .next()
        .ok_or_else(|| format_err(path, "empty point-cloud file"))?;
    let first_fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let header_mode = first_fields
        .iter()
        .any(|f| f.parse::<f64>().is_err());
    let has_weight_col = header_mode
        && first_fields
            .last()
            .map(|f| f.eq_ignore_ascii_case("weight"))
            .unwrap_or(false);
    let width = first_fields.len();
    if header_mode && has_weight_col && width < 3 {
        return Err(format_err(path, "need at least 2 coordinate columns"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let data_lines: Box<dyn Iterator<Item = &str>> = if header_mode {
        Box::new(lines)
    } else {
        Box::new(std::iter::once(first).chain(lines))
    };
    for (idx, line) in data_lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(format_err(
                path,
                format!("row {} has {} fields, expected {width}", idx + 1, fields.len()),
            ));
        }
        let parsed = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| format_err(path, format!("bad number {f:?} in row {}", idx + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(format_err(path, "no data rows"));
    }

    let coord_cols = if has_weight_col { width - 1 } else { width };
    if coord_cols < 2 {
        return Err(format_err(path, "need at least 2 coordinate columns"));
    }
    let mut non_unit = 0usize;
    let mut supports = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for row in &rows {
        let coords = row[..coord_cols].to_vec();
        if (norm(&coords) - 1.0).abs() > 1e-12 {
            non_unit += 1;
        }
        supports.push(
            UnitVector::new(coords)
                .map_err(|e| format_err(path, format!("unusable support row: {e}")))?,
        );
        if has_weight_col {
            weights.push(row[coord_cols]);
        }
    }
    if non_unit > 0 {
        log::warn!(
            "{}: renormalized {non_unit} non-unit rows onto the sphere",
            path.display()
        );
    }

    if has_weight_col {
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(format_err(path, "weights must be finite and ≥ 0"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(format_err(path, "weights sum to 0"));
        }
        for w in &mut weights {
            *w /= total;
        }
        let corr = 1.0 - weights.iter().sum::<f64>();
        weights[0] += corr;
        DiscreteMeasure::new(supports, weights)
    } else {
        DiscreteMeasure::uniform(supports)
    }
}

/// Writes a point cloud with a header and explicit `weight` column.
pub fn save_point_cloud(path: &Path, measure: &DiscreteMeasure) -> Result<()> {
    let mut out = String::new();
    let ambient = measure.ambient_dim();
    for i in 0..ambient {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("weight\n");
    for (s, w) in measure.supports().iter().zip(measure.weights()) {
        for c in s.coords() {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{w}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    root: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

/// Serializes a tree as `{"root": [..], "directions": [[..], ..]}`.
pub fn tree_to_json(tree: &SphericalTree) -> String {
    let doc = TreeJson {
        root: tree.root().coords().to_vec(),
        directions: tree
            .directions()
            .iter()
            .map(|y| y.coords().to_vec())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("tree serialization")
}

/// Parses and revalidates a tree from its JSON form.
pub fn tree_from_json(text: &str) -> Result<SphericalTree> {
    let doc: TreeJson = serde_json::from_str(text)?;
    let root = UnitVector::new(doc.root)?;
    let directions = doc
        .directions
        .into_iter()
        .map(UnitVector::new)
        .collect::<Result<Vec<_>>>()?;
    SphericalTree::new(root, directions)
}

/// Writes a trajectory CSV: `epoch,stsw,log_w2,nll,wall_time_s`, with
/// empty cells on epochs that were not evaluated.
pub fn save_trajectory(path: &Path, records: &[FlowRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "epoch,stsw,log_w2,nll,wall_time_s")?;
    for r in records {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            f,
            "{},{},{},{},{}",
            r.epoch,
            r.stsw,
            opt(r.log_w2),
            opt(r.nll),
            r.wall_time_s
        )?;
    }
    Ok(())
}

/// Everything needed to replay a CLI run: the command, its full
/// configuration, the seed, the library version, the wall time, and the
/// paths written.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
