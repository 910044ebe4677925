//! File formats: measure manifests (JSON) with CSV payloads, series and
//! scan CSVs, and JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::WeightedCloud;
use crate::error::{Result, SotxError};
use crate::measures::{build_signed_measure, AtomSet, FractalPart, GridDensity, Sign, SignedComponent, SignedMeasure};
use crate::partition::{PartitionLabels, ScanRow};
use crate::presets::PresetInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridManifest {
    pub file: String,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsManifest {
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalManifest {
    pub file: String,
    pub ds: f64,
    pub density_bounds: (f64, f64),
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<GridManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomsManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractal: Option<FractalManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothed: Option<GridManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetInfo>,
    pub plus: ComponentManifest,
    pub minus: ComponentManifest,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// CSV with header `x1,...,xd,weight`.
pub fn write_cloud_csv(path: &Path, cloud: &WeightedCloud) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=cloud.dim).map(|k| format!("x{k}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (p, m) in cloud.points().zip(&cloud.weights) {
        let row: Vec<String> = p.iter().chain(std::iter::once(m)).map(|v| v.to_string()).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| SotxError::Invalid(format!("{}:{line}: '{s}' is not a number", path.display())))
}

pub fn read_cloud_csv(path: &Path, dim: usize) -> Result<WeightedCloud> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != dim + 1 {
        return Err(SotxError::Invalid(format!(
            "{}: expected {} columns (x1..x{dim},weight), found {}",
            path.display(),
            dim + 1,
            header.len()
        )));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        for c in 0..dim {
            coords.push(parse_f64(&rec[c], path, k + 2)?);
        }
        weights.push(parse_f64(&rec[dim], path, k + 2)?);
    }
    WeightedCloud::new(dim, coords, weights)
}

fn write_grid_csv(path: &Path, g: &GridDensity) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value"])?;
    for v in &g.values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_grid(dir: &Path, m: &GridManifest) -> Result<GridDensity> {
    let path = dir.join(&m.file);
    let mut r = csv::Reader::from_path(&path)?;
    let mut values = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(SotxError::Invalid(format!("{}:{}: expected one value", path.display(), k + 2)));
        }
        values.push(parse_f64(&rec[0], &path, k + 2)?);
    }
    GridDensity::new(m.origin.clone(), m.spacing.clone(), m.shape.clone(), values)
}

fn sign_key(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

/// Writes `<stem>.json` and one CSV per present part into `dir`.
pub fn write_measure(dir: &Path, stem: &str, m: &SignedMeasure, preset: Option<&PresetInfo>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let component = |s: Sign| -> Result<ComponentManifest> {
        let c = m.component(s);
        let name = |part: &str| format!("{stem}_{}_{part}.csv", sign_key(s));
        let grid = |g: &GridDensity, part: &str| -> Result<GridManifest> {
            let file = name(part);
            write_grid_csv(&dir.join(&file), g)?;
            Ok(GridManifest {
                file,
                origin: g.origin.clone(),
                spacing: g.spacing.clone(),
                shape: g.shape.clone(),
            })
        };
        let ac = c.ac.as_ref().map(|g| grid(g, "ac")).transpose()?;
        let smoothed = c.smoothed.as_ref().map(|g| grid(g, "smoothed")).transpose()?;
        let atoms = match &c.atoms {
            Some(a) => {
                let file = name("atoms");
                write_cloud_csv(&dir.join(&file), &a.cloud)?;
                Some(AtomsManifest { file })
            }
            None => None,
        };
        let fractal = match &c.fractal {
            Some(f) => {
                let file = name("fractal");
                write_cloud_csv(&dir.join(&file), &f.sample)?;
                Some(FractalManifest {
                    file,
                    ds: f.ds,
                    density_bounds: f.density_bounds,
                    label: f.label.clone(),
                })
            }
            None => None,
        };
        Ok(ComponentManifest {
            ac,
            atoms,
            fractal,
            smoothed,
        })
    };
    let manifest = Manifest {
        dim: m.dim,
        preset: preset.cloned(),
        plus: component(Sign::Plus)?,
        minus: component(Sign::Minus)?,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Reads a manifest and its CSV payloads (paths relative to the manifest).
pub fn read_measure(path: &Path) -> Result<(SignedMeasure, Manifest)> {
    let manifest: Manifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let d = manifest.dim;
    let component = |c: &ComponentManifest| -> Result<SignedComponent> {
        let mut out = SignedComponent::empty();
        if let Some(g) = &c.ac {
            out = out.with_ac(read_grid(dir, g)?);
        }
        if let Some(a) = &c.atoms {
            out = out.with_atoms(AtomSet::new(read_cloud_csv(&dir.join(&a.file), d)?)?);
        }
        if let Some(f) = &c.fractal {
            let sample = read_cloud_csv(&dir.join(&f.file), d)?;
            out = out.with_fractal(FractalPart::new(sample, f.ds, f.density_bounds, f.label.clone())?);
        }
        if let Some(g) = &c.smoothed {
            out.smoothed = Some(read_grid(dir, g)?);
        }
        Ok(out)
    };
    let m = build_signed_measure(component(&manifest.plus)?, component(&manifest.minus)?, d)?;
    Ok((m, manifest))
}

/// Single numeric column, with an optional non-numeric header line.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(SotxError::Invalid(format!(
                "{}:{}: expected a single column, found {}",
                path.display(),
                k + 1,
                rec.len()
            )));
        }
        match rec[0].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => {
                return Err(SotxError::Invalid(format!("{}:{}: non-finite value {v}", path.display(), k + 1)));
            }
            Err(_) if k == 0 => continue,
            Err(_) => {
                return Err(SotxError::Invalid(format!(
                    "{}:{}: '{}' is not a number",
                    path.display(),
                    k + 1,
                    &rec[0]
                )));
            }
        }
    }
    Ok(out)
}

/// `t,R,d_ST` rows; missing values are empty fields.
pub fn write_scan(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "R", "d_ST"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.t.to_string(), opt(r.r), opt(r.d_st)])?;
    }
    w.flush()?;
    Ok(())
}

/// Labels keyed by global source index.
pub fn labels_json(labels: &PartitionLabels) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = labels
        .labels
        .iter()
        .enumerate()
        .map(|(i, r)| (i.to_string(), serde_json::Value::String(r.name().to_string())))
        .collect();
    serde_json::Value::Object(map)
}
