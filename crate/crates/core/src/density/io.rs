//! JSON density files.
//!
//! ```json
//! {"kind": "gaussian_mixture", "weights": [0.5, 0.5], "means": [[-3], [3]], "covariances": [[[1]], [[1]]]}
//! {"kind": "grid", "extent": [8.0], "points": [256], "values_file": "values.csv"}
//! ```
//!
//! Grid value files are row-major, either little-endian `f64` (`.bin`) or
//! text with values separated by commas, whitespace or newlines.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GaussianMixture, GridDensity, GridSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityFile {
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    },
    Grid {
        extent: Vec<f64>,
        points: Vec<usize>,
        values_file: PathBuf,
    },
}

/// A density loaded from disk.
#[derive(Debug, Clone)]
pub enum Density {
    Mixture(GaussianMixture),
    Grid(GridDensity),
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Mixture(m) => m.dim(),
            Density::Grid(g) => g.dims(),
        }
    }
}

impl DensityFile {
    pub fn from_mixture(m: &GaussianMixture) -> Self {
        DensityFile::GaussianMixture {
            weights: m.weights().to_vec(),
            means: m
                .components()
                .iter()
                .map(|c| c.mean().iter().copied().collect())
                .collect(),
            covariances: m
                .components()
                .iter()
                .map(|c| {
                    let n = c.dim();
                    (0..n)
                        .map(|i| (0..n).map(|j| c.covariance()[(i, j)]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Resolves the description; relative value paths are taken from `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Density> {
        match self {
            DensityFile::GaussianMixture {
                weights,
                means,
                covariances,
            } => Ok(Density::Mixture(GaussianMixture::from_parts(
                weights.clone(),
                means.clone(),
                covariances.clone(),
            )?)),
            DensityFile::Grid {
                extent,
                points,
                values_file,
            } => {
                let spec = GridSpec::new(points.clone(), extent.clone())?;
                let path = if values_file.is_absolute() {
                    values_file.clone()
                } else {
                    base_dir.join(values_file)
                };
                let values = read_values(&path)?;
                let d = GridDensity::new(spec, values)?.normalize()?;
                d.check_boundary()?;
                Ok(Density::Grid(d))
            }
        }
    }
}

pub fn load_density(path: &Path) -> Result<Density> {
    let text = fs::read_to_string(path)?;
    let file: DensityFile = serde_json::from_str(&text)?;
    file.resolve(path.parent().unwrap_or(Path::new(".")))
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = fs::read(path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse(format!(
                "{}: length {} is not a multiple of 8",
                path.display(),
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    } else {
        fs::read_to_string(path)?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: {t:?}: {e}", path.display())))
            })
            .collect()
    }
}

pub fn write_values_bin(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::discretize;

    #[test]
    fn mixture_file_round_trip() {
        let text = r#"{"kind": "gaussian_mixture", "weights": [0.5, 0.5],
                       "means": [[-3.0], [3.0]], "covariances": [[[1.0]], [[2.0]]]}"#;
        let f: DensityFile = serde_json::from_str(text).unwrap();
        let Density::Mixture(m) = f.resolve(Path::new(".")).unwrap() else {
            panic!("expected mixture")
        };
        assert_eq!(m.len(), 2);
        assert_eq!(DensityFile::from_mixture(&m), f);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"kind": "gaussian_mixture", "weights": [1.0], "means": [[0.0]],
                       "covariances": [[[1.0]]], "color": "red"}"#;
        assert!(serde_json::from_str::<DensityFile>(text).is_err());
    }

    #[test]
    fn grid_file_binary_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let d = discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, 64, 8.0).unwrap(),
        )
        .unwrap();
        write_values_bin(&dir.path().join("v.bin"), d.values()).unwrap();
        let csv: Vec<String> = d.values().iter().map(|v| format!("{v:e}")).collect();
        fs::write(dir.path().join("v.csv"), csv.join("\n")).unwrap();
        for name in ["v.bin", "v.csv"] {
            let spec_path = dir.path().join(format!("{name}.json"));
            fs::write(
                &spec_path,
                format!(r#"{{"kind": "grid", "extent": [8.0], "points": [64], "values_file": "{name}"}}"#),
            )
            .unwrap();
            let Density::Grid(g) = load_density(&spec_path).unwrap() else {
                panic!("expected grid")
            };
            for (a, b) in g.values().iter().zip(d.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
