use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor::{read_tensor, ActivationTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerInfo {
    pub id: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
}

impl LayerInfo {
    pub fn flattened_dim(&self) -> usize {
        self.d * self.m * self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: String,
    pub label: usize,
    /// layer id -> tensor path, relative to the manifest directory.
    pub tensors: BTreeMap<String, PathBuf>,
}

/// On-disk JSON description of a dataset of per-layer activation files.
///
/// Layers are listed in network order (input side first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub layers: Vec<LayerInfo>,
    pub samples: Vec<SampleEntry>,
    #[serde(skip)]
    root: PathBuf,
}

/// One problem found while checking a manifest against its tensor files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub sample: Option<String>,
    pub layer: Option<String>,
    pub path: Option<PathBuf>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}: ", p.display())?;
        }
        if let Some(s) = &self.sample {
            write!(f, "sample {s}: ")?;
        }
        if let Some(l) = &self.layer {
            write!(f, "layer {l}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl DatasetManifest {
    pub fn new(
        classes: Vec<String>,
        layers: Vec<LayerInfo>,
        samples: Vec<SampleEntry>,
        root: impl Into<PathBuf>,
    ) -> Result<Self> {
        let manifest = Self {
            classes,
            layers,
            samples,
            root: root.into(),
        };
        manifest.check_structure()?;
        Ok(manifest)
    }

    /// Parses and structurally validates a manifest. Tensor files are not opened.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        manifest.root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        manifest.check_structure()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn layer_index(&self, id: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    pub fn tensor_path(&self, sample: usize, layer: usize) -> PathBuf {
        let layer_id = &self.layers[layer].id;
        self.root.join(&self.samples[sample].tensors[layer_id])
    }

    /// Loads one layer's tensors for every sample, checking dims against the manifest.
    pub fn load_layer(&self, layer: usize) -> Result<Vec<ActivationTensor>> {
        let info = &self.layers[layer];
        (0..self.samples.len())
            .map(|s| {
                let path = self.tensor_path(s, layer);
                let t = read_tensor(&path)?;
                if t.dims() != (info.d, info.m, info.n) {
                    return Err(Error::Manifest(format!(
                        "{}: sample {} layer {}: dims {:?} do not match declared {}x{}x{}",
                        path.display(),
                        self.samples[s].id,
                        info.id,
                        t.dims(),
                        info.d,
                        info.m,
                        info.n
                    )));
                }
                Ok(t)
            })
            .collect()
    }

    fn check_structure(&self) -> Result<()> {
        let problems = self.structural_diagnostics();
        if problems.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = problems.iter().map(ToString::to_string).collect();
            Err(Error::Manifest(text.join("; ")))
        }
    }

    fn structural_diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let diag = |sample: Option<&str>, layer: Option<&str>, message: String| Diagnostic {
            sample: sample.map(str::to_owned),
            layer: layer.map(str::to_owned),
            path: None,
            message,
        };
        if self.classes.len() < 2 {
            out.push(diag(None, None, "need at least 2 classes".into()));
        }
        if self.layers.is_empty() {
            out.push(diag(None, None, "no layers declared".into()));
        }
        let mut seen_layers = std::collections::HashSet::new();
        for layer in &self.layers {
            if !seen_layers.insert(layer.id.as_str()) {
                out.push(diag(None, Some(&layer.id), "duplicate layer id".into()));
            }
            if layer.d == 0 || layer.m == 0 || layer.n == 0 {
                out.push(diag(None, Some(&layer.id), "zero dimension".into()));
            }
        }
        let mut seen_samples = std::collections::HashSet::new();
        let mut per_class = vec![0usize; self.classes.len()];
        for sample in &self.samples {
            if !seen_samples.insert(sample.id.as_str()) {
                out.push(diag(Some(&sample.id), None, "duplicate sample id".into()));
            }
            match per_class.get_mut(sample.label) {
                Some(count) => *count += 1,
                None => out.push(diag(
                    Some(&sample.id),
                    None,
                    format!(
                        "label {} out of range for {} classes",
                        sample.label,
                        self.classes.len()
                    ),
                )),
            }
            for layer in &self.layers {
                if !sample.tensors.contains_key(&layer.id) {
                    out.push(diag(Some(&sample.id), Some(&layer.id), "no tensor path".into()));
                }
            }
            for key in sample.tensors.keys() {
                if !seen_layers.contains(key.as_str()) {
                    out.push(diag(Some(&sample.id), Some(key), "undeclared layer".into()));
                }
            }
        }
        for (c, count) in per_class.iter().enumerate() {
            if *count < 2 {
                out.push(diag(
                    None,
                    None,
                    format!("class {:?} has {count} samples, need at least 2", self.classes[c]),
                ));
            }
        }
        out
    }

    /// Opens every tensor file and reports every problem found.
    pub fn validate_files(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (s, sample) in self.samples.iter().enumerate() {
            for (l, layer) in self.layers.iter().enumerate() {
                if !sample.tensors.contains_key(&layer.id) {
                    continue;
                }
                let path = self.tensor_path(s, l);
                let problem = match read_tensor(&path) {
                    Ok(t) if t.dims() == (layer.d, layer.m, layer.n) => None,
                    Ok(t) => Some(format!(
                        "dims {}x{}x{} do not match declared {}x{}x{}",
                        t.channels(),
                        t.height(),
                        t.width(),
                        layer.d,
                        layer.m,
                        layer.n
                    )),
                    Err(Error::Io { source, .. }) => Some(format!("cannot read: {source}")),
                    Err(e) => Some(e.to_string()),
                };
                if let Some(message) = problem {
                    out.push(Diagnostic {
                        sample: Some(sample.id.clone()),
                        layer: Some(layer.id.clone()),
                        path: Some(path),
                        message,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_store::write_tensor;

    fn fixture(dir: &Path) -> DatasetManifest {
        let layers = vec![LayerInfo {
            id: "fc".into(),
            d: 2,
            m: 1,
            n: 1,
        }];
        let mut samples = Vec::new();
        for i in 0..4 {
            let name = format!("s{i}.actv");
            let t = ActivationTensor::new(2, 1, 1, vec![i as f32, 1.0]).unwrap();
            write_tensor(&t, dir.join(&name)).unwrap();
            samples.push(SampleEntry {
                id: format!("s{i}"),
                label: i % 2,
                tensors: [("fc".to_string(), PathBuf::from(name))].into(),
            });
        }
        DatasetManifest::new(vec!["a".into(), "b".into()], layers, samples, dir).unwrap()
    }

    #[test]
    fn json_round_trip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let loaded = DatasetManifest::load(&path).unwrap();
        assert_eq!(loaded.samples, m.samples);
        assert!(loaded.validate_files().is_empty());
        assert_eq!(loaded.load_layer(0).unwrap()[3].values(), &[3.0, 1.0]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_labels() {
        let err = serde_json::from_str::<DatasetManifest>(
            r#"{"classes":[],"layers":[],"samples":[],"extra":1}"#,
        );
        assert!(err.is_err());

        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        m.samples[0].label = 7;
        assert!(m.check_structure().is_err());
    }

    #[test]
    fn singleton_class_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        m.samples.truncate(3);
        let err = m.check_structure().unwrap_err().to_string();
        assert!(err.contains("\"b\" has 1 samples"), "{err}");
    }

    #[test]
    fn validate_reports_missing_file_and_dim_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path());
        m.samples[1]
            .tensors
            .insert("fc".into(), PathBuf::from("missing.actv"));
        write_tensor(
            &ActivationTensor::new(3, 1, 1, vec![0.0; 3]).unwrap(),
            dir.path().join("s2.actv"),
        )
        .unwrap();
        let diags = m.validate_files();
        assert_eq!(diags.len(), 2);
        assert!(diags[0].to_string().contains("missing.actv"));
        assert_eq!(diags[1].sample.as_deref(), Some("s2"));
        assert_eq!(diags[1].layer.as_deref(), Some("fc"));
    }
}
