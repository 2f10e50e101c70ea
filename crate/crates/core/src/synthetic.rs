//! Seeded class-separated Gaussian activations for fixtures and demos.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::eval::InMemoryDataset;
use crate::tensor_store::{write_tensor, ActivationTensor, DatasetManifest, LayerInfo, SampleEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub layers: Vec<LayerInfo>,
    /// Added to every value of the channels belonging to a sample's class.
    pub separation: f32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 3 classes of 20 samples over three small layers, 5 sigma apart, seed 1.
    fn default() -> Self {
        let layer = |id: &str, d, m, n| LayerInfo {
            id: id.into(),
            d,
            m,
            n,
        };
        Self {
            classes: 3,
            per_class: 20,
            layers: vec![layer("l1", 6, 4, 4), layer("l2", 6, 3, 3), layer("l3", 12, 1, 1)],
            separation: 5.0,
            seed: 1,
        }
    }
}

/// Standard normal noise; channel `ch` of a class-`c` sample is shifted by `separation`
/// when `ch % classes == c`.
pub fn generate(spec: &SyntheticSpec) -> Result<InMemoryDataset> {
    if spec.classes < 2 || spec.per_class < 2 {
        return Err(Error::argument("need at least 2 classes of 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut tensors: Vec<Vec<ActivationTensor>> = vec![Vec::new(); spec.layers.len()];
    for c in 0..spec.classes {
        for i in 0..spec.per_class {
            ids.push(format!("c{c}_{i:03}"));
            labels.push(c);
            for (l, info) in spec.layers.iter().enumerate() {
                let map = info.m * info.n;
                let values: Vec<f32> = (0..info.d * map)
                    .map(|k| {
                        let noise: f32 = StandardNormal.sample(&mut rng);
                        if (k / map) % spec.classes == c {
                            noise + spec.separation
                        } else {
                            noise
                        }
                    })
                    .collect();
                tensors[l].push(ActivationTensor::new(info.d, info.m, info.n, values)?);
            }
        }
    }
    InMemoryDataset::new(spec.classes, spec.layers.clone(), ids, labels, tensors)
}

/// Writes `tensors/<sample>_<layer>.actv` files and `manifest.json` under `dir`.
pub fn write_dataset(data: &InMemoryDataset, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let tensor_dir = dir.join("tensors");
    fs::create_dir_all(&tensor_dir).map_err(|e| Error::io(&tensor_dir, e))?;
    let mut samples = Vec::with_capacity(data.sample_ids.len());
    for (s, id) in data.sample_ids.iter().enumerate() {
        let mut paths = std::collections::BTreeMap::new();
        for (l, info) in data.layers.iter().enumerate() {
            let rel = PathBuf::from("tensors").join(format!("{id}_{}.actv", info.id));
            write_tensor(&data.tensors[l][s], dir.join(&rel))?;
            paths.insert(info.id.clone(), rel);
        }
        samples.push(SampleEntry {
            id: id.clone(),
            label: data.labels[s],
            tensors: paths,
        });
    }
    let classes = (0..data.classes).map(|c| format!("class{c}")).collect();
    let manifest = DatasetManifest::new(classes, data.layers.clone(), samples, dir)?;
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}
