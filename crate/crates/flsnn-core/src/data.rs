//! Dataset ingestion (IDX, CIFAR-10 binary), synthetic generation, IID
//! partitioning and batch iteration.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::S;

/// Samples in `[0,1]`, one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `[n, features]`
    pub samples: Tensor<S>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.samples.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.rows() != self.labels.len() {
            return Err(Error::shape(format!(
                "{} samples vs {} labels",
                self.samples.rows(),
                self.labels.len()
            )));
        }
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= self.class_count {
                return Err(Error::input(format!(
                    "label {l} at row {i} >= class count {}",
                    self.class_count
                )));
            }
        }
        Ok(())
    }

    /// Rows `indices` as a `[len, features]` batch plus labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<S>, Vec<usize>) {
        let f = self.features();
        let mut data = Vec::with_capacity(indices.len() * f);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.samples.row(i));
            labels.push(self.labels[i]);
        }
        (
            Tensor::from_vec(&[indices.len(), f], data).expect("gather shape"),
            labels,
        )
    }

    /// First `n` rows.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        let (samples, labels) = self.gather(&idx);
        Dataset { samples, labels, class_count: self.class_count }
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], off: usize, what: &str) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format(format!("{what}: truncated at byte {off}")))
}

/// Load an MNIST-style IDX image/label file pair; pixels scaled to `[0,1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = fs::read(images_path)?;
    let lab = fs::read(labels_path)?;

    let magic = be_u32(&img, 0, "idx images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "idx images: bad magic {magic:#010x}, want {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = be_u32(&img, 4, "idx images")? as usize;
    let rows = be_u32(&img, 8, "idx images")? as usize;
    let cols = be_u32(&img, 12, "idx images")? as usize;
    let features = rows * cols;
    let expect = 16 + n * features;
    if img.len() != expect {
        return Err(Error::Format(format!(
            "idx images: expected {expect} bytes ({n} x {rows}x{cols}), got {}",
            img.len()
        )));
    }

    let lmagic = be_u32(&lab, 0, "idx labels")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "idx labels: bad magic {lmagic:#010x}, want {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let ln = be_u32(&lab, 4, "idx labels")? as usize;
    if lab.len() != 8 + ln {
        return Err(Error::Format(format!(
            "idx labels: expected {} bytes, got {}",
            8 + ln,
            lab.len()
        )));
    }
    if ln != n {
        return Err(Error::Format(format!("{n} images vs {ln} labels")));
    }

    let data: Vec<S> = img[16..].iter().map(|&b| b as S / 255.0).collect();
    let labels: Vec<usize> = lab[8..].iter().map(|&b| b as usize).collect();
    let ds = Dataset {
        samples: Tensor::from_vec(&[n, features], data)?,
        labels,
        class_count: 10,
    };
    ds.validate()?;
    Ok(ds)
}

const CIFAR_RECORD: usize = 1 + 3072;

/// Load CIFAR-10 binary batch files (1 label byte + 3072 pixel bytes per
/// record), flattened to 3072 features in `[0,1]`.
pub fn load_cifar10_binary(batch_files: &[impl AsRef<Path>]) -> Result<Dataset> {
    let mut data: Vec<S> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for path in batch_files {
        let bytes = fs::read(path.as_ref())?;
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::Format(format!(
                "{}: size {} is not a multiple of {CIFAR_RECORD}",
                path.as_ref().display(),
                bytes.len()
            )));
        }
        if bytes.is_empty() {
            eprintln!("warning: empty CIFAR-10 batch {}", path.as_ref().display());
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(record[0] as usize);
            data.extend(record[1..].iter().map(|&b| b as S / 255.0));
        }
    }
    let n = labels.len();
    let ds = Dataset {
        samples: Tensor::from_vec(&[n, 3072], data)?,
        labels,
        class_count: 10,
    };
    ds.validate()?;
    Ok(ds)
}

/// Class-conditional Gaussian blobs clipped to `[0,1]`, class-balanced.
///
/// Each class gets a random center in `[0,1]^features`; samples are the
/// center plus isotropic noise whose scale shrinks as `separation` grows.
/// `separation = 0` collapses every class onto the same distribution.
pub fn make_synthetic(
    classes: usize,
    features: usize,
    n: usize,
    separation: f64,
    rng: &mut impl Rng,
) -> Dataset {
    assert!(n >= classes, "need at least one sample per class");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..features).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let common: Vec<f64> = (0..features).map(|_| rng.random_range(0.0..1.0)).collect();
    let noise_scale = 0.5 / (1.0 + separation);
    let mut data = Vec::with_capacity(n * features);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        // separation blends the class center with one shared center
        let blend = separation / (1.0 + separation);
        for f in 0..features {
            let center = blend * centers[class][f] + (1.0 - blend) * common[f];
            let v: f64 = center + noise_scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
            data.push(v.clamp(0.0, 1.0));
        }
        labels.push(class);
    }
    Dataset {
        samples: Tensor::from_vec(&[n, features], data).expect("synthetic shape"),
        labels,
        class_count: classes,
    }
}

/// Per-client disjoint index lists covering `floor(n/|C|) * |C|` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub client_indices: Vec<Vec<usize>>,
    /// Samples dropped to keep the split exactly equal.
    pub dropped: usize,
}

/// Uniform shuffle by seed, then equal contiguous slices; the remainder
/// `n mod |C|` is dropped.
pub fn partition_iid(ds: &Dataset, num_clients: usize, rng: &mut impl Rng) -> Partition {
    assert!(num_clients >= 1);
    let n = ds.len();
    let per = n / num_clients;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let client_indices = (0..num_clients)
        .map(|c| order[c * per..(c + 1) * per].to_vec())
        .collect();
    Partition { client_indices, dropped: n - per * num_clients }
}
