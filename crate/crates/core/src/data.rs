//! Dataset ingestion: IDX files (MNIST, Fashion-MNIST) and synthetic blobs.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw image tensor as parsed from an IDX file, intensities scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f32>,
}

/// Labelled images, flattened row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub name: String,
    pub n_pixels: usize,
    pub n_classes: usize,
    pixels: Vec<f32>,
    labels: Vec<u8>,
}

impl ImageDataset {
    pub fn new(
        name: impl Into<String>,
        n_pixels: usize,
        n_classes: usize,
        pixels: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if n_pixels == 0 || n_classes == 0 {
            return Err(Error::InvalidConfig("dataset needs pixels and classes".into()));
        }
        if pixels.len() != labels.len() * n_pixels {
            return Err(Error::LengthMismatch { expected: labels.len() * n_pixels, actual: pixels.len() });
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("intensities must lie in [0, 1]".into()));
        }
        Ok(ImageDataset { name: name.into(), n_pixels, n_classes, pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.pixels[i * self.n_pixels..(i + 1) * self.n_pixels]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// First `n` samples (or all of them if fewer).
    pub fn take(&self, n: usize) -> ImageDataset {
        let n = n.min(self.len());
        ImageDataset {
            name: self.name.clone(),
            n_pixels: self.n_pixels,
            n_classes: self.n_classes,
            pixels: self.pixels[..n * self.n_pixels].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(format!("decompressing {}", path.display()), e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated { path: path.to_owned(), expected: offset + 4, actual: bytes.len() })
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::BadMagic { kind: "image", magic, path: path.to_owned() });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated { path: path.to_owned(), expected, actual: bytes.len() });
    }
    let pixels = bytes[16..expected].iter().map(|&b| b as f32 / 255.0).collect();
    Ok(IdxImages { count, rows, cols, pixels })
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::BadMagic { kind: "label", magic, path: path.to_owned() });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated { path: path.to_owned(), expected, actual: bytes.len() });
    }
    Ok(bytes[8..expected].to_vec())
}

/// Writes an uncompressed IDX image file from raw bytes.
pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let count = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    write_file(path, &out)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_file(path.as_ref(), &out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Loads one split (`"train"` or `"t10k"`) from an MNIST-style directory.
pub fn load_split(dir: impl AsRef<Path>, split: &str, n_classes: usize) -> Result<ImageDataset> {
    let dir = dir.as_ref();
    let images = load_idx_images(find_file(dir, &format!("{split}-images-idx3-ubyte"))?)?;
    let labels = load_idx_labels(find_file(dir, &format!("{split}-labels-idx1-ubyte"))?)?;
    if labels.len() != images.count {
        return Err(Error::LengthMismatch { expected: images.count, actual: labels.len() });
    }
    let name = dir
        .file_name()
        .map(|n| format!("{}/{split}", n.to_string_lossy()))
        .unwrap_or_else(|| split.to_string());
    ImageDataset::new(name, images.rows * images.cols, n_classes, images.pixels, labels)
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::io(
        format!("looking for {stem}[.gz] in {}", dir.display()),
        std::io::Error::from(std::io::ErrorKind::NotFound),
    ))
}

/// Gaussian clusters around random prototypes, clipped to `[0, 1]`.
pub fn synthetic_blobs(
    n_classes: usize,
    n_pixels: usize,
    samples_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<ImageDataset> {
    if n_classes == 0 || n_pixels == 0 || samples_per_class == 0 || spread < 0.0 || n_classes > 256 {
        return Err(Error::InvalidConfig("synthetic_blobs needs positive sizes and spread >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<f64>> =
        (0..n_classes).map(|_| (0..n_pixels).map(|_| rng.random::<f64>()).collect()).collect();
    let noise = Normal::new(0.0, spread.max(f64::MIN_POSITIVE)).expect("valid normal");
    let total = n_classes * samples_per_class;
    let mut pixels = Vec::with_capacity(total * n_pixels);
    let mut labels = Vec::with_capacity(total);
    // interleave classes so that any prefix is balanced
    for _ in 0..samples_per_class {
        for (c, proto) in prototypes.iter().enumerate() {
            for &p in proto {
                let v = if spread == 0.0 { p } else { p + noise.sample(&mut rng) };
                pixels.push(v.clamp(0.0, 1.0) as f32);
            }
            labels.push(c as u8);
        }
    }
    ImageDataset::new(format!("blobs-{n_classes}x{n_pixels}"), n_pixels, n_classes, pixels, labels)
}
