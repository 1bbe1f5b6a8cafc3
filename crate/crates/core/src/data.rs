//! IDX ingestion (MNIST / Fashion MNIST) and seeded training plans.
//!
//! IDX streams are big-endian: a 4-byte magic (`0x00000803` for 3-D unsigned
//! byte images, `0x00000801` for 1-D labels), one 4-byte count per dimension,
//! then the raw bytes. Gzip-framed streams are decompressed transparently.

use std::io::Read;
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Fashion MNIST category names in label order.
pub const FASHION_MNIST_CATEGORIES: [&str; 10] = [
    "T-Shirt",
    "Trouser",
    "Pullover",
    "Dress",
    "Coat",
    "Sandal",
    "Shirt",
    "Sneaker",
    "Bag",
    "Ankle Boot",
];

/// Decoded IDX image file: `count` images of `rows × cols` bytes, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }

    /// Image `i` as a `rows × cols` matrix.
    pub fn matrix(&self, i: usize) -> Vec<Vec<u8>> {
        self.image(i).chunks(self.cols).map(<[u8]>::to_vec).collect()
    }
}

fn maybe_gunzip(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::Idx(format!("gzip: {e}")))?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Idx(format!(
                "truncated {what}: need {n} bytes at offset {}, stream has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }
}

fn expect_magic(cur: &mut Cursor<'_>, want: u32) -> Result<()> {
    let magic = cur.u32("magic")?;
    if magic != want {
        return Err(Error::Idx(format!("magic {magic:#010x}, expected {want:#010x}")));
    }
    Ok(())
}

/// Decodes an IDX image stream.
pub fn load_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let bytes = maybe_gunzip(bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    expect_magic(&mut cur, IMAGES_MAGIC)?;
    let count = cur.u32("image count")? as usize;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| Error::Idx("image payload size overflows".into()))?;
    let pixels = cur.take(len, "image payload")?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Like [`load_idx_images`], additionally demanding a `rows × cols` shape.
pub fn load_idx_images_shaped(bytes: &[u8], rows: usize, cols: usize) -> Result<IdxImages> {
    let images = load_idx_images(bytes)?;
    if (images.rows, images.cols) != (rows, cols) {
        return Err(Error::Idx(format!(
            "images are {}x{}, expected {rows}x{cols}",
            images.rows, images.cols
        )));
    }
    Ok(images)
}

/// Decodes an IDX label stream.
pub fn load_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let bytes = maybe_gunzip(bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    expect_magic(&mut cur, LABELS_MAGIC)?;
    let count = cur.u32("label count")? as usize;
    Ok(cur.take(count, "label payload")?.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for x in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Labelled images, pixels stored as bytes and served scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pixels: Vec<u8>,
    input_size: usize,
    labels: Vec<usize>,
    num_categories: usize,
    category_index: Vec<Vec<usize>>,
}

impl Dataset {
    /// `pixels` holds `labels.len()` images of `input_size` bytes each.
    pub fn new(pixels: Vec<u8>, input_size: usize, labels: Vec<usize>, num_categories: usize) -> Result<Self> {
        if input_size == 0 || num_categories == 0 {
            return Err(Error::InvalidParameter(
                "dataset needs non-zero input size and categories".into(),
            ));
        }
        if pixels.len() != labels.len() * input_size {
            return Err(Error::DimensionMismatch {
                context: "dataset pixels",
                expected: labels.len() * input_size,
                actual: pixels.len(),
            });
        }
        let mut category_index = vec![Vec::new(); num_categories];
        for (i, &label) in labels.iter().enumerate() {
            if label >= num_categories {
                return Err(Error::InvalidParameter(format!(
                    "label {label} at position {i} is not below {num_categories}"
                )));
            }
            category_index[label].push(i);
        }
        Ok(Self {
            pixels,
            input_size,
            labels,
            num_categories,
            category_index,
        })
    }

    pub fn from_idx(images: &IdxImages, labels: &[u8], num_categories: usize) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "image/label count",
                expected: images.count,
                actual: labels.len(),
            });
        }
        Self::new(
            images.pixels.clone(),
            images.rows * images.cols,
            labels.iter().map(|&l| usize::from(l)).collect(),
            num_categories,
        )
    }

    /// Reads a pair of (optionally gzipped) IDX files.
    pub fn load(images: &Path, labels: &Path, num_categories: usize) -> Result<Self> {
        let imgs = load_idx_images(&read_file(images)?)?;
        let labs = load_idx_labels(&read_file(labels)?)?;
        Self::from_idx(&imgs, &labs, num_categories)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Positions of every image of category `c`, in file order.
    pub fn category(&self, c: usize) -> &[usize] {
        &self.category_index[c]
    }

    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.input_size..(i + 1) * self.input_size]
    }

    /// Image `i` scaled by 1/255.
    pub fn image(&self, i: usize) -> Vec<f64> {
        self.raw_image(i).iter().map(|&b| f64::from(b) / 255.0).collect()
    }

    /// New dataset made of the listed positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(positions.len() * self.input_size);
        let mut labels = Vec::with_capacity(positions.len());
        for &p in positions {
            if p >= self.len() {
                return Err(Error::InvalidParameter(format!("position {p} out of range")));
            }
            pixels.extend_from_slice(self.raw_image(p));
            labels.push(self.labels[p]);
        }
        Self::new(pixels, self.input_size, labels, self.num_categories)
    }

    /// Errors unless every category holds at least `n` images.
    pub fn require_per_category(&self, n: usize) -> Result<()> {
        for (c, idx) in self.category_index.iter().enumerate() {
            if idx.len() < n {
                return Err(Error::InsufficientData(format!(
                    "category {c} has {} images, {n} required",
                    idx.len()
                )));
            }
        }
        Ok(())
    }
}

/// Batch/epoch structure of a training run.
///
/// A batch holds `images_per_category_per_batch` images of every category;
/// each batch is swept `epochs_per_batch` times with one per-sample update per
/// image, so the defaults give 32 × 100 × 10 = 32,000 iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub n_batches: usize,
    pub epochs_per_batch: usize,
    pub images_per_category_per_batch: usize,
    /// Record a weight histogram every this many iterations.
    pub history_stride: usize,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            n_batches: 32,
            epochs_per_batch: 100,
            images_per_category_per_batch: 1,
            history_stride: 100,
        }
    }
}

impl TrainingSchedule {
    pub fn total_iterations(&self, categories: usize) -> usize {
        self.n_batches * self.epochs_per_batch * categories * self.images_per_category_per_batch
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_stride == 0 {
            return Err(Error::InvalidParameter("history_stride must be positive".into()));
        }
        Ok(())
    }
}

/// Ordered sample positions realizing a [`TrainingSchedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPlan {
    /// Images of each batch, grouped by category.
    pub batches: Vec<Vec<usize>>,
    /// Dataset position used at every iteration, in order.
    pub order: Vec<usize>,
}

impl TrainingPlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Builds the iteration plan: images are drawn per category without
/// replacement (no image appears in two batches), and every epoch presents its
/// batch in a fresh seeded permutation.
pub fn make_schedule(data: &Dataset, schedule: &TrainingSchedule, seed: u64) -> Result<TrainingPlan> {
    schedule.validate()?;
    let k = schedule.images_per_category_per_batch;
    let needed = schedule.n_batches * k;
    data.require_per_category(needed)?;
    let mut rng = rng::stream(seed, rng::SCHEDULE);

    let pools: Vec<Vec<usize>> = (0..data.num_categories())
        .map(|c| {
            let mut idx = data.category(c).to_vec();
            idx.shuffle(&mut rng);
            idx.truncate(needed);
            idx
        })
        .collect();

    let batches: Vec<Vec<usize>> = (0..schedule.n_batches)
        .map(|b| {
            pools
                .iter()
                .flat_map(|pool| pool[b * k..(b + 1) * k].iter().copied())
                .collect()
        })
        .collect();

    let mut order = Vec::with_capacity(schedule.total_iterations(data.num_categories()));
    for batch in &batches {
        for _ in 0..schedule.epochs_per_batch {
            let mut epoch = batch.clone();
            epoch.shuffle(&mut rng);
            order.extend(epoch);
        }
    }
    Ok(TrainingPlan { batches, order })
}
