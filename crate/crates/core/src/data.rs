//! Binary datasets: IDX image files, binarization and plain 0/1 CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const DEFAULT_THRESHOLD: u8 = 128;

/// Byte-valued images read from an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub n_items: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major pixels, image after image.
    pub pixels: Vec<u8>,
    pub source_digest: String,
}

impl IdxImages {
    pub fn image(&self, k: usize) -> &[u8] {
        let size = self.n_rows * self.n_cols;
        &self.pixels[k * size..(k + 1) * size]
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(Error::Truncated {
            offset: bytes.len(),
            expected: offset + 4,
            actual: bytes.len(),
        }),
    }
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic {
            offset: 0,
            expected,
            found,
        });
    }
    Ok(())
}

fn read_dim(bytes: &[u8], offset: usize, name: &str) -> Result<usize> {
    let d = read_u32(bytes, offset)? as usize;
    if d == 0 {
        return Err(Error::IdxDimension {
            offset,
            msg: format!("{name} is zero"),
        });
    }
    Ok(d)
}

fn check_payload(bytes: &[u8], header: usize, payload: usize) -> Result<()> {
    let expected = header + payload;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            offset: bytes.len(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::IdxDimension {
            offset: expected,
            msg: format!(
                "{} trailing bytes after the declared {payload}-byte payload",
                bytes.len() - expected
            ),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n_items = read_dim(bytes, 4, "image count")?;
    let n_rows = read_dim(bytes, 8, "row count")?;
    let n_cols = read_dim(bytes, 12, "column count")?;
    let payload = n_items
        .checked_mul(n_rows)
        .and_then(|x| x.checked_mul(n_cols))
        .ok_or_else(|| Error::IdxDimension {
            offset: 4,
            msg: "declared size overflows".into(),
        })?;
    check_payload(bytes, 16, payload)?;
    Ok(IdxImages {
        n_items,
        n_rows,
        n_cols,
        pixels: bytes[16..].to_vec(),
        source_digest: sha256_hex(bytes),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n_items = read_dim(bytes, 4, "label count")?;
    check_payload(bytes, 8, n_items)?;
    Ok(bytes[8..].to_vec())
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&fs::read(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

/// Binary vectors packed one bit per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    n_items: usize,
    n_features: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    source_digest: String,
}

impl BinaryDataset {
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R], source_digest: String) -> Result<Self> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let words_per_row = n_features.div_ceil(64);
        let mut bits = vec![0u64; rows.len() * words_per_row];
        for (k, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    what: "dataset row",
                    expected: n_features,
                    actual: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => bits[k * words_per_row + j / 64] |= 1 << (j % 64),
                    _ => {
                        return Err(Error::Parse {
                            line: k + 1,
                            msg: format!("entry {j} is {x}, expected 0 or 1"),
                        })
                    }
                }
            }
        }
        Ok(Self {
            n_items: rows.len(),
            n_features,
            words_per_row,
            bits,
            source_digest,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.n_items == 0
    }

    /// SHA-256 of the raw source bytes.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    pub fn get(&self, k: usize, j: usize) -> u8 {
        (self.bits[k * self.words_per_row + j / 64] >> (j % 64) & 1) as u8
    }

    pub fn row_into(&self, k: usize, out: &mut [u8]) {
        let words = &self.bits[k * self.words_per_row..(k + 1) * self.words_per_row];
        for (j, x) in out.iter_mut().enumerate().take(self.n_features) {
            *x = (words[j / 64] >> (j % 64) & 1) as u8;
        }
    }

    pub fn row(&self, k: usize) -> Vec<u8> {
        let mut out = vec![0; self.n_features];
        self.row_into(k, &mut out);
        out
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        (0..self.n_items).map(|k| self.row(k))
    }

    pub fn select(&self, items: &[usize]) -> Vec<Vec<u8>> {
        items.iter().map(|&k| self.row(k)).collect()
    }

    /// `⟨v_j⟩` over items.
    pub fn feature_means(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_features];
        for k in 0..self.n_items {
            let words = &self.bits[k * self.words_per_row..(k + 1) * self.words_per_row];
            for (j, c) in counts.iter_mut().enumerate() {
                *c += (words[j / 64] >> (j % 64) & 1) as usize;
            }
        }
        counts
            .into_iter()
            .map(|c| c as f64 / self.n_items as f64)
            .collect()
    }

    /// Fraction of ones over all entries.
    pub fn mean_activity(&self) -> f64 {
        let ones: u64 = self.bits.iter().map(|w| u64::from(w.count_ones())).sum();
        ones as f64 / (self.n_items * self.n_features) as f64
    }

    /// One row per line, entries separated by commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n_items * (2 * self.n_features + 1));
        for row in self.rows() {
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push(if *x == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Pixels `≥ threshold` become 1.
pub fn binarize(images: &IdxImages, threshold: u8) -> BinaryDataset {
    let size = images.n_rows * images.n_cols;
    let rows: Vec<Vec<u8>> = (0..images.n_items)
        .map(|k| {
            images.pixels[k * size..(k + 1) * size]
                .iter()
                .map(|&p| u8::from(p >= threshold))
                .collect()
        })
        .collect();
    BinaryDataset::from_rows(&rows, images.source_digest.clone())
        .expect("binarized rows share one length")
}

/// Rows of 0/1 separated by commas or whitespace; blank lines and `#` comments are skipped.
pub fn parse_binary_csv(text: &str) -> Result<BinaryDataset> {
    let mut rows = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<u8> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 0 or 1, found {other:?}"),
                }),
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("row has {} entries, expected {w}", row.len()),
                })
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("dataset has no rows"));
    }
    BinaryDataset::from_rows(&rows, sha256_hex(text.as_bytes()))
}

/// Loads an IDX image file (binarized at `threshold`) or a 0/1 CSV, chosen by the leading
/// magic number.
pub fn load_dataset(path: impl AsRef<Path>, threshold: u8) -> Result<BinaryDataset> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 4 && read_u32(&bytes, 0)? == IDX_IMAGES_MAGIC {
        return Ok(binarize(&parse_idx_images(&bytes)?, threshold));
    }
    if bytes.len() >= 4 && read_u32(&bytes, 0)? == IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            offset: 0,
            expected: IDX_IMAGES_MAGIC,
            found: IDX_LABELS_MAGIC,
        });
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("neither IDX nor UTF-8 text: {e}"),
    })?;
    parse_binary_csv(&text)
}
