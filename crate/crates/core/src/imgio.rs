//! PGM (Netpbm graymap) I/O, ground-truth masks and dataset enlargement.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::types::{GrayImage, LabelMap};

/// Tissue classes of a ground-truth directory, in label order.
pub const CLASS_NAMES: [&str; 4] = ["background", "csf", "gm", "wm"];

/// A decoded PGM raster with its declared maxval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub raster: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Plain,
    Raw,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, maxval: u16, raster: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::MalformedHeader(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if maxval == 0 {
            return Err(Error::MalformedHeader("maxval must be at least 1".into()));
        }
        if raster.len() != width * height {
            return Err(Error::TruncatedRaster {
                expected: width * height,
                found: raster.len(),
            });
        }
        if let Some(&v) = raster.iter().find(|&&v| v > maxval) {
            return Err(Error::SampleOutOfRange {
                value: v.into(),
                maxval,
            });
        }
        Ok(Self {
            width,
            height,
            maxval,
            raster,
        })
    }

    /// Parses a P2 (plain) or P5 (raw) graymap. Trailing data after the first
    /// image is ignored.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let encoding = match bytes.get(..2) {
            Some(b"P2") => Encoding::Plain,
            Some(b"P5") => Encoding::Raw,
            Some(m) => return Err(Error::UnsupportedMagic(String::from_utf8_lossy(m).into_owned())),
            None => return Err(Error::UnsupportedMagic(String::from_utf8_lossy(bytes).into_owned())),
        };
        let mut cursor = Cursor { bytes, pos: 2 };
        if !cursor.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            return Err(Error::MalformedHeader("missing whitespace after magic number".into()));
        }
        let width = cursor.header_field("width")?;
        let height = cursor.header_field("height")?;
        let maxval = cursor.header_field("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::MalformedHeader(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let maxval = u16::try_from(maxval)
            .ok()
            .filter(|&m| m > 0)
            .ok_or_else(|| Error::MalformedHeader(format!("maxval {maxval} not in 1..=65535")))?;
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::MalformedHeader(format!("{width}x{height} overflows")))?;

        let raster = match encoding {
            Encoding::Raw => {
                // exactly one whitespace byte separates the header from the raster
                match cursor.peek() {
                    Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
                    _ => {
                        return Err(Error::MalformedHeader(
                            "missing whitespace after maxval".into(),
                        ))
                    }
                }
                let data = &bytes[cursor.pos..];
                if maxval < 256 {
                    if data.len() < expected {
                        return Err(Error::TruncatedRaster {
                            expected,
                            found: data.len(),
                        });
                    }
                    data[..expected].iter().map(|&b| u16::from(b)).collect()
                } else {
                    if data.len() < 2 * expected {
                        return Err(Error::TruncatedRaster {
                            expected,
                            found: data.len() / 2,
                        });
                    }
                    data[..2 * expected]
                        .chunks_exact(2)
                        .map(|p| u16::from_be_bytes([p[0], p[1]]))
                        .collect()
                }
            }
            Encoding::Plain => {
                let mut raster = Vec::with_capacity(expected);
                while raster.len() < expected {
                    match cursor.number()? {
                        Some(v) => {
                            let v = u16::try_from(v)
                                .map_err(|_| Error::SampleOutOfRange {
                                    value: u32::try_from(v).unwrap_or(u32::MAX),
                                    maxval,
                                })?;
                            raster.push(v);
                        }
                        None => {
                            return Err(Error::TruncatedRaster {
                                expected,
                                found: raster.len(),
                            })
                        }
                    }
                }
                raster
            }
        };
        Self::new(width, height, maxval, raster)
    }

    /// Serializes as raw P5; samples take two big-endian bytes when maxval
    /// exceeds 255.
    pub fn encode(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval);
        let wide = self.maxval > 255;
        let mut out = Vec::with_capacity(header.len() + self.raster.len() * if wide { 2 } else { 1 });
        out.extend_from_slice(header.as_bytes());
        if wide {
            for v in &self.raster {
                out.extend_from_slice(&v.to_be_bytes());
            }
        } else {
            out.extend(self.raster.iter().map(|&v| v as u8));
        }
        out
    }

    /// Serializes as plain P2, at most 16 samples per line.
    pub fn encode_plain(&self) -> Vec<u8> {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
        for line in self.raster.chunks(16) {
            let strs: Vec<String> = line.iter().map(u16::to_string).collect();
            out.push_str(&strs.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::new(
            self.width,
            self.height,
            self.raster.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("a valid PGM is a valid gray image")
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and `#` comments, then reads an unsigned decimal.
    /// Returns `None` at end of input.
    fn number(&mut self) -> Result<Option<u64>> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while self.peek().is_some_and(|b| b != b'\n' && b != b'\r') {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.peek() {
                None => Ok(None),
                Some(b) => Err(Error::MalformedHeader(format!(
                    "unexpected byte {:?} at offset {}",
                    char::from(b),
                    self.pos
                ))),
            };
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        digits
            .parse()
            .map(Some)
            .map_err(|_| Error::MalformedHeader(format!("number {digits} is too large")))
    }

    fn header_field(&mut self, name: &str) -> Result<usize> {
        match self.number() {
            Ok(Some(v)) => usize::try_from(v)
                .map_err(|_| Error::MalformedHeader(format!("{name} {v} is too large"))),
            Ok(None) => Err(Error::MalformedHeader(format!("missing {name}"))),
            Err(Error::MalformedHeader(msg)) => {
                Err(Error::MalformedHeader(format!("bad {name}: {msg}")))
            }
            Err(e) => Err(e),
        }
    }
}

/// Anything that can be exported as a graymap.
pub trait ToPgm {
    fn to_pgm(&self) -> Result<PgmImage>;
}

impl ToPgm for GrayImage {
    /// Intensities are rounded to the nearest integer and clamped to
    /// `0..=65535`; maxval is 255 when every sample fits in a byte.
    fn to_pgm(&self) -> Result<PgmImage> {
        let raster: Vec<u16> = self
            .pixels()
            .iter()
            .map(|&x| x.round().clamp(0.0, f64::from(u16::MAX)) as u16)
            .collect();
        let maxval = if raster.iter().all(|&v| v <= 255) { 255 } else { u16::MAX };
        PgmImage::new(self.width(), self.height(), maxval, raster)
    }
}

/// Gray level used for label `j` of a `clusters`-class map.
pub fn label_intensity(j: usize, clusters: usize) -> u16 {
    (j * 255 / (clusters - 1)) as u16
}

impl ToPgm for LabelMap {
    /// Label `j` becomes `floor(j * 255 / (c - 1))`.
    fn to_pgm(&self) -> Result<PgmImage> {
        let c = self.clusters();
        if c < 2 {
            return Err(Error::InvalidConfig(format!(
                "label maps need at least 2 clusters to export, got {c}"
            )));
        }
        let raster = self.labels().iter().map(|&l| label_intensity(l, c)).collect();
        PgmImage::new(self.width(), self.height(), 255, raster)
    }
}

pub fn read_pgm_raw(path: impl AsRef<Path>) -> Result<PgmImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    PgmImage::decode(&bytes)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(read_pgm_raw(path)?.to_gray())
}

pub fn write_pgm(img: &impl ToPgm, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, img.to_pgm()?.encode()).map_err(|e| Error::io(path, e))
}

/// Reads a label map written by [`write_pgm`], mapping each gray level back
/// to the nearest label level.
pub fn read_label_map(path: impl AsRef<Path>, clusters: usize) -> Result<LabelMap> {
    if clusters < 2 {
        return Err(Error::InvalidConfig(format!(
            "label maps need at least 2 clusters, got {clusters}"
        )));
    }
    let pgm = read_pgm_raw(path)?;
    let scale = 255.0 / f64::from(pgm.maxval);
    let levels: Vec<f64> = (0..clusters)
        .map(|j| f64::from(label_intensity(j, clusters)))
        .collect();
    let labels = pgm
        .raster
        .iter()
        .map(|&v| {
            let g = f64::from(v) * scale;
            let mut best = 0;
            for (j, level) in levels.iter().enumerate() {
                if (g - level).abs() < (g - levels[best]).abs() {
                    best = j;
                }
            }
            best
        })
        .collect();
    LabelMap::new(pgm.width, pgm.height, clusters, labels)
}

/// Row-major position of `(row, col)`.
pub fn flatten_index(row: usize, col: usize, width: usize, height: usize) -> Result<usize> {
    if row >= height || col >= width {
        return Err(Error::OutOfBounds {
            row,
            col,
            width,
            height,
        });
    }
    Ok(row * width + col)
}

/// Position of `u[pixel][cluster]` in a flat membership buffer.
pub fn membership_index(pixel: usize, cluster: usize, clusters: usize) -> usize {
    pixel * clusters + cluster
}

/// Tiles whole copies of `img` until it holds at least `target_bytes` pixels
/// (one byte per pixel).
///
/// The tile count is the smallest that reaches the target, arranged as
/// `rows x cols` with `cols` the smallest divisor of the count that is at
/// least its square root.
pub fn enlarge_dataset(img: &GrayImage, target_bytes: usize) -> GrayImage {
    let tiles = target_bytes.div_ceil(img.len()).max(1);
    let cols = (1..=tiles)
        .find(|&d| tiles.is_multiple_of(d) && d * d >= tiles)
        .expect("tiles divides itself");
    let rows = tiles / cols;
    if tiles == 1 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let mut pixels = Vec::with_capacity(img.len() * tiles);
    for _ in 0..rows {
        for src_row in img.pixels().chunks_exact(w) {
            for _ in 0..cols {
                pixels.extend_from_slice(src_row);
            }
        }
    }
    GrayImage::new(w * cols, h * rows, pixels).expect("tiling preserves validity")
}

/// Per-class ground-truth masks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub masks: BTreeMap<String, BinaryMask>,
    /// Non-fatal problems found while loading, such as overlapping masks.
    pub warnings: Vec<String>,
}

impl GroundTruth {
    /// Builds a label map with class `CLASS_NAMES[k]` as label `k`. A pixel
    /// claimed by several masks takes the first in that order; unclaimed
    /// pixels become background.
    pub fn reference_labels(&self) -> Result<LabelMap> {
        let first = self
            .masks
            .values()
            .next()
            .ok_or_else(|| Error::InvalidImage("ground truth has no masks".into()))?;
        let (w, h) = (first.width(), first.height());
        let mut labels = vec![0usize; w * h];
        for (k, name) in CLASS_NAMES.iter().enumerate().rev() {
            if let Some(mask) = self.masks.get(*name) {
                for (l, &b) in labels.iter_mut().zip(mask.bits()) {
                    if b {
                        *l = k;
                    }
                }
            }
        }
        LabelMap::new(w, h, CLASS_NAMES.len(), labels)
    }
}

/// Loads `<dir>/{background,csf,gm,wm}.pgm`. A pixel is in a class when its
/// value exceeds half the file's maxval.
pub fn read_ground_truth(dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let mut masks = BTreeMap::new();
    let mut shape = None;
    for name in CLASS_NAMES {
        let path = dir.join(format!("{name}.pgm"));
        if !path.is_file() {
            return Err(Error::MissingClass {
                class: name.to_string(),
                path,
            });
        }
        let pgm = read_pgm_raw(&path)?;
        match shape {
            None => shape = Some((pgm.width, pgm.height)),
            Some(s) if s != (pgm.width, pgm.height) => {
                return Err(Error::DimensionMismatch(format!(
                    "{name} mask is {}x{} but earlier masks are {}x{}",
                    pgm.width, pgm.height, s.0, s.1
                )));
            }
            Some(_) => {}
        }
        let bits = pgm
            .raster
            .iter()
            .map(|&v| 2 * u32::from(v) > u32::from(pgm.maxval))
            .collect();
        masks.insert(name.to_string(), BinaryMask::new(pgm.width, pgm.height, bits)?);
    }

    let mut warnings = Vec::new();
    let names: Vec<&String> = masks.keys().collect();
    for (a, name_a) in names.iter().enumerate() {
        for name_b in &names[a + 1..] {
            let shared = masks[*name_a]
                .bits()
                .iter()
                .zip(masks[*name_b].bits())
                .filter(|(x, y)| **x && **y)
                .count();
            if shared > 0 {
                let msg = format!("{name_a} and {name_b} masks share {shared} pixels");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    Ok(GroundTruth { masks, warnings })
}

/// Writes each mask as a 0/255 graymap named after its class.
pub fn write_ground_truth(truth: &GroundTruth, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, mask) in &truth.masks {
        let raster = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
        let pgm = PgmImage::new(mask.width(), mask.height(), 255, raster)?;
        let path = dir.join(format!("{name}.pgm"));
        fs::write(&path, pgm.encode()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// A noisy axial-slice phantom with nested elliptical background, CSF, gray
/// matter and white matter regions, and its exact ground truth.
pub fn synthetic_phantom(width: usize, height: usize, seed: u64) -> Result<(GrayImage, GroundTruth)> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    // outer radius (fraction of the half-extent) and mean intensity per class
    const SHELLS: [(f64, f64); 3] = [(0.9, 45.0), (0.75, 110.0), (0.45, 185.0)];
    const BACKGROUND: f64 = 8.0;
    const NOISE: f64 = 12.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let (rx, ry) = ((width as f64 / 2.0).max(1.0), (height as f64 / 2.0).max(1.0));
    let mut pixels = Vec::with_capacity(width * height);
    let mut class_bits = vec![vec![false; width * height]; CLASS_NAMES.len()];
    for row in 0..height {
        for col in 0..width {
            let dx = (col as f64 - cx) / rx;
            let dy = (row as f64 - cy) / ry;
            let r = (dx * dx + dy * dy).sqrt();
            let mut class = 0;
            let mut mean = BACKGROUND;
            for (k, &(radius, level)) in SHELLS.iter().enumerate() {
                if r <= radius {
                    class = k + 1;
                    mean = level;
                }
            }
            let noise = rng.gen_range(-NOISE..=NOISE);
            pixels.push((mean + noise).round().clamp(0.0, 255.0));
            class_bits[class][row * width + col] = true;
        }
    }
    let masks = CLASS_NAMES
        .iter()
        .zip(class_bits)
        .map(|(name, bits)| Ok((name.to_string(), BinaryMask::new(width, height, bits)?)))
        .collect::<Result<_>>()?;
    Ok((
        GrayImage::new(width, height, pixels)?,
        GroundTruth {
            masks,
            warnings: Vec::new(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_example() {
        let pgm = PgmImage::decode(b"P2\n# a comment\n2 2\n255\n0 10\n20 30\n").unwrap();
        assert_eq!(pgm.to_gray().pixels(), &[0.0, 10.0, 20.0, 30.0]);
        assert_eq!((pgm.width, pgm.height, pgm.maxval), (2, 2, 255));
    }

    #[test]
    fn raw_matches_plain() {
        let mut raw = b"P5 2 # width\n2 255\n".to_vec();
        raw.extend_from_slice(&[0, 10, 20, 30]);
        let a = PgmImage::decode(&raw).unwrap();
        let b = PgmImage::decode(b"P2 2 2 255 0 10 20 30").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sixteen_bit_raw_is_big_endian() {
        let mut raw = b"P5\n2 1\n65535\n".to_vec();
        raw.extend_from_slice(&[0x01, 0x02, 0xff, 0xfe]);
        let pgm = PgmImage::decode(&raw).unwrap();
        assert_eq!(pgm.raster, vec![0x0102, 0xfffe]);
        assert_eq!(PgmImage::decode(&pgm.encode()).unwrap(), pgm);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(PgmImage::decode(b"P6\n1 1\n255\n\0\0\0"), Err(Error::UnsupportedMagic(_))));
        assert!(matches!(PgmImage::decode(b""), Err(Error::UnsupportedMagic(_))));
        assert!(matches!(PgmImage::decode(b"P5\n2 x\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(PgmImage::decode(b"P5\n2 2\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(PgmImage::decode(b"P5\n0 2\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(PgmImage::decode(b"P5\n1 1\n70000\n\0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            PgmImage::decode(b"P5\n2 2\n255\n\x01\x02"),
            Err(Error::TruncatedRaster { expected: 4, found: 2 })
        ));
        assert!(matches!(
            PgmImage::decode(b"P2\n2 2\n255\n1 2 3"),
            Err(Error::TruncatedRaster { expected: 4, found: 3 })
        ));
        assert!(matches!(
            PgmImage::decode(b"P2\n1 1\n100\n200"),
            Err(Error::SampleOutOfRange { value: 200, maxval: 100 })
        ));
    }

    #[test]
    fn label_levels() {
        let two = LabelMap::new(2, 1, 2, vec![0, 1]).unwrap();
        assert_eq!(two.to_pgm().unwrap().raster, vec![0, 255]);
        let four = LabelMap::new(4, 1, 4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(four.to_pgm().unwrap().raster, vec![0, 85, 170, 255]);
        let three = LabelMap::new(3, 1, 3, vec![0, 1, 2]).unwrap();
        assert_eq!(three.to_pgm().unwrap().raster, vec![0, 127, 255]);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(3, 2, vec![0.0, 1.0, 2.0, 250.0, 255.0, 7.0]).unwrap();
        let path = dir.path().join("a.pgm");
        write_pgm(&img, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);

        let labels = LabelMap::new(3, 2, 4, vec![0, 1, 2, 3, 3, 0]).unwrap();
        let path = dir.path().join("labels.pgm");
        write_pgm(&labels, &path).unwrap();
        assert_eq!(read_label_map(&path, 4).unwrap(), labels);

        assert!(matches!(read_pgm(dir.path().join("missing.pgm")), Err(Error::Io { .. })));
    }

    #[test]
    fn flatten_examples() {
        assert_eq!(flatten_index(2, 3, 10, 5).unwrap(), 23);
        assert_eq!(flatten_index(0, 0, 10, 5).unwrap(), 0);
        assert!(matches!(flatten_index(5, 0, 10, 5), Err(Error::OutOfBounds { .. })));
        assert!(flatten_index(0, 10, 10, 5).is_err());
        assert_eq!(membership_index(3, 2, 4), 14);
    }

    #[test]
    fn flatten_is_a_bijection() {
        let (w, h) = (7, 5);
        let mut seen = vec![false; w * h];
        for r in 0..h {
            for c in 0..w {
                let k = flatten_index(r, c, w, h).unwrap();
                assert!(!std::mem::replace(&mut seen[k], true));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn enlarge_square() {
        let img = GrayImage::new(100, 100, (0..10_000).map(|i| (i % 256) as f64).collect()).unwrap();
        let big = enlarge_dataset(&img, 40_000);
        assert_eq!((big.width(), big.height()), (200, 200));
        assert_eq!(enlarge_dataset(&img, 10_000), img);
        assert_eq!(enlarge_dataset(&img, 5_000), img);
    }

    #[test]
    fn enlarge_tiles_whole_copies() {
        let img = GrayImage::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let big = enlarge_dataset(&img, 6 * 8);
        assert_eq!((big.width(), big.height()), (12, 4));
        for r in 0..big.height() {
            for c in 0..big.width() {
                let src = img.pixels()[(r % 2) * 3 + c % 3];
                assert_eq!(big.pixels()[r * big.width() + c], src);
            }
        }
        let prime = enlarge_dataset(&img, 6 * 5);
        assert_eq!((prime.width(), prime.height()), (15, 2));
    }

    #[test]
    fn enlarge_scales_histogram() {
        let img = GrayImage::new(5, 3, (0..15).map(|i| ((i * 7) % 4) as f64).collect()).unwrap();
        let big = enlarge_dataset(&img, 100);
        let tiles = big.len() / img.len();
        assert_eq!(tiles, 7);
        // histogram oracle: count every intensity value independently
        let hist = |g: &GrayImage| {
            let mut h = [0usize; 4];
            for &x in g.pixels() {
                h[x as usize] += 1;
            }
            h
        };
        let (small, large) = (hist(&img), hist(&big));
        for v in 0..4 {
            assert_eq!(large[v], small[v] * tiles);
        }
    }

    fn write_mask(dir: &Path, name: &str, w: usize, h: usize, raster: Vec<u16>) {
        let pgm = PgmImage::new(w, h, 255, raster).unwrap();
        fs::write(dir.join(format!("{name}.pgm")), pgm.encode()).unwrap();
    }

    #[test]
    fn ground_truth_loading() {
        let dir = tempfile::tempdir().unwrap();
        write_mask(dir.path(), "background", 2, 2, vec![255, 0, 0, 0]);
        write_mask(dir.path(), "csf", 2, 2, vec![0, 255, 0, 0]);
        write_mask(dir.path(), "gm", 2, 2, vec![0, 0, 128, 0]);
        write_mask(dir.path(), "wm", 2, 2, vec![0, 0, 127, 200]);
        let gt = read_ground_truth(dir.path()).unwrap();
        assert_eq!(gt.masks.len(), 4);
        assert!(gt.warnings.is_empty());
        assert_eq!(gt.masks["background"].bits(), &[true, false, false, false]);
        assert_eq!(gt.masks["gm"].bits(), &[false, false, true, false]);
        assert_eq!(gt.masks["wm"].bits(), &[false, false, false, true]);
        assert_eq!(gt.reference_labels().unwrap().labels(), &[0, 1, 2, 3]);
    }

    #[test]
    fn ground_truth_overlap_warns() {
        let dir = tempfile::tempdir().unwrap();
        write_mask(dir.path(), "background", 2, 1, vec![255, 0]);
        write_mask(dir.path(), "csf", 2, 1, vec![255, 0]);
        write_mask(dir.path(), "gm", 2, 1, vec![0, 255]);
        write_mask(dir.path(), "wm", 2, 1, vec![0, 0]);
        let gt = read_ground_truth(dir.path()).unwrap();
        assert_eq!(gt.warnings.len(), 1);
        assert!(gt.warnings[0].contains("background") && gt.warnings[0].contains("csf"));
        // first class in label order wins
        assert_eq!(gt.reference_labels().unwrap().labels(), &[0, 2]);
    }

    #[test]
    fn ground_truth_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_mask(dir.path(), "background", 2, 1, vec![255, 0]);
        write_mask(dir.path(), "csf", 2, 1, vec![0, 255]);
        write_mask(dir.path(), "gm", 2, 1, vec![0, 0]);
        let err = read_ground_truth(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingClass { ref class, .. } if class == "wm"));

        write_mask(dir.path(), "wm", 1, 2, vec![0, 0]);
        assert!(matches!(read_ground_truth(dir.path()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn phantom_masks_partition() {
        let (img, gt) = synthetic_phantom(40, 30, 1).unwrap();
        assert_eq!(img.len(), 1200);
        for i in 0..img.len() {
            let claims = gt.masks.values().filter(|m| m.bits()[i]).count();
            assert_eq!(claims, 1);
        }
        let dir = tempfile::tempdir().unwrap();
        write_ground_truth(&gt, dir.path()).unwrap();
        let back = read_ground_truth(dir.path()).unwrap();
        assert_eq!(back.masks, gt.masks);
    }
}
