use crate::error::{Error, Result};

/// Grayscale raster stored row-major in a flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some((i, x)) = pixels
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} has intensity {x}; intensities must be finite and non-negative"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Returns a copy with every intensity shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|x| x + offset).collect(),
        )
    }
}

/// Fuzzy membership of `n` pixels in `c` clusters, laid out pixel-major:
/// entry `i * c + j` is the membership of pixel `i` in cluster `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    n: usize,
    c: usize,
    u: Vec<f64>,
}

impl MembershipMatrix {
    /// Tolerance used when validating row sums.
    pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

    /// Builds a matrix, checking that entries lie in `[0, 1]` and that every
    /// row sums to one.
    pub fn new(n: usize, c: usize, u: Vec<f64>) -> Result<Self> {
        let m = Self::from_raw(n, c, u)?;
        if let Some((i, j, x)) = m
            .u
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
            .map(|(k, x)| (k / c, k % c, *x))
        {
            return Err(Error::InvalidMembership(format!(
                "u[{i}][{j}] = {x} is outside [0, 1]"
            )));
        }
        if let Some((i, s)) = m
            .row_sums()
            .enumerate()
            .find(|(_, s)| (s - 1.0).abs() > Self::ROW_SUM_TOLERANCE)
        {
            return Err(Error::InvalidMembership(format!(
                "row {i} sums to {s}, expected 1"
            )));
        }
        Ok(m)
    }

    pub(crate) fn from_raw(n: usize, c: usize, u: Vec<f64>) -> Result<Self> {
        if n == 0 || c == 0 {
            return Err(Error::InvalidMembership(format!(
                "matrix must be non-empty, got {n}x{c}"
            )));
        }
        if u.len() != n * c {
            return Err(Error::InvalidMembership(format!(
                "{n}x{c} matrix needs {} entries, got {}",
                n * c,
                u.len()
            )));
        }
        Ok(Self { n, c, u })
    }

    pub fn pixels(&self) -> usize {
        self.n
    }

    pub fn clusters(&self) -> usize {
        self.c
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn get(&self, pixel: usize, cluster: usize) -> f64 {
        self.u[pixel * self.c + cluster]
    }

    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.u[pixel * self.c..(pixel + 1) * self.c]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.u.chunks_exact(self.c)
    }

    pub fn row_sums(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(|r| r.iter().sum())
    }

    /// Total membership of every cluster, summed in pixel order.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.c];
        for row in self.rows() {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// Reorders clusters so that new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.c)?;
        let u = self
            .rows()
            .flat_map(|row| perm.iter().map(move |&p| row[p]))
            .collect();
        Ok(Self {
            n: self.n,
            c: self.c,
            u,
        })
    }

    /// Largest elementwise absolute difference between two matrices.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.n != other.n || self.c != other.c {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{} membership matrices",
                self.n, self.c, other.n, other.c
            )));
        }
        Ok(self
            .u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_permutation(perm: &[usize], c: usize) -> Result<()> {
    let mut seen = vec![false; c];
    if perm.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {c} clusters",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= c || std::mem::replace(&mut seen[p], true) {
            return Err(Error::DimensionMismatch(format!(
                "{perm:?} is not a permutation of 0..{c}"
            )));
        }
    }
    Ok(())
}

/// Scalar intensity centroid of each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCenters(Vec<f64>);

impl ClusterCenters {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidConfig("no cluster centers".into()));
        }
        if let Some((j, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("center {j} is {x}")));
        }
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Parameters shared by both engines.
#[derive(Debug, Clone, PartialEq)]
pub struct FcmConfig {
    pub clusters: usize,
    /// Fuzzifier `m`, strictly greater than one.
    pub fuzzifier: f64,
    /// Convergence threshold on the max-norm membership change.
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Lanes per reduction block; each block sums `2 * block_size` elements.
    pub block_size: usize,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            clusters: 4,
            fuzzifier: 2.0,
            epsilon: 0.005,
            max_iters: 500,
            seed: 0,
            block_size: 128,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 clusters, got {}",
                self.clusters
            )));
        }
        if !(self.fuzzifier.is_finite() && self.fuzzifier > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fuzzifier must be finite and > 1, got {}",
                self.fuzzifier
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.block_size < 2 || !self.block_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "block size must be a power of two >= 2, got {}",
                self.block_size
            )));
        }
        Ok(())
    }
}

/// Defuzzified segmentation: one cluster index per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    clusters: usize,
    labels: Vec<usize>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, clusters: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} label map needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= clusters) {
            return Err(Error::InvalidConfig(format!(
                "label {l} out of range for {clusters} clusters"
            )));
        }
        Ok(Self {
            width,
            height,
            clusters,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Renames every label `l` to `perm[l]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.clusters)?;
        Ok(Self {
            labels: self.labels.iter().map(|&l| perm[l]).collect(),
            ..self.clone()
        })
    }
}

/// Everything one FCM run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    pub centers: ClusterCenters,
    pub membership: MembershipMatrix,
    pub labels: LabelMap,
    pub iterations: usize,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub final_delta: f64,
}

impl FcmResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}
