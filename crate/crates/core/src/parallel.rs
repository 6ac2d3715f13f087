//! Data-parallel FCM engine.
//!
//! One iteration is split into the same kernels a device implementation
//! would launch:
//!
//! 1. for every cluster, a per-pixel map producing the numerator and
//!    denominator terms of the center update ([`ParallelEngine::kernel_center_terms`]);
//! 2. a block reduction of the numerators and
//! 3. of the denominators ([`ParallelEngine::block_reduce_sum`]);
//! 4. a single-lane kernel that sums the block partials and divides
//!    ([`ParallelEngine::reduce_full`]);
//!
//! followed by one per-pixel membership kernel. The host side keeps the
//! previous membership, receives the new one and decides convergence.
//!
//! Blocks are scheduled on a private rayon pool. Each block owns a scratch
//! buffer of `2 * block_size` elements and reduces it with the stride-halving
//! loop, so the association order of every sum is fixed by the grid and the
//! output does not depend on how many workers run the blocks.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcm::{
    self, center_terms, check_fuzzifier, check_pixels, check_run_inputs, finish_centers,
    membership_row, objective_term,
};
use crate::types::{ClusterCenters, FcmConfig, FcmResult, GrayImage, MembershipMatrix};

/// Work items per rayon task in the per-pixel map kernels.
const MAP_CHUNK: usize = 4096;

/// Launch geometry of one reduction: `num_blocks` blocks of `block_size`
/// lanes, each lane loading two elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    block_size: usize,
    n: usize,
}

impl BlockGrid {
    pub fn new(n: usize, block_size: usize) -> Result<Self> {
        if block_size < 2 || !block_size.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "block size must be a power of two >= 2, got {block_size}"
            )));
        }
        Ok(Self { block_size, n })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Elements covered by one block.
    pub fn span(&self) -> usize {
        2 * self.block_size
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_blocks(&self) -> usize {
        self.n.div_ceil(self.span())
    }

    /// Number of stride levels each block executes.
    pub fn levels(&self) -> usize {
        self.block_size.trailing_zeros() as usize + 1
    }
}

/// Per-pixel numerator and denominator terms of one cluster's center.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTerms {
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
}

/// Loads block `block` of `a` into `buf` and tree-reduces it in place.
///
/// Lane `t` loads `a[start + t]` and `a[start + t + block_size]`, with zero
/// for anything past the end of the input. Then for `stride = block_size,
/// block_size / 2, ..., 1` every lane `t < stride` adds `buf[t + stride]`
/// into `buf[t]`. Returns the block sum and the number of levels executed.
fn reduce_block(a: &[f64], grid: &BlockGrid, block: usize, buf: &mut [f64]) -> (f64, usize) {
    let lanes = grid.block_size;
    let n = a.len();
    let start = block * grid.span();
    for t in 0..lanes {
        buf[t] = if start + t < n { a[start + t] } else { 0.0 };
        buf[t + lanes] = if start + t + lanes < n {
            a[start + t + lanes]
        } else {
            0.0
        };
    }
    let mut levels = 0;
    let mut stride = lanes;
    while stride > 0 {
        for t in 0..stride {
            buf[t] += buf[t + stride];
        }
        stride /= 2;
        levels += 1;
    }
    (buf[0], levels)
}

/// Bytes moved across the modeled host/device boundary.
#[derive(Debug, Default)]
struct TransferCounter {
    to_device: AtomicU64,
    to_host: AtomicU64,
    copies: AtomicU64,
}

/// Snapshot of the transfer counters of an engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferStats {
    pub host_to_device_bytes: u64,
    pub device_to_host_bytes: u64,
    pub copies: u64,
}

/// Runs the parallel kernels on a dedicated worker pool.
pub struct ParallelEngine {
    pool: rayon::ThreadPool,
    workers: usize,
    transfers: TransferCounter,
}

impl std::fmt::Debug for ParallelEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelEngine")
            .field("workers", &self.workers)
            .finish_non_exhaustive()
    }
}

impl ParallelEngine {
    /// Creates an engine with `workers` threads.
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("worker count must be positive".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("pfcm-worker-{i}"))
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?;
        Ok(Self {
            pool,
            workers,
            transfers: TransferCounter::default(),
        })
    }

    /// Creates an engine with one worker per available CPU.
    pub fn with_available_parallelism() -> Result<Self> {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self::new(workers)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn transfer_stats(&self) -> TransferStats {
        TransferStats {
            host_to_device_bytes: self.transfers.to_device.load(Ordering::Relaxed),
            device_to_host_bytes: self.transfers.to_host.load(Ordering::Relaxed),
            copies: self.transfers.copies.load(Ordering::Relaxed),
        }
    }

    pub fn reset_transfer_stats(&self) {
        self.transfers.to_device.store(0, Ordering::Relaxed);
        self.transfers.to_host.store(0, Ordering::Relaxed);
        self.transfers.copies.store(0, Ordering::Relaxed);
    }

    fn upload(&self, host: &[f64]) -> Vec<f64> {
        self.count(&self.transfers.to_device, host.len());
        host.to_vec()
    }

    fn download(&self, device: &[f64]) -> Vec<f64> {
        self.count(&self.transfers.to_host, device.len());
        device.to_vec()
    }

    fn count(&self, counter: &AtomicU64, elems: usize) {
        counter.fetch_add((elems * std::mem::size_of::<f64>()) as u64, Ordering::Relaxed);
        self.transfers.copies.fetch_add(1, Ordering::Relaxed);
    }

    /// Per-pixel `u_ij^m * x_i` and `u_ij^m` for cluster `j`.
    pub fn kernel_center_terms(
        &self,
        img: &GrayImage,
        u: &MembershipMatrix,
        j: usize,
        m: f64,
    ) -> Result<CenterTerms> {
        check_pixels(img, u)?;
        check_fuzzifier(m)?;
        if j >= u.clusters() {
            return Err(Error::InvalidConfig(format!(
                "cluster {j} out of range for {} clusters",
                u.clusters()
            )));
        }
        Ok(self.center_terms_unchecked(img.pixels(), u.as_slice(), u.clusters(), j, m))
    }

    fn center_terms_unchecked(
        &self,
        pixels: &[f64],
        u: &[f64],
        c: usize,
        j: usize,
        m: f64,
    ) -> CenterTerms {
        let n = pixels.len();
        let mut numerators = vec![0.0; n];
        let mut denominators = vec![0.0; n];
        self.pool.install(|| {
            numerators
                .par_chunks_mut(MAP_CHUNK)
                .zip(denominators.par_chunks_mut(MAP_CHUNK))
                .enumerate()
                .for_each(|(chunk, (num, den))| {
                    let base = chunk * MAP_CHUNK;
                    for (k, (a, b)) in num.iter_mut().zip(den.iter_mut()).enumerate() {
                        let i = base + k;
                        (*a, *b) = center_terms(u[i * c + j], pixels[i], m);
                    }
                });
        });
        CenterTerms {
            numerators,
            denominators,
        }
    }

    /// One partial sum per block of `grid`.
    pub fn block_reduce_sum(&self, a: &[f64], grid: &BlockGrid) -> Result<Vec<f64>> {
        Ok(self.block_reduce_traced(a, grid)?.0)
    }

    /// Like [`block_reduce_sum`](Self::block_reduce_sum), also returning the
    /// number of stride levels each block executed.
    pub fn block_reduce_traced(&self, a: &[f64], grid: &BlockGrid) -> Result<(Vec<f64>, Vec<usize>)> {
        if grid.len() != a.len() {
            return Err(Error::InvalidGrid(format!(
                "grid covers {} elements but input has {}",
                grid.len(),
                a.len()
            )));
        }
        let span = grid.span();
        let out: Vec<(f64, usize)> = self.pool.install(|| {
            (0..grid.num_blocks())
                .into_par_iter()
                .map_init(|| vec![0.0; span], |buf, b| reduce_block(a, grid, b, buf))
                .collect()
        });
        Ok(out.into_iter().unzip())
    }

    /// Full sum: one block-reduction pass, then a single lane adds the
    /// partials in block order.
    pub fn reduce_full(&self, a: &[f64], block_size: usize) -> Result<f64> {
        if a.is_empty() {
            return Err(Error::InvalidGrid("cannot reduce an empty input".into()));
        }
        let grid = BlockGrid::new(a.len(), block_size)?;
        let partials = self.block_reduce_sum(a, &grid)?;
        Ok(partials.iter().sum())
    }

    /// Center update: the four-kernel sequence run once per cluster.
    pub fn update_centers(
        &self,
        img: &GrayImage,
        u: &MembershipMatrix,
        cfg: &FcmConfig,
    ) -> Result<ClusterCenters> {
        self.update_centers_or_keep(img, u, cfg, None)
    }

    fn update_centers_or_keep(
        &self,
        img: &GrayImage,
        u: &MembershipMatrix,
        cfg: &FcmConfig,
        previous: Option<&ClusterCenters>,
    ) -> Result<ClusterCenters> {
        check_pixels(img, u)?;
        check_fuzzifier(cfg.fuzzifier)?;
        let c = u.clusters();
        let mut num = vec![0.0; c];
        let mut den = vec![0.0; c];
        for j in 0..c {
            let terms = self.center_terms_unchecked(img.pixels(), u.as_slice(), c, j, cfg.fuzzifier);
            num[j] = self.reduce_full(&terms.numerators, cfg.block_size)?;
            den[j] = self.reduce_full(&terms.denominators, cfg.block_size)?;
        }
        finish_centers(&num, &den, previous)
    }

    /// Membership update: one work item per pixel, evaluating exactly the
    /// same expression as the sequential engine.
    pub fn update_membership(
        &self,
        img: &GrayImage,
        v: &ClusterCenters,
        cfg: &FcmConfig,
    ) -> Result<MembershipMatrix> {
        check_fuzzifier(cfg.fuzzifier)?;
        let c = v.len();
        let centers = v.as_slice();
        let mut u = vec![0.0; img.len() * c];
        self.pool.install(|| {
            u.par_chunks_mut(MAP_CHUNK * c)
                .zip(img.pixels().par_chunks(MAP_CHUNK))
                .for_each(|(rows, xs)| {
                    for (row, &x) in rows.chunks_exact_mut(c).zip(xs) {
                        membership_row(x, centers, cfg.fuzzifier, row);
                    }
                });
        });
        MembershipMatrix::from_raw(img.len(), c, u)
    }

    /// Objective value via a per-pixel map and the block reduction.
    pub fn objective(
        &self,
        img: &GrayImage,
        u: &MembershipMatrix,
        v: &ClusterCenters,
        cfg: &FcmConfig,
    ) -> Result<f64> {
        check_pixels(img, u)?;
        let c = u.clusters();
        let centers = v.as_slice();
        let mut terms = vec![0.0; img.len()];
        self.pool.install(|| {
            terms
                .par_chunks_mut(MAP_CHUNK)
                .zip(img.pixels().par_chunks(MAP_CHUNK))
                .zip(u.as_slice().par_chunks(MAP_CHUNK * c))
                .for_each(|((out, xs), rows)| {
                    for ((o, &x), row) in out.iter_mut().zip(xs).zip(rows.chunks_exact(c)) {
                        *o = objective_term(x, row, centers, cfg.fuzzifier);
                    }
                });
        });
        self.reduce_full(&terms, cfg.block_size)
    }

    /// Full run from a seeded random start. The initial membership comes from
    /// the same generator as the sequential engine.
    pub fn run(&self, img: &GrayImage, cfg: &FcmConfig) -> Result<FcmResult> {
        cfg.validate()?;
        let u0 = fcm::init_membership(img.len(), cfg)?;
        self.run_from(img, cfg, u0)
    }

    /// Full run from a caller-supplied initial membership.
    pub fn run_from(&self, img: &GrayImage, cfg: &FcmConfig, u0: MembershipMatrix) -> Result<FcmResult> {
        check_run_inputs(img, cfg, &u0)?;
        let c = cfg.clusters;
        let n = img.len();

        // host -> device
        let d_img = GrayImage::new(img.width(), img.height(), self.upload(img.pixels()))?;
        let mut d_u = MembershipMatrix::from_raw(n, c, self.upload(u0.as_slice()))?;
        let mut host_u = u0;

        let mut trace = Vec::new();
        let mut delta = f64::INFINITY;
        let mut d_centers = None;
        while trace.len() < cfg.max_iters {
            let v = self.update_centers_or_keep(&d_img, &d_u, cfg, d_centers.as_ref())?;
            d_u = self.update_membership(&d_img, &v, cfg)?;
            trace.push(self.objective(&d_img, &d_u, &v, cfg)?);
            d_centers = Some(v);

            // device -> host; convergence is decided on the host
            let received = MembershipMatrix::from_raw(n, c, self.download(d_u.as_slice()))?;
            delta = fcm::membership_delta(&received, &host_u)?;
            host_u = received;
            if delta < cfg.epsilon {
                break;
            }
        }
        let d_centers = d_centers.expect("max_iters >= 1 guarantees one iteration");
        let centers = ClusterCenters::new(self.download(d_centers.as_slice()))?;
        let labels = fcm::defuzzify(&host_u, img.width(), img.height())?;
        Ok(FcmResult {
            centers,
            membership: host_u,
            labels,
            iterations: trace.len(),
            objective_trace: trace,
            converged: delta < cfg.epsilon,
            final_delta: delta,
        })
    }
}

/// Runs the parallel engine on one worker per available CPU.
pub fn run_fcm_parallel(img: &GrayImage, cfg: &FcmConfig) -> Result<FcmResult> {
    ParallelEngine::with_available_parallelism()?.run(img, cfg)
}
