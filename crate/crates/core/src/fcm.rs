//! Sequential Fuzzy C-Means.
//!
//! This is the reference implementation: every reduction is a left-to-right
//! sum in pixel index order. The per-pixel expressions ([`center_terms`] and
//! [`membership_row`]) are shared with the parallel engine so the two engines
//! only ever differ in how partial sums are associated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{ClusterCenters, FcmConfig, FcmResult, GrayImage, LabelMap, MembershipMatrix};

/// Random initial membership.
///
/// Each row is filled with draws from ChaCha8 (seeded with `cfg.seed` via
/// `SeedableRng::seed_from_u64`) mapped into `(0, 1]`, then normalized. The
/// last entry of a row is set to one minus the sum of the others so the row
/// sums to one as tightly as floating point allows.
pub fn init_membership(n: usize, cfg: &FcmConfig) -> Result<MembershipMatrix> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("cannot initialize zero pixels".into()));
    }
    let c = cfg.clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = Vec::with_capacity(n * c);
    let mut row = vec![0.0; c];
    for _ in 0..n {
        for r in row.iter_mut() {
            *r = 1.0 - rng.gen::<f64>();
        }
        let total: f64 = row.iter().sum();
        let mut head = 0.0;
        for r in &mut row[..c - 1] {
            *r /= total;
            head += *r;
        }
        row[c - 1] = (1.0 - head).max(0.0);
        u.extend_from_slice(&row);
    }
    MembershipMatrix::new(n, c, u)
}

/// Numerator and denominator contributions of one pixel to one center:
/// `(u^m * x, u^m)`.
#[inline]
pub fn center_terms(membership: f64, intensity: f64, m: f64) -> (f64, f64) {
    let w = membership.powf(m);
    (w * intensity, w)
}

pub(crate) fn check_pixels(img: &GrayImage, u: &MembershipMatrix) -> Result<()> {
    if u.pixels() != img.len() {
        return Err(Error::DimensionMismatch(format!(
            "membership has {} rows but image has {} pixels",
            u.pixels(),
            img.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_fuzzifier(m: f64) -> Result<()> {
    if !(m.is_finite() && m > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "fuzzifier must be finite and > 1, got {m}"
        )));
    }
    Ok(())
}

/// Weighted means of the intensities, one per cluster.
pub fn update_centers(img: &GrayImage, u: &MembershipMatrix, m: f64) -> Result<ClusterCenters> {
    update_centers_or_keep(img, u, m, None)
}

fn update_centers_or_keep(
    img: &GrayImage,
    u: &MembershipMatrix,
    m: f64,
    previous: Option<&ClusterCenters>,
) -> Result<ClusterCenters> {
    check_pixels(img, u)?;
    check_fuzzifier(m)?;
    let c = u.clusters();
    let mut num = vec![0.0; c];
    let mut den = vec![0.0; c];
    for (&x, row) in img.pixels().iter().zip(u.rows()) {
        for j in 0..c {
            let (a, b) = center_terms(row[j], x, m);
            num[j] += a;
            den[j] += b;
        }
    }
    finish_centers(&num, &den, previous)
}

/// Divides the accumulated sums. A cluster with zero total weight keeps its
/// entry from `previous` when one is given and is an error otherwise.
pub(crate) fn finish_centers(
    num: &[f64],
    den: &[f64],
    previous: Option<&ClusterCenters>,
) -> Result<ClusterCenters> {
    let v = num
        .iter()
        .zip(den)
        .enumerate()
        .map(|(j, (&a, &b))| match (b == 0.0, previous) {
            (false, _) => Ok(a / b),
            (true, Some(prev)) => Ok(prev.as_slice()[j]),
            (true, None) => Err(Error::DegenerateCluster { cluster: j }),
        })
        .collect::<Result<Vec<_>>>()?;
    ClusterCenters::new(v)
}

/// Relative distance, in units of machine epsilon, below which a pixel is
/// treated as sitting on a center.
pub const COINCIDENCE_ULPS: f64 = 16.0;

#[inline]
fn coincides(x: f64, v: f64) -> bool {
    (x - v).abs() <= COINCIDENCE_ULPS * f64::EPSILON * x.abs().max(v.abs()).max(1.0)
}

/// Membership of a single pixel of intensity `x` in every cluster, written
/// into `out`.
///
/// A pixel sitting on one or more centers (within [`COINCIDENCE_ULPS`]) has
/// its membership split evenly among those centers, which is the limit of
/// the formula as the distances go to zero.
#[inline]
pub fn membership_row(x: f64, centers: &[f64], m: f64, out: &mut [f64]) {
    debug_assert_eq!(centers.len(), out.len());
    let on_center = centers.iter().filter(|&&v| coincides(x, v)).count();
    if on_center > 0 {
        let share = 1.0 / on_center as f64;
        for (o, &v) in out.iter_mut().zip(centers) {
            *o = if coincides(x, v) { share } else { 0.0 };
        }
        return;
    }
    let p = 2.0 / (m - 1.0);
    for (o, &vj) in out.iter_mut().zip(centers) {
        let dj = (x - vj).abs();
        let s: f64 = centers.iter().map(|&vk| (dj / (x - vk).abs()).powf(p)).sum();
        *o = 1.0 / s;
    }
}

/// Recomputes every membership from the current centers.
pub fn update_membership(img: &GrayImage, v: &ClusterCenters, m: f64) -> Result<MembershipMatrix> {
    check_fuzzifier(m)?;
    let c = v.len();
    let mut u = vec![0.0; img.len() * c];
    for (&x, row) in img.pixels().iter().zip(u.chunks_exact_mut(c)) {
        membership_row(x, v.as_slice(), m, row);
    }
    MembershipMatrix::from_raw(img.len(), c, u)
}

/// Contribution of one pixel to the objective: `sum_j u_ij^m (x - v_j)^2`.
#[inline]
pub fn objective_term(x: f64, row: &[f64], centers: &[f64], m: f64) -> f64 {
    row.iter()
        .zip(centers)
        .map(|(&u, &v)| u.powf(m) * (x - v) * (x - v))
        .sum()
}

/// Weighted within-cluster sum of squared distances.
pub fn objective(img: &GrayImage, u: &MembershipMatrix, v: &ClusterCenters, m: f64) -> Result<f64> {
    check_pixels(img, u)?;
    if u.clusters() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "membership has {} clusters but there are {} centers",
            u.clusters(),
            v.len()
        )));
    }
    Ok(img
        .pixels()
        .iter()
        .zip(u.rows())
        .map(|(&x, row)| objective_term(x, row, v.as_slice(), m))
        .sum())
}

/// Max-norm change between two membership matrices.
pub fn membership_delta(u_new: &MembershipMatrix, u_old: &MembershipMatrix) -> Result<f64> {
    u_new.max_abs_diff(u_old)
}

/// Assigns every pixel to its highest-membership cluster; ties go to the
/// lowest index.
pub fn defuzzify(u: &MembershipMatrix, width: usize, height: usize) -> Result<LabelMap> {
    if u.pixels() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "membership has {} rows for a {width}x{height} image",
            u.pixels()
        )));
    }
    let labels = u.rows().map(argmax).collect();
    LabelMap::new(width, height, u.clusters(), labels)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn check_run_inputs(img: &GrayImage, cfg: &FcmConfig, u0: &MembershipMatrix) -> Result<()> {
    cfg.validate()?;
    if img.len() < cfg.clusters {
        return Err(Error::InvalidConfig(format!(
            "{} pixels cannot form {} clusters",
            img.len(),
            cfg.clusters
        )));
    }
    check_pixels(img, u0)?;
    if u0.clusters() != cfg.clusters {
        return Err(Error::DimensionMismatch(format!(
            "initial membership has {} clusters, config asks for {}",
            u0.clusters(),
            cfg.clusters
        )));
    }
    Ok(())
}

/// Runs the sequential engine from a seeded random start.
pub fn run_fcm_sequential(img: &GrayImage, cfg: &FcmConfig) -> Result<FcmResult> {
    cfg.validate()?;
    let u0 = init_membership(img.len(), cfg)?;
    run_fcm_sequential_from(img, cfg, u0)
}

/// Runs the sequential engine from a caller-supplied initial membership.
///
/// Each iteration updates the centers, then the memberships, and stops once
/// the max-norm membership change drops below `cfg.epsilon` or
/// `cfg.max_iters` iterations have run. A cluster that loses all weight
/// mid-run keeps its last center; a dead cluster in `u0` is an error.
pub fn run_fcm_sequential_from(
    img: &GrayImage,
    cfg: &FcmConfig,
    u0: MembershipMatrix,
) -> Result<FcmResult> {
    check_run_inputs(img, cfg, &u0)?;
    let m = cfg.fuzzifier;
    let mut u = u0;
    let mut trace = Vec::new();
    let mut delta = f64::INFINITY;
    let mut centers = None;
    while trace.len() < cfg.max_iters {
        let v = update_centers_or_keep(img, &u, m, centers.as_ref())?;
        let u_next = update_membership(img, &v, m)?;
        delta = membership_delta(&u_next, &u)?;
        trace.push(objective(img, &u_next, &v, m)?);
        u = u_next;
        centers = Some(v);
        if delta < cfg.epsilon {
            break;
        }
    }
    let labels = defuzzify(&u, img.width(), img.height())?;
    Ok(FcmResult {
        centers: centers.expect("max_iters >= 1 guarantees one iteration"),
        membership: u,
        labels,
        iterations: trace.len(),
        objective_trace: trace,
        converged: delta < cfg.epsilon,
        final_delta: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(pixels: &[f64]) -> GrayImage {
        GrayImage::new(pixels.len(), 1, pixels.to_vec()).unwrap()
    }

    fn cfg(c: usize) -> FcmConfig {
        FcmConfig {
            clusters: c,
            ..FcmConfig::default()
        }
    }

    #[test]
    fn init_single_row_sums_to_one_exactly() {
        for seed in 0..64 {
            let u = init_membership(1, &FcmConfig { seed, ..cfg(2) }).unwrap();
            assert_eq!(u.row(0).iter().sum::<f64>(), 1.0, "seed {seed}");
        }
    }

    #[test]
    fn init_is_deterministic() {
        let c = FcmConfig { seed: 42, ..cfg(4) };
        let a = init_membership(4, &c).unwrap();
        let b = init_membership(4, &c).unwrap();
        let bits = |m: &MembershipMatrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let other = init_membership(4, &FcmConfig { seed: 43, ..cfg(4) }).unwrap();
        assert_ne!(bits(&a), bits(&other));
    }

    #[test]
    fn init_column_sums_strictly_inside() {
        let u = init_membership(1000, &FcmConfig { seed: 7, ..cfg(4) }).unwrap();
        // direct summation over the generated entries
        for j in 0..4 {
            let s: f64 = (0..1000).map(|i| u.get(i, j)).sum();
            assert!(s > 0.0 && s < 1000.0, "column {j} sums to {s}");
        }
        for s in u.row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn init_rejects_bad_input() {
        assert!(init_membership(0, &cfg(2)).is_err());
        assert!(init_membership(3, &cfg(1)).is_err());
    }

    #[test]
    fn centers_uniform_weights_give_mean() {
        let u = MembershipMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let v = update_centers(&img(&[0.0, 10.0]), &u, 2.0).unwrap();
        assert_eq!(v.as_slice(), &[5.0]);
    }

    #[test]
    fn centers_weighted_example() {
        let u = MembershipMatrix::new(3, 2, vec![0.8, 0.2, 0.5, 0.5, 0.2, 0.8]).unwrap();
        let v = update_centers(&img(&[0.0, 1.0, 2.0]), &u, 2.0).unwrap();
        // (0*0.64 + 1*0.25 + 2*0.04) / (0.64 + 0.25 + 0.04)
        assert!((v.as_slice()[0] - 0.33 / 0.93).abs() < 1e-12);
        assert!((v.as_slice()[0] - 0.354839).abs() < 1e-6);
    }

    #[test]
    fn centers_of_constant_image() {
        let u = init_membership(5, &FcmConfig { seed: 3, ..cfg(3) }).unwrap();
        let v = update_centers(&img(&[7.0; 5]), &u, 2.0).unwrap();
        for &x in v.as_slice() {
            assert!((x - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_cluster_is_an_error() {
        let u = MembershipMatrix::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = update_centers(&img(&[1.0, 2.0]), &u, 2.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateCluster { cluster: 1 }));
    }

    #[test]
    fn centers_dimension_mismatch() {
        let u = MembershipMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            update_centers(&img(&[1.0, 2.0, 3.0]), &u, 2.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(update_centers(&img(&[1.0, 2.0]), &u, 1.0).is_err());
    }

    fn memberships(x: f64, v: &[f64], m: f64) -> Vec<f64> {
        let centers = ClusterCenters::new(v.to_vec()).unwrap();
        update_membership(&img(&[x]), &centers, m)
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn membership_examples() {
        assert_eq!(memberships(0.5, &[0.0, 1.0], 2.0), vec![0.5, 0.5]);
        assert_eq!(memberships(0.0, &[0.0, 1.0], 2.0), vec![1.0, 0.0]);
        let u = memberships(0.25, &[0.0, 1.0], 2.0);
        assert!((u[0] - 0.9).abs() < 1e-15 && (u[1] - 0.1).abs() < 1e-15, "{u:?}");
    }

    #[test]
    fn membership_on_coincident_centers_splits_evenly() {
        assert_eq!(memberships(3.0, &[3.0, 5.0, 3.0], 2.0), vec![0.5, 0.0, 0.5]);
        assert_eq!(memberships(0.0, &[0.0, 0.0], 3.0), vec![0.5, 0.5]);
    }

    #[test]
    fn membership_rows_sum_to_one() {
        let pixels: Vec<f64> = (0..200).map(|i| (i as f64 * 1.37) % 255.0).collect();
        let v = ClusterCenters::new(vec![12.5, 80.0, 140.25, 230.0]).unwrap();
        for m in [1.1, 1.5, 2.0, 3.0, 7.0] {
            let u = update_membership(&img(&pixels), &v, m).unwrap();
            for s in u.row_sums() {
                assert!((s - 1.0).abs() < 1e-9, "m={m} sum={s}");
            }
        }
    }

    #[test]
    fn objective_examples() {
        let u = MembershipMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = ClusterCenters::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(objective(&img(&[0.0, 1.0]), &u, &v, 2.0).unwrap(), 0.0);

        let u = MembershipMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let v = ClusterCenters::new(vec![0.5]).unwrap();
        assert_eq!(objective(&img(&[0.0, 1.0]), &u, &v, 2.0).unwrap(), 0.5);

        let v2 = ClusterCenters::new(vec![0.5, 1.0]).unwrap();
        assert!(objective(&img(&[0.0, 1.0]), &u, &v2, 2.0).is_err());
    }

    #[test]
    fn delta_is_max_norm() {
        let a = MembershipMatrix::new(2, 2, vec![0.5, 0.5, 0.4, 0.6]).unwrap();
        assert_eq!(membership_delta(&a, &a).unwrap(), 0.0);
        let b = MembershipMatrix::new(2, 2, vec![0.8, 0.2, 0.4, 0.6]).unwrap();
        assert!((membership_delta(&b, &a).unwrap() - 0.3).abs() < 1e-15);
        let c = MembershipMatrix::new(2, 2, vec![0.6, 0.4, 0.2, 0.8]).unwrap();
        assert!((membership_delta(&c, &a).unwrap() - 0.2).abs() < 1e-15);
        let d = MembershipMatrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(membership_delta(&d, &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn defuzzify_examples() {
        let u = MembershipMatrix::new(1, 4, vec![0.1, 0.7, 0.1, 0.1]).unwrap();
        assert_eq!(defuzzify(&u, 1, 1).unwrap().labels(), &[1]);
        let u = MembershipMatrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(defuzzify(&u, 1, 1).unwrap().labels(), &[0]);
        let u = MembershipMatrix::new(
            3,
            3,
            vec![0.1, 0.2, 0.7, 0.6, 0.3, 0.1, 0.2, 0.5, 0.3],
        )
        .unwrap();
        assert_eq!(defuzzify(&u, 3, 1).unwrap().labels(), &[2, 0, 1]);
        assert!(defuzzify(&u, 2, 2).is_err());
    }

    #[test]
    fn constant_image_converges_to_zero_objective() {
        let r = run_fcm_sequential(&img(&[0.0; 4]), &FcmConfig { seed: 11, ..cfg(2) }).unwrap();
        assert!(r.converged);
        assert_eq!(r.centers.as_slice(), &[0.0, 0.0]);
        assert_eq!(r.final_objective(), 0.0);
        assert!(r.iterations <= 2);

        let r = run_fcm_sequential(&img(&[42.0; 9]), &FcmConfig { seed: 5, ..cfg(3) }).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert!(r.final_objective() < 1e-20);
    }

    #[test]
    fn cluster_emptied_mid_run_keeps_its_center() {
        // two distinct values cannot feed three clusters once the centers land on them
        let pixels: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.0 } else { 10.0 }).collect();
        let v = ClusterCenters::new(vec![0.0, 10.0, 5.0]).unwrap();
        let u = update_membership(&img(&pixels), &v, 2.0).unwrap();
        assert!(update_centers(&img(&pixels), &u, 2.0).is_err());
        let kept = update_centers_or_keep(&img(&pixels), &u, 2.0, Some(&v)).unwrap();
        assert_eq!(kept.as_slice(), &[0.0, 10.0, 5.0]);
    }

    #[test]
    fn iteration_cap() {
        let pixels: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let r = run_fcm_sequential(&img(&pixels), &FcmConfig { max_iters: 1, ..cfg(3) }).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.objective_trace.len(), 1);
        assert!(!r.converged);
    }

    #[test]
    fn too_few_pixels() {
        assert!(run_fcm_sequential(&img(&[1.0, 2.0]), &cfg(3)).is_err());
    }
}
