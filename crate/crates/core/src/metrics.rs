//! Segmentation quality: Dice similarity and cluster-to-class alignment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::LabelMap;

/// Cluster counts up to this size are aligned by exhaustive search over all
/// permutations; larger ones fall back to greedy assignment.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{} masks",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Per-class Dice scores, keyed by class name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DscReport {
    pub per_class: BTreeMap<String, f64>,
}

impl DscReport {
    pub fn min(&self) -> Option<f64> {
        self.per_class.values().copied().reduce(f64::min)
    }
}

/// Dice similarity `2 |PR ∩ GT| / (|PR| + |GT|)`. Two empty masks agree
/// perfectly and score 1.
pub fn dsc(pr: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pr.check_same_shape(gt)?;
    let (mut both, mut total) = (0usize, 0usize);
    for (&a, &b) in pr.bits.iter().zip(&gt.bits) {
        both += usize::from(a && b);
        total += usize::from(a) + usize::from(b);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / total as f64)
}

pub fn mask_for_class(labels: &LabelMap, j: usize) -> BinaryMask {
    BinaryMask {
        width: labels.width(),
        height: labels.height(),
        bits: labels.labels().iter().map(|&l| l == j).collect(),
    }
}

/// `confusion[p][r]` counts pixels labeled `p` in `pred` and `r` in `reference`.
pub fn confusion_matrix(pred: &LabelMap, reference: &LabelMap, c: usize) -> Result<Vec<Vec<usize>>> {
    if (pred.width(), pred.height()) != (reference.width(), reference.height()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{} label maps",
            pred.width(),
            pred.height(),
            reference.width(),
            reference.height()
        )));
    }
    if pred.clusters() > c || reference.clusters() > c {
        return Err(Error::DimensionMismatch(format!(
            "label maps with {} and {} clusters do not fit in {c}",
            pred.clusters(),
            reference.clusters()
        )));
    }
    let mut confusion = vec![vec![0usize; c]; c];
    for (&p, &r) in pred.labels().iter().zip(reference.labels()) {
        confusion[p][r] += 1;
    }
    Ok(confusion)
}

/// Permutation `perm` such that predicted cluster `p` corresponds to
/// reference class `perm[p]`, chosen to maximize the number of pixels on
/// which the relabeled prediction agrees with the reference.
///
/// Ties go to the lexicographically smallest permutation, so identical maps
/// give the identity.
pub fn match_clusters(pred: &LabelMap, reference: &LabelMap, c: usize) -> Result<Vec<usize>> {
    let confusion = confusion_matrix(pred, reference, c)?;
    if c <= EXHAUSTIVE_MATCH_LIMIT {
        Ok(best_permutation(&confusion))
    } else {
        Ok(greedy_assignment(&confusion))
    }
}

fn best_permutation(confusion: &[Vec<usize>]) -> Vec<usize> {
    let c = confusion.len();
    let mut perm: Vec<usize> = (0..c).collect();
    let mut best = perm.clone();
    let mut best_score = overlap(confusion, &perm);
    // Lexicographic order, so the first maximum found is the smallest.
    while next_permutation(&mut perm) {
        let score = overlap(confusion, &perm);
        if score > best_score {
            best_score = score;
            best.copy_from_slice(&perm);
        }
    }
    best
}

fn overlap(confusion: &[Vec<usize>], perm: &[usize]) -> usize {
    perm.iter().enumerate().map(|(p, &r)| confusion[p][r]).sum()
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&x| x > perm[i]).expect("pivot has a successor");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Repeatedly pairs the unassigned (pred, reference) cell with the largest
/// count, ties to the lowest pred index and then the lowest reference index.
fn greedy_assignment(confusion: &[Vec<usize>]) -> Vec<usize> {
    let c = confusion.len();
    let mut perm = vec![usize::MAX; c];
    let mut taken = vec![false; c];
    for _ in 0..c {
        let mut pick: Option<(usize, usize, usize)> = None;
        for (p, row) in confusion.iter().enumerate() {
            if perm[p] != usize::MAX {
                continue;
            }
            for (r, &count) in row.iter().enumerate() {
                if !taken[r] && pick.is_none_or(|(_, _, best)| count > best) {
                    pick = Some((p, r, count));
                }
            }
        }
        let (p, r, _) = pick.expect("an unassigned pair remains");
        perm[p] = r;
        taken[r] = true;
    }
    perm
}

/// Dice score of every class, comparing `pred` (already aligned) against
/// `reference`; class `j` is reported under `names[j]`.
pub fn per_class_dsc(pred: &LabelMap, reference: &LabelMap, names: &[String]) -> Result<DscReport> {
    let mut per_class = BTreeMap::new();
    for (j, name) in names.iter().enumerate() {
        let score = dsc(&mask_for_class(pred, j), &mask_for_class(reference, j))?;
        per_class.insert(name.clone(), score);
    }
    Ok(DscReport { per_class })
}
