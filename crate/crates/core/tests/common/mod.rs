#![allow(dead_code)]

use pfcm_core::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Neumaier-compensated sum; the reference every reduction is checked against.
pub fn compensated_sum(a: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in a {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A `width x height` image drawn from `modes` well separated noisy
/// intensity populations.
pub fn mixture_image(width: usize, height: usize, modes: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..modes)
        .map(|k| 20.0 + 215.0 * k as f64 / (modes.max(2) - 1) as f64 + rng.gen_range(-5.0..5.0))
        .collect();
    let pixels = (0..width * height)
        .map(|_| {
            let mean = means[rng.gen_range(0..modes)];
            // sum of uniforms: roughly normal, sd about 6
            let noise: f64 = (0..4).map(|_| rng.gen_range(-6.0..6.0)).sum::<f64>() / 2.0 * 1.7;
            (mean + noise).max(0.0)
        })
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}

/// Textbook FCM written independently of the library: nested vectors,
/// memberships from inverse powered distances, run until centers stop moving.
pub fn brute_force_fcm(pixels: &[f64], init_centers: &[f64], m: f64, tol: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = init_centers.to_vec();
    let mut u = vec![vec![0.0; v.len()]; pixels.len()];
    for _ in 0..100_000 {
        for (i, &x) in pixels.iter().enumerate() {
            let d: Vec<f64> = v.iter().map(|&c| (x - c).abs()).collect();
            if let Some(z) = d.iter().position(|&dist| dist == 0.0) {
                for (j, uij) in u[i].iter_mut().enumerate() {
                    *uij = if j == z { 1.0 } else { 0.0 };
                }
                continue;
            }
            let w: Vec<f64> = d.iter().map(|&dist| dist.powf(-2.0 / (m - 1.0))).collect();
            let total: f64 = w.iter().sum();
            for (j, uij) in u[i].iter_mut().enumerate() {
                *uij = w[j] / total;
            }
        }
        let next: Vec<f64> = (0..v.len())
            .map(|j| {
                let num: f64 = pixels.iter().zip(&u).map(|(x, row)| row[j].powf(m) * x).sum();
                let den: f64 = u.iter().map(|row| row[j].powf(m)).sum();
                num / den
            })
            .collect();
        let shift = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if shift < tol {
            break;
        }
    }
    (v, u)
}
