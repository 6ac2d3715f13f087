//! Writes a synthetic brain-slice phantom and its ground-truth masks:
//!
//!     cargo run --example make_phantom -- <out_dir> [width] [height] [seed]
//!
//! produces `<out_dir>/phantom.pgm` and `<out_dir>/truth/{background,csf,gm,wm}.pgm`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use pfcm_core::imgio;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().context("usage: make_phantom <out_dir> [width] [height] [seed]")?.into();
    let width = args.next().map_or(Ok(128), |s| s.parse())?;
    let height = args.next().map_or(Ok(80), |s| s.parse())?;
    let seed = args.next().map_or(Ok(1), |s| s.parse())?;
    std::fs::create_dir_all(&out)?;
    let (img, truth) = imgio::synthetic_phantom(width, height, seed)?;
    imgio::write_pgm(&img, out.join("phantom.pgm"))?;
    imgio::write_ground_truth(&truth, out.join("truth"))?;
    println!("wrote {}x{} phantom to {}", width, height, out.display());
    Ok(())
}
