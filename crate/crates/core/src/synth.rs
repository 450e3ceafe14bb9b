//! Synthetic two-class RGB images `x(i1, i2) = tanh(psi_0 + psi_1 cos(q1 i1 + q2 i2))`.
//!
//! `psi_0` is `(1.95, 0, 0.05)` or `(0.05, 0, 1.95)` with equal probability,
//! `psi_1 ~ N(0, I_3 / 16)` and `q = (4 pi U1 / w, 4 pi U2 / h)`.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::output::{fmt_f64, OutputHeader};
use crate::rng::run_chains;

pub const RED_CENTER: [f64; 3] = [1.95, 0.0, 0.05];
pub const BLUE_CENTER: [f64; 3] = [0.05, 0.0, 1.95];
/// Standard deviation of each coordinate of `psi_1`.
pub const PSI1_STD: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthImage {
    pub width: usize,
    pub height: usize,
    pub red: bool,
    pub psi0: [f64; 3],
    pub psi1: [f64; 3],
    pub q: [f64; 2],
    /// Row-major `(i2, i1, channel)`, length `3 w h`.
    pub pixels: Vec<f64>,
}

impl SynthImage {
    pub fn pixel(&self, i1: usize, i2: usize, channel: usize) -> f64 {
        self.pixels[(i2 * self.width + i1) * 3 + channel]
    }

    /// Mean of one channel over all pixels.
    pub fn channel_mean(&self, channel: usize) -> f64 {
        self.pixels.iter().skip(channel).step_by(3).sum::<f64>() / (self.width * self.height) as f64
    }
}

pub fn synth_image<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> Result<SynthImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!("image size {width}x{height} must be at least 1x1")));
    }
    let red = rng.random::<f64>() < 0.5;
    let psi0 = if red { RED_CENTER } else { BLUE_CENTER };
    let normal = Normal::new(0.0, PSI1_STD).expect("positive std");
    let psi1 = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
    let q = [4.0 * PI * rng.random::<f64>() / width as f64, 4.0 * PI * rng.random::<f64>() / height as f64];
    let mut pixels = Vec::with_capacity(3 * width * height);
    for i2 in 0..height {
        for i1 in 0..width {
            let c = (q[0] * i1 as f64 + q[1] * i2 as f64).cos();
            for ch in 0..3 {
                pixels.push((psi0[ch] + psi1[ch] * c).tanh());
            }
        }
    }
    Ok(SynthImage { width, height, red, psi0, psi1, q, pixels })
}

/// `count` images, image `i` drawn from the stream `chain_rng(seed, i)`.
pub fn synth_images(width: usize, height: usize, count: usize, seed: u64) -> Result<Vec<SynthImage>> {
    run_chains(count, seed, |_, rng| synth_image(width, height, rng)).into_iter().collect()
}

/// Rows `image, red, p0, ..., p{3wh-1}`.
pub fn write_images_csv<W: Write>(header: &OutputHeader, mut w: W, images: &[SynthImage]) -> Result<()> {
    header.write(&mut w)?;
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let len = images.first().map_or(0, |im| im.pixels.len());
    let head = ["image".to_string(), "red".to_string()].into_iter().chain((0..len).map(|i| format!("p{i}")));
    wr.write_record(head)?;
    for (i, im) in images.iter().enumerate() {
        let row = [i.to_string(), u8::from(im.red).to_string()]
            .into_iter()
            .chain(im.pixels.iter().map(|v| fmt_f64(*v)));
        wr.write_record(row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Concatenated little-endian `f64` pixel arrays, no header.
pub fn write_images_binary<W: Write>(mut w: W, images: &[SynthImage]) -> Result<()> {
    for im in images {
        for v in &im.pixels {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn pixels_in_tanh_range() {
        let ims = synth_images(8, 5, 50, 1).unwrap();
        for im in &ims {
            assert_eq!(im.pixels.len(), 120);
            assert!(im.pixels.iter().all(|v| v.abs() < 1.0));
        }
        assert!(synth_image(0, 3, &mut chain_rng(1, 0)).is_err());
    }

    #[test]
    fn single_pixel_is_constant_in_q() {
        let im = synth_image(1, 1, &mut chain_rng(2, 0)).unwrap();
        for ch in 0..3 {
            assert!((im.pixels[ch] - (im.psi0[ch] + im.psi1[ch]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn class_balance_and_channel_mean() {
        let n = 20_000;
        let ims = synth_images(2, 2, n, 3).unwrap();
        let red = ims.iter().filter(|i| i.red).count() as f64 / n as f64;
        assert!((red - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        let mean = ims.iter().map(|i| i.channel_mean(0)).sum::<f64>() / n as f64;
        let center = 0.5 * (1.95f64.tanh() + 0.05f64.tanh());
        assert!((mean - center).abs() < 0.015, "{mean} vs {center}");
    }

    #[test]
    fn binary_layout() {
        let ims = synth_images(2, 1, 2, 4).unwrap();
        let mut buf = Vec::new();
        write_images_binary(&mut buf, &ims).unwrap();
        assert_eq!(buf.len(), 2 * 6 * 8);
        let first = f64::from_le_bytes(buf[..8].try_into().unwrap());
        assert_eq!(first, ims[0].pixel(0, 0, 0));
    }
}
