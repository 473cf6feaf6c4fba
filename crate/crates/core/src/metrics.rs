//! Fidelity (MSE / PSNR) and footprint (parameters / bytes) measurements.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::mlp::MlpModel;

/// Reference and reconstruction of equal size.
#[derive(Debug, Clone, Copy)]
pub struct ImagePair<'a> {
    reference: &'a RgbImage,
    candidate: &'a RgbImage,
}

impl<'a> ImagePair<'a> {
    pub fn new(reference: &'a RgbImage, candidate: &'a RgbImage) -> Result<Self> {
        if (reference.width(), reference.height()) != (candidate.width(), candidate.height()) {
            return Err(Error::shape(
                "ImagePair",
                format!(
                    "{}x{} vs {}x{}",
                    reference.width(),
                    reference.height(),
                    candidate.width(),
                    candidate.height()
                ),
            ));
        }
        Ok(Self {
            reference,
            candidate,
        })
    }

    pub fn reference(&self) -> &RgbImage {
        self.reference
    }

    pub fn candidate(&self) -> &RgbImage {
        self.candidate
    }
}

/// Peak signal-to-noise ratio in dB. Identical images have no finite PSNR.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    /// The finite value, or `None` for identical images.
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Finite(v) => Some(v),
            Psnr::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

/// Mean over all pixels and all three channels of the squared difference.
pub fn mse(pair: &ImagePair<'_>) -> f64 {
    let a = pair.reference.data();
    let b = pair.candidate.data();
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `10·log10(max² / mse)`; `Psnr::Infinite` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, max_value: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Infinite
    } else {
        Psnr::Finite(10.0 * (max_value * max_value / mse).log10())
    }
}

pub fn psnr(pair: &ImagePair<'_>, max_value: f64) -> Result<Psnr> {
    if !(max_value > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max_value must be positive, got {max_value}"
        )));
    }
    Ok(psnr_from_mse(mse(pair), max_value))
}

/// Stored weights plus biases.
pub fn param_count(model: &MlpModel) -> usize {
    model.param_count()
}

/// Checkpoint size: header plus four bytes per parameter.
pub fn model_size_bytes(model: &MlpModel) -> usize {
    checkpoint::header_len(&model.arch) + 4 * param_count(model)
}
