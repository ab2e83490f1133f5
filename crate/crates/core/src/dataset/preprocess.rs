use serde::{Deserialize, Serialize};

use crate::render::Frame;

/// Per-channel normalization applied to network inputs, channels in BGR
/// order. Defaults are the ImageNet statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub means: [f64; 3],
    pub stds: [f64; 3],
    pub target_width: u32,
    pub target_height: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            means: [0.406, 0.456, 0.485],
            stds: [0.225, 0.224, 0.229],
            target_width: 80,
            target_height: 45,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> bool {
        self.stds.iter().all(|s| *s > 0.0) && self.target_width > 0 && self.target_height > 0
    }
}

/// Planar (channel, row, column) real-valued image.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| *v as f64).collect()
    }
}

/// `out[c] = (pixel / 255 - mean[c]) / std[c]`, after resampling to the
/// target size when needed.
pub fn preprocess(frame: &Frame, config: &PreprocessConfig) -> Tensor3 {
    let frame = if frame.width() != config.target_width || frame.height() != config.target_height {
        frame.resize(config.target_width, config.target_height)
    } else {
        frame.clone()
    };
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let mut data = vec![0f32; 3 * w * h];
    for (idx, px) in frame.as_bgr().chunks_exact(3).enumerate() {
        for c in 0..3 {
            let v = (px[c] as f64 / 255.0 - config.means[c]) / config.stds[c];
            data[c * w * h + idx] = v as f32;
        }
    }
    Tensor3 {
        channels: 3,
        height: h,
        width: w,
        data,
    }
}

/// Inverse of [`preprocess`] (up to 8-bit rounding).
pub fn depreprocess(tensor: &Tensor3, config: &PreprocessConfig) -> Frame {
    let (w, h) = (tensor.width, tensor.height);
    let mut bgr = vec![0u8; 3 * w * h];
    for idx in 0..w * h {
        for c in 0..3 {
            let v = tensor.data[c * w * h + idx] as f64 * config.stds[c] + config.means[c];
            bgr[idx * 3 + c] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    Frame::from_bgr(w as u32, h as u32, bgr).expect("buffer sized from tensor")
}
