use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::tensor::Matrix;

use super::model::{predict, MlpModel};

/// Maps pixel index `i` of `n` to the centre of its cell in `[-1, 1]`.
pub fn pixel_center(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0) / n as f64 - 1.0
}

/// Pixel-centre coordinates of a `width × height` grid, row-major, as `(x, y)` rows.
pub fn grid_coords(width: usize, height: usize) -> Matrix {
    Matrix::from_fn(width * height, 2, |r, c| {
        if c == 0 {
            pixel_center(r % width, width)
        } else {
            pixel_center(r / width, height)
        }
    })
}

/// `(coordinate, colour)` training pairs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDataset {
    width: usize,
    height: usize,
    coords: Matrix,
    colors: Matrix,
}

impl PixelDataset {
    pub fn from_image(image: &RgbImage) -> Self {
        let (w, h) = (image.width(), image.height());
        let colors = Matrix::from_vec(w * h, 3, image.data().to_vec())
            .expect("image data is finite and 3 channels per pixel");
        Self {
            width: w,
            height: h,
            coords: grid_coords(w, h),
            colors,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `n × 2` coordinates in `[-1, 1]²`.
    pub fn coords(&self) -> &Matrix {
        &self.coords
    }

    /// `n × 3` colours in `[0, 1]`.
    pub fn colors(&self) -> &Matrix {
        &self.colors
    }

    pub fn sample(&self, i: usize) -> ([f64; 2], [f64; 3]) {
        let c = self.coords.row(i);
        let k = self.colors.row(i);
        ([c[0], c[1]], [k[0], k[1], k[2]])
    }

    /// The source image, rebuilt from the stored colours.
    pub fn to_image(&self) -> RgbImage {
        RgbImage::new(self.width, self.height, self.colors.data().to_vec())
            .expect("dataset colours are in range")
    }
}

/// Reads a binary PPM into normalized training pairs.
pub fn load_image_dataset(path: impl AsRef<Path>) -> Result<PixelDataset> {
    Ok(PixelDataset::from_image(&RgbImage::read_ppm(path)?))
}

const RENDER_CHUNK: usize = 4096;

/// Evaluates `model` at every pixel centre of a `width × height` grid.
pub fn render_image(model: &MlpModel, width: usize, height: usize) -> Result<RgbImage> {
    if model.arch.input_dim != 2 {
        return Err(Error::InvalidArgument(format!(
            "rendering needs a 2-input model, got {}",
            model.arch.input_dim
        )));
    }
    let coords = grid_coords(width, height);
    let mut data = Vec::with_capacity(width * height * 3);
    let n = coords.rows();
    let mut start = 0;
    while start < n {
        let end = (start + RENDER_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let out = predict(model, &coords.select_rows(&idx))?;
        data.extend(out.data().iter().map(|v| v.clamp(0.0, 1.0)));
        start = end;
    }
    RgbImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::ArchSpec;

    #[test]
    fn two_by_two_fixture() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 102, 153]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        std::fs::write(&path, &bytes).unwrap();
        let ds = load_image_dataset(&path).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.sample(0), ([-0.5, -0.5], [1.0, 0.0, 0.0]));
        assert_eq!(ds.sample(1), ([0.5, -0.5], [0.0, 1.0, 0.0]));
        assert_eq!(ds.sample(2), ([-0.5, 0.5], [0.0, 0.0, 1.0]));
        assert_eq!(ds.sample(3), ([0.5, 0.5], [0.2, 0.4, 0.6]));
        assert_eq!(ds.to_image().to_ppm(), bytes);
    }

    #[test]
    fn zero_dimension_file_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.ppm");
        std::fs::write(&path, b"P6\n0 0\n255\n").unwrap();
        assert!(matches!(load_image_dataset(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn zero_model_renders_gray() {
        let model = MlpModel::zeros(ArchSpec::proxy(2, 4, 1, 2)).unwrap();
        let img = render_image(&model, 5, 3).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn one_pixel_render_evaluates_origin() {
        let mut rng = crate::tensor::RngStream::new(6);
        let model = MlpModel::init(ArchSpec::proxy(2, 8, 1, 3), &mut rng).unwrap();
        let img = render_image(&model, 1, 1).unwrap();
        let at_origin = predict(&model, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(img.data(), at_origin.data());
        assert_eq!(pixel_center(0, 1), 0.0);
    }
}
