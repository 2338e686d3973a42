//! Per-pixel and per-Gaussian masks.

use crate::camera::Camera;
use crate::error::{Error, Result};

/// Binary image mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask2D {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::dimension(format!(
                "{} mask bits for a {width}x{height} image",
                bits.len()
            )));
        }
        Ok(Mask2D {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Mask2D {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn inverted(&self) -> Self {
        Mask2D {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn check_camera(&self, camera: &Camera) -> Result<()> {
        check_dims("mask", self.width, self.height, camera)
    }
}

/// Per-pixel label ids; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap2D {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u8>,
}

impl LabelMap2D {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::dimension(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        Ok(LabelMap2D {
            width,
            height,
            labels,
        })
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[(y * self.width + x) as usize]
    }

    /// Pixels carrying `label`.
    pub fn mask_of(&self, label: u8) -> Mask2D {
        Mask2D {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Errors if any id is not below `num_labels`.
    pub fn validate_labels(&self, num_labels: usize) -> Result<()> {
        match self
            .labels
            .iter()
            .position(|&l| usize::from(l) >= num_labels)
        {
            Some(i) => Err(Error::data(
                "label map",
                format!(
                    "pixel {i} has label {} but only {num_labels} labels are declared",
                    self.labels[i]
                ),
            )),
            None => Ok(()),
        }
    }

    pub fn check_camera(&self, camera: &Camera) -> Result<()> {
        check_dims("label map", self.width, self.height, camera)
    }
}

fn check_dims(what: &str, width: u32, height: u32, camera: &Camera) -> Result<()> {
    if (width, height) != (camera.width, camera.height) {
        return Err(Error::dimension(format!(
            "{what} is {width}x{height}, camera is {}x{}",
            camera.width, camera.height
        )));
    }
    Ok(())
}

/// Per-Gaussian membership flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianMask(pub Vec<bool>);

impl GaussianMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Set-level IoU between two Gaussian masks; 1 when both are empty.
    pub fn iou(&self, other: &GaussianMask) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::dimension(format!(
                "Gaussian masks of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.0.iter().zip(&other.0) {
            inter += usize::from(a && b);
            union += usize::from(a || b);
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }
}

impl From<Vec<bool>> for GaussianMask {
    fn from(bits: Vec<bool>) -> Self {
        GaussianMask(bits)
    }
}
