//! In-memory Gaussian splat scene.
//!
//! Attributes are stored post-activation (opacity in `[0, 1]`, positive
//! scales, unit quaternions) as structure-of-arrays in `f32`, the precision
//! of the on-disk format. Rendering promotes everything to `f64`.

use crate::error::{Error, Result};

/// Highest spherical-harmonic degree supported by the renderer.
pub const MAX_SH_DEGREE: usize = 3;

/// Number of SH coefficients per color channel for `degree`.
pub const fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// One Gaussian, owned. Used to build scenes and to read them back out.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: [f32; 3],
    /// Unit quaternion, `w` first.
    pub rotation: [f32; 4],
    pub scale: [f32; 3],
    pub opacity: f32,
    /// `(degree + 1)^2` RGB triples; index 0 is the DC term.
    pub sh: Vec<[f32; 3]>,
}

impl Gaussian {
    /// An isotropic, unrotated Gaussian with a DC-only color.
    pub fn isotropic(mean: [f32; 3], scale: f32, opacity: f32, dc: [f32; 3]) -> Self {
        Gaussian {
            mean,
            rotation: [1.0, 0.0, 0.0, 0.0],
            scale: [scale; 3],
            opacity,
            sh: vec![dc],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianScene {
    sh_degree: usize,
    means: Vec<[f32; 3]>,
    rotations: Vec<[f32; 4]>,
    scales: Vec<[f32; 3]>,
    opacities: Vec<f32>,
    sh: Vec<[f32; 3]>,
}

impl GaussianScene {
    pub fn new(sh_degree: usize) -> Result<Self> {
        if sh_degree > MAX_SH_DEGREE {
            return Err(Error::data(
                "scene",
                format!("sh_degree {sh_degree} exceeds {MAX_SH_DEGREE}"),
            ));
        }
        Ok(GaussianScene {
            sh_degree,
            means: Vec::new(),
            rotations: Vec::new(),
            scales: Vec::new(),
            opacities: Vec::new(),
            sh: Vec::new(),
        })
    }

    /// Builds a scene, padding DC-only Gaussians with zero higher bands when
    /// `sh_degree > 0`.
    pub fn from_gaussians(
        sh_degree: usize,
        gaussians: impl IntoIterator<Item = Gaussian>,
    ) -> Result<Self> {
        let mut scene = Self::new(sh_degree)?;
        let coeffs = sh_coeff_count(sh_degree);
        for mut g in gaussians {
            if g.sh.len() == 1 && coeffs > 1 {
                g.sh.resize(coeffs, [0.0; 3]);
            }
            scene.push(g)?;
        }
        Ok(scene)
    }

    /// Appends a Gaussian after validating it. The quaternion is normalized.
    pub fn push(&mut self, mut g: Gaussian) -> Result<()> {
        let index = self.len();
        let ctx = || format!("gaussian {index}");
        let finite = g.mean.iter().all(|v| v.is_finite())
            && g.rotation.iter().all(|v| v.is_finite())
            && g.scale.iter().all(|v| v.is_finite())
            && g.opacity.is_finite()
            && g.sh.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::data(ctx(), "non-finite attribute"));
        }
        if g.sh.len() != self.coeffs_per_gaussian() {
            return Err(Error::data(
                ctx(),
                format!(
                    "{} SH coefficients, expected {} for degree {}",
                    g.sh.len(),
                    self.coeffs_per_gaussian(),
                    self.sh_degree
                ),
            ));
        }
        if g.scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::data(ctx(), "scale must be strictly positive"));
        }
        if !(0.0..=1.0).contains(&g.opacity) {
            return Err(Error::data(ctx(), "opacity outside [0, 1]"));
        }
        let norm = g
            .rotation
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm < 1e-12 {
            return Err(Error::data(ctx(), "zero-norm rotation quaternion"));
        }
        for v in &mut g.rotation {
            *v = (f64::from(*v) / norm) as f32;
        }

        self.means.push(g.mean);
        self.rotations.push(g.rotation);
        self.scales.push(g.scale);
        self.opacities.push(g.opacity);
        self.sh.extend_from_slice(&g.sh);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn sh_degree(&self) -> usize {
        self.sh_degree
    }

    pub fn coeffs_per_gaussian(&self) -> usize {
        sh_coeff_count(self.sh_degree)
    }

    pub fn means(&self) -> &[[f32; 3]] {
        &self.means
    }

    pub fn rotations(&self) -> &[[f32; 4]] {
        &self.rotations
    }

    pub fn scales(&self) -> &[[f32; 3]] {
        &self.scales
    }

    pub fn opacities(&self) -> &[f32] {
        &self.opacities
    }

    pub fn sh(&self, index: usize) -> &[[f32; 3]] {
        let n = self.coeffs_per_gaussian();
        &self.sh[index * n..(index + 1) * n]
    }

    /// Mutable SH coefficients. Colors carry no invariant beyond finiteness,
    /// which the renderer tolerates anyway.
    pub fn sh_mut(&mut self, index: usize) -> &mut [[f32; 3]] {
        let n = self.coeffs_per_gaussian();
        &mut self.sh[index * n..(index + 1) * n]
    }

    pub fn gaussian(&self, index: usize) -> Gaussian {
        Gaussian {
            mean: self.means[index],
            rotation: self.rotations[index],
            scale: self.scales[index],
            opacity: self.opacities[index],
            sh: self.sh(index).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Gaussian> + '_ {
        (0..self.len()).map(|i| self.gaussian(i))
    }

    /// Keeps the Gaussians whose flag is `true`, preserving order.
    pub fn select(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.len() {
            return Err(Error::dimension(format!(
                "mask has {} entries, scene has {} Gaussians",
                keep.len(),
                self.len()
            )));
        }
        let n = self.coeffs_per_gaussian();
        let mut out = Self::new(self.sh_degree)?;
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            out.means.push(self.means[i]);
            out.rotations.push(self.rotations[i]);
            out.scales.push(self.scales[i]);
            out.opacities.push(self.opacities[i]);
            out.sh.extend_from_slice(&self.sh[i * n..(i + 1) * n]);
        }
        Ok(out)
    }

    /// Appends every Gaussian of `other`. Both scenes must share an SH degree.
    pub fn extend_from(&mut self, other: &GaussianScene) -> Result<()> {
        if other.sh_degree != self.sh_degree {
            return Err(Error::dimension(format!(
                "cannot merge SH degree {} into degree {}",
                other.sh_degree, self.sh_degree
            )));
        }
        self.means.extend_from_slice(&other.means);
        self.rotations.extend_from_slice(&other.rotations);
        self.scales.extend_from_slice(&other.scales);
        self.opacities.extend_from_slice(&other.opacities);
        self.sh.extend_from_slice(&other.sh);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Gaussian {
        Gaussian::isotropic([0.0; 3], 0.1, 0.5, [0.0; 3])
    }

    #[test]
    fn push_normalizes_quaternion() {
        let mut scene = GaussianScene::new(0).unwrap();
        let mut g = unit();
        g.rotation = [2.0, 0.0, 0.0, 0.0];
        scene.push(g).unwrap();
        assert_eq!(scene.rotations()[0], [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn push_rejects_invalid_attributes() {
        let mut scene = GaussianScene::new(0).unwrap();
        let mut g = unit();
        g.scale[1] = 0.0;
        assert!(matches!(scene.push(g), Err(Error::Data { .. })));
        let mut g = unit();
        g.opacity = 1.5;
        assert!(scene.push(g).is_err());
        let mut g = unit();
        g.mean[2] = f32::NAN;
        assert!(scene.push(g).is_err());
        let mut g = unit();
        g.sh.push([0.0; 3]);
        assert!(scene.push(g).is_err());
        assert!(GaussianScene::new(4).is_err());
    }

    #[test]
    fn from_gaussians_pads_higher_bands() {
        let scene = GaussianScene::from_gaussians(2, [unit()]).unwrap();
        assert_eq!(scene.sh(0).len(), 9);
    }

    #[test]
    fn select_keeps_order_and_checks_length() {
        let gs = (0..4).map(|i| Gaussian::isotropic([i as f32, 0.0, 0.0], 0.1, 0.5, [0.0; 3]));
        let scene = GaussianScene::from_gaussians(0, gs).unwrap();
        let picked = scene.select(&[true, false, true, false]).unwrap();
        assert_eq!(picked.means(), &[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(scene.select(&[true]), Err(Error::Dimension(_))));
    }
}
