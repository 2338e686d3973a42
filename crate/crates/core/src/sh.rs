//! Real spherical-harmonic color evaluation, degrees 0 through 3.
//!
//! Basis ordering and sign conventions follow the reference 3DGS
//! implementation so trained scenes render with their intended colors.

use nalgebra::Vector3;

use crate::scene::sh_coeff_count;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values for every coefficient up to `degree` along unit `dir`.
/// Entries past `(degree + 1)^2` are zero.
pub fn basis(degree: usize, dir: Vector3<f64>) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (dir.x, dir.y, dir.z);
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// RGB along unit `dir`: `clamp(sum(basis * coeff) + 0.5, 0, 1)`.
///
/// `coeffs.len()` must be `(degree + 1)^2`.
pub fn eval_sh(degree: usize, coeffs: &[[f32; 3]], dir: Vector3<f64>) -> [f64; 3] {
    debug_assert_eq!(coeffs.len(), sh_coeff_count(degree));
    let b = basis(degree, dir);
    let mut rgb = [0.5; 3];
    for (weight, c) in b.iter().zip(coeffs) {
        for ch in 0..3 {
            rgb[ch] += weight * f64::from(c[ch]);
        }
    }
    rgb.map(|v| v.clamp(0.0, 1.0))
}

/// DC coefficient that renders as `rgb` when the higher bands are zero.
pub fn dc_for_rgb(rgb: [f64; 3]) -> [f32; 3] {
    rgb.map(|v| ((v - 0.5) / SH_C0) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs() -> Vec<Vector3<f64>> {
        // Fibonacci sphere
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Vector3::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect()
    }

    #[test]
    fn zero_coefficients_give_mid_gray() {
        let rgb = eval_sh(3, &[[0.0; 3]; 16], Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(rgb, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn dc_is_direction_independent() {
        let mut coeffs = vec![[0.0f32; 3]; 4];
        coeffs[0] = [(0.25 / SH_C0) as f32, 0.0, 0.0];
        for d in dirs().iter().step_by(97) {
            let rgb = eval_sh(1, &coeffs, *d);
            assert!((rgb[0] - 0.75).abs() < 1e-7);
            assert_eq!(rgb[1], 0.5);
            assert_eq!(rgb[2], 0.5);
        }
    }

    #[test]
    fn band_one_is_odd() {
        let mut coeffs = vec![[0.0f32; 3]; 4];
        coeffs[1] = [0.3, 0.0, 0.0];
        coeffs[2] = [0.1, 0.0, 0.0];
        coeffs[3] = [-0.2, 0.0, 0.0];
        let d = Vector3::new(0.3, -0.5, 0.8).normalize();
        let fwd = eval_sh(1, &coeffs, d)[0] - 0.5;
        let back = eval_sh(1, &coeffs, -d)[0] - 0.5;
        assert!(fwd.abs() > 1e-3);
        assert!((fwd + back).abs() < 1e-12);
    }

    #[test]
    fn bases_are_orthonormal_under_quadrature() {
        let pts = dirs();
        let w = 4.0 * std::f64::consts::PI / pts.len() as f64;
        let mut gram = [[0.0f64; 16]; 16];
        for d in &pts {
            let b = basis(3, *d);
            for i in 0..16 {
                for j in 0..16 {
                    gram[i][j] += w * b[i] * b[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 5e-3, "gram[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn dc_for_rgb_round_trips() {
        let dc = dc_for_rgb([1.0, 0.0, 0.25]);
        let rgb = eval_sh(0, &[dc], Vector3::z());
        assert!((rgb[0] - 1.0).abs() < 1e-6 && rgb[1] < 1e-6 && (rgb[2] - 0.25).abs() < 1e-6);
    }
}
