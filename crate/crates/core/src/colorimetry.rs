//! Neutral-gray CIELAB (D65, 2° observer) to 8-bit sRGB and back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// D65 reference white, 2° observer.
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

/// XYZ -> linear sRGB (IEC 61966-2-1).
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

/// Linear sRGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayColor {
    pub lightness: f64,
    pub srgb: [u8; 3],
}

impl GrayColor {
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.srgb[0], self.srgb[1], self.srgb[2])
    }
}

fn lab_f_inv(t: f64) -> f64 {
    let t3 = t * t * t;
    if t3 > EPSILON {
        t3
    } else {
        (116.0 * t - 16.0) / KAPPA
    }
}

fn lab_f(r: f64) -> f64 {
    if r > EPSILON {
        r.cbrt()
    } else {
        (KAPPA * r + 16.0) / 116.0
    }
}

fn gamma_encode(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn gamma_decode(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Neutral gray (a* = b* = 0) at `lstar`, rounded half-up to 8 bits.
pub fn lightness_to_srgb(lstar: f64) -> Result<GrayColor> {
    if !(0.0..=100.0).contains(&lstar) {
        return Err(Error::LightnessOutOfRange(lstar));
    }
    let fy = (lstar + 16.0) / 116.0;
    // a* = b* = 0 gives fx = fz = fy.
    let ratio = lab_f_inv(fy);
    let xyz = [WHITE[0] * ratio, WHITE[1] * ratio, WHITE[2] * ratio];
    let rgb = mat_vec(&XYZ_TO_RGB, xyz);
    let mut srgb = [0u8; 3];
    for (out, c) in srgb.iter_mut().zip(rgb) {
        let v = gamma_encode(c.clamp(0.0, 1.0)) * 255.0;
        *out = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    // Matrix rounding can split channels by one step; a neutral gray is
    // defined by its luminance channel.
    let g = srgb[1];
    Ok(GrayColor {
        lightness: lstar,
        srgb: [g, g, g],
    })
}

/// Inverse pipeline: 8-bit sRGB triple to L*.
pub fn srgb_to_lightness(rgb: [u8; 3]) -> f64 {
    let lin = rgb.map(|c| gamma_decode(c as f64 / 255.0));
    let xyz = mat_vec(&RGB_TO_XYZ, lin);
    116.0 * lab_f(xyz[1] / WHITE[1]) - 16.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(lightness_to_srgb(0.0).unwrap().srgb, [0, 0, 0]);
        assert_eq!(lightness_to_srgb(100.0).unwrap().srgb, [255, 255, 255]);
    }

    #[test]
    fn mid_gray() {
        // Y = ((53.59 + 16) / 116)^3 = 0.21590; 1.055 * Y^(1/2.4) - 0.055 = 0.50155
        // -> 127.9 -> 128.
        let y: f64 = ((53.59f64 + 16.0) / 116.0).powi(3);
        let encoded = 1.055 * y.powf(1.0 / 2.4) - 0.055;
        assert_eq!((encoded * 255.0 + 0.5).floor(), 128.0);
        assert_eq!(lightness_to_srgb(53.59).unwrap().srgb, [128, 128, 128]);
    }

    #[test]
    fn out_of_range() {
        assert!(lightness_to_srgb(-0.1).is_err());
        assert!(lightness_to_srgb(100.5).is_err());
    }

    #[test]
    fn monotone() {
        let mut prev = 0u8;
        for i in 0..=1000 {
            let g = lightness_to_srgb(i as f64 / 10.0).unwrap().srgb[0];
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn hex_format() {
        assert_eq!(lightness_to_srgb(100.0).unwrap().hex(), "#ffffff");
    }
}
