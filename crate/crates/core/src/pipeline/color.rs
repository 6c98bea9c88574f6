use alloc::string::ToString;
use core::f64::consts::TAU;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::image::Image;
use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorScheme {
    #[default]
    Rgb,
    Hsv,
    Lab,
    #[serde(alias = "ycb")]
    Ycbcr,
    /// HSV with hue replaced by (cos 2πH, sin 2πH), four channels.
    Hxy,
}

impl ColorScheme {
    pub fn channels(self) -> usize {
        match self {
            ColorScheme::Hxy => 4,
            _ => 3,
        }
    }
}

impl FromStr for ColorScheme {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(Self::Rgb),
            "hsv" => Ok(Self::Hsv),
            "lab" => Ok(Self::Lab),
            "ycbcr" | "ycb" => Ok(Self::Ycbcr),
            "hxy" => Ok(Self::Hxy),
            _ => Err(PipelineError::UnknownScheme(s.to_string())),
        }
    }
}

/// (H, S, V), all in [0, 1]; H is the hue angle as a fraction of a turn.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        let h = (g - b) / delta;
        if h < 0.0 { h + 6.0 } else { h }
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    [h / 6.0, s, max]
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        math::powf((c + 0.055) / 1.055, 2.4)
    }
}

/// CIE L*a*b* (D65 white) of an sRGB color; L in [0, 100].
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    const D: f64 = 6.0 / 29.0;
    let f = |t: f64| if t > D * D * D { math::cbrt(t) } else { t / (3.0 * D * D) + 4.0 / 29.0 };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// BT.601 full-range YCbCr, chroma offset to 0.5.
pub fn rgb_to_ycbcr([r, g, b]: [f64; 3]) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

/// Per-pixel conversion of a 3-channel RGB image. Every output channel is
/// scaled into [0, 1]: LAB stores (L/100, (a+128)/255, (b+128)/255).
pub fn color_convert(image: &Image, scheme: ColorScheme) -> Result<Image, PipelineError> {
    if image.channels != 3 {
        return Err(PipelineError::Channels { expected: 3, got: image.channels });
    }
    if scheme == ColorScheme::Rgb {
        return Ok(image.clone());
    }
    let n_out = scheme.channels();
    let mut out = Image::new(image.width, image.height, n_out);
    for (src, dst) in image.data.chunks_exact(3).zip(out.data.chunks_exact_mut(n_out)) {
        let rgb = [src[0] as f64, src[1] as f64, src[2] as f64];
        let px: [f64; 4] = match scheme {
            ColorScheme::Rgb => unreachable!(),
            ColorScheme::Hsv => {
                let [h, s, v] = rgb_to_hsv(rgb);
                [h, s, v, 0.0]
            }
            ColorScheme::Lab => {
                let [l, a, b] = rgb_to_lab(rgb);
                [l / 100.0, (a + 128.0) / 255.0, (b + 128.0) / 255.0, 0.0]
            }
            ColorScheme::Ycbcr => {
                let [y, cb, cr] = rgb_to_ycbcr(rgb);
                [y, cb, cr, 0.0]
            }
            ColorScheme::Hxy => {
                let [h, s, v] = rgb_to_hsv(rgb);
                [(math::cos(TAU * h) + 1.0) / 2.0, (math::sin(TAU * h) + 1.0) / 2.0, s, v]
            }
        };
        for (d, v) in dst.iter_mut().zip(px) {
            *d = v.clamp(0.0, 1.0) as f32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn red_in_hsv_and_hxy() {
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        let img = Image::filled(1, 1, &[1.0, 0.0, 0.0]);
        let hxy = color_convert(&img, ColorScheme::Hxy).unwrap();
        assert_eq!(hxy.channels, 4);
        assert_eq!(hxy.pixel(0, 0), [1.0, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn known_lab_values() {
        // reference values for sRGB red and white under D65
        let [l, a, b] = rgb_to_lab([1.0, 0.0, 0.0]);
        assert!((l - 53.24).abs() < 0.05 && (a - 80.09).abs() < 0.05 && (b - 67.20).abs() < 0.05);
        let [l, a, b] = rgb_to_lab([1.0, 1.0, 1.0]);
        assert!((l - 100.0).abs() < 1e-3 && a.abs() < 1e-3 && b.abs() < 1e-3);
    }

    #[test]
    fn ycbcr_of_gray_is_centered() {
        let [y, cb, cr] = rgb_to_ycbcr([0.4, 0.4, 0.4]);
        assert!((y - 0.4).abs() < 1e-12 && (cb - 0.5).abs() < 1e-6 && (cr - 0.5).abs() < 1e-6);
    }

    #[test]
    fn unknown_scheme() {
        assert_eq!("xyz".parse::<ColorScheme>(), Err(PipelineError::UnknownScheme("xyz".into())));
        assert_eq!("YCB".parse::<ColorScheme>(), Ok(ColorScheme::Ycbcr));
        assert!(color_convert(&Image::new(2, 2, 1), ColorScheme::Hsv).is_err());
    }

    #[test]
    fn dimensions_preserved() {
        let img = Image::filled(7, 5, &[0.2, 0.3, 0.4]);
        for s in [ColorScheme::Rgb, ColorScheme::Hsv, ColorScheme::Lab, ColorScheme::Ycbcr, ColorScheme::Hxy] {
            let out = color_convert(&img, s).unwrap();
            assert_eq!((out.width, out.height, out.channels), (7, 5, s.channels()));
        }
    }

    proptest! {
        #[test]
        fn gray_is_achromatic(v in 0.0..=1.0f64) {
            prop_assert_eq!(rgb_to_hsv([v, v, v])[1], 0.0);
            let [_, a, b] = rgb_to_lab([v, v, v]);
            prop_assert!(a.abs() < 1.0 && b.abs() < 1.0);
        }

        #[test]
        fn outputs_in_unit_range(r in 0.0..=1.0f32, g in 0.0..=1.0f32, b in 0.0..=1.0f32) {
            let img = Image::filled(1, 1, &[r, g, b]);
            for s in [ColorScheme::Hsv, ColorScheme::Lab, ColorScheme::Ycbcr, ColorScheme::Hxy] {
                let out = color_convert(&img, s).unwrap();
                prop_assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
