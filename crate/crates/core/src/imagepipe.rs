//! Image separation: RGB pixels are pushed onto the colour-cube surface,
//! mapped radially to the unit sphere and stereographically to ℂ, so each
//! image becomes one complex component of a `T = width·height` series.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimators::TimeSeries;
use crate::linalg::{CMat, C64};
use crate::metrics::{self, MetricsError};
use crate::unmixer::{self, UnmixError, UnmixingResult};

const SURFACE_TOL: f64 = 1e-9;
const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("point {0:?} is not on the cube surface")]
    OffSurface([f64; 3]),
    #[error("the north pole has no stereographic image")]
    NorthPole,
    #[error("image dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("image has {got} pixels, expected {expected}")]
    PixelCount { got: usize, expected: usize },
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Unmix(#[from] UnmixError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, ImageError>;

/// 8-bit RGB image, pixels stored row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImageError::PixelCount { got: pixels.len(), expected: width * height });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [u8; 3]) {
        self.pixels[y * self.width + x] = px;
    }

    pub fn is_on_surface(&self) -> bool {
        self.pixels.iter().all(|p| is_surface_pixel(*p))
    }
}

/// Complex image; `values` are in column-major order (`t = x·height + y`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<C64>,
}

impl ComplexImage {
    pub fn get(&self, x: usize, y: usize) -> C64 {
        self.values[x * self.height + y]
    }

    pub fn rotate(&self, theta: f64) -> ComplexImage {
        let w = C64::from_polar(1.0, theta);
        ComplexImage { values: self.values.iter().map(|z| z * w).collect(), ..*self }
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| complex_to_pixel(self.get(x, y)))
    }
}

fn centered(v: u8) -> f64 {
    2.0 * f64::from(v) / 255.0 - 1.0
}

fn quantize(p: f64) -> u8 {
    ((p + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

pub fn is_surface_pixel(px: [u8; 3]) -> bool {
    px.iter().any(|&v| v == 0 || v == 255)
}

/// Nearest cube-surface point of a colour in `[0,1]³`.
pub fn correct_pixel(c: [f64; 3]) -> [f64; 3] {
    let p = c.map(|v| 2.0 * v - 1.0);
    let mut i = 0;
    for k in 1..3 {
        // rounding in 2c − 1 must not override the R > G > B tie order
        if p[k].abs() > p[i].abs() + 1e-12 {
            i = k;
        }
    }
    let mut out = p;
    out[i] = if p[i] < 0.0 { -1.0 } else { 1.0 };
    out.map(|v| (v + 1.0) / 2.0)
}

fn correct_u8(px: [u8; 3]) -> [u8; 3] {
    // |2v − 255| compares the centred magnitudes exactly
    let mag = px.map(|v| (2 * i32::from(v) - 255).abs());
    let mut i = 0;
    for k in 1..3 {
        if mag[k] > mag[i] {
            i = k;
        }
    }
    let mut out = px;
    out[i] = if px[i] < 128 { 0 } else { 255 };
    out
}

pub fn color_correct(img: &RgbImage) -> RgbImage {
    RgbImage { pixels: img.pixels.iter().map(|&p| correct_u8(p)).collect(), ..*img }
}

/// Radial projection of a centred cube-surface point onto the unit sphere.
pub fn cube_to_sphere(p: [f64; 3]) -> Result<[f64; 3]> {
    let m = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !p.iter().all(|v| v.is_finite()) || (m - 1.0).abs() > SURFACE_TOL {
        return Err(ImageError::OffSurface(p));
    }
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    Ok(p.map(|v| v / n))
}

pub fn sphere_to_cube(s: [f64; 3]) -> [f64; 3] {
    let m = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    s.map(|v| v / m)
}

/// Projection from the north pole onto the equatorial plane.
pub fn stereographic(s: [f64; 3]) -> Result<C64> {
    if s[2] >= 1.0 - POLE_TOL {
        return Err(ImageError::NorthPole);
    }
    let w = C64::new(s[0], s[1]);
    if s[2] <= 0.0 {
        Ok(w / (1.0 - s[2]))
    } else {
        // 1 − s₃ = (s₁² + s₂²)/(1 + s₃) avoids cancellation near the pole
        Ok(w * (1.0 + s[2]) / w.norm_sqr())
    }
}

pub fn inverse_stereographic(z: C64) -> [f64; 3] {
    let r2 = z.norm_sqr();
    let d = 1.0 + r2;
    [2.0 * z.re / d, 2.0 * z.im / d, (r2 - 1.0) / d]
}

/// Surface pixel to ℂ.
pub fn pixel_to_complex(px: [u8; 3]) -> Result<C64> {
    stereographic(cube_to_sphere(px.map(centered))?)
}

/// ℂ back to the nearest 8-bit surface colour.
pub fn complex_to_pixel(z: C64) -> [u8; 3] {
    if !z.is_finite() {
        // the point at infinity is the north pole
        return [128, 128, 255];
    }
    sphere_to_cube(inverse_stereographic(z)).map(quantize)
}

/// Colour-corrects and maps an image to ℂ. Pixels hitting the north pole are
/// moved one quantization step in R (away from the pole) and counted.
pub fn image_to_complex(img: &RgbImage) -> (ComplexImage, usize) {
    let corrected = color_correct(img);
    let mut values = Vec::with_capacity(img.width * img.height);
    let mut perturbed = 0;
    for x in 0..img.width {
        for y in 0..img.height {
            let mut px = corrected.get(x, y);
            let z = loop {
                match pixel_to_complex(px) {
                    Ok(z) => break z,
                    Err(_) => {
                        px[0] = if px[0] < 255 { px[0] + 1 } else { px[0] - 1 };
                        perturbed += 1;
                    }
                }
            };
            values.push(z);
        }
    }
    (ComplexImage { width: img.width, height: img.height, values }, perturbed)
}

/// Recolours a surface image by multiplying its ℂ representation by `e^{iθ}`.
pub fn phase_rotate(img: &RgbImage, theta: f64) -> RgbImage {
    image_to_complex(img).0.rotate(theta).to_rgb()
}

#[derive(Debug, Clone, PartialEq)]
pub enum MixingChoice {
    Identity,
    Known(CMat),
    /// `A = (I + E + iF)ᵀ`, entries of `E`, `F` uniform on `(−½, ½)`.
    Random { seed: u64 },
}

/// The random mixing matrix drawn for `seed`.
pub fn random_mixing(seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = CMat::identity(3);
    for j in 0..3 {
        for k in 0..3 {
            let e: f64 = rng.random_range(-0.5..0.5);
            let f: f64 = rng.random_range(-0.5..0.5);
            m[(j, k)] += C64::new(e, f);
        }
    }
    // images enter as columns of Z and are mixed as Z·M, i.e. x_t = Mᵀ z_t
    m.transpose()
}

#[derive(Debug, Clone)]
pub struct Separation {
    pub mixing: CMat,
    pub mixed: Vec<RgbImage>,
    pub unmixed: Vec<RgbImage>,
    /// Recovered components, one complex image per row of Γ̂.
    pub recovered: Vec<ComplexImage>,
    pub fit: UnmixingResult,
    pub md: f64,
    pub perturbed: usize,
}

fn stack(images: &[ComplexImage]) -> Result<TimeSeries> {
    let cols: Vec<Vec<C64>> = images.iter().map(|c| c.values.clone()).collect();
    TimeSeries::from_columns(&cols).map_err(|e| ImageError::Unmix(e.into()))
}

fn unstack(x: &TimeSeries, width: usize, height: usize) -> Vec<ComplexImage> {
    (0..x.dim()).map(|k| ComplexImage { width, height, values: x.column(k) }).collect()
}

/// Converts three images to a complex series.
pub fn images_to_series(imgs: &[RgbImage]) -> Result<(TimeSeries, usize)> {
    let Some(first) = imgs.first() else {
        return Err(ImageError::DimensionMismatch("no images".into()));
    };
    for (i, im) in imgs.iter().enumerate() {
        if (im.width, im.height) != (first.width, first.height) {
            return Err(ImageError::DimensionMismatch(format!(
                "image {} is {}x{}, image 1 is {}x{}",
                i + 1,
                im.width,
                im.height,
                first.width,
                first.height
            )));
        }
    }
    if first.width * first.height < 4 {
        return Err(ImageError::DimensionMismatch("images need at least 4 pixels".into()));
    }
    let mut perturbed = 0;
    let complex: Vec<ComplexImage> = imgs
        .iter()
        .map(|im| {
            let (c, n) = image_to_complex(im);
            perturbed += n;
            c
        })
        .collect();
    Ok((stack(&complex)?, perturbed))
}

pub fn separate_images(imgs: &[RgbImage], mixing: &MixingChoice, tau: usize) -> Result<Separation> {
    if imgs.len() != 3 {
        return Err(ImageError::DimensionMismatch(format!("expected 3 images, got {}", imgs.len())));
    }
    let (z, perturbed) = images_to_series(imgs)?;
    let (w, h) = (imgs[0].width, imgs[0].height);
    let a = match mixing {
        MixingChoice::Identity => CMat::identity(3),
        MixingChoice::Known(a) => a.clone(),
        MixingChoice::Random { seed } => random_mixing(*seed),
    };
    let x = z.affine(&a, &[C64::new(0.0, 0.0); 3]).map_err(|e| ImageError::Unmix(e.into()))?;
    let fit = unmixer::unmix(&x, tau)?;
    let md = metrics::md_index(&fit.gamma, &a)?;
    let recovered = unstack(&unmixer::apply_unmixing(&fit, &x)?, w, h);
    let mixed = unstack(&x, w, h).iter().map(ComplexImage::to_rgb).collect();
    let unmixed = recovered.iter().map(ComplexImage::to_rgb).collect();
    Ok(Separation { mixing: a, mixed, unmixed, recovered, fit, md, perturbed })
}

fn ppm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(ImageError::Ppm("unexpected end of header".into()));
            }
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut line = Vec::new();
                r.read_until(b'\n', &mut line)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            c => tok.push(c),
        }
    }
    String::from_utf8(tok).map_err(|_| ImageError::Ppm("non-ASCII header".into()))
}

/// Reads a binary PPM (P6) with maxval 255.
pub fn read_ppm<R: Read>(reader: R) -> Result<RgbImage> {
    let mut r = BufReader::new(reader);
    if ppm_token(&mut r)? != "P6" {
        return Err(ImageError::Ppm("missing P6 magic".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = ppm_token(&mut r)?;
        t.parse().map_err(|_| ImageError::Ppm(format!("bad {what} '{t}'")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(ImageError::Ppm(format!("maxval {maxval} unsupported (need 255)")));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::Ppm("empty image".into()));
    }
    let mut data = vec![0u8; width * height * 3];
    r.read_exact(&mut data).map_err(|_| ImageError::Ppm("truncated pixel data".into()))?;
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    RgbImage::new(width, height, pixels)
}

pub fn write_ppm<W: Write>(img: &RgbImage, mut w: W) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    let data: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    w.write_all(&data)?;
    Ok(())
}

pub fn load_ppm(path: &Path) -> Result<RgbImage> {
    read_ppm(std::fs::File::open(path)?)
}

pub fn save_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    write_ppm(img, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Deterministic synthetic test images.
pub mod synthetic {
    use super::*;

    /// Height of the [`uncorrelated`] images.
    pub const STRIPE_HEIGHT: usize = 8;

    // Column profiles over {±1, ±i} as powers of i: each sums to zero, the
    // three are pairwise orthogonal, their symmetrized lag-1 cross sums
    // vanish, and the column wrap (row 7 → row 0 of the next column) cancels
    // because every profile starts at 1 and ends at i. Lag-1 autocorrelations
    // are 4, 0 and −4 per column, in that order.
    const PROFILES: [[u8; 8]; 3] = [
        [0, 0, 3, 3, 2, 2, 1, 1],
        [0, 3, 2, 1, 0, 3, 2, 1],
        [0, 2, 1, 3, 2, 0, 3, 1],
    ];

    const BASES: [[u8; 3]; 3] = [[255, 90, 30], [40, 255, 200], [120, 10, 255]];

    /// Multiplies the ℂ value of a surface pixel by `i^q`. Exact in 8 bits:
    /// `i` maps `(p₁, p₂) ↦ (−p₂, p₁)` in centred coordinates.
    pub fn rotate_quarter(px: [u8; 3], q: u8) -> [u8; 3] {
        let mut p = px;
        for _ in 0..q % 4 {
            p = [255 - p[1], p[0], p[2]];
        }
        p
    }

    /// Three horizontally striped `width × 8` images whose ℂ representations
    /// are uncorrelated (up to rounding) at lags 0, 1, 8 and 9. Their lag-1
    /// and lag-9 autocorrelations are distinct and decreasing, so with no
    /// mixing the unmixing matrix is diagonal. At lag 8 every image is
    /// periodic and the components cannot be told apart.
    pub fn uncorrelated(width: usize) -> [RgbImage; 3] {
        std::array::from_fn(|k| {
            RgbImage::from_fn(width, STRIPE_HEIGHT, |_, y| rotate_quarter(BASES[k], PROFILES[k][y]))
        })
    }

    fn hash(mut v: u64) -> u64 {
        v = (v ^ (v >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
        v = (v ^ (v >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        v ^ (v >> 33)
    }

    fn unit(v: u64) -> f64 {
        (hash(v) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Three structured images with very different spatial correlation:
    /// a smooth colour gradient, a mosaic of 8×8 tiles and per-pixel noise.
    pub fn structured(width: usize, height: usize) -> [RgbImage; 3] {
        use std::f64::consts::TAU;
        let gradient = RgbImage::from_fn(width, height, |x, y| {
            let u = x as f64 / width as f64;
            let v = y as f64 / height as f64;
            let r = 0.3 + 1.2 * v;
            complex_to_pixel(C64::from_polar(r, TAU * (0.8 * u + 0.3 * v)))
        });
        let tiles = RgbImage::from_fn(width, height, |x, y| {
            let cell = ((x / 8) * 7919 + (y / 8) * 104_729) as u64;
            let r = 0.2 + 1.6 * unit(cell);
            complex_to_pixel(C64::from_polar(r, TAU * unit(cell ^ 0xabcd)))
        });
        let noise = RgbImage::from_fn(width, height, |x, y| {
            let id = (y * width + x) as u64 + (1 << 40);
            let r = 0.2 + 1.6 * unit(id);
            complex_to_pixel(C64::from_polar(r, TAU * unit(id ^ 0x5555)))
        });
        [gradient, tiles, noise]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn correction_examples() {
        assert!(close3(correct_pixel([1.0, 0.4, 0.5]), [1.0, 0.4, 0.5], 1e-15));
        assert!(close3(correct_pixel([0.7, 0.4, 0.5]), [1.0, 0.4, 0.5], 1e-15));
        assert!(close3(correct_pixel([0.5, 0.5, 0.5]), [1.0, 0.5, 0.5], 1e-15));
        assert!(close3(correct_pixel([0.2, 0.5, 0.8]), [0.0, 0.5, 0.8], 1e-15));
        assert!(close3(correct_pixel([0.1, 0.5, 0.8]), [0.0, 0.5, 0.8], 1e-15));
    }

    #[test]
    fn correction_reaches_the_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = RgbImage::from_fn(40, 30, |_, _| [rng.random(), rng.random(), rng.random()]);
        let c = color_correct(&img);
        assert!(c.is_on_surface());
        // already-surface images are left alone
        assert_eq!(color_correct(&c), c);
        // agrees with the real-valued rule
        for (a, b) in img.pixels().iter().zip(c.pixels()) {
            let f = correct_pixel(a.map(|v| f64::from(v) / 255.0));
            assert!(close3(f, b.map(|v| f64::from(v) / 255.0), 1e-12));
        }
    }

    #[test]
    fn sphere_examples() {
        assert!(close3(cube_to_sphere([1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0], 1e-15));
        let r = 1.0 / 3f64.sqrt();
        assert!(close3(cube_to_sphere([1.0, 1.0, 1.0]).unwrap(), [r, r, r], 1e-15));
        assert!(cube_to_sphere([0.5, 0.2, 0.1]).is_err());
        let p = [-0.3, 1.0, 0.77];
        assert!(close3(sphere_to_cube(cube_to_sphere(p).unwrap()), p, 1e-12));
    }

    #[test]
    fn stereographic_examples() {
        assert!(stereographic([0.0, 0.0, -1.0]).unwrap().norm() < 1e-15);
        assert!((stereographic([1.0, 0.0, 0.0]).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((stereographic([0.0, 1.0, 0.0]).unwrap() - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(matches!(stereographic([0.0, 0.0, 1.0]), Err(ImageError::NorthPole)));
    }

    #[test]
    fn stereographic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let r = 10f64.powf(rng.random_range(-6.0..6.0));
            let z = C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU));
            let back = stereographic(inverse_stereographic(z)).unwrap();
            assert!((back - z).norm() <= 1e-9 * z.norm(), "{z} -> {back}");
        }
    }

    #[test]
    fn surface_pixels_survive_the_round_trip() {
        for v in 0..=255u8 {
            for fixed in [0u8, 255] {
                for px in [[fixed, v, 255 - v], [v, fixed, v / 2], [v / 3, 200, fixed]] {
                    assert_eq!(complex_to_pixel(pixel_to_complex(px).unwrap()), px);
                }
            }
        }
    }

    #[test]
    fn quarter_rotation_is_exact() {
        let px = [255, 90, 30];
        let z = pixel_to_complex(px).unwrap();
        for q in 0..4u8 {
            let w = pixel_to_complex(synthetic::rotate_quarter(px, q)).unwrap();
            let expect = z * C64::new(0.0, 1.0).powu(q as u32);
            assert!((w - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn column_major_vectorization() {
        let img = RgbImage::from_fn(3, 2, |x, y| [if x == 2 && y == 0 { 0 } else { 255 }, 40, 40]);
        let (c, _) = image_to_complex(&img);
        // t = x·height + y, so (x=2, y=0) sits at t = 4
        let odd = pixel_to_complex([0, 40, 40]).unwrap();
        assert_eq!(c.values[4], odd);
        assert_eq!(c.get(2, 0), odd);
    }

    #[test]
    fn identity_mixing_recovers_uncorrelated_images() {
        let imgs = synthetic::uncorrelated(48);
        for tau in [1, 9] {
            let s = separate_images(&imgs, &MixingChoice::Identity, tau).unwrap();
            assert!(s.md < 1e-8, "tau {tau}: MD {}", s.md);
            assert_eq!(s.perturbed, 0);
        }
        // recovered components are the standardized originals up to a phase
        let s = separate_images(&imgs, &MixingChoice::Identity, 1).unwrap();
        let (z, _) = images_to_series(&imgs).unwrap();
        for rec in &s.recovered {
            let k = (0..3)
                .max_by(|&a, &b| {
                    let c = |k: usize| corr(&rec.values, &z.column(k));
                    c(a).total_cmp(&c(b))
                })
                .unwrap();
            assert!((corr(&rec.values, &z.column(k)) - 1.0).abs() < 1e-10);
        }
    }

    fn corr(a: &[C64], b: &[C64]) -> f64 {
        let ip: C64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
        let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
        ip.norm() / (na * nb).sqrt()
    }

    #[test]
    fn random_mixing_is_seeded() {
        assert_eq!(random_mixing(3), random_mixing(3));
        assert_ne!(random_mixing(3), random_mixing(4));
        let m = random_mixing(3).transpose();
        for j in 0..3 {
            for k in 0..3 {
                let e = m[(j, k)] - if j == k { 1.0 } else { 0.0 };
                assert!(e.re.abs() < 0.5 && e.im.abs() < 0.5);
            }
        }
    }

    #[test]
    fn phase_rotation_recolours_bijectively() {
        let img = color_correct(&synthetic::structured(32, 24)[1]);
        let (c, _) = image_to_complex(&img);
        let mut seen = Vec::new();
        for theta in [1.0, 3.0, 5.0].map(|k| k * std::f64::consts::FRAC_PI_4) {
            let back = c.rotate(theta).rotate(-theta);
            assert!(back.values.iter().zip(&c.values).all(|(a, b)| (a - b).norm() <= 1e-12 * b.norm().max(1.0)));
            let rec = phase_rotate(&img, theta);
            // identical source colours stay identical, distinct ones stay distinct
            let mut map = std::collections::HashMap::new();
            for (a, b) in img.pixels().iter().zip(rec.pixels()) {
                assert_eq!(*map.entry(*a).or_insert(*b), *b);
            }
            let targets: std::collections::HashSet<_> = map.values().collect();
            assert_eq!(targets.len(), map.len());
            seen.push(rec);
        }
        assert!(seen[0] != seen[1] && seen[1] != seen[2] && seen[0] != seen[2]);
    }

    #[test]
    fn ppm_round_trip() {
        let img = synthetic::structured(7, 5)[0].clone();
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(read_ppm(&buf[..]).unwrap(), img);

        let mut commented = b"P6\n# made by hand\n7 5\n# another\n255\n".to_vec();
        commented.extend(img.pixels().iter().flatten());
        assert_eq!(read_ppm(&commented[..]).unwrap(), img);

        assert!(matches!(read_ppm(&b"P3\n1 1\n255\n"[..]), Err(ImageError::Ppm(_))));
        assert!(matches!(read_ppm(&b"P6\n2 2\n255\nabc"[..]), Err(ImageError::Ppm(_))));
        assert!(matches!(read_ppm(&b"P6\n1 1\n65535\n"[..]), Err(ImageError::Ppm(_))));
    }

    #[test]
    fn mismatched_images_rejected() {
        let a = synthetic::structured(8, 8);
        let b = synthetic::structured(8, 9);
        let imgs = [a[0].clone(), a[1].clone(), b[2].clone()];
        assert!(matches!(
            separate_images(&imgs, &MixingChoice::Identity, 1),
            Err(ImageError::DimensionMismatch(_))
        ));
    }
}
