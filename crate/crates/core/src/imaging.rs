//! Raster I/O, salt-and-pepper corruption, DCT-domain inpainting and PSNR.
//!
//! Pixels are stored as a `(height·width) × channels` matrix in row-major
//! pixel order, the same ordering the 2-D DCT operators use.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{self, ExperimentError};
use crate::linops::{LinearOperator, LinopError};
use crate::solvers::{DemixProblem, SolveResult, SolverConfig, SolverError, SolverKind};

pub const PEAK: f64 = 255.0;
/// Pixels are divided by this before solving. The continuation schedule
/// and prox thresholds are not scale-invariant: impulses must clear the
/// `β = 1` thresholds (about 1) and the convex warm start must still
/// converge, which holds for divisors of roughly 32 to 128.
pub const SOLVE_SCALE: f64 = 64.0;
/// Serialized stand-in for the infinite PSNR of identical images.
pub const PSNR_CAP_DB: f64 = 999.0;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("malformed raster at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver `{solver}` cannot run in {mode} mode")]
    SolverMismatch { solver: SolverKind, mode: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

pub type Result<T> = std::result::Result<T, ImagingError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Array2<f64>,
}

impl Image {
    /// `pixels` is `(height·width) × channels` with values in `[0, 255]`.
    pub fn new(width: usize, height: usize, pixels: Array2<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::Invalid(format!("{width}x{height} image")));
        }
        let (n, c) = pixels.dim();
        if n != width * height || !(c == 1 || c == 3) {
            return Err(ImagingError::Invalid(format!(
                "pixel matrix {n}x{c} does not fit a {width}x{height} image with 1 or 3 channels"
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=PEAK).contains(*v)) {
            return Err(ImagingError::Invalid(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(Image { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height || self.channels() != other.channels() {
            return Err(ImagingError::Dimension(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width,
                self.height,
                self.channels(),
                other.width,
                other.height,
                other.channels()
            )));
        }
        Ok(())
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> ImagingError {
        ImagingError::Format { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImagingError::Format { offset: start, message: format!("{what} out of range") })
    }
}

/// Parses a binary graymap (P5) or pixmap (P6) with maximum value 255.
pub fn decode_pnm(data: &[u8]) -> Result<Image> {
    let mut cur = Cursor { data, pos: 0 };
    let channels = match data.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(cur.error("expected magic P5 or P6")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maximum value")?;
    let maxval_at = cur.pos - maxval.to_string().len();
    if maxval != 255 {
        return Err(ImagingError::Format { offset: maxval_at, message: format!("unsupported maximum value {maxval}") });
    }
    if width == 0 || height == 0 {
        return Err(cur.error(format!("empty {width}x{height} image")));
    }
    match data.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.error("expected whitespace after header")),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.error("image dimensions overflow"))?;
    let body = &data[cur.pos..];
    if body.len() < expected {
        return Err(ImagingError::Format {
            offset: data.len(),
            message: format!("truncated pixel data: {} of {expected} bytes", body.len()),
        });
    }
    let pixels = Array2::from_shape_fn((width * height, channels), |(p, c)| body[p * channels + c] as f64);
    Image::new(width, height, pixels)
}

/// Encodes as P5 or P6; values are rounded to the nearest integer.
pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|v| v.round().clamp(0.0, PEAK) as u8));
    out
}

pub fn read_image(path: &Path) -> Result<Image> {
    decode_pnm(&fs::read(path)?)
}

pub fn write_image(image: &Image, path: &Path) -> Result<()> {
    Ok(fs::write(path, encode_pnm(image))?)
}

/// Corrupts exactly `round(fraction·height·width)` pixel locations. A
/// corrupted location is hit in every channel, each channel independently
/// set to 0 or 255. The mask marks corrupted locations.
pub fn salt_pepper_corrupt(image: &Image, fraction: f64, seed: u64) -> Result<(Image, Vec<bool>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ImagingError::Invalid(format!("corruption fraction {fraction} outside [0, 1]")));
    }
    let n = image.width * image.height;
    let count = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locations = sample(&mut rng, n, count).into_vec();
    locations.sort_unstable();
    let mut mask = vec![false; n];
    let mut pixels = image.pixels.clone();
    for p in locations {
        mask[p] = true;
        for c in 0..image.channels() {
            pixels[[p, c]] = if rng.random::<bool>() { PEAK } else { 0.0 };
        }
    }
    Ok((Image { pixels, ..image.clone() }, mask))
}

/// `10 log₁₀(255² / MSE)` over all pixels and channels; `+∞` when identical.
pub fn psnr(restored: &Image, reference: &Image) -> Result<f64> {
    restored.same_shape(reference)?;
    let mse = restored.pixels.iter().zip(reference.pixels.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        / restored.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// PSNR as written to reports.
pub fn psnr_for_report(db: f64) -> f64 {
    db.min(PSNR_CAP_DB)
}

/// Image whose channels each have `k` nonzero 2-D DCT coefficients: the DC
/// term (mean gray level drawn from `[96, 160]`) plus `k − 1` coefficients
/// on a support shared by all channels. Amplitudes keep pixels in `[0, 255]`.
/// Returns the image and its coefficient matrix.
pub fn synthetic_dct_image(
    width: usize,
    height: usize,
    channels: usize,
    k: usize,
    seed: u64,
) -> Result<(Image, Array2<f64>)> {
    let n = width * height;
    if k == 0 || k > n {
        return Err(ImagingError::Invalid(format!("need 1 ≤ k ≤ {n}, got {k}")));
    }
    let op = LinearOperator::idct2d(height, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<usize> = sample(&mut rng, n - 1, k - 1).into_iter().map(|i| i + 1).collect();
    // Each orthonormal 2-D basis function is bounded by 2/√n in magnitude.
    let basis_peak = 2.0 / (n as f64).sqrt();
    let mean = Uniform::new(96.0, 160.0).expect("valid range");
    let mut coeffs = Array2::zeros((n, channels));
    for c in 0..channels {
        let gray: f64 = mean.sample(&mut rng);
        coeffs[[0, c]] = gray * (n as f64).sqrt();
        // Split the headroom to 0 and 255 among the non-DC terms.
        let budget = gray.min(PEAK - gray) / basis_peak / (k.max(2) - 1) as f64;
        for &i in &support {
            let mag = rng.random_range(0.3..1.0) * budget;
            coeffs[[i, c]] = if rng.random::<bool>() { mag } else { -mag };
        }
    }
    let pixels = op.apply_columns(coeffs.view())?.mapv(|v: f64| v.clamp(0.0, PEAK));
    Ok((Image::new(width, height, pixels)?, coeffs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintTask {
    pub corrupted: Image,
    pub q1: f64,
    pub q2: f64,
    pub mu: f64,
    /// One multitask solve over all channels rather than one solve per channel.
    pub joint: bool,
}

#[derive(Debug, Clone)]
pub struct InpaintOutcome {
    pub restored: Image,
    /// DCT coefficients of the restored image, in pixel scale, `n × channels`.
    pub coefficients: Array2<f64>,
    /// Solver output on the scaled data; one entry per solve.
    pub results: Vec<SolveResult>,
}

/// Separates the image from sparse corruption with `A₁` the 2-D inverse DCT
/// and `A₂ = I`. Pixels are divided by [`SOLVE_SCALE`] for the solve and the
/// coefficients scaled back.
/// Joint mode runs the multitask counterpart of `solver` once; per-channel
/// mode runs its single-task counterpart on each channel.
pub fn inpaint(task: &InpaintTask, cfg: &SolverConfig, solver: SolverKind) -> Result<InpaintOutcome> {
    let img = &task.corrupted;
    let cfg = SolverConfig { q1: task.q1, q2: task.q2, mu: task.mu, ..cfg.clone() };
    cfg.validate()?;
    let n = img.width * img.height;
    let a1 = LinearOperator::idct2d(img.height, img.width)?;
    let a2 = LinearOperator::identity(n)?;
    let y = &img.pixels / SOLVE_SCALE;

    let (coeffs, results) = if task.joint && img.channels() > 1 {
        let kind = solver.multitask();
        if !kind.is_multitask() {
            return Err(ImagingError::SolverMismatch { solver, mode: "joint" });
        }
        let p = DemixProblem::new(a1.clone(), a2, y)?;
        let r = experiments::solve_with_protocol(kind, &p, &cfg)?;
        (r.x1.clone(), vec![r])
    } else {
        let kind = solver.single_task();
        let mut coeffs = Array2::zeros((n, img.channels()));
        let mut results = Vec::new();
        for c in 0..img.channels() {
            let p = DemixProblem::single(a1.clone(), a2.clone(), y.column(c).to_owned())?;
            let r = experiments::solve_with_protocol(kind, &p, &cfg)?;
            coeffs.column_mut(c).assign(&r.x1.column(0));
            results.push(r);
        }
        (coeffs, results)
    };

    let coefficients = coeffs * SOLVE_SCALE;
    let pixels = a1.apply_columns(coefficients.view())?.mapv(|v: f64| v.clamp(0.0, PEAK));
    Ok(InpaintOutcome { restored: Image::new(img.width, img.height, pixels)?, coefficients, results })
}

/// Fraction of mask entries set.
pub fn mask_fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

/// Grayscale image from a flat row-major slice.
pub fn gray_image(width: usize, height: usize, values: &[f64]) -> Result<Image> {
    let col = Array1::from(values.to_vec());
    let pixels = col.into_shape_with_order((values.len(), 1)).map_err(|e| ImagingError::Invalid(e.to_string()))?;
    Image::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(width: usize, height: usize, channels: usize) -> Image {
        let pixels = Array2::from_shape_fn((width * height, channels), |(p, c)| ((p * 7 + c * 31) % 256) as f64);
        Image::new(width, height, pixels).unwrap()
    }

    #[test]
    fn pnm_round_trip() {
        for channels in [1, 3] {
            let img = ramp(5, 3, channels);
            assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let img = ramp(4, 4, 3);
        write_image(&img, &path).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn pnm_single_white_pixel() {
        let img = decode_pnm(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(img.pixels()[[0, 0]], 255.0);
        let img = decode_pnm(b"P5 # comment\n1 # w\n1\n255 \xff").unwrap();
        assert_eq!(img.channels(), 1);
    }

    #[test]
    fn pnm_errors_carry_offsets() {
        let truncated = decode_pnm(b"P6\n2 2\n255\n\x00\x01\x02");
        assert!(matches!(truncated, Err(ImagingError::Format { offset: 14, .. })), "{truncated:?}");
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0"), Err(ImagingError::Format { offset: 0, .. })));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\0\0"), Err(ImagingError::Format { offset: 7, .. })));
        assert!(matches!(decode_pnm(b"P5\n1 x\n"), Err(ImagingError::Format { offset: 5, .. })));
    }

    #[test]
    fn corruption_counts_are_exact() {
        let img = ramp(10, 10, 3);
        let (same, mask) = salt_pepper_corrupt(&img, 0.0, 1).unwrap();
        assert_eq!(same, img);
        assert!(mask.iter().all(|m| !m));
        let (all, _) = salt_pepper_corrupt(&img, 1.0, 1).unwrap();
        assert!(all.pixels().iter().all(|&v| v == 0.0 || v == 255.0));
        let (bad, mask) = salt_pepper_corrupt(&img, 0.3, 7).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 30);
        for (p, &m) in mask.iter().enumerate() {
            for c in 0..3 {
                if m {
                    assert!(bad.pixels()[[p, c]] == 0.0 || bad.pixels()[[p, c]] == 255.0);
                } else {
                    assert_eq!(bad.pixels()[[p, c]], img.pixels()[[p, c]]);
                }
            }
        }
        assert_eq!(salt_pepper_corrupt(&img, 0.3, 7).unwrap().1, mask);
        assert!(salt_pepper_corrupt(&img, 1.5, 7).is_err());
    }

    #[test]
    fn psnr_examples() {
        let a = gray_image(2, 2, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(psnr_for_report(psnr(&a, &a).unwrap()), PSNR_CAP_DB);
        let plus = gray_image(2, 2, &[11.0, 21.0, 31.0, 41.0]).unwrap();
        assert!((psnr(&plus, &a).unwrap() - 20.0 * 255f64.log10()).abs() < 1e-12);
        let black = gray_image(1, 1, &[0.0]).unwrap();
        let white = gray_image(1, 1, &[255.0]).unwrap();
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
        assert!(psnr(&a, &black).is_err());
    }

    #[test]
    fn synthetic_images_are_exactly_sparse() {
        let (img, coeffs) = synthetic_dct_image(16, 16, 3, 5, 3).unwrap();
        for c in 0..3 {
            assert_eq!(coeffs.column(c).iter().filter(|&&v| v != 0.0).count(), 5);
        }
        let back = LinearOperator::dct2d(16, 16).unwrap().apply_columns(img.pixels().view()).unwrap();
        assert!((&back - &coeffs).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn clean_images_restore_exactly() {
        let (img, _) = synthetic_dct_image(8, 8, 3, 4, 11).unwrap();
        let cfg = SolverConfig::default();
        for joint in [false, true] {
            let task = InpaintTask { corrupted: img.clone(), q1: 0.5, q2: 0.5, mu: 1.0, joint };
            let out = inpaint(&task, &cfg, SolverKind::Bcd).unwrap();
            assert!(psnr(&out.restored, &img).unwrap() >= 60.0);
            assert!(out.restored.pixels().iter().all(|v| (0.0..=255.0).contains(v)));
        }
    }

    #[test]
    fn sadmm_has_no_joint_mode() {
        let (img, _) = synthetic_dct_image(4, 4, 3, 2, 1).unwrap();
        let task = InpaintTask { corrupted: img, q1: 1.0, q2: 1.0, mu: 1.0, joint: true };
        assert!(matches!(
            inpaint(&task, &SolverConfig::default(), SolverKind::Sadmm),
            Err(ImagingError::SolverMismatch { .. })
        ));
    }
}
