//! Teacher-quality gating between a learned observation source and a
//! fallback.
//!
//! A scene's reconstruction quality folds three metrics into one score,
//!
//! ```text
//! q = min(psnr / 10.0, ssim / 0.20, 0.80 / lpips)
//! ```
//!
//! so q >= 1 exactly when every metric clears its bound. The gate probability
//! is a sigmoid `g(q) = 1 / (1 + exp(-k (q - tau)))` with steepness `k = 8`
//! and midpoint `tau = 1`: a scene exactly at the bounds gates at 0.5.
//! LPIPS is always supplied by the caller, never computed here.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Sigmoid steepness.
    pub k: f64,
    /// Sigmoid midpoint in quality-score units.
    pub tau: f64,
    /// PSNR divisor, dB.
    pub psnr_div: f64,
    /// SSIM divisor.
    pub ssim_div: f64,
    /// LPIPS numerator.
    pub lpips_num: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            k: 8.0,
            tau: 1.0,
            psnr_div: 10.0,
            ssim_div: 0.20,
            lpips_num: 0.80,
        }
    }
}

/// Per-scene reconstruction quality metrics. PSNR in dB; LPIPS must be
/// positive (it divides the numerator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneQuality {
    pub scene_id: String,
    #[serde(rename = "psnr")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub lpips: f64,
}

/// Scalar quality score: the binding (worst) normalized metric.
pub fn quality_score(q: &SceneQuality, params: &GateParams) -> Result<f64> {
    if !(q.lpips > 0.0) {
        return Err(Error::param("lpips", "must be positive"));
    }
    if !q.psnr_db.is_finite() || !q.ssim.is_finite() {
        return Err(Error::param("quality", "psnr and ssim must be finite"));
    }
    Ok((q.psnr_db / params.psnr_div)
        .min(q.ssim / params.ssim_div)
        .min(params.lpips_num / q.lpips))
}

/// Gate probability `1 / (1 + exp(-k (q - tau)))`.
pub fn gate_probability(quality: f64, params: &GateParams) -> f64 {
    1.0 / (1.0 + (-params.k * (quality - params.tau)).exp())
}

/// Observation source chosen per training sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Learned (gated-in) observation source.
    Gs,
    /// Fallback source.
    Fallback,
}

/// Draws one source per gate probability: sample i is `Gs` when the i-th
/// uniform draw from the `gate-sources` stream of `seed` is below its
/// probability.
pub fn sample_observation_sources(gate_probs: &[f64], seed: u64) -> Vec<Source> {
    let mut rng = rng::stream("gate-sources", seed, 0);
    gate_probs
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            if u < p {
                Source::Gs
            } else {
                Source::Fallback
            }
        })
        .collect()
}

/// Grayscale image with intensities in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::param(
                "data",
                format!("{} values for {}x{}", data.len(), width, height),
            ));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::param("data", "intensities must lie in [0, 1]"));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// PSNR capped at this sentinel; identical images report it with `exact`.
pub const PSNR_CAP_DB: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psnr {
    /// `10 log10(1 / mse)` for unit dynamic range, capped at 300 dB.
    pub db: f64,
    /// True when the images are bitwise identical (mse == 0).
    pub exact: bool,
}

/// PSNR between two equally-shaped images over a unit dynamic range.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<Psnr> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    if a.data.is_empty() {
        return Err(Error::Degenerate("empty images".into()));
    }
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(Psnr {
            db: PSNR_CAP_DB,
            exact: true,
        });
    }
    Ok(Psnr {
        db: (-10.0 * mse.log10()).min(PSNR_CAP_DB),
        exact: false,
    })
}

/// Mean SSIM over valid 11x11 windows with a sigma = 1.5 Gaussian weight,
/// stabilizers C1 = 0.01^2 and C2 = 0.03^2 on a unit dynamic range. Images
/// must be at least 11x11.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    const WIN: usize = 11;
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    if a.width < WIN || a.height < WIN {
        return Err(Error::Degenerate(format!(
            "images must be at least {WIN}x{WIN} for ssim"
        )));
    }
    let mut kernel = [0.0f64; WIN * WIN];
    let sigma = 1.5f64;
    let mut sum = 0.0;
    for y in 0..WIN {
        for x in 0..WIN {
            let dx = x as f64 - 5.0;
            let dy = y as f64 - 5.0;
            let w = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            kernel[y * WIN + x] = w;
            sum += w;
        }
    }
    for w in &mut kernel {
        *w /= sum;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for wy in 0..=(a.height - WIN) {
        for wx in 0..=(a.width - WIN) {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            for ky in 0..WIN {
                for kx in 0..WIN {
                    let w = kernel[ky * WIN + kx];
                    mu_a += w * a.at(wx + kx, wy + ky);
                    mu_b += w * b.at(wx + kx, wy + ky);
                }
            }
            let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
            for ky in 0..WIN {
                for kx in 0..WIN {
                    let w = kernel[ky * WIN + kx];
                    let da = a.at(wx + kx, wy + ky) - mu_a;
                    let db = b.at(wx + kx, wy + ky) - mu_b;
                    var_a += w * da * da;
                    var_b += w * db * db;
                    cov += w * da * db;
                }
            }
            total += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2))
                / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Gate bucket relative to the sigmoid midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateBucket {
    AboveTau,
    BelowTau,
}

/// Per-scene gate report entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReportEntry {
    pub scene_id: String,
    pub quality_score: f64,
    pub gate_probability: f64,
    pub bucket: GateBucket,
}

/// Scores and gates a batch of scene qualities.
pub fn gate_report(scenes: &[SceneQuality], params: &GateParams) -> Result<Vec<GateReportEntry>> {
    scenes
        .iter()
        .map(|q| {
            let score = quality_score(q, params)?;
            Ok(GateReportEntry {
                scene_id: q.scene_id.clone(),
                quality_score: score,
                gate_probability: gate_probability(score, params),
                bucket: if score >= params.tau {
                    GateBucket::AboveTau
                } else {
                    GateBucket::BelowTau
                },
            })
        })
        .collect()
}
