//! Stain normalization and augmentation: LAB style transfer (Reinhard),
//! photometric jitter, Ruifrok colour deconvolution and Macenko stain
//! estimation.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::grid::Grid;

pub type RgbImage = Grid<[u8; 3]>;
pub type LabImage = Grid<[f64; 3]>;

// sRGB primaries, D65 white
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

fn white() -> [f64; 3] {
    [0, 1, 2].map(|i| RGB_TO_XYZ[i].iter().sum())
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

const DELTA: f64 = 6.0 / 29.0;

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn rgb_pixel_to_lab(p: [u8; 3]) -> [f64; 3] {
    let lin = p.map(|c| srgb_to_linear(c as f64 / 255.0));
    let w = white();
    let xyz: [f64; 3] = [0, 1, 2].map(|i| (0..3).map(|j| RGB_TO_XYZ[i][j] * lin[j]).sum::<f64>() / w[i]);
    let (fx, fy, fz) = (lab_f(xyz[0]), lab_f(xyz[1]), lab_f(xyz[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn lab_pixel_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let w = white();
    let xyz = [lab_f_inv(fx) * w[0], lab_f_inv(fy) * w[1], lab_f_inv(fz) * w[2]];
    [0, 1, 2].map(|i| {
        let lin: f64 = (0..3).map(|j| XYZ_TO_RGB[i][j] * xyz[j]).sum();
        to_u8(255.0 * linear_to_srgb(lin.clamp(0.0, 1.0)))
    })
}

/// CIE-LAB (D65) of an 8-bit sRGB image.
pub fn rgb_to_lab(image: &RgbImage) -> LabImage {
    image.map(|&p| rgb_pixel_to_lab(p))
}

/// Inverse of [`rgb_to_lab`], clamped to the 8-bit gamut.
pub fn lab_to_rgb(lab: &LabImage) -> RgbImage {
    lab.map(|&p| lab_pixel_to_rgb(p))
}

/// Per-channel mean and (population) standard deviation in LAB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl LabStats {
    pub fn of_lab(lab: &LabImage) -> Self {
        let n = lab.len() as f64;
        let mut mean = [0.0; 3];
        for p in lab.as_slice() {
            for k in 0..3 {
                mean[k] += p[k];
            }
        }
        mean = mean.map(|m| m / n);
        let mut var = [0.0; 3];
        for p in lab.as_slice() {
            for k in 0..3 {
                var[k] += (p[k] - mean[k]).powi(2);
            }
        }
        LabStats {
            mean,
            std: var.map(|v| (v / n).sqrt()),
        }
    }

    pub fn of_image(image: &RgbImage) -> Self {
        Self::of_lab(&rgb_to_lab(image))
    }

    fn validate(&self) -> Result<()> {
        if self.mean.iter().chain(&self.std).any(|v| !v.is_finite()) || self.std.iter().any(|&s| s < 0.0) {
            return arg_err(format!("invalid LAB statistics {self:?}"));
        }
        Ok(())
    }
}

const MIN_STD: f64 = 1e-6;

fn style_lab(lab: &LabImage, target: &LabStats) -> LabImage {
    let src = LabStats::of_lab(lab);
    lab.map(|p| {
        [0, 1, 2].map(|k| {
            if src.std[k] < MIN_STD {
                p[k] - src.mean[k] + target.mean[k]
            } else {
                (p[k] - src.mean[k]) / src.std[k] * target.std[k] + target.mean[k]
            }
        })
    })
}

/// Per-channel affine map in LAB taking the image's statistics to
/// `target`. Channels with (near) zero spread are only shifted.
pub fn apply_style(image: &RgbImage, target: &LabStats) -> Result<RgbImage> {
    target.validate()?;
    Ok(lab_to_rgb(&style_lab(&rgb_to_lab(image), target)))
}

/// Reinhard normalization to fixed template statistics.
pub fn reinhard_normalize(image: &RgbImage, target: &LabStats) -> Result<RgbImage> {
    apply_style(image, target)
}

/// Gaussian model over the six LAB style parameters of a template set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainStyleModel {
    pub mean_mu: [f64; 3],
    pub mean_sigma: [f64; 3],
    pub std_mu: [f64; 3],
    pub std_sigma: [f64; 3],
}

impl StainStyleModel {
    /// Fits the model from at least two templates (population deviations).
    pub fn fit(templates: &[LabStats]) -> Result<Self> {
        if templates.len() < 2 {
            return arg_err(format!("need at least 2 templates, got {}", templates.len()));
        }
        let n = templates.len() as f64;
        let gauss = |f: &dyn Fn(&LabStats) -> f64| {
            let mu = templates.iter().map(f).sum::<f64>() / n;
            let var = templates.iter().map(|t| (f(t) - mu).powi(2)).sum::<f64>() / n;
            (mu, var.sqrt())
        };
        let mut m = StainStyleModel {
            mean_mu: [0.0; 3],
            mean_sigma: [0.0; 3],
            std_mu: [0.0; 3],
            std_sigma: [0.0; 3],
        };
        for k in 0..3 {
            (m.mean_mu[k], m.mean_sigma[k]) = gauss(&|t| t.mean[k]);
            (m.std_mu[k], m.std_sigma[k]) = gauss(&|t| t.std[k]);
        }
        if [m.mean_mu, m.mean_sigma, m.std_mu, m.std_sigma].iter().flatten().any(|v| !v.is_finite()) {
            return arg_err("non-finite template statistics");
        }
        Ok(m)
    }

    pub fn from_images(images: &[RgbImage]) -> Result<Self> {
        Self::fit(&images.iter().map(LabStats::of_image).collect::<Vec<_>>())
    }

    /// Independent draws: the three channel means, then the three channel
    /// standard deviations (clamped at zero).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabStats {
        let draw = |rng: &mut R, mu: f64, sigma: f64| Normal::new(mu, sigma).expect("finite sigma").sample(rng);
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for k in 0..3 {
            mean[k] = draw(rng, self.mean_mu[k], self.mean_sigma[k]);
        }
        for k in 0..3 {
            std[k] = draw(rng, self.std_mu[k], self.std_sigma[k]).max(0.0);
        }
        LabStats { mean, std }
    }
}

pub fn sample_style(model: &StainStyleModel, seed: u64) -> LabStats {
    model.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn luma(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

fn map_pixels(image: &RgbImage, f: impl Fn([f64; 3]) -> [f64; 3]) -> RgbImage {
    image.map(|p| f(p.map(|c| c as f64)).map(to_u8))
}

/// Adds `delta` intensity levels to every channel.
pub fn adjust_brightness(image: &RgbImage, delta: f64) -> RgbImage {
    map_pixels(image, |p| p.map(|c| c + delta))
}

/// Scales every channel around the image's mean luma.
pub fn adjust_contrast(image: &RgbImage, factor: f64) -> RgbImage {
    let n = image.len().max(1) as f64;
    let mean = image.as_slice().iter().map(|p| luma(p.map(|c| c as f64))).sum::<f64>() / n;
    map_pixels(image, |p| p.map(|c| mean + factor * (c - mean)))
}

/// Blends each pixel with its own luma; 0 gives grey, 1 the input.
pub fn adjust_saturation(image: &RgbImage, factor: f64) -> RgbImage {
    map_pixels(image, |p| {
        let l = luma(p);
        p.map(|c| l + factor * (c - l))
    })
}

/// Jitter ranges: brightness delta in `[-brightness, brightness]` levels,
/// contrast and saturation factors in `[1 - x, 1 + x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        JitterParams {
            brightness: 20.0,
            contrast: 0.2,
            saturation: 0.2,
        }
    }
}

impl JitterParams {
    pub fn none() -> Self {
        JitterParams {
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.brightness) && ok(self.contrast) && ok(self.saturation)) {
            return arg_err(format!("jitter ranges must be finite and non-negative: {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterKind {
    Brightness,
    Contrast,
    Saturation,
}

fn uniform_sym<R: Rng + ?Sized>(rng: &mut R, half: f64) -> f64 {
    if half == 0.0 {
        0.0
    } else {
        rng.random_range(-half..=half)
    }
}

/// Applies one uniformly chosen photometric change.
pub fn jitter_with<R: Rng + ?Sized>(image: &RgbImage, params: &JitterParams, rng: &mut R) -> Result<(RgbImage, JitterKind)> {
    params.validate()?;
    Ok(match rng.random_range(0..3) {
        0 => (adjust_brightness(image, uniform_sym(rng, params.brightness)), JitterKind::Brightness),
        1 => (adjust_contrast(image, 1.0 + uniform_sym(rng, params.contrast)), JitterKind::Contrast),
        _ => (adjust_saturation(image, 1.0 + uniform_sym(rng, params.saturation)), JitterKind::Saturation),
    })
}

pub fn jitter(image: &RgbImage, params: &JitterParams, seed: u64) -> Result<RgbImage> {
    Ok(jitter_with(image, params, &mut ChaCha8Rng::seed_from_u64(seed))?.0)
}

/// Unit optical-density vectors, one per dye, as matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StainMatrix {
    pub columns: Vec<[f64; 3]>,
}

fn normalize3(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12 && n.is_finite()).then(|| v.map(|x| x / n))
}

impl StainMatrix {
    /// Normalizes the columns; 2 or 3 non-zero columns are required.
    pub fn new(columns: Vec<[f64; 3]>) -> Result<Self> {
        if !(2..=3).contains(&columns.len()) {
            return arg_err(format!("stain matrix needs 2 or 3 columns, got {}", columns.len()));
        }
        let columns = columns
            .into_iter()
            .map(|c| normalize3(c).ok_or_else(|| Error::InvalidArgument(format!("degenerate stain vector {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(StainMatrix { columns })
    }

    /// Hematoxylin and eosin vectors of Ruifrok & Johnston, completed by a
    /// third column whose squared components fill each channel up to one.
    pub fn he_default() -> Self {
        let h = normalize3([0.65, 0.70, 0.29]).unwrap();
        let e = normalize3([0.07, 0.99, 0.11]).unwrap();
        Self::completed(h, e)
    }

    /// Two stains plus the complementary residual column.
    pub fn completed(a: [f64; 3], b: [f64; 3]) -> Self {
        let third = [0, 1, 2].map(|k| (1.0 - a[k] * a[k] - b[k] * b[k]).max(0.0).sqrt());
        let mut cols = vec![a, b];
        if let Some(c) = normalize3(third) {
            cols.push(c);
        }
        StainMatrix::new(cols).expect("valid stain vectors")
    }

    pub fn stains(&self) -> usize {
        self.columns.len()
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, self.stains(), |r, c| self.columns[c][r])
    }

    fn pinv(&self) -> Result<DMatrix<f64>> {
        self.matrix()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InvalidArgument(format!("stain matrix pseudo-inverse: {e}")))
    }
}

/// Optical density `−log10((I + 1) / 256)`.
pub fn optical_density(v: u8) -> f64 {
    -((v as f64 + 1.0) / 256.0).log10()
}

fn od_to_intensity(od: f64) -> u8 {
    to_u8(256.0 * 10f64.powf(-od) - 1.0)
}

/// Per-pixel stain concentrations, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentrations {
    pub height: usize,
    pub width: usize,
    pub stains: usize,
    pub data: Vec<f64>,
}

impl Concentrations {
    pub fn get(&self, pixel: usize, stain: usize) -> f64 {
        self.data[pixel * self.stains + stain]
    }

    pub fn channel(&self, stain: usize) -> Vec<f64> {
        self.data.iter().skip(stain).step_by(self.stains).copied().collect()
    }

    fn scale(&mut self, factors: &[f64]) {
        for px in self.data.chunks_mut(self.stains) {
            for (v, f) in px.iter_mut().zip(factors) {
                *v *= f;
            }
        }
    }
}

pub fn ruifrok_deconvolve(image: &RgbImage, matrix: &StainMatrix) -> Result<Concentrations> {
    let pinv = matrix.pinv()?;
    let k = matrix.stains();
    let mut data = Vec::with_capacity(image.len() * k);
    for p in image.as_slice() {
        let od = p.map(optical_density);
        for s in 0..k {
            data.push((0..3).map(|j| pinv[(s, j)] * od[j]).sum());
        }
    }
    Ok(Concentrations {
        height: image.height(),
        width: image.width(),
        stains: k,
        data,
    })
}

pub fn ruifrok_recompose(conc: &Concentrations, matrix: &StainMatrix) -> Result<RgbImage> {
    if conc.stains != matrix.stains() {
        return arg_err(format!("{} concentration channels for {} stains", conc.stains, matrix.stains()));
    }
    let data = conc
        .data
        .chunks(conc.stains)
        .map(|c| {
            [0, 1, 2].map(|j| od_to_intensity(matrix.columns.iter().zip(c).map(|(col, v)| col[j] * v).sum()))
        })
        .collect();
    Grid::from_vec(conc.height, conc.width, data)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    percentile_sorted(&v, p)
}

fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacenkoParams {
    pub od_threshold: f64,
    pub angle_percentile: f64,
    pub min_pixels: usize,
}

impl Default for MacenkoParams {
    fn default() -> Self {
        MacenkoParams {
            od_threshold: 0.15,
            angle_percentile: 1.0,
            min_pixels: 100,
        }
    }
}

/// Macenko stain-vector estimation.
///
/// Pixels with any channel below the OD threshold are dropped; the rest
/// are projected onto the two leading eigenvectors of their covariance and
/// the extreme directions at the low/high angle percentiles become the
/// stain vectors, hematoxylin (larger red OD) first.
pub fn macenko_estimate(image: &RgbImage, params: &MacenkoParams) -> Result<StainMatrix> {
    let od: Vec<Vector3<f64>> = image
        .as_slice()
        .iter()
        .map(|p| Vector3::from(p.map(optical_density)))
        .filter(|v| v.iter().all(|&x| x >= params.od_threshold))
        .collect();
    if od.len() < params.min_pixels {
        return Err(Error::InsufficientStain(od.len(), params.min_pixels));
    }
    let n = od.len() as f64;
    let mean = od.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for v in &od {
        let d = v - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let fix = |v: Vector3<f64>| if v.sum() < 0.0 { -v } else { v };
    let e1 = fix(eig.eigenvectors.column(order[0]).into_owned());
    let e2 = fix(eig.eigenvectors.column(order[1]).into_owned());

    let mut phi: Vec<f64> = od.iter().map(|v| v.dot(&e2).atan2(v.dot(&e1))).collect();
    phi.sort_by(|a, b| a.total_cmp(b));
    let lo = percentile_sorted(&phi, params.angle_percentile);
    let hi = percentile_sorted(&phi, 100.0 - params.angle_percentile);
    let dir = |a: f64| fix(e1 * a.cos() + e2 * a.sin());
    let (v1, v2) = (dir(lo), dir(hi));
    let (h, e) = if v1[0] >= v2[0] { (v1, v2) } else { (v2, v1) };
    StainMatrix::new(vec![[h[0], h[1], h[2]], [e[0], e[1], e[2]]])
}

/// Target matrix plus its reference concentration percentiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacenkoReference {
    pub matrix: StainMatrix,
    pub max_conc: Vec<f64>,
}

pub const CONC_PERCENTILE: f64 = 99.0;

fn conc_percentiles(conc: &Concentrations, p: f64) -> Vec<f64> {
    (0..conc.stains).map(|s| percentile(&conc.channel(s), p)).collect()
}

impl MacenkoReference {
    pub fn new(matrix: StainMatrix, max_conc: Vec<f64>) -> Result<Self> {
        if max_conc.len() != matrix.stains() {
            return arg_err("one reference concentration per stain required");
        }
        Ok(MacenkoReference { matrix, max_conc })
    }

    /// Estimates the matrix of `template` and its 99th-percentile
    /// concentrations.
    pub fn from_template(template: &RgbImage, params: &MacenkoParams) -> Result<Self> {
        let matrix = macenko_estimate(template, params)?;
        Self::with_matrix(template, matrix)
    }

    pub fn with_matrix(template: &RgbImage, matrix: StainMatrix) -> Result<Self> {
        let conc = ruifrok_deconvolve(template, &matrix)?;
        let max_conc = conc_percentiles(&conc, CONC_PERCENTILE);
        Self::new(matrix, max_conc)
    }
}

/// Deconvolves with `source`, rescales each concentration channel so its
/// 99th percentile equals the reference and recomposes with the reference
/// matrix.
pub fn macenko_normalize(image: &RgbImage, source: &StainMatrix, target: &MacenkoReference) -> Result<RgbImage> {
    if source.stains() != target.matrix.stains() {
        return arg_err("source and target stain counts differ");
    }
    let mut conc = ruifrok_deconvolve(image, source)?;
    let src = conc_percentiles(&conc, CONC_PERCENTILE);
    let factors: Vec<f64> = src
        .iter()
        .zip(&target.max_conc)
        .map(|(&s, &t)| if s.abs() > 1e-9 { t / s } else { 1.0 })
        .collect();
    conc.scale(&factors);
    ruifrok_recompose(&conc, &target.matrix)
}

/// Ruifrok deconvolution with a fixed matrix, concentrations rescaled to
/// the template's percentiles.
pub fn ruifrok_normalize(image: &RgbImage, target: &MacenkoReference) -> Result<RgbImage> {
    macenko_normalize(image, &target.matrix, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Style,
    Jitter,
    Template,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Reinhard,
    Ruifrok,
    Macenko,
}

/// Everything derived from the fixed normalization template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateReference {
    pub lab: LabStats,
    pub ruifrok: MacenkoReference,
    /// `None` when the template lacks stain signal for Macenko.
    pub macenko: Option<MacenkoReference>,
}

impl TemplateReference {
    pub fn from_image(template: &RgbImage, ruifrok_matrix: StainMatrix, params: &MacenkoParams) -> Result<Self> {
        Ok(TemplateReference {
            lab: LabStats::of_image(template),
            ruifrok: MacenkoReference::with_matrix(template, ruifrok_matrix)?,
            macenko: MacenkoReference::from_template(template, params).ok(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub strategies: Vec<Strategy>,
    pub methods: Vec<NormMethod>,
    pub style: Option<StainStyleModel>,
    pub jitter: JitterParams,
    pub template: Option<TemplateReference>,
    pub macenko: MacenkoParams,
}

impl AugmentPolicy {
    pub fn jitter_only(jitter: JitterParams) -> Self {
        AugmentPolicy {
            strategies: vec![Strategy::Jitter],
            methods: vec![NormMethod::Reinhard, NormMethod::Ruifrok, NormMethod::Macenko],
            style: None,
            jitter,
            template: None,
            macenko: MacenkoParams::default(),
        }
    }

    /// All three strategies and all three normalization methods.
    pub fn full(style: StainStyleModel, jitter: JitterParams, template: TemplateReference) -> Self {
        AugmentPolicy {
            strategies: vec![Strategy::Style, Strategy::Jitter, Strategy::Template],
            methods: vec![NormMethod::Reinhard, NormMethod::Ruifrok, NormMethod::Macenko],
            style: Some(style),
            jitter,
            template: Some(template),
            macenko: MacenkoParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return arg_err("augment policy enables no strategy");
        }
        if self.strategies.contains(&Strategy::Style) && self.style.is_none() {
            return arg_err("style strategy needs a style model");
        }
        if self.strategies.contains(&Strategy::Template) {
            if self.template.is_none() {
                return arg_err("template strategy needs a template");
            }
            if self.methods.is_empty() {
                return arg_err("template strategy needs at least one method");
            }
        }
        self.jitter.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub image: RgbImage,
    pub strategy: Strategy,
    /// Method actually applied by the template strategy (after fallback).
    pub method: Option<NormMethod>,
}

/// Applies one uniformly chosen strategy. Template normalization picks a
/// method uniformly; Macenko falls back to Reinhard when stain vectors
/// cannot be estimated.
pub fn augment(image: &RgbImage, policy: &AugmentPolicy, seed: u64) -> Result<Augmented> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strategy = policy.strategies[rng.random_range(0..policy.strategies.len())];
    let (out, method) = match strategy {
        Strategy::Style => {
            let target = policy.style.as_ref().unwrap().sample(&mut rng);
            (apply_style(image, &target)?, None)
        }
        Strategy::Jitter => (jitter_with(image, &policy.jitter, &mut rng)?.0, None),
        Strategy::Template => {
            let t = policy.template.as_ref().unwrap();
            let method = policy.methods[rng.random_range(0..policy.methods.len())];
            let macenko = match (method, &t.macenko) {
                (NormMethod::Macenko, Some(reference)) => macenko_estimate(image, &policy.macenko)
                    .ok()
                    .map(|src| macenko_normalize(image, &src, reference))
                    .transpose()?,
                _ => None,
            };
            match (method, macenko) {
                (NormMethod::Macenko, Some(img)) => (img, Some(NormMethod::Macenko)),
                (NormMethod::Ruifrok, _) => (ruifrok_normalize(image, &t.ruifrok)?, Some(NormMethod::Ruifrok)),
                _ => (reinhard_normalize(image, &t.lab)?, Some(NormMethod::Reinhard)),
            }
        }
    };
    Ok(Augmented {
        image: out,
        strategy,
        method,
    })
}
