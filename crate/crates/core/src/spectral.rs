//! FFT, Welch power spectral density and the power cepstrum.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

/// Largest default Welch segment.
pub const DEFAULT_SEGMENT_CAP: usize = 128;

/// Largest imaginary residue tolerated when inverting a log spectrum.
pub const CEPSTRUM_IMAG_TOLERANCE: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Discrete Fourier transform of a power-of-two length sequence; the inverse is scaled by `1/L`.
pub fn fft(values: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(Error::FftLength(len));
    }
    let mut buf = values.to_vec();
    plan(len, inverse).process(&mut buf);
    if inverse {
        let scale = 1.0 / len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let step = std::f64::consts::TAU / len as f64;
        (0..len)
            .map(|n| match self {
                Window::Hann => 0.5 - 0.5 * (step * n as f64).cos(),
                Window::Hamming => 0.54 - 0.46 * (step * n as f64).cos(),
                Window::Rectangular => 1.0,
            })
            .collect()
    }
}

/// Lower bound applied to PSD bins before taking the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsdFloor {
    /// Fraction of the largest bin.
    Relative(f64),
    Absolute(f64),
}

impl Default for PsdFloor {
    fn default() -> Self {
        PsdFloor::Relative(1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    pub psd_floor: PsdFloor,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self::with_segment(DEFAULT_SEGMENT_CAP)
    }
}

impl WelchConfig {
    pub fn with_segment(segment_length: usize) -> Self {
        Self {
            segment_length,
            overlap_fraction: 0.5,
            window: Window::Hann,
            psd_floor: PsdFloor::default(),
        }
    }

    /// `min(128, largest power of two <= n/4)`, at least 2.
    pub fn for_length(n: usize) -> Self {
        Self::for_length_capped(n, DEFAULT_SEGMENT_CAP)
    }

    pub fn for_length_capped(n: usize, cap: usize) -> Self {
        let quarter = (n / 4).max(2);
        let pow = 1usize << (usize::BITS - 1 - quarter.leading_zeros());
        Self::with_segment(pow.min(cap.max(2)))
    }

    /// Samples between consecutive segment starts.
    pub fn step(&self) -> usize {
        let overlap = (self.overlap_fraction * self.segment_length as f64).floor() as usize;
        (self.segment_length - overlap).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.segment_length;
        if l < 2 || !l.is_power_of_two() {
            return Err(Error::Config(format!(
                "segment length must be a power of two >= 2, got {l}"
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        let floor = match self.psd_floor {
            PsdFloor::Relative(f) | PsdFloor::Absolute(f) => f,
        };
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::Config(format!("psd floor must be positive, got {floor}")));
        }
        Ok(())
    }

    pub fn check_series_length(&self, n: usize) -> Result<()> {
        if n < self.segment_length {
            return Err(Error::Config(format!(
                "series length {n} is shorter than the Welch segment length {}",
                self.segment_length
            )));
        }
        Ok(())
    }
}

/// Two-sided power spectrum over `segment_length` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn segment_length(&self) -> usize {
        self.values.len()
    }
}

/// Real cepstral coefficients `c(0..L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cepstrum {
    coefficients: Vec<f64>,
}

impl Cepstrum {
    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Elementwise `self - other`, used for `c_h = c_y - c_u`.
    pub fn difference(&self, other: &Cepstrum) -> Result<Cepstrum> {
        if self.len() != other.len() {
            return Err(Error::IncompatibleLength {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Cepstrum {
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Averaged windowed periodograms, scaled by the window energy so unit
/// white noise has a PSD of about 1 in every bin.
pub fn welch_psd(series: &TimeSeries, cfg: &WelchConfig) -> Result<PowerSpectrum> {
    cfg.validate()?;
    let x = series.values();
    cfg.check_series_length(x.len())?;
    let l = cfg.segment_length;
    let window = cfg.window.coefficients(l);
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let step = cfg.step();
    let segments = (x.len() - l) / step + 1;
    let fft = plan(l, false);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    let mut acc = vec![0.0; l];
    for s in 0..segments {
        let seg = &x[s * step..s * step + l];
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (segments as f64 * energy);
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(PowerSpectrum { values: acc })
}

/// Inverse FFT of the floored log spectrum.
pub fn cepstrum_from_psd(psd: &PowerSpectrum, floor: PsdFloor) -> Result<Cepstrum> {
    let peak = psd.values.iter().copied().fold(0.0, f64::max);
    let floor = match floor {
        PsdFloor::Relative(f) => f * peak,
        PsdFloor::Absolute(f) => f,
    };
    // An all-zero series has no positive bin to scale from
    let floor = if floor > 0.0 { floor } else { f64::MIN_POSITIVE };
    let logs: Vec<Complex64> = psd
        .values
        .iter()
        .map(|&p| Complex64::new(p.max(floor).ln(), 0.0))
        .collect();
    let c = fft(&logs, true)?;
    let scale = c.iter().map(|v| v.re.abs()).fold(1.0, f64::max);
    let residue = c.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if residue > CEPSTRUM_IMAG_TOLERANCE * scale {
        return Err(Error::CepstrumNotReal(residue));
    }
    Cepstrum::from_coefficients(c.into_iter().map(|v| v.re).collect())
}

pub fn power_cepstrum(series: &TimeSeries, cfg: &WelchConfig) -> Result<Cepstrum> {
    cepstrum_from_psd(&welch_psd(series, cfg)?, cfg.psd_floor)
}
