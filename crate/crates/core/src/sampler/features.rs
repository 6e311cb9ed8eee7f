//! Per-lead morphological feature vector.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::preprocess::wavelet::{self, Wavelet};
use crate::signal_io::EcgRecord;

/// Frequency bands (Hz) whose power is reported, half-open `[lo, hi)`.
pub const BANDS_HZ: [(f64, f64); 4] = [(0.5, 4.0), (4.0, 15.0), (15.0, 40.0), (40.0, 100.0)];
pub const WAVELET_LEVELS: usize = 4;
const PEAK_MIN_SPACING_S: f64 = 0.2;

/// mean, std, skewness, kurtosis, min, max, rms, 4 band powers, spectral
/// entropy, dominant frequency, peak count, mean inter-peak interval and
/// 4 detail-band energies.
pub const FEATURES_PER_LEAD: usize = 7 + BANDS_HZ.len() + 2 + 2 + WAVELET_LEVELS;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub record_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Population moments; skewness and excess kurtosis are 0 for a flat lead.
pub(crate) fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= f64::EPSILON * f64::EPSILON {
        return Moments {
            mean,
            ..Default::default()
        };
    }
    Moments {
        mean,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// One-sided periodogram `|X_k|^2 / N`, k = 0..=N/2.
fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

fn spectral_features(x: &[f64], fs: f64, out: &mut Vec<f64>) {
    let power = periodogram(x);
    let n = x.len() as f64;
    let freq = |k: usize| k as f64 * fs / n;
    for (lo, hi) in BANDS_HZ {
        let p: f64 = power
            .iter()
            .enumerate()
            .filter(|(k, _)| (lo..hi).contains(&freq(*k)))
            .map(|(_, p)| p)
            .sum();
        out.push(p);
    }
    let ac = &power[1..];
    let total: f64 = ac.iter().sum();
    if ac.is_empty() || total <= 0.0 {
        out.extend([0.0, 0.0]);
        return;
    }
    let entropy = if ac.len() > 1 {
        -ac.iter()
            .map(|p| p / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
            / (ac.len() as f64).ln()
    } else {
        0.0
    };
    let dominant = ac
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0;
    out.push(entropy);
    out.push(freq(dominant + 1));
}

/// Local maxima above `mean + 2 std`, at least 0.2 s apart (the larger of
/// two close peaks wins). Returns peak indices.
pub(crate) fn detect_peaks(x: &[f64], fs: f64, m: &Moments) -> Vec<usize> {
    let threshold = m.mean + 2.0 * m.std;
    let spacing = (PEAK_MIN_SPACING_S * fs).round().max(1.0) as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if !(x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1]) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < spacing => {
                if x[i] > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks
}

fn lead_features(x: &[f64], fs: f64, out: &mut Vec<f64>) -> Result<()> {
    let m = moments(x);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    out.extend([m.mean, m.std, m.skewness, m.kurtosis, min, max, rms]);

    spectral_features(x, fs, out);

    let peaks = detect_peaks(x, fs, &m);
    let interval = if peaks.len() >= 2 {
        (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64 / fs
    } else {
        0.0
    };
    out.extend([peaks.len() as f64, interval]);

    let dec = wavelet::decompose(x, Wavelet::Db6, WAVELET_LEVELS)?;
    out.extend(dec.details.iter().map(|d| d.iter().map(|c| c * c).sum::<f64>()));
    Ok(())
}

/// Concatenated per-lead features of one unsegmented record.
pub fn extract_features(rec: &EcgRecord, record_index: usize) -> Result<FeatureVector> {
    let needed = 1 << WAVELET_LEVELS;
    if rec.num_samples() < needed {
        return Err(Error::SignalTooShort {
            needed,
            found: rec.num_samples(),
        });
    }
    let fs = f64::from(rec.sample_rate_hz());
    let mut values = Vec::with_capacity(rec.num_leads() * FEATURES_PER_LEAD);
    for (lead, row) in rec.data().rows().into_iter().enumerate() {
        let x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { lead, index });
        }
        lead_features(&x, fs, &mut values)?;
    }
    Ok(FeatureVector {
        values,
        record_index,
    })
}
