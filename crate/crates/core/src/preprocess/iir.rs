//! IIR filter design (notch, Butterworth) as second-order sections and
//! zero-phase forward-backward application.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `[b0, b1, b2, a1, a2]` with `a0 == 1`.
pub type Section = [f64; 5];

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Section>,
    order: usize,
}

impl Sos {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Number of poles of the whole cascade.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|&[b0, b1, b2, a1, a2]| {
                let num = b0 + z1 * b1 + z2 * b2;
                let den = 1.0 + z1 * a1 + z2 * a2;
                (num / den).norm()
            })
            .product()
    }

    /// Direct-form-II-transposed state for a unit step in steady state.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut gain_in = 1.0;
        self.sections
            .iter()
            .map(|&[b0, b1, b2, a1, a2]| {
                let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let y = dc * gain_in;
                let x = gain_in;
                let z1 = b2 * x - a2 * y;
                let z0 = b1 * x - a1 * y + z1;
                gain_in = y;
                [z0, z1]
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (sec, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2, a1, a2] = *sec;
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z[0];
                z[0] = b1 * input - a1 * y + z[1];
                z[1] = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Causal single-pass filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Zero-phase filtering: odd reflection padding of `3 * order` samples,
    /// steady-state initial conditions, forward pass, then backward pass.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |s: f64| zi.iter().map(|z| [z[0] * s, z[1] * s]).collect::<Vec<_>>();

        let s0 = ext[0];
        self.run(&mut ext, scaled(s0));
        ext.reverse();
        let s1 = ext[0];
        self.run(&mut ext, scaled(s1));
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

fn check_band_edge(name: &str, f: f64, fs: f64) -> Result<()> {
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} {f} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Second-order IIR notch at `freq_hz` with quality factor `q`.
pub fn notch(freq_hz: f64, q: f64, fs: f64) -> Result<Sos> {
    check_band_edge("notch frequency", freq_hz, fs)?;
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("notch Q must be > 0, got {q}")));
    }
    let w0 = 2.0 * PI * freq_hz / fs;
    let beta = (w0 / q / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Ok(Sos {
        sections: vec![[gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0]],
        order: 2,
    })
}

struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn butter_prototype(order: usize) -> Zpk {
    let n = order as f64;
    let poles = (0..order)
        .map(|k| {
            let m = -(n - 1.0) + 2.0 * k as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * n))
        })
        .collect();
    Zpk {
        zeros: Vec::new(),
        poles,
        gain: 1.0,
    }
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn lowpass_to_highpass(proto: Zpk, wo: f64) -> Zpk {
    let degree = proto.poles.len() - proto.zeros.len();
    let num: Complex64 = proto.zeros.iter().map(|z| -z).product();
    let den: Complex64 = proto.poles.iter().map(|p| -p).product();
    let mut zeros: Vec<Complex64> = proto.zeros.iter().map(|z| wo / z).collect();
    zeros.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(degree));
    Zpk {
        zeros,
        poles: proto.poles.iter().map(|p| wo / p).collect(),
        gain: proto.gain * (num / den).re,
    }
}

fn lowpass_to_bandpass(proto: Zpk, wo: f64, bw: f64) -> Zpk {
    let degree = proto.poles.len() - proto.zeros.len();
    let split = |roots: &[Complex64]| -> Vec<Complex64> {
        let scaled: Vec<Complex64> = roots.iter().map(|r| r * bw / 2.0).collect();
        let mut out: Vec<Complex64> = scaled
            .iter()
            .map(|r| r + (r * r - wo * wo).sqrt())
            .collect();
        out.extend(scaled.iter().map(|r| r - (r * r - wo * wo).sqrt()));
        out
    };
    let mut zeros = split(&proto.zeros);
    zeros.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(degree));
    Zpk {
        zeros,
        poles: split(&proto.poles),
        gain: proto.gain * bw.powi(degree as i32),
    }
}

fn bilinear(analog: Zpk, fs: f64) -> Zpk {
    let fs2 = 2.0 * fs;
    let degree = analog.poles.len() - analog.zeros.len();
    let num: Complex64 = analog.zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = analog.poles.iter().map(|p| fs2 - p).product();
    let mut zeros: Vec<Complex64> = analog.zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    zeros.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));
    Zpk {
        zeros,
        poles: analog.poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect(),
        gain: analog.gain * (num / den).re,
    }
}

/// Groups conjugate pole pairs into biquads. All zeros produced by the
/// designs here are real (+1 or -1); each section takes one from each end
/// of the sorted zero list so bandpass sections get one of each.
fn zpk_to_sos(zpk: Zpk) -> Sos {
    const IMAG_TOL: f64 = 1e-12;
    let order = zpk.poles.len();
    let mut complex: Vec<Complex64> = zpk
        .poles
        .iter()
        .filter(|p| p.im > IMAG_TOL)
        .copied()
        .collect();
    let mut real: Vec<f64> = zpk
        .poles
        .iter()
        .filter(|p| p.im.abs() <= IMAG_TOL)
        .map(|p| p.re)
        .collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);

    let mut zeros: Vec<f64> = zpk.zeros.iter().map(|z| z.re).collect();
    zeros.sort_by(f64::total_cmp);
    let mut zeros = std::collections::VecDeque::from(zeros);
    let mut take_zeros = |count: usize| -> [f64; 2] {
        let mut out = [f64::NAN; 2];
        for (i, slot) in out.iter_mut().enumerate().take(count) {
            *slot = if i == 0 {
                zeros.pop_back()
            } else {
                zeros.pop_front()
            }
            .unwrap_or(f64::NAN);
        }
        out
    };
    let poly_from = |r: [f64; 2], count: usize| -> [f64; 3] {
        match count {
            2 if r[1].is_nan() => [1.0, -r[0], 0.0],
            2 => [1.0, -(r[0] + r[1]), r[0] * r[1]],
            _ if r[0].is_nan() => [1.0, 0.0, 0.0],
            _ => [1.0, -r[0], 0.0],
        }
    };

    let mut sections = Vec::new();
    for p in complex {
        let b = poly_from(take_zeros(2), 2);
        sections.push([b[0], b[1], b[2], -2.0 * p.re, p.norm_sqr()]);
    }
    for pair in real.chunks(2) {
        if let [p0, p1] = *pair {
            let b = poly_from(take_zeros(2), 2);
            sections.push([b[0], b[1], b[2], -(p0 + p1), p0 * p1]);
        } else {
            let b = poly_from(take_zeros(1), 1);
            sections.push([b[0], b[1], b[2], -pair[0], 0.0]);
        }
    }
    if let Some(first) = sections.first_mut() {
        for c in first.iter_mut().take(3) {
            *c *= zpk.gain;
        }
    }
    Sos { sections, order }
}

/// Butterworth bandpass; `order` is the prototype order (the cascade has
/// `2 * order` poles).
pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::InvalidParameter("filter order must be >= 1".into()));
    }
    check_band_edge("low band edge", lo_hz, fs)?;
    check_band_edge("high band edge", hi_hz, fs)?;
    if lo_hz >= hi_hz {
        return Err(Error::InvalidParameter(format!(
            "band edges must satisfy lo < hi, got {lo_hz} >= {hi_hz}"
        )));
    }
    let (wl, wh) = (prewarp(lo_hz, fs), prewarp(hi_hz, fs));
    let analog = lowpass_to_bandpass(butter_prototype(order), (wl * wh).sqrt(), wh - wl);
    Ok(zpk_to_sos(bilinear(analog, fs)))
}

pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::InvalidParameter("filter order must be >= 1".into()));
    }
    check_band_edge("highpass cutoff", cutoff_hz, fs)?;
    let analog = lowpass_to_highpass(butter_prototype(order), prewarp(cutoff_hz, fs));
    Ok(zpk_to_sos(bilinear(analog, fs)))
}
