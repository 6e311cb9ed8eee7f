//! Periodized orthogonal discrete wavelet transform and MAD soft-threshold
//! denoising.

use crate::error::{Error, Result};

/// Daubechies-6 reconstruction lowpass (scaling) filter.
const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

/// Normal-to-MAD ratio for Gaussian noise.
const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wavelet {
    Db6,
}

impl Wavelet {
    fn scaling(self) -> &'static [f64] {
        match self {
            Wavelet::Db6 => &DB6,
        }
    }

    fn wavelet_filter(self) -> Vec<f64> {
        let h = self.scaling();
        let n = h.len();
        (0..n)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * h[n - 1 - j])
            .collect()
    }
}

impl std::str::FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "db6" => Ok(Wavelet::Db6),
            other => Err(Error::InvalidParameter(format!("unsupported wavelet {other}"))),
        }
    }
}

/// Multi-level decomposition. `details[0]` is the finest level.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    /// Signal length entering each level, finest first.
    lengths: Vec<usize>,
}

fn analyze(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (j, (&hj, &gj)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + j) % n];
            a += hj * v;
            d += gj * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

fn synthesize(approx: &[f64], detail: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * approx.len();
    let mut x = vec![0.0; n];
    for (k, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        for (j, (&hj, &gj)) in h.iter().zip(g).enumerate() {
            x[(2 * k + j) % n] += hj * a + gj * d;
        }
    }
    x
}

/// Periodized DWT to `level` levels. Odd-length intermediates are extended
/// by repeating their last sample.
pub fn decompose(x: &[f64], wavelet: Wavelet, level: usize) -> Result<Decomposition> {
    if level == 0 {
        return Err(Error::InvalidParameter("wavelet level must be >= 1".into()));
    }
    let needed = 1usize << level.min(usize::BITS as usize - 1);
    if x.len() < needed {
        return Err(Error::SignalTooShort {
            needed,
            found: x.len(),
        });
    }
    let h = wavelet.scaling();
    let g = wavelet.wavelet_filter();
    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(level);
    let mut lengths = Vec::with_capacity(level);
    for _ in 0..level {
        lengths.push(current.len());
        if current.len() % 2 == 1 {
            current.push(*current.last().expect("non-empty"));
        }
        let (a, d) = analyze(&current, h, &g);
        details.push(d);
        current = a;
    }
    Ok(Decomposition {
        approx: current,
        details,
        lengths,
    })
}

pub fn reconstruct(dec: &Decomposition, wavelet: Wavelet) -> Vec<f64> {
    let h = wavelet.scaling();
    let g = wavelet.wavelet_filter();
    let mut current = dec.approx.clone();
    for (detail, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        current = synthesize(&current, detail, h, &g);
        current.truncate(len);
    }
    current
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn median_absolute_deviation(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    let mag = x.abs() - lambda;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Universal-threshold soft denoising of one lead: the noise scale comes
/// from the finest detail band, and every detail band is thresholded.
pub fn denoise(x: &[f64], wavelet: Wavelet, level: usize) -> Result<Vec<f64>> {
    let mut dec = decompose(x, wavelet, level)?;
    let sigma = median_absolute_deviation(&dec.details[0]) / MAD_SCALE;
    let lambda = sigma * (2.0 * (x.len() as f64).ln()).sqrt();
    for band in &mut dec.details {
        for c in band.iter_mut() {
            *c = soft_threshold(*c, lambda);
        }
    }
    Ok(reconstruct(&dec, wavelet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn db6_is_orthonormal() {
        let h = Wavelet::Db6.scaling();
        let sum: f64 = h.iter().sum();
        assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in (0..h.len()).step_by(2) {
            let dot: f64 = h[shift..].iter().zip(h).map(|(a, b)| a * b).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn too_short_for_depth() {
        assert!(matches!(
            decompose(&[0.0; 8], Wavelet::Db6, 4),
            Err(Error::SignalTooShort { needed: 16, found: 8 })
        ));
        assert!(decompose(&[0.0; 16], Wavelet::Db6, 4).is_ok());
    }

    #[test]
    fn zero_in_zero_out() {
        let y = denoise(&[0.0; 500], Wavelet::Db6, 4).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_threshold_is_a_contraction() {
        for &x in &[-3.0, -0.5, 0.0, 0.2, 1.0, 7.5] {
            for &l in &[0.0, 0.3, 1.0, 10.0] {
                assert!(soft_threshold(x, l).abs() <= x.abs());
            }
        }
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.4, 0.5), 0.0);
    }

    #[test]
    fn mad_of_known_values() {
        assert_eq!(median_absolute_deviation(&[1.0, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
    }

    #[test]
    fn denoise_reduces_error_against_clean_sine() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let fs = 250.0;
        let clean: Vec<f64> = (0..2500)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / fs).sin())
            .collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
        let out = denoise(&noisy, Wavelet::Db6, 4).unwrap();
        let mse = |v: &[f64]| {
            v.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / v.len() as f64
        };
        assert_eq!(out.len(), noisy.len());
        assert!(mse(&out) < mse(&noisy), "{} !< {}", mse(&out), mse(&noisy));
    }

    proptest! {
        #[test]
        fn perfect_reconstruction(
            x in prop::collection::vec(-100.0f64..100.0, 16..600),
            level in 1usize..5,
        ) {
            let dec = decompose(&x, Wavelet::Db6, level).unwrap();
            let y = reconstruct(&dec, Wavelet::Db6);
            prop_assert_eq!(y.len(), x.len());
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
