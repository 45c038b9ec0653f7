//! FFT-based operations on uniformly sampled periodic functions.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Normalized discrete Fourier coefficients `c_k = (1/M) sum_j v_j e^{-2 pi i j k / M}`.
pub fn fourier_coefficients(values: &[f64]) -> Vec<Complex64> {
    let m = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if m == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`fourier_coefficients`]; the imaginary part is discarded.
pub fn synthesize(coeffs: &[Complex64]) -> Vec<f64> {
    let m = coeffs.len();
    let mut buf = coeffs.to_vec();
    if m == 0 {
        return Vec::new();
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Signed wavenumber of FFT bin `k` for an `m`-point transform.
#[inline]
pub fn wavenumber(k: usize, m: usize) -> i64 {
    if 2 * k <= m {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Derivative of a periodic function sampled at `m` uniform points over one `period`.
///
/// The unpaired Nyquist mode (even `m`) is given zero derivative.
pub fn derivative(values: &[f64], period: f64) -> Vec<f64> {
    let m = values.len();
    let mut c = fourier_coefficients(values);
    let scale = 2.0 * PI / period;
    for (k, ck) in c.iter_mut().enumerate() {
        if m.is_multiple_of(2) && 2 * k == m {
            *ck = Complex64::new(0.0, 0.0);
            continue;
        }
        let kk = wavenumber(k, m) as f64;
        *ck *= Complex64::new(0.0, scale * kk);
    }
    synthesize(&c)
}

/// Zero all modes with `|k| > fraction * m / 2`.
pub fn truncate_high_modes(values: &[f64], fraction: f64) -> Vec<f64> {
    let m = values.len();
    let cutoff = fraction * m as f64 / 2.0;
    let mut c = fourier_coefficients(values);
    for (k, ck) in c.iter_mut().enumerate() {
        if (wavenumber(k, m).abs() as f64) > cutoff {
            *ck = Complex64::new(0.0, 0.0);
        }
    }
    synthesize(&c)
}

/// Trigonometric interpolation onto a grid `factor` times finer (zero padding).
///
/// Every `factor`-th output sample reproduces the input sample.
pub fn upsample(values: &[f64], factor: usize) -> Vec<f64> {
    let m = values.len();
    if factor <= 1 {
        return values.to_vec();
    }
    let big = m * factor;
    let c = fourier_coefficients(values);
    let mut padded = vec![Complex64::new(0.0, 0.0); big];
    for (k, &ck) in c.iter().enumerate() {
        let kk = wavenumber(k, m);
        if m.is_multiple_of(2) && 2 * k == m {
            // split the Nyquist mode symmetrically so the result stays real
            padded[k] += 0.5 * ck;
            padded[big - k] += 0.5 * ck;
            continue;
        }
        let idx = if kk >= 0 {
            kk as usize
        } else {
            (big as i64 + kk) as usize
        };
        padded[idx] = ck;
    }
    synthesize(&padded)
}

/// Band-limited interpolant of uniformly spaced periodic samples, evaluable anywhere.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    period: f64,
    mean: f64,
    /// `(a_k, b_k)` for `k = 1, 2, ...` with the term `a_k cos(w k s) + b_k sin(w k s)`.
    modes: Vec<(f64, f64)>,
    /// Cosine amplitude of the unpaired Nyquist mode (even sample counts).
    nyquist: Option<f64>,
}

impl TrigInterpolant {
    pub fn new(values: &[f64], period: f64) -> Self {
        let m = values.len();
        let c = fourier_coefficients(values);
        let mean = c.first().map(|c| c.re).unwrap_or(0.0);
        let paired = (m.max(1) - 1) / 2;
        let modes = (1..=paired)
            .map(|k| (2.0 * c[k].re, -2.0 * c[k].im))
            .collect();
        let nyquist = (m >= 2 && m.is_multiple_of(2)).then(|| c[m / 2].re);
        TrigInterpolant {
            period,
            mean,
            modes,
            nyquist,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_with_derivative(s).0
    }

    /// Value and first derivative; the Nyquist cosine term contributes no derivative.
    pub fn eval_with_derivative(&self, s: f64) -> (f64, f64) {
        let w = 2.0 * PI / self.period;
        let (sin1, cos1) = (w * s).sin_cos();
        let (mut sk, mut ck) = (0.0, 1.0);
        let mut v = self.mean;
        let mut d = 0.0;
        for (idx, &(a, b)) in self.modes.iter().enumerate() {
            let k = (idx + 1) as f64;
            let (s2, c2) = (sk * cos1 + ck * sin1, ck * cos1 - sk * sin1);
            sk = s2;
            ck = c2;
            v += a * ck + b * sk;
            d += w * k * (b * ck - a * sk);
        }
        if let Some(a) = self.nyquist {
            let k = (self.modes.len() + 1) as f64;
            v += a * (w * k * s).cos();
        }
        (v, d)
    }
}
