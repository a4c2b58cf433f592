use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// FFT length for a frame of `len` samples. `accurate` requests the 4x
/// oversampling used before peak interpolation.
pub fn fft_size(len: usize, accurate: bool) -> usize {
    if accurate {
        next_pow2(4 * len)
    } else {
        next_pow2(len)
    }
}

/// Forward FFT in place, unnormalized.
pub fn fft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Inverse FFT in place, scaled by `1/N`.
pub fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Full complex spectrum of `x` zero-padded (or truncated) to `n` points.
pub fn rfft(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    fft(&mut buf);
    buf
}

/// Real part of the inverse FFT of a Hermitian spectrum.
pub fn irfft(spec: &[Complex64]) -> Vec<f64> {
    let mut buf = spec.to_vec();
    ifft(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Analytic signal `v + j H{v}` via the one-sided spectrum.
pub fn analytic_signal(frame: &[f64]) -> Result<Vec<Complex64>> {
    let n = frame.len();
    if n < 2 {
        return Err(Error::invalid("analytic signal needs at least 2 samples"));
    }
    let mut buf = rfft(frame, n);
    let nyq = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n.is_multiple_of(2) && k == nyq) {
            continue;
        }
        if k <= (n - 1) / 2 {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ifft(&mut buf);
    Ok(buf)
}
