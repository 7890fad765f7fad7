//! Fourth-order centered finite differences and quadrature rules on uniform
//! samples.

use std::ops::{Add, Mul, Sub};

/// Half width of the centered stencils.
pub const STENCIL_REACH: usize = 2;

/// Values that can be combined linearly with real weights.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Sample for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
}

#[inline]
pub fn d1_at<T: Sample>(f: &[T], i: usize, h: f64) -> T {
    ((f[i + 1] - f[i - 1]) * 8.0 - (f[i + 2] - f[i - 2])) * (1.0 / (12.0 * h))
}

#[inline]
pub fn d2_at<T: Sample>(f: &[T], i: usize, h: f64) -> T {
    ((f[i + 1] + f[i - 1]) * 16.0 - (f[i + 2] + f[i - 2]) - f[i] * 30.0) * (1.0 / (12.0 * h * h))
}

/// First derivative on the interior; the two nodes at each end are zero.
pub fn d1<T: Sample>(f: &[T], h: f64) -> Vec<T> {
    let mut out = vec![T::zero(); f.len()];
    d1_into(f, h, &mut out);
    out
}

pub fn d1_into<T: Sample>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    out.iter_mut().for_each(|o| *o = T::zero());
    if n <= 2 * STENCIL_REACH {
        return;
    }
    for i in STENCIL_REACH..n - STENCIL_REACH {
        out[i] = d1_at(f, i, h);
    }
}

/// Second derivative on the interior; the two nodes at each end are zero.
pub fn d2<T: Sample>(f: &[T], h: f64) -> Vec<T> {
    let mut out = vec![T::zero(); f.len()];
    d2_into(f, h, &mut out);
    out
}

pub fn d2_into<T: Sample>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    out.iter_mut().for_each(|o| *o = T::zero());
    if n <= 2 * STENCIL_REACH {
        return;
    }
    for i in STENCIL_REACH..n - STENCIL_REACH {
        out[i] = d2_at(f, i, h);
    }
}

/// Composite trapezoid rule.
pub fn trapezoid<T: Sample>(f: &[T], h: f64) -> T {
    match f.len() {
        0 | 1 => T::zero(),
        n => {
            let inner = f[1..n - 1].iter().fold(T::zero(), |a, &b| a + b);
            (inner + (f[0] + f[n - 1]) * 0.5) * h
        }
    }
}

/// Composite Simpson rule; an odd number of intervals closes with the 3/8
/// rule on the last three.
pub fn simpson<T: Sample>(f: &[T], h: f64) -> T {
    let n = f.len();
    match n {
        0 | 1 => T::zero(),
        2 => (f[0] + f[1]) * (0.5 * h),
        3 => (f[0] + f[1] * 4.0 + f[2]) * (h / 3.0),
        4 => (f[0] + (f[1] + f[2]) * 3.0 + f[3]) * (3.0 * h / 8.0),
        _ => {
            let intervals = n - 1;
            let even_end = if intervals.is_multiple_of(2) { n - 1 } else { n - 4 };
            let mut acc = f[0] + f[even_end];
            for (k, &v) in f.iter().enumerate().take(even_end).skip(1) {
                acc = acc + v * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let mut total = acc * (h / 3.0);
            if even_end != n - 1 {
                let t = &f[even_end..];
                total = total + (t[0] + (t[1] + t[2]) * 3.0 + t[3]) * (3.0 * h / 8.0);
            }
            total
        }
    }
}

/// Simpson weights (including `h`) for `n` samples, matching [`simpson`].
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => {}
        2 => w.iter_mut().for_each(|x| *x = 0.5 * h),
        3 => w.copy_from_slice(&[h / 3.0, 4.0 * h / 3.0, h / 3.0]),
        _ => {
            let intervals = n - 1;
            let even_end = if intervals.is_multiple_of(2) || n == 4 {
                n - 1
            } else {
                n - 4
            };
            if n == 4 {
                let c = 3.0 * h / 8.0;
                w.copy_from_slice(&[c, 3.0 * c, 3.0 * c, c]);
                return w;
            }
            for (k, wk) in w.iter_mut().enumerate().take(even_end + 1) {
                *wk = h / 3.0
                    * if k == 0 || k == even_end {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
            }
            if even_end != n - 1 {
                let c = 3.0 * h / 8.0;
                w[even_end] += c;
                w[even_end + 1] += 3.0 * c;
                w[even_end + 2] += 3.0 * c;
                w[even_end + 3] += c;
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn samples(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, f64) {
        let h = (b - a) / (n - 1) as f64;
        ((0..n).map(|i| f(a + i as f64 * h)).collect(), h)
    }

    #[test]
    fn derivatives_are_fourth_order() {
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let (f, h) = samples(n, 0.0, 2.0, |x| (3.0 * x).sin());
            let g = d1(&f, h);
            let g2 = d2(&f, h);
            let mut e = 0.0_f64;
            for i in 2..n - 2 {
                let x = i as f64 * h;
                e = e.max((g[i] - 3.0 * (3.0 * x).cos()).abs());
                e = e.max((g2[i] + 9.0 * (3.0 * x).sin()).abs());
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 3.7, "{errs:?}");
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [3, 4, 5, 6, 7, 10] {
            let (f, h) = samples(n, 0.0, 1.0, |x| 1.0 + x + x * x + x * x * x);
            assert_relative_eq!(simpson(&f, h), 1.0 + 0.5 + 1.0 / 3.0 + 0.25, epsilon = 1e-13);
        }
        for n in 2..12 {
            let (f, h) = samples(n, 0.0, 0.5, |x| x.exp());
            let w = simpson_weights(n, h);
            let direct = simpson(&f, h);
            let via_w: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert_relative_eq!(direct, via_w, epsilon = 1e-14);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn trapezoid_linear() {
        let (f, h) = samples(11, 0.0, 1.0, |x| 2.0 * x + 1.0);
        assert_relative_eq!(trapezoid(&f, h), 2.0, epsilon = 1e-14);
    }
}
