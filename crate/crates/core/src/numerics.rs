//! Deterministic numerical kernels shared by the extraction routines and the
//! band solver.
//!
//! All routines operate on plain slices and allocate their outputs. None of
//! them keep state, so they can be called from any number of threads.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("abscissae and ordinates differ in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("abscissae must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
    #[error("series of length {len} is shorter than the smoothing window {window}")]
    SeriesShorterThanWindow { len: usize, window: usize },
    #[error("fit window has no spread in x")]
    DegenerateWindow,
    #[error("invalid smoothing spec: window {window}, poly order {poly_order}")]
    InvalidSmoothing { window: usize, poly_order: usize },
    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Moving-window polynomial smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SmoothingSpec {
    window: usize,
    poly_order: usize,
}

impl SmoothingSpec {
    pub fn new(window: usize, poly_order: usize) -> Result<Self> {
        if window < 3 || window % 2 == 0 || poly_order < 1 || poly_order >= window {
            return Err(NumericsError::InvalidSmoothing { window, poly_order });
        }
        Ok(Self { window, poly_order })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn poly_order(&self) -> usize {
        self.poly_order
    }
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        Self {
            window: 7,
            poly_order: 2,
        }
    }
}

fn check_grid(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < min_len {
        return Err(NumericsError::TooFewPoints {
            needed: min_len,
            got: x.len(),
        });
    }
    check_increasing(x)
}

pub(crate) fn check_increasing(x: &[f64]) -> Result<()> {
    for (i, w) in x.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(NumericsError::NotIncreasing { index: i + 1 });
        }
    }
    Ok(())
}

/// First derivative on a possibly non-uniform grid.
///
/// Interior samples use the three-point central stencil for unequal spacing;
/// the two endpoints use one-sided three-point stencils. Every stencil is
/// exact for polynomials up to degree two.
pub fn derivative(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_grid(x, y, 3)?;
    let n = x.len();
    let mut d = vec![0.0; n];

    {
        let h1 = x[1] - x[0];
        let h2 = x[2] - x[1];
        d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1]
            - h1 / (h2 * (h1 + h2)) * y[2];
    }
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1]
            + (h2 - h1) / (h1 * h2) * y[i]
            + h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    {
        let h1 = x[n - 2] - x[n - 3];
        let h2 = x[n - 1] - x[n - 2];
        d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2]
            + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
    }
    Ok(d)
}

/// Local least-squares polynomial smoothing on the sample index
/// (classic Savitzky–Golay behaviour for uniformly spaced data).
pub fn smooth(y: &[f64], spec: SmoothingSpec) -> Result<Vec<f64>> {
    let t: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    smooth_on(&t, y, spec)
}

/// Local least-squares polynomial smoothing against the actual abscissae.
///
/// Each output sample is the value, at that sample, of a polynomial of degree
/// `poly_order` fitted over the centered window. Near the ends the window is
/// truncated by the boundary (one-sided fit), but never below
/// `poly_order + 1` samples.
pub fn smooth_on(x: &[f64], y: &[f64], spec: SmoothingSpec) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = y.len();
    if n < spec.window {
        return Err(NumericsError::SeriesShorterThanWindow {
            len: n,
            window: spec.window,
        });
    }
    check_increasing(x)?;
    let half = spec.window / 2;
    let p = spec.poly_order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut lo = i.saturating_sub(half);
        let mut hi = (i + half).min(n - 1);
        while hi - lo < p {
            if lo > 0 {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        out.push(local_poly_value(&x[lo..=hi], &y[lo..=hi], x[i], p));
    }
    Ok(out)
}

/// Least-squares polynomial of degree `p` through the points, evaluated at
/// `at`. Abscissae are centered on `at` and scaled to unit span before the
/// normal equations are formed.
fn local_poly_value(x: &[f64], y: &[f64], at: f64, p: usize) -> f64 {
    let scale = x
        .iter()
        .map(|&v| (v - at).abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let m = p + 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    let mut powers = vec![0.0; 2 * p + 1];
    for (&xv, &yv) in x.iter().zip(y) {
        let u = (xv - at) / scale;
        let mut pw = 1.0;
        for slot in powers.iter_mut() {
            *slot = pw;
            pw *= u;
        }
        for r in 0..m {
            b[r] += powers[r] * yv;
            for c in 0..m {
                a[r * m + c] += powers[r + c];
            }
        }
    }
    let coef = solve_dense(&mut a, &mut b, m);
    coef[0]
}

/// Gaussian elimination with partial pivoting on a small row-major system.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Vec<f64> {
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..m {
                a.swap(col * m + c, piv * m + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / d;
            if f != 0.0 {
                for c in col..m {
                    a[r * m + c] -= f * a[col * m + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut xs = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = b[r];
        for c in r + 1..m {
            s -= a[r * m + c] * xs[c];
        }
        xs[r] = s / a[r * m + r];
    }
    xs
}

/// Running trapezoid integral; the first element is zero.
pub fn cumtrapz(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_grid(x, y, 2)?;
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// Result of an ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

/// Ordinary least-squares line over `x[window]`, `y[window]`.
pub fn linfit(x: &[f64], y: &[f64], window: Range<usize>) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(NumericsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let window = window.start.min(x.len())..window.end.min(x.len());
    let xs = &x[window.clone()];
    let ys = &y[window];
    if xs.len() < 2 {
        return Err(NumericsError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in xs.iter().zip(ys) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(NumericsError::DegenerateWindow);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&a, &b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    })
}

/// Location and value of the maximum of the smoothed series. Ties go to the
/// smallest abscissa.
pub fn argmax_smoothed(x: &[f64], y: &[f64], spec: SmoothingSpec) -> Result<(f64, f64)> {
    let s = smooth_on(x, y, spec)?;
    let (idx, _) = argmax_first(&s);
    Ok((x[idx], s[idx]))
}

pub(crate) fn argmax_first(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &val) in v.iter().enumerate().skip(1) {
        if val > v[best] {
            best = i;
        }
    }
    (best, v[best])
}

/// Piecewise-linear interpolation at `xq`. `x` must be increasing and `xq`
/// inside `[x[0], x[n-1]]`; values outside are clamped to the end segments.
pub fn interp_linear(x: &[f64], y: &[f64], xq: f64) -> f64 {
    let n = x.len();
    if xq <= x[0] {
        return y[0];
    }
    if xq >= x[n - 1] {
        return y[n - 1];
    }
    let j = x.partition_point(|&v| v <= xq);
    let (x0, x1) = (x[j - 1], x[j]);
    if xq == x0 {
        return y[j - 1];
    }
    let t = (xq - x0) / (x1 - x0);
    y[j - 1] + t * (y[j] - y[j - 1])
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and `upper[n-1]` are
/// ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(NumericsError::SingularSystem { row: 0 });
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(NumericsError::SingularSystem { row: i });
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut xs = vec![0.0; n];
    xs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        xs[i] = d[i] - c[i] * xs[i + 1];
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn derivative_of_line_and_parabola() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(derivative(&x, &x).unwrap(), vec![1.0, 1.0, 1.0]);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_eq!(derivative(&x, &y).unwrap(), vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn derivative_exact_for_quadratics_on_irregular_grid() {
        let x = [-1.3, -0.2, 0.05, 0.9, 2.4, 2.5, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v - 2.0 * v + 0.5).collect();
        let d = derivative(&x, &y).unwrap();
        for (xi, di) in x.iter().zip(d) {
            assert!((di - (6.0 * xi - 2.0)).abs() < 1e-12, "{di} at {xi}");
        }
    }

    #[test]
    fn derivative_of_sine_is_second_order() {
        // Error constant measured against the analytic derivative: halving h
        // must cut the max error by ~4x, and the error stays below C*h^2.
        let err = |n: usize| {
            let x = uniform(0.0, std::f64::consts::PI, n);
            let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            let d = derivative(&x, &y).unwrap();
            let h = x[1] - x[0];
            let e = x
                .iter()
                .zip(&d)
                .map(|(xi, di)| (di - xi.cos()).abs())
                .fold(0.0, f64::max);
            (e, h)
        };
        let (e1, h1) = err(101);
        let (e2, _) = err(201);
        assert!(e1 <= 0.34 * h1 * h1, "{e1} vs h^2 {}", h1 * h1);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn derivative_rejects_short_series() {
        assert_eq!(
            derivative(&[0.0, 1.0], &[0.0, 1.0]),
            Err(NumericsError::TooFewPoints { needed: 3, got: 2 })
        );
    }

    #[test]
    fn smoothing_spec_validation() {
        assert!(SmoothingSpec::new(6, 2).is_err());
        assert!(SmoothingSpec::new(5, 5).is_err());
        assert!(SmoothingSpec::new(1, 0).is_err());
        assert!(SmoothingSpec::new(3, 2).is_ok());
        assert_eq!(SmoothingSpec::default(), SmoothingSpec::new(7, 2).unwrap());
    }

    #[test]
    fn smoothing_preserves_low_order_polynomials() {
        let spec = SmoothingSpec::default();
        let c = vec![2.5; 20];
        for v in smooth(&c, spec).unwrap() {
            assert!((v - 2.5).abs() <= 1e-12);
        }
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.4 * v * v - 1.1 * v + 7.0).collect();
        let s = smooth_on(&x, &y, spec).unwrap();
        for (a, b) in s.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn smoothing_reduces_noise_against_clean_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = uniform(0.0, 6.0, 241);
        let clean: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let noisy: Vec<f64> = clean
            .iter()
            .map(|v| v + 0.05 * (rng.random::<f64>() - 0.5) * 2.0)
            .collect();
        let s = smooth_on(&x, &noisy, SmoothingSpec::default()).unwrap();
        let rms = |a: &[f64]| {
            (a.iter().zip(&clean).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64)
                .sqrt()
        };
        assert!(rms(&s) < rms(&noisy));
    }

    #[test]
    fn smoothing_short_series_is_an_error() {
        assert_eq!(
            smooth(&[1.0; 5], SmoothingSpec::default()),
            Err(NumericsError::SeriesShorterThanWindow { len: 5, window: 7 })
        );
    }

    #[test]
    fn cumtrapz_cases() {
        let x = uniform(0.0, 2.0, 9);
        assert_eq!(*cumtrapz(&x, &[1.0; 9]).unwrap().last().unwrap(), 2.0);
        let x = [0.0, 0.1, 0.45, 0.5, 0.93, 1.0];
        let q = cumtrapz(&x, &x).unwrap();
        assert!((q.last().unwrap() - 0.5).abs() < 1e-15);
        let x = uniform(0.0, 1.0, 1001);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert!((cumtrapz(&x, &y).unwrap().last().unwrap() - 1.0 / 3.0).abs() < 1e-6);
        assert!(cumtrapz(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn linfit_exact_lines() {
        let x = [0.0, 1.0, 2.0, 3.5];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linfit(&x, &y, 0..4).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-15 && (f.intercept + 1.0).abs() < 1e-15);
        assert!(f.rms_residual < 1e-15);
        let f = linfit(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0], 0..3).unwrap();
        assert_eq!((f.slope, f.intercept, f.rms_residual), (1.0, 0.0, 0.0));
        assert_eq!(
            linfit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 0..3),
            Err(NumericsError::DegenerateWindow)
        );
    }

    #[test]
    fn argmax_tie_breaks_left() {
        let x = uniform(0.0, 10.0, 11);
        let y: Vec<f64> = x.iter().map(|v| -(v - 4.0) * (v - 4.0)).collect();
        assert_eq!(argmax_smoothed(&x, &y, SmoothingSpec::default()).unwrap().0, 4.0);
        let plateau = [0.0, 1.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 1.0, 0.0];
        let (xm, _) = argmax_smoothed(&x, &plateau, SmoothingSpec::new(3, 1).unwrap()).unwrap();
        assert_eq!(xm, 3.0);
    }

    #[test]
    fn tridiagonal_matches_known_solution() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let want = [1.0, 2.0, 3.0, 4.0];
        let rhs = [0.0, 0.0, 0.0, 5.0];
        let got = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let x = [0.0, 1.0, 3.0];
        let y = [0.0, 2.0, 0.0];
        assert_eq!(interp_linear(&x, &y, 0.5), 1.0);
        assert_eq!(interp_linear(&x, &y, 2.0), 1.0);
        assert_eq!(interp_linear(&x, &y, 3.0), 0.0);
        assert_eq!(interp_linear(&x, &y, 1.0), 2.0);
    }
}
