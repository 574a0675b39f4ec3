//! Monotone piecewise-cubic Hermite interpolation of radial profiles.

use alloc::vec;
use alloc::vec::Vec;

/// PCHIP slopes with an even (zero-slope) condition at the first node and the
/// usual one-sided shape-preserving end formula at the last.
fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            continue;
        }
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / a + w2 / b);
    }
    if n >= 3 {
        let (h0, h1) = (h[n - 2], h[n - 3]);
        let (d0, d1) = (delta[n - 2], delta[n - 3]);
        let mut end = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if end * d0 <= 0.0 {
            end = 0.0;
        } else if d0 * d1 <= 0.0 && end.abs() > 3.0 * d0.abs() {
            end = 3.0 * d0;
        }
        d[n - 1] = end;
    } else {
        d[n - 1] = delta[n - 2];
    }
    d
}

/// Evaluates the interpolant of `(x, y)` at ascending `queries`; points past
/// the last node evaluate to zero.
pub(crate) fn pchip_sorted(x: &[f64], y: &[f64], queries: &[f64]) -> Vec<f64> {
    debug_assert!(queries.windows(2).all(|w| w[0] <= w[1]));
    let n = x.len();
    let d = slopes(x, y);
    let last = x[n - 1];
    let mut out = Vec::with_capacity(queries.len());
    let mut k = 0;
    for &q in queries {
        if q > last {
            out.push(0.0);
            continue;
        }
        if q <= x[0] {
            out.push(y[0]);
            continue;
        }
        while k + 2 < n && x[k + 1] < q {
            k += 1;
        }
        let h = x[k + 1] - x[k];
        let t = (q - x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        out.push(h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_is_zero_outside() {
        let x: Vec<f64> = (0..20).map(|k| (k as f64 * 0.1).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|r| (-r * r).exp()).collect();
        let mut q = x.clone();
        q.push(x[19] + 0.5);
        let out = pchip_sorted(&x, &y, &q);
        for k in 0..20 {
            assert!((out[k] - y[k]).abs() < 1e-15);
        }
        assert_eq!(out[20], 0.0);
    }

    #[test]
    fn preserves_monotonicity() {
        let x: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let y = [1.0, 1.0, 0.9, 0.2, 0.19, 0.18, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let q: Vec<f64> = (0..1100).map(|k| k as f64 * 0.01).collect();
        let out = pchip_sorted(&x, &y, &q);
        for w in out.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn accurate_on_smooth_profile() {
        let n = 400;
        let x: Vec<f64> = (0..n).map(|k| 8.0 * k as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|r| (-r * r / 2.0).exp()).collect();
        let q: Vec<f64> = (0..997).map(|k| 7.9 * k as f64 / 996.0).collect();
        let out = pchip_sorted(&x, &y, &q);
        let err = q.iter().zip(&out).map(|(r, v)| (v - (-r * r / 2.0).exp()).abs()).fold(0.0, f64::max);
        assert!(err < 5e-5, "{err}");
    }
}
