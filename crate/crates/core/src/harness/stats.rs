//! Order statistics over seeds.

/// Linear-interpolation percentile (`q` in [0, 100]) of `values`, which are
/// sorted in place. Infinite values sort to the end and propagate.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 100.0) / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    let (a, b) = (values[lo], values[hi]);
    if lo == hi || frac == 0.0 || a == b {
        a
    } else if b.is_infinite() {
        b
    } else {
        a + frac * (b - a)
    }
}

/// (p5, median, p95) of one sample.
pub fn band(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    (percentile(&mut v, 5.0), percentile(&mut v, 50.0), percentile(&mut v, 95.0))
}

/// Round-wise bands of equally long curves (one curve per seed).
pub fn bands(curves: &[Vec<f64>]) -> Vec<(f64, f64, f64)> {
    let len = curves.first().map_or(0, Vec::len);
    let mut column = Vec::with_capacity(curves.len());
    (0..len)
        .map(|t| {
            column.clear();
            column.extend(curves.iter().map(|c| c[t]));
            band(&column)
        })
        .collect()
}

/// Round-wise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.first().map_or(0, Vec::len);
    let k = curves.len() as f64;
    (0..len).map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / k).collect()
}

/// Smallest t such that the mean of `curve[..=t]` is at most `eps`.
pub fn first_running_mean_hit(curve: &[f64], eps: f64) -> Option<usize> {
    let mut sum = 0.0;
    curve.iter().enumerate().find_map(|(t, v)| {
        sum += v;
        (sum / (t + 1) as f64 <= eps).then_some(t)
    })
}
