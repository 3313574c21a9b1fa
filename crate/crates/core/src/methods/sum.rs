/// Pairwise (tree) reduction of `count` vectors of length `d` laid out back
/// to back in `buf`. The sum is left in `buf[..d]`; the rest is clobbered.
///
/// The reduction order depends only on `count`, so identical inputs give
/// bitwise identical sums on every platform.
pub(crate) fn pairwise_sum_in_place(buf: &mut [f64], count: usize, d: usize) {
    debug_assert!(buf.len() >= count * d);
    let mut stride = 1;
    while stride < count {
        let mut i = 0;
        while i + stride < count {
            let (head, tail) = buf.split_at_mut((i + stride) * d);
            for (a, b) in head[i * d..(i + 1) * d].iter_mut().zip(&tail[..d]) {
                *a += b;
            }
            i += 2 * stride;
        }
        stride *= 2;
    }
}

/// Pairwise sum of equal-length vectors.
pub fn pairwise_sum(vectors: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let d = first.len();
    let mut buf: Vec<f64> = vectors.iter().flat_map(|v| v.iter().copied()).collect();
    pairwise_sum_in_place(&mut buf, vectors.len(), d);
    buf.truncate(d);
    buf
}
