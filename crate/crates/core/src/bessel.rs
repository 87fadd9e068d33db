//! Bessel functions of the first kind for integer order.

/// `J_0(x) ..= J_{n_max}(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    let ax = x.abs();
    if ax == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }
    let start = (n_max.max(ax.ceil() as usize) + 40 + (4.0 * ax.cbrt()).ceil() as usize + 1) & !1;
    let mut vals = vec![0.0f64; start + 2];
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals[k - 1..=start].iter_mut() {
                *v *= 1e-250;
            }
            next *= 1e-250;
            cur *= 1e-250;
        }
    }
    let mut norm = vals[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * vals[k];
        k += 2;
    }
    let mut out: Vec<f64> = vals[..=n_max].iter().map(|v| v / norm).collect();
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for integer `n` of either sign.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let k = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(x, k)[k];
    if n < 0 && k % 2 == 1 {
        -v
    } else {
        v
    }
}
