//! One-dimensional golden-section search.

const INV_PHI: f64 = 0.618_033_988_749_894_8; // (√5 − 1)/2

/// Maximizes `f` on `[lo, hi]`, assuming it is unimodal there.
///
/// Stops when the bracket is narrower than `xtol` or after `max_iter`
/// shrink steps. Returns the best point seen among the interior probes and
/// the two endpoints, together with its value.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa = f(a);
    let fb = f(b);
    let mut best = if fa >= fb { (a, fa) } else { (b, fb) };
    if b - a <= xtol {
        return best;
    }

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if b - a <= xtol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimizing counterpart of [`golden_section_max`].
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (x, neg) = golden_section_max(|t| -f(t), lo, hi, xtol, max_iter);
    (x, -neg)
}
