//! Small one-dimensional solvers shared by the frontier, deadline, euler and
//! insurance modules.

/// Outcome of a bracketing bisection: the final bracket and the iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    /// Endpoint where the predicate is false.
    pub lo: f64,
    /// Endpoint where the predicate is true.
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).abs()
    }
}

/// Bisects a monotone predicate: `pred(lo)` false, `pred(hi)` true.
///
/// Works for either orientation of `lo`/`hi` and stops once the bracket is
/// narrower than `tol` or stops shrinking in floating point.
pub fn bisect_predicate<P>(mut lo: f64, mut hi: f64, tol: f64, mut pred: P) -> Bracket
where
    P: FnMut(f64) -> bool,
{
    let mut iterations = 0;
    while (hi - lo).abs() > tol && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Bracket { lo, hi, iterations }
}

/// Root of a continuous function with `f(a)` and `f(b)` of opposite sign
/// (or zero). Returns `None` when the endpoints do not bracket a root.
pub fn bisect_root<F>(a: f64, b: f64, x_tol: f64, f_tol: f64, mut f: F) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return None;
    }
    let negative_at_a = fa < 0.0;
    let (mut lo, mut hi) = (a, b);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm.abs() <= f_tol {
            return Some(mid);
        }
        if (fm < 0.0) == negative_at_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
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
        if c >= d {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints matter when the maximum sits on the boundary
    let candidates = [a, mid, b];
    let mut best = mid;
    let mut best_val = f(mid);
    for &x in &candidates {
        let v = f(x);
        if v > best_val {
            best = x;
            best_val = v;
        }
    }
    best
}

/// `n` evenly spaced points covering `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Left-to-right sum in the given order, for reproducible reductions.
pub fn ordered_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc + v)
}
