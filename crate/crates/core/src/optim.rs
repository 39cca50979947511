//! Bounded scalar minimization and bracketed root finding (Brent).

/// Result of a scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Minimizes `f` on `[lo, hi]` by golden-section search with parabolic
/// interpolation. Non-finite objective values are treated as `+inf`.
///
/// The search stops once the bracket around the best point is narrower than
/// `2 * (sqrt(eps) |x| + abs_tol / 3)`; the endpoints themselves are never
/// evaluated.
pub fn minimize_bounded<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64, max_evals: usize) -> Scalar
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut eval = |x: f64, n: &mut usize| {
        *n += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut n = 0;

    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x, &mut n);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);

    loop {
        let mid = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + abs_tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Scalar { x, fx, evaluations: n, converged: true };
        }
        if n >= max_evals {
            return Scalar { x, fx, evaluations: n, converged: false };
        }

        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = eval(u, &mut n);

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
}

/// Finds a sign change of `f` inside `[lo, hi]` (Brent-Dekker).
///
/// `f(lo)` and `f(hi)` must have opposite signs; either may be infinite, in
/// which case the first steps bisect. Returns `None` when the bracket is
/// invalid.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64, max_evals: usize) -> Option<Scalar>
where
    F: FnMut(f64) -> f64,
{
    let mut n = 2;
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return None;
    }
    if fa == 0.0 {
        return Some(Scalar { x: a, fx: 0.0, evaluations: n, converged: true });
    }
    if fb == 0.0 {
        return Some(Scalar { x: b, fx: 0.0, evaluations: n, converged: true });
    }
    if fa.signum() == fb.signum() {
        return None;
    }

    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    loop {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(Scalar { x: b, fx: fb, evaluations: n, converged: true });
        }
        if n >= max_evals {
            return Some(Scalar { x: b, fx: fb, evaluations: n, converged: false });
        }

        let finite = fa.is_finite() && fb.is_finite() && fc.is_finite();
        if finite && e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        n += 1;
        if fb.is_nan() {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let r = minimize_bounded(|x| (x - 1.234).powi(2) + 3.0, -10.0, 10.0, 1e-10, 200);
        assert!(r.converged);
        assert!((r.x - 1.234).abs() < 1e-7);
        assert!((r.fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_at_boundary() {
        let r = minimize_bounded(|x| x, 0.0, 5.0, 1e-9, 200);
        assert!(r.converged);
        assert!(r.x < 1e-8 && r.x >= 0.0);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let r = minimize_bounded(|x| if x < 1.0 { f64::INFINITY } else { (x - 2.0).powi(2) }, 0.0, 4.0, 1e-9, 300);
        assert!((r.x - 2.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn root_of_cubic() {
        let r = find_root(|x| x * x * x - 2.0, 0.0, 5.0, 1e-15, 200).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn root_with_infinite_end() {
        let r = find_root(|x| if x <= 0.0 { f64::NEG_INFINITY } else { 1.0 - 1.0 / x }, 0.0, 10.0, 1e-14, 300)
            .unwrap();
        assert!((r.x - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }
}
