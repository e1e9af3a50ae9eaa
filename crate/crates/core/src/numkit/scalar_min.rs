use super::NumError;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmin, f(argmin))` with `argmin` within `tol` of the true
/// minimizer. Endpoints are evaluated too, so a minimum on the boundary is
/// returned exactly.
pub fn golden_min<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64), NumError>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumError::Domain(format!("golden_min needs lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(NumError::Domain(format!("golden_min needs tol > 0, got {tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
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
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        if (x - best.0).abs() <= tol {
            let fx = f(x);
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let (x, fx) = golden_min(|x| (x - 2.0) * (x - 2.0), 0.0, 5.0, 1e-8).unwrap();
        assert!((x - 2.0).abs() < 1e-8);
        assert!(fx < 1e-15);
    }

    #[test]
    fn kink() {
        let (x, _) = golden_min(|x| (x - 1.0).abs(), 0.0, 3.0, 1e-9).unwrap();
        assert!((x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_minimum() {
        let (x, fx) = golden_min(|x| x, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(x, 0.0);
        assert_eq!(fx, 0.0);
    }

    #[test]
    fn bad_interval() {
        assert!(matches!(golden_min(|x| x, 1.0, 1.0, 1e-3), Err(NumError::Domain(_))));
        assert!(matches!(golden_min(|x| x, 0.0, 1.0, 0.0), Err(NumError::Domain(_))));
    }
}
