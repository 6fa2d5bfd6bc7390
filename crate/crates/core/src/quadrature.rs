//! Adaptive Simpson integration.

use crate::error::{Error, Result};

/// Absolute tolerance used for pointer overlaps.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Maximum number of accepted plus pending subintervals.
pub const DEFAULT_BUDGET: usize = 1 << 18;

const MIN_WIDTH: f64 = 1e-15;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The tolerance is shared between subintervals in proportion to their width,
/// so refinement depth does not force the per-panel tolerance to zero.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, budget: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return Ok(0.0);
    }
    let total_width = b - a;
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        tol,
    }];
    let mut sum = 0.0;
    let mut compensation = 0.0;
    let mut accepted = 0usize;

    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;

        if delta.abs() <= 15.0 * p.tol || (p.b - p.a) < MIN_WIDTH {
            // Kahan-summed Richardson-corrected estimate.
            let y = left + right + delta / 15.0 - compensation;
            let t = sum + y;
            compensation = (t - sum) - y;
            sum = t;
            accepted += 1;
            continue;
        }
        if accepted + stack.len() + 2 > budget {
            return Err(Error::QuadratureNotConverged { budget });
        }
        let child_tol = |w: f64| tol * w / total_width;
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: child_tol(p.b - m),
        });
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: child_tol(m - p.a),
        });
    }
    Ok(sum)
}

/// Integrates over consecutive segments between sorted `breakpoints`, so
/// that kinks and jumps of the integrand sit on panel boundaries.
pub fn integrate_segments<F>(f: F, breakpoints: &[f64], tol: f64, budget: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let span = pts[pts.len() - 1] - pts[0];
    let mut total = 0.0;
    for w in pts.windows(2) {
        let share = tol * (w[1] - w[0]) / span;
        total += adaptive_simpson(&f, w[0], w[1], share, budget)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let v = adaptive_simpson(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-12, 1000).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let v = adaptive_simpson(|x: f64| (-x * x).exp(), -12.0, 12.0, 1e-12, DEFAULT_BUDGET).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn jump_inside_panel_converges() {
        // Indicator of [0.3, 1] integrated over [0, 1] without a breakpoint.
        let v = adaptive_simpson(|x| if x >= 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-10, DEFAULT_BUDGET).unwrap();
        assert!((v - 0.7).abs() < 1e-9);
    }

    #[test]
    fn segments_handle_kinks() {
        let v = integrate_segments(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 1e-12, 1000).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = adaptive_simpson(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-14, 64);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { budget: 64 })));
    }
}
