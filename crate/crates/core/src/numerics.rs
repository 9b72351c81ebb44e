//! Numerical building blocks shared by the closed-form and oracle paths:
//! extrapolated central differences, adaptive Gauss–Kronrod quadrature and
//! branch-continuous logarithms / arctangents.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

const RIDDERS_SHRINK: f64 = 1.4;
const RIDDERS_TABLE: usize = 12;
const RIDDERS_SAFE: f64 = 2.0;

/// Richardson (Ridders) extrapolation of a central-difference stencil whose
/// truncation error is even in `h`. Returns the estimate and its error.
fn ridders<S>(stencil: S, h0: f64) -> (C64, f64)
where
    S: Fn(f64) -> C64,
{
    let con2 = RIDDERS_SHRINK * RIDDERS_SHRINK;
    let mut table = [[C64::new(0.0, 0.0); RIDDERS_TABLE]; RIDDERS_TABLE];
    let mut h = h0;
    table[0][0] = stencil(h);
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..RIDDERS_TABLE {
        h /= RIDDERS_SHRINK;
        table[0][i] = stencil(h);
        let mut fac = con2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= con2;
            let errt = (table[j][i] - table[j - 1][i])
                .norm()
                .max((table[j][i] - table[j - 1][i - 1]).norm());
            if errt <= err {
                err = errt;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).norm() >= RIDDERS_SAFE * err {
            break;
        }
    }
    (best, err)
}

/// Runs the extrapolation from a few starting steps around `h0` and keeps the
/// estimate with the smallest error.
fn ridders_scan<S>(stencil: S, h0: f64) -> C64
where
    S: Fn(f64) -> C64,
{
    [16.0, 4.0, 1.0, 0.25]
        .iter()
        .map(|s| ridders(&stencil, s * h0))
        .filter(|(v, e)| v.re.is_finite() && v.im.is_finite() && e.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(C64::new(f64::NAN, f64::NAN), |(v, _)| v)
}

/// First derivative of `f` at `x` by extrapolated central differences.
///
/// `h0` is the initial step; a tenth of the time scale on which `f` varies is
/// a good choice.
pub fn derivative<F>(f: F, x: f64, h0: f64) -> C64
where
    F: Fn(f64) -> C64,
{
    ridders_scan(
        |h| {
            let (xp, xm) = (x + h, x - h);
            (f(xp) - f(xm)) / (xp - xm)
        },
        h0,
    )
}

/// Second derivative of `f` at `x` by extrapolated central differences.
pub fn second_derivative<F>(f: F, x: f64, h0: f64) -> C64
where
    F: Fn(f64) -> C64,
{
    let fx = f(x);
    // the offsets actually realized in floating point, not the nominal h
    ridders_scan(
        |h| {
            let (xp, xm) = (x + h, x - h);
            let (hp, hm) = (xp - x, x - xm);
            ((f(xp) - fx) / hp - (fx - f(xm)) / hm) * (2.0 / (hp + hm))
        },
        h0,
    )
}

/// Real-valued convenience wrapper around [`second_derivative`].
pub fn second_derivative_real<F>(f: F, x: f64, h0: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    second_derivative(|s| C64::new(f(s), 0.0), x, h0).re
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1] (positive half, centre last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    err: f64,
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> C64,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += pair * w;
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    let err = ((kronrod - gauss) * half).norm();
    Ok(Panel { a, b, value, err })
}

/// Adaptive Gauss–Kronrod quadrature of a complex integrand over `[a, b]`.
///
/// Panels are bisected largest-error-first until the summed error estimate is
/// below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<C64>
where
    F: Fn(f64) -> C64,
{
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    if b < a {
        return integrate(f, b, a, abs_tol, rel_tol).map(|v| -v);
    }
    let mut panels = vec![gk15(&f, a, b)?];
    loop {
        let total: C64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { a, b });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { a: p.a, b: p.b });
        }
        panels.push(gk15(&f, p.a, mid)?);
        panels.push(gk15(&f, mid, p.b)?);
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|s| C64::new(f(s), 0.0), a, b, abs_tol, rel_tol).map(|v| v.re)
}

/// Continuous continuation of `arctan(k·tan x)` through the poles of `tan`.
///
/// The branch index is the nearest integer to `x/π`; with `x = nπ + r`,
/// `r ∈ [−π/2, π/2]`, the result is `arctan(k tan r) + sign(k)·nπ`. At the
/// half-period nodes `r = ±π/2` both one-sided limits coincide, so the value
/// there is `(n ± ½)π·sign(k)`. For `k = 0` the result is `nπ`, i.e. the
/// argument of `cos x` unwrapped through its zeros.
pub fn unwrapped_atan_tan(k: f64, x: f64) -> f64 {
    let n = (x / PI).round();
    let r = x - n * PI;
    let sign = if k < 0.0 { -1.0 } else { 1.0 };
    (k * r.tan()).atan() + sign * n * PI
}

/// Tracks `ln(f(s)/f(0))` with a continuous imaginary part as `s` advances.
///
/// Each accepted step changes the argument by at most π/4 and is no longer than
/// `max_step`, so no 2π wrap can be skipped as long as `max_step` resolves the
/// fastest rotation of `f`.
pub struct UnwrappedLog<F> {
    f: F,
    s: f64,
    z: C64,
    ln_abs0: f64,
    arg: f64,
    floor: f64,
    max_step: f64,
}

impl<F> UnwrappedLog<F>
where
    F: Fn(f64) -> C64,
{
    /// Starts the continuation at `s = 0`. Fails with the offending time when
    /// `|f|` drops below `floor`.
    pub fn new(f: F, floor: f64, max_step: f64) -> std::result::Result<Self, f64> {
        let z = f(0.0);
        if !(z.norm() >= floor) {
            return Err(0.0);
        }
        Ok(Self {
            ln_abs0: z.norm().ln(),
            f,
            s: 0.0,
            z,
            arg: 0.0,
            floor,
            max_step,
        })
    }

    pub fn position(&self) -> f64 {
        self.s
    }

    /// Advances to `t ≥ position()` and returns `ln(f(t)/f(0))`.
    pub fn advance(&mut self, t: f64) -> std::result::Result<C64, f64> {
        if t < self.s {
            return Err(t);
        }
        let mut h = self.max_step.min(t - self.s);
        while self.s < t {
            h = h.min(t - self.s);
            let next_s = if t - self.s <= h { t } else { self.s + h };
            let w = (self.f)(next_s);
            if !(w.norm() >= self.floor) {
                return Err(next_s);
            }
            let d = (w / self.z).arg();
            if d.abs() > PI / 4.0 {
                h *= 0.5;
                if h < 1e-14 * (1.0 + self.s.abs()) {
                    return Err(self.s);
                }
                continue;
            }
            self.arg += d;
            self.s = next_s;
            self.z = w;
            h = (2.0 * h).min(self.max_step);
        }
        Ok(C64::new(self.z.norm().ln() - self.ln_abs0, self.arg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_smooth_functions() {
        let f = |t: f64| C64::new(t.sin(), (2.0 * t).cos());
        let d1 = derivative(f, 0.7, 0.1);
        assert!((d1 - C64::new(0.7f64.cos(), -2.0 * (1.4f64).sin())).norm() < 1e-11);
        let d2 = second_derivative(f, 0.7, 0.1);
        assert!((d2 - C64::new(-0.7f64.sin(), -4.0 * (1.4f64).cos())).norm() < 1e-9);
    }

    #[test]
    fn quadrature_of_peaked_integrand() {
        // ∫_0^π dx / (cos² x + k² sin² x) = π / k
        let k = 0.05;
        let v = integrate_real(|x| 1.0 / (x.cos().powi(2) + k * k * x.sin().powi(2)), 0.0, PI, 1e-12, 0.0)
            .unwrap();
        assert!((v - PI / k).abs() < 1e-10, "{v}");
    }

    #[test]
    fn quadrature_reversed_limits() {
        let v = integrate_real(|x| x * x, 1.0, 0.0, 1e-14, 0.0).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn unwrapped_arctan_is_continuous_through_nodes() {
        for &k in &[0.05, 0.6, 1.0, 3.1, -2.0] {
            let mut prev = unwrapped_atan_tan(k, 0.0);
            for i in 1..=20_000 {
                let x = i as f64 * 3.0 * PI / 20_000.0;
                let v = unwrapped_atan_tan(k, x);
                assert!((v - prev).abs() < 0.5, "jump at k={k}, x={x}");
                prev = v;
            }
            assert!((unwrapped_atan_tan(k, PI) - k.signum() * PI).abs() < 1e-14);
            assert!((unwrapped_atan_tan(k, PI / 2.0) - k.signum() * PI / 2.0).abs() < 1e-14);
        }
        assert_eq!(unwrapped_atan_tan(1.0, 0.0), 0.0);
        // k = 0 is the staircase limit: flat at nπ, stepping at odd multiples of π/2
        assert_eq!(unwrapped_atan_tan(0.0, 1.5), 0.0);
        assert_eq!(unwrapped_atan_tan(0.0, 1.6), PI);
        assert_eq!(unwrapped_atan_tan(0.0, 5.0), 2.0 * PI);
    }

    #[test]
    fn unwrapped_log_follows_winding() {
        let f = |t: f64| C64::from_polar(1.0 + t, 5.0 * t);
        let mut log = UnwrappedLog::new(f, 1e-12, 0.1).unwrap();
        let v = log.advance(10.0).unwrap();
        assert!((v.im - 50.0).abs() < 1e-12);
        assert!((v.re - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unwrapped_log_reports_zero() {
        let f = |t: f64| C64::new(1.0 - t, 0.0);
        let mut log = UnwrappedLog::new(f, 1e-12, 0.25).unwrap();
        assert_eq!(log.advance(1.0), Err(1.0));
    }
}
