//! Small scalar numerics shared by the models: adaptive quadrature,
//! golden-section search and log-sum-exp.

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Minimizes a unimodal `f` on `[a, b]`; returns `(argmin, min)`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        // Ties move the bracket left, toward the smaller argument.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// log Σ exp(v_i), with `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// 1/Γ(z), zero at the poles z = 0, −1, −2, …
pub fn recip_gamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.floor() {
        0.0
    } else {
        1.0 / libm::tgamma(z)
    }
}

/// ln C(n, k).
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Dilogarithm Li₂(z) for 0 ≤ z ≤ 1.
pub fn dilog_unit(z: f64) -> f64 {
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    if z <= 0.5 {
        let mut sum = 0.0;
        let mut zk = z;
        for k in 1..200 {
            let term = zk / (k * k) as f64;
            sum += term;
            if term < 1e-18 {
                break;
            }
            zk *= z;
        }
        sum
    } else {
        // Li₂(z) + Li₂(1−z) = π²/6 − ln z ln(1−z)
        let w = 1.0 - z;
        let lw = if w > 0.0 { z.ln() * w.ln() } else { 0.0 };
        pi2_6 - lw - dilog_unit(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = integrate(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 5.0, 1e-12);
        assert!((v - (1.0 - (-5f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section_min(|x| (x - 1.3).powi(2) + 2.0, -10.0, 10.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn dilog_known_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((dilog_unit(1.0) - pi2 / 6.0).abs() < 1e-14);
        assert!((dilog_unit(0.5) - (pi2 / 12.0 - 0.5 * 2f64.ln().powi(2))).abs() < 1e-14);
        assert_eq!(dilog_unit(0.0), 0.0);
    }

    #[test]
    fn recip_gamma_poles() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-2.0), 0.0);
        assert!((recip_gamma(1.0) - 1.0).abs() < 1e-15);
    }
}
