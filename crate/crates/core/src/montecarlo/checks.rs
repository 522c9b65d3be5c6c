//! Empirical checks: decay rates, moderate deviation scaling, moment limits
//! and the central limit regime.

use serde::{Deserialize, Serialize};

use super::{
    estimate_event_prob, event_rate_infimum, simulate_compound, HalfSpaceEvent, Method, Seeds,
};
use crate::counting::CountingModel;
use crate::dual::{apply_cov, pair, DualVector, ExtendedReal};
use crate::error::{Error, Result};
use crate::summand::SummandModel;
use crate::variational::{analytic_limit_moments, finite_n_moment_identities};

/// One row of a decay-rate scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u64,
    pub p_hat: f64,
    pub std_err: f64,
    /// `−(1/n) log p̂`.
    pub neg_log_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub rows: Vec<DecayRow>,
    /// Minus the slope of the weighted fit of `log p̂` against `n`.
    pub slope: Option<f64>,
    pub slope_std_err: Option<f64>,
    /// Infimum of the rate over the event.
    pub rate_infimum: ExtendedReal,
}

/// Weighted least squares of `y` on `x`; returns `(slope, slope_se)`.
fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    Some((sxy / sxx, (1.0 / sxx).sqrt()))
}

/// Estimates `P(event)` at each `n` and fits `log p̂_n ≈ c − r·n` by weighted
/// least squares with weights `1/SE(log p̂)²`, `SE(log p̂) = SE/p̂`.
#[allow(clippy::too_many_arguments)]
pub fn decay_rate_scan(
    mx: &SummandModel,
    mn: &CountingModel,
    event: &HalfSpaceEvent,
    ns: &[u64],
    reps: usize,
    method: Method,
    seeds: Seeds,
    workers: usize,
) -> Result<DecayEstimate> {
    let mut rows = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let e = estimate_event_prob(
            mx,
            mn,
            n,
            event,
            reps,
            method,
            seeds.derive(i as u64),
            workers,
        )?;
        rows.push(DecayRow {
            n,
            p_hat: e.p_hat,
            std_err: e.std_err,
            neg_log_rate: -e.p_hat.ln() / n as f64,
        });
    }
    let usable: Vec<&DecayRow> = rows.iter().filter(|r| r.p_hat > 0.0).collect();
    let x: Vec<f64> = usable.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = usable.iter().map(|r| r.p_hat.ln()).collect();
    let exact = usable.iter().any(|r| r.std_err == 0.0);
    let w: Vec<f64> = usable
        .iter()
        .map(|r| {
            if exact {
                1.0
            } else {
                (r.p_hat / r.std_err).powi(2)
            }
        })
        .collect();
    let fit = weighted_slope(&x, &y, &w);
    Ok(DecayEstimate {
        rows,
        slope: fit.map(|(b, _)| -b + 0.0),
        slope_std_err: fit.map(|(_, se)| if exact { 0.0 } else { se }),
        rate_infimum: event_rate_infimum(mx, mn, event)?,
    })
}

/// Moderate deviation scalings `a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalingFamily {
    /// `a_n = n^{−γ}`, `0 < γ < 1`.
    Power { gamma: f64 },
    /// Explicit `(n, a_n)` pairs.
    Table { points: Vec<(u64, f64)> },
    /// `a_n = 1/n`, the large deviation end where `n·a_n → ∞` fails.
    LdpEndpoint,
}

impl ScalingFamily {
    pub fn a_n(&self, n: u64) -> Result<f64> {
        match self {
            ScalingFamily::Power { gamma } => Ok((n as f64).powf(-gamma)),
            ScalingFamily::LdpEndpoint => Ok(1.0 / n as f64),
            ScalingFamily::Table { points } => points
                .iter()
                .find(|(m, _)| *m == n)
                .map(|(_, a)| *a)
                .ok_or_else(|| Error::InvalidValue(format!("no a_n tabulated for n = {n}"))),
        }
    }

    /// Whether `a_n → 0` and `n·a_n → ∞` hold, checked at the ends of `ns`.
    pub fn satisfies_md_conditions(&self, ns: &[u64]) -> Result<bool> {
        match self {
            ScalingFamily::Power { gamma } => Ok(*gamma > 0.0 && *gamma < 1.0),
            ScalingFamily::LdpEndpoint => Ok(false),
            ScalingFamily::Table { .. } => {
                let (Some(&lo), Some(&hi)) = (ns.iter().min(), ns.iter().max()) else {
                    return Ok(false);
                };
                let (a_lo, a_hi) = (self.a_n(lo)?, self.a_n(hi)?);
                Ok(hi > lo && a_hi < a_lo && hi as f64 * a_hi > lo as f64 * a_lo)
            }
        }
    }

    pub fn validate(&self, ns: &[u64]) -> Result<()> {
        match self {
            ScalingFamily::Power { gamma } if !(*gamma > 0.0 && *gamma < 1.0) => Err(
                Error::Validation(format!("gamma = {gamma} must lie in (0, 1)")),
            ),
            ScalingFamily::Table { points } => {
                if points.iter().any(|(_, a)| !(*a > 0.0 && a.is_finite())) {
                    return Err(Error::Validation("tabulated a_n must be positive".into()));
                }
                for &n in ns {
                    self.a_n(n)?;
                }
                if !self.satisfies_md_conditions(ns)? {
                    return Err(Error::Validation(
                        "tabulated a_n must decrease with n·a_n increasing over the n range".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdRow {
    pub n: u64,
    pub a_n: f64,
    pub eta: f64,
    /// `a_n log E[exp(η(N_n − E[N_n])/√(n a_n))]`.
    pub value: f64,
    pub std_err: f64,
    /// `Λ_N″(0) η²/2`.
    pub target: f64,
    /// Computed from the exact finite-n cumulant rather than sampled.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdSweep {
    pub rows: Vec<MdRow>,
    pub satisfies_md_conditions: bool,
}

impl MdSweep {
    /// Whether `|value − target|` shrinks along `n` for every η.
    pub fn monotone_convergence(&self) -> bool {
        let mut etas: Vec<f64> = self.rows.iter().map(|r| r.eta).collect();
        etas.dedup();
        etas.iter().all(|&eta| {
            let mut rows: Vec<&MdRow> = self.rows.iter().filter(|r| r.eta == eta).collect();
            rows.sort_by_key(|r| r.n);
            rows.windows(2)
                .all(|w| (w[1].value - w[1].target).abs() <= (w[0].value - w[0].target).abs())
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn md_scaling_sweep(
    mn: &CountingModel,
    family: &ScalingFamily,
    etas: &[f64],
    ns: &[u64],
    reps: usize,
    seeds: Seeds,
    workers: usize,
) -> Result<MdSweep> {
    family.validate(ns)?;
    let d2 = mn.derivs_at_zero()?.d2;
    let exact_path = !matches!(mn, CountingModel::Renewal { .. });
    if !exact_path && reps < 2 {
        return Err(Error::InvalidValue(
            "the simulated sweep needs at least 2 reps".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let a_n = family.a_n(n)?;
        let nf = n as f64;
        let scale = (nf * a_n).sqrt();
        let draws: Option<Vec<f64>> = if exact_path {
            None
        } else {
            let law = mn.law_at(n)?;
            let sampler = law.sampler()?;
            Some(super::run_blocks(
                reps,
                seeds.derive(i as u64),
                workers,
                |c, _| Ok(sampler.sample(c) as f64),
            )?)
        };
        for &eta in etas {
            let h = eta / scale;
            let (value, std_err) = match &draws {
                None => {
                    let mean = mn.mean_n(n)?.value;
                    (a_n * (nf * mn.cgf_n_finite(n, h)? - h * mean), 0.0)
                }
                Some(d) => {
                    let m = d.iter().sum::<f64>() / d.len() as f64;
                    let w: Vec<f64> = d.iter().map(|x| (h * (x - m)).exp()).collect();
                    let (wm, wse) = super::mean_and_se(&w);
                    (a_n * wm.ln(), a_n * wse / wm)
                }
            };
            rows.push(MdRow {
                n,
                a_n,
                eta,
                value: if eta == 0.0 { 0.0 } else { value },
                std_err,
                target: 0.5 * d2 * eta * eta,
                exact: exact_path,
            });
        }
    }
    Ok(MdSweep {
        rows,
        satisfies_md_conditions: family.satisfies_md_conditions(ns)?,
    })
}

/// An empirical quantity next to its exact finite-n value and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: u64,
    pub quantity: String,
    pub empirical: f64,
    pub std_err: f64,
    pub exact_finite: Option<f64>,
    pub limit: f64,
}

impl MomentRow {
    /// `|empirical − exact| / SE`, when an exact value exists.
    pub fn z_score(&self) -> Option<f64> {
        let e = self.exact_finite?;
        let d = (self.empirical - e).abs();
        Some(if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        })
    }
}

/// Sample mean with standard error.
fn mean_se(x: &[f64]) -> (f64, f64) {
    super::mean_and_se(x)
}

/// Sample covariance with the standard error of the mean of centered products.
fn cov_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, _) = mean_se(a);
    let (mb, _) = mean_se(b);
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let r = a.len() as f64;
    let (m, se) = mean_se(&prods);
    (m * r / (r - 1.0), se)
}

/// Empirical `n·Cov` of the scaled pair against the exact finite-n values
/// and their limits.
#[allow(clippy::too_many_arguments)]
pub fn moment_limits_check(
    mx: &SummandModel,
    mn: &CountingModel,
    ns: &[u64],
    reps: usize,
    u: &DualVector,
    v: &DualVector,
    seeds: Seeds,
    workers: usize,
) -> Result<Vec<MomentRow>> {
    let limit = analytic_limit_moments(mx, mn, u, v)?;
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let nf = n as f64;
        let samples = simulate_compound(mx, mn, n, reps, seeds.derive(i as u64), workers)?;
        let su: Vec<f64> = samples
            .iter()
            .map(|s| pair(u, &s.s_over_n))
            .collect::<Result<_>>()?;
        let sv: Vec<f64> = samples
            .iter()
            .map(|s| pair(v, &s.s_over_n))
            .collect::<Result<_>>()?;
        let nn: Vec<f64> = samples.iter().map(|s| s.n_over_n).collect();
        let exact = match finite_n_moment_identities(mx, mn, n, u, v) {
            Ok(f) => Some(f),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        let (ms, ms_se) = mean_se(&sv);
        let (mnn, mnn_se) = mean_se(&nn);
        let (css, css_se) = cov_se(&su, &sv);
        let (cns, cns_se) = cov_se(&nn, &sv);
        let (vn, vn_se) = cov_se(&nn, &nn);
        let entries = [
            (
                "mean_s_dir",
                ms,
                ms_se,
                exact.map(|f| f.mean_s_dir),
                limit.mean_s_dir,
            ),
            ("mean_n", mnn, mnn_se, exact.map(|f| f.mean_n), limit.mean_n),
            (
                "cov_ss",
                nf * css,
                nf * css_se,
                exact.map(|f| f.cov_ss),
                limit.cov_ss,
            ),
            (
                "cov_ns",
                nf * cns,
                nf * cns_se,
                exact.map(|f| f.cov_ns),
                limit.cov_ns,
            ),
            (
                "var_n",
                nf * vn,
                nf * vn_se,
                exact.map(|f| f.var_n),
                limit.var_n,
            ),
        ];
        for (q, e, se, ex, lim) in entries {
            rows.push(MomentRow {
                n,
                quantity: q.to_string(),
                empirical: e,
                std_err: se,
                exact_finite: ex,
                limit: lim,
            });
        }
    }
    Ok(rows)
}

/// An empirical statistic against its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub empirical: f64,
    pub std_err: f64,
    pub target: f64,
}

impl Comparison {
    pub fn within(&self, k: f64) -> bool {
        let d = (self.empirical - self.target).abs();
        d <= k * self.std_err || d == 0.0
    }
}

/// Jarque–Bera statistic with its asymptotic χ²₂ p-value `e^{−JB/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normality {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub p_value: f64,
}

fn normality(x: &[f64]) -> Option<Normality> {
    let r = x.len() as f64;
    let m = x.iter().sum::<f64>() / r;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / r;
    if m2 <= 0.0 {
        return None;
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / r;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / r;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jb = r / 6.0 * (skewness.powi(2) + excess_kurtosis.powi(2) / 4.0);
    Some(Normality {
        skewness,
        excess_kurtosis,
        jarque_bera: jb,
        p_value: (-jb / 2.0).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: u64,
    pub reps: usize,
    /// Variance of `⟨v, S − Nμ⟩/√n` against `d1⟨v,Σv⟩`.
    pub var_sum: Comparison,
    /// Variance of `(N − E[N])/√n` against `d2`.
    pub var_count: Comparison,
    /// Their covariance against 0.
    pub cross: Comparison,
    pub normality_sum: Option<Normality>,
    pub normality_count: Option<Normality>,
    /// Variance of `⟨v, S − E[N]μ⟩/√n` against `d1⟨v,Σv⟩ + d2⟨v,μ⟩²`.
    pub transformed_var_sum: Comparison,
    /// Covariance of the transformed pair against `d2⟨v,μ⟩`.
    pub transformed_cross: Comparison,
}

pub fn clt_regime_check(
    mx: &SummandModel,
    mn: &CountingModel,
    n: u64,
    reps: usize,
    v: &DualVector,
    seeds: Seeds,
    workers: usize,
) -> Result<CltReport> {
    let d = mn.derivs_at_zero()?;
    let mu = mx.mean();
    let vm = pair(v, &mu)?;
    let vsv = pair(v, &apply_cov(&mx.covariance(), v)?)?;
    let mean_n = mn.mean_n(n)?.value;
    let samples = simulate_compound(mx, mn, n, reps, seeds, workers)?;
    let nf = n as f64;
    let rn = nf.sqrt();
    let b: Vec<f64> = samples
        .iter()
        .map(|s| (s.raw_n as f64 - mean_n) / rn)
        .collect();
    let a: Vec<f64> = samples
        .iter()
        .map(|s| Ok((nf * pair(v, &s.s_over_n)? - s.raw_n as f64 * vm) / rn))
        .collect::<Result<_>>()?;
    let g: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + vm * y).collect();
    let comp = |(e, se): (f64, f64), target: f64| Comparison {
        empirical: e,
        std_err: se,
        target,
    };
    Ok(CltReport {
        n,
        reps,
        var_sum: comp(cov_se(&a, &a), d.d1 * vsv),
        var_count: comp(cov_se(&b, &b), d.d2),
        cross: comp(cov_se(&a, &b), 0.0),
        normality_sum: normality(&a),
        normality_count: normality(&b),
        transformed_var_sum: comp(cov_se(&g, &g), d.d1 * vsv + d.d2 * vm * vm),
        transformed_cross: comp(cov_se(&g, &b), d.d2 * vm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::ZLaw;

    #[test]
    fn whole_space_scan_has_zero_slope() {
        let mx = SummandModel::rademacher(0.5).unwrap();
        let mn = CountingModel::poisson(1.0).unwrap();
        let e = HalfSpaceEvent::sum(DualVector::new(vec![1.0]).unwrap(), -5.0).unwrap();
        let d = decay_rate_scan(
            &mx,
            &mn,
            &e,
            &[10, 20],
            200,
            Method::Plain,
            Seeds::from_master(3),
            1,
        )
        .unwrap();
        assert!(d.rows.iter().all(|r| r.p_hat == 1.0));
        assert_eq!(d.slope, Some(0.0));
        assert_eq!(d.rate_infimum, ExtendedReal::ZERO);
    }

    #[test]
    fn md_sweep_zero_eta_and_endpoint() {
        let mn = CountingModel::poisson(1.0).unwrap();
        let s = md_scaling_sweep(
            &mn,
            &ScalingFamily::Power { gamma: 0.5 },
            &[0.0, 1.0],
            &[100, 1000],
            0,
            Seeds::from_master(0),
            1,
        )
        .unwrap();
        assert!(s
            .rows
            .iter()
            .filter(|r| r.eta == 0.0)
            .all(|r| r.value == 0.0));
        let end = md_scaling_sweep(
            &mn,
            &ScalingFamily::LdpEndpoint,
            &[1.0],
            &[1000],
            0,
            Seeds::from_master(0),
            1,
        )
        .unwrap();
        let want = std::f64::consts::E - 2.0;
        assert!((end.rows[0].value - want).abs() < 1e-10);
        assert!(!end.satisfies_md_conditions);
    }

    #[test]
    fn deterministic_count_has_flat_second_coordinate() {
        let mx = SummandModel::rademacher(0.5).unwrap();
        let mn = CountingModel::iid_sum(ZLaw::Finite {
            values: vec![2],
            probs: vec![1.0],
        })
        .unwrap();
        let r = clt_regime_check(
            &mx,
            &mn,
            50,
            500,
            &DualVector::new(vec![1.0]).unwrap(),
            Seeds::from_master(9),
            2,
        )
        .unwrap();
        assert_eq!(r.var_count.empirical, 0.0);
        assert!(r.normality_count.is_none());
    }
}
