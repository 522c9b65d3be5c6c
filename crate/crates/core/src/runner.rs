//! Runs a validated experiment config and writes its outputs.
//!
//! Every run writes four files into the output directory, named after the
//! experiment kind: a CSV table, a JSON summary with the evaluated bands, a
//! two-column plot-data file and the effective config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentSpec, Models};
use crate::counting::CountingModel;
use crate::dual::{pair, DualVector, ExtendedReal};
use crate::error::{Error, Result};
use crate::montecarlo::{
    clt_regime_check, decay_rate_scan, md_scaling_sweep, moment_limits_check, simulate_compound,
    ScalingFamily, Seeds,
};
use crate::special::{
    log_mittag_leffler, log_mittag_leffler_asymptotic, log_mittag_leffler_series, uses_asymptotic,
    SWITCH_EXPONENT,
};
use crate::variational::{
    rate_ld_explicit, rate_ld_variational, rate_md_centered_sum, rate_md_centered_summands,
    RateQuery,
};

/// Tolerance for exact finite-n identities matching their limits.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Bins of the standardized-sum histogram written by `clt-check`.
pub const HISTOGRAM_BINS: usize = 40;
/// Half-width of that histogram in standard deviations.
pub const HISTOGRAM_RANGE: f64 = 4.0;

/// An acceptance band: `|value − target| ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    /// `tolerance − |value − target|`; negative when the band fails.
    pub margin: f64,
    pub pass: bool,
}

impl Band {
    pub fn new(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let d = (value - target).abs();
        let d = if value == target { 0.0 } else { d };
        let pass = d <= tolerance;
        Band {
            name: name.into(),
            value,
            target,
            tolerance,
            margin: tolerance - d,
            pass,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Band::new(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }
}

/// A rectangular numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// `inf`, `-inf` and `nan` for non-finite cells, shortest round-trip decimal
/// otherwise.
pub fn format_cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

impl ResultTable {
    fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format_cell(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Two-column plot data, with blocks separated by a blank line.
#[derive(Debug, Clone, Default)]
struct PlotData {
    text: String,
}

impl PlotData {
    fn header(&mut self, line: &str) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "# {line}");
    }

    fn point(&mut self, x: f64, y: f64) {
        let _ = writeln!(self.text, "{} {}", format_cell(x), format_cell(y));
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub kind: &'static str,
    pub pass: bool,
    pub bands: Vec<Band>,
    pub files: Vec<PathBuf>,
}

struct Produced {
    table: ResultTable,
    plot: PlotData,
    bands: Vec<Band>,
    results: serde_json::Value,
}

fn ext(v: ExtendedReal) -> f64 {
    v.to_f64()
}

/// Hex SHA-256 of the effective config text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Runs `cfg`, writing into `out_dir`. The outputs depend only on the config,
/// not on `workers`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<RunOutcome> {
    let models = cfg.validate()?;
    let workers = workers.max(1);
    let kind = cfg.experiment.kind();
    let produced = match &cfg.experiment {
        ExperimentSpec::RateEval { .. } => rate_eval(cfg, &models)?,
        ExperimentSpec::LdpCheck { .. } => ldp_check(cfg, &models, workers)?,
        ExperimentSpec::MdCheck { .. } => md_check(cfg, &models, workers)?,
        ExperimentSpec::MomentsCheck { .. } => moments_check(cfg, &models, workers)?,
        ExperimentSpec::CltCheck { .. } => clt_check(cfg, &models, workers)?,
        ExperimentSpec::MlEval { .. } => ml_eval(cfg)?,
    };
    let config_text = cfg.to_toml()?;
    let pass = produced.bands.iter().all(|b| b.pass);
    let names = [
        format!("{kind}.csv"),
        format!("{kind}.summary.json"),
        format!("{kind}.plot.dat"),
        format!("{kind}.config.toml"),
    ];
    let summary = json!({
        "experiment": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(&config_text),
        "seed": cfg.experiment.seed(),
        "pass": pass,
        "bands": produced.bands,
        "results": produced.results,
        "table": { "file": names[0], "columns": produced.table.columns, "rows": produced.table.rows.len() },
        "plot_data": names[2],
        "config": names[3],
    });
    let summary_text =
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))? + "\n";
    fs::create_dir_all(out_dir)?;
    let contents = [
        produced.table.to_csv(),
        summary_text,
        produced.plot.text,
        config_text,
    ];
    let mut files = Vec::new();
    for (name, body) in names.iter().zip(contents) {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        files.push(path);
    }
    Ok(RunOutcome {
        kind,
        pass,
        bands: produced.bands,
        files,
    })
}

fn seeds_of(cfg: &ExperimentConfig) -> Result<Seeds> {
    cfg.experiment
        .seed()
        .map(Seeds::from_master)
        .ok_or_else(|| Error::Config("seed is required for stochastic experiments".into()))
}

fn md_or_nan(r: Result<ExtendedReal>) -> Result<f64> {
    match r {
        Ok(v) => Ok(ext(v)),
        Err(Error::Precondition(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

fn rate_eval(cfg: &ExperimentConfig, m: &Models) -> Result<Produced> {
    let ExperimentSpec::RateEval {
        xs,
        ys,
        variational_check,
        tolerance,
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let h = m.summand.dim();
    let mut cols: Vec<String> = if h == 1 {
        vec!["x".into()]
    } else {
        (1..=h).map(|i| format!("x_{i}")).collect()
    };
    cols.extend(["y", "I", "J1", "J2"].map(String::from));
    let mut table = ResultTable::new(cols);
    let mut plot = PlotData::default();
    plot.header("y I");
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for x in xs {
        for &y in ys {
            let q = RateQuery::new(x.clone(), y)?;
            let i = ext(rate_ld_explicit(&m.summand, &m.counting, &q)?);
            let j1 = md_or_nan(rate_md_centered_summands(&m.summand, &m.counting, &q))?;
            let j2 = md_or_nan(rate_md_centered_sum(&m.summand, &m.counting, &q))?;
            if *variational_check {
                let d = match rate_ld_variational(&m.summand, &m.counting, &q, &cfg.optimizer) {
                    Ok(v) if v.to_f64() == i => 0.0,
                    Ok(v) => (v.to_f64() - i).abs(),
                    Err(Error::Inconclusive { .. }) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                worst = if d.is_nan() {
                    f64::INFINITY
                } else {
                    worst.max(d)
                };
                compared += 1;
            }
            let mut row = x.clone();
            row.extend([y, i, j1, j2]);
            table.push(row);
            plot.point(y, i);
        }
    }
    let mut bands = Vec::new();
    if *variational_check {
        bands.push(Band::new("variational-vs-explicit", worst, 0.0, *tolerance));
    }
    let results = json!({
        "points": table.rows.len(),
        "compared": compared,
        "max_variational_difference": if *variational_check { Some(worst) } else { None },
    });
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

fn ldp_check(cfg: &ExperimentConfig, m: &Models, workers: usize) -> Result<Produced> {
    let ExperimentSpec::LdpCheck {
        event,
        ns,
        reps,
        method,
        band,
        ..
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let ev = event.build(m.summand.dim())?;
    let reps = reps.ok_or_else(|| Error::Config("reps missing".into()))?;
    let scan = decay_rate_scan(
        &m.summand,
        &m.counting,
        &ev,
        ns,
        reps,
        *method,
        seeds_of(cfg)?,
        workers,
    )?;
    let mut table = ResultTable::new(
        ["n", "p_hat", "std_err", "neg_log_rate"]
            .map(String::from)
            .to_vec(),
    );
    let mut plot = PlotData::default();
    plot.header("n -log(p_hat)/n");
    for r in &scan.rows {
        table.push(vec![r.n as f64, r.p_hat, r.std_err, r.neg_log_rate]);
        plot.point(r.n as f64, r.neg_log_rate);
    }
    let target = ext(scan.rate_infimum);
    let slope = scan.slope.unwrap_or(f64::NAN);
    let bands = vec![Band::new("decay-slope", slope, target, band * target.abs())];
    let results = json!({
        "slope": scan.slope,
        "slope_std_err": scan.slope_std_err,
        "rate_infimum": scan.rate_infimum,
        "reps": reps,
        "method": method,
    });
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

fn md_check(cfg: &ExperimentConfig, m: &Models, workers: usize) -> Result<Produced> {
    let ExperimentSpec::MdCheck {
        scaling,
        etas,
        ns,
        reps,
        band,
        ..
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let seeds = match cfg.experiment.seed() {
        Some(s) => Seeds::from_master(s),
        None => Seeds::from_master(0),
    };
    let sweep = md_scaling_sweep(&m.counting, scaling, etas, ns, *reps, seeds, workers)?;
    let mut table = ResultTable::new(
        ["n", "a_n", "eta", "value", "std_err", "target"]
            .map(String::from)
            .to_vec(),
    );
    for r in &sweep.rows {
        table.push(vec![r.n as f64, r.a_n, r.eta, r.value, r.std_err, r.target]);
    }
    let mut plot = PlotData::default();
    let n_max = *ns.iter().max().unwrap_or(&0);
    let d1 = m.counting.derivs_at_zero()?.d1;
    let endpoint = matches!(scaling, ScalingFamily::LdpEndpoint);
    let mut bands = Vec::new();
    for &eta in etas {
        plot.header(&format!("eta = {eta}: n value"));
        for r in sweep.rows.iter().filter(|r| r.eta == eta) {
            plot.point(r.n as f64, r.value);
        }
        if let Some(r) = sweep.rows.iter().find(|r| r.eta == eta && r.n == n_max) {
            let target = if endpoint {
                m.counting.cgf_n_limit(eta)? - eta * d1
            } else {
                r.target
            };
            bands.push(Band::new(
                format!("eta={eta} at n={n_max}"),
                r.value,
                target,
                band * target.abs(),
            ));
        }
    }
    if sweep.satisfies_md_conditions && ns.len() > 1 {
        bands.push(Band::flag("monotone-trend", sweep.monotone_convergence()));
    }
    let results = json!({
        "satisfies_md_conditions": sweep.satisfies_md_conditions,
        "regime": if endpoint { "large-deviation endpoint" } else { "moderate deviations" },
        "exact_path": sweep.rows.iter().all(|r| r.exact),
    });
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

fn exact_limits(mn: &CountingModel) -> bool {
    match mn {
        CountingModel::Poisson { intensity } => intensity.is_homogeneous(),
        CountingModel::IidSum { .. } => true,
        _ => false,
    }
}

const MOMENT_QUANTITIES: [&str; 5] = ["mean_s_dir", "mean_n", "cov_ss", "cov_ns", "var_n"];

fn moments_check(cfg: &ExperimentConfig, m: &Models, workers: usize) -> Result<Produced> {
    let ExperimentSpec::MomentsCheck {
        ns,
        reps,
        u,
        v,
        band,
        ..
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let u = DualVector::new(u.clone())?;
    let v = DualVector::new(v.clone())?;
    let rows = moment_limits_check(
        &m.summand,
        &m.counting,
        ns,
        *reps,
        &u,
        &v,
        seeds_of(cfg)?,
        workers,
    )?;
    let mut cols = vec!["n".to_string()];
    for q in MOMENT_QUANTITIES {
        for suffix in ["empirical", "std_err", "exact", "limit"] {
            cols.push(format!("{q}_{suffix}"));
        }
    }
    let mut table = ResultTable::new(cols);
    let mut bands = Vec::new();
    let check_limits = exact_limits(&m.counting);
    for &n in ns {
        let mut row = vec![n as f64];
        for q in MOMENT_QUANTITIES {
            let r = rows
                .iter()
                .find(|r| r.n == n && r.quantity == q)
                .ok_or_else(|| Error::Io(format!("missing moment row {q} at n = {n}")))?;
            row.extend([
                r.empirical,
                r.std_err,
                r.exact_finite.unwrap_or(f64::NAN),
                r.limit,
            ]);
            if let Some(ex) = r.exact_finite {
                bands.push(Band::new(
                    format!("{q} at n={n}"),
                    r.empirical,
                    ex,
                    band * r.std_err,
                ));
                if check_limits {
                    bands.push(Band::new(
                        format!("{q} exact vs limit at n={n}"),
                        ex,
                        r.limit,
                        IDENTITY_TOL * r.limit.abs().max(1.0),
                    ));
                }
            }
        }
        table.push(row);
    }
    let mut plot = PlotData::default();
    for q in MOMENT_QUANTITIES {
        plot.header(&format!("{q}: n empirical"));
        for r in rows.iter().filter(|r| r.quantity == q) {
            plot.point(r.n as f64, r.empirical);
        }
    }
    let results = json!({ "rows": rows, "exact_limits_checked": check_limits });
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

fn clt_check(cfg: &ExperimentConfig, m: &Models, workers: usize) -> Result<Produced> {
    let ExperimentSpec::CltCheck {
        n, reps, v, band, ..
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let v = DualVector::new(v.clone())?;
    let seeds = seeds_of(cfg)?;
    let r = clt_regime_check(&m.summand, &m.counting, *n, *reps, &v, seeds, workers)?;
    let stats = [
        ("var_sum", r.var_sum),
        ("var_count", r.var_count),
        ("cross", r.cross),
        ("transformed_var_sum", r.transformed_var_sum),
        ("transformed_cross", r.transformed_cross),
    ];
    let mut cols = vec!["n".to_string(), "reps".to_string()];
    let mut row = vec![*n as f64, *reps as f64];
    let mut bands = Vec::new();
    for (name, c) in stats {
        cols.extend([
            name.to_string(),
            format!("{name}_std_err"),
            format!("{name}_target"),
        ]);
        row.extend([c.empirical, c.std_err, c.target]);
        bands.push(Band::new(name, c.empirical, c.target, band * c.std_err));
    }
    for (name, nm) in [("sum", r.normality_sum), ("count", r.normality_count)] {
        cols.push(format!("jarque_bera_p_{name}"));
        row.push(nm.map_or(f64::NAN, |x| x.p_value));
    }
    let mut table = ResultTable::new(cols);
    table.push(row);

    // Histogram of the centred sum coordinate, standardized by its target
    // variance; the same seeds reproduce the replications just checked.
    let mut plot = PlotData::default();
    plot.header("standardized <v, S - N mu>/sqrt(n): bin centre, density");
    let sd = r.var_sum.target.sqrt();
    if sd > 0.0 {
        let vm = pair(&v, &m.summand.mean())?;
        let nf = *n as f64;
        let samples = simulate_compound(&m.summand, &m.counting, *n, *reps, seeds, workers)?;
        let width = 2.0 * HISTOGRAM_RANGE / HISTOGRAM_BINS as f64;
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for s in &samples {
            let z = (nf * pair(&v, &s.s_over_n)? - s.raw_n as f64 * vm) / nf.sqrt() / sd;
            let k = ((z + HISTOGRAM_RANGE) / width).floor();
            if k >= 0.0 && (k as usize) < HISTOGRAM_BINS {
                counts[k as usize] += 1;
            }
        }
        for (k, c) in counts.iter().enumerate() {
            let centre = -HISTOGRAM_RANGE + (k as f64 + 0.5) * width;
            plot.point(centre, *c as f64 / (samples.len() as f64 * width));
        }
    }
    let results = serde_json::to_value(&r).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

fn ml_eval(cfg: &ExperimentConfig) -> Result<Produced> {
    let ExperimentSpec::MlEval {
        nu,
        beta,
        xs,
        tolerance,
        crossover_tolerance,
    } = &cfg.experiment
    else {
        unreachable!()
    };
    let (nu, beta) = (*nu, *beta);
    let mut table = ResultTable::new(
        ["x", "log_E", "E", "asymptotic", "recurrence_error"]
            .map(String::from)
            .to_vec(),
    );
    let mut plot = PlotData::default();
    plot.header(&format!("x log E_(nu={nu},beta={beta})(x)"));
    let mut worst = 0.0f64;
    for &x in xs {
        let l = log_mittag_leffler(nu, beta, x)?;
        // E_{ν,β}(x) = x·E_{ν,β+ν}(x) + 1/Γ(β), compared in logs.
        let err = if x > 0.0 {
            let next = log_mittag_leffler(nu, beta + nu, x)?;
            let rhs =
                x.ln() + next + (libm::tgamma(beta).recip() * (-(x.ln() + next)).exp()).ln_1p();
            (l - rhs).abs()
        } else {
            (l.exp() - libm::tgamma(beta).recip()).abs()
        };
        worst = worst.max(err);
        let asym = if uses_asymptotic(nu, x) { 1.0 } else { 0.0 };
        table.push(vec![x, l, l.exp(), asym, err]);
        plot.point(x, l);
    }
    let xc = SWITCH_EXPONENT.powf(nu);
    let jump = (log_mittag_leffler_series(nu, beta, xc)
        - log_mittag_leffler_asymptotic(nu, beta, xc))
    .abs();
    let bands = vec![
        Band::new("recurrence", worst, 0.0, *tolerance),
        Band::new("branch-crossover", jump, 0.0, *crossover_tolerance),
    ];
    let results =
        json!({ "crossover_x": xc, "crossover_jump": jump, "max_recurrence_error": worst });
    Ok(Produced {
        table,
        plot,
        bands,
        results,
    })
}

/// Documented defaults, printed by the `defaults` subcommand.
pub fn defaults_text() -> String {
    use crate::config::*;
    use crate::counting::{MASS_TAIL_TOL, PROBE_GRID, QUADRATURE_TOL, RENEWAL_MEAN_REPS};
    use crate::montecarlo::{
        BLOCK_SIZE, DEFAULT_PLAIN_REPS, DEFAULT_TILTED_REPS, ENUMERATION_LIMIT, MAX_LOG_WEIGHT,
    };
    use crate::special::MIN_NU;
    use crate::variational::{OptimizerSettings, INITIAL_DAMPING, ORIGIN_TOL, UNBOUNDED_WINDOW};
    let o = OptimizerSettings::default();
    let mut s = String::new();
    let mut line = |k: &str, v: String, note: &str| {
        let _ = writeln!(s, "{k} = {v}    # {note}");
    };
    line(
        "output.dir",
        format!("\"{DEFAULT_OUTPUT_DIR}\""),
        "output directory, overridden by --out",
    );
    line(
        "optimizer.max_iterations",
        o.max_iterations.to_string(),
        "gradient-ascent iteration cap",
    );
    line(
        "optimizer.gradient_tolerance",
        format!("{:e}", o.gradient_tolerance),
        "stop when the gradient norm is below this",
    );
    line(
        "optimizer.divergence_threshold",
        format!("{:e}", o.divergence_threshold),
        "iterate norm beyond which a rising objective is declared unbounded",
    );
    line(
        "optimizer.initial_step",
        format!("{}", o.initial_step),
        "first trial step of the line search",
    );
    line(
        "optimizer.unbounded_window",
        UNBOUNDED_WINDOW.to_string(),
        "iterations of increase required before declaring +inf",
    );
    line(
        "optimizer.initial_damping",
        format!("{INITIAL_DAMPING:e}"),
        "starting damped-Newton regularization, relative to the Hessian norm",
    );
    line(
        "rate.origin_tolerance",
        format!("{ORIGIN_TOL:e}"),
        "norm below which a query counts as the origin",
    );
    line(
        "rate-eval.tolerance",
        format!("{DEFAULT_RATE_TOLERANCE:e}"),
        "variational vs explicit agreement band",
    );
    line(
        "ldp-check.reps",
        format!("{DEFAULT_TILTED_REPS} (tilted) / {DEFAULT_PLAIN_REPS} (plain)"),
        "replications per n",
    );
    line("ldp-check.method", "\"tilted\"".into(), "sampling method");
    line(
        "ldp-check.band",
        DEFAULT_LDP_BAND.to_string(),
        "relative band of the decay slope around the rate infimum",
    );
    line(
        "md-check.reps",
        DEFAULT_MC_REPS.to_string(),
        "replications when no exact finite-n cumulant exists",
    );
    line(
        "md-check.band",
        DEFAULT_MD_BAND.to_string(),
        "relative band at the largest n",
    );
    line(
        "moments-check.reps",
        DEFAULT_MC_REPS.to_string(),
        "replications per n",
    );
    line(
        "moments-check.band",
        DEFAULT_SE_BAND.to_string(),
        "band in standard errors",
    );
    line(
        "clt-check.reps",
        DEFAULT_MC_REPS.to_string(),
        "replications",
    );
    line(
        "clt-check.band",
        DEFAULT_SE_BAND.to_string(),
        "band in standard errors",
    );
    line(
        "ml-eval.tolerance",
        format!("{DEFAULT_ML_TOLERANCE:e}"),
        "recurrence band (relative)",
    );
    line(
        "ml-eval.crossover_tolerance",
        format!("{DEFAULT_CROSSOVER_TOLERANCE:e}"),
        "series vs asymptotic jump at the switch point",
    );
    line(
        "mittag_leffler.switch_exponent",
        SWITCH_EXPONENT.to_string(),
        "asymptotic branch once x^(1/nu) exceeds this",
    );
    line(
        "mittag_leffler.min_nu",
        MIN_NU.to_string(),
        "smallest supported nu",
    );
    line(
        "montecarlo.block_size",
        BLOCK_SIZE.to_string(),
        "replications per random-stream block",
    );
    line(
        "montecarlo.max_log_weight",
        MAX_LOG_WEIGHT.to_string(),
        "likelihood-ratio log-weight overflow guard",
    );
    line(
        "montecarlo.enumeration_limit",
        format!("{ENUMERATION_LIMIT:e}"),
        "largest exact enumeration",
    );
    line(
        "counting.quadrature_tolerance",
        format!("{QUADRATURE_TOL:e}"),
        "adaptive Simpson tolerance for intensities",
    );
    line(
        "counting.mass_tail_tolerance",
        format!("{MASS_TAIL_TOL:e}"),
        "truncation of fractional count tables",
    );
    line(
        "counting.renewal_mean_reps",
        RENEWAL_MEAN_REPS.to_string(),
        "Monte Carlo replications for renewal E[N_n]",
    );
    line(
        "counting.probe_grid",
        format!("{PROBE_GRID:?}"),
        "eta values checked during model validation",
    );
    line("summand.rademacher.p", "0.5".into(), "P(+1)");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn cells_use_inf_sentinel() {
        assert_eq!(format_cell(f64::INFINITY), "inf");
        assert_eq!(format_cell(0.1), "0.1");
        assert_eq!(format_cell(50.0), "50");
    }

    #[test]
    fn band_margin_sign() {
        assert!(Band::new("a", 1.1, 1.0, 0.2).margin > 0.0);
        assert!(!Band::new("a", 1.5, 1.0, 0.2).pass);
        assert!(Band::new("a", 0.0, 0.0, 0.0).pass);
        assert!(!Band::new("a", f64::NAN, 0.0, 1.0).pass);
    }

    #[test]
    fn rate_eval_grid_shape() {
        let text = r#"
[summand]
kind = "finite-support"
atoms = [[1.0, 0.0], [0.0, 1.0]]
probs = [0.5, 0.5]
[counting]
kind = "poisson"
rate = 1.0
[experiment]
kind = "rate-eval"
xs = [[0.1, 0.9], [0.3, 0.7], [0.5, 0.5], [0.7, 0.3], [0.9, 0.1]]
ys = [0.5, 1.0, 1.5, 2.0, 3.0]
"#;
        let cfg = parse_config(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&cfg, dir.path(), 1).unwrap();
        let csv = fs::read_to_string(dir.path().join("rate-eval.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x_1,x_2,y,I,J1,J2");
        assert_eq!(lines.len(), 26);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
        assert!(out.pass);
    }
}
