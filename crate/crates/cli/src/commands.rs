use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use sobolev_core::accuracy::{halton_point, l2_error_on, rate_fit, RateFit, MAX_HALTON_DIM};
use sobolev_core::euler::{coupled_pair, pathwise_bounds};
use sobolev_core::growth::{calculus_battery, run_battery, ProbeSpec};
use sobolev_core::mces::{estimate_sobolev, estimate_value, plan_sample_sizes, PlanInputs};
use sobolev_core::netexport::{build_mces_network, count_bound, eval_network, net_fixture, param_count, FrozenRealization};
use sobolev_core::perturb::{coupled_difference, expectation_gap_bound, shifted_pair};
use sobolev_core::problems::lookup;
use sobolev_core::{BenchmarkProblem, Error as CoreError, EstimatorConfig};

use crate::config::{ErrorMetric, ExperimentConfig};
use crate::error::CliError;
use crate::report::{num, Table};

/// Tables produced by a subcommand and the embedded assertions that failed.
#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
    pub plots: Vec<Plot>,
}

/// Log-log sweep plot written next to the CSVs when plotting is on.
pub struct Plot {
    pub stem: String,
    pub title: String,
    pub x_label: String,
    pub points: Vec<(f64, f64)>,
    /// Fitted `(slope, intercept)`.
    pub fit: Option<(f64, f64)>,
}

impl Outcome {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }
}

pub fn run(command: &str, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    match command {
        "solve" => solve(cfg),
        "plan" => plan(cfg),
        "converge-n" => converge_n(cfg),
        "converge-m" => converge_m(cfg),
        "sobolev" => sobolev(cfg),
        "perturb" => perturb(cfg),
        "growth-check" => growth_check(cfg),
        "nn-export" => nn_export(cfg, out_dir),
        other => Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn problem(cfg: &ExperimentConfig) -> Result<BenchmarkProblem, CliError> {
    Ok(lookup(&cfg.problem.fixture, &cfg.problem.params)?)
}

fn point(cfg: &ExperimentConfig, d: usize) -> Result<Vec<f64>, CliError> {
    let x = &cfg.estimator.point;
    match x.len() {
        0 => Ok(vec![0.0; d]),
        n if n == d => Ok(x.clone()),
        n => Err(CliError::Config(format!("estimator.point has {n} coordinates, the fixture lives on ℝ^{d}"))),
    }
}

fn z_score(est: f64, exact: f64, se: f64) -> f64 {
    let diff = (est - exact).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = problem(cfg)?;
    let d = p.dim();
    let x = point(cfg, d)?;
    let e = &cfg.estimator;
    let ec = EstimatorConfig::new(e.samples, e.steps, cfg.run.seed);
    let est = if e.gradient { estimate_sobolev(&p.coefficients, &x, &ec)? } else { estimate_value(&p.coefficients, &x, &ec)? };
    let mut rows = vec![("u".to_string(), est.value[0], est.std_error_value[0], p.exact_value(0.0, &x)?)];
    if let (Some(g), Some(se)) = (&est.gradient, &est.std_error_gradient) {
        let exact = p.exact_grad(0.0, &x)?;
        for i in 0..d {
            rows.push((format!("du/dx{}", i + 1), g[i], se[i], exact[i]));
        }
    }
    let mut out = Outcome::default();
    let mut t = Table::new(
        "solve",
        &["fixture", "d", "samples", "steps", "seed", "quantity", "estimate", "std_error", "exact", "z_score", "aborted"],
    );
    for (q, v, se, exact) in rows {
        let z = z_score(v, exact, se);
        if let Some(max) = cfg.assert.max_z {
            out.check(z <= max, || format!("{q}: |estimate − exact| = {} std errors exceeds {max}", num(z)));
        }
        t.push(vec![
            p.name.clone(),
            d.to_string(),
            e.samples.to_string(),
            e.steps.to_string(),
            cfg.run.seed.to_string(),
            q,
            num(v),
            num(se),
            num(exact),
            num(z),
            est.aborted_samples.to_string(),
        ]);
    }
    out.tables.push(t);
    Ok(out)
}

fn plan(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = &cfg.plan;
    let mut inputs = PlanInputs::new(s.epsilon, s.delta, s.alpha, s.rhs);
    inputs.lipschitz = s.lipschitz;
    inputs.horizon = s.horizon;
    inputs.perturbed_dim = s.perturbed_dim;
    inputs.split = s.split;
    inputs.max_steps = s.max_steps;
    let plan = plan_sample_sizes(&inputs).map_err(|e| match e {
        CoreError::InvalidArgument(m) => CliError::Config(format!("plan: {m}")),
        other => other.into(),
    })?;
    let a = &plan.audit;
    let mut out = Outcome::default();
    out.check(a.holds(), || format!("planned sizes give lhs {} < rhs {}", num(a.lhs), num(a.rhs)));
    let mut t = Table::new(
        "plan",
        &["epsilon", "delta", "alpha", "rhs", "samples", "steps", "min_steps", "sample_term", "sample_budget", "step_term", "step_budget", "lhs", "trivial"],
    );
    t.push(vec![
        num(s.epsilon),
        num(s.delta),
        num(s.alpha),
        num(s.rhs),
        plan.samples.to_string(),
        plan.steps.to_string(),
        a.min_steps.to_string(),
        num(a.sample_term),
        num(a.sample_budget),
        num(a.step_term),
        num(a.step_budget),
        num(a.lhs),
        a.trivial.to_string(),
    ]);
    out.tables.push(t);
    Ok(out)
}

fn fit_table(name: &str, fit: &RateFit) -> Table {
    let mut t = Table::new(name, &["slope", "intercept", "r_squared"]);
    t.push(vec![num(fit.slope), num(fit.intercept), num(fit.r_squared)]);
    t
}

fn converge_n(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = problem(cfg)?;
    let d = p.dim();
    let x = point(cfg, d)?;
    let steps = &cfg.sweep.steps;
    let fine = steps.iter().copied().max().ok_or_else(|| CliError::Config("sweep.steps is empty".into()))?;
    if let Some(n) = steps.iter().find(|&&n| n == 0 || fine % n != 0) {
        return Err(CliError::Config(format!("sweep.steps: {n} does not divide the finest grid {fine}")));
    }
    let nodes = match cfg.sweep.metric {
        ErrorMetric::L2 => Some(cfg.domain.rule.nodes(&cfg.domain.domain(d))?),
        ErrorMetric::Point => None,
    };
    let mut t = Table::new("converge-n", &["steps", "samples", "error", "std_error"]);
    let mut pts = Vec::new();
    for &n in steps {
        let ec = EstimatorConfig::new(cfg.estimator.samples, n, cfg.run.seed).with_fine_steps(fine);
        let (err, se) = match &nodes {
            None => {
                let est = estimate_value(&p.coefficients, &x, &ec)?;
                ((est.value[0] - p.exact_value(0.0, &x)?).abs(), num(est.std_error_value[0]))
            }
            Some(nodes) => {
                let v = |y: &[f64]| Ok(estimate_value(&p.coefficients, y, &ec)?.value);
                let u = |y: &[f64]| Ok(vec![p.exact_value(0.0, y)?]);
                (l2_error_on(&v, &u, nodes)?, String::new())
            }
        };
        pts.push((n as f64, err));
        t.push(vec![n.to_string(), cfg.estimator.samples.to_string(), num(err), se]);
    }
    let fit = rate_fit(&pts)?;
    let mut out = Outcome::default();
    if let Some(max) = cfg.assert.max_slope {
        out.check(fit.slope <= max, || format!("weak-error slope {} exceeds {max}", num(fit.slope)));
    }
    if let Some(min) = cfg.assert.min_r2 {
        out.check(fit.r_squared >= min, || format!("R² {} below {min}", num(fit.r_squared)));
    }
    out.tables.push(t);
    out.tables.push(fit_table("converge-n-fit", &fit));
    out.plots.push(Plot {
        stem: "converge-n".into(),
        title: format!("{}: error against N", p.name),
        x_label: "N".into(),
        points: pts,
        fit: Some((fit.slope, fit.intercept)),
    });
    Ok(out)
}

fn converge_m(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = problem(cfg)?;
    let x = point(cfg, p.dim())?;
    let exact = p.exact_value(0.0, &x)?;
    let mut t = Table::new("converge-m", &["samples", "steps", "estimate", "std_error", "error"]);
    let mut pts = Vec::new();
    for &m in &cfg.sweep.samples {
        let ec = EstimatorConfig::new(m, cfg.estimator.steps, cfg.run.seed);
        let est = estimate_value(&p.coefficients, &x, &ec)?;
        let se = est.std_error_value[0];
        pts.push((m as f64, se));
        t.push(vec![m.to_string(), cfg.estimator.steps.to_string(), num(est.value[0]), num(se), num((est.value[0] - exact).abs())]);
    }
    let fit = rate_fit(&pts)?;
    let mut out = Outcome::default();
    if let Some(target) = cfg.assert.slope {
        let tol = cfg.assert.slope_tol.unwrap_or(0.05);
        out.check((fit.slope - target).abs() <= tol, || {
            format!("standard-error slope {} outside {target} ± {tol}", num(fit.slope))
        });
    }
    out.tables.push(t);
    out.tables.push(fit_table("converge-m-fit", &fit));
    out.plots.push(Plot {
        stem: "converge-m".into(),
        title: format!("{}: standard error against M", p.name),
        x_label: "M".into(),
        points: pts,
        fit: Some((fit.slope, fit.intercept)),
    });
    Ok(out)
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn sobolev(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = problem(cfg)?;
    let d = p.dim();
    let nodes = cfg.domain.rule.nodes(&cfg.domain.domain(d))?;
    let e = &cfg.estimator;
    let ec = EstimatorConfig::new(e.samples, e.steps, cfg.run.seed);
    let mut cache = BTreeMap::new();
    for i in 0..nodes.len() {
        let y = nodes.point(i);
        let est = estimate_sobolev(&p.coefficients, y, &ec)?;
        cache.insert(key(y), (est.value, est.gradient.unwrap_or_default()));
    }
    let lookup_node = |y: &[f64]| cache.get(&key(y)).ok_or_else(|| CoreError::InvalidArgument("node outside the cache".into()));
    let value_err = l2_error_on(&|y: &[f64]| Ok(lookup_node(y)?.0.clone()), &|y: &[f64]| Ok(vec![p.exact_value(0.0, y)?]), &nodes)?;
    let grad_err = l2_error_on(&|y: &[f64]| Ok(lookup_node(y)?.1.clone()), &|y: &[f64]| p.exact_grad(0.0, y), &nodes)?;
    let total = value_err.hypot(grad_err);
    let mut out = Outcome::default();
    if let Some(max) = cfg.assert.max_error {
        out.check(total <= max, || format!("Sobolev error {} exceeds {max}", num(total)));
    }
    let mut t = Table::new("sobolev", &["fixture", "d", "samples", "steps", "nodes", "value_error", "gradient_error", "sobolev_error"]);
    t.push(vec![
        p.name.clone(),
        d.to_string(),
        e.samples.to_string(),
        e.steps.to_string(),
        nodes.len().to_string(),
        num(value_err),
        num(grad_err),
        num(total),
    ]);
    out.tables.push(t);
    Ok(out)
}

fn perturb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = problem(cfg)?;
    let x = point(cfg, p.dim())?;
    let pair = shifted_pair(&p, cfg.perturb.eps)?;
    let e = &cfg.estimator;
    let ec = EstimatorConfig::new(e.samples, e.steps, cfg.run.seed);
    let diff = coupled_difference(&pair, &x, &ec, false)?;
    let gap = diff.mean[0];
    let bound = match expectation_gap_bound(&pair, &x, e.steps) {
        Ok(b) => Some(b),
        Err(CoreError::Precondition(_)) => None,
        Err(other) => return Err(other.into()),
    };
    let grid = ec.grid(p.horizon())?;
    let noise = ec.noise()?;
    let k = pair.constants().pathwise();
    let reports = (0..cfg.perturb.paths as u64)
        .into_par_iter()
        .map(|s| {
            let (a, b) = coupled_pair(pair.base(), pair.pert(), &x, &x, &grid, &noise, s)?;
            pathwise_bounds(&a, &b, k)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let growth_v: usize = reports.iter().map(|r| r.growth_violations).sum();
    let gap_v: usize = reports.iter().map(|r| r.gap_violations).sum();
    let min = |f: fn(&sobolev_core::euler::PathwiseReport) -> f64| reports.iter().map(f).fold(f64::INFINITY, f64::min);
    let mut out = Outcome::default();
    out.check(growth_v == 0, || format!("{growth_v} nodes violate the pathwise growth bound"));
    out.check(gap_v == 0, || format!("{gap_v} nodes violate the pathwise gap bound"));
    if let Some(b) = bound {
        out.check(gap.abs() <= b, || format!("coupled gap {} exceeds the bound {}", num(gap), num(b)));
    }
    let c = pair.constants();
    let mut t = Table::new(
        "perturb",
        &["fixture", "eps", "c0", "c1", "steps", "samples", "gap", "gap_std_error", "gap_bound", "paths", "growth_violations", "gap_violations", "min_growth_log_margin", "min_gap_log_margin"],
    );
    t.push(vec![
        p.name.clone(),
        num(cfg.perturb.eps),
        num(c.c0),
        num(c.c1),
        e.steps.to_string(),
        e.samples.to_string(),
        num(gap),
        num(diff.std_error[0]),
        bound.map(num).unwrap_or_default(),
        reports.len().to_string(),
        growth_v.to_string(),
        gap_v.to_string(),
        num(min(|r| r.growth_log_margin)),
        num(min(|r| r.gap_log_margin)),
    ]);
    out.tables.push(t);
    Ok(out)
}

fn growth_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let probe = ProbeSpec::sized(2, cfg.growth.points);
    let results = run_battery(&calculus_battery(), &probe)?;
    let mut out = Outcome::default();
    let mut t = Table::new("growth-check", &["case", "check", "params", "inequality", "lhs", "rhs", "violations", "asserted", "points"]);
    for r in &results {
        let rep = &r.report;
        out.check(rep.holds(), || format!("{} {} ({}) fails", r.case, rep.check.id(), rep.check.params()));
        for o in &rep.outcomes {
            t.push(vec![
                r.case.into(),
                rep.check.id().into(),
                rep.check.params(),
                o.label.clone(),
                num(o.lhs),
                num(o.rhs),
                o.violations.to_string(),
                o.asserted.to_string(),
                rep.points.to_string(),
            ]);
        }
    }
    out.tables.push(t);
    Ok(out)
}

fn nn_export(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.export;
    if s.dim > MAX_HALTON_DIM {
        return Err(CliError::Config(format!("export.dim must be at most {MAX_HALTON_DIM}")));
    }
    let nets = net_fixture(&s.fixture, s.dim, s.steps, cfg.run.seed)?;
    let depth = nets.terminal.depth();
    let fr = FrozenRealization::new(cfg.run.seed, s.samples, s.steps, s.horizon, nets)?;
    let (net, _) = build_mces_network(&fr)?;
    std::fs::write(out_dir.join("network.json"), net.to_json()?)?;
    let coeffs = fr.coefficient_set()?;
    let ec = fr.estimator_config();
    let mut worst: f64 = 0.0;
    let mut y = vec![0.0; s.dim];
    for i in 0..s.checks {
        halton_point(i as u64 + 1, &mut y);
        let x: Vec<f64> = y.iter().map(|u| 4.0 * u - 2.0).collect();
        let a = eval_network(&net, &x)?;
        let b = estimate_value(&coeffs, &x, &ec)?.value;
        for (a, b) in a.iter().zip(&b) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
        }
    }
    let count = param_count(&net);
    let bound = count_bound(&fr)?;
    let tol = cfg.assert.max_rel_diff.unwrap_or(1e-12);
    let mut out = Outcome::default();
    out.check(count <= bound, || format!("parameter count {count} exceeds the bound {bound}"));
    out.check(worst <= tol, || format!("network and simulator differ by {} relative", num(worst)));
    let mut t = Table::new(
        "nn-export",
        &["fixture", "d", "samples", "steps", "depth", "layers", "param_count", "count_bound", "checks", "max_rel_diff"],
    );
    t.push(vec![
        s.fixture.clone(),
        s.dim.to_string(),
        s.samples.to_string(),
        s.steps.to_string(),
        depth.to_string(),
        net.depth().to_string(),
        count.to_string(),
        bound.to_string(),
        s.checks.to_string(),
        num(worst),
    ]);
    out.tables.push(t);
    Ok(out)
}
