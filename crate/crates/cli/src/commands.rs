use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qghom_core::effective_model::{
    effective_fiber_roots, kernel_closed, kernel_series, limit_spectrum, EffectiveParams, ThetaMode, Truncation,
};
use qghom_core::graph_model::CheckedCell;
use qghom_core::numerics::C;
use qghom_core::perturbation::{c_perp, compressed_positivity, odd_coefficients, remainder_slopes, solve_chain};
use qghom_core::spectral_solver::{band_sweep, tau_grid};
use qghom_core::verify::{
    convergence_study, default_taus, greens_residual, merge_intervals, upper_half_plane_samples, weyl_checks,
    EffectiveModel,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, num, to_json, Bundle, Csv, Figure, Meta};
use crate::{CliError, Common, ModelArg};

/// Loaded config with command-line overrides folded into `job`.
struct Run {
    cfg: RunConfig,
    cell: CheckedCell,
    out: Option<PathBuf>,
}

impl Run {
    fn load(common: &Common, edit: impl FnOnce(&mut RunConfig)) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(g) = common.gauge {
            cfg.weights.mode = g;
        }
        if common.seed.is_some() {
            cfg.job.seed = common.seed;
        }
        edit(&mut cfg);
        // re-validate after overrides
        let cfg = RunConfig::parse(&cfg.canonical())?;
        let cell = cfg.build_cell(cfg.weights.mode)?;
        let out = common.out.clone().or_else(|| cfg.job.out.as_ref().map(PathBuf::from));
        Ok(Run { cfg, cell, out })
    }

    /// Hash of the run-defining part of the config (output paths excluded).
    fn hash(&self) -> String {
        let mut c = self.cfg.clone();
        c.job.out = None;
        c.job.svg = None;
        c.hash()
    }

    fn meta(&self, command: &'static str) -> Meta {
        Meta::new(command, self.hash())
    }

    fn epsilon(&self) -> Result<f64, CliError> {
        self.cfg.job.epsilon.ok_or_else(|| CliError::Schema("missing epsilon (--epsilon or job.epsilon)".into()))
    }

    fn svg(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.cfg.job.svg.as_ref().map(PathBuf::from))
    }

    fn params(&self) -> Result<EffectiveParams, CliError> {
        Ok(EffectiveParams::from_cell(&self.cell)?)
    }
}

fn json_out<T: Serialize>(run: &Run, command: &'static str, result: T) -> Result<(), CliError> {
    emit(run.out.as_deref(), &to_json(&Bundle { meta: run.meta(command), result }))
}

fn write_svg(path: &Path, fig: &Figure) -> Result<(), CliError> {
    crate::output::write_atomic(path, fig.render().as_bytes())
}

pub fn bands(
    common: &Common,
    epsilon: Option<f64>,
    n_tau: Option<usize>,
    n_bands: Option<usize>,
    svg: Option<PathBuf>,
) -> Result<(), CliError> {
    let run = Run::load(common, |c| {
        c.job.epsilon = epsilon.or(c.job.epsilon);
        c.job.tau_grid = n_tau.or(c.job.tau_grid);
        c.job.bands = n_bands.or(c.job.bands);
    })?;
    let eps = run.epsilon()?;
    let grid = tau_grid(run.cfg.job.tau_grid.unwrap_or(101));
    let data = band_sweep(&run.cell, eps, &grid, run.cfg.job.bands.unwrap_or(4))?;
    let mut csv = Csv::new(&["tau", "band_index", "z"]);
    for (i, &tau) in grid.iter().enumerate() {
        for (n, band) in data.bands.iter().enumerate() {
            csv.row(&[num(tau), (n + 1).to_string(), num(band[i])]);
        }
    }
    emit(run.out.as_deref(), &csv.finish())?;
    if let Some(p) = run.svg(svg) {
        let ranges = data.bands.iter().map(|b| {
            let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        });
        let merged = merge_intervals(ranges.collect());
        let fig = Figure {
            title: format!("Band functions, epsilon = {eps}"),
            x_label: "tau".into(),
            y_label: "z".into(),
            lines: data.bands.iter().map(|b| grid.iter().copied().zip(b.iter().copied()).collect()).collect(),
            y_strips: merged.windows(2).map(|w| [w[0][1], w[1][0]]).collect(),
            ..Default::default()
        };
        write_svg(&p, &fig)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RootsAt {
    tau: f64,
    z: Vec<f64>,
}

#[derive(Serialize)]
struct EffectiveResult {
    params: EffectiveParams,
    z_max: f64,
    bands: Vec<[f64; 2]>,
    gaps: Vec<[f64; 2]>,
    poles: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    theta: ThetaMode,
    roots: Vec<RootsAt>,
}

pub fn effective(
    common: &Common,
    z_max: Option<f64>,
    epsilon: Option<f64>,
    tau: Option<Vec<f64>>,
    limit: bool,
    svg: Option<PathBuf>,
) -> Result<(), CliError> {
    let run = Run::load(common, |c| {
        c.job.z_max = z_max.or(c.job.z_max);
        c.job.epsilon = epsilon.or(c.job.epsilon);
        c.job.tau = tau.or(c.job.tau.take());
    })?;
    let params = run.params()?;
    let z_max = run.cfg.job.z_max.unwrap_or(400.0);
    let spec = limit_spectrum(&params, z_max)?;
    let mode = if limit { ThetaMode::Limit } else { ThetaMode::Fiber };
    let mut roots = Vec::new();
    if let Some(eps) = run.cfg.job.epsilon {
        for &t in run.cfg.job.tau.clone().unwrap_or_else(default_taus).iter() {
            roots.push(RootsAt { tau: t, z: effective_fiber_roots(&params, t, eps, z_max, mode)? });
        }
    }
    if let Some(p) = run.svg(svg) {
        let fig = Figure {
            title: "Limit dispersion function".into(),
            x_label: "z".into(),
            y_label: "D(z)".into(),
            lines: vec![spec.samples.iter().map(|s| (s[0], s[1])).collect()],
            x_strips: spec.gaps.clone(),
            y_clip: Some([-z_max, z_max]),
            ..Default::default()
        };
        write_svg(&p, &fig)?;
    }
    let result = EffectiveResult {
        params,
        z_max,
        bands: spec.bands,
        gaps: spec.gaps,
        poles: spec.poles,
        epsilon: run.cfg.job.epsilon,
        theta: mode,
        roots,
    };
    json_out(&run, "effective", result)
}

pub fn compare(
    common: &Common,
    epsilons: Option<Vec<f64>>,
    tau: Option<Vec<f64>>,
    band: Option<usize>,
    bands: Option<usize>,
    model: ModelArg,
) -> Result<(), CliError> {
    let run = Run::load(common, |c| {
        c.job.epsilons = epsilons.or(c.job.epsilons.take());
        c.job.tau = tau.or(c.job.tau.take());
        c.job.bands = band.or(bands).or(c.job.bands);
    })?;
    if band == Some(0) {
        return Err(CliError::Schema("--band is 1-based".into()));
    }
    let eps = run.cfg.job.epsilons.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125]);
    let taus = run.cfg.job.tau.clone().unwrap_or_else(default_taus);
    let n = run.cfg.job.bands.unwrap_or(1);
    let model = match model {
        ModelArg::Projected => EffectiveModel::Projected,
        ModelArg::Closed => EffectiveModel::Closed,
        ModelArg::Limit => EffectiveModel::Limit,
    };
    let mut report = convergence_study(&run.cell, &eps, &taus, n, model)?;
    if let Some(b) = band {
        report.points.retain(|p| p.band == b);
        report.fits.retain(|f| f.band == b);
    }
    let mut csv = Csv::new(&["epsilon", "tau", "band", "z_exact", "z_eff", "abs_err"]);
    for p in &report.points {
        csv.row(&[num(p.epsilon), num(p.tau), p.band.to_string(), num(p.z_exact), num(p.z_eff), num(p.abs_err)]);
    }
    emit(run.out.as_deref(), &csv.finish())?;
    if let Some(out) = &run.out {
        let mut summary = out.with_extension("json");
        if &summary == out {
            summary = PathBuf::from(format!("{}.summary.json", out.display()));
        }
        let text = to_json(&Bundle { meta: run.meta("compare"), result: &report });
        crate::output::write_atomic(&summary, text.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelPoint {
    tau: f64,
    z: f64,
    closed_re: f64,
    closed_im: f64,
    series: f64,
    raw: f64,
    terms: usize,
    abs_diff: f64,
}

pub fn kernel(
    common: &Common,
    epsilon: Option<f64>,
    tau: Option<Vec<f64>>,
    z: Option<Vec<f64>>,
    series_terms: Option<usize>,
) -> Result<(), CliError> {
    let run = Run::load(common, |c| {
        c.job.epsilon = epsilon.or(c.job.epsilon);
        c.job.tau = tau.or(c.job.tau.take());
        c.job.z = z.or(c.job.z.take());
        c.job.series_terms = series_terms.or(c.job.series_terms);
    })?;
    let params = run.params()?;
    let eps = run.epsilon()?;
    let zs = run.cfg.job.z.clone().ok_or_else(|| CliError::Schema("missing z (--z or job.z)".into()))?;
    let trunc = match (run.cfg.job.series_terms, run.cfg.job.series_tolerance) {
        (Some(j), _) => Truncation::Terms(j),
        (None, Some(tol)) => Truncation::Tolerance(tol),
        (None, None) => Truncation::Terms(10_000),
    };
    let mut points = Vec::new();
    for &t in run.cfg.job.tau.clone().unwrap_or_else(|| vec![PI / 3.0]).iter() {
        for &z in &zs {
            let closed = kernel_closed(&params, t, C::new(z, 0.0), eps)?;
            let s = kernel_series(&params, t, z, eps, trunc)?;
            points.push(KernelPoint {
                tau: t,
                z,
                closed_re: closed.re,
                closed_im: closed.im,
                series: s.value,
                raw: s.raw,
                terms: s.terms,
                abs_diff: (closed - s.value).norm(),
            });
        }
    }
    json_out(&run, "kernel", points)
}

#[derive(Serialize)]
struct PerturbResult {
    chain: qghom_core::perturbation::PerturbationResult,
    c_perp: Option<f64>,
    compressed_min: f64,
    odd_coefficients: [f64; 3],
    remainder: qghom_core::perturbation::RemainderReport,
}

pub fn perturb(common: &Common) -> Result<(), CliError> {
    let run = Run::load(common, |_| {})?;
    let cell = &run.cell;
    let cp = match c_perp(cell) {
        Ok(v) => Some(v),
        Err(qghom_core::Error::TooFewInterfaceVertices) => None,
        Err(e) => return Err(e.into()),
    };
    let compressed_min = if cp.is_some() {
        let taus: Vec<f64> = (0..50).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / 50.0).collect();
        compressed_positivity(cell, &taus)?.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    let result = PerturbResult {
        chain: solve_chain(cell)?,
        c_perp: cp,
        compressed_min,
        odd_coefficients: odd_coefficients(cell)?,
        remainder: remainder_slopes(cell)?,
    };
    json_out(&run, "perturb", result)
}

#[derive(Serialize)]
struct GreensResult {
    epsilon: f64,
    t: f64,
    trials: usize,
    seed: u64,
    greens_residual: f64,
    weyl: qghom_core::verify::WeylReport,
    greens_ok: bool,
    defining_ok: bool,
    herglotz_ok: bool,
}

pub fn greens_check(common: &Common, epsilon: Option<f64>, tau: Option<f64>, trials: Option<usize>) -> Result<(), CliError> {
    let run = Run::load(common, |c| {
        c.job.epsilon = epsilon.or(c.job.epsilon);
        if let Some(t) = tau {
            c.job.tau = Some(vec![t]);
        }
        c.job.trials = trials.or(c.job.trials);
    })?;
    let eps = run.cfg.job.epsilon.unwrap_or(0.1);
    let tau = run.cfg.job.tau.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.2);
    let t = tau / eps;
    let trials = run.cfg.job.trials.unwrap_or(100);
    let seed = run.cfg.job.seed.unwrap_or(0);
    let g = greens_residual(&run.cell, eps, t, trials, seed);
    let mut zs = upper_half_plane_samples(50, seed);
    zs.push(C::new(0.0, 1.0));
    let weyl = weyl_checks(&run.cell, eps, t, &zs, seed)?;
    let result = GreensResult {
        epsilon: eps,
        t,
        trials,
        seed,
        greens_residual: g,
        greens_ok: g <= 1e-8,
        defining_ok: weyl.defining_residual <= 1e-9,
        herglotz_ok: weyl.min_imaginary_eigenvalue >= -1e-10,
        weyl,
    };
    json_out(&run, "greens-check", result)
}
