use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hip_core::eigen::EigenOptions;
use hip_core::elliptic::{assemble_with, Conductivity};
use hip_core::factorization::{
    assemble_l_with_floor, factorization_residual, l_spectral_bound, max_entry_difference, reference_stencil,
    transport_spectral_bound,
};
use hip_core::forward::{checked_speed, differential, solve_potential_with, ForwardModel, LinearizationBundle};
use hip_core::inversion::{
    apply_df_adjoint, fit_exponent, fit_loglog, gauss_newton_reconstruct, make_noise, relative_error, trace_start,
    write_csv, InversionOptions, RecordKey, SweepRecord,
};
use hip_core::io::save_field;
use hip_core::mesh::{gradient, h1_norm, l2_inner, l2_norm, Grid, ScalarField};
use hip_core::par;
use hip_core::presets::bump;
use hip_core::stability::{
    band_limited_field, linear_stability_sweep, plan_exponents_with, plan_holds, validate_plan, ExponentPlan,
    PlanOptions, SweepOptions,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;

struct Setup {
    grid: Grid,
    sigma: Conductivity,
    model: ForwardModel,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, CliError> {
    let grid = Grid::new(cfg.n)?;
    let sigma = cfg.sigma.build(grid)?;
    let mut model = ForwardModel::new(cfg.boundary.field(grid), cfg.p);
    model.grad_floor = cfg.grad_floor;
    model.solver = cfg.solver;
    Ok(Setup { grid, sigma, model })
}

fn start(cfg: &ExperimentConfig, s: &Setup) -> Result<Conductivity, CliError> {
    Ok(match &cfg.init {
        Some(preset) => preset.build(s.grid)?,
        None => Conductivity::new(trace_start(s.sigma.field(), 1.0))?,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn csv_string(records: &[SweepRecord]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// Writes `u` and `F(sigma)` and returns the summary line.
pub fn forward(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let s = setup(cfg)?;
    let system = assemble_with(&s.sigma, cfg.solver);
    let u = solve_potential_with(&system, &s.model.boundary)?;
    let speed = checked_speed(&gradient(&u), cfg.grad_floor)?;
    let data = s.model.apply(&s.sigma)?;
    fs::create_dir_all(out)?;
    save_field(out.join("u.hipfield"), &u)?;
    save_field(out.join("F.hipfield"), &data)?;
    let summary = format!(
        "min_grad={:.6e} max_grad={:.6e} l2_F={:.6e} h1_F={:.6e}\n",
        speed.min(),
        speed.max(),
        l2_norm(&data),
        h1_norm(&data)
    );
    write_file(out, "forward.txt", &summary)?;
    Ok(summary)
}

struct Check {
    name: &'static str,
    outcome: Result<(bool, String), CliError>,
}

fn random_zero_boundary(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..grid.node_count())
        .map(|k| {
            let (i, j) = grid.ij(k);
            if grid.is_boundary(i, j) {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    ScalarField::new(grid, values).expect("node count")
}

fn bundle_for(cfg: &ExperimentConfig, grid: Grid) -> Result<LinearizationBundle, CliError> {
    let sigma = cfg.sigma.build(grid)?;
    Ok(LinearizationBundle::with_options(sigma, &cfg.boundary.field(grid), cfg.p, cfg.grad_floor, cfg.solver)?)
}

fn check_gradient_floor(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let b = bundle_for(cfg, Grid::new(cfg.n)?)?;
    Ok((true, format!("min|grad u0|={:.6e} floor={:.1e}", b.speed().min(), cfg.grad_floor)))
}

fn check_elliptic(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let g = Grid::new(cfg.n)?;
    let f = ScalarField::from_fn(g, |x, _| x);
    let sys = assemble_with(&Conductivity::constant(g, 1.0)?, cfg.solver);
    let err = solve_potential_with(&sys, &f)?.sub(&f)?.max_abs();
    Ok((err <= 1e-8, format!("max error {err:.3e} (tol 1e-8)")))
}

fn check_stencil(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let g = Grid::new(cfg.n)?;
    let x = ScalarField::from_fn(g, |x, _| x);
    let l = assemble_l_with_floor(&Conductivity::constant(g, 1.0)?, &x, cfg.p, cfg.grad_floor)?;
    let diff = max_entry_difference(l.matrix(), &reference_stencil(g, cfg.p));
    Ok((diff <= 1e-12, format!("max entry difference {diff:.3e} (tol 1e-12)")))
}

fn bump_direction(grid: Grid) -> ScalarField {
    bump(grid, 1.0, 0.45, 0.55, 0.03).with_zero_boundary()
}

fn check_taylor(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let g = Grid::new(cfg.n)?;
    let b = bundle_for(cfg, g)?;
    let h = bump_direction(g);
    let dfh = differential(&b, &h)?;
    let base = b.value();
    let model = b.model();
    let mut points = Vec::new();
    for &eps in &cfg.eps {
        let sigma = Conductivity::new(b.sigma0().field().add_scaled(eps, &h)?)?;
        let r = model.apply(&sigma)?.sub(&base)?.add_scaled(-eps, &dfh)?;
        points.push((eps, l2_norm(&r)));
    }
    let slope = fit_loglog(&points)?.slope;
    Ok(((slope - 2.0).abs() <= 0.1, format!("remainder slope {slope:.4} (want 2 +- 0.1)")))
}

fn check_adjoint(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let g = Grid::new(cfg.n)?;
    let b = bundle_for(cfg, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let h = random_zero_boundary(g, &mut rng);
        let gg = ScalarField::new(g, (0..g.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let lhs = l2_inner(&differential(&b, &h)?, &gg)?;
        let rhs = l2_inner(&h, &apply_df_adjoint(&b, &gg)?)?;
        worst = worst.max((lhs - rhs).abs() / (l2_norm(&h) * l2_norm(&gg)));
    }
    Ok((worst <= 1e-8, format!("worst relative defect {worst:.3e} (tol 1e-8)")))
}

fn check_factorization(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let mut residuals = Vec::new();
    for n in [cfg.n, 2 * cfg.n] {
        let g = Grid::new(n)?;
        let b = bundle_for(cfg, g)?;
        let l = assemble_l_with_floor(b.sigma0(), b.u0(), cfg.p, cfg.grad_floor)?;
        let rho = band_limited_field(g, 3, cfg.seed)?;
        residuals.push(factorization_residual(&b, &l, &rho)?);
    }
    let factor = residuals[0] / residuals[1];
    Ok((
        factor >= 1.5,
        format!("residual {:.3e} -> {:.3e}, factor {factor:.3} (want >= 1.5)", residuals[0], residuals[1]),
    ))
}

fn check_l_bound(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let b = bundle_for(cfg, Grid::new(cfg.n)?)?;
    let l = assemble_l_with_floor(b.sigma0(), b.u0(), cfg.p, cfg.grad_floor)?;
    let lam = l_spectral_bound(&l, EigenOptions::default())?;
    let pi2 = std::f64::consts::PI.powi(2);
    Ok((lam.is_finite() && lam > 0.0, format!("lambda_min {lam:.6e} = {:.4} pi^2", lam / pi2)))
}

fn check_t_bound(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let b = bundle_for(cfg, Grid::new(cfg.n)?)?;
    let s1 = transport_spectral_bound(b.u0(), EigenOptions::default())?;
    let s2 = transport_spectral_bound(&b.u0().scale(2.0), EigenOptions::default())?;
    Ok((s1 > 0.0 && s2 == 2.0 * s1, format!("sigma_min(T0) {s1:.6e}, doubled {s2:.6e}")))
}

fn plan_for(cfg: &ExperimentConfig) -> Result<ExponentPlan, CliError> {
    let opts = PlanOptions { alpha1: cfg.alpha1, ..PlanOptions::default() };
    Ok(plan_exponents_with(cfg.theta, cfg.p, opts)?)
}

fn check_plan(cfg: &ExperimentConfig) -> Result<(bool, String), CliError> {
    let plan = plan_for(cfg)?;
    let checks = validate_plan(&plan);
    Ok((plan_holds(&checks), format!("beta={} s1={} s={}", plan.beta, plan.s1, plan.s)))
}

/// Runs the invariant suite and returns the report; fails with the names of
/// the failing checks.
pub fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    type CheckFn = fn(&ExperimentConfig) -> Result<(bool, String), CliError>;
    let suite: [(&'static str, CheckFn); 9] = [
        ("gradient_floor", check_gradient_floor),
        ("elliptic_linear", check_elliptic),
        ("stencil", check_stencil),
        ("taylor_slope", check_taylor),
        ("adjoint", check_adjoint),
        ("factorization", check_factorization),
        ("l_bound", check_l_bound),
        ("t_bound", check_t_bound),
        ("plan", check_plan),
    ];
    let checks: Vec<Check> = suite.iter().map(|&(name, f)| Check { name, outcome: f(cfg) }).collect();
    let mut report = String::new();
    let mut failed = Vec::new();
    for c in &checks {
        let (ok, detail) = match &c.outcome {
            Ok((ok, detail)) => (*ok, detail.clone()),
            Err(e) => (false, e.to_string()),
        };
        if !ok {
            failed.push(c.name.to_string());
        }
        let _ = writeln!(report, "{:<16} {} {detail}", c.name, if ok { "PASS" } else { "FAIL" });
    }
    write_file(out, "verify.txt", &report)?;
    if failed.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(CliError::VerifyFailed(failed))
    }
}

pub fn reconstruct(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let s = setup(cfg)?;
    let data = s.model.apply(&s.sigma)?;
    let noisy = if cfg.noise_level > 0.0 { data.add(&make_noise(&data, cfg.noise_level, cfg.seed)?)? } else { data };
    let init = start(cfg, &s)?;
    let rec = gauss_newton_reconstruct(&init, &s.model, &noisy, &cfg.inversion, Some(s.sigma.field()))?;
    fs::create_dir_all(out)?;
    save_field(out.join("sigma_hat.hipfield"), rec.sigma.field())?;
    let records: Vec<SweepRecord> = rec
        .log
        .iter()
        .map(|it| {
            let mut r = SweepRecord::new(format!("iter{}", it.iteration));
            r.eps = cfg.noise_level;
            r.rec_err = it.rel_error.unwrap_or(0.0);
            r.extra = it.rel_misfit;
            r
        })
        .collect();
    write_file(out, "reconstruct.csv", &csv_string(&records)?)?;
    let last = rec.log.last().expect("log has the start");
    Ok(format!(
        "iterations={} rel_misfit={:.6e} rel_error={:.6e} change={:.6e}\n",
        last.iteration,
        last.rel_misfit,
        relative_error(rec.sigma.field(), s.sigma.field())?,
        l2_norm(&rec.sigma.field().sub(init.field())?)
    ))
}

pub fn sweep_linear(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let g = Grid::new(cfg.n)?;
    let b = bundle_for(cfg, g)?;
    let plan = plan_for(cfg)?;
    let opts = SweepOptions::from_plan(&plan, cfg.samples, cfg.seed, cfg.modes);
    let sweep = linear_stability_sweep(&b, &opts)?;
    write_file(out, "sweep_linear.csv", &csv_string(&sweep.records)?)?;
    Ok(format!("alpha1={} s1={} c_star={:.6e}\n", plan.alpha1, plan.s1, sweep.c_star))
}

pub fn sweep_nonlinear(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    if cfg.noise_levels.len() < 3 {
        return Err(CliError::Config("noise.levels needs at least three entries".into()));
    }
    let s = setup(cfg)?;
    let data = s.model.apply(&s.sigma)?;
    let init = start(cfg, &s)?;
    let results = par::map_tasks(cfg.noise_levels.len(), |k| -> Result<SweepRecord, CliError> {
        let level = cfg.noise_levels[k];
        let noise = make_noise(&data, level, cfg.seed.wrapping_add(k as u64))?;
        let opts = InversionOptions { target_misfit: 1.5 * l2_norm(&noise), ..cfg.inversion };
        let rec = gauss_newton_reconstruct(&init, &s.model, &data.add(&noise)?, &opts, None)?;
        let mut r = SweepRecord::new(format!("noise{k}"));
        r.eps = level;
        r.l2_h = l2_norm(&rec.sigma.field().sub(s.sigma.field())?);
        r.h1_df = h1_norm(&noise);
        r.rec_err = relative_error(rec.sigma.field(), s.sigma.field())?;
        r.extra = l2_norm(&s.model.apply(&rec.sigma)?.sub(&data)?);
        Ok(r)
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let fit = fit_exponent(&records, RecordKey::Extra, RecordKey::RecErr)?;
    write_file(out, "sweep_nonlinear.csv", &csv_string(&records)?)?;
    Ok(format!("slope={:.6} intercept={:.6} r2={:.6}\n", fit.slope, fit.intercept, fit.r2))
}

pub fn plan(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let plan = plan_for(cfg)?;
    let text = plan.to_key_values();
    write_file(out, "plan.txt", &text)?;
    Ok(text)
}
