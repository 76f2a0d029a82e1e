//! Linearized and nonlinear reconstruction from internal data.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::elliptic::{assemble, flux_coef_transpose, Conductivity, SolverOptions};
use crate::error::{HipError, Result};
use crate::forward::{differential, ForwardModel, LinearizationBundle};
use crate::mesh::{c2_norm, gradient_transpose, h1_norm, l2_norm, ScalarField, VectorField};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Weight of the `H^1` penalty in the linearized problem.
    pub reg_lambda: f64,
    pub max_outer_iters: usize,
    /// Relative residual of the normal-equation CG, and the relative data
    /// misfit at which Gauss-Newton stops.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Initial step length in `(0, 1]`; halved on every rejected step.
    pub damping: f64,
    pub sigma_projection_min: f64,
    pub noise_seed: u64,
    /// Iterates must stay within this `c2_norm` distance of the start.
    pub c2_radius: f64,
    /// Absolute L2 misfit at which Gauss-Newton stops early (discrepancy
    /// principle); zero disables it.
    pub target_misfit: f64,
    /// Gauss-Newton stops once a step changes the misfit by less than this
    /// fraction.
    pub stall_tol: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            reg_lambda: 1e-8,
            max_outer_iters: 20,
            cg_tol: 1e-6,
            cg_max_iter: 500,
            damping: 1.0,
            sigma_projection_min: 0.1,
            noise_seed: 0,
            c2_radius: 100.0,
            target_misfit: 0.0,
            stall_tol: 1e-3,
        }
    }
}

impl InversionOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(HipError::InvalidArgument(what.to_string()));
        if !(self.reg_lambda >= 0.0) {
            return bad("reg_lambda must be nonnegative");
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return bad("cg_tol and cg_max_iter must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.sigma_projection_min > 0.0) {
            return bad("sigma_projection_min must be positive");
        }
        if !(self.c2_radius > 0.0) || !(self.target_misfit >= 0.0) {
            return bad("c2_radius must be positive and target_misfit nonnegative");
        }
        if !(self.stall_tol >= 0.0 && self.stall_tol < 1.0) {
            return bad("stall_tol must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Adjoint of `dF` in the trapezoidal inner product, exact for the discrete
/// operators: `<dF h, g> = <h, dF* g>` for every nodal `h` and `g`.
pub fn apply_df_adjoint(bundle: &LinearizationBundle, g: &ScalarField) -> Result<ScalarField> {
    let grid = g.grid();
    grid.check_same(&bundle.u0().grid())?;
    let weights = grid.weights();
    let wg: Vec<f64> = g.values().iter().zip(&weights).map(|(a, w)| a * w).collect();
    let fw = bundle.flux_weight();
    let weighted = VectorField::new(
        grid,
        wg.iter().zip(fw.x()).map(|(a, b)| a * b).collect(),
        wg.iter().zip(fw.y()).map(|(a, b)| a * b).collect(),
    )?;
    let psi = bundle.system().solve_interior(&gradient_transpose(&weighted).interior())?;
    let m = flux_coef_transpose(bundle.u0(), &psi);
    let values = (0..grid.node_count())
        .map(|k| bundle.speed_pow().values()[k] * g.values()[k] + m.values()[k] / weights[k])
        .collect();
    ScalarField::new(grid, values)
}

#[derive(Debug, Clone)]
pub struct LinearInversion {
    pub h: ScalarField,
    pub iterations: usize,
    pub rel_residual: f64,
    /// `|dF h - d|^2 + lambda |h|_{H^1}^2` after every CG iterate, starting
    /// from `h = 0`.
    pub objective: Vec<f64>,
}

/// Minimizes `|dF h - d|^2 + lambda |h|_{H^1}^2` over zero-boundary `h` by
/// conjugate gradients on the normal equations.
pub fn linear_invert(
    bundle: &LinearizationBundle,
    data: &ScalarField,
    opts: &InversionOptions,
) -> Result<LinearInversion> {
    opts.validate()?;
    let grid = data.grid();
    grid.check_same(&bundle.u0().grid())?;
    let h2 = grid.h() * grid.h();
    let lambda = opts.reg_lambda;
    let laplace = assemble(&Conductivity::constant(grid, 1.0)?);
    let normal = |x: &[f64]| -> Result<Vec<f64>> {
        let field = ScalarField::from_interior(grid, x);
        let back = apply_df_adjoint(bundle, &differential(bundle, &field)?)?.interior();
        let ax = laplace.matrix().matvec(x);
        Ok(back.iter().zip(x).zip(&ax).map(|((b, xi), a)| b + lambda * (xi + a)).collect())
    };

    let data_sq = crate::mesh::l2_inner(data, data)?;
    let b = apply_df_adjoint(bundle, data)?.interior();
    let b_norm = par::norm(&b);
    let mut x = vec![0.0; grid.interior_count()];
    let mut objective = vec![data_sq];
    if b_norm == 0.0 {
        return Ok(LinearInversion { h: ScalarField::zeros(grid), iterations: 0, rel_residual: 0.0, objective });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = par::dot(&r, &r);
    for it in 1..=opts.cg_max_iter {
        let np = normal(&p)?;
        let pnp = par::dot(&p, &np);
        if !(pnp > 0.0) {
            return Err(HipError::SolverDiverged { iterations: it, residual: rr.sqrt() / b_norm });
        }
        let alpha = rr / pnp;
        par::axpy(alpha, &p, &mut x);
        par::axpy(-alpha, &np, &mut r);
        // x^T N x - 2 x^T b = -x^T (b + r)
        let quad = -(par::dot(&x, &b) + par::dot(&x, &r));
        objective.push(h2 * quad + data_sq);
        let rr_new = par::dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= opts.cg_tol {
            return Ok(LinearInversion {
                h: ScalarField::from_interior(grid, &x),
                iterations: it,
                rel_residual: rel,
                objective,
            });
        }
        par::xpby(&r, rr_new / rr, &mut p);
        rr = rr_new;
    }
    Err(HipError::SolverDiverged { iterations: opts.cg_max_iter, residual: rr.sqrt() / b_norm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    /// `|data - F(sigma)| / |data|` in L2.
    pub rel_misfit: f64,
    /// Step length used to reach this iterate (zero for the start).
    pub step: f64,
    /// `|sigma - truth| / |truth|` when a reference is supplied.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub sigma: Conductivity,
    pub log: Vec<IterateRecord>,
}

/// Damped Gauss-Newton on `F(sigma) = data`. The boundary values of the
/// start are kept (all updates vanish on the ring).
pub fn gauss_newton_reconstruct(
    sigma_init: &Conductivity,
    model: &ForwardModel,
    data: &ScalarField,
    opts: &InversionOptions,
    truth: Option<&ScalarField>,
) -> Result<Reconstruction> {
    opts.validate()?;
    let grid = data.grid();
    let data_norm = l2_norm(data);
    let scale = if data_norm > 0.0 { data_norm } else { 1.0 };
    grid.check_same(&model.boundary.grid())?;
    let forward = |s: &Conductivity| model.apply(s);
    let rel_error = |s: &Conductivity| truth.map(|t| l2_norm(&s.field().sub(t).expect("same grid")) / l2_norm(t));
    let stop_at = (opts.cg_tol * scale).max(opts.target_misfit);

    let mut sigma =
        Conductivity::with_bound(sigma_init.field().clone(), sigma_init.sigma_min().min(opts.sigma_projection_min))?;
    let mut residual = data.sub(&forward(&sigma)?)?;
    let mut misfit = l2_norm(&residual);
    let mut log =
        vec![IterateRecord { iteration: 0, rel_misfit: misfit / scale, step: 0.0, rel_error: rel_error(&sigma) }];
    for it in 1..=opts.max_outer_iters {
        if misfit <= stop_at {
            break;
        }
        let bundle = model.linearize(sigma.clone())?;
        let update = linear_invert(&bundle, &residual, opts)?.h;
        let mut step = opts.damping;
        let mut rejected = 0;
        let stalled = loop {
            let trial_field = sigma.field().add_scaled(step, &update)?.map(|v| v.max(opts.sigma_projection_min));
            let distance = c2_norm(&trial_field.sub(sigma_init.field())?);
            if distance > opts.c2_radius {
                return Err(HipError::NeighborhoodExceeded { distance, radius: opts.c2_radius });
            }
            let trial = Conductivity::with_bound(trial_field, opts.sigma_projection_min)?;
            let trial_residual = data.sub(&forward(&trial)?)?;
            let trial_misfit = l2_norm(&trial_residual);
            // changes below the stall tolerance mean the reachable floor
            // (e.g. boundary values the updates cannot touch) is attained
            let stalled = (trial_misfit - misfit).abs() <= opts.stall_tol * misfit;
            if trial_misfit < misfit {
                sigma = trial;
                residual = trial_residual;
                misfit = trial_misfit;
                break stalled;
            }
            if stalled {
                break true;
            }
            rejected += 1;
            if rejected >= 3 {
                return Err(HipError::Divergence(rejected));
            }
            step *= 0.5;
        };
        log.push(IterateRecord { iteration: it, rel_misfit: misfit / scale, step, rel_error: rel_error(&sigma) });
        if stalled {
            break;
        }
    }
    Ok(Reconstruction { sigma, log })
}

/// Start for reconstructions: `interior` inside, the boundary values of
/// `truth` on the ring (updates never change the ring).
pub fn trace_start(truth: &ScalarField, interior: f64) -> ScalarField {
    let g = truth.grid();
    let values = (0..g.node_count())
        .map(|k| {
            let (i, j) = g.ij(k);
            if g.is_boundary(i, j) {
                truth.values()[k]
            } else {
                interior
            }
        })
        .collect();
    ScalarField::new(g, values).expect("same grid")
}

/// Smooth noise for `data`: white nodal Gaussian noise passed through one
/// zero-boundary Poisson solve and rescaled so that
/// `|noise|_{H^1} = level |data|_{H^1}`. Deterministic per seed.
pub fn make_noise(data: &ScalarField, level: f64, seed: u64) -> Result<ScalarField> {
    if !(level >= 0.0) {
        return Err(HipError::InvalidArgument(format!("noise level must be nonnegative, got {level}")));
    }
    let grid = data.grid();
    if level == 0.0 {
        return Ok(ScalarField::zeros(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..grid.interior_count()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let sys = crate::elliptic::assemble_with(&Conductivity::constant(grid, 1.0)?, SolverOptions::default());
    let smooth = sys.solve_zero_bc(&white)?;
    let target = level * h1_norm(data);
    let size = h1_norm(&smooth);
    Ok(smooth.scale(target / size))
}

/// One row of a sweep table; the CSV header is
/// `label,eps,l2_h,h1_dF,hs1_h,rec_err,extra`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub label: String,
    /// Perturbation size or noise level.
    pub eps: f64,
    pub l2_h: f64,
    pub h1_df: f64,
    pub hs1_h: f64,
    pub rec_err: f64,
    /// Record-specific extra quantity (a ratio, a misfit, ...).
    pub extra: f64,
}

pub const CSV_HEADER: &str = "label,eps,l2_h,h1_dF,hs1_h,rec_err,extra";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKey {
    Eps,
    L2H,
    H1DF,
    Hs1H,
    RecErr,
    Extra,
}

impl SweepRecord {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), eps: 0.0, l2_h: 0.0, h1_df: 0.0, hs1_h: 0.0, rec_err: 0.0, extra: 0.0 }
    }

    pub fn get(&self, key: RecordKey) -> f64 {
        match key {
            RecordKey::Eps => self.eps,
            RecordKey::L2H => self.l2_h,
            RecordKey::H1DF => self.h1_df,
            RecordKey::Hs1H => self.hs1_h,
            RecordKey::RecErr => self.rec_err,
            RecordKey::Extra => self.extra,
        }
    }
}

impl fmt::Display for SweepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.label, self.eps, self.l2_h, self.h1_df, self.hs1_h, self.rec_err, self.extra
        )
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[SweepRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(log x, log y)`.
pub fn fit_exponent(records: &[SweepRecord], x_key: RecordKey, y_key: RecordKey) -> Result<Fit> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.get(x_key), r.get(y_key))).collect();
    fit_loglog(&points)
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(HipError::InvalidArgument(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(HipError::InvalidArgument(format!("log-log fit needs positive entries, got ({x}, {y})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HipError::InvalidArgument("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(Fit { slope, intercept, r2 })
}

/// Relative L2 distance `|a - b| / |b|`.
pub fn relative_error(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    Ok(l2_norm(&a.sub(b)?) / l2_norm(b))
}
