//! The forward map `F(sigma) = sigma |grad u|^p` and its first two
//! differentials.
//!
//! Differentials are exact derivatives of the *discrete* map: `u` solves the
//! flux-form system, and the auxiliary fields `v`, `w` solve the same system
//! with the flux of the perturbation as source, so Taylor remainders are free
//! of discretization error.

use crate::elliptic::{assemble_with, flux_apply, Conductivity, DirichletSystem, SolverOptions};
use crate::error::{HipError, Result};
use crate::mesh::{c2_norm, gradient, l2_norm, ScalarField, VectorField};

pub const DEFAULT_GRAD_FLOOR: f64 = 1e-3;

/// Exponent `p` of the functional, restricted to the elliptic range `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p <= 1.0 {
            Ok(Self(p))
        } else {
            Err(HipError::ExponentOutOfRange(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `|grad u|` at every node, or the first node where it drops below `floor`.
pub fn checked_speed(grad: &VectorField, floor: f64) -> Result<ScalarField> {
    let speed = grad.magnitude();
    let g = speed.grid();
    let mut worst: Option<(usize, f64)> = None;
    for (k, &s) in speed.values().iter().enumerate() {
        if s < floor && worst.is_none_or(|(_, w)| s < w) {
            worst = Some((k, s));
        }
    }
    match worst {
        Some((k, value)) => {
            let (i, j) = g.ij(k);
            Err(HipError::GradientFloorViolated { i, j, value, floor })
        }
        None => Ok(speed),
    }
}

/// The sigma-harmonic potential with boundary values taken from `f`.
pub fn solve_potential(sigma: &Conductivity, f: &ScalarField) -> Result<ScalarField> {
    solve_potential_with(&assemble_with(sigma, SolverOptions::default()), f)
}

pub fn solve_potential_with(system: &DirichletSystem, f: &ScalarField) -> Result<ScalarField> {
    system.solve_dirichlet(f, &ScalarField::zeros(system.grid()))
}

pub fn forward_map(sigma: &Conductivity, f: &ScalarField, p: Exponent) -> Result<ScalarField> {
    forward_map_with(sigma, f, p, DEFAULT_GRAD_FLOOR, SolverOptions::default())
}

pub fn forward_map_with(
    sigma: &Conductivity,
    f: &ScalarField,
    p: Exponent,
    grad_floor: f64,
    solver: SolverOptions,
) -> Result<ScalarField> {
    let u = solve_potential_with(&assemble_with(sigma, solver), f)?;
    let speed = checked_speed(&gradient(&u), grad_floor)?;
    let p = p.value();
    sigma.field().zip_map(&speed, |s, g| s * g.powf(p))
}

/// Fixed measurement setup: boundary data, exponent and numerical settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub boundary: ScalarField,
    pub p: Exponent,
    pub grad_floor: f64,
    pub solver: SolverOptions,
}

impl ForwardModel {
    pub fn new(boundary: ScalarField, p: Exponent) -> Self {
        Self { boundary, p, grad_floor: DEFAULT_GRAD_FLOOR, solver: SolverOptions::default() }
    }

    /// `F(sigma)`.
    pub fn apply(&self, sigma: &Conductivity) -> Result<ScalarField> {
        forward_map_with(sigma, &self.boundary, self.p, self.grad_floor, self.solver)
    }

    pub fn linearize(&self, sigma: Conductivity) -> Result<LinearizationBundle> {
        LinearizationBundle::with_options(sigma, &self.boundary, self.p, self.grad_floor, self.solver)
    }
}

/// Everything needed to apply `dF` at a base conductivity: the potential, its
/// gradient, `|grad u0|^p`, and the assembled system for auxiliary solves.
#[derive(Debug)]
pub struct LinearizationBundle {
    sigma0: Conductivity,
    boundary: ScalarField,
    u0: ScalarField,
    grad_u0: VectorField,
    speed: ScalarField,
    speed_pow: ScalarField,
    /// `p sigma0 |grad u0|^(p-2) grad u0`, the weight of `grad v` in `dF`.
    flux_weight: VectorField,
    p: Exponent,
    grad_floor: f64,
    system: DirichletSystem,
}

impl LinearizationBundle {
    pub fn new(sigma0: Conductivity, f: &ScalarField, p: Exponent) -> Result<Self> {
        Self::with_options(sigma0, f, p, DEFAULT_GRAD_FLOOR, SolverOptions::default())
    }

    pub fn with_options(
        sigma0: Conductivity,
        f: &ScalarField,
        p: Exponent,
        grad_floor: f64,
        solver: SolverOptions,
    ) -> Result<Self> {
        sigma0.grid().check_same(&f.grid())?;
        let system = assemble_with(&sigma0, solver);
        let u0 = solve_potential_with(&system, f)?;
        Self::from_potential(sigma0, f, u0, p, grad_floor, system)
    }

    /// Builds a bundle around a prescribed potential instead of solving for
    /// it. Useful when `u0` is known in closed form.
    pub fn from_parts(
        sigma0: Conductivity,
        u0: ScalarField,
        p: Exponent,
        grad_floor: f64,
        solver: SolverOptions,
    ) -> Result<Self> {
        sigma0.grid().check_same(&u0.grid())?;
        let system = assemble_with(&sigma0, solver);
        let f = u0.clone();
        Self::from_potential(sigma0, &f, u0, p, grad_floor, system)
    }

    fn from_potential(
        sigma0: Conductivity,
        f: &ScalarField,
        u0: ScalarField,
        p: Exponent,
        grad_floor: f64,
        system: DirichletSystem,
    ) -> Result<Self> {
        let grad_u0 = gradient(&u0);
        let speed = checked_speed(&grad_u0, grad_floor)?;
        let pv = p.value();
        let speed_pow = speed.map(|s| s.powf(pv));
        let scale = sigma0.field().zip_map(&speed, |s, g| pv * s * g.powf(pv - 2.0))?;
        let flux_weight = grad_u0.scale_by(&scale)?;
        Ok(Self { sigma0, boundary: f.clone(), u0, grad_u0, speed, speed_pow, flux_weight, p, grad_floor, system })
    }

    pub fn sigma0(&self) -> &Conductivity {
        &self.sigma0
    }

    pub fn boundary(&self) -> &ScalarField {
        &self.boundary
    }

    pub fn u0(&self) -> &ScalarField {
        &self.u0
    }

    pub fn grad_u0(&self) -> &VectorField {
        &self.grad_u0
    }

    /// `|grad u0|`.
    pub fn speed(&self) -> &ScalarField {
        &self.speed
    }

    /// `|grad u0|^p`.
    pub fn speed_pow(&self) -> &ScalarField {
        &self.speed_pow
    }

    pub fn flux_weight(&self) -> &VectorField {
        &self.flux_weight
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn grad_floor(&self) -> f64 {
        self.grad_floor
    }

    pub fn system(&self) -> &DirichletSystem {
        &self.system
    }

    /// `F(sigma0)`.
    pub fn value(&self) -> ScalarField {
        self.sigma0.field().mul(&self.speed_pow).expect("same grid")
    }

    pub fn model(&self) -> ForwardModel {
        ForwardModel {
            boundary: self.boundary.clone(),
            p: self.p,
            grad_floor: self.grad_floor,
            solver: self.system.options(),
        }
    }
}

/// `v` with `div(sigma0 grad v) = -div(h grad u0)`, `v = 0` on the ring.
pub fn solve_v(bundle: &LinearizationBundle, h: &ScalarField) -> Result<ScalarField> {
    let src = flux_apply(h, &bundle.u0)?;
    bundle.system.solve_zero_bc(&negated(src))
}

/// `w` with `div(sigma0 grad w) = -2 div(h grad v)`, `w = 0` on the ring.
pub fn solve_w(bundle: &LinearizationBundle, h: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    let src = flux_apply(h, v)?;
    bundle.system.solve_zero_bc(&src.into_iter().map(|s| -2.0 * s).collect::<Vec<_>>())
}

fn negated(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = -*x);
    v
}

/// `dF(h) = h |grad u0|^p + p sigma0 |grad u0|^(p-2) grad u0 . grad v`.
pub fn differential(bundle: &LinearizationBundle, h: &ScalarField) -> Result<ScalarField> {
    let v = solve_v(bundle, h)?;
    differential_from_v(bundle, h, &v)
}

pub(crate) fn differential_from_v(
    bundle: &LinearizationBundle,
    h: &ScalarField,
    v: &ScalarField,
) -> Result<ScalarField> {
    let coupling = bundle.flux_weight.dot(&gradient(v))?;
    h.mul(&bundle.speed_pow)?.add(&coupling)
}

/// `d^2F(h, h)` at the bundle's base point.
///
/// With `g = grad u`, `g' = grad v`, `g'' = grad w` the second derivative of
/// `sigma |g|^p` along `sigma + t h` is
/// `2 h p|g|^(p-2) g.g' + sigma [p(p-2)|g|^(p-4) (g.g')^2 + p|g|^(p-2) (g'.g' + g.g'')]`.
pub fn second_differential(bundle: &LinearizationBundle, h: &ScalarField) -> Result<ScalarField> {
    let v = solve_v(bundle, h)?;
    let w = solve_w(bundle, h, &v)?;
    let gv = gradient(&v);
    let gw = gradient(&w);
    let g = &bundle.grad_u0;
    let p = bundle.p.value();
    let grid = h.grid();
    let sigma = bundle.sigma0.field();
    let values = (0..grid.node_count())
        .map(|k| {
            let (gx, gy) = (g.x()[k], g.y()[k]);
            let (vx, vy) = (gv.x()[k], gv.y()[k]);
            let (wx, wy) = (gw.x()[k], gw.y()[k]);
            let s = bundle.speed.values()[k];
            let gdv = gx * vx + gy * vy;
            let first = p * s.powf(p - 2.0) * gdv;
            let second = p * (p - 2.0) * s.powf(p - 4.0) * gdv * gdv
                + p * s.powf(p - 2.0) * (vx * vx + vy * vy + gx * wx + gy * wy);
            2.0 * h.values()[k] * first + sigma.values()[k] * second
        })
        .collect();
    ScalarField::new(grid, values)
}

/// `R = F(sigma) - F(sigma0) - dF(sigma - sigma0)` and
/// `|R| / c2_norm(sigma - sigma0)^2` (zero when the perturbation vanishes).
pub fn taylor_remainder(bundle: &LinearizationBundle, sigma: &Conductivity) -> Result<(ScalarField, f64)> {
    let h = sigma.field().sub(bundle.sigma0.field())?;
    let f_sigma = forward_map_with(sigma, &bundle.boundary, bundle.p, bundle.grad_floor, bundle.system.options())?;
    let r = f_sigma.sub(&bundle.value())?.sub(&differential(bundle, &h)?)?;
    let size = c2_norm(&h);
    let ratio = if size == 0.0 { 0.0 } else { l2_norm(&r) / (size * size) };
    Ok((r, ratio))
}
