//! Exponent bookkeeping for the Hölder stability argument, and empirical
//! sweeps of the interpolation-type estimate for the linearization
//! `|h| <= C |dF h|_{H1}^{a1} |h|_{H^{s1}}^{1-a1}`.

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HipError, Result};
use crate::forward::{differential, Exponent, LinearizationBundle};
use crate::inversion::SweepRecord;
use crate::mesh::{h1_norm, l2_norm, sobolev_norm, Grid, ScalarField};
use crate::par;
use crate::spectral::synthesize;

/// Candidate exponents tried, largest first, when shrinking toward an
/// admissible plan.
const SEARCH_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentPlan {
    /// Space dimension.
    pub n: usize,
    pub p: f64,
    /// Order of the Taylor remainder.
    pub alpha: f64,
    pub alpha1: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu: f64,
    pub beta: f64,
    pub theta: f64,
    pub s: f64,
    pub s1: f64,
    /// Only set when `mu2 < 1` was requested together with a data-side order.
    pub s2: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub n: usize,
    pub alpha: f64,
    /// Fixes the interpolation exponent instead of searching for it.
    pub alpha1: Option<f64>,
    pub mu2: f64,
    pub s2: Option<f64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { n: 2, alpha: 2.0, alpha1: None, mu2: 1.0, s2: None }
    }
}

/// `beta = mu / (1 - mu3 (1 - mu))`.
pub fn beta_of(mu: f64, mu3: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(HipError::InvalidArgument(format!("mu must lie in (0, 1), got {mu}")));
    }
    if !(0.0..=1.0).contains(&mu3) {
        return Err(HipError::InvalidArgument(format!("mu3 must lie in [0, 1], got {mu3}")));
    }
    let denom = 1.0 - mu3 * (1.0 - mu);
    if !(denom > 0.0) {
        return Err(HipError::InvalidArgument(format!("beta denominator {denom} is not positive")));
    }
    Ok(mu / denom)
}

/// Smallest admissible `mu3`, `max{0, (1 - alpha mu) / (1 - mu)}`.
pub fn mu3_lower_bound(alpha: f64, mu: f64) -> f64 {
    ((1.0 - alpha * mu) / (1.0 - mu)).max(0.0)
}

pub fn plan_exponents(theta: f64, p: Exponent, n: usize) -> Result<ExponentPlan> {
    plan_exponents_with(theta, p, PlanOptions { n, ..PlanOptions::default() })
}

/// Follows the recipe of the nonlinear stability proof: `beta` halfway between
/// `max{theta, 1/2}` and 1, then the largest interpolation exponent on a
/// 0.05-grid with `mu < min{1/2, beta}`, then `mu3`, `s1` and `s`.
///
/// For `p = 1` the interpolation exponent is `alpha1 = mu1`; for `p < 1` the
/// linearization is stable outright, so `alpha1 = 1`, an `alpha1` override is
/// ignored (with a warning) and the search applies to `mu1` alone.
pub fn plan_exponents_with(theta: f64, p: Exponent, opts: PlanOptions) -> Result<ExponentPlan> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(HipError::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    if opts.n == 0 {
        return Err(HipError::InvalidArgument("dimension must be positive".into()));
    }
    if !(opts.mu2 > 0.0 && opts.mu2 <= 1.0) {
        return Err(HipError::InvalidArgument(format!("mu2 must lie in (0, 1], got {}", opts.mu2)));
    }
    let degenerate = p.value() == 1.0;
    let beta = (1.0 + theta.max(0.5)) / 2.0;
    let bound = beta.min(0.5);
    let product = |c: f64| if degenerate { c * c * opts.mu2 } else { c * opts.mu2 };

    let mut warnings = Vec::new();
    let requested = match opts.alpha1 {
        Some(c) if !degenerate => {
            warnings.push(format!("alpha1 = {c} ignored: for p < 1 the linearization is stable with alpha1 = 1"));
            None
        }
        other => other,
    };
    let c = match requested {
        Some(c) => {
            if !(c > 0.0 && c < 1.0) {
                return Err(HipError::InvalidArgument(format!("interpolation exponent must lie in (0, 1), got {c}")));
            }
            if !(product(c) < bound) {
                return Err(HipError::NoAdmissiblePlan(format!(
                    "mu = {} is not below min(1/2, beta) = {bound}",
                    product(c)
                )));
            }
            c
        }
        None => {
            let steps = (1.0 / SEARCH_STEP).round() as usize;
            (1..steps).rev().map(|k| k as f64 * SEARCH_STEP).find(|&c| product(c) < bound).ok_or_else(|| {
                HipError::NoAdmissiblePlan(format!("no exponent on the search grid for theta = {theta}"))
            })?
        }
    };
    let (alpha1, mu1) = if degenerate { (c, c) } else { (1.0, c) };
    let mu = alpha1 * mu1 * opts.mu2;
    let mu3 = (beta - mu) / (beta * (1.0 - mu));
    let s1 = (opts.n as f64 + 4.0) / (2.0 * (1.0 - mu1));
    let s = s1 / (1.0 - mu3);

    let interp_rhs = opts.n as f64 / 2.0 + 2.0;
    if ((1.0 - mu1) * s1 - interp_rhs).abs() <= 1e-12 * interp_rhs {
        warnings.push(format!("(1-mu1)*s1 = {interp_rhs} holds with equality, not strictly"));
    }
    let s2 = match (opts.mu2 < 1.0, opts.s2) {
        (true, Some(s2)) => Some(s2),
        (true, None) => {
            warnings.push("mu2 < 1 without a data-side order s2; its constraint is not evaluated".into());
            None
        }
        (false, _) => None,
    };
    Ok(ExponentPlan {
        n: opts.n,
        p: p.value(),
        alpha: opts.alpha,
        alpha1,
        mu1,
        mu2: opts.mu2,
        mu3,
        mu,
        beta,
        theta,
        s,
        s1,
        s2,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Satisfied,
    /// A strict inequality that holds only with equality.
    EqualityFlag,
    NotApplicable,
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConstraintCheck {
    fn new(name: &'static str, ok: bool, lhs: f64, rhs: f64) -> Self {
        let status = if ok { CheckStatus::Satisfied } else { CheckStatus::Violated };
        Self { name, status, lhs, rhs }
    }
}

/// True when no check is violated.
pub fn plan_holds(checks: &[ConstraintCheck]) -> bool {
    checks.iter().all(|c| c.status != CheckStatus::Violated)
}

/// Evaluates every constraint on the exponents; never fails.
pub fn validate_plan(plan: &ExponentPlan) -> Vec<ConstraintCheck> {
    let mut out = Vec::new();
    let mu = plan.mu;
    out.push(ConstraintCheck::new("mu_in_unit_interval", mu > 0.0 && mu < 1.0, mu, 1.0));
    out.push(ConstraintCheck::new(
        "mu_product",
        (mu - plan.alpha1 * plan.mu1 * plan.mu2).abs() <= 1e-12,
        mu,
        plan.alpha1 * plan.mu1 * plan.mu2,
    ));
    let lower = mu3_lower_bound(plan.alpha, mu);
    out.push(ConstraintCheck::new("mu3_lower_bound", plan.mu3 >= lower, plan.mu3, lower));
    out.push(ConstraintCheck::new("mu3_at_most_one", plan.mu3 <= 1.0, plan.mu3, 1.0));
    let beta = beta_of(mu, plan.mu3).unwrap_or(f64::NAN);
    out.push(ConstraintCheck::new("beta_formula", (plan.beta - beta).abs() <= 1e-12, plan.beta, beta));
    let bound = plan.beta.min(0.5);
    out.push(ConstraintCheck::new("mu_below_half_and_beta", mu < bound, mu, bound));
    let floor = plan.theta.max(0.5);
    out.push(ConstraintCheck::new("beta_above_theta", plan.beta > floor && plan.beta < 1.0, plan.beta, floor));

    let lhs = (1.0 - plan.alpha1) * plan.s1;
    if plan.alpha1 == 1.0 {
        out.push(ConstraintCheck { name: "alpha1_interpolation", status: CheckStatus::NotApplicable, lhs, rhs: 2.0 });
    } else {
        out.push(ConstraintCheck::new("alpha1_interpolation", lhs >= 2.0, lhs, 2.0));
    }
    let lhs = (1.0 - plan.mu1) * plan.s1;
    let rhs = plan.n as f64 / 2.0 + 2.0;
    let status = if (lhs - rhs).abs() <= 1e-12 * rhs {
        CheckStatus::EqualityFlag
    } else if lhs > rhs {
        CheckStatus::Satisfied
    } else {
        CheckStatus::Violated
    };
    out.push(ConstraintCheck { name: "mu1_interpolation", status, lhs, rhs });
    let lhs = (1.0 - plan.mu3) * plan.s;
    out.push(ConstraintCheck::new("s_consistency", (lhs - plan.s1).abs() <= 1e-9 * plan.s1, lhs, plan.s1));
    match plan.s2 {
        Some(s2) => {
            let lhs = (1.0 - plan.mu2) * s2;
            out.push(ConstraintCheck::new("mu2_interpolation", (lhs - 1.0).abs() <= 1e-12, lhs, 1.0));
        }
        None => out.push(ConstraintCheck {
            name: "mu2_interpolation",
            status: CheckStatus::NotApplicable,
            lhs: plan.mu2,
            rhs: 1.0,
        }),
    }
    out
}

impl fmt::Display for ExponentPlan {
    /// Flat `key=value` lines; floats use the shortest round-tripping form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        for (k, v) in [
            ("p", self.p),
            ("alpha", self.alpha),
            ("alpha1", self.alpha1),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("mu", self.mu),
            ("beta", self.beta),
            ("theta", self.theta),
            ("s", self.s),
            ("s1", self.s1),
        ] {
            writeln!(f, "{k}={v}")?;
        }
        if let Some(s2) = self.s2 {
            writeln!(f, "s2={s2}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning={w}")?;
        }
        Ok(())
    }
}

impl ExponentPlan {
    pub fn to_key_values(&self) -> String {
        self.to_string()
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut plan = ExponentPlan {
            n: 0,
            p: f64::NAN,
            alpha: f64::NAN,
            alpha1: f64::NAN,
            mu1: f64::NAN,
            mu2: f64::NAN,
            mu3: f64::NAN,
            mu: f64::NAN,
            beta: f64::NAN,
            theta: f64::NAN,
            s: f64::NAN,
            s1: f64::NAN,
            s2: None,
            warnings: Vec::new(),
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) =
                line.split_once('=').ok_or_else(|| HipError::Format(format!("expected key=value, got {line:?}")))?;
            let num = || value.parse::<f64>().map_err(|_| HipError::Format(format!("bad number for {key}: {value:?}")));
            match key {
                "n" => plan.n = value.parse().map_err(|_| HipError::Format(format!("bad dimension {value:?}")))?,
                "p" => plan.p = num()?,
                "alpha" => plan.alpha = num()?,
                "alpha1" => plan.alpha1 = num()?,
                "mu1" => plan.mu1 = num()?,
                "mu2" => plan.mu2 = num()?,
                "mu3" => plan.mu3 = num()?,
                "mu" => plan.mu = num()?,
                "beta" => plan.beta = num()?,
                "theta" => plan.theta = num()?,
                "s" => plan.s = num()?,
                "s1" => plan.s1 = num()?,
                "s2" => plan.s2 = Some(num()?),
                "warning" => plan.warnings.push(value.to_string()),
                _ => return Err(HipError::Format(format!("unknown plan key {key:?}"))),
            }
        }
        let fields = [
            plan.p,
            plan.alpha,
            plan.alpha1,
            plan.mu1,
            plan.mu2,
            plan.mu3,
            plan.mu,
            plan.beta,
            plan.theta,
            plan.s,
            plan.s1,
        ];
        if plan.n == 0 || fields.iter().any(|v| !v.is_finite()) {
            return Err(HipError::Format("plan is missing keys".into()));
        }
        Ok(plan)
    }
}

/// Renders the checks as an aligned table, one constraint per line.
pub fn format_checks(checks: &[ConstraintCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        let status = match c.status {
            CheckStatus::Satisfied => "ok",
            CheckStatus::EqualityFlag => "equality",
            CheckStatus::NotApplicable => "n/a",
            CheckStatus::Violated => "VIOLATED",
        };
        let _ = writeln!(out, "{:<24} {:<9} lhs={} rhs={}", c.name, status, c.lhs, c.rhs);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub samples: usize,
    pub seed: u64,
    /// Band limit: modes `1..=modes` in each direction.
    pub modes: usize,
    pub alpha1: f64,
    pub s1: f64,
    /// Overall amplitude of each draw; the ratio does not depend on it.
    pub scale: f64,
}

impl SweepOptions {
    pub fn from_plan(plan: &ExponentPlan, samples: usize, seed: u64, modes: usize) -> Self {
        Self { samples, seed, modes, alpha1: plan.alpha1, s1: plan.s1, scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct StabilitySweep {
    pub records: Vec<SweepRecord>,
    /// Largest ratio over the samples.
    pub c_star: f64,
}

/// Random smooth zero-boundary field: sine series over `modes x modes` with
/// coefficients `N(0,1) / (1 + k^2 + l^2)`.
pub fn band_limited_field(grid: Grid, modes: usize, seed: u64) -> Result<ScalarField> {
    let m = grid.interior_side();
    if modes == 0 || modes > m {
        return Err(HipError::InvalidArgument(format!("band limit must lie in 1..={m}, got {modes}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0; m * m];
    for l in 1..=modes {
        for k in 1..=modes {
            let z: f64 = StandardNormal.sample(&mut rng);
            coeffs[(l - 1) * m + (k - 1)] = z / (1.0 + (k * k + l * l) as f64);
        }
    }
    Ok(synthesize(grid, &coeffs))
}

/// The measured quantities of one perturbation; `extra` holds the ratio
/// `|h| / (|dF h|_{H1}^{a1} |h|_{H^{s1}}^{1-a1})`.
pub fn stability_record(
    bundle: &LinearizationBundle,
    h: &ScalarField,
    alpha1: f64,
    s1: f64,
    label: impl Into<String>,
) -> Result<SweepRecord> {
    let df = differential(bundle, h)?;
    let mut rec = SweepRecord::new(label);
    rec.l2_h = l2_norm(h);
    rec.h1_df = h1_norm(&df);
    rec.hs1_h = sobolev_norm(h, s1)?;
    rec.extra = rec.l2_h / (rec.h1_df.powf(alpha1) * rec.hs1_h.powf(1.0 - alpha1));
    Ok(rec)
}

/// Samples `k` draw with seed `seed + k`; samples run concurrently and the
/// records come back in sample order.
pub fn linear_stability_sweep(bundle: &LinearizationBundle, opts: &SweepOptions) -> Result<StabilitySweep> {
    if opts.samples < 10 {
        return Err(HipError::InvalidArgument(format!("need at least 10 samples, got {}", opts.samples)));
    }
    if !(opts.alpha1 > 0.0 && opts.alpha1 <= 1.0) || !(opts.s1 >= 0.0) || !(opts.scale > 0.0) {
        return Err(HipError::InvalidArgument("sweep exponents or scale out of range".into()));
    }
    let grid = bundle.sigma0().grid();
    let records = par::map_tasks(opts.samples, |k| {
        let h = band_limited_field(grid, opts.modes, opts.seed.wrapping_add(k as u64))?.scale(opts.scale);
        let mut rec = stability_record(bundle, &h, opts.alpha1, opts.s1, format!("sample{k}"))?;
        rec.eps = opts.scale;
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let c_star = records.iter().map(|r| r.extra).fold(0.0, f64::max);
    Ok(StabilitySweep { records, c_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::Conductivity;
    use crate::presets::BoundaryPreset;

    fn example_plan() -> ExponentPlan {
        let opts = PlanOptions { alpha1: Some(0.5), ..PlanOptions::default() };
        plan_exponents_with(0.5, Exponent::new(1.0).unwrap(), opts).unwrap()
    }

    #[test]
    fn beta_examples() {
        for mu in [0.1, 0.5, 0.9] {
            assert!((beta_of(mu, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(beta_of(mu, 0.0).unwrap(), mu);
        }
        assert!((beta_of(0.25, 8.0 / 9.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(beta_of(1.0, 0.5).is_err());
        assert!(beta_of(0.5, 1.5).is_err());
    }

    #[test]
    fn worked_plan() {
        let plan = example_plan();
        assert!((plan.mu - 0.25).abs() < 1e-15);
        assert!((plan.beta - 0.75).abs() < 1e-15);
        assert!((plan.mu3 - 8.0 / 9.0).abs() < 1e-12);
        assert!((plan.s1 - 6.0).abs() < 1e-12);
        assert!((plan.s - 54.0).abs() < 1e-9);
        let checks = validate_plan(&plan);
        assert!(plan_holds(&checks));
        let flags: Vec<_> = checks.iter().filter(|c| c.status == CheckStatus::EqualityFlag).collect();
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].name, "mu1_interpolation");
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn mu3_bound_example() {
        let lower = mu3_lower_bound(2.0, 0.3);
        assert!((lower - 0.4 / 0.7).abs() < 1e-15);
        assert!(lower <= 1.0);
    }

    #[test]
    fn corrupted_beta_is_detected() {
        let mut plan = example_plan();
        plan.beta += 0.1;
        let checks = validate_plan(&plan);
        let c = checks.iter().find(|c| c.name == "beta_formula").unwrap();
        assert_eq!(c.status, CheckStatus::Violated);
        assert!(!plan_holds(&checks));
    }

    #[test]
    fn elliptic_case_has_unit_alpha1() {
        let plan = plan_exponents(0.5, Exponent::new(0.5).unwrap(), 2).unwrap();
        assert_eq!(plan.alpha1, 1.0);
        assert!(plan_holds(&validate_plan(&plan)));
        let opts = PlanOptions { alpha1: Some(0.5), ..PlanOptions::default() };
        let forced = plan_exponents_with(0.5, Exponent::new(0.5).unwrap(), opts).unwrap();
        assert_eq!((forced.alpha1, forced.mu1), (plan.alpha1, plan.mu1));
        assert_eq!(forced.warnings.len(), plan.warnings.len() + 1);
    }

    #[test]
    fn searched_plans_always_validate() {
        for p in [0.25, 0.5, 1.0] {
            for theta in [1e-6, 0.1, 0.5, 0.9, 0.99] {
                let plan = plan_exponents(theta, Exponent::new(p).unwrap(), 2).unwrap();
                let checks = validate_plan(&plan);
                assert!(plan_holds(&checks), "{plan:?}\n{}", format_checks(&checks));
                assert!(plan.mu < plan.beta.min(0.5));
            }
        }
        let small = plan_exponents(1e-9, Exponent::new(1.0).unwrap(), 2).unwrap();
        assert_eq!(small.beta, 0.75);
    }

    #[test]
    fn inadmissible_override_is_rejected() {
        let opts = PlanOptions { alpha1: Some(0.9), ..PlanOptions::default() };
        let err = plan_exponents_with(0.5, Exponent::new(1.0).unwrap(), opts).unwrap_err();
        assert!(matches!(err, HipError::NoAdmissiblePlan(_)));
        assert!(plan_exponents(1.0, Exponent::new(1.0).unwrap(), 2).is_err());
    }

    #[test]
    fn key_value_round_trip() {
        let plan = example_plan();
        let text = plan.to_key_values();
        assert!(text.contains("beta=0.75\n"));
        assert_eq!(ExponentPlan::from_key_values(&text).unwrap(), plan);
        assert!(ExponentPlan::from_key_values("n=2\nbogus=1\n").is_err());
    }

    #[test]
    fn band_limited_field_is_deterministic_and_zero_on_boundary() {
        let g = Grid::new(16).unwrap();
        let a = band_limited_field(g, 4, 9).unwrap();
        let b = band_limited_field(g, 4, 9).unwrap();
        assert_eq!(a, b);
        a.check_zero_boundary().unwrap();
        assert!(l2_norm(&a) > 0.0);
        assert!(band_limited_field(g, 16, 9).is_err());
    }

    #[test]
    fn small_sweep_is_homogeneous() {
        let g = Grid::new(16).unwrap();
        let bundle = LinearizationBundle::new(
            Conductivity::constant(g, 1.0).unwrap(),
            &BoundaryPreset::LinearX.field(g),
            Exponent::new(1.0).unwrap(),
        )
        .unwrap();
        let plan = example_plan();
        let base = SweepOptions::from_plan(&plan, 10, 3, 4);
        let one = linear_stability_sweep(&bundle, &base).unwrap();
        let two = linear_stability_sweep(&bundle, &SweepOptions { scale: 2.0, ..base }).unwrap();
        assert_eq!(one.records.len(), 10);
        assert!(one.c_star.is_finite() && one.c_star > 0.0);
        for (a, b) in one.records.iter().zip(&two.records) {
            assert!((a.extra - b.extra).abs() <= 1e-10 * a.extra);
        }
        assert!(linear_stability_sweep(&bundle, &SweepOptions { samples: 5, ..base }).is_err());
    }
}
