//! Flat `key = value` experiment configuration with `#` comments.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use hip_core::elliptic::SolverOptions;
use hip_core::forward::{Exponent, DEFAULT_GRAD_FLOOR};
use hip_core::inversion::InversionOptions;
use hip_core::presets::{BoundaryPreset, SigmaPreset};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: Exponent,
    /// Reference conductivity: the forward model input and the truth of
    /// reconstructions.
    pub sigma: SigmaPreset,
    /// Start of reconstructions; `None` means 1 inside with the trace of `sigma`.
    pub init: Option<SigmaPreset>,
    pub boundary: BoundaryPreset,
    pub solver: SolverOptions,
    pub grad_floor: f64,
    pub inversion: InversionOptions,
    pub noise_level: f64,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub modes: usize,
    pub eps: Vec<f64>,
    pub theta: f64,
    pub alpha1: Option<f64>,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 32,
            p: Exponent::new(1.0).expect("valid exponent"),
            sigma: SigmaPreset::standard_bump(),
            init: None,
            boundary: BoundaryPreset::LinearX,
            solver: SolverOptions::default(),
            grad_floor: DEFAULT_GRAD_FLOOR,
            inversion: InversionOptions::default(),
            noise_level: 0.0,
            noise_levels: vec![1e-4, 1e-3, 1e-2],
            seed: 0,
            samples: 20,
            modes: 8,
            eps: vec![1e-1, 3e-2, 1e-2],
            theta: 0.5,
            alpha1: Some(0.5),
            workers: 1,
            out: PathBuf::from("hip-out"),
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("line {line}: {}", msg.into()))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(line, format!("invalid value {value:?} for {key}")))
}

fn list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| num(line, key, v.trim())).collect()
}

/// Splits `name(a, b, ...)` into the name and its arguments; a bare name has
/// no arguments.
fn call(value: &str) -> Option<(&str, Vec<&str>)> {
    match value.split_once('(') {
        None => Some((value, Vec::new())),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')')?;
            let args = if inner.trim().is_empty() { Vec::new() } else { inner.split(',').map(str::trim).collect() };
            Some((name.trim(), args))
        }
    }
}

fn sigma_preset(line: usize, value: &str, base: &Path) -> Result<SigmaPreset, CliError> {
    let (name, args) = call(value).ok_or_else(|| bad(line, format!("malformed preset {value:?}")))?;
    let nums = |count: usize| -> Result<Vec<f64>, CliError> {
        if args.len() != count {
            return Err(bad(line, format!("{name} takes {count} arguments, got {}", args.len())));
        }
        args.iter().map(|a| num(line, name, a)).collect()
    };
    match name {
        "constant" => {
            let c = nums(1)?[0];
            if !(c > 0.0) {
                return Err(bad(line, format!("constant conductivity must be positive, got {c}")));
            }
            Ok(SigmaPreset::Constant(c))
        }
        "bump" => {
            let a = nums(4)?;
            if !(a[3] > 0.0) || !(1.0 + a[0].min(0.0) > 0.0) {
                return Err(bad(line, "bump needs a positive width and an amplitude above -1"));
            }
            Ok(SigmaPreset::Bump { a: a[0], x0: a[1], y0: a[2], r: a[3] })
        }
        "expx" => {
            nums(0)?;
            Ok(SigmaPreset::ExpX)
        }
        "file" => {
            if args.len() != 1 {
                return Err(bad(line, "file takes one path"));
            }
            let path = base.join(args[0]);
            if !path.is_file() {
                return Err(bad(line, format!("no such file {}", path.display())));
            }
            Ok(SigmaPreset::File(path))
        }
        other => Err(bad(line, format!("unknown conductivity preset {other:?}"))),
    }
}

fn boundary_preset(line: usize, value: &str) -> Result<BoundaryPreset, CliError> {
    let (name, args) = call(value).ok_or_else(|| bad(line, format!("malformed preset {value:?}")))?;
    match (name, args.len()) {
        ("linear-x", 0) => Ok(BoundaryPreset::LinearX),
        ("affine", 2) => Ok(BoundaryPreset::Affine { a: num(line, name, args[0])?, b: num(line, name, args[1])? }),
        _ => Err(bad(line, format!("unknown boundary preset {value:?}"))),
    }
}

impl ExperimentConfig {
    /// Relative `file(...)` paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| bad(line, format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(bad(line, format!("duplicate key {key}")));
            }
            let inv = &mut cfg.inversion;
            match key {
                "grid.n" => cfg.n = num(line, key, value)?,
                "p" => {
                    let p: f64 = num(line, key, value)?;
                    cfg.p = Exponent::new(p).map_err(|e| bad(line, e.to_string()))?;
                }
                "sigma" => cfg.sigma = sigma_preset(line, value, base)?,
                "init" => cfg.init = if value == "trace" { None } else { Some(sigma_preset(line, value, base)?) },
                "boundary" => cfg.boundary = boundary_preset(line, value)?,
                "solver.rel_tol" => cfg.solver.rel_tol = num(line, key, value)?,
                "solver.iter_factor" => cfg.solver.iter_factor = num(line, key, value)?,
                "grad_floor" => cfg.grad_floor = num(line, key, value)?,
                "inversion.reg_lambda" => inv.reg_lambda = num(line, key, value)?,
                "inversion.max_outer_iters" => inv.max_outer_iters = num(line, key, value)?,
                "inversion.cg_tol" => inv.cg_tol = num(line, key, value)?,
                "inversion.cg_max_iter" => inv.cg_max_iter = num(line, key, value)?,
                "inversion.damping" => inv.damping = num(line, key, value)?,
                "inversion.sigma_projection_min" => inv.sigma_projection_min = num(line, key, value)?,
                "inversion.c2_radius" => inv.c2_radius = num(line, key, value)?,
                "inversion.stall_tol" => inv.stall_tol = num(line, key, value)?,
                "noise.level" => cfg.noise_level = num(line, key, value)?,
                "noise.levels" => cfg.noise_levels = list(line, key, value)?,
                "seed" => cfg.seed = num(line, key, value)?,
                "sweep.samples" => cfg.samples = num(line, key, value)?,
                "sweep.modes" => cfg.modes = num(line, key, value)?,
                "sweep.eps" => cfg.eps = list(line, key, value)?,
                "plan.theta" => cfg.theta = num(line, key, value)?,
                "plan.alpha1" => cfg.alpha1 = if value == "auto" { None } else { Some(num(line, key, value)?) },
                "workers" => cfg.workers = num(line, key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                _ => return Err(bad(line, format!("unknown key {key}"))),
            }
        }
        cfg.inversion.noise_seed = cfg.seed;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn check(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.n < hip_core::mesh::MIN_CELLS {
            return fail("grid.n must be at least 8");
        }
        if !(self.solver.rel_tol > 0.0) || self.solver.iter_factor == 0 {
            return fail("solver tolerances must be positive");
        }
        if !(self.grad_floor >= 0.0) {
            return fail("grad_floor must be nonnegative");
        }
        self.inversion.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.noise_level >= 0.0) || self.noise_levels.iter().any(|l| !(*l > 0.0)) {
            return fail("noise levels must be nonnegative (positive in noise.levels)");
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return fail("sweep.eps entries must be positive");
        }
        if self.samples == 0 || self.modes == 0 || self.modes >= self.n {
            return fail("sweep.samples must be positive and sweep.modes in 1..grid.n");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail("plan.theta must lie in (0, 1)");
        }
        if self.workers == 0 {
            return fail("workers must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_and_comments() {
        let cfg =
            parse("# header\n\ngrid.n = 16  # small\np=0.5\nsigma = constant(2)\nboundary = affine(1, 0.5)\n").unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.p.value(), 0.5);
        assert_eq!(cfg.sigma, SigmaPreset::Constant(2.0));
        assert_eq!(cfg.boundary, BoundaryPreset::Affine { a: 1.0, b: 0.5 });
        assert_eq!(cfg.noise_levels, vec![1e-4, 1e-3, 1e-2]);
    }

    #[test]
    fn presets() {
        let cfg = parse("sigma = bump(0.2, 0.5, 0.5, 0.05)\ninit = expx\nnoise.levels = 1e-3, 1e-2\n").unwrap();
        assert_eq!(cfg.sigma, SigmaPreset::standard_bump());
        assert_eq!(cfg.init, Some(SigmaPreset::ExpX));
        assert_eq!(cfg.noise_levels, vec![1e-3, 1e-2]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "p = 1.5",
            "p = 0",
            "grid.n = 4",
            "colour = red",
            "p = 1\np = 1",
            "sigma = constant(-1)",
            "sigma = file(does/not/exist)",
            "boundary = quadratic",
            "no equals sign",
            "inversion.damping = 2",
        ] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
