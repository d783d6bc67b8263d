use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use qdoe::adaptive::{derive_seed, grid_sweep, mse_ratio, AdaptiveConfig, GridSpec, SweepRow};
use qdoe::design::{
    binary_a_optimal, binary_d_optimal, binary_grid_search, optimize_frequencies, BinaryDesignSummary,
    BinaryOptimum, OptimalDesignResult, OptimalityCriterion, OptimizeOptions,
};
use qdoe::fisher::{classical_fisher, sld_qfi, Design, FisherMatrix};
use qdoe::linalg;
use qdoe::models::{self, AsymmetryPoint};
use qdoe::quantum::{Asymmetry, FamilyKind, ParamPoint};

use crate::config::{FileConfig, StepSpec};
use crate::output::{with_suffix, write_csv, write_json};
use crate::{BinaryArgs, Cli, Command, CriterionArgs, FisherArgs, Format, ModelArgs, OptimalArgs, SweepArgs};

/// Grid nodes used by `binary-design --verify`.
const VERIFY_POINTS: usize = 100_001;

#[derive(Debug)]
pub enum CliError {
    Lib(qdoe::Error),
    Usage(String),
    Io(String),
    Config(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self::Io(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Lib(e) => e.tag(),
            Self::Usage(_) => "usage",
            Self::Io(_) => "io",
            Self::Config(_) => "config",
        }
    }

    /// 3 for numerical degeneracy, 2 for everything the caller can fix.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Lib(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lib(e) => write!(f, "{e}"),
            Self::Usage(m) | Self::Io(m) | Self::Config(m) => f.write_str(m),
        }
    }
}

impl From<qdoe::Error> for CliError {
    fn from(e: qdoe::Error) -> Self {
        Self::Lib(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Fisher(a) => fisher(a, out, json_only(cli.format)?),
        Command::OptimalDesign(a) => optimal_design(a, out, json_only(cli.format)?),
        Command::BinaryDesign(a) => binary_design(a, out, json_only(cli.format)?),
        Command::Sweep(a) => sweep(a, out, cli.format.unwrap_or(Format::Csv)),
    }
}

fn json_only(format: Option<Format>) -> Result<Format> {
    match format {
        Some(Format::Csv) => Err(CliError::usage("csv output is only available for `sweep`")),
        _ => Ok(Format::Json),
    }
}

/// Parse `"a,b;c,d"` into a square matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::usage(format!("bad matrix `{text}`: {e}")))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::usage(format!("matrix `{text}` is not square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

struct Model {
    kind: FamilyKind,
    theta: ParamPoint,
    axes: Vec<usize>,
}

fn model(args: &ModelArgs) -> Result<Model> {
    let named = args
        .family
        .as_deref()
        .map(|f| f.parse::<FamilyKind>())
        .transpose()?;
    let (kind, theta) = match (&args.eps, &args.theta) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --theta or --eps, not both")),
        (Some(e), None) => {
            if named.is_some_and(|k| k != FamilyKind::Asymmetry) {
                return Err(CliError::usage("--eps only applies to the asymmetry family"));
            }
            (FamilyKind::Asymmetry, e.clone())
        }
        (None, Some(t)) => (
            named.ok_or_else(|| CliError::usage("--family is required with --theta"))?,
            t.clone(),
        ),
        (None, None) => return Err(CliError::usage("channel parameters are required (--theta or --eps)")),
    };
    let theta = ParamPoint::new(theta)?;
    kind.family().validate(&theta)?;
    let axes = args.axes.clone().unwrap_or_else(|| vec![1, 2, 3]);
    if axes.is_empty() || axes.iter().any(|a| !(1..=3).contains(a)) {
        return Err(CliError::usage("design axes must be 1, 2 or 3"));
    }
    Ok(Model { kind, theta, axes })
}

fn designs(axes: &[usize]) -> Result<Vec<Design>> {
    Ok(axes.iter().map(|&a| Design::pauli(a)).collect::<qdoe::Result<_>>()?)
}

#[derive(Serialize)]
struct FisherReport {
    family: String,
    theta: ParamPoint,
    axes: Vec<usize>,
    weights: Vec<f64>,
    classical: FisherMatrix,
    quantum: Option<FisherMatrix>,
    /// Eigenvalues of `J_QFI − J_classical`; nonnegative up to rounding.
    gap_eigenvalues: Option<Vec<f64>>,
    quantum_error: Option<String>,
}

fn fisher(args: &FisherArgs, out: Option<&Path>, _format: Format) -> Result<()> {
    let m = model(&args.model)?;
    let family = m.kind.family();
    let ds = designs(&m.axes)?;
    let weights = match &args.weights {
        Some(w) if w.len() != ds.len() => {
            return Err(CliError::usage(format!("{} weights for {} designs", w.len(), ds.len())))
        }
        Some(w) => w.clone(),
        None => vec![1.0 / ds.len() as f64; ds.len()],
    };
    let mixed = qdoe::fisher::MixedDesign::new(weights.clone(), ds.clone())?;
    let classical = qdoe::fisher::mixed_fisher(family.as_ref(), &mixed, &m.theta)?;
    let quantum: qdoe::Result<FisherMatrix> = ds
        .iter()
        .map(|d| sld_qfi(family.as_ref(), &d.state, &m.theta))
        .collect::<qdoe::Result<Vec<_>>>()
        .and_then(|q| FisherMatrix::weighted_sum(&weights, &q));
    let (quantum, gap_eigenvalues, quantum_error) = match quantum {
        Ok(q) => {
            let gap = linalg::sym_eigen(&(q.entries() - classical.entries())).0;
            (Some(q), Some(gap.iter().copied().collect()), None)
        }
        Err(e) => {
            log::warn!("quantum Fisher information unavailable: {e}");
            (None, None, Some(format!("{}: {e}", e.tag())))
        }
    };
    write_json(
        out,
        &FisherReport {
            family: m.kind.to_string(),
            theta: m.theta,
            axes: m.axes,
            weights,
            classical,
            quantum,
            gap_eigenvalues,
            quantum_error,
        },
    )
}

fn criterion(args: &CriterionArgs, n: usize) -> Result<OptimalityCriterion> {
    let simple = |name: &str| -> Result<OptimalityCriterion> {
        let c = match name {
            "A" | "a" => match &args.weight {
                Some(w) => OptimalityCriterion::weighted_a(parse_matrix(w)?)?,
                None => OptimalityCriterion::a(),
            },
            "D" | "d" => OptimalityCriterion::D,
            "E" | "e" => OptimalityCriterion::E,
            "c" | "C" => {
                let c = args
                    .c_vector
                    .as_ref()
                    .ok_or_else(|| CliError::usage("the c-criterion needs --c-vector"))?;
                OptimalityCriterion::C(DVector::from_vec(c.clone()))
            }
            "gamma" => OptimalityCriterion::gamma(
                args.gamma.ok_or_else(|| CliError::usage("the gamma criterion needs --gamma"))?,
            )?,
            "lowner" => return Err(CliError::usage("the Löwner order has no scalar optimum")),
            other => return Err(qdoe::Error::UnknownName(other.to_string()).into()),
        };
        Ok(c)
    };
    let crit = if let Some(rest) = args.criterion.strip_prefix("compound:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [p, a, b] = parts[..] else {
            return Err(CliError::usage("compound criteria are written compound:P:X:Y"));
        };
        let p: f64 = p.parse().map_err(|_| CliError::usage(format!("bad compound weight `{p}`")))?;
        OptimalityCriterion::compound(p, simple(a)?, simple(b)?)?
    } else {
        simple(&args.criterion)?
    };
    // catches weight or c-vector size mismatches before optimizing
    qdoe::design::evaluate_detailed(&crit, &DMatrix::identity(n, n))?;
    Ok(crit)
}

#[derive(Serialize)]
struct ClosedForm {
    weights: Vec<f64>,
    max_deviation: f64,
}

#[derive(Serialize)]
struct OptimalReport {
    family: String,
    axes: Vec<usize>,
    #[serde(flatten)]
    result: OptimalDesignResult,
    /// `det J⁻¹` for the D-criterion.
    #[serde(skip_serializing_if = "Option::is_none")]
    det_inverse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<ClosedForm>,
}

fn closed_form_weights(kind: FamilyKind, theta: &ParamPoint, crit: &OptimalityCriterion) -> Result<Option<Vec<f64>>> {
    Ok(match (kind, crit) {
        (FamilyKind::Scaling, OptimalityCriterion::A(None)) => Some(models::scaling_optimal_nu(theta, 1.0)?),
        (FamilyKind::Scaling, OptimalityCriterion::Gamma(g)) => Some(models::scaling_optimal_nu(theta, *g)?),
        (FamilyKind::Pauli, OptimalityCriterion::A(None)) => Some(models::pauli_optimal_nu_a(theta)?.0),
        (FamilyKind::Pauli | FamilyKind::Scaling, OptimalityCriterion::D) if kind == FamilyKind::Pauli => {
            Some(vec![1.0 / 3.0; 3])
        }
        _ => None,
    })
}

fn optimal_design(args: &OptimalArgs, out: Option<&Path>, _format: Format) -> Result<()> {
    let m = model(&args.model)?;
    let family = m.kind.family();
    let crit = criterion(&args.criterion, family.n_params())?;
    let fims = designs(&m.axes)?
        .iter()
        .map(|d| classical_fisher(family.as_ref(), d, &m.theta))
        .collect::<qdoe::Result<Vec<_>>>()?;
    let opts = OptimizeOptions {
        seed: args.seed.unwrap_or(OptimizeOptions::default().seed),
        ..Default::default()
    };
    let result = optimize_frequencies(&crit, &fims, &opts)?.with_theta(m.theta.clone());
    let closed_form = if args.closed_form {
        let cf = if m.axes == [1, 2, 3] {
            closed_form_weights(m.kind, &m.theta, &crit)?
        } else {
            None
        };
        match cf {
            Some(w) => {
                let max_deviation = w
                    .iter()
                    .zip(&result.weights)
                    .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
                Some(ClosedForm { weights: w, max_deviation })
            }
            None => {
                log::warn!("no closed form known for {} with {crit} on axes {:?}", m.kind, m.axes);
                None
            }
        }
    } else {
        None
    };
    let det_inverse = matches!(crit, OptimalityCriterion::D).then(|| result.value.exp());
    write_json(
        out,
        &OptimalReport {
            family: m.kind.to_string(),
            axes: m.axes,
            result,
            det_inverse,
            closed_form,
        },
    )
}

#[derive(Serialize)]
struct AsymmetryExtras {
    eps: AsymmetryPoint,
    f1: f64,
    f2: f64,
    lambda_star: f64,
    f1_plus_f2_squared: f64,
}

#[derive(Serialize)]
struct Verification {
    grid_points: usize,
    grid_lambda: f64,
    grid_value: f64,
    lambda_error: f64,
    value_rel_error: f64,
    passed: bool,
}

#[derive(Serialize)]
struct BinaryReport {
    criterion: String,
    #[serde(flatten)]
    optimum: BinaryOptimum,
    weights: [f64; 2],
    summary: BinaryDesignSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymmetry: Option<AsymmetryExtras>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<Verification>,
}

fn binary_design(args: &BinaryArgs, out: Option<&Path>, _format: Format) -> Result<()> {
    let (j1, j2, default_w, extras) = match (&args.eps, &args.j1, &args.j2) {
        (Some(e), None, None) => {
            let [e1, e2] = e[..] else {
                return Err(CliError::usage("--eps takes two values"));
            };
            let eps = AsymmetryPoint::new(e1, e2)?;
            let theta = eps.param_point();
            let j1 = classical_fisher(&Asymmetry, &Design::pauli(1)?, &theta)?;
            let j2 = classical_fisher(&Asymmetry, &Design::pauli(2)?, &theta)?;
            let f = models::f_values(&eps);
            let extras = AsymmetryExtras {
                eps,
                f1: f.f1,
                f2: f.f2,
                lambda_star: models::asymm_lambda_star(&eps)?,
                f1_plus_f2_squared: (f.f1 + f.f2).powi(2),
            };
            (j1, j2, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), Some(extras))
        }
        (None, Some(a), Some(b)) => (
            FisherMatrix::classical(parse_matrix(a)?)?,
            FisherMatrix::classical(parse_matrix(b)?)?,
            DMatrix::identity(2, 2),
            None,
        ),
        _ => return Err(CliError::usage("give either --eps or both --j1 and --j2")),
    };
    let summary = BinaryDesignSummary::new(j1, j2)?;
    let w = match &args.weight {
        Some(t) => parse_matrix(t)?,
        None => default_w,
    };
    let (optimum, oracle_w) = match args.criterion.as_str() {
        "A" | "a" => (binary_a_optimal(&summary, &w)?, Some(&w)),
        "D" | "d" => (binary_d_optimal(&summary), None),
        other => return Err(CliError::usage(format!("binary designs support A or D, not `{other}`"))),
    };
    if !optimum.value.is_finite() {
        return Err(qdoe::Error::DegenerateModel(
            "every mixture of the two designs leaves the weighted parameters unidentifiable".into(),
        )
        .into());
    }
    let verify = args.verify.then(|| {
        let g = binary_grid_search(&summary, oracle_w, VERIFY_POINTS);
        let lambda_error = (g.lambda - optimum.lambda).abs();
        let value_rel_error = if g.value == optimum.value {
            0.0
        } else {
            (g.value - optimum.value).abs() / g.value.abs().max(f64::MIN_POSITIVE)
        };
        Verification {
            grid_points: VERIFY_POINTS,
            grid_lambda: g.lambda,
            grid_value: g.value,
            lambda_error,
            value_rel_error,
            passed: lambda_error <= 1e-4 && value_rel_error <= 1e-6,
        }
    });
    let failed = verify.as_ref().is_some_and(|v| !v.passed);
    write_json(
        out,
        &BinaryReport {
            criterion: args.criterion.to_uppercase(),
            weights: optimum.weights(),
            optimum,
            summary,
            asymmetry: extras,
            verify,
        },
    )?;
    if failed {
        return Err(qdoe::Error::DegenerateModel("analytic optimum disagrees with the grid search".into()).into());
    }
    Ok(())
}

struct SweepSettings {
    config: AdaptiveConfig,
    replicas: usize,
    seed: u64,
    grid: GridSpec,
}

const DEFAULT_REPLICAS: usize = 2000;
const DEFAULT_GRID_STEP: f64 = 0.05;
const DEFAULT_SEED: u64 = 20_190_101;

fn sweep_settings(args: &SweepArgs) -> Result<SweepSettings> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let defaults = AdaptiveConfig::default();
    let mut config = AdaptiveConfig {
        n_total: args.n_total.or(file.n_total).unwrap_or(defaults.n_total),
        k_steps: args.k_steps.or(file.k_steps).unwrap_or(defaults.k_steps),
        runway: args.runway.or(file.runway).unwrap_or(defaults.runway),
        ..defaults
    };
    config.step_sizes = match file.step {
        Some(StepSpec::Uniform(m)) => Some(vec![m; config.k_steps]),
        Some(StepSpec::List(v)) => Some(v),
        None => None,
    };
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    config.seed = seed;
    config.validate()?;
    let replicas = args.replicas.or(file.replicas).unwrap_or(DEFAULT_REPLICAS);
    if replicas < 2 {
        return Err(CliError::usage("--replicas must be at least 2"));
    }
    let grid = GridSpec {
        step: args.grid_step.or(file.grid_step).unwrap_or(DEFAULT_GRID_STEP),
        low_noise_only: args.low_noise_only || file.low_noise_only.unwrap_or(false),
    };
    Ok(SweepSettings {
        config,
        replicas,
        seed,
        grid,
    })
}

fn single_point(eps: AsymmetryPoint, s: &SweepSettings) -> Result<SweepRow> {
    let (t1, t2) = eps.theta();
    let r = mse_ratio(&eps, &s.config, s.replicas, derive_seed(s.seed, &[0, 0]))?;
    Ok(SweepRow {
        theta1: t1,
        theta2: t2,
        eps1: eps.eps1(),
        eps2: eps.eps2(),
        log10_ratio_theta: (t1 / t2).log10(),
        noise_bin: 1.0 - eps.eps2(),
        mse_static: r.mse_static,
        mse_adapt: r.mse_adapt,
        ratio: r.ratio,
        se_ratio: r.se_ratio,
    })
}

fn emit_rows<T: Serialize>(out: Option<&Path>, format: Format, rows: &[T]) -> Result<()> {
    match format {
        Format::Csv => write_csv(out, rows),
        Format::Json => write_json(out, &rows),
    }
}

fn sweep(args: &SweepArgs, out: Option<&Path>, format: Format) -> Result<()> {
    match args.figure {
        Some(1) => {
            let step = args.grid_step.unwrap_or(0.01);
            let rows = models::fig1_grid(step)?;
            let summary = models::fig1_sign_summary(&rows);
            log::info!(
                "{} points, {:.2}% nonnegative",
                summary.points,
                100.0 * summary.fraction_nonnegative
            );
            emit_rows(out, format, &rows)
        }
        None | Some(3) => {
            let s = sweep_settings(args)?;
            let point = match (&args.theta, &args.eps) {
                (Some(_), Some(_)) => return Err(CliError::usage("give either --theta or --eps, not both")),
                (Some(t), None) => match t[..] {
                    [a, b] => Some(AsymmetryPoint::from_theta(a, b)?),
                    _ => return Err(CliError::usage("--theta takes two values for a sweep point")),
                },
                (None, Some(e)) => match e[..] {
                    [a, b] => Some(AsymmetryPoint::new(a, b)?),
                    _ => return Err(CliError::usage("--eps takes two values")),
                },
                (None, None) => None,
            };
            let rows = match point {
                Some(eps) => vec![single_point(eps, &s)?],
                None => {
                    let r = grid_sweep(&s.grid, &s.config, s.replicas, s.seed)?;
                    if !r.skipped.is_empty() {
                        log::info!("skipped {} grid points with deterministic outcomes", r.skipped.len());
                    }
                    r.rows
                }
            };
            emit_rows(out, format, &rows)
        }
        Some(4) => {
            let out = out.ok_or_else(|| CliError::usage("--figure 4 writes four files; give --out"))?;
            let mut s = sweep_settings(args)?;
            s.grid.low_noise_only = true;
            let runway = args.runway.filter(|&r| r > 0).unwrap_or(s.config.n_total / 2);
            let panels = [("a", 10, 0), ("b", 10, runway), ("c", 5, 0), ("d", 5, runway)];
            for (label, k, r) in panels {
                let mut cfg = s.config.clone();
                cfg.k_steps = k;
                cfg.runway = r;
                cfg.step_sizes = None;
                cfg.validate()?;
                let result = grid_sweep(&s.grid, &cfg, s.replicas, s.seed)?;
                let path = with_suffix(out, label);
                log::info!("panel ({label}): K = {k}, runway = {r} -> {}", path.display());
                emit_rows(Some(&path), format, &result.rows)?;
            }
            Ok(())
        }
        Some(other) => Err(CliError::usage(format!("unknown figure {other}; expected 1, 3 or 4"))),
    }
}
