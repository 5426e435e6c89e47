use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fitzcheck::fitzpatrick::{fitz_finite, fitz_linear, fitz_sampled, FitzValue};
use fitzcheck::harness::{
    emit_report, load_scenario, read_report, run_suite, CheckConfig, CheckKind, CheckParams, Format,
    HarnessError, NamedGrid, NamedOperator, RunOptions, ScenarioConfig,
};
use fitzcheck::{Grid, OperatorSpec, PairPoint, ToleranceConfig, Vector};

#[derive(Parser)]
#[command(name = "fitzcheck", version, about = "Fitzpatrick functions and near-convexity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    #[arg(long, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "tol-eq")]
    tol_eq: Option<f64>,
    #[arg(long = "inf-threshold")]
    inf_threshold: Option<f64>,
    #[arg(long)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Suite {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one named check against an inline operator.
    Check {
        name: String,
        /// Operator as JSON, or @path to a JSON file.
        #[arg(long)]
        op: String,
        /// `lo:hi:step`; `lo` and `hi` are scalars or comma-separated vectors.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        z: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        zstar: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        xstar: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        inverse: bool,
        #[command(flatten)]
        output: Output,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate F_A at a point.
    Fitz {
        #[arg(long)]
        op: String,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        xstar: String,
        /// Resolvent grid for sampled operators, `lo:hi:step`.
        #[arg(long, allow_hyphen_values = true)]
        wgrid: Option<String>,
        #[arg(long = "tol-eq")]
        tol_eq: Option<f64>,
        #[arg(long = "inf-threshold")]
        inf_threshold: Option<f64>,
    },
    /// Re-emit a stored JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_vec(s: &str) -> Result<Vector, HarnessError> {
    let coords = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Parse(format!("bad vector '{s}': {e}")))?;
    Ok(Vector::new(coords)?)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| HarnessError::Parse(format!("bad list '{s}': {e}"))))
        .collect()
}

fn broadcast(v: Vector, dim: usize) -> Result<Vector, HarnessError> {
    if v.dim() == 1 && dim > 1 {
        Ok(Vector::new(vec![v[0]; dim])?)
    } else {
        Ok(v)
    }
}

fn parse_grid(s: &str, dim: usize) -> Result<Grid, HarnessError> {
    // Split on ':' but allow a leading '-' in each part.
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(HarnessError::Parse(format!("grid '{s}' must be lo:hi:step")));
    }
    let lo = broadcast(parse_vec(parts[0])?, dim)?;
    let hi = broadcast(parse_vec(parts[1])?, dim)?;
    let step: f64 = parts[2]
        .trim()
        .parse()
        .map_err(|e| HarnessError::Parse(format!("bad grid step: {e}")))?;
    Ok(Grid::new(lo, hi, step)?)
}

fn parse_op(s: &str) -> Result<OperatorSpec, HarnessError> {
    let text = match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_string(),
            source,
        })?,
        None => s.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("operator: {e}")))
}

fn apply_overrides(cfg: &mut ScenarioConfig, o: &Overrides) -> Result<(), HarnessError> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(t) = o.tol_eq {
        cfg.tolerances.eq_tol = t;
    }
    if let Some(t) = o.inf_threshold {
        cfg.tolerances.inf_threshold = t;
    }
    cfg.validate()
}

fn run_config(cfg: &ScenarioConfig, o: &Overrides, output: &Output) -> Result<i32, HarnessError> {
    let report = run_suite(cfg, &RunOptions { parallel: o.parallel });
    emit_report(&report, output.format, output.out.as_deref())?;
    Ok(report.exit_code())
}

fn real_main(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Suite {
            scenario,
            output,
            overrides,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            apply_overrides(&mut cfg, &overrides)?;
            run_config(&cfg, &overrides, &output)
        }
        Command::Check {
            name,
            op,
            grid,
            dim,
            z,
            zstar,
            x,
            xstar,
            p,
            lambdas,
            ns,
            alpha,
            beta,
            strict,
            samples,
            trials,
            inverse,
            output,
            overrides,
        } => {
            let kind = CheckKind::parse(&name).ok_or_else(|| {
                let known: Vec<&str> = CheckKind::ALL.iter().map(|k| k.name()).collect();
                HarnessError::Validation(format!("unknown check '{name}'; known: {}", known.join(", ")))
            })?;
            let spec = parse_op(&op)?;
            let opt_vec = |s: &Option<String>| s.as_deref().map(parse_vec).transpose();
            let from_params = [&z, &zstar, &x, &xstar]
                .into_iter()
                .find_map(|s| s.as_deref().map(|t| t.split(',').count()));
            let dim = dim
                .or_else(|| spec.infer_dim())
                .or(from_params)
                .ok_or_else(|| HarnessError::Validation("cannot infer dimension; pass --dim".into()))?;
            let params = CheckParams {
                z: opt_vec(&z)?,
                zstar: opt_vec(&zstar)?,
                x: opt_vec(&x)?,
                xstar: opt_vec(&xstar)?,
                p,
                lambdas: lambdas.as_deref().map(parse_list::<f64>).transpose()?,
                ns: ns.as_deref().map(parse_list::<u64>).transpose()?,
                alpha,
                beta,
                strict: strict.then_some(true),
                samples,
                trials,
                points: None,
                zstar_probes: None,
                inverse: inverse.then_some(true),
            };
            let grid_dim = if kind == CheckKind::MaximalityProbe { 2 * dim } else { dim };
            let grids = match grid {
                Some(g) => {
                    let g = parse_grid(&g, grid_dim)?;
                    vec![NamedGrid {
                        name: "grid".into(),
                        lower: g.lower,
                        upper: g.upper,
                        spacing: g.spacing,
                    }]
                }
                None => Vec::new(),
            };
            let mut cfg = ScenarioConfig {
                name: format!("adhoc-{name}"),
                dimension: dim,
                seed: 0,
                tolerances: ToleranceConfig::default(),
                checks: vec![CheckConfig {
                    check: kind,
                    targets: vec!["op".into()],
                    grid: (!grids.is_empty()).then(|| "grid".to_string()),
                    params,
                }],
                grids,
                operators: vec![NamedOperator {
                    name: "op".into(),
                    dimension: None,
                    spec,
                }],
            };
            apply_overrides(&mut cfg, &overrides)?;
            run_config(&cfg, &overrides, &output)
        }
        Command::Fitz {
            op,
            x,
            xstar,
            wgrid,
            tol_eq,
            inf_threshold,
        } => {
            let spec = parse_op(&op)?;
            let mut tol = ToleranceConfig::default();
            if let Some(t) = tol_eq {
                tol.eq_tol = t;
            }
            if let Some(t) = inf_threshold {
                tol.inf_threshold = t;
            }
            tol.validate()?;
            let pt = PairPoint::new(parse_vec(&x)?, parse_vec(&xstar)?)?;
            spec.validate(pt.dim(), &tol)
                .map_err(|e| HarnessError::Validation(e.to_string()))?;
            let value = match &spec {
                OperatorSpec::Graph { graph } => FitzValue::Finite {
                    value: fitz_finite(graph, &pt)?,
                },
                OperatorSpec::Linear { matrix, offset } => fitz_linear(matrix, offset, &pt, &tol)?,
                _ => {
                    let g = wgrid.ok_or_else(|| {
                        HarnessError::Validation("sampled evaluation needs --wgrid lo:hi:step".into())
                    })?;
                    fitz_sampled(&spec, &pt, &parse_grid(&g, pt.dim())?, &tol)?
                }
            };
            println!("{}", serde_json::to_string(&value).expect("value serializes"));
            Ok(0)
        }
        Command::Report { input, output } => {
            let report = read_report(&input)?;
            emit_report(&report, output.format, output.out.as_deref())?;
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
