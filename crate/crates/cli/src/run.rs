//! Dispatch of a resolved configuration to the library, and the reports it
//! leaves on disk.

use std::path::Path;
use std::sync::Arc;

use magfrac::experiments::{example1_report, example2_sweep, hypothesis_validator, punctured_check, PuncturedSetup};
use magfrac::fields::{lp_norm, make_example2, make_indicator, WeightFunction};
use magfrac::report::{write_csv, write_json, SCHEMA_VERSION};
use magfrac::spectral::{eigensolve, gap_report};
use magfrac::variational::{best_constant_s, energy_and_ground_states, poincare_constant, random_start};
use magfrac::{magnetic_seminorm, Error, Grid, GridFunction, PairRegion, RegionalOperator, SeminormParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, ConfigError, FunctionConfig, Settings};

/// Why a run stopped: exit code 2 for configuration problems, 1 otherwise.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub field: Option<String>,
    pub message: String,
}

impl Failure {
    pub fn config(e: ConfigError) -> Self {
        Failure {
            code: 2,
            field: Some(e.field),
            message: e.message,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "code": self.code, "field": self.field, "message": self.message }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Failure::config(e.into()),
            other => Failure {
                code: 1,
                field: None,
                message: other.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    version: &'static str,
    command: Command,
    config: &'a Settings,
    result: Value,
}

type Outcome = std::result::Result<Value, Failure>;

/// Runs the command, writes `summary.json` and the command's CSV files into
/// the output directory, and returns the compact summary line.
pub fn run(st: &Settings) -> std::result::Result<String, Failure> {
    std::fs::create_dir_all(&st.out)?;
    let out = st.out.as_path();
    let result = match st.command {
        Command::Seminorm => seminorm(st, out),
        Command::Energy => energy(st, out),
        Command::Eigs => eigs(st, out),
        Command::Poincare => poincare(st, out),
        Command::BestConstant => best_constant(st),
        Command::Example1 => example1(st, out),
        Command::Example2 => example2(st, out),
        Command::Punctured => punctured(st, out),
        Command::Validate => Ok(serde_json::to_value(hypothesis_validator(st.s, st.p, st.q, st.r, st.dim)).map_err(Error::from)?),
    }?;
    let summary = Summary {
        schema: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION"),
        command: st.command,
        config: st,
        result,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(serde_json::to_string(&summary).map_err(Error::from)?)
}

fn to_value<T: Serialize>(v: &T) -> Outcome {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

fn grid(st: &Settings) -> std::result::Result<Arc<Grid>, Failure> {
    Ok(Arc::new(st.domain.build().map_err(Failure::config)?))
}

fn field(st: &Settings, grid: &Grid) -> std::result::Result<magfrac::VectorField, Failure> {
    st.field.build(grid).map_err(Failure::config)
}

#[derive(Serialize)]
struct SeminormRow {
    sample: usize,
    value: f64,
    value_p: f64,
    norm_q: f64,
    pair_count: u64,
}

fn seminorm(st: &Settings, out: &Path) -> Outcome {
    let grid = grid(st)?;
    let params = SeminormParams::new(st.s, st.p, field(st, &grid)?)?;
    let lambda = st.lambda.as_ref().map(|l| l.mask(&grid));
    let region = PairRegion::from_kind(st.region, &grid, lambda.as_ref())?;
    let fs: Vec<GridFunction> = match st.function {
        FunctionConfig::Random => (0..st.samples)
            .map(|k| GridFunction::new(grid.clone(), random_start(&grid, st.seed, k as u64)))
            .collect::<magfrac::Result<_>>()?,
        FunctionConfig::Indicator => {
            let mask = lambda.as_ref().ok_or_else(|| Failure::config(ConfigError::new("lambda", "indicator needs lambda")))?;
            vec![make_indicator(mask, grid.clone())?]
        }
        FunctionConfig::Example2 => vec![make_example2(st.eps[0], grid.clone())?],
    };
    let mut rows = Vec::with_capacity(fs.len());
    let mut describe = None;
    for (sample, f) in fs.iter().enumerate() {
        let b = magnetic_seminorm(f, &params, &region)?;
        rows.push(SeminormRow {
            sample,
            value: b.value,
            value_p: b.value_p,
            norm_q: lp_norm(f, st.q),
            pair_count: b.pair_count,
        });
        describe.get_or_insert((b.field, b.region));
    }
    write_csv(&out.join("seminorm.csv"), st, &rows)?;
    let (field, region) = describe.unwrap_or_default();
    Ok(json!({
        "field": field,
        "region": region,
        "samples": rows.len(),
        "first_value": rows[0].value,
        "max_value": rows.iter().map(|r| r.value).fold(0.0, f64::max),
    }))
}

#[derive(Serialize)]
struct RestartRow {
    restart: usize,
    ratio: f64,
}

fn restart_rows(values: &[f64]) -> Vec<RestartRow> {
    values.iter().enumerate().map(|(restart, &ratio)| RestartRow { restart, ratio }).collect()
}

#[derive(Serialize)]
struct CellRow {
    cell: usize,
    x1: f64,
    x2: f64,
    re: f64,
    im: f64,
}

fn cell_rows(f: &GridFunction) -> Vec<CellRow> {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(cell, z)| {
            let x = grid.center(cell);
            CellRow {
                cell,
                x1: x[0],
                x2: x[1],
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

fn energy(st: &Settings, out: &Path) -> Outcome {
    let grid = grid(st)?;
    let field = field(st, &grid)?;
    let (e, gs) = energy_and_ground_states(st.s, st.p, st.q, &field, grid, &st.optimizer, None)?;
    write_csv(&out.join("restarts.csv"), st, &restart_rows(&e.restart_values))?;
    write_csv(&out.join("minimizer.csv"), st, &cell_rows(&e.minimizer))?;
    let mut v = to_value(&e)?;
    v["ground_states"] = json!(gs.len());
    Ok(v)
}

#[derive(Serialize)]
struct EigRow {
    n: usize,
    lambda: f64,
    residual: f64,
}

fn eigs(st: &Settings, out: &Path) -> Outcome {
    let grid = grid(st)?;
    let op = RegionalOperator::assemble(grid.clone(), st.s, field(st, &grid)?)?;
    let spec = eigensolve(&op, st.k)?;
    let rows: Vec<EigRow> = spec
        .lambdas
        .iter()
        .zip(&spec.residuals)
        .enumerate()
        .map(|(i, (&lambda, &residual))| EigRow {
            n: i + 1,
            lambda,
            residual,
        })
        .collect();
    write_csv(&out.join("eigs.csv"), st, &rows)?;
    let mut v = to_value(&spec)?;
    v["hermitian_residual"] = json!(op.hermitian_residual());
    if spec.len() >= 2 {
        let gaps = gap_report(&spec)?;
        v["min_positive_gap"] = json!(gaps.min_positive_gap);
        v["degenerate"] = json!(gaps.degenerate);
    }
    Ok(v)
}

fn poincare(st: &Settings, out: &Path) -> Outcome {
    let grid = grid(st)?;
    let g = WeightFunction::uniform(grid.clone()).normalize()?;
    let res = poincare_constant(st.s, st.p, st.q, &g, grid, &st.optimizer)?;
    write_csv(&out.join("restarts.csv"), st, &restart_rows(&res.restart_values))?;
    write_csv(&out.join("witness.csv"), st, &cell_rows(&res.witness))?;
    to_value(&res)
}

fn best_constant(st: &Settings) -> Outcome {
    let grid = grid(st)?;
    let field = field(st, &grid)?;
    let (e, gs) = energy_and_ground_states(st.s, st.p, st.q, &field, grid.clone(), &st.optimizer, None)?;
    let bc = best_constant_s(st.s, st.p, st.q, &field, st.delta, grid, &e, &gs, &st.optimizer)?;
    let mut v = to_value(&bc)?;
    v["ground_states"] = json!(gs.len());
    Ok(v)
}

fn example1(st: &Settings, out: &Path) -> Outcome {
    let n = st.domain.resolution()[0];
    let rec = example1_report(st.s, st.p, st.q, n)?;
    write_csv(&out.join("example1.csv"), st, std::slice::from_ref(&rec))?;
    to_value(&rec)
}

fn example2(st: &Settings, out: &Path) -> Outcome {
    let sweep = example2_sweep(st.s, st.r, st.p, st.q, &st.eps, st.resolution)?;
    write_csv(&out.join("example2.csv"), st, &sweep.records)?;
    let mut v = to_value(&sweep)?;
    if let Value::Object(m) = &mut v {
        m.remove("records");
    }
    Ok(v)
}

fn punctured(st: &Settings, out: &Path) -> Outcome {
    let grid = grid(st)?;
    let field = field(st, &grid)?;
    let lambda = st.lambda.as_ref().expect("resolved for punctured").mask(&grid);
    let (e, gs) = energy_and_ground_states(st.s, st.p, st.q, &field, grid.clone(), &st.optimizer, None)?;
    let bc = best_constant_s(st.s, st.p, st.q, &field, st.delta, grid.clone(), &e, &gs, &st.optimizer)?;
    // samples draw from the stream family after the optimizer's
    let fs: Vec<GridFunction> = (0..st.samples)
        .map(|k| GridFunction::new(grid.clone(), random_start(&grid, st.seed.wrapping_add(1), k as u64)))
        .collect::<magfrac::Result<_>>()?;
    let setup = PuncturedSetup {
        s: st.s,
        p: st.p,
        q: st.q,
        r: st.r,
        field: &field,
        delta: st.delta,
        lambda: &lambda,
        c: st.c,
        best_constant: bc.s_value,
        energy: e.value,
        ground_states: &gs,
        eps_slack: st.eps_slack,
    };
    let rep = punctured_check(&setup, &grid, &fs)?;
    write_csv(&out.join("punctured.csv"), st, &rep.rows)?;
    let mut v = to_value(&rep)?;
    if let Value::Object(m) = &mut v {
        m.remove("rows");
        m.insert("rows_checked".into(), json!(rep.rows.len()));
        m.insert("all_hold".into(), json!(rep.rows.iter().all(|r| r.holds)));
    }
    Ok(v)
}

