//! JSON run configuration, flag overrides, and per-command defaults.
//!
//! A [`RunConfig`] mirrors the file as written; every parameter is optional.
//! [`Settings::resolve`] fills in the command's defaults, range-checks every
//! value, and produces the fully explicit record echoed into every output.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use magfrac::domain::RegionKind;
use magfrac::fields::{FieldKind, Monomial};
use magfrac::variational::OptimizerConfig;
use magfrac::{build_grid, DomainSpec, Exponent, Grid, SubsetMask, VectorField};
use serde::{Deserialize, Serialize};

/// Dense operators above this many cells are refused rather than attempted.
pub const MAX_DENSE_CELLS: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Seminorm,
    Energy,
    Eigs,
    Poincare,
    BestConstant,
    Example1,
    Example2,
    Punctured,
    Validate,
}

/// A configuration problem, reported with exit code 2.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<magfrac::Error> for ConfigError {
    fn from(e: magfrac::Error) -> Self {
        ConfigError::new(e.field().unwrap_or("config"), e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

/// `q` as written: a number or the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QValue {
    Number(f64),
    Text(String),
}

impl QValue {
    pub fn parse(text: &str) -> QValue {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => QValue::Number(v),
            _ => QValue::Text(text.to_string()),
        }
    }

    fn exponent(&self) -> Result<Exponent> {
        let q = match self {
            QValue::Number(v) => *v,
            QValue::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            QValue::Text(t) => return Err(ConfigError::new("q", format!("expected a number or \"inf\", got {t:?}"))),
        };
        Ok(Exponent::new(q)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl Resolution {
    fn to_vec(&self) -> Vec<usize> {
        match self {
            Resolution::Uniform(n) => vec![*n],
            Resolution::PerAxis(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Rectangle,
    Ball,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// `[a, b]` for an interval, `[a1, b1, a2, b2]` for a rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Resolution>,
}

impl DomainConfig {
    fn interval(n: usize) -> Self {
        DomainConfig {
            kind: DomainKind::Interval,
            bounds: Some(vec![0.0, 1.0]),
            center: None,
            radius: None,
            n: Some(Resolution::Uniform(n)),
        }
    }

    /// Fills defaults so that the echo is explicit.
    fn complete(mut self, default_n: usize) -> Result<Self> {
        match self.kind {
            DomainKind::Interval | DomainKind::Rectangle => {
                let want = if self.kind == DomainKind::Interval { 2 } else { 4 };
                let b = self.bounds.get_or_insert_with(|| [0.0, 1.0].repeat(want / 2));
                if b.len() != want {
                    return Err(ConfigError::new("bounds", format!("expected {want} numbers, got {}", b.len())));
                }
                if self.center.is_some() || self.radius.is_some() {
                    return Err(ConfigError::new("center", "center/radius only apply to a ball"));
                }
            }
            DomainKind::Ball => {
                if self.bounds.is_some() {
                    return Err(ConfigError::new("bounds", "a ball is given by center and radius"));
                }
                self.center.get_or_insert([0.0, 0.0]);
                self.radius.get_or_insert(1.0);
            }
        }
        let n = self.n.get_or_insert(Resolution::Uniform(default_n));
        let v = n.to_vec();
        if v.is_empty() || v.iter().any(|&m| m < 2) {
            return Err(ConfigError::new("n", "every axis needs at least 2 cells"));
        }
        Ok(self)
    }

    pub fn spec(&self) -> DomainSpec {
        match self.kind {
            DomainKind::Interval => {
                let b = self.bounds.as_deref().unwrap_or(&[0.0, 1.0]);
                DomainSpec::interval(b[0], b[1])
            }
            DomainKind::Rectangle => {
                let b = self.bounds.as_deref().unwrap_or(&[0.0, 1.0, 0.0, 1.0]);
                DomainSpec::rectangle(b[0], b[1], b[2], b[3])
            }
            DomainKind::Ball => DomainSpec::ball(self.center.unwrap_or([0.0, 0.0]), self.radius.unwrap_or(1.0)),
        }
    }

    pub fn resolution(&self) -> Vec<usize> {
        self.n.as_ref().map(Resolution::to_vec).unwrap_or_else(|| vec![64])
    }

    pub fn build(&self) -> Result<Grid> {
        Ok(build_grid(&self.spec(), &self.resolution())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Zero,
    Constant { vector: [f64; 2] },
    /// `A(x) = (x2, -x1)`.
    Rotation,
    Polynomial { components: [Vec<Monomial>; 2] },
}

impl FieldConfig {
    pub fn build(&self, grid: &Grid) -> Result<VectorField> {
        let bbox = grid.bounding_box();
        let field = match self {
            FieldConfig::Zero => VectorField::zero(bbox),
            FieldConfig::Constant { vector } => VectorField::constant(*vector, bbox)?,
            FieldConfig::Rotation => VectorField::rotation(bbox),
            FieldConfig::Polynomial { components } => VectorField::new(
                FieldKind::Polynomial {
                    components: components.clone(),
                },
                bbox,
            )?,
        };
        Ok(field)
    }
}

/// The subset Λ of a split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaConfig {
    /// `{x : x_axis < below}`.
    Half { axis: usize, below: f64 },
    Ball { center: [f64; 2], radius: f64 },
}

impl LambdaConfig {
    fn default_for(grid: &Grid) -> Self {
        let b = grid.bounding_box();
        LambdaConfig::Half {
            axis: 0,
            below: 0.5 * (b.lo[0] + b.hi[0]),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match *self {
            LambdaConfig::Half { axis, below } => {
                if axis >= dim || !below.is_finite() {
                    return Err(ConfigError::new("lambda", format!("need axis < {dim} and a finite threshold")));
                }
            }
            LambdaConfig::Ball { center, radius } => {
                if !(radius > 0.0 && radius.is_finite() && center.iter().all(|c| c.is_finite())) {
                    return Err(ConfigError::new("lambda", "ball needs a finite center and positive radius"));
                }
            }
        }
        Ok(())
    }

    pub fn mask(&self, grid: &Grid) -> SubsetMask {
        match *self {
            LambdaConfig::Half { axis, below } => SubsetMask::from_predicate(grid, |x| x[axis] < below),
            LambdaConfig::Ball { center, radius } => {
                SubsetMask::from_predicate(grid, |x| (x[0] - center[0]).hypot(x[1] - center[1]) < radius)
            }
        }
    }
}

/// Test functions for the `seminorm` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    /// `samples` smooth random complex functions.
    Random,
    /// `χ_Λ`.
    Indicator,
    /// `f_ε` for the first entry of `eps`.
    Example2,
}

/// The file as written. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<QValue>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Number of eigenpairs.
    #[serde(default)]
    pub k: Option<usize>,
    /// Number of random test functions.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub lambda: Option<LambdaConfig>,
    #[serde(default)]
    pub region: Option<RegionKind>,
    #[serde(default)]
    pub function: Option<FunctionConfig>,
    /// `[nx, ny]` of the reduced-kernel rectangle.
    #[serde(default)]
    pub resolution: Option<[usize; 2]>,
    /// Audit value of `C` in the punctured check.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub eps_slack: Option<f64>,
    /// Space dimension for `validate`.
    #[serde(default)]
    pub dim: Option<usize>,
}

/// Turns a serde error into a field-tagged config error.
fn json_error(e: serde_json::Error) -> ConfigError {
    let msg = e.to_string();
    let field = msg
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .unwrap_or("config")
        .to_string();
    ConfigError::new(field, msg)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_error)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<String>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = Some(v); })*};
        }
        set!(command, out, seed, s, p, r, delta);
        if let Some(q) = self.q {
            cfg.q = Some(QValue::parse(&q));
        }
        if let Some(n) = self.n {
            cfg.domain.get_or_insert_with(|| DomainConfig::interval(n)).n = Some(Resolution::Uniform(n));
        }
    }
}

/// Every parameter made explicit; this is what the outputs echo. The output
/// directory and worker count are deliberately absent so that reruns compare
/// byte for byte.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub command: Command,
    pub domain: DomainConfig,
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
    pub r: f64,
    pub delta: f64,
    pub eps: Vec<f64>,
    pub k: usize,
    pub samples: usize,
    pub field: FieldConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub lambda: Option<LambdaConfig>,
    pub region: RegionKind,
    pub function: FunctionConfig,
    pub resolution: [usize; 2],
    pub c: Option<f64>,
    pub eps_slack: Option<f64>,
    pub dim: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

struct Defaults {
    s: f64,
    p: f64,
    r: f64,
    n: usize,
    domain: fn(usize) -> DomainConfig,
}

fn defaults(cmd: Command) -> Defaults {
    let base = Defaults {
        s: 0.5,
        p: 2.0,
        r: 1.5,
        n: 64,
        domain: DomainConfig::interval,
    };
    match cmd {
        Command::Energy | Command::Poincare => Defaults { n: 48, ..base },
        Command::BestConstant | Command::Punctured => Defaults { n: 24, ..base },
        Command::Eigs => Defaults { n: 128, ..base },
        Command::Example1 => Defaults {
            s: 0.2,
            domain: |n| DomainConfig {
                kind: DomainKind::Ball,
                bounds: None,
                center: Some([0.0, 0.0]),
                radius: Some(1.0),
                n: Some(Resolution::Uniform(n)),
            },
            ..base
        },
        Command::Example2 => Defaults {
            s: 0.6,
            r: 1.2,
            domain: |n| DomainConfig {
                kind: DomainKind::Rectangle,
                bounds: Some(vec![-1.0, 1.0, 0.0, 1.0]),
                center: None,
                radius: None,
                n: Some(Resolution::Uniform(n)),
            },
            ..base
        },
        Command::Seminorm | Command::Validate => base,
    }
}

fn in_range(field: &str, v: f64, ok: bool, expect: &str) -> Result<f64> {
    if ok && !v.is_nan() {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("{field} must {expect}, got {v}")))
    }
}

impl Settings {
    pub fn resolve(cfg: RunConfig) -> Result<Self> {
        let command = cfg.command.ok_or_else(|| ConfigError::new("command", "missing command"))?;
        let d = defaults(command);

        let s = cfg.s.unwrap_or(d.s);
        in_range("s", s, s > 0.0 && s < 1.0, "lie in (0, 1)")?;
        let p = cfg.p.unwrap_or(d.p);
        in_range("p", p, p.is_finite() && p >= 1.0, "lie in [1, inf)")?;
        let q = cfg.q.unwrap_or(QValue::Number(2.0)).exponent()?;
        let r = cfg.r.unwrap_or(d.r);
        in_range("r", r, r.is_finite() && r >= 1.0, "lie in [1, inf)")?;
        let delta = cfg.delta.unwrap_or(0.5);
        in_range("delta", delta, delta > 0.0 && delta <= 1.0, "lie in (0, 1]")?;
        let eps = cfg.eps.unwrap_or_else(|| (2..=6).map(|k| 2f64.powi(-k)).collect());
        if eps.is_empty() {
            return Err(ConfigError::new("eps", "need at least one ramp width"));
        }
        for &e in &eps {
            in_range("eps", e, e > 0.0 && e < 1.0, "lie in (0, 1)")?;
        }
        let samples = cfg.samples.unwrap_or(50);
        if samples == 0 {
            return Err(ConfigError::new("samples", "need at least one sample"));
        }
        if let Some(c) = cfg.c {
            in_range("c", c, c >= 0.0 && c.is_finite(), "be a finite nonnegative number")?;
        }
        if let Some(e) = cfg.eps_slack {
            in_range("eps_slack", e, e > 0.0 && e.is_finite(), "be positive")?;
        }
        let optimizer = cfg.optimizer.unwrap_or_default();
        optimizer.validate()?;
        let seed = cfg.seed.unwrap_or(0);
        let optimizer = OptimizerConfig { seed, ..optimizer };

        let domain = cfg.domain.unwrap_or_else(|| (d.domain)(d.n)).complete(d.n)?;
        let grid = domain.build()?;
        if matches!(command, Command::Eigs | Command::BestConstant | Command::Punctured) && grid.len() > MAX_DENSE_CELLS {
            return Err(ConfigError::new("n", format!("{} cells exceed the dense limit {MAX_DENSE_CELLS}", grid.len())));
        }
        let field = cfg.field.unwrap_or(FieldConfig::Zero);
        field.build(&grid)?;
        let k = cfg.k.unwrap_or_else(|| 10.min(grid.len()));
        if k == 0 || k > grid.len() {
            return Err(ConfigError::new("k", format!("k must lie in 1..={}", grid.len())));
        }
        let lambda = match (cfg.lambda, command) {
            (Some(l), _) => Some(l),
            (None, Command::Punctured | Command::Seminorm) => Some(LambdaConfig::default_for(&grid)),
            (None, _) => None,
        };
        if let Some(l) = &lambda {
            l.check(grid.dim())?;
        }
        let resolution = cfg.resolution.unwrap_or([4096, 2048]);
        if resolution.iter().any(|&m| m < 2) {
            return Err(ConfigError::new("resolution", "every axis needs at least 2 cells"));
        }
        let dim = cfg.dim.unwrap_or(grid.dim());
        if dim == 0 {
            return Err(ConfigError::new("dim", "dimension must be positive"));
        }
        Ok(Settings {
            command,
            domain,
            s,
            p,
            q,
            r,
            delta,
            eps,
            k,
            samples,
            field,
            optimizer,
            seed,
            lambda,
            region: cfg.region.unwrap_or(RegionKind::Full),
            function: cfg.function.unwrap_or(FunctionConfig::Random),
            resolution,
            c: cfg.c,
            eps_slack: cfg.eps_slack,
            dim,
            out: cfg.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_is_valid() {
        let cfg = RunConfig::from_json(r#"{"command":"eigs","domain":{"kind":"interval","bounds":[0,1],"n":128},"s":0.5,"k":10}"#)
            .unwrap();
        let st = Settings::resolve(cfg).unwrap();
        assert_eq!(st.command, Command::Eigs);
        assert_eq!(st.k, 10);
        assert_eq!(st.domain.resolution(), vec![128]);
    }

    #[test]
    fn s_out_of_range() {
        let cfg = RunConfig::from_json(r#"{"command":"eigs","s":1.2}"#).unwrap();
        assert_eq!(Settings::resolve(cfg).unwrap_err().field, "s");
    }

    #[test]
    fn missing_command() {
        let cfg = RunConfig::from_json(r#"{"s":0.5}"#).unwrap();
        assert_eq!(Settings::resolve(cfg).unwrap_err().field, "command");
    }

    #[test]
    fn unknown_key_names_the_field() {
        assert_eq!(RunConfig::from_json(r#"{"command":"eigs","sigma":1}"#).unwrap_err().field, "sigma");
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig::from_json(r#"{"command":"energy","s":0.3,"q":"inf"}"#).unwrap();
        Overrides {
            s: Some(0.7),
            n: Some(20),
            ..Default::default()
        }
        .apply(&mut cfg);
        let st = Settings::resolve(cfg).unwrap();
        assert_eq!(st.s, 0.7);
        assert_eq!(st.q, Exponent::Infinity);
        assert_eq!(st.domain.resolution(), vec![20]);
    }

    #[test]
    fn bad_q_and_delta() {
        let cfg = RunConfig::from_json(r#"{"command":"energy","q":0.5}"#).unwrap();
        assert_eq!(Settings::resolve(cfg).unwrap_err().field, "q");
        let cfg = RunConfig::from_json(r#"{"command":"best-constant","delta":0}"#).unwrap();
        assert_eq!(Settings::resolve(cfg).unwrap_err().field, "delta");
    }
}
