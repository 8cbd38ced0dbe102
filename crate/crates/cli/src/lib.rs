//! Experiment runner behind the `thetagk` binary: configuration, dispatch to
//! the library and CSV/JSON emission.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thetagk::cylinder::Collocation;
use thetagk::gauss_kuzmin::uniform_points;
use thetagk::natural_extension::fbar_exact_with;
use thetagk::*;

pub const OUT_DIR_ENV: &str = "THETAGK_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Digits,
    Convergents,
    InvarianceCheck,
    PfContract,
    #[value(name = "kuzmin-1d")]
    #[serde(rename = "kuzmin-1d")]
    Kuzmin1d,
    #[value(name = "kuzmin-2d")]
    #[serde(rename = "kuzmin-2d")]
    Kuzmin2d,
    ErrorSurface,
    Sandwich,
    BoundsTable,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Digits => "digits",
            Command::Convergents => "convergents",
            Command::InvarianceCheck => "invariance-check",
            Command::PfContract => "pf-contract",
            Command::Kuzmin1d => "kuzmin-1d",
            Command::Kuzmin2d => "kuzmin-2d",
            Command::ErrorSurface => "error-surface",
            Command::Sandwich => "sandwich",
            Command::BoundsTable => "bounds-table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Theta(#[from] ThetaError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Theta(ThetaError::ResourceBudget { .. }) => 3,
            CliError::Theta(_) => 2,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            3 => "resource_budget",
            4 => "io",
            _ => "invalid_config",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let mut rec = Map::new();
        rec.insert("error".into(), json!(self.kind()));
        rec.insert("exit_code".into(), json!(self.exit_code()));
        rec.insert("message".into(), json!(self.to_string()));
        if let CliError::Theta(ThetaError::ResourceBudget {
            what,
            requested,
            limit,
        }) = self
        {
            rec.insert(
                "budget".into(),
                json!({ "what": what, "requested": requested, "limit": limit }),
            );
        }
        Value::Object(rec).to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub m: Vec<u64>,
    pub n: usize,
    pub x: f64,
    pub y: f64,
    pub grid: usize,
    pub i_max: Option<u64>,
    pub samples: u64,
    pub seed: u64,
    /// Raw `--a` values; `None` means `{0, θ/2, θ}` for each `m`.
    pub a: Option<Vec<f64>>,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        let m = if command == Command::BoundsTable {
            vec![1, 2, 3, 10, 100, 1000, 10000]
        } else {
            vec![2]
        };
        // the one-dimensional iterations need fine grids to resolve n = 8
        let grid = match command {
            Command::Kuzmin1d => 4097,
            Command::PfContract => 1025,
            _ => 65,
        };
        Self {
            command,
            m,
            n: 3,
            x: 0.5,
            y: 0.5,
            grid,
            i_max: None,
            samples: 1_000_000,
            seed: 42,
            a: None,
            format: Format::Csv,
            out: None,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.m.is_empty() {
            return Err(CliError::Config("--m needs at least one value".into()));
        }
        if let Some(&m) = self.m.iter().find(|&&m| m == 0) {
            return Err(CliError::Config(format!("m = {m} is below 1")));
        }
        if self.grid < 2 {
            return Err(CliError::Config(format!("grid = {} is below 2", self.grid)));
        }
        if self.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if let Some(i) = self.i_max {
            if let Some(&m) = self.m.iter().find(|&&m| i < m) {
                return Err(CliError::Config(format!("i_max = {i} is below m = {m}")));
            }
        }
        for v in [self.x, self.y].iter().chain(self.a.iter().flatten()) {
            if !v.is_finite() {
                return Err(CliError::Config(format!("non-finite value {v}")));
            }
        }
        Ok(())
    }

    /// The `a` values for one `m`. Inputs within 1e-6 of `[0, θ]` are
    /// clamped, so rounded decimals like 0.707107 are accepted for `θ`.
    pub fn a_list(&self, p: &ThetaParams) -> CliResult<Vec<f64>> {
        match &self.a {
            None => Ok(vec![0.0, p.theta / 2.0, p.theta]),
            Some(list) => list
                .iter()
                .map(|&a| {
                    if (-1e-6..=p.theta + 1e-6).contains(&a) {
                        Ok(a.clamp(0.0, p.theta))
                    } else {
                        Err(CliError::Config(format!(
                            "a = {a} is outside [0, {}] for m = {}",
                            p.theta, p.m
                        )))
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config: Value,
    pub meta: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl RunArtifact {
    fn new(cfg: &ExperimentConfig, columns: &[&'static str]) -> Self {
        let mut meta = Map::new();
        meta.insert("tool".into(), json!("thetagk"));
        meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        Self {
            config: serde_json::to_value(cfg).expect("config serializes"),
            meta,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn note(&mut self, key: &str, v: Value) {
        self.meta.insert(key.into(), v);
    }
}

fn params(m: u64) -> CliResult<ThetaParams> {
    Ok(ThetaParams::new(m)?)
}

fn unit(p: &ThetaParams, name: &'static str, v: f64) -> CliResult<f64> {
    Ok(p.check_unit(name, v)?)
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    cfg.validate()?;
    match cfg.command {
        Command::Digits => digits(cfg),
        Command::Convergents => convergent_rows(cfg),
        Command::InvarianceCheck => invariance(cfg),
        Command::PfContract => pf_contract(cfg),
        Command::Kuzmin1d => kuzmin_1d(cfg),
        Command::Kuzmin2d => kuzmin_2d(cfg),
        Command::ErrorSurface => surface(cfg),
        Command::Sandwich => sandwich(cfg),
        Command::BoundsTable => bounds(cfg),
    }
}

fn join_digits(d: &[u64]) -> String {
    d.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn digits(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(cfg, &["m", "x", "n", "digits", "terminated", "remainder"]);
    for &m in &cfg.m {
        let p = params(m)?;
        let x = unit(&p, "x", cfg.x)?;
        let (seq, rem) = expand_with_remainder(&p, x, cfg.n)?;
        art.push(vec![
            json!(m),
            json!(x),
            json!(cfg.n),
            json!(join_digits(&seq.digits)),
            json!(seq.terminated),
            json!(rem),
        ]);
    }
    Ok(art)
}

fn convergent_rows(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &[
            "m",
            "k",
            "digit",
            "p",
            "q",
            "value",
            "error",
            "bound_q",
            "bound_theta",
            "pass",
        ],
    );
    art.note("slack", json!(1e-12));
    for &m in &cfg.m {
        let p = params(m)?;
        let x = unit(&p, "x", cfg.x)?;
        let seq = expand_digits(&p, x, cfg.n + 1)?;
        if seq.is_empty() {
            continue;
        }
        let conv = convergents(&p, &seq.digits)?;
        let t2 = p.theta * p.theta;
        for (k, c) in conv.iter().enumerate().take(cfg.n) {
            let err = (x - c.value()).abs();
            // past a terminated expansion the last convergent is x itself
            let bound_q = conv.get(k + 1).map_or(0.0, |d| 1.0 / (c.q * d.q));
            let bound_theta = (1.0 + t2).powi(-2 * ((k as i32 + 1) / 2)) / t2;
            let pass = err <= bound_q + 1e-12 && bound_q <= bound_theta + 1e-12;
            art.push(vec![
                json!(m),
                json!(k + 1),
                json!(seq.digits[k]),
                json!(c.p),
                json!(c.q),
                json!(c.value()),
                json!(err),
                json!(bound_q),
                json!(bound_theta),
                json!(pass),
            ]);
        }
    }
    Ok(art)
}

const INVARIANCE_DIRECT: u64 = 10_000;

fn invariance(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &["m", "x", "gamma", "gamma_preimage", "residual", "pass"],
    );
    let direct = cfg.i_max.unwrap_or(INVARIANCE_DIRECT);
    art.note("direct_terms_to", json!(direct));
    art.note("tolerance", json!(1e-9));
    for &m in &cfg.m {
        let p = params(m)?;
        let th = p.theta;
        for x in uniform_points(&p, cfg.grid) {
            let mut pre = 0.0;
            for i in m..=direct {
                let i = i as f64;
                pre += gamma_cdf(&p, 1.0 / (i * th))? - gamma_cdf(&p, 1.0 / (i * th + x))?;
            }
            // the remaining terms telescope to ln(1 + x/((I+1)θ))
            pre += (x / ((direct + 1) as f64 * th)).ln_1p() / p.log_norm;
            let g = gamma_cdf(&p, x)?;
            art.push(vec![
                json!(m),
                json!(x),
                json!(g),
                json!(pre),
                json!((pre - g).abs()),
                json!((pre - g).abs() <= 1e-9),
            ]);
        }
    }
    Ok(art)
}

pub const PF_DEFAULT_I_MAX: u64 = 4000;

/// The contraction battery: identity, an indicator, a cosine and a seeded
/// random walk.
pub fn contraction_battery(
    p: &ThetaParams,
    grid: usize,
    seed: u64,
) -> CliResult<Vec<(&'static str, GridFunction)>> {
    let th = p.theta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    let walk: Vec<f64> = (0..=grid)
        .map(|_| {
            level += rng.random::<f64>() - 0.5;
            level
        })
        .collect();
    Ok(vec![
        ("identity", GridFunction::from_fn(p, grid, |x| x)?),
        (
            "indicator",
            GridFunction::from_fn(p, grid, |x| if x <= th / 2.0 { 1.0 } else { 0.0 })?,
        ),
        (
            "cosine",
            GridFunction::from_fn(p, grid, |x| (4.0 * std::f64::consts::PI * x / th).cos())?,
        ),
        ("random-walk", GridFunction::new(p, walk)?),
    ])
}

fn pf_contract(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &[
            "m",
            "function",
            "k",
            "variation",
            "sup_deviation",
            "bound",
            "allowance",
            "relative_slack",
            "pass",
        ],
    );
    let i_max = cfg.i_max.unwrap_or(PF_DEFAULT_I_MAX);
    art.note("i_max", json!(i_max));
    for &m in &cfg.m {
        let p = params(m)?;
        for (name, f) in contraction_battery(&p, cfg.grid - 1, cfg.seed)? {
            let r = contraction_report(&p, &f, cfg.n.max(1), i_max)?;
            for k in 0..=r.n_steps {
                let cap = r.bounds[k] * (1.0 + r.relative_slack) + r.allowances[k];
                art.push(vec![
                    json!(m),
                    json!(name),
                    json!(k),
                    json!(r.variations[k]),
                    json!(r.sup_deviations[k]),
                    json!(r.bounds[k]),
                    json!(r.allowances[k]),
                    json!(r.relative_slack),
                    json!(r.variations[k] <= cap && r.sup_deviations[k] <= cap),
                ]);
            }
        }
    }
    Ok(art)
}

pub const RESIDUAL_DEFAULT_I_MAX: u64 = 100_000;
const RESIDUAL_POINTS: usize = 65;

fn kuzmin_1d(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &[
            "m",
            "n",
            "sup_deviation",
            "bound",
            "decreasing",
            "fitted_rate",
            "theta",
            "pass",
        ],
    );
    let i_max = cfg.i_max.unwrap_or(RESIDUAL_DEFAULT_I_MAX);
    let mut residuals = Vec::new();
    for &m in &cfg.m {
        let p = params(m)?;
        let r = decay_estimate(&p, cfg.n.max(2), cfg.grid - 1)?;
        for (k, d) in r.deviations.iter().enumerate() {
            let decreasing = k == 0 || d.sup_deviation < r.deviations[k - 1].sup_deviation;
            art.push(vec![
                json!(m),
                json!(d.n),
                json!(d.sup_deviation),
                json!(d.bound),
                json!(decreasing),
                json!(r.fitted_rate),
                json!(p.theta),
                json!(decreasing && d.sup_deviation <= d.bound && r.fitted_rate < p.theta),
            ]);
        }
        let g = |t: f64| (p.theta * t).ln_1p() / p.log_norm;
        let mut worst = 0.0f64;
        for x in uniform_points(&p, RESIDUAL_POINTS) {
            worst = worst.max((gk1d_series(&p, g, x, i_max)? - g(x)).abs());
        }
        // sup|G'| θ / (θ² I) with G' ≤ θ / ln(1+θ²)
        let bound = p.theta / p.log_norm * p.theta / (p.theta * p.theta * i_max as f64);
        residuals.push(json!({
            "m": m,
            "i_max": i_max,
            "points": RESIDUAL_POINTS,
            "residual": worst,
            "tail_bound": bound,
        }));
    }
    art.note("eigen_residual", Value::Array(residuals));
    Ok(art)
}

fn kuzmin_2d(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &[
            "m",
            "n",
            "x",
            "y",
            "exact",
            "exact_error",
            "monte_carlo",
            "std_error",
            "discarded",
            "limit",
            "deviation",
            "agree",
        ],
    );
    let i_max = cfg.i_max.unwrap_or(RESIDUAL_DEFAULT_I_MAX);
    art.note(
        "agreement_rule",
        json!("|exact - monte_carlo| <= 4 std_error + exact_error"),
    );
    let mut residuals = Vec::new();
    for &m in &cfg.m {
        let p = params(m)?;
        let rect = Rect::new(&p, cfg.x, cfg.y)?;
        let colloc = Collocation::with_defaults(&p);
        for n in 1..=cfg.n {
            let ex = fbar_exact_with(&p, &colloc, n, rect)?;
            let mc = fbar_mc(&p, n, rect, cfg.samples, cfg.seed)?;
            art.push(vec![
                json!(m),
                json!(n),
                json!(rect.x_max),
                json!(rect.y_max),
                json!(ex.estimate),
                json!(ex.truncation_mass),
                json!(mc.estimate),
                json!(mc.std_error),
                json!(mc.discarded),
                json!(ex.limit),
                json!((ex.estimate - ex.limit).abs()),
                json!((ex.estimate - mc.estimate).abs() <= 4.0 * mc.std_error + ex.truncation_mass),
            ]);
        }
        let pts: Vec<f64> = (1..=16).map(|k| p.theta * k as f64 / 16.0).collect();
        let rects = pts
            .iter()
            .flat_map(|&x| pts.iter().map(move |&y| (x, y)))
            .map(|(x, y)| Rect::new(&p, x, y))
            .collect::<Result<Vec<_>>>()?;
        let r = gk2d_fixed_point_residual(&p, &rects, i_max)?;
        residuals.push(
            json!({ "m": m, "i_max": i_max, "residual": r.residual, "tail_bound": r.tail_bound }),
        );
    }
    art.note("fixed_point_residual", Value::Array(residuals));
    Ok(art)
}

fn surface(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(cfg, &["m", "a", "n", "x", "y", "error"]);
    let mut summary = Vec::new();
    for &m in &cfg.m {
        let p = params(m)?;
        for a in cfg.a_list(&p)? {
            let s = error_surface(&p, a, cfg.n, cfg.grid)?;
            for (i, &x) in s.xs.iter().enumerate() {
                for (j, &y) in s.ys.iter().enumerate() {
                    art.push(vec![
                        json!(m),
                        json!(a),
                        json!(cfg.n),
                        json!(x),
                        json!(y),
                        json!(s.values[i][j]),
                    ]);
                }
            }
            summary.push(json!({
                "m": m,
                "a": a,
                "sup_abs": s.sup_abs,
                "argmax": [s.argmax.0, s.argmax.1],
                "truncation_bound": s.truncation_bound,
            }));
        }
    }
    art.note("surfaces", Value::Array(summary));
    Ok(art)
}

fn sandwich(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(
        cfg,
        &[
            "m",
            "n",
            "a",
            "sup_error",
            "argmax_x",
            "argmax_y",
            "lower",
            "upper",
            "truncation",
            "grid_allowance",
            "slack",
            "pass",
        ],
    );
    for &m in &cfg.m {
        let p = params(m)?;
        let r = sandwich_check(&p, cfg.n, &cfg.a_list(&p)?, cfg.grid)?;
        for row in &r.rows {
            art.push(vec![
                json!(m),
                json!(r.n),
                json!(row.a),
                json!(row.sup_error),
                json!(row.argmax.0),
                json!(row.argmax.1),
                json!(r.lower),
                json!(r.upper),
                json!(r.truncation_bound),
                json!(r.grid_allowance),
                json!(r.slack),
                json!(row.pass),
            ]);
        }
    }
    Ok(art)
}

fn bounds(cfg: &ExperimentConfig) -> CliResult<RunArtifact> {
    let mut art = RunArtifact::new(cfg, &["m", "theta", "lower_limit", "upper_limit"]);
    for r in bounds_table(&cfg.m)? {
        art.push(vec![
            json!(r.m),
            json!(r.theta),
            json!(r.lower_limit),
            json!(r.upper_limit),
        ]);
    }
    Ok(art)
}

/// Shortest round-trip decimal of `v` after rounding to 12 significant
/// digits.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("valid float");
    let s = format!("{rounded:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format_real(n.as_f64().expect("f64")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn emit(art: &RunArtifact, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            w.write_record(&art.columns)?;
            for row in &art.rows {
                w.write_record(row.iter().map(csv_cell))?;
            }
            w.flush()
        }
        Format::Json => {
            let rows: Vec<Value> = art
                .rows
                .iter()
                .map(|r| {
                    Value::Object(
                        art.columns
                            .iter()
                            .map(|c| c.to_string())
                            .zip(r.iter().cloned())
                            .collect(),
                    )
                })
                .collect();
            let doc = json!({ "config": art.config, "meta": art.meta, "rows": rows });
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            out.write_all(b"\n")
        }
    }
}

/// Explicit `--out`, else `$THETAGK_OUT_DIR/<command>.<ext>`, else stdout.
pub fn output_path(cfg: &ExperimentConfig, env_dir: Option<PathBuf>) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| {
        env_dir.map(|d| d.join(format!("{}.{}", cfg.command.name(), cfg.format.extension())))
    })
}

/// Emits to the resolved target.
pub fn write_artifact(
    art: &RunArtifact,
    cfg: &ExperimentConfig,
    env_dir: Option<PathBuf>,
) -> CliResult<()> {
    match output_path(cfg, env_dir) {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(art, cfg.format, &mut lock).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
        Some(path) => {
            let io = |source| CliError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut buf = Vec::new();
            emit(art, cfg.format, &mut buf).map_err(io)?;
            std::fs::write(&path, buf).map_err(io)
        }
    }
}
