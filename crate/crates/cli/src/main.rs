//! `pdmsq`: transform tables, spectra, verification and figure data.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pdmsq::catalog::{
    f_closed, figure1_table, figure2_table, generator_for_mass, mass_family, morse_from_config, morse_potential,
    potential_family, A3Sign, ExampleConfig, FigureTable, SqueezeBaseline, G_closed,
};
use pdmsq::eigensolve::{rel_diff, spectrum_compare};
use pdmsq::operators::{hamiltonian_bdd_with, hamiltonian_constant, MassSampling};
use pdmsq::transform::{series_g, sum_series, v_tilde, Convention, SeriesKind, SeriesOptions};
use pdmsq::verify::{
    morse_spectra, resolve_sign_and_convention, run_verify, Resolution, ResolverConfig, SignMode, SpectralConfig,
    VerifyConfig, CHECK_NAMES,
};
use pdmsq::{Error, GridSpec, ScalarField};

const CONFIG_HELP: &str = "\
Config file (--config): one `key = value` per line, `#` starts a comment.
Keys are the long flag names without dashes, e.g.

    alpha = 0.1
    beta = 0.5
    a0 = 64
    a1 = -320
    a3-sign = auto
    K-terms = 256

Flags given on the command line override the file.

Exit codes: 0 ok, 1 verification failure, 2 domain or parameter error,
3 I/O error, 4 insufficient bound states, 5 ambiguous sign resolution.";

#[derive(Parser, Debug)]
#[command(name = "pdmsq", version, about = "Position-dependent mass via generalized squeezing", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate m, g, G, f, V, V~ and W on a grid.
    Transform(Common),
    /// Compare the PDM spectrum with the transformed constant-mass spectrum.
    Spectrum(Common),
    /// Run the acceptance checks and write a JSON report.
    Verify(Common),
    /// Write fig1 (mass) and fig2 (potential) plot data.
    Figures(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
    Auto,
    /// Alias for plus.
    Paper,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a1: Option<f64>,
    /// Sign of a3 (auto: certified by the resolver).
    #[arg(long = "a3-sign", value_enum)]
    a3_sign: Option<SignArg>,
    #[arg(long, allow_negative_numbers = true)]
    xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xmax: Option<f64>,
    /// Interior grid nodes.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "k-levels")]
    k_levels: Option<usize>,
    /// Series truncation cap.
    #[arg(long = "K-terms")]
    k_terms: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constant-mass squeeze baseline: m = m0, V = x^2/2.
    #[arg(long)]
    m0: Option<f64>,
    /// Negative control: sample the mass off the half nodes.
    #[arg(long = "corrupt-stencil", hide = true)]
    corrupt_stencil: bool,
}

/// Resolved settings after flags > file > defaults.
#[derive(Debug)]
struct RunConfig {
    alpha: f64,
    beta: f64,
    a0: f64,
    a1: f64,
    sign: SignArg,
    xmin: Option<f64>,
    xmax: Option<f64>,
    n: Option<usize>,
    k_levels: usize,
    series: SeriesOptions,
    out: PathBuf,
    format: Format,
    m0: Option<f64>,
    corrupt: bool,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(String),
    Usage(String),
    Verification,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(Error::InsufficientBoundStates { .. }) => 4,
            CliError::Core(Error::AmbiguousResolution(_)) => 5,
            CliError::Core(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        map.insert(k.trim().trim_start_matches('-').to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn file_value<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))))
        .transpose()
}

fn file_enum<T: ValueEnum>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| T::from_str(v, true).map_err(|_| CliError::Usage(format!("config key `{key}`: bad value `{v}`"))))
        .transpose()
}

impl RunConfig {
    fn resolve(c: &Common) -> Result<Self, CliError> {
        let file = match &c.config {
            Some(p) => parse_config_file(p)?,
            None => HashMap::new(),
        };
        const KNOWN: [&str; 14] = [
            "alpha", "beta", "a0", "a1", "a3-sign", "xmin", "xmax", "n", "k-levels", "K-terms", "tol", "out", "format",
            "m0",
        ];
        if let Some(k) = file.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        let acc = ExampleConfig::acceptance();
        macro_rules! pick {
            ($flag:expr, $key:literal) => {
                match $flag {
                    Some(v) => Some(v),
                    None => file_value(&file, $key)?,
                }
            };
        }
        let sign = match c.a3_sign {
            Some(s) => s,
            None => file_enum(&file, "a3-sign")?.unwrap_or(SignArg::Auto),
        };
        let format = match c.format {
            Some(f) => f,
            None => file_enum(&file, "format")?.unwrap_or(Format::Csv),
        };
        let k_terms = pick!(c.k_terms, "K-terms").unwrap_or(256);
        let tol = pick!(c.tol, "tol").unwrap_or(1e-12);
        let cfg = RunConfig {
            alpha: pick!(c.alpha, "alpha").unwrap_or(acc.alpha),
            beta: pick!(c.beta, "beta").unwrap_or(acc.beta),
            a0: pick!(c.a0, "a0").unwrap_or(acc.a0),
            a1: pick!(c.a1, "a1").unwrap_or(acc.a1),
            sign,
            xmin: pick!(c.xmin, "xmin"),
            xmax: pick!(c.xmax, "xmax"),
            n: pick!(c.n, "n"),
            k_levels: pick!(c.k_levels, "k-levels").unwrap_or(4),
            series: SeriesOptions::new(k_terms, tol)?,
            out: pick!(c.out.clone(), "out").unwrap_or_else(|| PathBuf::from(".")),
            format,
            m0: pick!(c.m0, "m0"),
            corrupt: c.corrupt_stencil,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.example(A3Sign::Minus)?;
        if let Some(m0) = self.m0 {
            SqueezeBaseline::new(m0)?;
        }
        if let (Some(a), Some(b)) = (self.xmin, self.xmax) {
            if !(a < b) {
                return Err(CliError::Usage(format!("need xmin < xmax, got {a} and {b}")));
            }
        }
        if let Some(n) = self.n {
            if n < 3 {
                return Err(CliError::Usage(format!("need n >= 3, got {n}")));
            }
        }
        Ok(())
    }

    fn example(&self, sign: A3Sign) -> Result<ExampleConfig, CliError> {
        Ok(ExampleConfig::new(self.alpha, self.beta, self.a0, self.a1, sign)?)
    }

    fn fixed_sign(&self) -> Option<A3Sign> {
        match self.sign {
            SignArg::Plus | SignArg::Paper => Some(A3Sign::Plus),
            SignArg::Minus => Some(A3Sign::Minus),
            SignArg::Auto => None,
        }
    }

    /// The sign and convention to use, running the resolver when asked to.
    fn resolved_pair(&self) -> Result<(A3Sign, Convention), CliError> {
        if let Some(s) = self.fixed_sign() {
            return Ok((s, Convention::AsPrinted19b));
        }
        let cfg = self.example(A3Sign::Minus)?;
        let (res, _) = resolve_sign_and_convention(&cfg, &ResolverConfig::default(), &self.series)?;
        match res {
            Resolution::Resolved {
                a3_sign, convention, ..
            } => Ok((a3_sign, convention)),
            other => {
                let reason = match other {
                    Resolution::Ambiguous { reason } => reason,
                    _ => "all pairs tie".into(),
                };
                eprintln!(
                    "warning: resolver did not certify a pair for this config ({reason}); \
                     using a3 sign minus with AS_PRINTED_19B, the pair certified by `verify`"
                );
                Ok((A3Sign::Minus, Convention::AsPrinted19b))
            }
        }
    }

    fn out_file(&self, stem: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))?;
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        Ok(self.out.join(format!("{stem}.{ext}")))
    }
}

/// 17 significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn json_num(v: Option<f64>) -> serde_json::Value {
    match v {
        Some(x) if x.is_finite() => serde_json::Value::from(x),
        _ => serde_json::Value::Null,
    }
}

/// Write rows either as CSV or as a JSON array of objects (empty cells become null).
fn write_table(path: &Path, format: Format, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
            w.write_record(header).map_err(|e| io_err(path, e))?;
            for r in rows {
                w.write_record(r.iter().map(|v| cell(*v))).map_err(|e| io_err(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))?;
        }
        Format::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::Value::Object(
                        header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| (h.to_string(), json_num(*v)))
                            .collect(),
                    )
                })
                .collect();
            let text = serde_json::to_string_pretty(&arr).expect("table is serializable");
            fs::write(path, text).map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

const TRANSFORM_HEADER: [&str; 11] = [
    "x",
    "m",
    "g",
    "G_series",
    "G_closed",
    "f_series",
    "f_closed",
    "V",
    "V_tilde",
    "W",
    "W_morse_target",
];

struct TransformInputs {
    m: ScalarField,
    g: ScalarField,
    v: ScalarField,
    g_closed: Option<ScalarField>,
    f_closed: Option<ScalarField>,
    target: Option<ScalarField>,
    convention: Convention,
    grid: GridSpec,
}

fn transform_inputs(rc: &RunConfig) -> Result<TransformInputs, CliError> {
    if let Some(m0) = rc.m0 {
        let base = SqueezeBaseline::new(m0)?;
        let s = 1.0 / m0.sqrt();
        return Ok(TransformInputs {
            m: base.mass(),
            g: base.conjugating_generator(),
            v: base.potential(),
            g_closed: Some(ScalarField::constant(s)),
            f_closed: Some(ScalarField::identity().scale(s - 1.0)),
            target: Some(base.target_potential()),
            convention: Convention::AsPrinted19b,
            grid: GridSpec::new(rc.xmin.unwrap_or(-5.0), rc.xmax.unwrap_or(5.0), rc.n.unwrap_or(401))?,
        });
    }
    let (sign, convention) = rc.resolved_pair()?;
    let cfg = rc.example(sign)?;
    let xs = cfg.x_star();
    Ok(TransformInputs {
        m: mass_family(cfg.alpha, cfg.beta)?,
        g: generator_for_mass(cfg.alpha, cfg.beta),
        v: potential_family(&cfg)?,
        g_closed: Some(G_closed(cfg.alpha, cfg.beta)?),
        f_closed: Some(f_closed(cfg.alpha, cfg.beta)?),
        target: morse_from_config(&cfg).ok().map(|p| morse_potential(&p)),
        convention,
        grid: GridSpec::new(
            rc.xmin.unwrap_or(xs - 6.0 / cfg.beta),
            rc.xmax.unwrap_or(xs + 2.0 / cfg.beta),
            rc.n.unwrap_or(400),
        )?,
    })
}

fn cmd_transform(rc: &RunConfig) -> Result<(), CliError> {
    let ti = transform_inputs(rc)?;
    let big_g = series_g(&ti.g, &rc.series);
    let vt = v_tilde(&ti.v, &big_g, ti.convention);
    let ev = |field: &ScalarField, x: f64| field.eval(x).ok().filter(|v| v.is_finite());
    let mut rows = Vec::with_capacity(ti.grid.n());
    let mut max_dev: Option<f64> = None;
    for x in ti.grid.nodes() {
        let f_pt = sum_series(SeriesKind::SmallF, &ti.g, x, 0, &rc.series)
            .ok()
            .filter(|p| p.admissible());
        let f_val = f_pt.map(|p| p.value());
        let w = f_val.and_then(|fv| ev(&vt, x + fv));
        let target = ti.target.as_ref().and_then(|t| ev(t, x)).filter(|_| w.is_some());
        if let (Some(a), Some(b)) = (w, target) {
            max_dev = Some(max_dev.unwrap_or(0.0).max((a - b).abs()));
        }
        rows.push(vec![
            Some(x),
            ev(&ti.m, x),
            ev(&ti.g, x),
            ev(&big_g, x),
            ti.g_closed.as_ref().and_then(|c| ev(c, x)),
            f_val,
            ti.f_closed.as_ref().and_then(|c| ev(c, x)),
            ev(&ti.v, x),
            ev(&vt, x),
            w,
            target,
        ]);
    }
    let path = rc.out_file("transform")?;
    write_table(&path, rc.format, &TRANSFORM_HEADER, &rows)?;
    let admissible = rows.iter().filter(|r| r[9].is_some()).count();
    println!("wrote {} ({} nodes, {} admissible)", path.display(), rows.len(), admissible);
    println!("convention: {}", ti.convention);
    if let Some(d) = max_dev {
        println!("max |W - W_morse_target| = {}", fmt(d));
    }
    Ok(())
}

const SPECTRUM_HEADER: [&str; 5] = ["level", "E_pdm", "E_transformed", "abs_diff", "rel_diff"];

fn cmd_spectrum(rc: &RunConfig) -> Result<(), CliError> {
    let sampling = if rc.corrupt {
        MassSampling::NextNode
    } else {
        MassSampling::HalfNode
    };
    let (a, b): (Vec<f64>, Vec<f64>) = if let Some(m0) = rc.m0 {
        let base = SqueezeBaseline::new(m0)?;
        let grid = GridSpec::new(rc.xmin.unwrap_or(-10.0), rc.xmax.unwrap_or(10.0), rc.n.unwrap_or(2000))?;
        let hp = hamiltonian_bdd_with(&base.mass(), &base.potential(), &grid, sampling)?;
        let ht = hamiltonian_constant(&base.target_potential(), &grid)?;
        if rc.k_levels > grid.n() {
            return Err(Error::InsufficientBoundStates {
                found: grid.n(),
                requested: rc.k_levels,
            }
            .into());
        }
        let rep = spectrum_compare(&hp, &ht, rc.k_levels);
        (rep.eigs_a, rep.eigs_b)
    } else {
        let (sign, _) = rc.resolved_pair()?;
        let cfg = rc.example(sign)?;
        let mut sc = SpectralConfig {
            k: rc.k_levels,
            ..SpectralConfig::default()
        };
        if let Some(n) = rc.n {
            sc.n_pdm = n;
            sc.n_morse = n;
        }
        let s = morse_spectra(&cfg, &sc, sampling)?;
        (s.pdm, s.morse)
    };
    let rows: Vec<Vec<Option<f64>>> = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(i, (x, y))| vec![Some(i as f64), Some(*x), Some(*y), Some((x - y).abs()), Some(rel_diff(*x, *y))])
        .collect();
    let path = rc.out_file("spectrum")?;
    write_table(&path, rc.format, &SPECTRUM_HEADER, &rows)?;
    println!("{:>5}  {:>24}  {:>24}  {:>24}", "level", "E_pdm", "E_transformed", "rel_diff");
    for r in &rows {
        println!(
            "{:>5}  {:>24}  {:>24}  {:>24}",
            r[0].unwrap(),
            fmt(r[1].unwrap()),
            fmt(r[2].unwrap()),
            fmt(r[4].unwrap())
        );
    }
    let max_rel = rows.iter().map(|r| r[4].unwrap()).fold(0.0, f64::max);
    println!("max rel_diff = {}", fmt(max_rel));
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_verify(rc: &RunConfig) -> Result<(), CliError> {
    let vc = VerifyConfig {
        example: rc.example(rc.fixed_sign().unwrap_or(A3Sign::Minus))?,
        sign_mode: match rc.fixed_sign() {
            Some(s) => SignMode::Fixed(s),
            None => SignMode::Auto,
        },
        series: rc.series,
        mass_sampling: if rc.corrupt {
            MassSampling::NextNode
        } else {
            MassSampling::HalfNode
        },
        spectral: SpectralConfig {
            k: rc.k_levels,
            ..SpectralConfig::default()
        },
        ..VerifyConfig::default()
    };
    let report = run_verify(&vc);
    fs::create_dir_all(&rc.out).map_err(|e| io_err(&rc.out, e))?;
    let path = rc.out.join("verify_report.json");
    fs::write(&path, report.to_json()).map_err(|e| io_err(&path, e))?;
    for name in CHECK_NAMES {
        if let Some(c) = report.check(name) {
            println!("{}", c.line());
        }
    }
    match (report.resolved.a3_sign, report.resolved.convention) {
        (Some(s), Some(c)) => println!("resolved: a3 sign {s}, convention {c}"),
        _ => println!("resolved: none"),
    }
    println!("wrote {}", path.display());
    if vc.sign_mode == SignMode::Auto && report.is_ambiguous() {
        return Err(Error::AmbiguousResolution("resolver did not certify a pair".into()).into());
    }
    if !report.all_passed() {
        return Err(CliError::Verification);
    }
    Ok(())
}

fn figure_rows(t: &FigureTable) -> Vec<Vec<Option<f64>>> {
    t.x.iter()
        .enumerate()
        .map(|(i, &x)| std::iter::once(Some(x)).chain(t.columns.iter().map(|c| Some(c[i]))).collect())
        .collect()
}

fn cmd_figures(rc: &RunConfig) -> Result<(), CliError> {
    // figure 2 is drawn with a3 > 0 unless minus is asked for
    let sign = match rc.sign {
        SignArg::Minus => A3Sign::Minus,
        _ => A3Sign::Plus,
    };
    for (stem, table, col) in [
        ("fig1", figure1_table()?, "m"),
        ("fig2", figure2_table(sign)?, "V"),
    ] {
        let header: Vec<String> = std::iter::once("x".to_string())
            .chain(table.betas.iter().map(|b| format!("{col}_beta_{b}")))
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let path = rc.out_file(stem)?;
        write_table(&path, rc.format, &header, &figure_rows(&table))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Transform(c) => cmd_transform(&RunConfig::resolve(c)?),
        Command::Spectrum(c) => cmd_spectrum(&RunConfig::resolve(c)?),
        Command::Verify(c) => cmd_verify(&RunConfig::resolve(c)?),
        Command::Figures(c) => cmd_figures(&RunConfig::resolve(c)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Core(err) => eprintln!("error: {err}"),
                CliError::Io(msg) => eprintln!("I/O error: {msg}"),
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Verification => eprintln!("verification failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
